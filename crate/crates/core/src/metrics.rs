//! Occupancy IoU and semantic mIoU over label grids.

use crate::labels::{EMPTY_LABEL, NUM_CLASSES, UNNAMED_CLASSES};
use crate::visibility::CameraMask;
use crate::voxelizer::LabelGrid;
use crate::{Error, Result};

/// How classes with no prediction and no ground truth enter the mIoU mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MiouMode {
    /// Skip classes whose IoU denominator is zero.
    #[default]
    PresentClasses,
    /// Average over all 17 occupied classes, counting absent ones as 0.
    Strict,
}

/// Confusion counts for the 18 classes and for binary occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionAccumulator {
    #[allow(missing_docs)]
    pub tp: [u64; NUM_CLASSES],
    #[allow(missing_docs)]
    pub fp: [u64; NUM_CLASSES],
    #[allow(missing_docs)]
    pub fn_: [u64; NUM_CLASSES],
    /// Occupied in both.
    pub occupied_tp: u64,
    /// Occupied in prediction only.
    pub occupied_fp: u64,
    /// Occupied in ground truth only.
    pub occupied_fn: u64,
    /// Voxels that passed the mask.
    pub evaluated: u64,
}

/// Final scores in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Binary occupancy IoU.
    pub iou: f64,
    /// Mean IoU over classes 0–16.
    pub miou: f64,
    /// Mean IoU over the 15 named classes (0–16 without "others" and "other_flat").
    pub miou_15: f64,
    /// Per-class IoU; `None` where the class is absent from both grids.
    /// Entry 17 is reported but never averaged.
    pub per_class_iou: [Option<f64>; NUM_CLASSES],
    #[allow(missing_docs)]
    pub evaluated_voxel_count: u64,
}

fn check_dims(pred: &LabelGrid, gt: &LabelGrid, mask: Option<&CameraMask>) -> Result<()> {
    if pred.spec() != gt.spec() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "prediction {:?} vs ground truth {:?}",
            pred.spec().dims(),
            gt.spec().dims()
        )));
    }
    if let Some(m) = mask {
        if m.spec() != gt.spec() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "mask {:?} vs ground truth {:?}",
                m.spec().dims(),
                gt.spec().dims()
            )));
        }
    }
    Ok(())
}

impl ConfusionAccumulator {
    #[allow(missing_docs)]
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one prediction / ground-truth pair, restricted to `mask` when given.
    pub fn accumulate(&mut self, pred: &LabelGrid, gt: &LabelGrid, mask: Option<&CameraMask>) -> Result<()> {
        check_dims(pred, gt, mask)?;
        let (p, g) = (pred.data(), gt.data());
        for i in 0..g.len() {
            if let Some(m) = mask {
                if !m.data()[i] {
                    continue;
                }
            }
            self.add_voxel(p[i], g[i]);
        }
        Ok(())
    }

    #[inline]
    fn add_voxel(&mut self, p: u8, g: u8) {
        self.evaluated += 1;
        if p == g {
            self.tp[g as usize] += 1;
        } else {
            self.fp[p as usize] += 1;
            self.fn_[g as usize] += 1;
        }
        match (p != EMPTY_LABEL, g != EMPTY_LABEL) {
            (true, true) => self.occupied_tp += 1,
            (true, false) => self.occupied_fp += 1,
            (false, true) => self.occupied_fn += 1,
            (false, false) => {}
        }
    }

    /// Adds another accumulator's counts.
    pub fn merge(&mut self, other: &ConfusionAccumulator) {
        for c in 0..NUM_CLASSES {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
        self.occupied_tp += other.occupied_tp;
        self.occupied_fp += other.occupied_fp;
        self.occupied_fn += other.occupied_fn;
        self.evaluated += other.evaluated;
    }

    /// IoU of class `c` in percent, `None` with a zero denominator.
    pub fn class_iou(&self, c: usize) -> Option<f64> {
        iou(self.tp[c], self.fp[c], self.fn_[c])
    }

    /// Scores with the default [`MiouMode::PresentClasses`] rule.
    pub fn finalize(&self) -> EvalReport {
        self.finalize_with(MiouMode::default())
    }

    /// Scores with an explicit mIoU rule.
    pub fn finalize_with(&self, mode: MiouMode) -> EvalReport {
        let mut per_class_iou = [None; NUM_CLASSES];
        for (c, slot) in per_class_iou.iter_mut().enumerate() {
            *slot = self.class_iou(c);
        }
        let occupied = 0..EMPTY_LABEL as usize;
        let miou = mean_iou(&per_class_iou, occupied.clone(), mode);
        let named = occupied.filter(|c| !UNNAMED_CLASSES.contains(&(*c as u8)));
        let miou_15 = mean_iou(&per_class_iou, named, mode);
        EvalReport {
            iou: iou(self.occupied_tp, self.occupied_fp, self.occupied_fn).unwrap_or(0.0),
            miou,
            miou_15,
            per_class_iou,
            evaluated_voxel_count: self.evaluated,
        }
    }
}

fn iou(tp: u64, fp: u64, fn_: u64) -> Option<f64> {
    let denom = tp + fp + fn_;
    (denom > 0).then(|| 100.0 * tp as f64 / denom as f64)
}

fn mean_iou(per_class: &[Option<f64>; NUM_CLASSES], classes: impl Iterator<Item = usize>, mode: MiouMode) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for c in classes {
        match (per_class[c], mode) {
            (Some(v), _) => {
                sum += v;
                n += 1;
            }
            (None, MiouMode::Strict) => n += 1,
            (None, MiouMode::PresentClasses) => {}
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores one pair inside and outside a mask: `(masked, unmasked)`.
pub fn compare_masked_unmasked(
    pred: &LabelGrid,
    gt: &LabelGrid,
    mask: &CameraMask,
) -> Result<(EvalReport, EvalReport)> {
    let mut masked = ConfusionAccumulator::new();
    masked.accumulate(pred, gt, Some(mask))?;
    let mut full = ConfusionAccumulator::new();
    full.accumulate(pred, gt, None)?;
    Ok((masked.finalize(), full.finalize()))
}
