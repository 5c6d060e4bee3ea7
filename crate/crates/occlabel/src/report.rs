//! CSV reports and evaluation over label directories.

use std::path::Path;

use occlabel_core::labels::NUM_CLASSES;
use occlabel_core::metrics::{ConfusionAccumulator, EvalReport};
use occlabel_core::voxelizer::{GridSpec, LabelGrid};

use crate::dataset::{labels_path, list_label_files, mask_path};
use crate::error::{Error, Result};
use crate::pipeline::{TemporalRow, ThresholdRow};
use crate::tensorio::{read_label_grid, read_mask};

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn eval_header() -> Vec<String> {
    let mut h: Vec<String> = ["sample_id", "iou", "miou", "miou_15"].map(String::from).to_vec();
    h.extend((0..NUM_CLASSES).map(|c| format!("iou_{c}")));
    h.push("evaluated_voxel_count".into());
    h
}

pub fn eval_row(sample_id: &str, r: &EvalReport) -> Vec<String> {
    let mut row = vec![sample_id.to_owned(), r.iou.to_string(), r.miou.to_string(), r.miou_15.to_string()];
    row.extend(r.per_class_iou.iter().map(|&v| opt(v)));
    row.push(r.evaluated_voxel_count.to_string());
    row
}

/// Per-sample reports and the aggregate over accumulated counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub rows: Vec<(String, EvalReport)>,
    pub aggregate: EvalReport,
}

impl EvalTable {
    pub fn write(&self, path: &Path) -> Result<()> {
        let header = eval_header();
        let mut rows: Vec<Vec<String>> = self.rows.iter().map(|(id, r)| eval_row(id, r)).collect();
        rows.push(eval_row("aggregate", &self.aggregate));
        write_csv(path, &header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)
    }
}

/// Scores `(id, pred, gt, mask)` tuples, accumulating counts for the aggregate.
pub fn evaluate_pairs<'a>(
    pairs: impl IntoIterator<Item = (String, &'a LabelGrid, &'a LabelGrid, Option<&'a occlabel_core::visibility::CameraMask>)>,
) -> Result<EvalTable> {
    let mut total = ConfusionAccumulator::new();
    let mut rows = Vec::new();
    for (id, pred, gt, mask) in pairs {
        let mut acc = ConfusionAccumulator::new();
        acc.accumulate(pred, gt, mask).map_err(|e| Error::from(e).in_sample(&id))?;
        total.merge(&acc);
        rows.push((id, acc.finalize()));
    }
    Ok(EvalTable {
        rows,
        aggregate: total.finalize(),
    })
}

/// Evaluates every `<id>.labels.vxt` of `gt_dir` against the same file in
/// `pred_dir`, optionally restricted by `<id>.mask.vxt` from `mask_dir`.
pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, mask_dir: Option<&Path>, spec: &GridSpec) -> Result<EvalTable> {
    let gt_ids = list_label_files(gt_dir)?;
    let pred_ids = list_label_files(pred_dir)?;
    if gt_ids != pred_ids {
        let missing: Vec<_> = gt_ids.iter().filter(|i| !pred_ids.contains(i)).collect();
        let extra: Vec<_> = pred_ids.iter().filter(|i| !gt_ids.contains(i)).collect();
        return Err(Error::Mismatch(format!(
            "sample sets differ: missing predictions {missing:?}, unexpected predictions {extra:?}"
        )));
    }
    let mut loaded = Vec::with_capacity(gt_ids.len());
    for id in &gt_ids {
        let load = || -> Result<_> {
            let pred = read_label_grid(labels_path(pred_dir, id), spec)?;
            let gt = read_label_grid(labels_path(gt_dir, id), spec)?;
            let mask = mask_dir.map(|d| read_mask(mask_path(d, id), spec)).transpose()?;
            Ok((pred, gt, mask))
        };
        loaded.push(load().map_err(|e| e.in_sample(id))?);
    }
    evaluate_pairs(
        gt_ids
            .iter()
            .zip(&loaded)
            .map(|(id, (p, g, m))| (id.clone(), p, g, m.as_ref())),
    )
}

pub fn write_threshold_csv(path: &Path, rows: &[ThresholdRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.threshold.to_string(),
                r.report.miou.to_string(),
                r.report.iou.to_string(),
                r.occupied_count.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["threshold", "miou", "iou", "occupied_count"], &rows)
}

pub fn write_temporal_csv(path: &Path, rows: &[TemporalRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.history.to_string(),
                r.report.miou.to_string(),
                r.report.iou.to_string(),
                r.densified_points.to_string(),
                r.occupied_count.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["history", "miou", "iou", "densified_points", "occupied_count"], &rows)
}
