//! Reference implementation of the pseudo-label loss and its gradient.
//!
//! ```text
//! total = ce + λ · (geom_scal + sem_scal + lovasz)
//! ```
//!
//! Every term is a mean over voxels or classes, so values do not scale with
//! grid size. Logits are stored class-major: entry `(c, i)` sits at
//! `c · N + i`, where `i` is the voxel's linear index. The last class,
//! `C − 1`, is the empty class (17 for the full label space).
//!
//! The Lovász term is piecewise linear; its gradient holds the sort
//! permutation fixed, which is the usual subgradient and is exact away from
//! ties between per-voxel errors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{exp, ln, pairwise_sum, pairwise_sum_by};
use crate::voxelizer::LabelGrid;
use crate::{Error, Result};

/// Default weight of the geometry terms.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Per-class scores for every voxel of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsGrid {
    classes: usize,
    dims: [usize; 3],
    data: Vec<f64>,
}

impl LogitsGrid {
    /// Wraps class-major scores for a `dims` grid. At least two classes are needed.
    pub fn new(classes: usize, dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let voxels = dims[0] * dims[1] * dims[2];
        if classes < 2 {
            return Err(Error::invalid("logits", "need at least two classes"));
        }
        if voxels == 0 {
            return Err(Error::invalid("logits", "grid has no voxels"));
        }
        if data.len() != classes * voxels {
            return Err(Error::ShapeMismatch(format!(
                "{classes} classes x {dims:?} needs {} logits, got {}",
                classes * voxels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        Ok(LogitsGrid { classes, dims, data })
    }

    #[allow(missing_docs)]
    pub fn classes(&self) -> usize {
        self.classes
    }

    #[allow(missing_docs)]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Number of voxels.
    pub fn voxels(&self) -> usize {
        self.data.len() / self.classes
    }

    /// Class-major scores.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable scores, for perturbation checks. Callers keep them finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Softmax probabilities in the same class-major layout as [`LogitsGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    classes: usize,
    voxels: usize,
    data: Vec<f64>,
}

impl Probabilities {
    #[allow(missing_docs)]
    pub fn classes(&self) -> usize {
        self.classes
    }

    #[allow(missing_docs)]
    pub fn voxels(&self) -> usize {
        self.voxels
    }

    /// Probability of class `c` at voxel `i`.
    #[inline]
    pub fn get(&self, c: usize, i: usize) -> f64 {
        self.data[c * self.voxels + i]
    }

    /// Class-major probabilities.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Builds probabilities directly, e.g. hard 0/1 assignments. Each voxel
    /// must sum to 1 within 1e-9 with entries in `[0, 1]`.
    pub fn from_data(classes: usize, voxels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != classes * voxels {
            return Err(Error::ShapeMismatch(format!(
                "{classes} x {voxels} probabilities, got {}",
                data.len()
            )));
        }
        for i in 0..voxels {
            let mut s = 0.0;
            for c in 0..classes {
                let p = data[c * voxels + i];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid("probabilities", format!("entry {p} outside [0, 1]")));
                }
                s += p;
            }
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("probabilities", format!("voxel {i} sums to {s}")));
            }
        }
        Ok(Probabilities { classes, voxels, data })
    }
}

/// Breakdown of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    #[allow(missing_docs)]
    pub total: f64,
    #[allow(missing_docs)]
    pub ce: f64,
    #[allow(missing_docs)]
    pub geom_scal: f64,
    #[allow(missing_docs)]
    pub sem_scal: f64,
    #[allow(missing_docs)]
    pub lovasz: f64,
    #[allow(missing_docs)]
    pub lambda: f64,
}

/// Knobs of the pseudo-label loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Weight of the geometry terms, `≥ 0`.
    pub lambda: f64,
    /// Leave the empty class out of the Lovász class set.
    pub ignore_empty: bool,
    /// Optional per-class cross-entropy weights (length `C`).
    pub class_weights: Option<Vec<f64>>,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: DEFAULT_LAMBDA,
            ignore_empty: true,
            class_weights: None,
        }
    }
}

impl LossConfig {
    fn check(&self, classes: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be finite and non-negative"));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != classes {
                return Err(Error::ShapeMismatch(format!(
                    "{} class weights for {classes} classes",
                    w.len()
                )));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid("class weights", "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

fn check_target(classes: usize, dims: [usize; 3], target: &LabelGrid) -> Result<()> {
    if target.spec().dims() != dims {
        return Err(Error::ShapeMismatch(format!(
            "logits grid {dims:?} vs target {:?}",
            target.spec().dims()
        )));
    }
    if let Some(l) = target.data().iter().find(|&&l| l as usize >= classes) {
        return Err(Error::ShapeMismatch(format!(
            "target label {l} outside {classes} classes"
        )));
    }
    Ok(())
}

fn check_probs_target(probs: &Probabilities, target: &LabelGrid) -> Result<()> {
    if target.data().len() != probs.voxels {
        return Err(Error::ShapeMismatch(format!(
            "{} probability voxels vs {} target voxels",
            probs.voxels,
            target.data().len()
        )));
    }
    if let Some(l) = target.data().iter().find(|&&l| l as usize >= probs.classes) {
        return Err(Error::ShapeMismatch(format!(
            "target label {l} outside {} classes",
            probs.classes
        )));
    }
    Ok(())
}

/// Per-voxel softmax, stabilized by subtracting each voxel's max logit.
pub fn softmax_probs(logits: &LogitsGrid) -> Result<Probabilities> {
    if logits.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits"));
    }
    let (c_n, n) = (logits.classes, logits.voxels());
    let mut data = vec![0.0; c_n * n];
    let mut e = vec![0.0; c_n];
    for i in 0..n {
        let m = (0..c_n).map(|c| logits.data[c * n + i]).fold(f64::NEG_INFINITY, f64::max);
        for c in 0..c_n {
            e[c] = exp(logits.data[c * n + i] - m);
        }
        let z = pairwise_sum(&e);
        for c in 0..c_n {
            data[c * n + i] = e[c] / z;
        }
    }
    Ok(Probabilities {
        classes: c_n,
        voxels: n,
        data,
    })
}

/// `log p` computed from logits directly (no underflow to `-inf`).
fn log_prob(logits: &LogitsGrid, c: usize, i: usize) -> f64 {
    let n = logits.voxels();
    let m = (0..logits.classes).map(|k| logits.data[k * n + i]).fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<f64> = (0..logits.classes).map(|k| exp(logits.data[k * n + i] - m)).collect();
    logits.data[c * n + i] - m - ln(pairwise_sum(&terms))
}

/// Mean over voxels of `−w_y · log p_y`; the empty class is an ordinary target.
pub fn cross_entropy(logits: &LogitsGrid, target: &LabelGrid, class_weights: Option<&[f64]>) -> Result<f64> {
    check_target(logits.classes, logits.dims, target)?;
    if let Some(w) = class_weights {
        if w.len() != logits.classes {
            return Err(Error::ShapeMismatch(format!(
                "{} class weights for {} classes",
                w.len(),
                logits.classes
            )));
        }
    }
    let y = target.data();
    let n = logits.voxels();
    let total = pairwise_sum_by(n, &|i| {
        let c = y[i] as usize;
        let w = class_weights.map_or(1.0, |w| w[c]);
        -w * log_prob(logits, c, i)
    });
    Ok(total / n as f64)
}

/// Precision / recall / specificity log-losses for one soft mask against one
/// binary target, plus `∂/∂p_i` coefficients.
struct AffinityTerms {
    value: f64,
    /// gradient is `on_target · y_i + always + off_target · (1 − y_i)`
    on_target: f64,
    always: f64,
    off_target: f64,
}

fn affinity_terms(n: usize, p: &impl Fn(usize) -> f64, y: &impl Fn(usize) -> bool) -> AffinityTerms {
    let hit = pairwise_sum_by(n, &|i| if y(i) { p(i) } else { 0.0 });
    let mass = pairwise_sum_by(n, &|i| p(i));
    let positives = pairwise_sum_by(n, &|i| if y(i) { 1.0 } else { 0.0 });
    let negatives = n as f64 - positives;
    let true_neg = pairwise_sum_by(n, &|i| if y(i) { 0.0 } else { 1.0 - p(i) });

    let mut t = AffinityTerms {
        value: 0.0,
        on_target: 0.0,
        always: 0.0,
        off_target: 0.0,
    };
    if positives > 0.0 {
        if mass > 0.0 {
            t.value -= ln(hit / mass);
            t.on_target -= 1.0 / hit;
            t.always += 1.0 / mass;
        }
        t.value -= ln(hit / positives);
        t.on_target -= 1.0 / hit;
    }
    if negatives > 0.0 {
        t.value -= ln(true_neg / negatives);
        t.off_target += 1.0 / true_neg;
    }
    t
}

/// Scene-class affinity losses: `(geom_scal, sem_scal)`.
///
/// `sem_scal` averages the precision + recall + specificity log-losses over
/// the occupied classes present in the target. `geom_scal` applies the same
/// triple to binary occupancy, using `1 − p(empty)` as the occupied mass.
/// Terms whose denominator vanishes are skipped, and precision is only
/// scored when the target has positives.
pub fn scal_losses(probs: &Probabilities, target: &LabelGrid) -> Result<(f64, f64)> {
    check_probs_target(probs, target)?;
    let (geom, sem) = scal_with_grad(probs, target.data(), None);
    Ok((geom, sem))
}

fn scal_with_grad(probs: &Probabilities, y: &[u8], mut grad: Option<&mut [f64]>) -> (f64, f64) {
    let (c_n, n) = (probs.classes, probs.voxels);
    let empty = c_n - 1;

    let geom = affinity_terms(n, &|i| 1.0 - probs.get(empty, i), &|i| y[i] as usize != empty);
    if let Some(g) = grad.as_deref_mut() {
        for i in 0..n {
            let occ = y[i] as usize != empty;
            let d = geom.always + if occ { geom.on_target } else { geom.off_target };
            // occupied mass is 1 − p(empty)
            g[empty * n + i] -= d;
        }
    }

    let present: Vec<usize> = (0..empty).filter(|&c| y.iter().any(|&l| l as usize == c)).collect();
    let mut sem_values = Vec::with_capacity(present.len());
    for &c in &present {
        let t = affinity_terms(n, &|i| probs.get(c, i), &|i| y[i] as usize == c);
        sem_values.push(t.value);
        if let Some(g) = grad.as_deref_mut() {
            let scale = 1.0 / present.len() as f64;
            for i in 0..n {
                let on = y[i] as usize == c;
                g[c * n + i] += scale * (t.always + if on { t.on_target } else { t.off_target });
            }
        }
    }
    let sem = if present.is_empty() {
        0.0
    } else {
        pairwise_sum(&sem_values) / present.len() as f64
    };
    (geom.value, sem)
}

/// Classes entering the Lovász mean: those present in the target, minus the
/// empty class when `ignore_empty` is set.
pub fn lovasz_classes(classes: usize, target: &[u8], ignore_empty: bool) -> Vec<usize> {
    let mut present = vec![false; classes];
    for &l in target {
        present[l as usize] = true;
    }
    (0..classes)
        .filter(|&c| present[c] && !(ignore_empty && c == classes - 1))
        .collect()
}

/// Gradient of the Lovász extension of the Jaccard loss with respect to
/// errors sorted in descending order, given the sorted foreground flags.
pub fn lovasz_grad(fg_sorted: &[bool]) -> Vec<f64> {
    let gts = fg_sorted.iter().filter(|&&f| f).count() as f64;
    let mut out = Vec::with_capacity(fg_sorted.len());
    let (mut cum_fg, mut cum_bg) = (0.0, 0.0);
    let mut prev = 0.0;
    for &f in fg_sorted {
        if f {
            cum_fg += 1.0;
        } else {
            cum_bg += 1.0;
        }
        let intersection = gts - cum_fg;
        let union = gts + cum_bg;
        let jaccard = 1.0 - intersection / union;
        out.push(jaccard - prev);
        prev = jaccard;
    }
    out
}

/// Lovász-softmax term for class `c`, with optional `∂/∂p(c, ·)` written
/// (scaled by `scale`) into `grad`.
fn lovasz_class(probs: &Probabilities, y: &[u8], c: usize, grad: Option<(&mut [f64], f64)>) -> f64 {
    let n = probs.voxels;
    let errors: Vec<f64> = (0..n)
        .map(|i| {
            let p = probs.get(c, i);
            if y[i] as usize == c {
                1.0 - p
            } else {
                p
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // descending errors; equal errors keep voxel order
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]));
    let fg: Vec<bool> = order.iter().map(|&i| y[i] as usize == c).collect();
    let weights = lovasz_grad(&fg);
    let terms: Vec<f64> = order.iter().zip(&weights).map(|(&i, w)| errors[i] * w).collect();
    if let Some((g, scale)) = grad {
        for (&i, &w) in order.iter().zip(&weights) {
            let sign = if y[i] as usize == c { -1.0 } else { 1.0 };
            g[c * n + i] += scale * w * sign;
        }
    }
    pairwise_sum(&terms)
}

/// Lovász-softmax loss for a single class, or `None` if the class is absent
/// from the target.
pub fn lovasz_per_class(probs: &Probabilities, target: &LabelGrid, class: usize) -> Result<Option<f64>> {
    check_probs_target(probs, target)?;
    let y = target.data();
    if class >= probs.classes || !y.iter().any(|&l| l as usize == class) {
        return Ok(None);
    }
    Ok(Some(lovasz_class(probs, y, class, None)))
}

/// Mean Lovász-softmax loss over [`lovasz_classes`].
pub fn lovasz_softmax(probs: &Probabilities, target: &LabelGrid, ignore_empty: bool) -> Result<f64> {
    check_probs_target(probs, target)?;
    Ok(lovasz_with_grad(probs, target.data(), ignore_empty, None))
}

fn lovasz_with_grad(probs: &Probabilities, y: &[u8], ignore_empty: bool, mut grad: Option<&mut [f64]>) -> f64 {
    let classes = lovasz_classes(probs.classes, y, ignore_empty);
    if classes.is_empty() {
        return 0.0;
    }
    let scale = 1.0 / classes.len() as f64;
    let values: Vec<f64> = classes
        .iter()
        .map(|&c| lovasz_class(probs, y, c, grad.as_deref_mut().map(|g| (g, scale))))
        .collect();
    pairwise_sum(&values) * scale
}

/// Evaluates every term of the loss.
pub fn pseudo_loss(logits: &LogitsGrid, target: &LabelGrid, config: &LossConfig) -> Result<LossBreakdown> {
    evaluate(logits, target, config, false).map(|(b, _)| b)
}

/// Exact gradient of `total` with respect to the logits, class-major.
pub fn pseudo_loss_grad(logits: &LogitsGrid, target: &LabelGrid, config: &LossConfig) -> Result<Vec<f64>> {
    evaluate(logits, target, config, true).map(|(_, g)| g)
}

/// Loss and gradient in one pass.
pub fn pseudo_loss_with_grad(
    logits: &LogitsGrid,
    target: &LabelGrid,
    config: &LossConfig,
) -> Result<(LossBreakdown, Vec<f64>)> {
    evaluate(logits, target, config, true)
}

fn evaluate(
    logits: &LogitsGrid,
    target: &LabelGrid,
    config: &LossConfig,
    want_grad: bool,
) -> Result<(LossBreakdown, Vec<f64>)> {
    config.check(logits.classes)?;
    check_target(logits.classes, logits.dims, target)?;
    let probs = softmax_probs(logits)?;
    let y = target.data();
    let (c_n, n) = (logits.classes, logits.voxels());
    let weights = config.class_weights.as_deref();

    let ce = cross_entropy(logits, target, weights)?;
    let mut prob_grad = if want_grad { vec![0.0; c_n * n] } else { Vec::new() };
    let pg = want_grad.then_some(prob_grad.as_mut_slice());
    let (geom_scal, sem_scal, lovasz) = match pg {
        Some(g) => {
            let (geom, sem) = scal_with_grad(&probs, y, Some(&mut *g));
            let lov = lovasz_with_grad(&probs, y, config.ignore_empty, Some(g));
            (geom, sem, lov)
        }
        None => {
            let (geom, sem) = scal_with_grad(&probs, y, None);
            (geom, sem, lovasz_with_grad(&probs, y, config.ignore_empty, None))
        }
    };
    let lambda = config.lambda;
    let breakdown = LossBreakdown {
        total: ce + lambda * (geom_scal + sem_scal + lovasz),
        ce,
        geom_scal,
        sem_scal,
        lovasz,
        lambda,
    };
    if !want_grad {
        return Ok((breakdown, Vec::new()));
    }

    let mut grad = vec![0.0; c_n * n];
    for i in 0..n {
        // back through the softmax: dz_j = p_j (g_j − Σ_k p_k g_k)
        let dot: f64 = (0..c_n).map(|k| probs.get(k, i) * prob_grad[k * n + i]).sum();
        let yc = y[i] as usize;
        let w = weights.map_or(1.0, |w| w[yc]);
        for j in 0..c_n {
            let p = probs.get(j, i);
            let ce_grad = w * (p - if j == yc { 1.0 } else { 0.0 }) / n as f64;
            grad[j * n + i] = ce_grad + lambda * p * (prob_grad[j * n + i] - dot);
        }
    }
    Ok((breakdown, grad))
}

/// Central-difference check of [`pseudo_loss_grad`]: returns the largest
/// `|analytic − numeric| / max(|analytic|, |numeric|, floor)` over all logits.
pub fn gradient_check(
    logits: &LogitsGrid,
    target: &LabelGrid,
    config: &LossConfig,
    step: f64,
    floor: f64,
) -> Result<f64> {
    let analytic = pseudo_loss_grad(logits, target, config)?;
    let mut probe = logits.clone();
    let mut worst: f64 = 0.0;
    for k in 0..probe.data.len() {
        let orig = probe.data[k];
        probe.data[k] = orig + step;
        let up = pseudo_loss(&probe, target, config)?.total;
        probe.data[k] = orig - step;
        let down = pseudo_loss(&probe, target, config)?.total;
        probe.data[k] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}
