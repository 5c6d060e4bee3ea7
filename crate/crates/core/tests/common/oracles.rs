//! Slow, direct reference computations used to check the fast paths.
//!
//! Nothing here calls into the code path it checks: binning, k-NN, confusion
//! counting, ray sampling and loss terms are all recomputed from their
//! definitions.
#![allow(dead_code)]

use occlabel_core::geometry::{Intrinsics, RigidTransform, Vec3};
use occlabel_core::losses::{pseudo_loss, LogitsGrid, LossConfig};
use occlabel_core::voxelizer::{GridSpec, LabelGrid};

pub const EMPTY: u8 = 17;

/// Dense-histogram voxelization: bins every point, then labels voxels in
/// x/y/z nested loops.
pub fn brute_voxelize(points: &[Vec3], labels: &[u8], spec: &GridSpec, threshold: u32) -> Vec<u8> {
    let [nx, ny, nz] = spec.dims();
    let (min, s) = (spec.min(), spec.voxel_size());
    let mut hist = vec![[0u32; 18]; nx * ny * nz];
    for (p, &l) in points.iter().zip(labels) {
        let ix = ((p.x - min.x) / s).floor();
        let iy = ((p.y - min.y) / s).floor();
        let iz = ((p.z - min.z) / s).floor();
        if ix < 0.0 || iy < 0.0 || iz < 0.0 || ix >= nx as f64 || iy >= ny as f64 || iz >= nz as f64 {
            continue;
        }
        let (ix, iy, iz) = (ix as usize, iy as usize, iz as usize);
        hist[(ix * ny + iy) * nz + iz][l as usize] += 1;
    }
    let mut out = vec![EMPTY; nx * ny * nz];
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let i = (x * ny + y) * nz + z;
                let h = &hist[i];
                let total: u32 = h.iter().sum();
                if total < threshold {
                    continue;
                }
                let mut best = 0;
                for c in 0..18 {
                    if h[c] > h[best] {
                        best = c;
                    }
                }
                out[i] = best as u8;
            }
        }
    }
    out
}

/// Mean distance to the `k` nearest other points by full sort.
pub fn brute_knn_mean(points: &[Vec3], i: usize, k: usize) -> f64 {
    let mut d: Vec<f64> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, p)| {
            let (dx, dy, dz) = (p.x - points[i].x, p.y - points[i].y, p.z - points[i].z);
            (dx * dx + dy * dy + dz * dz).sqrt()
        })
        .collect();
    d.sort_by(f64::total_cmp);
    let d = &d[..k.min(d.len())];
    d.iter().sum::<f64>() / d.len() as f64
}

/// Statistical outlier removal from first principles; returns surviving indices.
pub fn brute_outlier_survivors(points: &[Vec3], k: usize, std_ratio: f64) -> Vec<usize> {
    if points.len() <= k {
        return (0..points.len()).collect();
    }
    let m: Vec<f64> = (0..points.len()).map(|i| brute_knn_mean(points, i, k)).collect();
    let n = m.len() as f64;
    let mu = m.iter().sum::<f64>() / n;
    let sigma = (m.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / n).sqrt();
    (0..points.len()).filter(|&i| m[i] <= mu + std_ratio * sigma).collect()
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct BruteConfusion {
    pub tp: [u64; 18],
    pub fp: [u64; 18],
    pub fn_: [u64; 18],
    pub occ_tp: u64,
    pub occ_fp: u64,
    pub occ_fn: u64,
    pub evaluated: u64,
}

/// Confusion counts by an x/y/z triple loop over a full 18×18 matrix.
pub fn brute_confusion(pred: &LabelGrid, gt: &LabelGrid, mask: Option<&[bool]>) -> BruteConfusion {
    let [nx, ny, nz] = gt.spec().dims();
    let mut matrix = [[0u64; 18]; 18];
    let mut out = BruteConfusion::default();
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let i = (x * ny + y) * nz + z;
                if let Some(m) = mask {
                    if !m[i] {
                        continue;
                    }
                }
                let (p, g) = (pred.data()[i] as usize, gt.data()[i] as usize);
                matrix[g][p] += 1;
                out.evaluated += 1;
                let (po, go) = (p != EMPTY as usize, g != EMPTY as usize);
                out.occ_tp += (po && go) as u64;
                out.occ_fp += (po && !go) as u64;
                out.occ_fn += (!po && go) as u64;
            }
        }
    }
    for c in 0..18 {
        out.tp[c] = matrix[c][c];
        out.fp[c] = (0..18).filter(|&g| g != c).map(|g| matrix[g][c]).sum();
        out.fn_[c] = (0..18).filter(|&p| p != c).map(|p| matrix[c][p]).sum();
    }
    out
}

/// Visibility by marching each pixel ray in fixed metric steps.
pub fn sampled_mask(grid: &LabelGrid, cameras: &[(Intrinsics, RigidTransform)], ray_stride: u32, step: f64) -> Vec<bool> {
    let spec = grid.spec();
    let [nx, ny, nz] = spec.dims();
    let (min, s) = (spec.min(), spec.voxel_size());
    let max = spec.max();
    let mut mask = vec![false; nx * ny * nz];
    for (intr, pose) in cameras {
        let o = pose.translation();
        let r = pose.rotation();
        for v in (0..intr.height).step_by(ray_stride as usize) {
            for u in (0..intr.width).step_by(ray_stride as usize) {
                // K⁻¹ (u, v, 1) for skew-free K
                let c = [(u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0];
                let d = Vec3::new(
                    r[0][0] * c[0] + r[0][1] * c[1] + r[0][2] * c[2],
                    r[1][0] * c[0] + r[1][1] * c[1] + r[1][2] * c[2],
                    r[2][0] * c[0] + r[2][1] * c[1] + r[2][2] * c[2],
                );
                let dn = d * (1.0 / d.norm());
                // farthest distance a ray can still be inside the grid
                let mut far = 0.0f64;
                for cx in [min.x, max.x] {
                    for cy in [min.y, max.y] {
                        for cz in [min.z, max.z] {
                            far = far.max(Vec3::new(cx, cy, cz).distance(o));
                        }
                    }
                }
                far += 2.0 * s;
                let mut t = 0.0;
                while t <= far {
                    let p = o + dn * t;
                    t += step;
                    let ix = ((p.x - min.x) / s).floor();
                    let iy = ((p.y - min.y) / s).floor();
                    let iz = ((p.z - min.z) / s).floor();
                    if ix < 0.0 || iy < 0.0 || iz < 0.0 || ix >= nx as f64 || iy >= ny as f64 || iz >= nz as f64 {
                        continue;
                    }
                    let i = (ix as usize * ny + iy as usize) * nz + iz as usize;
                    mask[i] = true;
                    if grid.data()[i] != EMPTY {
                        break;
                    }
                }
            }
        }
    }
    mask
}

/// Jaccard set loss `|M| / |Y ∪ M|` of a mistake set `M`.
fn jaccard_set_loss(mistakes: &[bool], fg: &[bool]) -> f64 {
    let m = mistakes.iter().filter(|&&b| b).count();
    if m == 0 {
        return 0.0;
    }
    let union = mistakes.iter().zip(fg).filter(|(&a, &b)| a || b).count();
    m as f64 / union as f64
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Lovász extension of the Jaccard set loss at error vector `e`, evaluated as
/// the maximum over all orderings of the greedy chain sum (valid because the
/// set loss is submodular). Exhaustive, so keep `e` to a handful of entries.
pub fn lovasz_extension_exhaustive(e: &[f64], fg: &[bool]) -> f64 {
    let n = e.len();
    let mut best = f64::NEG_INFINITY;
    for perm in permutations(n) {
        let mut set = vec![false; n];
        let mut prev = 0.0;
        let mut total = 0.0;
        for &i in &perm {
            set[i] = true;
            let cur = jaccard_set_loss(&set, fg);
            total += e[i] * (cur - prev);
            prev = cur;
        }
        best = best.max(total);
    }
    best
}

/// Lovász extension as the Choquet integral `∫₀¹ Δ({i : eᵢ ≥ t}) dt` for
/// errors in `[0, 1]`, integrated exactly over the breakpoints.
pub fn lovasz_extension_integral(e: &[f64], fg: &[bool]) -> f64 {
    let mut levels: Vec<f64> = e.to_vec();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut total = 0.0;
    for w in levels.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let set: Vec<bool> = e.iter().map(|&x| x >= hi).collect();
        total += (hi - lo) * jaccard_set_loss(&set, fg);
    }
    total
}

/// `1 − |P ∩ Y| / |P ∪ Y|` for hard sets.
pub fn one_minus_jaccard(pred: &[bool], fg: &[bool]) -> f64 {
    let inter = pred.iter().zip(fg).filter(|(&a, &b)| a && b).count();
    let union = pred.iter().zip(fg).filter(|(&a, &b)| a || b).count();
    1.0 - inter as f64 / union as f64
}

/// Direct-summation scal losses over a probability table `p[c][i]`.
pub fn scal_direct(p: &[Vec<f64>], y: &[u8]) -> (f64, f64) {
    let c_n = p.len();
    let n = y.len();
    let empty = c_n - 1;
    let triple = |q: &dyn Fn(usize) -> f64, t: &dyn Fn(usize) -> bool| {
        let mut v = 0.0;
        let inter: f64 = (0..n).filter(|&i| t(i)).map(|i| q(i)).sum();
        let mass: f64 = (0..n).map(|i| q(i)).sum();
        let pos = (0..n).filter(|&i| t(i)).count() as f64;
        let neg = n as f64 - pos;
        if pos > 0.0 {
            if mass > 0.0 {
                v += -(inter / mass).ln();
            }
            v += -(inter / pos).ln();
        }
        if neg > 0.0 {
            let tn: f64 = (0..n).filter(|&i| !t(i)).map(|i| 1.0 - q(i)).sum();
            v += -(tn / neg).ln();
        }
        v
    };
    let geom = triple(&|i| 1.0 - p[empty][i], &|i| y[i] as usize != empty);
    let mut sem = 0.0;
    let mut count = 0;
    for c in 0..empty {
        if y.iter().any(|&l| l as usize == c) {
            sem += triple(&|i| p[c][i], &|i| y[i] as usize == c);
            count += 1;
        }
    }
    (geom, if count == 0 { 0.0 } else { sem / count as f64 })
}

/// Central-difference gradient of `pseudo_loss(...).total`.
pub fn fd_gradient(logits: &LogitsGrid, target: &LabelGrid, cfg: &LossConfig, h: f64) -> Vec<f64> {
    let mut probe = logits.clone();
    (0..logits.data().len())
        .map(|k| {
            let orig = probe.data()[k];
            probe.data_mut()[k] = orig + h;
            let up = pseudo_loss(&probe, target, cfg).unwrap().total;
            probe.data_mut()[k] = orig - h;
            let down = pseudo_loss(&probe, target, cfg).unwrap().total;
            probe.data_mut()[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Smallest gap between two Lovász errors of the same class. The loss is
/// piecewise smooth with a kink wherever two errors swap order (the sorted
/// position fixes each error's weight), so finite differences are only
/// meaningful when no swap is within reach of the step.
pub fn lovasz_kink_gap(p: &[Vec<f64>], y: &[u8]) -> f64 {
    let mut gap = f64::INFINITY;
    for (c, pc) in p.iter().enumerate() {
        let mut e: Vec<f64> = pc
            .iter()
            .zip(y)
            .map(|(&q, &l)| if l as usize == c { 1.0 - q } else { q })
            .collect();
        e.sort_by(f64::total_cmp);
        for w in e.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
    }
    gap
}

/// Kink margin for steps of 1e-4: a softmax output moves by at most a
/// quarter of the logit step, so two errors close by at most 5e-5.
pub const MIN_KINK_GAP: f64 = 1e-4;
