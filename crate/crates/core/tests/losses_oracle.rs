#[path = "common/oracles.rs"]
mod oracles;

use occlabel_core::geometry::Vec3;
use occlabel_core::losses::{
    cross_entropy, lovasz_per_class, pseudo_loss, pseudo_loss_grad, scal_losses, softmax_probs, LogitsGrid,
    LossConfig, Probabilities,
};
use occlabel_core::voxelizer::{GridSpec, LabelGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Label grid over `dims`; the core grid type is class-agnostic, so C < 18
/// targets just use small label values with `C − 1` as empty.
fn target(dims: [usize; 3], labels: Vec<u8>) -> LabelGrid {
    let spec = GridSpec::new(Vec3::ZERO, Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64), 1.0).unwrap();
    LabelGrid::from_data(spec, labels).unwrap()
}

fn random_instance(rng: &mut ChaCha8Rng, dims: [usize; 3], classes: usize) -> (LogitsGrid, LabelGrid) {
    let n = dims.iter().product::<usize>();
    let logits = (0..classes * n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes as u8)).collect();
    (LogitsGrid::new(classes, dims, logits).unwrap(), target(dims, labels))
}

fn table(p: &Probabilities) -> Vec<Vec<f64>> {
    (0..p.classes()).map(|c| (0..p.voxels()).map(|i| p.get(c, i)).collect()).collect()
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (logits, _) = random_instance(&mut rng, [4, 4, 2], 18);
    let p = softmax_probs(&logits).unwrap();
    for i in 0..p.voxels() {
        let s: f64 = (0..18).map(|c| p.get(c, i)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cross_entropy_matches_per_voxel_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let (logits, y) = random_instance(&mut rng, [2, 2, 1], 5);
        let weights: Vec<f64> = (0..5).map(|_| rng.random_range(0.5..2.0)).collect();
        let mut expect = 0.0;
        for i in 0..4 {
            let z: Vec<f64> = (0..5).map(|c| logits.data()[c * 4 + i]).collect();
            let lse = z.iter().map(|v| v.exp()).sum::<f64>().ln();
            let c = y.data()[i] as usize;
            expect += weights[c] * (lse - z[c]);
        }
        expect /= 4.0;
        let got = cross_entropy(&logits, &y, Some(&weights)).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }
}

#[test]
fn scal_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let (logits, y) = random_instance(&mut rng, [3, 3, 1], 5);
        let p = softmax_probs(&logits).unwrap();
        let (g, s) = scal_losses(&p, &y).unwrap();
        let (og, os) = oracles::scal_direct(&table(&p), y.data());
        assert!((g - og).abs() < 1e-12 && (s - os).abs() < 1e-12, "({g},{s}) vs ({og},{os})");
    }
}

#[test]
fn lovasz_three_voxel_case_matches_extension() {
    // one class present everywhere, true-class probabilities 0.9, 0.6, 0.2
    let probs = [0.9, 0.6, 0.2];
    let mut data = vec![0.0; 6];
    for (i, &p) in probs.iter().enumerate() {
        data[i] = p;
        data[3 + i] = 1.0 - p;
    }
    let p = Probabilities::from_data(2, 3, data).unwrap();
    let y = target([3, 1, 1], vec![0, 0, 0]);
    let got = lovasz_per_class(&p, &y, 0).unwrap().unwrap();
    let e: Vec<f64> = probs.iter().map(|q| 1.0 - q).collect();
    let fg = [true; 3];
    let exhaustive = oracles::lovasz_extension_exhaustive(&e, &fg);
    let integral = oracles::lovasz_extension_integral(&e, &fg);
    assert!((got - exhaustive).abs() < 1e-12);
    assert!((got - integral).abs() < 1e-12);
    // all-foreground chain reduces to the mean error
    assert!((got - 0.1).abs() < 1e-12 || (got - (0.8 + 0.4 + 0.1) / 3.0).abs() < 1e-12);
}

#[test]
fn lovasz_matches_extension_on_random_soft_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.random_range(1..=5);
        let (logits, y) = random_instance(&mut rng, [n, 1, 1], 3);
        let p = softmax_probs(&logits).unwrap();
        for c in 0..3 {
            let Some(got) = lovasz_per_class(&p, &y, c).unwrap() else { continue };
            let fg: Vec<bool> = y.data().iter().map(|&l| l as usize == c).collect();
            let e: Vec<f64> = (0..n).map(|i| if fg[i] { 1.0 - p.get(c, i) } else { p.get(c, i) }).collect();
            assert!((got - oracles::lovasz_extension_exhaustive(&e, &fg)).abs() < 1e-12);
            assert!((got - oracles::lovasz_extension_integral(&e, &fg)).abs() < 1e-12);
        }
    }
}

#[test]
fn lambda_zero_is_pure_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (logits, y) = random_instance(&mut rng, [4, 4, 2], 5);
    let cfg = LossConfig { lambda: 0.0, ..LossConfig::default() };
    let b = pseudo_loss(&logits, &y, &cfg).unwrap();
    assert_eq!(b.total, b.ce);
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 20 {
        let (logits, y) = random_instance(&mut rng, [4, 4, 2], 5);
        if oracles::lovasz_kink_gap(&table(&softmax_probs(&logits).unwrap()), y.data()) < oracles::MIN_KINK_GAP {
            continue;
        }
        checked += 1;
        let k = checked;
        let cfg = LossConfig { ignore_empty: k % 2 == 0, ..LossConfig::default() };
        let a = pseudo_loss_grad(&logits, &y, &cfg).unwrap();
        let n = oracles::fd_gradient(&logits, &y, &cfg, 1e-4);
        for (a, n) in a.iter().zip(&n) {
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}


