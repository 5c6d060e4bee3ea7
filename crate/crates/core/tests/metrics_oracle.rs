#[path = "common/oracles.rs"]
mod oracles;

use occlabel_core::geometry::Vec3;
use occlabel_core::metrics::{compare_masked_unmasked, ConfusionAccumulator, MiouMode};
use occlabel_core::visibility::CameraMask;
use occlabel_core::voxelizer::{GridSpec, LabelGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec() -> GridSpec {
    GridSpec::new(Vec3::ZERO, Vec3::new(6.0, 5.0, 4.0), 1.0).unwrap()
}

fn random_grid(rng: &mut ChaCha8Rng, occupancy: f64, classes: u8) -> LabelGrid {
    let s = spec();
    let data = (0..s.voxel_count())
        .map(|_| if rng.random_bool(occupancy) { rng.random_range(0..classes) } else { 17 })
        .collect();
    LabelGrid::from_data(s, data).unwrap()
}

#[test]
fn counts_match_confusion_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..150 {
        let classes = rng.random_range(1..=17);
        let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let gt = random_grid(&mut rng, a, classes);
        let pred = random_grid(&mut rng, b, classes);
        let mask_data: Option<Vec<bool>> =
            (case % 2 == 0).then(|| (0..gt.data().len()).map(|_| rng.random_bool(0.6)).collect());
        let mask = mask_data.clone().map(|d| CameraMask::from_data(*gt.spec(), d).unwrap());

        let mut acc = ConfusionAccumulator::new();
        acc.accumulate(&pred, &gt, mask.as_ref()).unwrap();
        let o = oracles::brute_confusion(&pred, &gt, mask_data.as_deref());
        assert_eq!((acc.tp, acc.fp, acc.fn_), (o.tp, o.fp, o.fn_));
        assert_eq!((acc.occupied_tp, acc.occupied_fp, acc.occupied_fn), (o.occ_tp, o.occ_fp, o.occ_fn));
        assert_eq!(acc.evaluated, o.evaluated);

        let r = acc.finalize();
        for c in 0..18 {
            let d = o.tp[c] + o.fp[c] + o.fn_[c];
            let expect = (d > 0).then(|| 100.0 * o.tp[c] as f64 / d as f64);
            assert_eq!(r.per_class_iou[c], expect);
        }
    }
}

#[test]
fn identity_scores_exactly_one_hundred() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let g = random_grid(&mut rng, 0.4, 17);
        let mut acc = ConfusionAccumulator::new();
        acc.accumulate(&g, &g, None).unwrap();
        let r = acc.finalize();
        assert_eq!(r.iou, 100.0);
        assert_eq!(r.miou, 100.0);
    }
}

#[test]
fn aggregate_equals_concatenated_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs: Vec<(LabelGrid, LabelGrid)> =
        (0..4).map(|_| (random_grid(&mut rng, 0.5, 6), random_grid(&mut rng, 0.5, 6))).collect();
    let mut acc = ConfusionAccumulator::new();
    for (p, g) in &pairs {
        let mut one = ConfusionAccumulator::new();
        one.accumulate(p, g, None).unwrap();
        acc.merge(&one);
    }
    // one long grid holding all four pairs back to back
    let long = GridSpec::new(Vec3::ZERO, Vec3::new(24.0, 5.0, 4.0), 1.0).unwrap();
    let cat = |pick: fn(&(LabelGrid, LabelGrid)) -> &LabelGrid| {
        LabelGrid::from_data(long, pairs.iter().flat_map(|pr| pick(pr).data().to_vec()).collect()).unwrap()
    };
    let (p, g) = (cat(|pr| &pr.0), cat(|pr| &pr.1));
    let o = oracles::brute_confusion(&p, &g, None);
    assert_eq!((acc.tp, acc.fp, acc.fn_, acc.evaluated), (o.tp, o.fp, o.fn_, o.evaluated));
}

#[test]
fn masked_and_unmasked_match_single_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let gt = random_grid(&mut rng, 0.5, 8);
        let pred = random_grid(&mut rng, 0.5, 8);
        let mask =
            CameraMask::from_data(*gt.spec(), (0..gt.data().len()).map(|_| rng.random_bool(0.5)).collect()).unwrap();
        let (m, u) = compare_masked_unmasked(&pred, &gt, &mask).unwrap();
        let mut a = ConfusionAccumulator::new();
        a.accumulate(&pred, &gt, Some(&mask)).unwrap();
        let mut b = ConfusionAccumulator::new();
        b.accumulate(&pred, &gt, None).unwrap();
        assert_eq!(m, a.finalize());
        assert_eq!(u, b.finalize());
        assert!(b.finalize_with(MiouMode::Strict).miou <= u.miou);
    }
}
