use occlabel::config::PipelineConfig;
use occlabel::dataset::{labels_path, mask_path, write_manifest};
use occlabel::pipeline::{
    generate, lift_dataset, sweep_temporal, sweep_threshold, write_outputs, write_synthetic, LiftedSample, Reference,
};
use occlabel::report::evaluate_pairs;
use occlabel::tensorio::{read_label_grid, read_mask};
use occlabel_core::metrics::ConfusionAccumulator;
use occlabel_core::synth::courtyard;
use occlabel_core::visibility::CameraMask;
use occlabel_core::voxelizer::{voxelize, LabelGrid};
use occlabel_core::EMPTY_LABEL;

struct Fixture {
    _dir: tempfile::TempDir,
    lifted: Vec<LiftedSample>,
    gt: Vec<LabelGrid>,
    masks: Vec<CameraMask>,
}

fn fixture(cfg: &PipelineConfig) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let pool = cfg.thread_pool().unwrap();
    write_synthetic(&courtyard(4, 96, 54, true).unwrap(), dir.path(), cfg, &pool).unwrap();
    let lifted = lift_dataset(&dir.path().join("input"), cfg, &pool).unwrap();
    let spec = cfg.grid_spec();
    let gt = lifted
        .iter()
        .map(|s| read_label_grid(labels_path(dir.path().join("gt"), &s.sample_id), &spec).unwrap())
        .collect();
    let masks = lifted
        .iter()
        .map(|s| read_mask(mask_path(dir.path().join("masks"), &s.sample_id), &spec).unwrap())
        .collect();
    Fixture {
        _dir: dir,
        lifted,
        gt,
        masks,
    }
}

fn small_cfg(workers: usize) -> PipelineConfig {
    PipelineConfig {
        threshold: 3,
        workers,
        ..PipelineConfig::default()
    }
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let one = small_cfg(1);
    let three = small_cfg(3);
    let f = fixture(&one);
    let g = fixture(&three);
    for (a, b) in f.lifted.iter().zip(&g.lifted) {
        assert_eq!(a.cloud, b.cloud);
    }
    let a = generate(&f.lifted, &one, 3, &one.thread_pool().unwrap()).unwrap();
    let b = generate(&f.lifted, &three, 3, &three.thread_pool().unwrap()).unwrap();
    for (a, b) in a.iter().zip(&b) {
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.summary, b.summary);
    }
}

#[test]
fn zero_history_is_plain_voxelization() {
    let cfg = small_cfg(1);
    let f = fixture(&cfg);
    let out = generate(&f.lifted, &cfg, 0, &cfg.thread_pool().unwrap()).unwrap();
    for (s, o) in f.lifted.iter().zip(&out) {
        let ego = s.cloud.transformed(&s.global_to_ego);
        assert_eq!(o.grid, voxelize(&ego, &cfg.grid_spec(), cfg.threshold).unwrap());
        assert_eq!(o.summary.densified_points, s.points_after());
    }
}

#[test]
fn empty_manifest_gives_no_outputs() {
    let cfg = small_cfg(1);
    let dir = tempfile::tempdir().unwrap();
    write_manifest(dir.path(), &[]).unwrap();
    let pool = cfg.thread_pool().unwrap();
    let lifted = lift_dataset(dir.path(), &cfg, &pool).unwrap();
    assert!(lifted.is_empty());
    let out = generate(&lifted, &cfg, 13, &pool).unwrap();
    let target = dir.path().join("out");
    write_outputs(&target, &out).unwrap();
    let summary = std::fs::read_to_string(target.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

fn evaluate(pred: &[LabelGrid], gt: &[LabelGrid], masks: Option<&[CameraMask]>) -> occlabel_core::metrics::EvalReport {
    let mut acc = ConfusionAccumulator::new();
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        acc.accumulate(p, g, masks.map(|m| &m[i])).unwrap();
    }
    acc.finalize()
}

#[test]
fn sweeps_match_standalone_runs() {
    let cfg = small_cfg(1);
    let pool = cfg.thread_pool().unwrap();
    let f = fixture(&cfg);
    let reference = Reference {
        gt: &f.gt,
        masks: Some(&f.masks),
    };
    let rows = sweep_threshold(&f.lifted, &reference, &cfg, &pool).unwrap();
    assert_eq!(rows.len(), 25);
    for t in [1, 3, 10, 25] {
        let at = PipelineConfig { threshold: t, ..cfg.clone() };
        let out = generate(&f.lifted, &at, cfg.history, &pool).unwrap();
        let grids: Vec<LabelGrid> = out.into_iter().map(|o| o.grid).collect();
        let row = &rows[t as usize - 1];
        assert_eq!(row.threshold, t);
        assert_eq!(row.report, evaluate(&grids, &f.gt, Some(&f.masks)));
        assert_eq!(row.occupied_count, grids.iter().map(|g| g.occupied_count()).sum::<usize>());
    }

    let rows = sweep_temporal(&f.lifted, &reference, &cfg, 3, &pool).unwrap();
    assert_eq!(rows.iter().map(|r| r.history).collect::<Vec<_>>(), [0, 1, 2, 3]);
    for h in 0..=3 {
        let grids: Vec<LabelGrid> = generate(&f.lifted, &cfg, h, &pool).unwrap().into_iter().map(|o| o.grid).collect();
        assert_eq!(rows[h].report, evaluate(&grids, &f.gt, Some(&f.masks)));
    }
}

#[test]
fn sweep_rejects_missing_ground_truth() {
    let cfg = small_cfg(1);
    let f = fixture(&cfg);
    let reference = Reference {
        gt: &f.gt[..1],
        masks: None,
    };
    let e = sweep_threshold(&f.lifted, &reference, &cfg, &cfg.thread_pool().unwrap()).unwrap_err();
    assert_eq!(e.kind(), "mismatch");
}

#[test]
fn masked_score_ignores_errors_outside_the_mask() {
    let cfg = small_cfg(1);
    let f = fixture(&cfg);
    // correct inside the mask, wrong everywhere outside it
    let pred: Vec<LabelGrid> = f
        .gt
        .iter()
        .zip(&f.masks)
        .map(|(g, m)| {
            let data = g
                .data()
                .iter()
                .zip(m.data())
                .map(|(&l, &visible)| if visible { l } else if l == EMPTY_LABEL { 0 } else { EMPTY_LABEL })
                .collect();
            LabelGrid::from_data(*g.spec(), data).unwrap()
        })
        .collect();
    let masked = evaluate_pairs(
        (0..pred.len()).map(|i| (format!("s{i}"), &pred[i], &f.gt[i], Some(&f.masks[i]))),
    )
    .unwrap();
    let unmasked = evaluate_pairs((0..pred.len()).map(|i| (format!("s{i}"), &pred[i], &f.gt[i], None))).unwrap();
    assert_eq!(masked.aggregate.iou, 100.0);
    assert_eq!(masked.aggregate.miou, 100.0);
    assert!(unmasked.aggregate.miou < masked.aggregate.miou);
    assert!(unmasked.aggregate.iou < masked.aggregate.iou);
}

#[test]
fn corrupt_sample_is_attributed() {
    let cfg = small_cfg(1);
    let dir = tempfile::tempdir().unwrap();
    let pool = cfg.thread_pool().unwrap();
    write_synthetic(&courtyard(2, 16, 9, false).unwrap(), dir.path(), &cfg, &pool).unwrap();
    let input = dir.path().join("input");
    std::fs::write(input.join("t001").join("CAM_2.depth.vxt"), b"VXT1\x01").unwrap();
    let e = lift_dataset(&input, &cfg, &pool).unwrap_err();
    assert_eq!(e.sample_id(), Some("t001"));
    assert_eq!(e.kind(), "tensor");
}
