use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twinkit::decimate::{default_grid, ParamGrid};
use twinkit::fixtures;
use twinkit::forest::{train, Dataset, Forest, ForestConfig, ForestError, ForestKind};
use twinkit::metrics::SimilarityConfig;
use twinkit::pipeline::{
    assemble_datasets, export_label_tasks, measure_grid, oracle_labels, read_labels_from, read_pair_manifest,
    run_pipeline, write_labels, LabelValue, PipelineError, QualityLabel, QualityModels,
};

fn small_config(seed: u64) -> ForestConfig {
    ForestConfig {
        tree_count: 20,
        max_depth: 8,
        min_samples_leaf: 1,
        max_features: None,
        seed,
    }
}

fn random_dataset(n: usize, d: usize, seed: u64, classes: Option<u32>) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..d).map(|i| format!("x{i}")).collect();
    let mut ds = Dataset::new(names, "y");
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = match classes {
            Some(c) => rng.random_range(0..c) as f64,
            None => rng.random_range(-5.0..5.0),
        };
        ds.push(x, y);
    }
    ds
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn regression_predictions_stay_in_target_range(seed in 0u64..1000, n in 10usize..60) {
        let ds = random_dataset(n, 3, seed, None);
        let f = train(&ds, &small_config(seed), ForestKind::Regressor).unwrap();
        let lo = ds.targets.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ds.targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for row in &ds.rows {
            let p = f.predict(row).unwrap();
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
        }
    }

    #[test]
    fn classifier_votes_are_observed_classes(seed in 0u64..1000) {
        let ds = random_dataset(40, 2, seed, Some(3));
        let f = train(&ds, &small_config(seed), ForestKind::Classifier).unwrap();
        for row in &ds.rows {
            let v = f.vote(row).unwrap();
            prop_assert!(ds.targets.contains(&(v.class as f64)));
            prop_assert!(v.fraction > 0.0 && v.fraction <= 1.0);
        }
    }

    #[test]
    fn save_load_is_lossless(seed in 0u64..1000) {
        let ds = random_dataset(30, 4, seed, None);
        let f = train(&ds, &small_config(seed), ForestKind::Regressor).unwrap();
        let back = Forest::from_json(&f.to_json()).unwrap();
        prop_assert_eq!(&back, &f);
        for row in &ds.rows {
            prop_assert_eq!(back.predict(row).unwrap().to_bits(), f.predict(row).unwrap().to_bits());
        }
    }
}

#[test]
fn same_seed_same_forest_different_seed_differs() {
    let ds = random_dataset(50, 3, 9, None);
    let a = train(&ds, &small_config(4), ForestKind::Regressor).unwrap();
    let b = train(&ds, &small_config(4), ForestKind::Regressor).unwrap();
    let c = train(&ds, &small_config(5), ForestKind::Regressor).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_ne!(a.to_json(), c.to_json());
}

#[test]
fn forest_file_errors() {
    let ds = random_dataset(20, 2, 1, None);
    let f = train(&ds, &small_config(1), ForestKind::Regressor).unwrap();
    let json = f.to_json();
    assert!(matches!(
        Forest::from_json(&json.replace("TWINKIT-FOREST", "OTHER")),
        Err(ForestError::Magic(_))
    ));
    assert!(Forest::from_json("{").is_err());
    assert!(matches!(f.predict(&[1.0]), Err(ForestError::FeatureLength { .. })));
    let tiny = random_dataset(5, 2, 1, None);
    assert!(matches!(
        train(&tiny, &small_config(1), ForestKind::Regressor),
        Err(ForestError::TooFewRecords { .. })
    ));
}

#[test]
fn dataset_csv_round_trip() {
    let ds = random_dataset(15, 3, 2, None);
    let mut buf = Vec::new();
    ds.write_csv_to(&mut buf).unwrap();
    let back = Dataset::from_csv_reader(buf.as_slice()).unwrap();
    assert_eq!(back, ds);
}

/// Accepts everything and counts how often each operation runs.
#[derive(Default)]
struct Counting {
    quality_calls: AtomicUsize,
}

impl QualityModels for Counting {
    fn predict_quality(&self, x: &[f64]) -> Result<f64, PipelineError> {
        self.quality_calls.fetch_add(1, Ordering::Relaxed);
        Ok(x[9])
    }
    fn predict_poly_ratio(&self, x: &[f64]) -> Result<f64, PipelineError> {
        Ok(x[9])
    }
    fn accept(&self, _: &[f64]) -> Result<bool, PipelineError> {
        Ok(true)
    }
}

fn small_grid() -> ParamGrid {
    ParamGrid {
        target_ratios: vec![0.5, 0.25],
        edge_weights: vec![0.0],
        normal_limits_deg: vec![45.0],
        preserve_boundary: vec![true],
    }
}

#[test]
fn pipeline_reduces_each_unique_mesh_once() {
    let model = fixtures::duplicate_model(14, 5);
    let models = Counting::default();
    let sim = SimilarityConfig { samples: 200, seed: 1 };
    let grid = small_grid();
    let (out, report) = run_pipeline(&model, &models, &grid, &sim, 2).unwrap();
    assert_eq!(models.quality_calls.load(Ordering::Relaxed), 5 * grid.len());
    assert_eq!(report.parts.len(), 5);
    assert_eq!(report.total_parts, 14);
    assert_eq!(report.duplicate_parts, 9);
    assert_eq!(out.mesh_parts().len(), 14);
    assert_eq!(twinkit::mesh::stored_mesh_count(&out), 5);
    assert!(report.faces_after < report.faces_before);
    let (out1, report1) = run_pipeline(&model, &models, &grid, &sim, 1).unwrap();
    assert_eq!(out1, out);
    assert_eq!(report1.without_timing(), report.without_timing());
}

#[test]
fn label_csv_contract() {
    let labels = vec![
        QualityLabel {
            object_id: "bracket".into(),
            param_id: 7,
            replicate: 1,
            rater: "r1".into(),
            label: LabelValue::Good,
        },
        QualityLabel {
            object_id: "gear, large".into(),
            param_id: 107,
            replicate: 5,
            rater: "r2".into(),
            label: LabelValue::Ruined,
        },
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    write_labels(&path, &labels).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("object_id,param_id,replicate,rater,label\n"));
    assert!(text.contains("bracket,7,1,r1,good\n"));
    assert_eq!(read_labels_from(text.as_bytes()).unwrap(), labels);

    let bad = "object_id,param_id,replicate,rater,label\nx,1,1,r,great\n";
    assert!(matches!(
        read_labels_from(bad.as_bytes()),
        Err(PipelineError::LabelSyntax { line: 2, .. })
    ));
}

#[test]
fn label_export_round_trip() {
    // 2 objects x 4 configurations x 5 replicates, labeled and re-imported.
    let objects = vec![
        ("part-a".to_string(), fixtures::mechanical_part(0)),
        ("part-b".to_string(), fixtures::icosphere(2, 1.0)),
    ];
    let grid = ParamGrid {
        target_ratios: vec![0.5, 0.2],
        edge_weights: vec![0.0, 1.0],
        normal_limits_deg: vec![45.0],
        preserve_boundary: vec![true],
    };
    let dir = tempfile::tempdir().unwrap();
    let tasks = export_label_tasks(&objects, &grid, 5, dir.path()).unwrap();
    assert_eq!(tasks.len(), 40);
    let manifest = read_pair_manifest(&dir.path().join("pairs.json")).unwrap();
    assert_eq!(manifest, tasks);
    for t in &manifest {
        assert!(dir.path().join(&t.high_path).is_file());
        assert!(dir.path().join(&t.low_path).is_file());
    }
    let labels: Vec<QualityLabel> = manifest
        .iter()
        .map(|t| QualityLabel {
            object_id: t.object_id.clone(),
            param_id: t.param_id,
            replicate: t.replicate,
            rater: "tester".into(),
            label: if t.param_id % 2 == 0 { LabelValue::Perfect } else { LabelValue::Bad },
        })
        .collect();
    let path = dir.path().join("labels.csv");
    write_labels(&path, &labels).unwrap();
    let imported = twinkit::pipeline::read_labels(&path).unwrap();
    let sim = SimilarityConfig { samples: 200, seed: 0 };
    let measurements = measure_grid(&objects, &grid, &sim).unwrap();
    let data = assemble_datasets(&measurements, &imported).unwrap();
    assert_eq!(data.poly.len(), 8);
    assert_eq!(data.quality.len(), 40);
    assert_eq!(data.skipped_gate_rows, 0);
    assert_eq!(data.gate.len(), 40);
    assert!(data.quality.targets.iter().all(|&y| y == 1.0 || (y - 1.0 / 3.0).abs() < 1e-15));
    assert_eq!(data.gate.targets.iter().filter(|&&y| y == 1.0).count(), 20);
}

#[test]
fn oracle_labels_cover_every_pair() {
    let objects = vec![("p".to_string(), fixtures::mechanical_part(1))];
    let sim = SimilarityConfig { samples: 200, seed: 0 };
    let m = measure_grid(&objects, &default_grid(), &sim).unwrap();
    let labels = oracle_labels(&m, 3);
    assert_eq!(labels.len(), 108 * 3);
    assert!(labels.iter().all(|l| l.replicate >= 1 && l.replicate <= 3));
}
