//! ML-gated reduction of whole models.
//!
//! For each unique mesh the regressors score every grid configuration, the
//! configurations are tried best first, and the gate classifier decides on
//! each trial. After `MAX_ATTEMPTS` rejections the high-poly mesh is kept.

mod training;

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimate::{decimate, DecimationError, DecimationParams, ParamGrid};
use crate::forest::{Forest, ForestError, ForestKind};
use crate::mesh::{find_duplicates, rebuild_model, Model, ModelError, ReducedMesh, TriangleMesh};
use crate::metrics::{
    compute_similarity, measure, shape_ratios_flagged, MetricsError, ShapeMetrics, ShapeRatios, SimilarityConfig,
    SimilarityMetrics,
};
use crate::par;

pub use training::{
    assemble_datasets, build_training_dataset, export_label_tasks, measure_grid, oracle_accepts, oracle_label,
    oracle_labels, read_labels, read_labels_from, read_pair_manifest, train_gating_models, write_labels, LabelTask,
    LabelValue, ORACLE_MAX_DISTANCE, ORACLE_MAX_NORMAL_DEG,
    PairMeasurement, QualityLabel, TrainingData,
};

pub const MAX_ATTEMPTS: usize = 10;
/// Lower clamp on the predicted poly ratio when scoring.
pub const POLY_RATIO_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{model} model expects {expected} features, the pipeline supplies {got}")]
    FeatureLayout {
        model: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{model} model is a {found:?}, expected a {expected:?}")]
    ModelKind {
        model: &'static str,
        expected: ForestKind,
        found: ForestKind,
    },
    #[error("label references unknown pair ({object_id}, param {param_id})")]
    UnknownPair { object_id: String, param_id: usize },
    #[error("label file line {line}: {message}")]
    LabelSyntax { line: usize, message: String },
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Decimation(#[from] DecimationError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Feature names for the quality and poly-ratio regressors.
pub fn quality_feature_names() -> Vec<String> {
    ShapeMetrics::NAMES
        .iter()
        .map(|n| format!("high_{n}"))
        .chain(["target_ratio", "edge_weight", "normal_limit_deg", "preserve_boundary"].map(String::from))
        .collect()
}

pub fn quality_features(high: &ShapeMetrics, params: &DecimationParams) -> Vec<f64> {
    let mut v = high.to_array().to_vec();
    v.extend(params.encode());
    v
}

/// Feature names for the gate classifier: high metrics, low metrics, shape
/// ratios and similarity metrics.
pub fn gate_feature_names() -> Vec<String> {
    let mut names: Vec<String> = ShapeMetrics::NAMES.iter().map(|n| format!("high_{n}")).collect();
    names.extend(ShapeMetrics::NAMES.iter().map(|n| format!("low_{n}")));
    names.extend(ShapeRatios::NAMES.iter().map(|n| n.to_string()));
    names.extend(SimilarityMetrics::NAMES.iter().map(|n| n.to_string()));
    names
}

pub fn gate_features(
    high: &ShapeMetrics,
    low: &ShapeMetrics,
    ratios: &ShapeRatios,
    similarity: &SimilarityMetrics,
) -> Vec<f64> {
    let mut v = high.to_array().to_vec();
    v.extend(low.to_array());
    v.extend(ratios.to_array());
    v.extend(similarity.to_array());
    v
}

/// The three models the pipeline consults.
pub trait QualityModels: Sync {
    fn predict_quality(&self, features: &[f64]) -> Result<f64, PipelineError>;
    fn predict_poly_ratio(&self, features: &[f64]) -> Result<f64, PipelineError>;
    fn accept(&self, gate_features: &[f64]) -> Result<bool, PipelineError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatingModels {
    pub quality: Forest,
    pub poly: Forest,
    pub gate: Forest,
}

impl GatingModels {
    pub const FILES: [&'static str; 3] = ["quality.json", "poly.json", "gate.json"];

    pub fn new(quality: Forest, poly: Forest, gate: Forest) -> Result<Self, PipelineError> {
        let q = quality_feature_names().len();
        let g = gate_feature_names().len();
        for (name, forest, kind, len) in [
            ("quality", &quality, ForestKind::Regressor, q),
            ("poly", &poly, ForestKind::Regressor, q),
            ("gate", &gate, ForestKind::Classifier, g),
        ] {
            if forest.kind != kind {
                return Err(PipelineError::ModelKind {
                    model: name,
                    expected: kind,
                    found: forest.kind,
                });
            }
            if forest.feature_count() != len {
                return Err(PipelineError::FeatureLayout {
                    model: name,
                    expected: forest.feature_count(),
                    got: len,
                });
            }
        }
        Ok(Self { quality, poly, gate })
    }

    pub fn load_dir(dir: &Path) -> Result<Self, PipelineError> {
        let [q, p, g] = Self::FILES.map(|f| Forest::load(&dir.join(f)));
        Self::new(q?, p?, g?)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        for (forest, file) in [&self.quality, &self.poly, &self.gate].into_iter().zip(Self::FILES) {
            forest.save(&dir.join(file))?;
        }
        Ok(())
    }
}

impl QualityModels for GatingModels {
    fn predict_quality(&self, features: &[f64]) -> Result<f64, PipelineError> {
        Ok(self.quality.predict(features)?)
    }

    fn predict_poly_ratio(&self, features: &[f64]) -> Result<f64, PipelineError> {
        Ok(self.poly.predict(features)?)
    }

    fn accept(&self, gate_features: &[f64]) -> Result<bool, PipelineError> {
        Ok(self.gate.vote(gate_features)?.class == 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredConfig {
    /// Index of the configuration in the grid.
    pub param_id: usize,
    pub params: DecimationParams,
    pub predicted_quality: f64,
    pub predicted_poly_ratio: f64,
    pub score: f64,
}

/// Scores every grid configuration and sorts by descending score. Equal
/// scores keep grid order.
pub fn score_configurations<M: QualityModels + ?Sized>(
    high: &ShapeMetrics,
    grid: &ParamGrid,
    models: &M,
) -> Result<Vec<ScoredConfig>, PipelineError> {
    let mut out = Vec::with_capacity(grid.len());
    for (param_id, params) in grid.combos().into_iter().enumerate() {
        let x = quality_features(high, &params);
        let q = clamp01(models.predict_quality(&x)?);
        let p = clamp01(models.predict_poly_ratio(&x)?);
        out.push(ScoredConfig {
            param_id,
            params,
            predicted_quality: q,
            predicted_poly_ratio: p,
            score: q / p.max(POLY_RATIO_FLOOR),
        });
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}

fn clamp01(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub param_id: usize,
    pub score: f64,
    pub faces: usize,
    pub similarity: Option<SimilarityMetrics>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartReport {
    pub part_id: String,
    /// Parts sharing this mesh, including the original.
    pub group_size: usize,
    pub attempts: usize,
    pub accepted: bool,
    pub fallback: bool,
    pub params: Option<DecimationParams>,
    pub param_id: Option<usize>,
    pub faces_before: usize,
    pub faces_after: usize,
    pub similarity: Option<SimilarityMetrics>,
    pub trials: Vec<Trial>,
    pub flags: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct PartOutcome {
    pub mesh: TriangleMesh,
    pub report: PartReport,
}

/// Tries scored configurations best first until the gate accepts one or
/// `MAX_ATTEMPTS` have been rejected, in which case the input comes back
/// unchanged with the fallback flag.
pub fn reduce_part<M: QualityModels + ?Sized>(
    mesh: &TriangleMesh,
    models: &M,
    grid: &ParamGrid,
    similarity: &SimilarityConfig,
) -> PartOutcome {
    let start = Instant::now();
    let mut report = PartReport {
        part_id: String::new(),
        group_size: 1,
        attempts: 0,
        accepted: false,
        fallback: true,
        params: None,
        param_id: None,
        faces_before: mesh.face_count(),
        faces_after: mesh.face_count(),
        similarity: None,
        trials: Vec::new(),
        flags: Vec::new(),
        wall_time_s: 0.0,
    };
    let finish = |mut report: PartReport, out: TriangleMesh| {
        report.wall_time_s = start.elapsed().as_secs_f64();
        PartOutcome { mesh: out, report }
    };

    let high = match measure(mesh) {
        Ok(h) => h,
        Err(e) => {
            report.flags.push(format!("high_metrics: {e}"));
            return finish(report, mesh.clone());
        }
    };
    let scored = match score_configurations(&high.metrics, grid, models) {
        Ok(s) => s,
        Err(e) => {
            report.flags.push(format!("scoring: {e}"));
            return finish(report, mesh.clone());
        }
    };

    for cfg in scored.iter().take(MAX_ATTEMPTS) {
        report.attempts += 1;
        let mut trial = Trial {
            param_id: cfg.param_id,
            score: cfg.score,
            faces: 0,
            similarity: None,
            accepted: false,
        };
        let outcome = evaluate_trial(mesh, &high, &cfg.params, models, similarity, &mut trial);
        match outcome {
            Ok(low) if trial.accepted => {
                report.accepted = true;
                report.fallback = false;
                report.params = Some(cfg.params);
                report.param_id = Some(cfg.param_id);
                report.faces_after = low.face_count();
                report.similarity = trial.similarity;
                report.trials.push(trial);
                return finish(report, low);
            }
            Ok(_) => {}
            Err(e) => report.flags.push(format!("attempt {}: {e}", report.attempts)),
        }
        report.trials.push(trial);
    }
    finish(report, mesh.clone())
}

fn evaluate_trial<M: QualityModels + ?Sized>(
    mesh: &TriangleMesh,
    high: &crate::metrics::Measured,
    params: &DecimationParams,
    models: &M,
    similarity: &SimilarityConfig,
    trial: &mut Trial,
) -> Result<TriangleMesh, PipelineError> {
    let low = decimate(mesh, params)?.mesh;
    trial.faces = low.face_count();
    let low_measured = measure(&low)?;
    let (ratios, _) = shape_ratios_flagged(high, &low_measured);
    let sim = compute_similarity(mesh, &low, similarity)?;
    trial.similarity = Some(sim);
    let x = gate_features(&high.metrics, &low_measured.metrics, &ratios, &sim);
    trial.accepted = models.accept(&x)?;
    Ok(low)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// One entry per duplicate group, ordered by original part id.
    pub parts: Vec<PartReport>,
    pub total_parts: usize,
    pub unique_parts: usize,
    pub duplicate_parts: usize,
    pub accepted: usize,
    pub fallbacks: usize,
    pub faces_before: usize,
    pub faces_after: usize,
    pub workers: usize,
    pub wall_time_s: f64,
}

impl ReductionReport {
    /// The report with all timing fields zeroed, for comparisons.
    pub fn without_timing(&self) -> ReductionReport {
        let mut r = self.clone();
        r.wall_time_s = 0.0;
        r.workers = 0;
        for p in &mut r.parts {
            p.wall_time_s = 0.0;
        }
        r
    }
}

/// Reduces every unique mesh of `model` once, spread over `workers`
/// threads, and rebuilds the model with duplicates sharing the result.
pub fn run_pipeline<M: QualityModels + ?Sized>(
    model: &Model,
    models: &M,
    grid: &ParamGrid,
    similarity: &SimilarityConfig,
    workers: usize,
) -> Result<(Model, ReductionReport), PipelineError> {
    let start = Instant::now();
    let groups = find_duplicates(model);
    let meshes: Vec<(&str, &TriangleMesh, usize)> = groups
        .iter()
        .map(|g| {
            let part = model.find_part(&g.original).expect("group original exists");
            let mesh = &*part.mesh().expect("mesh part").mesh;
            (g.original.as_str(), mesh, g.len())
        })
        .collect();
    let outcomes = par::map_with_workers(&meshes, workers, |(id, mesh, size)| {
        let mut out = reduce_part(mesh, models, grid, similarity);
        out.report.part_id = id.to_string();
        out.report.group_size = *size;
        out
    });

    let mut reduced = HashMap::new();
    let mut parts = Vec::with_capacity(outcomes.len());
    for out in outcomes {
        let r = if out.report.fallback {
            ReducedMesh::Fallback
        } else {
            ReducedMesh::Reduced(out.mesh)
        };
        reduced.insert(out.report.part_id.clone(), r);
        parts.push(out.report);
    }
    parts.sort_by(|a, b| a.part_id.cmp(&b.part_id));
    let rebuilt = rebuild_model(model, &reduced, &groups)?;

    let total_parts = model.mesh_parts().len();
    let report = ReductionReport {
        total_parts,
        unique_parts: groups.len(),
        duplicate_parts: total_parts - groups.len(),
        accepted: parts.iter().filter(|p| p.accepted).count(),
        fallbacks: parts.iter().filter(|p| p.fallback).count(),
        faces_before: model.face_count(),
        faces_after: rebuilt.face_count(),
        workers,
        wall_time_s: start.elapsed().as_secs_f64(),
        parts,
    };
    Ok((rebuilt, report))
}
