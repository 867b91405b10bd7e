//! Training data for the gating models: grid measurements, quality labels,
//! labeling-task export and label import.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{gate_feature_names, gate_features, quality_feature_names, quality_features, GatingModels, PipelineError};
use crate::decimate::{decimate, DecimationParams, ParamGrid};
use crate::forest::{train, Dataset, ForestConfig, ForestKind};
use crate::mesh::{write_obj, TriangleMesh};
use crate::metrics::{
    compute_similarity, measure, shape_ratios_flagged, ShapeMetrics, ShapeRatios, SimilarityConfig, SimilarityMetrics,
};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelValue {
    Ruined,
    Bad,
    Good,
    Perfect,
}

impl LabelValue {
    /// Uniform normalization onto [0, 1].
    pub fn score(self) -> f64 {
        match self {
            LabelValue::Ruined => 0.0,
            LabelValue::Bad => 1.0 / 3.0,
            LabelValue::Good => 2.0 / 3.0,
            LabelValue::Perfect => 1.0,
        }
    }

    pub fn accepted(self) -> bool {
        matches!(self, LabelValue::Good | LabelValue::Perfect)
    }
}

/// One rater judgment of one (object, configuration) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityLabel {
    pub object_id: String,
    pub param_id: usize,
    pub replicate: u32,
    pub rater: String,
    pub label: LabelValue,
}

/// Everything measured for one decimated (object, configuration) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeasurement {
    pub object_id: String,
    pub param_id: usize,
    pub params: DecimationParams,
    pub high_faces: usize,
    pub low_faces: usize,
    pub poly_ratio: f64,
    pub high: ShapeMetrics,
    /// Missing when the decimated mesh is too degenerate to measure.
    pub low: Option<ShapeMetrics>,
    pub ratios: Option<ShapeRatios>,
    pub similarity: Option<SimilarityMetrics>,
    pub flags: Vec<String>,
}

/// Decimates every object with every grid configuration and measures the
/// results. Output order is object-major, grid order within an object.
pub fn measure_grid(
    objects: &[(String, TriangleMesh)],
    grid: &ParamGrid,
    similarity: &SimilarityConfig,
) -> Result<Vec<PairMeasurement>, PipelineError> {
    let combos = grid.combos();
    let highs = objects
        .iter()
        .map(|(_, m)| measure(m))
        .collect::<Result<Vec<_>, _>>()?;
    let n = objects.len() * combos.len();
    let rows = par::map_range(n, |i| {
        let (o, c) = (i / combos.len(), i % combos.len());
        let (id, mesh) = &objects[o];
        let high = &highs[o];
        let params = combos[c];
        let low = decimate(mesh, &params)?.mesh;
        let mut m = PairMeasurement {
            object_id: id.clone(),
            param_id: c,
            params,
            high_faces: mesh.face_count(),
            low_faces: low.face_count(),
            poly_ratio: low.face_count() as f64 / mesh.face_count() as f64,
            high: high.metrics,
            low: None,
            ratios: None,
            similarity: None,
            flags: Vec::new(),
        };
        match measure(&low) {
            Ok(lm) => {
                let (ratios, flagged) = shape_ratios_flagged(high, &lm);
                m.flags.extend(flagged.iter().map(|f| format!("ratio_{f}_near_zero")));
                m.low = Some(lm.metrics);
                m.ratios = Some(ratios);
            }
            Err(e) => m.flags.push(format!("low_metrics: {e}")),
        }
        m.similarity = Some(compute_similarity(mesh, &low, similarity)?);
        Ok::<_, PipelineError>(m)
    });
    rows.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub quality: Dataset,
    pub poly: Dataset,
    pub gate: Dataset,
    /// Judgments left out of the gate set because the low mesh could not be
    /// measured.
    pub skipped_gate_rows: usize,
}

/// Poly rows: one per measurement. Quality and gate rows: one per label.
pub fn assemble_datasets(
    measurements: &[PairMeasurement],
    labels: &[QualityLabel],
) -> Result<TrainingData, PipelineError> {
    let mut poly = Dataset::new(quality_feature_names(), "poly_ratio");
    let mut quality = Dataset::new(quality_feature_names(), "quality");
    let mut gate = Dataset::new(gate_feature_names(), "accept");
    let mut index: HashMap<(&str, usize), &PairMeasurement> = HashMap::new();
    for m in measurements {
        poly.push(quality_features(&m.high, &m.params), m.poly_ratio);
        index.insert((m.object_id.as_str(), m.param_id), m);
    }
    let mut skipped = 0;
    for l in labels {
        let m = index
            .get(&(l.object_id.as_str(), l.param_id))
            .ok_or_else(|| PipelineError::UnknownPair {
                object_id: l.object_id.clone(),
                param_id: l.param_id,
            })?;
        quality.push(quality_features(&m.high, &m.params), l.label.score());
        match (&m.low, &m.ratios, &m.similarity) {
            (Some(low), Some(r), Some(s)) => {
                gate.push(gate_features(&m.high, low, r, s), if l.label.accepted() { 1.0 } else { 0.0 })
            }
            _ => skipped += 1,
        }
    }
    Ok(TrainingData {
        quality,
        poly,
        gate,
        skipped_gate_rows: skipped,
    })
}

pub fn build_training_dataset(
    objects: &[(String, TriangleMesh)],
    grid: &ParamGrid,
    labels: &[QualityLabel],
    similarity: &SimilarityConfig,
) -> Result<TrainingData, PipelineError> {
    assemble_datasets(&measure_grid(objects, grid, similarity)?, labels)
}

pub const ORACLE_MAX_DISTANCE: f64 = 0.01;
pub const ORACLE_MAX_NORMAL_DEG: f64 = 10.0;

/// Synthetic rater: accepts iff D < 0.01 and dN < 10°. Within 0.5x of both
/// limits is perfect, within 1.5x is bad, anything further is ruined.
pub fn oracle_label(s: &SimilarityMetrics) -> LabelValue {
    let d = s.mean_distance / ORACLE_MAX_DISTANCE;
    let n = s.normal_deviation_deg / ORACLE_MAX_NORMAL_DEG;
    if d < 0.5 && n < 0.5 {
        LabelValue::Perfect
    } else if d < 1.0 && n < 1.0 {
        LabelValue::Good
    } else if d < 1.5 && n < 1.5 {
        LabelValue::Bad
    } else {
        LabelValue::Ruined
    }
}

pub fn oracle_accepts(s: &SimilarityMetrics) -> bool {
    oracle_label(s).accepted()
}

/// `replicates` oracle judgments per measurement; unmeasurable pairs are
/// labeled ruined.
pub fn oracle_labels(measurements: &[PairMeasurement], replicates: u32) -> Vec<QualityLabel> {
    let mut out = Vec::with_capacity(measurements.len() * replicates as usize);
    for m in measurements {
        let label = m.similarity.as_ref().map_or(LabelValue::Ruined, oracle_label);
        for r in 1..=replicates {
            out.push(QualityLabel {
                object_id: m.object_id.clone(),
                param_id: m.param_id,
                replicate: r,
                rater: format!("oracle-{r}"),
                label,
            });
        }
    }
    out
}

pub fn train_gating_models(data: &TrainingData, config: &ForestConfig) -> Result<GatingModels, PipelineError> {
    let quality = train(&data.quality, config, ForestKind::Regressor)?;
    let poly = train(
        &data.poly,
        &ForestConfig {
            seed: config.seed.wrapping_add(1),
            ..*config
        },
        ForestKind::Regressor,
    )?;
    let gate = train(
        &data.gate,
        &ForestConfig {
            seed: config.seed.wrapping_add(2),
            ..*config
        },
        ForestKind::Classifier,
    )?;
    GatingModels::new(quality, poly, gate)
}

/// One entry of the pair manifest read by the labeling app. Paths are
/// relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTask {
    pub pair_id: String,
    pub object_id: String,
    pub param_id: usize,
    pub replicate: u32,
    pub high_path: String,
    pub low_path: String,
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes each high mesh once, each decimated mesh once, `grid.json` and
/// `pairs.json` (one entry per object x configuration x replicate).
pub fn export_label_tasks(
    objects: &[(String, TriangleMesh)],
    grid: &ParamGrid,
    replicates: u32,
    out_dir: &Path,
) -> Result<Vec<LabelTask>, PipelineError> {
    let mesh_dir = out_dir.join("meshes");
    fs::create_dir_all(&mesh_dir)?;
    let combos = grid.combos();
    let mut tasks = Vec::new();
    for (id, mesh) in objects {
        let stem = file_stem(id);
        let high_path = format!("meshes/{stem}.obj");
        write_obj(mesh, &out_dir.join(&high_path)).map_err(io_of)?;
        for (param_id, params) in combos.iter().enumerate() {
            let low = decimate(mesh, params)?.mesh;
            let low_path = format!("meshes/{stem}_p{param_id:03}.obj");
            write_obj(&low, &out_dir.join(&low_path)).map_err(io_of)?;
            for replicate in 1..=replicates {
                tasks.push(LabelTask {
                    pair_id: format!("{stem}-p{param_id:03}-r{replicate}"),
                    object_id: id.clone(),
                    param_id,
                    replicate,
                    high_path: high_path.clone(),
                    low_path: low_path.clone(),
                });
            }
        }
    }
    fs::write(out_dir.join("grid.json"), serde_json::to_string_pretty(grid)?)?;
    fs::write(out_dir.join("pairs.json"), serde_json::to_string_pretty(&tasks)?)?;
    Ok(tasks)
}

fn io_of(e: crate::mesh::ObjError) -> PipelineError {
    PipelineError::Io(std::io::Error::other(e.to_string()))
}

pub fn read_pair_manifest(path: &Path) -> Result<Vec<LabelTask>, PipelineError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Reads `object_id,param_id,replicate,rater,label` rows.
pub fn read_labels(path: &Path) -> Result<Vec<QualityLabel>, PipelineError> {
    read_labels_from(fs::File::open(path)?)
}

pub fn read_labels_from(reader: impl std::io::Read) -> Result<Vec<QualityLabel>, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<QualityLabel>().enumerate() {
        let label = rec.map_err(|e| PipelineError::LabelSyntax {
            line: i + 2,
            message: e.to_string(),
        })?;
        if label.replicate == 0 {
            return Err(PipelineError::LabelSyntax {
                line: i + 2,
                message: "replicate numbers start at 1".into(),
            });
        }
        out.push(label);
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[QualityLabel]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    for l in labels {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn grid4() -> ParamGrid {
        ParamGrid {
            target_ratios: vec![0.2, 0.5],
            edge_weights: vec![0.0],
            normal_limits_deg: vec![45.0],
            preserve_boundary: vec![false, true],
        }
    }

    fn objects() -> Vec<(String, TriangleMesh)> {
        vec![
            ("sphere".into(), fixtures::icosphere(2, 1.0)),
            ("ring".into(), fixtures::torus(1.0, 0.3, 16, 8)),
        ]
    }

    #[test]
    fn label_scores() {
        let all = [LabelValue::Ruined, LabelValue::Bad, LabelValue::Good, LabelValue::Perfect];
        let scores: Vec<f64> = all.iter().map(|l| l.score()).collect();
        assert_eq!(scores, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(all.iter().filter(|l| l.accepted()).count(), 2);
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let tasks = export_label_tasks(&objects(), &grid4(), 5, dir.path()).unwrap();
        assert_eq!(tasks.len(), 40);
        assert_eq!(read_pair_manifest(&dir.path().join("pairs.json")).unwrap(), tasks);
        for t in &tasks {
            assert!(dir.path().join(&t.low_path).exists());
        }
        let labels: Vec<QualityLabel> = tasks
            .iter()
            .map(|t| QualityLabel {
                object_id: t.object_id.clone(),
                param_id: t.param_id,
                replicate: t.replicate,
                rater: "r1".into(),
                label: if t.param_id % 2 == 0 { LabelValue::Good } else { LabelValue::Bad },
            })
            .collect();
        let path = dir.path().join("labels.csv");
        write_labels(&path, &labels).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("object_id,param_id,replicate,rater,label\n"));
        let back = read_labels(&path).unwrap();
        assert_eq!(back, labels);

        let sim = SimilarityConfig { samples: 300, seed: 0 };
        let data = build_training_dataset(&objects(), &grid4(), &back, &sim).unwrap();
        assert_eq!(data.quality.len(), 40);
        assert_eq!(data.poly.len(), 8);
        let accepted = data.gate.targets.iter().filter(|&&t| t == 1.0).count();
        assert_eq!(accepted, 20);
    }

    #[test]
    fn unknown_pair_rejected() {
        let sim = SimilarityConfig { samples: 200, seed: 0 };
        let ms = measure_grid(&objects()[..1], &grid4(), &sim).unwrap();
        let bad = QualityLabel {
            object_id: "nope".into(),
            param_id: 0,
            replicate: 1,
            rater: "r".into(),
            label: LabelValue::Good,
        };
        assert!(matches!(
            assemble_datasets(&ms, &[bad]),
            Err(PipelineError::UnknownPair { .. })
        ));
    }

    #[test]
    fn bad_label_value() {
        let csv = "object_id,param_id,replicate,rater,label\na,0,1,r,meh\n";
        assert!(matches!(
            read_labels_from(csv.as_bytes()),
            Err(PipelineError::LabelSyntax { line: 2, .. })
        ));
    }
}
