use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bvh::Bvh;
use super::MetricsError;
use crate::mesh::{edge_key, TriangleMesh};

/// How closely a reduced mesh follows its source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMetrics {
    /// Mean distance from samples on the low mesh to the high mesh, over the
    /// high mesh bounding box diagonal.
    pub mean_distance: f64,
    /// Mean angle between low and high surface normals at matched points, degrees.
    pub normal_deviation_deg: f64,
    /// Absolute difference of the mean crease dihedral angles, degrees.
    pub dihedral_deviation_deg: f64,
    /// Set when either mesh has no crease edges, making the dihedral term 0.
    pub open_mesh: bool,
}

impl SimilarityMetrics {
    pub const NAMES: [&'static str; 3] = ["mean_distance", "normal_deviation_deg", "dihedral_deviation_deg"];

    pub fn to_array(&self) -> [f64; 3] {
        [self.mean_distance, self.normal_deviation_deg, self.dihedral_deviation_deg]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
        }
    }
}

pub const MIN_SAMPLES: usize = 100;

/// Edges bending less than this (radians) are treated as flat and excluded
/// from the dihedral mean.
const CREASE_EPS: f64 = 1e-7;

pub fn compute_similarity(
    high: &TriangleMesh,
    low: &TriangleMesh,
    config: &SimilarityConfig,
) -> Result<SimilarityMetrics, MetricsError> {
    if high.is_empty() || low.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }
    if config.samples < MIN_SAMPLES {
        return Err(MetricsError::TooFewSamples(config.samples));
    }
    let diag = high.bounding_box().diagonal();
    if diag <= 0.0 {
        return Err(MetricsError::Degenerate("zero-size high mesh"));
    }
    let tie_eps = 1e-9 * diag;
    let bvh = Bvh::new(high);

    let mut dist_sum = 0.0;
    let mut angle_sum = 0.0;
    let mut count = 0usize;
    for (face, p) in sample_surface(low, config.samples, config.seed) {
        let Some(hit) = bvh.closest(&p) else { continue };
        let d = hit.distance_sq.sqrt();
        let mut n_high = Vector3::zeros();
        for f in bvh.faces_within(&p, d + tie_eps) {
            n_high += high.face_normal(f as usize);
        }
        if n_high.norm_squared() < 1e-24 {
            n_high = high.face_normal(hit.face as usize);
        }
        let n_low = low.face_normal(face);
        dist_sum += d;
        angle_sum += angle_between(&n_low, &n_high);
        count += 1;
    }
    let count = count.max(1) as f64;

    let (dihedral_deviation_deg, open_mesh) = match (mean_dihedral_deg(high), mean_dihedral_deg(low)) {
        (Some(h), Some(l)) => ((h - l).abs(), false),
        _ => (0.0, true),
    };

    Ok(SimilarityMetrics {
        mean_distance: dist_sum / count / diag,
        normal_deviation_deg: angle_sum / count,
        dihedral_deviation_deg,
        open_mesh,
    })
}

/// Angle between two vectors in degrees, via atan2 so identical directions
/// give exactly zero.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// Area-stratified surface samples: face `i` receives a share of `n`
/// proportional to its area (largest remainder), each placed uniformly at
/// random within the face.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Vec<(usize, Point3<f64>)> {
    let areas: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();
    let total: f64 = areas.iter().sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let mut counts = Vec::with_capacity(areas.len());
    let mut remainders = Vec::with_capacity(areas.len());
    let mut assigned = 0usize;
    for (f, a) in areas.iter().enumerate() {
        let exact = n as f64 * a / total;
        let base = exact.floor() as usize;
        counts.push(base);
        assigned += base;
        // quantized so orientation and scale noise cannot reorder ties
        remainders.push((((exact - base as f64) * 1e9).round() as i64, f));
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, f) in remainders.iter().take(n.saturating_sub(assigned)) {
        counts[f] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for (f, &k) in counts.iter().enumerate() {
        let [a, b, c] = mesh.triangle(f);
        for _ in 0..k {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let s = r1.sqrt();
            let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2);
            out.push((f, Point3::from(p)));
        }
    }
    out
}

/// Mean interior dihedral angle (180° minus the bend between face normals)
/// over manifold edges that are not flat. `None` if there are none.
pub fn mean_dihedral_deg(mesh: &TriangleMesh) -> Option<f64> {
    let mut adjacent: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            adjacent.entry(edge_key(f[k], f[(k + 1) % 3])).or_default().push(fi);
        }
    }
    let mut edges: Vec<_> = adjacent.into_iter().filter(|(_, fs)| fs.len() == 2).collect();
    edges.sort_unstable_by_key(|(e, _)| *e);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (_, fs) in edges {
        let bend = angle_between(&mesh.face_normal(fs[0]), &mesh.face_normal(fs[1]));
        if bend.to_radians() > CREASE_EPS {
            sum += 180.0 - bend;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}
