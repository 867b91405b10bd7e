use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::mesh::{mesh_summary, MeshSummary, TriangleMesh};

/// Scale-free descriptors of a single mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    /// Bounding box length / width (extents sorted descending).
    pub length_width: f64,
    /// Bounding box length / depth.
    pub length_depth: f64,
    /// π^(1/3) (6V)^(2/3) / A; 1 for a sphere.
    pub sphericity: f64,
    /// Mesh volume / bounding box volume.
    pub bbox_density: f64,
    /// Radius of the volume-equivalent sphere over the bounding sphere radius.
    pub shape_efficiency: f64,
    /// Population skewness of triangle areas. Zero when all areas match.
    pub area_skewness: f64,
    /// Raw (non-excess) kurtosis of triangle areas. Zero when all areas match.
    pub area_kurtosis: f64,
    /// Standard deviation over mean of triangle areas.
    pub area_cov: f64,
    /// Faces per vertex.
    pub connectivity: f64,
}

impl ShapeMetrics {
    pub const NAMES: [&'static str; 9] = [
        "length_width",
        "length_depth",
        "sphericity",
        "bbox_density",
        "shape_efficiency",
        "area_skewness",
        "area_kurtosis",
        "area_cov",
        "connectivity",
    ];

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.length_width,
            self.length_depth,
            self.sphericity,
            self.bbox_density,
            self.shape_efficiency,
            self.area_skewness,
            self.area_kurtosis,
            self.area_cov,
            self.connectivity,
        ]
    }
}

/// Shape metrics together with the summary they were derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub summary: MeshSummary,
    pub metrics: ShapeMetrics,
}

/// Relative spread below which triangle areas count as uniform.
const UNIFORM_AREA_COV: f64 = 1e-9;

pub fn measure(mesh: &TriangleMesh) -> Result<Measured, MetricsError> {
    let summary = mesh_summary(mesh).map_err(|_| MetricsError::EmptyMesh)?;
    let metrics = shape_metrics_with(mesh, &summary)?;
    Ok(Measured { summary, metrics })
}

pub fn compute_shape_metrics(mesh: &TriangleMesh) -> Result<ShapeMetrics, MetricsError> {
    measure(mesh).map(|m| m.metrics)
}

fn shape_metrics_with(mesh: &TriangleMesh, s: &MeshSummary) -> Result<ShapeMetrics, MetricsError> {
    if s.area <= 0.0 {
        return Err(MetricsError::Degenerate("zero surface area"));
    }
    let mut ext = s.bbox.extents();
    ext.sort_by(|a, b| b.total_cmp(a));
    let [length, width, depth] = ext;
    if depth <= 1e-12 * length {
        return Err(MetricsError::Degenerate("flat bounding box"));
    }
    if s.volume <= 1e-12 * s.area.powf(1.5) {
        return Err(MetricsError::Degenerate("zero enclosed volume"));
    }

    let v = s.volume;
    let sphericity = PI.cbrt() * (6.0 * v).powf(2.0 / 3.0) / s.area;
    let bbox_density = v / (length * width * depth);
    let equivalent_radius = (3.0 * v / (4.0 * PI)).cbrt();
    let shape_efficiency = equivalent_radius / bounding_sphere(mesh).1;

    let (area_skewness, area_kurtosis, area_cov) = area_moments(mesh);

    Ok(ShapeMetrics {
        length_width: length / width,
        length_depth: length / depth,
        sphericity,
        bbox_density,
        shape_efficiency,
        area_skewness,
        area_kurtosis,
        area_cov,
        connectivity: mesh.face_count() as f64 / mesh.vertex_count() as f64,
    })
}

/// Population skewness, raw kurtosis and coefficient of variation of the
/// triangle areas.
fn area_moments(mesh: &TriangleMesh) -> (f64, f64, f64) {
    let areas: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();
    let n = areas.len() as f64;
    let mean = areas.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for a in &areas {
        let d = a - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let sd = m2.sqrt();
    if sd <= UNIFORM_AREA_COV * mean {
        return (0.0, 0.0, 0.0);
    }
    (m3 / (sd * sd * sd), m4 / (m2 * m2), sd / mean)
}

/// Ritter's two-pass approximate bounding sphere. Only distances are used,
/// so the result does not depend on the mesh orientation; farthest-point
/// ties go to the lowest vertex index.
pub fn bounding_sphere(mesh: &TriangleMesh) -> (nalgebra::Point3<f64>, f64) {
    let pts = mesh.vertices();
    let farthest = |from: &nalgebra::Point3<f64>| -> usize {
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, p) in pts.iter().enumerate() {
            let d = (p - from).norm_squared();
            if d > best_d * (1.0 + 1e-12) {
                best = i;
                best_d = d;
            }
        }
        best
    };
    let y = farthest(&pts[0]);
    let z = farthest(&pts[y]);
    let mut centre = nalgebra::center(&pts[y], &pts[z]);
    let mut radius = (pts[z] - pts[y]).norm() * 0.5;
    for p in pts {
        let d = (p - centre).norm();
        if d > radius {
            let grown = 0.5 * (radius + d);
            centre += (p - centre) * ((grown - radius) / d);
            radius = grown;
        }
    }
    (centre, radius)
}

/// Low-poly over high-poly ratios of the shape quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeRatios {
    pub volume: f64,
    pub area: f64,
    pub sphericity: f64,
    pub bbox_density: f64,
    pub shape_efficiency: f64,
    pub connectivity: f64,
    pub area_skewness: f64,
    pub area_kurtosis: f64,
    pub area_cov: f64,
}

impl ShapeRatios {
    pub const NAMES: [&'static str; 9] = [
        "ratio_volume",
        "ratio_area",
        "ratio_sphericity",
        "ratio_bbox_density",
        "ratio_shape_efficiency",
        "ratio_connectivity",
        "ratio_area_skewness",
        "ratio_area_kurtosis",
        "ratio_area_cov",
    ];

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.volume,
            self.area,
            self.sphericity,
            self.bbox_density,
            self.shape_efficiency,
            self.connectivity,
            self.area_skewness,
            self.area_kurtosis,
            self.area_cov,
        ]
    }

    fn pairs(high: &Measured, low: &Measured) -> [(&'static str, f64, f64); 9] {
        let (h, l) = (&high.metrics, &low.metrics);
        [
            ("volume", high.summary.volume, low.summary.volume),
            ("area", high.summary.area, low.summary.area),
            ("sphericity", h.sphericity, l.sphericity),
            ("bbox_density", h.bbox_density, l.bbox_density),
            ("shape_efficiency", h.shape_efficiency, l.shape_efficiency),
            ("connectivity", h.connectivity, l.connectivity),
            ("area_skewness", h.area_skewness, l.area_skewness),
            ("area_kurtosis", h.area_kurtosis, l.area_kurtosis),
            ("area_cov", h.area_cov, l.area_cov),
        ]
    }

    fn from_values(v: [f64; 9]) -> Self {
        ShapeRatios {
            volume: v[0],
            area: v[1],
            sphericity: v[2],
            bbox_density: v[3],
            shape_efficiency: v[4],
            connectivity: v[5],
            area_skewness: v[6],
            area_kurtosis: v[7],
            area_cov: v[8],
        }
    }
}

const RATIO_EPS: f64 = 1e-12;

/// Strict ratios: any high-poly quantity with magnitude below 1e-12 is an
/// error naming the field.
pub fn compute_shape_ratios(high: &Measured, low: &Measured) -> Result<ShapeRatios, MetricsError> {
    let mut out = [0.0; 9];
    for (slot, (field, h, l)) in out.iter_mut().zip(ShapeRatios::pairs(high, low)) {
        if h.abs() < RATIO_EPS {
            return Err(MetricsError::NearZeroDenominator(field));
        }
        *slot = l / h;
    }
    Ok(ShapeRatios::from_values(out))
}

/// Ratios for feature vectors. Fields with a near-zero high-poly quantity
/// are set to 1.0 and their names returned alongside.
pub fn shape_ratios_flagged(high: &Measured, low: &Measured) -> (ShapeRatios, Vec<&'static str>) {
    let mut flagged = Vec::new();
    let mut out = [0.0; 9];
    for (slot, (field, h, l)) in out.iter_mut().zip(ShapeRatios::pairs(high, low)) {
        *slot = if h.abs() < RATIO_EPS {
            flagged.push(field);
            1.0
        } else {
            l / h
        };
    }
    (ShapeRatios::from_values(out), flagged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn unit_cube_metrics() {
        let m = compute_shape_metrics(&fixtures::cube(1.0)).unwrap();
        // π^(1/3) 6^(2/3) / 6
        let phi = PI.cbrt() * 6f64.powf(2.0 / 3.0) / 6.0;
        assert!((phi - 0.805996).abs() < 1e-6);
        assert!((m.sphericity - phi).abs() < 1e-12);
        assert!((m.bbox_density - 1.0).abs() < 1e-12);
        assert_eq!(m.length_width, 1.0);
        assert_eq!(m.length_depth, 1.0);
        assert_eq!(m.connectivity, 1.5);
        // all twelve triangles have the same area
        assert_eq!((m.area_skewness, m.area_kurtosis, m.area_cov), (0.0, 0.0, 0.0));
        // Ritter sphere of a cube is the circumsphere: r = sqrt(3)/2
        let e = (3.0 / (4.0 * PI)).cbrt() / (3f64.sqrt() / 2.0);
        assert!((m.shape_efficiency - e).abs() < 1e-12);
    }

    #[test]
    fn scaled_cube_is_identical() {
        let a = compute_shape_metrics(&fixtures::cube(1.0)).unwrap().to_array();
        let b = compute_shape_metrics(&fixtures::cube(100.0)).unwrap().to_array();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn icosphere_is_nearly_round() {
        let m = compute_shape_metrics(&fixtures::icosphere(3, 1.0)).unwrap();
        assert!((0.98..=1.0).contains(&m.sphericity), "{}", m.sphericity);
        assert!((0.97..=1.0).contains(&m.shape_efficiency), "{}", m.shape_efficiency);
    }

    #[test]
    fn extents_sorted() {
        let m = compute_shape_metrics(&fixtures::grid_box([1.0, 4.0, 2.0], [2, 2, 2])).unwrap();
        assert_eq!(m.length_width, 2.0);
        assert_eq!(m.length_depth, 4.0);
    }

    #[test]
    fn flat_mesh_is_degenerate() {
        let tri = TriangleMesh::new(
            vec![
                nalgebra::Point3::new(0.0, 0.0, 0.0),
                nalgebra::Point3::new(1.0, 0.0, 0.0),
                nalgebra::Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(compute_shape_metrics(&tri), Err(MetricsError::Degenerate(_))));
    }

    #[test]
    fn identical_meshes_give_unit_ratios() {
        let m = measure(&fixtures::torus(1.0, 0.3, 20, 10)).unwrap();
        let r = compute_shape_ratios(&m, &m).unwrap();
        assert!(r.to_array().iter().all(|&x| x == 1.0), "{r:?}");
    }

    #[test]
    fn half_volume_ratio() {
        let high = measure(&fixtures::cube(1.0)).unwrap();
        let mut low = high.clone();
        low.summary.volume *= 0.5;
        let r = shape_ratios_flagged(&high, &low);
        assert_eq!(r.0.volume, 0.5);
        assert_eq!(r.0.area, 1.0);
    }

    #[test]
    fn zero_denominator_is_flagged() {
        let cube = measure(&fixtures::cube(1.0)).unwrap();
        let err = compute_shape_ratios(&cube, &cube).unwrap_err();
        assert!(matches!(err, MetricsError::NearZeroDenominator("area_skewness")));
        let (r, flagged) = shape_ratios_flagged(&cube, &cube);
        assert_eq!(flagged, vec!["area_skewness", "area_kurtosis", "area_cov"]);
        assert!(r.to_array().iter().all(|x| x.is_finite()));
    }
}
