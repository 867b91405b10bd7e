//! Progressive edge-collapse simplification.
//!
//! Collapse cost is the Garland-Heckbert quadric error of the merged vertex
//! plus `edge_weight * length²`. Collapses are taken cheapest first; ties go
//! to the lowest `(min, max)` vertex pair. A collapse is skipped when it
//! would rotate any surviving face normal by more than `normal_limit_deg`,
//! break the edge link condition, or (with `preserve_boundary`) move a
//! boundary vertex. The collapse sequence does not depend on the target, so
//! lower ratios always continue the sequence of higher ones.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{edge_face_counts, edge_key, TriangleMesh};

#[derive(Debug, Error, PartialEq)]
pub enum DecimationError {
    #[error("target_ratio must lie in (0, 1], got {0}")]
    TargetRatio(f64),
    #[error("edge_weight must be finite and non-negative, got {0}")]
    EdgeWeight(f64),
    #[error("normal_limit_deg must lie in (0, 180], got {0}")]
    NormalLimit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecimationParams {
    /// Fraction of the original face count to keep.
    pub target_ratio: f64,
    /// Weight of the squared edge length in the collapse cost.
    pub edge_weight: f64,
    /// Largest face normal rotation a single collapse may cause, degrees.
    pub normal_limit_deg: f64,
    pub preserve_boundary: bool,
}

impl DecimationParams {
    pub fn validate(&self) -> Result<(), DecimationError> {
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(DecimationError::TargetRatio(self.target_ratio));
        }
        if !(self.edge_weight.is_finite() && self.edge_weight >= 0.0) {
            return Err(DecimationError::EdgeWeight(self.edge_weight));
        }
        if !(self.normal_limit_deg > 0.0 && self.normal_limit_deg <= 180.0) {
            return Err(DecimationError::NormalLimit(self.normal_limit_deg));
        }
        Ok(())
    }

    /// Numeric encoding used as model features: the ratio as-is, enumerated
    /// axes as ordinals.
    pub fn encode(&self) -> [f64; 4] {
        [
            self.target_ratio,
            self.edge_weight,
            self.normal_limit_deg,
            if self.preserve_boundary { 1.0 } else { 0.0 },
        ]
    }
}

impl Default for DecimationParams {
    fn default() -> Self {
        Self {
            target_ratio: 0.5,
            edge_weight: 0.0,
            normal_limit_deg: 45.0,
            preserve_boundary: true,
        }
    }
}

/// Axes of the parameter search space; combinations enumerate row-major in
/// the order the axes are listed (target ratio slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub target_ratios: Vec<f64>,
    pub edge_weights: Vec<f64>,
    pub normal_limits_deg: Vec<f64>,
    pub preserve_boundary: Vec<bool>,
}

impl ParamGrid {
    pub fn combos(&self) -> Vec<DecimationParams> {
        let mut out = Vec::with_capacity(self.len());
        for &target_ratio in &self.target_ratios {
            for &edge_weight in &self.edge_weights {
                for &normal_limit_deg in &self.normal_limits_deg {
                    for &preserve_boundary in &self.preserve_boundary {
                        out.push(DecimationParams {
                            target_ratio,
                            edge_weight,
                            normal_limit_deg,
                            preserve_boundary,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.target_ratios.len() * self.edge_weights.len() * self.normal_limits_deg.len() * self.preserve_boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 6 ratios x 3 edge weights x 3 normal limits x 2 boundary modes = 108.
pub fn default_grid() -> ParamGrid {
    ParamGrid {
        target_ratios: vec![0.05, 0.1, 0.2, 0.35, 0.5, 0.75],
        edge_weights: vec![0.0, 0.5, 1.0],
        normal_limits_deg: vec![15.0, 45.0, 90.0],
        preserve_boundary: vec![false, true],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationReport {
    pub original_faces: usize,
    pub target_faces: usize,
    pub final_faces: usize,
    pub collapses: usize,
    pub skipped_collapses: usize,
    /// The target could not be reached; the result is the best achievable.
    pub infeasible: bool,
}

#[derive(Debug, Clone)]
pub struct Decimated {
    pub mesh: TriangleMesh,
    pub report: DecimationReport,
}

/// Smallest face count a collapse may leave (a tetrahedron).
const MIN_FACES: usize = 4;

pub fn decimate(mesh: &TriangleMesh, params: &DecimationParams) -> Result<Decimated, DecimationError> {
    params.validate()?;
    let original = mesh.face_count();
    let target = ((params.target_ratio * original as f64).round() as usize).max(MIN_FACES);
    let floor_hit = params.target_ratio * (original as f64) < MIN_FACES as f64;
    if params.target_ratio >= 1.0 || original <= target {
        return Ok(Decimated {
            mesh: mesh.clone(),
            report: DecimationReport {
                original_faces: original,
                target_faces: target,
                final_faces: original,
                collapses: 0,
                skipped_collapses: 0,
                infeasible: floor_hit,
            },
        });
    }
    let mut state = Collapser::new(mesh, params);
    state.run(target);
    let (out, final_faces) = state.finish();
    Ok(Decimated {
        mesh: out,
        report: DecimationReport {
            original_faces: original,
            target_faces: target,
            final_faces,
            collapses: state.collapses,
            skipped_collapses: state.skipped,
            infeasible: floor_hit || final_faces > target,
        },
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn plane(n: Vector3<f64>, d: f64, w: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Quadric([
            w * a * a,
            w * a * b,
            w * a * c,
            w * a * d,
            w * b * b,
            w * b * c,
            w * b * d,
            w * c * c,
            w * c * d,
            w * d * d,
        ])
    }

    fn add(&self, o: &Quadric) -> Quadric {
        let mut q = *self;
        for (x, y) in q.0.iter_mut().zip(o.0.iter()) {
            *x += y;
        }
        q
    }

    fn eval(&self, p: &Vector3<f64>) -> f64 {
        let q = &self.0;
        let (x, y, z) = (p.x, p.y, p.z);
        let v = q[0] * x * x
            + 2.0 * q[1] * x * y
            + 2.0 * q[2] * x * z
            + 2.0 * q[3] * x
            + q[4] * y * y
            + 2.0 * q[5] * y * z
            + 2.0 * q[6] * y
            + q[7] * z * z
            + 2.0 * q[8] * z
            + q[9];
        v.max(0.0)
    }

    fn minimizer(&self) -> Option<Vector3<f64>> {
        let q = &self.0;
        let a = Matrix3::new(q[0], q[1], q[2], q[1], q[4], q[5], q[2], q[5], q[7]);
        let scale = (q[0] + q[4] + q[7]) / 3.0;
        if scale <= 0.0 || a.determinant().abs() <= 1e-9 * scale * scale * scale {
            return None;
        }
        a.try_inverse().map(|inv| -(inv * Vector3::new(q[3], q[6], q[8])))
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    edge: (u32, u32),
    versions: (u32, u32),
    position: Vector3<f64>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // reversed: BinaryHeap pops the cheapest, then the lowest edge
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.edge.cmp(&self.edge))
    }
}

struct Collapser<'a> {
    params: &'a DecimationParams,
    pos: Vec<Vector3<f64>>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vertex_faces: Vec<Vec<u32>>,
    quadric: Vec<Quadric>,
    boundary: Vec<bool>,
    version: Vec<u32>,
    vertex_alive: Vec<bool>,
    alive_faces: usize,
    heap: BinaryHeap<Candidate>,
    cos_limit: f64,
    collapses: usize,
    skipped: usize,
}

impl<'a> Collapser<'a> {
    fn new(mesh: &TriangleMesh, params: &'a DecimationParams) -> Self {
        let n = mesh.vertex_count();
        let pos: Vec<Vector3<f64>> = mesh.vertices().iter().map(|p| p.coords).collect();
        let faces = mesh.faces().to_vec();
        let mut vertex_faces = vec![Vec::new(); n];
        let mut quadric = vec![Quadric::default(); n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v as usize].push(fi as u32);
            }
            let cross = (pos[f[1] as usize] - pos[f[0] as usize]).cross(&(pos[f[2] as usize] - pos[f[0] as usize]));
            let len = cross.norm();
            if len > 0.0 {
                let nrm = cross / len;
                let q = Quadric::plane(nrm, -nrm.dot(&pos[f[0] as usize]), 1.0);
                for &v in f {
                    quadric[v as usize] = quadric[v as usize].add(&q);
                }
            }
        }
        let mut boundary = vec![false; n];
        let counts = edge_face_counts(&faces);
        // boundary edges get a perpendicular constraint plane so open borders keep their shape
        for f in &faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if counts[&edge_key(a, b)] != 1 {
                    continue;
                }
                boundary[a as usize] = true;
                boundary[b as usize] = true;
                let fnorm = (pos[f[1] as usize] - pos[f[0] as usize]).cross(&(pos[f[2] as usize] - pos[f[0] as usize]));
                let e = pos[b as usize] - pos[a as usize];
                let c = e.cross(&fnorm);
                if c.norm() > 0.0 {
                    let c = c.normalize();
                    let q = Quadric::plane(c, -c.dot(&pos[a as usize]), 10.0);
                    quadric[a as usize] = quadric[a as usize].add(&q);
                    quadric[b as usize] = quadric[b as usize].add(&q);
                }
            }
        }
        let alive_faces = faces.len();
        let mut s = Collapser {
            params,
            pos,
            face_alive: vec![true; faces.len()],
            faces,
            vertex_faces,
            quadric,
            boundary,
            version: vec![0; n],
            vertex_alive: vec![true; n],
            alive_faces,
            heap: BinaryHeap::new(),
            cos_limit: params.normal_limit_deg.to_radians().cos(),
            collapses: 0,
            skipped: 0,
        };
        let mut edges = BTreeSet::new();
        for f in &s.faces {
            for k in 0..3 {
                edges.insert(edge_key(f[k], f[(k + 1) % 3]));
            }
        }
        for (a, b) in edges {
            s.push_edge(a, b);
        }
        s
    }

    fn push_edge(&mut self, a: u32, b: u32) {
        let (pa, pb) = (self.pos[a as usize], self.pos[b as usize]);
        let q = self.quadric[a as usize].add(&self.quadric[b as usize]);
        let mid = (pa + pb) * 0.5;
        let len = (pb - pa).norm();
        let mut best = (q.eval(&mid), mid);
        for c in [pa, pb] {
            let e = q.eval(&c);
            if e < best.0 {
                best = (e, c);
            }
        }
        if let Some(opt) = q.minimizer() {
            if (opt - mid).norm() <= 2.0 * len {
                let e = q.eval(&opt);
                if e < best.0 {
                    best = (e, opt);
                }
            }
        }
        self.heap.push(Candidate {
            cost: best.0 + self.params.edge_weight * len * len,
            edge: (a, b),
            versions: (self.version[a as usize], self.version[b as usize]),
            position: best.1,
        });
    }

    fn neighbours(&self, v: u32) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for &f in &self.vertex_faces[v as usize] {
            for &w in &self.faces[f as usize] {
                if w != v {
                    out.insert(w);
                }
            }
        }
        out
    }

    fn run(&mut self, target: usize) {
        while self.alive_faces > target {
            let Some(c) = self.heap.pop() else { break };
            let (a, b) = c.edge;
            if !self.vertex_alive[a as usize]
                || !self.vertex_alive[b as usize]
                || self.version[a as usize] != c.versions.0
                || self.version[b as usize] != c.versions.1
            {
                continue;
            }
            if !self.can_collapse(a, b, &c.position) {
                self.skipped += 1;
                continue;
            }
            self.collapse(a, b, c.position);
        }
    }

    fn can_collapse(&self, a: u32, b: u32, target: &Vector3<f64>) -> bool {
        let shared: Vec<u32> = self.vertex_faces[a as usize]
            .iter()
            .copied()
            .filter(|f| self.faces[*f as usize].contains(&b))
            .collect();
        if shared.is_empty() || shared.len() > 2 {
            return false;
        }
        if self.alive_faces - shared.len() < MIN_FACES {
            return false;
        }
        let edge_on_boundary = shared.len() == 1;
        let (ba, bb) = (self.boundary[a as usize], self.boundary[b as usize]);
        if self.params.preserve_boundary && (ba || bb) {
            return false;
        }
        if ba && bb && !edge_on_boundary {
            return false;
        }
        // link condition: the only common neighbours are the apexes of the shared faces
        let common = self.neighbours(a).intersection(&self.neighbours(b)).count();
        if common != shared.len() {
            return false;
        }

        for &v in &[a, b] {
            for &f in &self.vertex_faces[v as usize] {
                if shared.contains(&f) {
                    continue;
                }
                let tri = self.faces[f as usize];
                let p = tri.map(|w| self.pos[w as usize]);
                let old = (p[1] - p[0]).cross(&(p[2] - p[0]));
                let q = tri.map(|w| if w == a || w == b { *target } else { self.pos[w as usize] });
                let new = (q[1] - q[0]).cross(&(q[2] - q[0]));
                let (lo, ln) = (old.norm(), new.norm());
                let scale = (q[1] - q[0])
                    .norm_squared()
                    .max((q[2] - q[0]).norm_squared())
                    .max((q[2] - q[1]).norm_squared());
                if ln <= 1e-12 * scale || lo == 0.0 {
                    return false;
                }
                let cos = old.dot(&new) / (lo * ln);
                if cos < self.cos_limit || cos <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, a: u32, b: u32, position: Vector3<f64>) {
        let mut merged: Vec<u32> = Vec::new();
        let faces_b = std::mem::take(&mut self.vertex_faces[b as usize]);
        for &f in &faces_b {
            let tri = &mut self.faces[f as usize];
            if tri.contains(&a) {
                self.face_alive[f as usize] = false;
                self.alive_faces -= 1;
                for &w in tri.iter() {
                    if w != b {
                        self.vertex_faces[w as usize].retain(|&g| g != f);
                    }
                }
            } else {
                for w in tri.iter_mut() {
                    if *w == b {
                        *w = a;
                    }
                }
                merged.push(f);
            }
        }
        self.vertex_faces[a as usize].extend(merged);
        self.vertex_faces[a as usize].sort_unstable();
        self.pos[a as usize] = position;
        self.quadric[a as usize] = self.quadric[a as usize].add(&self.quadric[b as usize]);
        self.boundary[a as usize] |= self.boundary[b as usize];
        self.vertex_alive[b as usize] = false;
        self.collapses += 1;

        let ring = self.neighbours(a);
        self.version[a as usize] += 1;
        for &n in &ring {
            self.version[n as usize] += 1;
        }
        let mut edges = BTreeSet::new();
        for v in std::iter::once(a).chain(ring.iter().copied()) {
            for n in self.neighbours(v) {
                edges.insert(edge_key(v, n));
            }
        }
        for (x, y) in edges {
            self.push_edge(x, y);
        }
    }

    fn finish(&self) -> (TriangleMesh, usize) {
        let mut remap = vec![u32::MAX; self.pos.len()];
        let mut vertices = Vec::new();
        for (f, tri) in self.faces.iter().enumerate() {
            if !self.face_alive[f] {
                continue;
            }
            for &v in tri {
                remap[v as usize] = 0;
            }
        }
        for (v, slot) in remap.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = vertices.len() as u32;
                vertices.push(Point3::from(self.pos[v]));
            }
        }
        let faces: Vec<[u32; 3]> = self
            .faces
            .iter()
            .enumerate()
            .filter(|(f, _)| self.face_alive[*f])
            .map(|(_, t)| t.map(|v| remap[v as usize]))
            .collect();
        let n = faces.len();
        (TriangleMesh::from_parts_unchecked(vertices, faces), n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mesh::mesh_summary;

    fn params(r: f64) -> DecimationParams {
        DecimationParams {
            target_ratio: r,
            edge_weight: 0.0,
            normal_limit_deg: 90.0,
            preserve_boundary: false,
        }
    }

    #[test]
    fn icosphere_half() {
        let m = fixtures::icosphere(3, 1.0);
        let d = decimate(&m, &params(0.5)).unwrap();
        let f = d.mesh.face_count();
        assert!((576..=704).contains(&f), "{f}");
        let v0 = mesh_summary(&m).unwrap().volume;
        let v1 = mesh_summary(&d.mesh).unwrap().volume;
        assert!(((v1 - v0) / v0).abs() < 0.02);
        assert!(mesh_summary(&d.mesh).unwrap().watertight);
        assert!(!d.report.infeasible);
    }

    #[test]
    fn ratio_one_is_identity() {
        let m = fixtures::torus(1.0, 0.3, 16, 8);
        let d = decimate(&m, &params(1.0)).unwrap();
        assert_eq!(d.mesh, m);
    }

    #[test]
    fn tetrahedron_floor() {
        let m = fixtures::tetrahedron();
        let d = decimate(&m, &params(0.5)).unwrap();
        assert_eq!(d.mesh, m);
        assert!(d.report.infeasible);
    }

    #[test]
    fn invalid_params() {
        let m = fixtures::cube(1.0);
        assert_eq!(decimate(&m, &params(0.0)).unwrap_err(), DecimationError::TargetRatio(0.0));
        let mut p = params(0.5);
        p.normal_limit_deg = 0.0;
        assert!(decimate(&m, &p).is_err());
    }

    #[test]
    fn planar_grid_box_collapses_losslessly() {
        let m = fixtures::grid_box([1.0, 1.0, 1.0], [6, 6, 6]);
        let d = decimate(&m, &params(0.1)).unwrap();
        let s = mesh_summary(&d.mesh).unwrap();
        assert!((s.volume - 1.0).abs() < 1e-9, "{}", s.volume);
        assert!(d.mesh.face_count() <= 44);
    }

    #[test]
    fn boundary_preserved_on_open_mesh() {
        let m = fixtures::grid_box([1.0, 1.0, 1.0], [6, 6, 6]);
        // drop the top cap to open the mesh
        let faces: Vec<_> = m
            .faces()
            .iter()
            .copied()
            .filter(|f| !f.iter().all(|&v| m.vertices()[v as usize].z == 1.0))
            .collect();
        let open = TriangleMesh::new(m.vertices().to_vec(), faces).unwrap();
        let mut p = params(0.2);
        p.preserve_boundary = true;
        let d = decimate(&open, &p).unwrap();
        let rim = |mesh: &TriangleMesh| {
            let used: std::collections::BTreeSet<u32> = mesh.faces().iter().flatten().copied().collect();
            let mut pts: Vec<_> = used
                .iter()
                .map(|&i| mesh.vertices()[i as usize])
                .filter(|v| v.z == 1.0)
                .map(|v| (v.x.to_bits(), v.y.to_bits()))
                .collect();
            pts.sort();
            pts
        };
        assert_eq!(rim(&open), rim(&d.mesh));
    }

    #[test]
    fn normal_limit_restricts_collapses() {
        let m = fixtures::icosphere(3, 1.0);
        let tight = decimate(&m, &DecimationParams { normal_limit_deg: 5.0, ..params(0.05) }).unwrap();
        let loose = decimate(&m, &params(0.05)).unwrap();
        assert!(tight.mesh.face_count() > loose.mesh.face_count());
        assert!(tight.report.infeasible);
    }

    #[test]
    fn grid_sizes() {
        let g = default_grid();
        assert_eq!(g.combos().len(), 108);
        let set: std::collections::HashSet<String> = g.combos().iter().map(|c| format!("{c:?}")).collect();
        assert_eq!(set.len(), 108);
        let small = ParamGrid {
            target_ratios: vec![0.2, 0.5],
            edge_weights: vec![0.0],
            normal_limits_deg: vec![45.0],
            preserve_boundary: vec![false, true],
        };
        assert_eq!(small.combos().len(), 4);
        assert!(small.combos()[1].preserve_boundary);
        assert_eq!(small.combos()[2].target_ratio, 0.5);
    }
}
