//! Triangle meshes, model hierarchies and the operations the geometry
//! pipeline needs on them: summaries, canonical hashing, duplicate detection
//! and rebuilding a model from reduced parts.

mod model;
pub mod obj;
mod transform;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use model::{
    find_duplicates, load_model, rebuild_model, save_model, stored_mesh_count, DuplicateGroup,
    MeshRef, Model, ModelError, Part, PartContent, ReducedMesh,
};
pub use obj::{parse_obj, read_obj, to_obj_string, write_obj, ObjError};
pub use transform::Transform;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh has no faces")]
    Empty,
    #[error("face {face} references vertex {index} but mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: u32,
        vertex_count: usize,
    },
    #[error("face {face} references vertex {index} more than once")]
    RepeatedVertex { face: usize, index: u32 },
    #[error("normal count {normals} does not match vertex count {vertices}")]
    NormalCount { normals: usize, vertices: usize },
    #[error("normal {index} is not unit length (|n| = {length})")]
    NonUnitNormal { index: usize, length: f64 },
    #[error("vertex {index} has a non-finite coordinate")]
    NonFinite { index: usize },
}

/// An indexed triangle mesh. Coordinates are in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mesh = Self {
            vertices,
            faces,
            normals: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self, MeshError> {
        if normals.len() != self.vertices.len() {
            return Err(MeshError::NormalCount {
                normals: normals.len(),
                vertices: self.vertices.len(),
            });
        }
        for (index, n) in normals.iter().enumerate() {
            let length = n.norm();
            if (length - 1.0).abs() > 1e-6 {
                return Err(MeshError::NonUnitNormal { index, length });
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    /// Builds a mesh whose invariants the caller has already established.
    pub(crate) fn from_parts_unchecked(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Self {
        debug_assert!(Self {
            vertices: vertices.clone(),
            faces: faces.clone(),
            normals: None
        }
        .validate()
        .is_ok());
        Self {
            vertices,
            faces,
            normals: None,
        }
    }

    fn validate(&self) -> Result<(), MeshError> {
        for (index, v) in self.vertices.iter().enumerate() {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(MeshError::NonFinite { index });
            }
        }
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &index in f {
                if index as usize >= n {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index,
                        vertex_count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                let index = if f[0] == f[1] || f[0] == f[2] { f[0] } else { f[1] };
                return Err(MeshError::RepeatedVertex { face: fi, index });
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal; its length is twice the triangle area.
    pub fn face_cross(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        let n = self.face_cross(face);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// Applies `f` to every vertex; normals are dropped.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            normals: None,
        }
    }

    pub fn scaled(&self, s: f64) -> TriangleMesh {
        self.map_vertices(|p| Point3::from(p.coords * s))
    }

    /// Canonical hash used to recognise identical meshes. Coordinates are
    /// quantized to `HASH_QUANTUM` model units before hashing, so scaled
    /// copies hash differently.
    pub fn canonical_hash(&self) -> [u8; 32] {
        let step = HASH_QUANTUM;
        let mut h = Sha256::new();
        h.update((self.vertices.len() as u64).to_le_bytes());
        h.update((self.faces.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for c in [v.x, v.y, v.z] {
                let q = (c / step).round() as i64;
                h.update(q.to_le_bytes());
            }
        }
        for f in &self.faces {
            for i in f {
                h.update(i.to_le_bytes());
            }
        }
        h.finalize().into()
    }
}

pub const HASH_QUANTUM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn from_points<'a>(points: impl Iterator<Item = &'a Point3<f64>>) -> Aabb {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in points {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Aabb { min, max }
    }

    pub fn extents(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn diagonal(&self) -> f64 {
        let e = self.extents();
        (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeshSummary {
    pub vertex_count: usize,
    pub face_count: usize,
    pub area: f64,
    /// Absolute enclosed volume. For open meshes this is measured about the
    /// vertex centroid and is only meaningful as a relative quantity.
    pub volume: f64,
    pub signed_volume: f64,
    pub bbox: Aabb,
    pub watertight: bool,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
}

/// Area, volume, bounds and closedness of a mesh.
pub fn mesh_summary(mesh: &TriangleMesh) -> Result<MeshSummary, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::Empty);
    }
    let n = mesh.vertex_count() as f64;
    let centroid = mesh
        .vertices()
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords)
        / n;

    let mut area = 0.0;
    let mut six_v = 0.0;
    for fi in 0..mesh.face_count() {
        let [a, b, c] = mesh.triangle(fi);
        area += 0.5 * (b - a).cross(&(c - a)).norm();
        let (a, b, c) = (a.coords - centroid, b.coords - centroid, c.coords - centroid);
        six_v += a.dot(&b.cross(&c));
    }
    let signed_volume = six_v / 6.0;

    let edges = edge_face_counts(mesh.faces());
    let boundary_edges = edges.values().filter(|&&c| c == 1).count();
    let nonmanifold_edges = edges.values().filter(|&&c| c > 2).count();

    Ok(MeshSummary {
        vertex_count: mesh.vertex_count(),
        face_count: mesh.face_count(),
        area,
        volume: signed_volume.abs(),
        signed_volume,
        bbox: mesh.bounding_box(),
        watertight: boundary_edges == 0 && nonmanifold_edges == 0,
        boundary_edges,
        nonmanifold_edges,
    })
}

/// Number of faces incident to each undirected edge.
pub fn edge_face_counts(faces: &[[u32; 3]]) -> HashMap<(u32, u32), u32> {
    let mut counts = HashMap::with_capacity(faces.len() * 3 / 2);
    for f in faces {
        for k in 0..3 {
            *counts.entry(edge_key(f[k], f[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    counts
}

#[inline]
pub(crate) fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}
