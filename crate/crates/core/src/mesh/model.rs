use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::obj::{read_obj, write_obj, ObjError};
use super::{Transform, TriangleMesh};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: schema violation: {message}")]
    Schema { path: String, message: String },
    #[error("part {part:?}: part content exclusive (a part holds either a mesh or children, not both)")]
    ContentExclusive { part: String },
    #[error("part {part:?}: part has neither a mesh nor children")]
    NoContent { part: String },
    #[error("part {part:?}: duplicate part id")]
    DuplicatePartId { part: String },
    #[error("part {part:?}: transform scale must be strictly positive and finite")]
    InvalidTransform { part: String },
    #[error("part {part:?}: mesh {path}: {source}")]
    Mesh {
        part: String,
        path: String,
        source: ObjError,
    },
    #[error("no reduced mesh for duplicate group original {part:?}")]
    MissingReduced { part: String },
    #[error("mesh path {path:?} is shared by different meshes")]
    PathConflict { path: String },
}

/// A mesh attached to a leaf part. Parts sharing a mesh share the `Arc`.
#[derive(Debug, Clone)]
pub struct MeshRef {
    /// Path relative to the manifest.
    pub path: String,
    pub mesh: Arc<TriangleMesh>,
    /// Set when reduction gave up and the original mesh was kept.
    pub fallback: bool,
}

impl PartialEq for MeshRef {
    fn eq(&self, other: &Self) -> bool {
        self.path == other.path && self.fallback == other.fallback && *self.mesh == *other.mesh
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PartContent {
    Mesh(MeshRef),
    Children(Vec<Part>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub id: String,
    pub transform: Transform,
    pub content: PartContent,
}

impl Part {
    pub fn mesh(&self) -> Option<&MeshRef> {
        match &self.content {
            PartContent::Mesh(m) => Some(m),
            PartContent::Children(_) => None,
        }
    }

    pub fn children(&self) -> &[Part] {
        match &self.content {
            PartContent::Children(c) => c,
            PartContent::Mesh(_) => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub name: String,
    pub transform: Transform,
    pub roots: Vec<Part>,
}

impl Model {
    /// All parts in document order (depth-first, pre-order).
    pub fn parts(&self) -> Vec<&Part> {
        fn walk<'a>(parts: &'a [Part], out: &mut Vec<&'a Part>) {
            for p in parts {
                out.push(p);
                walk(p.children(), out);
            }
        }
        let mut out = Vec::new();
        walk(&self.roots, &mut out);
        out
    }

    pub fn part_count(&self) -> usize {
        self.parts().len()
    }

    pub fn mesh_parts(&self) -> Vec<&Part> {
        self.parts().into_iter().filter(|p| p.mesh().is_some()).collect()
    }

    pub fn find_part(&self, id: &str) -> Option<&Part> {
        self.parts().into_iter().find(|p| p.id == id)
    }

    pub fn face_count(&self) -> usize {
        self.mesh_parts()
            .iter()
            .filter_map(|p| p.mesh())
            .map(|m| m.mesh.face_count())
            .sum()
    }

    /// Model-space matrix of every part, keyed by part id.
    pub fn world_matrices(&self) -> BTreeMap<String, Matrix4<f64>> {
        fn walk(parts: &[Part], parent: &Matrix4<f64>, out: &mut BTreeMap<String, Matrix4<f64>>) {
            for p in parts {
                let m = parent * p.transform.matrix();
                out.insert(p.id.clone(), m);
                walk(p.children(), &m, out);
            }
        }
        let mut out = BTreeMap::new();
        walk(&self.roots, &self.transform.matrix(), &mut out);
        out
    }
}

/// Returns the number of distinct mesh allocations referenced by the model.
pub fn stored_mesh_count(model: &Model) -> usize {
    model
        .mesh_parts()
        .iter()
        .filter_map(|p| p.mesh())
        .map(|m| Arc::as_ptr(&m.mesh))
        .collect::<HashSet<_>>()
        .len()
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestDoc {
    name: String,
    #[serde(default)]
    transform: Transform,
    #[serde(default)]
    parts: Vec<ManifestPart>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestPart {
    id: String,
    #[serde(default)]
    transform: Transform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mesh: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<ManifestPart>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    fallback: bool,
}

/// Loads a JSON model manifest and the OBJ files it references.
pub fn load_model(manifest_path: &Path) -> Result<Model, ModelError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|source| ModelError::Io {
        path: manifest_path.display().to_string(),
        source,
    })?;
    let doc: ManifestDoc = serde_json::from_str(&text).map_err(|e| ModelError::Schema {
        path: manifest_path.display().to_string(),
        message: e.to_string(),
    })?;
    if !doc.transform.is_valid() {
        return Err(ModelError::InvalidTransform {
            part: doc.name.clone(),
        });
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut loader = Loader {
        base,
        cache: HashMap::new(),
        seen: HashSet::new(),
    };
    let roots = doc
        .parts
        .into_iter()
        .map(|p| loader.part(p))
        .collect::<Result<_, _>>()?;
    Ok(Model {
        name: doc.name,
        transform: doc.transform,
        roots,
    })
}

struct Loader<'a> {
    base: &'a Path,
    cache: HashMap<String, Arc<TriangleMesh>>,
    seen: HashSet<String>,
}

impl Loader<'_> {
    fn part(&mut self, raw: ManifestPart) -> Result<Part, ModelError> {
        if !self.seen.insert(raw.id.clone()) {
            return Err(ModelError::DuplicatePartId { part: raw.id });
        }
        if !raw.transform.is_valid() {
            return Err(ModelError::InvalidTransform { part: raw.id });
        }
        let content = match (raw.mesh, raw.children) {
            (Some(_), Some(_)) => return Err(ModelError::ContentExclusive { part: raw.id }),
            (None, None) => return Err(ModelError::NoContent { part: raw.id }),
            (Some(path), None) => {
                let mesh = match self.cache.get(&path) {
                    Some(m) => m.clone(),
                    None => {
                        let full: PathBuf = self.base.join(&path);
                        let m = Arc::new(read_obj(&full).map_err(|source| ModelError::Mesh {
                            part: raw.id.clone(),
                            path: full.display().to_string(),
                            source,
                        })?);
                        self.cache.insert(path.clone(), m.clone());
                        m
                    }
                };
                PartContent::Mesh(MeshRef {
                    path,
                    mesh,
                    fallback: raw.fallback,
                })
            }
            (None, Some(children)) => PartContent::Children(
                children
                    .into_iter()
                    .map(|c| self.part(c))
                    .collect::<Result<_, _>>()?,
            ),
        };
        Ok(Part {
            id: raw.id,
            transform: raw.transform,
            content,
        })
    }
}

/// Writes the manifest plus one OBJ per distinct mesh allocation.
pub fn save_model(model: &Model, manifest_path: &Path) -> Result<(), ModelError> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut written: HashMap<String, *const TriangleMesh> = HashMap::new();
    for part in model.mesh_parts() {
        let m = part.mesh().expect("mesh part");
        let ptr = Arc::as_ptr(&m.mesh);
        match written.get(&m.path) {
            Some(&p) if p == ptr => continue,
            Some(_) => return Err(ModelError::PathConflict { path: m.path.clone() }),
            None => {}
        }
        let full = base.join(&m.path);
        if let Some(dir) = full.parent() {
            std::fs::create_dir_all(dir).map_err(|source| ModelError::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }
        write_obj(&m.mesh, &full).map_err(|source| ModelError::Mesh {
            part: part.id.clone(),
            path: full.display().to_string(),
            source,
        })?;
        written.insert(m.path.clone(), ptr);
    }

    fn raw(p: &Part) -> ManifestPart {
        let (mesh, children, fallback) = match &p.content {
            PartContent::Mesh(m) => (Some(m.path.clone()), None, m.fallback),
            PartContent::Children(c) => (None, Some(c.iter().map(raw).collect()), false),
        };
        ManifestPart {
            id: p.id.clone(),
            transform: p.transform,
            mesh,
            children,
            fallback,
        }
    }
    let doc = ManifestDoc {
        name: model.name.clone(),
        transform: model.transform,
        parts: model.roots.iter().map(raw).collect(),
    };
    let json = serde_json::to_string_pretty(&doc).expect("manifest serializes");
    std::fs::write(manifest_path, json).map_err(|source| ModelError::Io {
        path: manifest_path.display().to_string(),
        source,
    })
}

/// Mesh-bearing parts that share one mesh. The first part in document order
/// is the original; only it gets reduced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DuplicateGroup {
    pub original: String,
    pub duplicates: Vec<(String, Transform)>,
}

impl DuplicateGroup {
    pub fn len(&self) -> usize {
        1 + self.duplicates.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn members(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.original.as_str()).chain(self.duplicates.iter().map(|(id, _)| id.as_str()))
    }
}

/// Partitions the mesh-bearing parts by canonical mesh hash.
pub fn find_duplicates(model: &Model) -> Vec<DuplicateGroup> {
    let mut groups: Vec<DuplicateGroup> = Vec::new();
    let mut by_hash: HashMap<[u8; 32], usize> = HashMap::new();
    let mut hash_of_alloc: HashMap<*const TriangleMesh, [u8; 32]> = HashMap::new();
    for part in model.mesh_parts() {
        let m = part.mesh().expect("mesh part");
        let hash = *hash_of_alloc
            .entry(Arc::as_ptr(&m.mesh))
            .or_insert_with(|| m.mesh.canonical_hash());
        match by_hash.get(&hash) {
            Some(&g) => groups[g].duplicates.push((part.id.clone(), part.transform)),
            None => {
                by_hash.insert(hash, groups.len());
                groups.push(DuplicateGroup {
                    original: part.id.clone(),
                    duplicates: Vec::new(),
                });
            }
        }
    }
    groups
}

/// Outcome of reducing one duplicate group's original.
#[derive(Debug, Clone)]
pub enum ReducedMesh {
    Reduced(TriangleMesh),
    /// Reduction failed; the original high-poly mesh is kept.
    Fallback,
}

/// Rebuilds the model so every member of a duplicate group points at the
/// single reduced mesh of its original.
pub fn rebuild_model(
    model: &Model,
    reduced: &HashMap<String, ReducedMesh>,
    groups: &[DuplicateGroup],
) -> Result<Model, ModelError> {
    let originals: HashMap<&str, &Part> = model
        .mesh_parts()
        .into_iter()
        .map(|p| (p.id.as_str(), p))
        .collect();
    let mut replacement: HashMap<String, MeshRef> = HashMap::new();
    for g in groups {
        let outcome = reduced
            .get(&g.original)
            .ok_or_else(|| ModelError::MissingReduced {
                part: g.original.clone(),
            })?;
        let source = originals
            .get(g.original.as_str())
            .and_then(|p| p.mesh())
            .ok_or_else(|| ModelError::MissingReduced {
                part: g.original.clone(),
            })?;
        let path = format!("meshes/{}.obj", file_stem(&g.original));
        let mesh_ref = match outcome {
            ReducedMesh::Reduced(m) => MeshRef {
                path,
                mesh: Arc::new(m.clone()),
                fallback: false,
            },
            ReducedMesh::Fallback => MeshRef {
                path,
                mesh: source.mesh.clone(),
                fallback: true,
            },
        };
        for id in g.members() {
            replacement.insert(id.to_owned(), mesh_ref.clone());
        }
    }

    fn rebuild(parts: &[Part], repl: &HashMap<String, MeshRef>) -> Result<Vec<Part>, ModelError> {
        parts
            .iter()
            .map(|p| {
                let content = match &p.content {
                    PartContent::Mesh(_) => PartContent::Mesh(
                        repl.get(&p.id)
                            .cloned()
                            .ok_or_else(|| ModelError::MissingReduced { part: p.id.clone() })?,
                    ),
                    PartContent::Children(c) => PartContent::Children(rebuild(c, repl)?),
                };
                Ok(Part {
                    id: p.id.clone(),
                    transform: p.transform,
                    content,
                })
            })
            .collect()
    }

    Ok(Model {
        name: model.name.clone(),
        transform: model.transform,
        roots: rebuild(&model.roots, &replacement)?,
    })
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
