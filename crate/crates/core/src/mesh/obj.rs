//! Minimal Wavefront OBJ reader/writer: `v` and `f` records only.
//! Polygons with more than three corners are fan-triangulated.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;
use thiserror::Error;

use super::{MeshError, TriangleMesh};

#[derive(Debug, Error)]
pub enum ObjError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh, ObjError> {
    let text = std::fs::read_to_string(path).map_err(|source| ObjError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh, ObjError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in xyz.iter_mut() {
                    let tok = tokens.next().ok_or_else(|| ObjError::Syntax {
                        line,
                        message: "vertex needs three coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| ObjError::Syntax {
                        line,
                        message: format!("bad coordinate {tok:?}"),
                    })?;
                }
                vertices.push(Point3::from(xyz));
            }
            Some("f") => {
                let mut corners = Vec::with_capacity(4);
                for tok in tokens {
                    let idx = tok.split('/').next().unwrap_or("");
                    let i: i64 = idx.parse().map_err(|_| ObjError::Syntax {
                        line,
                        message: format!("bad face index {tok:?}"),
                    })?;
                    let resolved = match i {
                        i if i > 0 => i - 1,
                        i if i < 0 => vertices.len() as i64 + i,
                        _ => -1,
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(ObjError::Syntax {
                            line,
                            message: format!("face index {i} out of range"),
                        });
                    }
                    corners.push(resolved as u32);
                }
                if corners.len() < 3 {
                    return Err(ObjError::Syntax {
                        line,
                        message: "face needs at least three corners".into(),
                    });
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriangleMesh::new(vertices, faces)?)
}

/// Serializes with shortest round-trip float formatting, so reading the
/// output back reproduces every coordinate exactly.
pub fn to_obj_string(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 32 + mesh.face_count() * 16);
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<(), ObjError> {
    std::fs::write(path, to_obj_string(mesh)).map_err(|source| ObjError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quads_are_fan_triangulated() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn slash_and_negative_indices() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3/1/1 -2/2/1 -1/3/1\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn out_of_range_face() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, ObjError::Syntax { line: 3, .. }), "{err}");
    }

    #[test]
    fn exact_round_trip() {
        let m = crate::fixtures::icosphere(2, 0.37);
        let back = parse_obj(&to_obj_string(&m)).unwrap();
        assert_eq!(m, back);
    }
}
