//! Synthetic closed meshes and models used by tests, benches and demos.
//!
//! Every generator returns a watertight, consistently outward-oriented mesh.

pub mod case_study;

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use crate::mesh::{MeshRef, Model, Part, PartContent, Transform, TriangleMesh};

pub fn cube(size: f64) -> TriangleMesh {
    let s = size;
    let v = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(s, 0.0, 0.0),
        Point3::new(s, s, 0.0),
        Point3::new(0.0, s, 0.0),
        Point3::new(0.0, 0.0, s),
        Point3::new(s, 0.0, s),
        Point3::new(s, s, s),
        Point3::new(0.0, s, s),
    ];
    let f = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::new(v, f).expect("cube")
}

pub fn tetrahedron() -> TriangleMesh {
    let v = vec![
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(1.0, -1.0, -1.0),
        Point3::new(-1.0, 1.0, -1.0),
        Point3::new(-1.0, -1.0, 1.0),
    ];
    let f = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriangleMesh::new(v, f).expect("tetrahedron")
}

pub fn octahedron(radius: f64) -> TriangleMesh {
    let r = radius;
    let v = vec![
        Point3::new(r, 0.0, 0.0),
        Point3::new(-r, 0.0, 0.0),
        Point3::new(0.0, r, 0.0),
        Point3::new(0.0, -r, 0.0),
        Point3::new(0.0, 0.0, r),
        Point3::new(0.0, 0.0, -r),
    ];
    let f = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    TriangleMesh::new(v, f).expect("octahedron")
}

/// Icosahedron subdivided `level` times with vertices pushed to the sphere.
/// Level 3 has 1280 faces.
pub fn icosphere(level: u32, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            let key = if a < b { (a, b) } else { (b, a) };
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| Point3::from(v * radius)).collect();
    TriangleMesh::new(verts, faces).expect("icosphere")
}

/// Welds generated triangles on an integer lattice key.
struct Welder {
    index: HashMap<[i64; 3], u32>,
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
}

impl Welder {
    fn new() -> Self {
        Self {
            index: HashMap::new(),
            vertices: Vec::new(),
            faces: Vec::new(),
        }
    }

    fn vertex(&mut self, key: [i64; 3], p: Point3<f64>) -> u32 {
        let vertices = &mut self.vertices;
        *self.index.entry(key).or_insert_with(|| {
            vertices.push(p);
            (vertices.len() - 1) as u32
        })
    }

    fn quad(&mut self, a: u32, b: u32, c: u32, d: u32) {
        self.faces.push([a, b, c]);
        self.faces.push([a, c, d]);
    }

    fn finish(self) -> TriangleMesh {
        TriangleMesh::new(self.vertices, self.faces).expect("welded mesh")
    }
}

/// Axis-aligned box with each face split into an `n[a] x n[b]` grid.
pub fn grid_box(size: [f64; 3], n: [u32; 3]) -> TriangleMesh {
    let mut w = Welder::new();
    let n = n.map(|k| k.max(1) as i64);
    // (normal axis, u axis, v axis, side)
    // u x v points out of the box on every side
    let sides = [
        (0usize, 2usize, 1usize, 0i64),
        (0, 1, 2, 1),
        (1, 0, 2, 0),
        (1, 2, 0, 1),
        (2, 1, 0, 0),
        (2, 0, 1, 1),
    ];
    for &(axis, u, v, side) in &sides {
        let fixed = side * n[axis];
        let mut grid = vec![vec![0u32; (n[v] + 1) as usize]; (n[u] + 1) as usize];
        for i in 0..=n[u] {
            for j in 0..=n[v] {
                let mut key = [0i64; 3];
                key[axis] = fixed;
                key[u] = i;
                key[v] = j;
                let p = Point3::new(
                    size[0] * key[0] as f64 / n[0] as f64,
                    size[1] * key[1] as f64 / n[1] as f64,
                    size[2] * key[2] as f64 / n[2] as f64,
                );
                grid[i as usize][j as usize] = w.vertex(key, p);
            }
        }
        for i in 0..n[u] as usize {
            for j in 0..n[v] as usize {
                let (a, b, c, d) = (grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]);
                w.quad(a, b, c, d);
            }
        }
    }
    orient_outward(w.finish())
}

/// Closed cylinder along z with `segments` around, `rings` bands along the
/// height and `cap_rings` concentric bands on each cap.
pub fn cylinder(radius: f64, height: f64, segments: u32, rings: u32, cap_rings: u32) -> TriangleMesh {
    revolve(
        &profile_cylinder(radius, height, rings.max(1), cap_rings.max(1)),
        segments.max(3),
    )
}

fn profile_cylinder(r: f64, h: f64, rings: u32, caps: u32) -> Vec<(f64, f64)> {
    let mut p = vec![(0.0, 0.0)];
    for k in 1..=caps {
        p.push((r * k as f64 / caps as f64, 0.0));
    }
    for k in 1..=rings {
        p.push((r, h * k as f64 / rings as f64));
    }
    for k in (0..caps).rev() {
        p.push((r * k as f64 / caps as f64, h));
    }
    p
}

/// Surface of revolution about z. The profile runs from the axis back to the
/// axis as (radius, z) pairs.
pub fn revolve(profile: &[(f64, f64)], segments: u32) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut ring_index: Vec<Vec<u32>> = Vec::new();
    for &(r, z) in profile {
        if r == 0.0 {
            vertices.push(Point3::new(0.0, 0.0, z));
            ring_index.push(vec![(vertices.len() - 1) as u32; segments as usize]);
        } else {
            let mut ring = Vec::with_capacity(segments as usize);
            for s in 0..segments {
                let a = TAU * s as f64 / segments as f64;
                vertices.push(Point3::new(r * a.cos(), r * a.sin(), z));
                ring.push((vertices.len() - 1) as u32);
            }
            ring_index.push(ring);
        }
    }
    let mut faces = Vec::new();
    let seg = segments as usize;
    for k in 0..ring_index.len() - 1 {
        let (lo, hi) = (&ring_index[k], &ring_index[k + 1]);
        for s in 0..seg {
            let t = (s + 1) % seg;
            let (a, b, c, d) = (lo[s], lo[t], hi[t], hi[s]);
            if a != b {
                faces.push([a, b, c]);
            }
            if c != d {
                faces.push([a, c, d]);
            }
        }
    }
    let faces = faces
        .into_iter()
        .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
        .collect();
    orient_outward(TriangleMesh::new(vertices, faces).expect("revolved mesh"))
}

pub fn torus(major: f64, minor: f64, nu: u32, nv: u32) -> TriangleMesh {
    let (nu, nv) = (nu.max(3), nv.max(3));
    let mut vertices = Vec::new();
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            vertices.push(Point3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: u32, j: u32| (i % nu) * nv + (j % nv);
    let mut faces = Vec::new();
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    orient_outward(TriangleMesh::new(vertices, faces).expect("torus"))
}

/// Extrudes a star-shaped polygon (given by its outline, centred on the
/// origin) along z.
pub fn prism(outline: &[(f64, f64)], height: f64, layers: u32) -> TriangleMesh {
    let n = outline.len();
    let layers = layers.max(1);
    let mut vertices = Vec::new();
    let bottom_centre = 0u32;
    vertices.push(Point3::new(0.0, 0.0, 0.0));
    for l in 0..=layers {
        let z = height * l as f64 / layers as f64;
        for &(x, y) in outline {
            vertices.push(Point3::new(x, y, z));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, height));
    let top_centre = (vertices.len() - 1) as u32;
    let ring = |l: u32, k: usize| 1 + l * n as u32 + (k % n) as u32;
    let mut faces = Vec::new();
    for k in 0..n {
        faces.push([bottom_centre, ring(0, k + 1), ring(0, k)]);
        faces.push([top_centre, ring(layers, k), ring(layers, k + 1)]);
        for l in 0..layers {
            let (a, b, c, d) = (ring(l, k), ring(l, k + 1), ring(l + 1, k + 1), ring(l + 1, k));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    orient_outward(TriangleMesh::new(vertices, faces).expect("prism"))
}

/// Outline of a toothed gear, suitable for [`prism`].
pub fn gear_outline(teeth: u32, inner: f64, outer: f64, samples_per_tooth: u32) -> Vec<(f64, f64)> {
    let total = teeth * samples_per_tooth;
    (0..total)
        .map(|k| {
            let a = TAU * k as f64 / total as f64;
            let phase = (k % samples_per_tooth) as f64 / samples_per_tooth as f64;
            let r = if phase < 0.5 { outer } else { inner };
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Flips every face if the mesh encloses negative signed volume.
fn orient_outward(mesh: TriangleMesh) -> TriangleMesh {
    let s = crate::mesh::mesh_summary(&mesh).expect("non-empty");
    if s.signed_volume >= 0.0 {
        return mesh;
    }
    let faces = mesh.faces().iter().map(|&[a, b, c]| [a, c, b]).collect();
    TriangleMesh::new(mesh.vertices().to_vec(), faces).expect("flipped mesh")
}

/// A family of distinct "mechanical" parts indexed by `k`. Face counts stay
/// in the low hundreds to low thousands.
pub fn mechanical_part(k: usize) -> TriangleMesh {
    let v = (k / 7) as f64;
    let j = (k / 7) as u32;
    match k % 7 {
        0 => grid_box([1.0 + 0.25 * v, 0.6, 0.4 + 0.05 * v], [6 + j % 4, 5, 4]),
        1 => cylinder(0.3 + 0.02 * v, 1.2 + 0.1 * v, 24 + 2 * (j % 5), 6 + j % 3, 2),
        2 => icosphere(2 + (j % 2), 0.5 + 0.05 * v),
        3 => torus(1.0 + 0.05 * v, 0.25 + 0.02 * v, 28 + 2 * (j % 4), 12 + j % 3),
        4 => prism(&gear_outline(10 + j % 6, 0.8, 1.0, 4), 0.3 + 0.03 * v, 2 + j % 2),
        5 => revolve(
            &[
                (0.0, 0.0),
                (0.5 + 0.02 * v, 0.0),
                (0.5 + 0.02 * v, 0.3),
                (0.25, 0.45),
                (0.25, 1.2 + 0.1 * v),
                (0.0, 1.2 + 0.1 * v),
            ],
            32 + 2 * (j % 4),
        ),
        _ => icosphere(3, 0.4)
            .map_vertices(|p| Point3::new(p.x * (1.5 + 0.1 * v), p.y, p.z * 0.7)),
    }
}

/// A flat model of `parts` mesh-bearing parts of which `unique` carry
/// distinct meshes; the rest are transformed copies that share meshes.
pub fn duplicate_model(parts: usize, unique: usize) -> Model {
    assert!(unique >= 1 && unique <= parts);
    let meshes: Vec<MeshRef> = (0..unique)
        .map(|k| MeshRef {
            path: format!("meshes/u{k:03}.obj"),
            mesh: Arc::new(mechanical_part(k)),
            fallback: false,
        })
        .collect();
    let roots = (0..parts)
        .map(|i| {
            let k = if i < unique { i } else { (i * 7 + 3) % unique };
            let angle = (i as f64 * 37.0) % 360.0;
            Part {
                id: format!("part{i:03}"),
                transform: Transform::new(
                    [(i % 10) as f64 * 2.5, (i / 10) as f64 * 2.5, 0.0],
                    [0.0, 0.0, angle],
                    [1.0; 3],
                ),
                content: PartContent::Mesh(meshes[k].clone()),
            }
        })
        .collect();
    Model {
        name: format!("assembly-{parts}-{unique}"),
        transform: Transform::IDENTITY,
        roots,
    }
}

/// Rotation used by invariance tests.
pub fn rotated(mesh: &TriangleMesh, axis: Vector3<f64>, degrees: f64) -> TriangleMesh {
    let q = nalgebra::UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), degrees * PI / 180.0);
    mesh.map_vertices(|p| q * p)
}
