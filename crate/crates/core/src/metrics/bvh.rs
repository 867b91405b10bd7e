//! Bounding volume hierarchy over mesh triangles for closest-point queries.

use nalgebra::{Point3, Vector3};

use crate::mesh::TriangleMesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Node {
    min: Point3<f64>,
    max: Point3<f64>,
    /// Leaf: range into `order`. Inner: `start` is the right child, the left
    /// child immediately follows the node.
    start: u32,
    count: u32,
}

pub struct Bvh<'m> {
    mesh: &'m TriangleMesh,
    nodes: Vec<Node>,
    order: Vec<u32>,
}

#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub face: u32,
    pub point: Point3<f64>,
    pub distance_sq: f64,
}

impl<'m> Bvh<'m> {
    pub fn new(mesh: &'m TriangleMesh) -> Self {
        let n = mesh.face_count();
        let centroids: Vec<Point3<f64>> = (0..n)
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                Point3::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();
        let mut bvh = Bvh {
            mesh,
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            order: (0..n as u32).collect(),
        };
        if n > 0 {
            bvh.build(0, n, &centroids);
        }
        bvh
    }

    fn bounds(&self, start: usize, end: usize) -> (Point3<f64>, Point3<f64>) {
        let mut min = Point3::from(Vector3::repeat(f64::INFINITY));
        let mut max = Point3::from(Vector3::repeat(f64::NEG_INFINITY));
        for &f in &self.order[start..end] {
            for p in self.mesh.triangle(f as usize) {
                min = min.inf(&p);
                max = max.sup(&p);
            }
        }
        (min, max)
    }

    fn build(&mut self, start: usize, end: usize, centroids: &[Point3<f64>]) -> usize {
        let (min, max) = self.bounds(start, end);
        let index = self.nodes.len();
        self.nodes.push(Node {
            min,
            max,
            start: start as u32,
            count: (end - start) as u32,
        });
        if end - start <= LEAF_SIZE {
            return index;
        }
        let ext = max - min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        self.build(start, mid, centroids);
        let right = self.build(mid, end, centroids);
        self.nodes[index].start = right as u32;
        self.nodes[index].count = 0;
        index
    }

    fn box_distance_sq(node: &Node, p: &Point3<f64>) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < node.min[k] {
                node.min[k] - p[k]
            } else if p[k] > node.max[k] {
                p[k] - node.max[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Closest point on the mesh. Exact distance ties go to the lowest face.
    pub fn closest(&self, p: &Point3<f64>) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<Hit> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = self.nodes[ni];
            let bound = best.map_or(f64::INFINITY, |h| h.distance_sq);
            if Self::box_distance_sq(&node, p) > bound {
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = self.mesh.triangle(f as usize);
                    let q = closest_on_triangle(p, &a, &b, &c);
                    let d = (q - p).norm_squared();
                    let better = match best {
                        None => true,
                        Some(h) => d < h.distance_sq || (d == h.distance_sq && f < h.face),
                    };
                    if better {
                        best = Some(Hit {
                            face: f,
                            point: q,
                            distance_sq: d,
                        });
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(ni + 1);
            }
        }
        best
    }

    /// Faces whose distance to `p` is at most `radius`, in ascending order.
    pub fn faces_within(&self, p: &Point3<f64>, radius: f64) -> Vec<u32> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = self.nodes[ni];
            if Self::box_distance_sq(&node, p) > r2 {
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = self.mesh.triangle(f as usize);
                    if (closest_on_triangle(p, &a, &b, &c) - p).norm_squared() <= r2 {
                        out.push(f);
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(ni + 1);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_on_triangle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
