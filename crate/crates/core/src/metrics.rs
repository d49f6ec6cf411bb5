//! Error measures for judging a denoised mesh against a reference.

use crate::field::FaceField;
use crate::mesh::Mesh;
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

/// Mean squared angular error between two unit normal fields, in squared
/// radians: the average over faces of the squared angle between normals.
///
/// The angle is evaluated as `2 atan2(|x - y|, |x + y|)`, which equals
/// `acos(dot)` for unit vectors but loses no precision near 0 or pi —
/// identical fields score exactly zero.
pub fn msae(a: &FaceField<3>, b: &FaceField<3>) -> f64 {
    assert_eq!(a.len(), b.len(), "normal fields must cover the same faces");
    assert!(!a.is_empty(), "empty fields have no angular error");
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            let mut diff = 0.0;
            let mut mean = 0.0;
            for c in 0..3 {
                diff += (x[c] - y[c]) * (x[c] - y[c]);
                mean += (x[c] + y[c]) * (x[c] + y[c]);
            }
            let angle = 2.0 * diff.sqrt().atan2(mean.sqrt());
            angle * angle
        })
        .sum();
    sum / a.len() as f64
}

/// Area-weighted root-mean-square distance from the vertices of `result`
/// to the surface of `reference`:
/// `sqrt(sum_i (sum of areas incident to v_i) dist(v_i)^2 / (3 total area))`.
/// Incident areas and the total come from `result`; each face backs exactly
/// its three corners, hence the 3 in the normalization.
pub fn vertex_distance_error(result: &Mesh, reference: &Mesh) -> f64 {
    // Exhaustive scan for small jobs; above the threshold, the box tree
    // prunes. Both paths return identical distances (see the tests), so the
    // switch is invisible.
    let work = result.vertex_count().saturating_mul(reference.face_count());
    let distances: Vec<f64> = if work <= BRUTE_WORK_LIMIT {
        map_vertices(result, |p| point_surface_distance(reference, p))
    } else {
        let tree = TriangleTree::new(reference);
        map_vertices(result, |p| tree.distance(p))
    };
    let mut weighted = 0.0;
    for (v, d) in distances.iter().enumerate() {
        let incident: f64 = result.vertex_faces(v).iter().map(|&f| result.area(f)).sum();
        weighted += incident * d * d;
    }
    (weighted / (3.0 * result.total_area())).sqrt()
}

/// Vertex-count pairs up to this many point-triangle tests skip the tree.
const BRUTE_WORK_LIMIT: usize = 1 << 22;

/// Per-vertex map, parallel for large meshes. Only the map runs in
/// parallel — results land in index order, so callers stay deterministic.
fn map_vertices<F>(mesh: &Mesh, f: F) -> Vec<f64>
where
    F: Fn(&Point3<f64>) -> f64 + Send + Sync,
{
    if mesh.vertex_count() >= 1024 {
        mesh.vertices().par_iter().map(f).collect()
    } else {
        mesh.vertices().iter().map(f).collect()
    }
}

/// Triangle-quality summary: `(min area / max area,
/// min over faces of (shortest edge / longest edge))`.
pub fn quality(mesh: &Mesh) -> (f64, f64) {
    let mut min_area = f64::INFINITY;
    let mut max_area = f64::NEG_INFINITY;
    let mut worst_ratio = f64::INFINITY;
    for f in 0..mesh.face_count() {
        let s = mesh.area(f);
        min_area = min_area.min(s);
        max_area = max_area.max(s);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(e, _) in mesh.face_edges(f) {
            let len = mesh.edges()[e].length;
            lo = lo.min(len);
            hi = hi.max(len);
        }
        worst_ratio = worst_ratio.min(lo / hi);
    }
    (min_area / max_area, worst_ratio)
}

/// Closest point on triangle `(a, b, c)` to `p`, by classifying `p` against
/// the triangle's Voronoi regions (corners, edges, interior).
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
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
        return a + v * ab;
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
        return a + w * ac;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Distance from `p` to the surface by checking every triangle.
pub fn point_surface_distance(mesh: &Mesh, p: &Point3<f64>) -> f64 {
    mesh.triangles()
        .iter()
        .map(|&[i, j, k]| {
            let q = closest_point_on_triangle(
                p,
                &mesh.vertices()[i],
                &mesh.vertices()[j],
                &mesh.vertices()[k],
            );
            (p - q).norm_squared()
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

const LEAF_SIZE: usize = 8;

enum NodeKind {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

struct Node {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    kind: NodeKind,
}

/// Axis-aligned bounding-box tree over a mesh's triangles for exact
/// nearest-surface queries. Returns the same distances as the exhaustive
/// scan — the boxes only prune, never approximate.
pub struct TriangleTree {
    nodes: Vec<Node>,
    faces: Vec<usize>,
    corners: Vec<[Point3<f64>; 3]>,
}

impl TriangleTree {
    pub fn new(mesh: &Mesh) -> Self {
        let corners: Vec<[Point3<f64>; 3]> = mesh
            .triangles()
            .iter()
            .map(|&[i, j, k]| [mesh.vertices()[i], mesh.vertices()[j], mesh.vertices()[k]])
            .collect();
        let centroids: Vec<Vector3<f64>> = corners
            .iter()
            .map(|t| (t[0].coords + t[1].coords + t[2].coords) / 3.0)
            .collect();
        let mut tree = TriangleTree {
            nodes: Vec::new(),
            faces: (0..corners.len()).collect(),
            corners,
        };
        let count = tree.faces.len();
        tree.build(0, count, &centroids);
        tree
    }

    fn bounds(&self, start: usize, end: usize) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for &f in &self.faces[start..end] {
            for corner in &self.corners[f] {
                lo = lo.inf(&corner.coords);
                hi = hi.sup(&corner.coords);
            }
        }
        (lo, hi)
    }

    fn build(&mut self, start: usize, end: usize, centroids: &[Vector3<f64>]) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node { lo, hi, kind: NodeKind::Leaf { start, end } });
            return id;
        }
        // Median split along the widest extent of the centroids.
        let extent = hi - lo;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        self.faces[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| {
                centroids[a][axis].total_cmp(&centroids[b][axis])
            });
        self.nodes.push(Node { lo, hi, kind: NodeKind::Leaf { start, end } });
        let left = self.build(start, mid, centroids);
        let right = self.build(mid, end, centroids);
        self.nodes[id].kind = NodeKind::Split { left, right };
        id
    }

    fn box_distance_sq(node: &Node, p: &Point3<f64>) -> f64 {
        let mut d2 = 0.0;
        for c in 0..3 {
            let gap = (node.lo[c] - p[c]).max(0.0).max(p[c] - node.hi[c]);
            d2 += gap * gap;
        }
        d2
    }

    /// Exact distance from `p` to the nearest triangle.
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if Self::box_distance_sq(node, p) >= best {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &f in &self.faces[start..end] {
                        let [a, b, c] = &self.corners[f];
                        let q = closest_point_on_triangle(p, a, b, c);
                        best = best.min((p - q).norm_squared());
                    }
                }
                NodeKind::Split { left, right } => {
                    // Visit the nearer child first so the bound tightens early.
                    let dl = Self::box_distance_sq(&self.nodes[left], p);
                    let dr = Self::box_distance_sq(&self.nodes[right], p);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.sqrt()
    }
}
