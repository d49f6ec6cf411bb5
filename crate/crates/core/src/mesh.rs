//! Triangle mesh connectivity and the derived quantities the solvers lean on.
//!
//! A [`Mesh`] is immutable after construction: [`Mesh::build`] validates the
//! face list (manifoldness, consistent winding, non-degeneracy) and
//! precomputes everything the discrete operators need — edge incidences with
//! signs, per-face areas and normals, and the barycenter-to-vertex "line"
//! stencils used by the second-order difference.
//!
//! Index conventions:
//! * faces are counter-clockwise when seen from outside;
//! * edge `k` of a face runs from corner `k` to corner `(k + 1) % 3`;
//! * line `k` of a face joins the barycenter to corner `k`;
//! * stored edges are oriented from the smaller to the larger vertex index,
//!   and `sign(edge, face) = +1` exactly when the face traverses the edge in
//!   that direction.

use nalgebra::{Point3, Vector3};
use std::collections::HashMap;
use std::fmt;

/// Errors detected while validating a face list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshError {
    /// A face refers to a vertex index `>=` the vertex count.
    IndexOutOfRange { face: usize, index: usize },
    /// A face has repeated vertices or zero area.
    DegenerateTriangle { face: usize },
    /// More than two faces share one edge.
    NonManifoldEdge { edge: [usize; 2] },
    /// Two faces traverse a shared edge in the same direction.
    InconsistentOrientation { edge: [usize; 2] },
}

impl fmt::Display for MeshError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshError::IndexOutOfRange { face, index } => {
                write!(f, "face {face} refers to vertex {index} which does not exist")
            }
            MeshError::DegenerateTriangle { face } => {
                write!(f, "face {face} is degenerate (repeated vertices or zero area)")
            }
            MeshError::NonManifoldEdge { edge } => {
                write!(f, "edge ({}, {}) is shared by more than two faces", edge[0], edge[1])
            }
            MeshError::InconsistentOrientation { edge } => {
                write!(
                    f,
                    "faces on edge ({}, {}) disagree on winding direction",
                    edge[0], edge[1]
                )
            }
        }
    }
}

impl std::error::Error for MeshError {}

/// One undirected edge together with its incidences.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    /// Endpoint vertex indices, `ends[0] < ends[1]`.
    pub ends: [usize; 2],
    /// Euclidean length.
    pub length: f64,
    /// First incident face and the sign of the edge in its cycle.
    pub face0: (usize, f64),
    /// Second incident face, `None` along the mesh border.
    pub face1: Option<(usize, f64)>,
}

impl Edge {
    /// Whether two faces meet at this edge.
    pub fn is_interior(&self) -> bool {
        self.face1.is_some()
    }
}

/// One barycenter-to-vertex segment of a face, the support of the
/// second-order difference.
#[derive(Debug, Clone, Copy)]
pub struct Line {
    /// Distance from the face barycenter to the anchoring corner.
    pub length: f64,
    /// The two faces across the edges flanking the anchoring corner.
    /// `None` when either flanking edge lies on the border, which switches
    /// the second-order difference off (natural boundary condition).
    pub wings: Option<[usize; 2]>,
}

/// An immutable triangulated surface with precomputed connectivity.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// Per face: (edge index, sign) for each of its three edges.
    face_edges: Vec<[(usize, f64); 3]>,
    areas: Vec<f64>,
    normals: Vec<Vector3<f64>>,
    barycenters: Vec<Point3<f64>>,
    /// Per face: its three lines, anchored at corners 0, 1, 2.
    lines: Vec<[Line; 3]>,
    /// Per face: the `(face, corner)` addresses of lines in *neighboring*
    /// faces whose second-difference stencil includes this face. These are
    /// exactly the neighbor lines anchored at an endpoint of the shared
    /// edge; a fully interior face collects six of them.
    incoming_lines: Vec<Vec<(usize, usize)>>,
    /// Faces incident to each vertex, in face-index order.
    vertex_faces: Vec<Vec<usize>>,
    /// Vertices sharing an edge with each vertex, in edge-discovery order.
    vertex_neighbors: Vec<Vec<usize>>,
    mean_edge_length: f64,
}

impl Mesh {
    /// Validate a face list and precompute all derived quantities.
    ///
    /// Faces must be counter-clockwise consistent, each edge may carry at
    /// most two faces, and every face needs three distinct vertices with
    /// strictly positive area.
    pub fn build(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let nt = triangles.len();

        let mut areas = Vec::with_capacity(nt);
        let mut normals = Vec::with_capacity(nt);
        let mut barycenters = Vec::with_capacity(nt);
        for (f, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= nv {
                    return Err(MeshError::IndexOutOfRange { face: f, index: i });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateTriangle { face: f });
            }
            let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let cross = (b - a).cross(&(c - a));
            let norm = cross.norm();
            if norm <= 0.0 || norm.is_nan() {
                return Err(MeshError::DegenerateTriangle { face: f });
            }
            areas.push(0.5 * norm);
            normals.push(cross / norm);
            barycenters.push(Point3::from((a.coords + b.coords + c.coords) / 3.0));
        }

        // Edges indexed in order of first appearance while walking the faces.
        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut face_edges = vec![[(0usize, 0.0f64); 3]; nt];
        for (f, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let (ends, sign) = if a < b { ([a, b], 1.0) } else { ([b, a], -1.0) };
                let id = match edge_ids.get(&ends) {
                    None => {
                        let id = edges.len();
                        edge_ids.insert(ends, id);
                        edges.push(Edge {
                            ends,
                            length: (vertices[ends[0]] - vertices[ends[1]]).norm(),
                            face0: (f, sign),
                            face1: None,
                        });
                        id
                    }
                    Some(&id) => {
                        let edge = &mut edges[id];
                        if edge.face1.is_some() {
                            return Err(MeshError::NonManifoldEdge { edge: ends });
                        }
                        if edge.face0.1 == sign {
                            return Err(MeshError::InconsistentOrientation { edge: ends });
                        }
                        edge.face1 = Some((f, sign));
                        id
                    }
                };
                face_edges[f][k] = (id, sign);
            }
        }

        // Line stencils. Corner k is flanked by edges k and (k + 2) % 3; the
        // wings are the faces across those edges.
        let mut lines = Vec::with_capacity(nt);
        for (f, tri) in triangles.iter().enumerate() {
            let mut face_lines = [Line { length: 0.0, wings: None }; 3];
            for k in 0..3 {
                let length = (barycenters[f] - vertices[tri[k]]).norm();
                let across = |slot: usize| -> Option<usize> {
                    let (eid, _) = face_edges[f][slot];
                    let e = &edges[eid];
                    if e.face0.0 == f {
                        e.face1.map(|(g, _)| g)
                    } else {
                        Some(e.face0.0)
                    }
                };
                let wings = match (across(k), across((k + 2) % 3)) {
                    (Some(p), Some(m)) => Some([p, m]),
                    _ => None,
                };
                face_lines[k] = Line { length, wings };
            }
            lines.push(face_lines);
        }

        let mut incoming_lines = vec![Vec::new(); nt];
        for (f, face_lines) in lines.iter().enumerate() {
            for (k, line) in face_lines.iter().enumerate() {
                if let Some([p, m]) = line.wings {
                    incoming_lines[p].push((f, k));
                    incoming_lines[m].push((f, k));
                }
            }
        }

        let mut vertex_faces = vec![Vec::new(); nv];
        for (f, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_faces[v].push(f);
            }
        }
        let mut vertex_neighbors = vec![Vec::new(); nv];
        for edge in &edges {
            let [a, b] = edge.ends;
            vertex_neighbors[a].push(b);
            vertex_neighbors[b].push(a);
        }

        let mean_edge_length =
            edges.iter().map(|e| e.length).sum::<f64>() / edges.len().max(1) as f64;

        Ok(Mesh {
            vertices,
            triangles,
            edges,
            face_edges,
            areas,
            normals,
            barycenters,
            lines,
            incoming_lines,
            vertex_faces,
            vertex_neighbors,
            mean_edge_length,
        })
    }

    /// Same connectivity, new vertex positions; all geometry is recomputed.
    pub fn with_vertices(&self, vertices: Vec<Point3<f64>>) -> Result<Self, MeshError> {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must not change");
        Mesh::build(vertices, self.triangles.clone())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// The three (edge index, sign) pairs of a face.
    pub fn face_edges(&self, face: usize) -> &[(usize, f64); 3] {
        &self.face_edges[face]
    }

    pub fn area(&self, face: usize) -> f64 {
        self.areas[face]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Unit outward normal of a face.
    pub fn normal(&self, face: usize) -> Vector3<f64> {
        self.normals[face]
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn barycenter(&self, face: usize) -> Point3<f64> {
        self.barycenters[face]
    }

    /// The three lines of a face, anchored at its corners.
    pub fn face_lines(&self, face: usize) -> &[Line; 3] {
        &self.lines[face]
    }

    /// Addresses `(face, corner)` of neighbor lines whose second-difference
    /// stencil includes this face — the bookkeeping behind the adjoint.
    pub fn incoming_lines(&self, face: usize) -> &[(usize, usize)] {
        &self.incoming_lines[face]
    }

    /// The face across edge slot `k` of `face`, if any.
    pub fn neighbor_across(&self, face: usize, k: usize) -> Option<usize> {
        let (eid, _) = self.face_edges[face][k];
        let e = &self.edges[eid];
        if e.face0.0 == face {
            e.face1.map(|(g, _)| g)
        } else {
            Some(e.face0.0)
        }
    }

    /// Edge-adjacent faces, one entry per edge slot.
    pub fn edge_neighbors(&self, face: usize) -> [Option<usize>; 3] {
        [
            self.neighbor_across(face, 0),
            self.neighbor_across(face, 1),
            self.neighbor_across(face, 2),
        ]
    }

    /// Faces incident to a vertex.
    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    /// Vertices sharing an edge with `v`.
    pub fn vertex_neighbors(&self, v: usize) -> &[usize] {
        &self.vertex_neighbors[v]
    }

    pub fn mean_edge_length(&self) -> f64 {
        self.mean_edge_length
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_interior()).count()
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn bbox_diagonal(&self) -> f64 {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(&v.coords);
            hi = hi.sup(&v.coords);
        }
        (hi - lo).norm()
    }

    /// Flip the stored orientation of one edge (test hook): swaps its
    /// endpoint order and negates both incidence signs. Operator outputs
    /// must be insensitive to this choice up to the documented sign flips.
    #[doc(hidden)]
    pub fn flip_edge_orientation(&mut self, edge: usize) {
        let e = &mut self.edges[edge];
        e.ends.swap(0, 1);
        e.face0.1 = -e.face0.1;
        if let Some((_, s)) = &mut e.face1 {
            *s = -*s;
        }
        for fe in &mut self.face_edges {
            for slot in fe.iter_mut() {
                if slot.0 == edge {
                    slot.1 = -slot.1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn tetra() -> Mesh {
        shapes::tetrahedron()
    }

    #[test]
    fn tetrahedron_counts_and_euler() {
        let m = tetra();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.edge_count(), 6);
        assert_eq!(m.face_count(), 4);
        assert_eq!(
            m.vertex_count() + m.face_count(),
            m.edge_count() + 2,
            "closed genus-0 surface must satisfy V - E + T = 2"
        );
        assert_eq!(m.boundary_edge_count(), 0);
    }

    #[test]
    fn interior_edge_signs_are_opposite() {
        let m = tetra();
        for e in m.edges() {
            let (_, s0) = e.face0;
            let (_, s1) = e.face1.expect("tetrahedron is closed");
            assert_eq!(s0 * s1, -1.0);
        }
    }

    #[test]
    fn face_edge_signs_match_traversal_direction() {
        let m = tetra();
        for f in 0..m.face_count() {
            let tri = m.triangles()[f];
            for k in 0..3 {
                let (eid, sign) = m.face_edges(f)[k];
                let ends = m.edges()[eid].ends;
                let expected = if tri[k] == ends[0] { 1.0 } else { -1.0 };
                assert_eq!(sign, expected);
                assert!(ends.contains(&tri[k]) && ends.contains(&tri[(k + 1) % 3]));
            }
        }
    }

    #[test]
    fn closed_mesh_has_six_incoming_lines_per_face() {
        let m = shapes::icosphere(1);
        for f in 0..m.face_count() {
            assert_eq!(m.incoming_lines(f).len(), 6);
            assert_eq!(m.edge_neighbors(f).iter().flatten().count(), 3);
        }
    }

    #[test]
    fn incoming_lines_anchor_on_the_shared_edge() {
        let m = shapes::icosphere(1);
        for f in 0..m.face_count() {
            for &(g, k) in m.incoming_lines(f) {
                let wings = m.face_lines(g)[k].wings.expect("incoming lines are interior");
                assert!(wings.contains(&f));
                // The anchoring corner must be an endpoint of the shared edge.
                let v = m.triangles()[g][k];
                assert!(m.triangles()[f].contains(&v));
            }
        }
    }

    #[test]
    fn border_switches_lines_off() {
        let m = shapes::grid_patch(4, 4);
        assert!(m.boundary_edge_count() > 0);
        let mut boundary_flanked = 0;
        for f in 0..m.face_count() {
            for line in m.face_lines(f) {
                if line.wings.is_none() {
                    boundary_flanked += 1;
                }
            }
        }
        assert!(boundary_flanked > 0);
        // Every interior line contributes twice to the incoming lists.
        let interior: usize = (0..m.face_count())
            .map(|f| m.face_lines(f).iter().filter(|l| l.wings.is_some()).count())
            .sum();
        let incoming: usize = (0..m.face_count()).map(|f| m.incoming_lines(f).len()).sum();
        assert_eq!(incoming, 2 * interior);
    }

    #[test]
    fn rejects_bad_faces() {
        let quad = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let err = Mesh::build(quad.clone(), vec![[0, 1, 7]]).unwrap_err();
        assert_eq!(err, MeshError::IndexOutOfRange { face: 0, index: 7 });

        let err = Mesh::build(quad.clone(), vec![[0, 1, 1]]).unwrap_err();
        assert_eq!(err, MeshError::DegenerateTriangle { face: 0 });

        let mut collinear = quad.clone();
        collinear[2] = Point3::new(2.0, 0.0, 0.0);
        let err = Mesh::build(collinear, vec![[0, 1, 2]]).unwrap_err();
        assert_eq!(err, MeshError::DegenerateTriangle { face: 0 });

        // Both faces traverse the shared edge 2 -> 0 in the same direction.
        let err = Mesh::build(quad.clone(), vec![[0, 1, 2], [0, 3, 2]]).unwrap_err();
        assert!(matches!(err, MeshError::InconsistentOrientation { .. }));

        let mut five = quad.clone();
        five.push(Point3::new(0.5, 0.5, 1.0));
        let err = Mesh::build(five, vec![[0, 1, 2], [2, 1, 4], [1, 2, 3]]).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldEdge { .. }));
    }

    #[test]
    fn relabeling_preserves_derived_quantities() {
        let m = shapes::icosphere(1);
        // Reverse the vertex numbering and remap the faces accordingly.
        let nv = m.vertex_count();
        let perm: Vec<usize> = (0..nv).rev().collect();
        let mut verts = vec![Point3::origin(); nv];
        for (old, &new) in perm.iter().enumerate() {
            verts[new] = m.vertices()[old];
        }
        let tris: Vec<[usize; 3]> =
            m.triangles().iter().map(|t| [perm[t[0]], perm[t[1]], perm[t[2]]]).collect();
        let r = Mesh::build(verts, tris).unwrap();

        assert_eq!(r.edge_count(), m.edge_count());
        assert!((r.total_area() - m.total_area()).abs() < 1e-12);
        assert!((r.mean_edge_length() - m.mean_edge_length()).abs() < 1e-12);
        let mut a: Vec<f64> = m.areas().to_vec();
        let mut b: Vec<f64> = r.areas().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // Adjacency content is carried along by the permutation.
        for v in 0..nv {
            let mut expected: Vec<usize> =
                m.vertex_neighbors(v).iter().map(|&w| perm[w]).collect();
            let mut got = r.vertex_neighbors(perm[v]).to_vec();
            expected.sort_unstable();
            got.sort_unstable();
            assert_eq!(expected, got);
        }
    }

    #[test]
    fn with_vertices_keeps_connectivity() {
        let m = tetra();
        let moved: Vec<_> = m.vertices().iter().map(|p| p + Vector3::new(1.0, 2.0, 3.0)).collect();
        let r = m.with_vertices(moved).unwrap();
        assert_eq!(r.triangles(), m.triangles());
        assert!((r.total_area() - m.total_area()).abs() < 1e-12);
    }
}
