//! Piecewise-constant fields over a mesh and their weighted inner products.
//!
//! Three function spaces appear throughout the solvers: values per face,
//! values per edge, and values per line (three lines per face, anchored at
//! its corners). Each carries `C` channels — `C = 1` for scalar fields,
//! `C = 3` for normals — stored contiguously per element so the pointwise
//! solver steps stay local.
//!
//! The inner products are the discrete counterparts of surface integrals:
//! face fields weigh by area, edge fields by edge length, line fields by
//! line length. All norms below are induced by these weights, not plain
//! Euclidean sums.

use crate::mesh::Mesh;

/// One value per face, `C` channels each.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField<const C: usize> {
    pub values: Vec<[f64; C]>,
}

/// One value per edge, `C` channels each.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField<const C: usize> {
    pub values: Vec<[f64; C]>,
}

/// One value per line, laid out `[face][corner]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineField<const C: usize> {
    pub values: Vec<[[f64; C]; 3]>,
}

impl<const C: usize> FaceField<C> {
    pub fn zeros(mesh: &Mesh) -> Self {
        FaceField { values: vec![[0.0; C]; mesh.face_count()] }
    }

    pub fn constant(mesh: &Mesh, value: [f64; C]) -> Self {
        FaceField { values: vec![value; mesh.face_count()] }
    }

    pub fn from_values(values: Vec<[f64; C]>) -> Self {
        FaceField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl FaceField<3> {
    /// The mesh's unit face normals as a field.
    pub fn normals(mesh: &Mesh) -> Self {
        FaceField { values: mesh.normals().iter().map(|n| [n.x, n.y, n.z]).collect() }
    }
}

impl<const C: usize> EdgeField<C> {
    pub fn zeros(mesh: &Mesh) -> Self {
        EdgeField { values: vec![[0.0; C]; mesh.edge_count()] }
    }

    pub fn from_values(values: Vec<[f64; C]>) -> Self {
        EdgeField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<const C: usize> LineField<C> {
    pub fn zeros(mesh: &Mesh) -> Self {
        LineField { values: vec![[[0.0; C]; 3]; mesh.face_count()] }
    }

    pub fn from_values(values: Vec<[[f64; C]; 3]>) -> Self {
        LineField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[inline]
fn dot<const C: usize>(a: &[f64; C], b: &[f64; C]) -> f64 {
    let mut s = 0.0;
    for c in 0..C {
        s += a[c] * b[c];
    }
    s
}

/// Area-weighted inner product of two face fields.
pub fn face_inner<const C: usize>(mesh: &Mesh, a: &FaceField<C>, b: &FaceField<C>) -> f64 {
    assert_eq!(a.len(), mesh.face_count(), "face field does not match mesh");
    assert_eq!(b.len(), mesh.face_count(), "face field does not match mesh");
    let areas = mesh.areas();
    let mut s = 0.0;
    for t in 0..a.len() {
        s += dot(&a.values[t], &b.values[t]) * areas[t];
    }
    s
}

/// Norm induced by [`face_inner`].
pub fn face_norm<const C: usize>(mesh: &Mesh, a: &FaceField<C>) -> f64 {
    face_inner(mesh, a, a).sqrt()
}

/// Length-weighted inner product of two edge fields.
pub fn edge_inner<const C: usize>(mesh: &Mesh, a: &EdgeField<C>, b: &EdgeField<C>) -> f64 {
    assert_eq!(a.len(), mesh.edge_count(), "edge field does not match mesh");
    assert_eq!(b.len(), mesh.edge_count(), "edge field does not match mesh");
    let mut s = 0.0;
    for (e, edge) in mesh.edges().iter().enumerate() {
        s += dot(&a.values[e], &b.values[e]) * edge.length;
    }
    s
}

/// Norm induced by [`edge_inner`].
pub fn edge_norm<const C: usize>(mesh: &Mesh, a: &EdgeField<C>) -> f64 {
    edge_inner(mesh, a, a).sqrt()
}

/// Length-weighted inner product of two line fields.
pub fn line_inner<const C: usize>(mesh: &Mesh, a: &LineField<C>, b: &LineField<C>) -> f64 {
    assert_eq!(a.len(), mesh.face_count(), "line field does not match mesh");
    assert_eq!(b.len(), mesh.face_count(), "line field does not match mesh");
    let mut s = 0.0;
    for t in 0..a.len() {
        let lines = mesh.face_lines(t);
        for k in 0..3 {
            s += dot(&a.values[t][k], &b.values[t][k]) * lines[k].length;
        }
    }
    s
}

/// Norm induced by [`line_inner`].
pub fn line_norm<const C: usize>(mesh: &Mesh, a: &LineField<C>) -> f64 {
    line_inner(mesh, a, a).sqrt()
}
