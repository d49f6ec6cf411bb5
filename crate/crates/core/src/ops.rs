//! First- and second-order difference operators on piecewise-constant fields.
//!
//! The gradient of a face field lives on edges (the signed jump across each
//! interior edge), its negative adjoint is a divergence back on faces, and
//! their composition is the Laplacian. The second-order difference compares
//! a face against the two faces across the edges flanking each corner and
//! lives on lines; its adjoint follows from swapping the summation order in
//! the line-weighted inner product and is what the filtering solves ride on.
//!
//! Everything at the border uses natural boundary handling: jumps and
//! second differences across missing neighbors are zero, and the adjoints
//! skip exactly those terms, so the adjoint identities hold on bordered
//! meshes too.
//!
//! Each operator exists twice — as a direct stencil application and as an
//! assembled sparse matrix — and the two must agree to near machine
//! precision; the solvers use the matrices, everything else the stencils.

use crate::field::{EdgeField, FaceField, LineField};
use crate::mesh::Mesh;
use crate::sparse::Csr;

/// Per-line weights, laid out like a [`LineField`].
pub type LineWeights = Vec<[f64; 3]>;
/// Per-face weights.
pub type FaceWeights = Vec<f64>;

/// Which roughness measure a solver penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    /// Length-weighted total variation of second-order differences.
    SecondOrder,
    /// Area-weighted total variation of the Laplacian.
    Laplacian,
}

/// Signed jump of `u` across each edge; zero on border edges.
pub fn gradient<const C: usize>(mesh: &Mesh, u: &FaceField<C>) -> EdgeField<C> {
    assert_eq!(u.len(), mesh.face_count(), "face field does not match mesh");
    let mut out = EdgeField::zeros(mesh);
    for (e, edge) in mesh.edges().iter().enumerate() {
        if let Some((f1, s1)) = edge.face1 {
            let (f0, s0) = edge.face0;
            for c in 0..C {
                out.values[e][c] = s0 * u.values[f0][c] + s1 * u.values[f1][c];
            }
        }
    }
    out
}

/// Negative adjoint of [`gradient`]: length-weighted signed sums of edge
/// values, scaled by inverse face area.
pub fn divergence<const C: usize>(mesh: &Mesh, q: &EdgeField<C>) -> FaceField<C> {
    assert_eq!(q.len(), mesh.edge_count(), "edge field does not match mesh");
    let mut out = FaceField::zeros(mesh);
    for f in 0..mesh.face_count() {
        let inv_area = 1.0 / mesh.area(f);
        let mut acc = [0.0; C];
        for &(e, sign) in mesh.face_edges(f) {
            let edge = &mesh.edges()[e];
            if edge.is_interior() {
                let w = sign * edge.length;
                for c in 0..C {
                    acc[c] += w * q.values[e][c];
                }
            }
        }
        for c in 0..C {
            out.values[f][c] = -inv_area * acc[c];
        }
    }
    out
}

/// Composition of [`divergence`] and [`gradient`]; border edges drop out.
pub fn laplacian<const C: usize>(mesh: &Mesh, u: &FaceField<C>) -> FaceField<C> {
    assert_eq!(u.len(), mesh.face_count(), "face field does not match mesh");
    let mut out = FaceField::zeros(mesh);
    for f in 0..mesh.face_count() {
        let inv_area = 1.0 / mesh.area(f);
        let mut acc = [0.0; C];
        for (k, &(e, _)) in mesh.face_edges(f).iter().enumerate() {
            if let Some(g) = mesh.neighbor_across(f, k) {
                let len = mesh.edges()[e].length;
                for c in 0..C {
                    acc[c] += len * (u.values[g][c] - u.values[f][c]);
                }
            }
        }
        for c in 0..C {
            out.values[f][c] = inv_area * acc[c];
        }
    }
    out
}

/// Second-order difference per line: the two wing values minus twice the
/// home value; zero where a flanking edge lies on the border.
pub fn second_difference<const C: usize>(mesh: &Mesh, u: &FaceField<C>) -> LineField<C> {
    assert_eq!(u.len(), mesh.face_count(), "face field does not match mesh");
    let mut out = LineField::zeros(mesh);
    for f in 0..mesh.face_count() {
        for (k, line) in mesh.face_lines(f).iter().enumerate() {
            if let Some([p, m]) = line.wings {
                for c in 0..C {
                    out.values[f][k][c] =
                        u.values[p][c] + u.values[m][c] - 2.0 * u.values[f][c];
                }
            }
        }
    }
    out
}

/// Adjoint of [`second_difference`] with respect to the area- and
/// length-weighted inner products: incoming neighbor lines count once,
/// a face's own lines count twice negatively.
pub fn second_difference_adjoint<const C: usize>(mesh: &Mesh, p: &LineField<C>) -> FaceField<C> {
    assert_eq!(p.len(), mesh.face_count(), "line field does not match mesh");
    let mut out = FaceField::zeros(mesh);
    for f in 0..mesh.face_count() {
        let mut acc = [0.0; C];
        for &(g, k) in mesh.incoming_lines(f) {
            let len = mesh.face_lines(g)[k].length;
            for c in 0..C {
                acc[c] += len * p.values[g][k][c];
            }
        }
        for (k, line) in mesh.face_lines(f).iter().enumerate() {
            if line.wings.is_some() {
                for c in 0..C {
                    acc[c] -= 2.0 * line.length * p.values[f][k][c];
                }
            }
        }
        let inv_area = 1.0 / mesh.area(f);
        for c in 0..C {
            out.values[f][c] = inv_area * acc[c];
        }
    }
    out
}

fn channel_norm<const C: usize>(v: &[f64; C]) -> f64 {
    let mut s = 0.0;
    for c in 0..C {
        s += v[c] * v[c];
    }
    s.sqrt()
}

/// Length-weighted total variation of second differences,
/// `sum_l w_l |second_difference(u)|_l len(l)`; weights default to one.
pub fn second_order_variation<const C: usize>(
    mesh: &Mesh,
    u: &FaceField<C>,
    weights: Option<&LineWeights>,
) -> f64 {
    if let Some(w) = weights {
        assert_eq!(w.len(), mesh.face_count(), "line weights do not match mesh");
    }
    let d = second_difference(mesh, u);
    let mut s = 0.0;
    for f in 0..mesh.face_count() {
        let lines = mesh.face_lines(f);
        for k in 0..3 {
            let w = weights.map_or(1.0, |w| w[f][k]);
            s += w * channel_norm(&d.values[f][k]) * lines[k].length;
        }
    }
    s
}

/// Area-weighted total variation of the Laplacian,
/// `sum_t w_t |laplacian(u)|_t area(t)`; weights default to one.
pub fn laplacian_variation<const C: usize>(
    mesh: &Mesh,
    u: &FaceField<C>,
    weights: Option<&FaceWeights>,
) -> f64 {
    if let Some(w) = weights {
        assert_eq!(w.len(), mesh.face_count(), "face weights do not match mesh");
    }
    let d = laplacian(mesh, u);
    let mut s = 0.0;
    for f in 0..mesh.face_count() {
        let w = weights.map_or(1.0, |w| w[f]);
        s += w * channel_norm(&d.values[f]) * mesh.area(f);
    }
    s
}

/// Value of the selected regularizer; line weights apply to
/// [`Regularizer::SecondOrder`], face weights to [`Regularizer::Laplacian`].
pub fn regularizer_value<const C: usize>(
    mesh: &Mesh,
    which: Regularizer,
    u: &FaceField<C>,
    line_weights: Option<&LineWeights>,
    face_weights: Option<&FaceWeights>,
) -> f64 {
    match which {
        Regularizer::SecondOrder => second_order_variation(mesh, u, line_weights),
        Regularizer::Laplacian => laplacian_variation(mesh, u, face_weights),
    }
}

/// Assembled [`second_difference`]: a `(3 T) x T` matrix whose row
/// `3 f + k` is line `k` of face `f`; boundary-flanked rows are empty.
pub fn second_difference_matrix(mesh: &Mesh) -> Csr {
    let nt = mesh.face_count();
    let mut triplets = Vec::with_capacity(9 * nt);
    for f in 0..nt {
        for (k, line) in mesh.face_lines(f).iter().enumerate() {
            if let Some([p, m]) = line.wings {
                let row = 3 * f + k;
                triplets.push((row, p, 1.0));
                triplets.push((row, m, 1.0));
                triplets.push((row, f, -2.0));
            }
        }
    }
    Csr::from_triplets(3 * nt, nt, triplets)
}

/// Assembled [`gradient`]: an `E x T` signed incidence matrix with empty
/// rows for border edges.
pub fn gradient_matrix(mesh: &Mesh) -> Csr {
    let mut triplets = Vec::with_capacity(2 * mesh.edge_count());
    for (e, edge) in mesh.edges().iter().enumerate() {
        if let Some((f1, s1)) = edge.face1 {
            let (f0, s0) = edge.face0;
            triplets.push((e, f0, s0));
            triplets.push((e, f1, s1));
        }
    }
    Csr::from_triplets(mesh.edge_count(), mesh.face_count(), triplets)
}

/// Assembled [`laplacian`]: a `T x T` matrix with the inverse-area and
/// edge-length weights baked in.
pub fn laplacian_matrix(mesh: &Mesh) -> Csr {
    let nt = mesh.face_count();
    let mut triplets = Vec::with_capacity(4 * nt);
    for f in 0..nt {
        let inv_area = 1.0 / mesh.area(f);
        for (k, &(e, _)) in mesh.face_edges(f).iter().enumerate() {
            if let Some(g) = mesh.neighbor_across(f, k) {
                let w = inv_area * mesh.edges()[e].length;
                triplets.push((f, g, w));
                triplets.push((f, f, -w));
            }
        }
    }
    Csr::from_triplets(nt, nt, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{face_inner, face_norm, line_inner};
    use crate::shapes;
    use nalgebra::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_face_field<const C: usize>(mesh: &Mesh, rng: &mut ChaCha12Rng) -> FaceField<C> {
        let values = (0..mesh.face_count())
            .map(|_| {
                let mut v = [0.0; C];
                for c in v.iter_mut() {
                    *c = rng.gen_range(-1.0..1.0);
                }
                v
            })
            .collect();
        FaceField::from_values(values)
    }

    fn random_line_field<const C: usize>(mesh: &Mesh, rng: &mut ChaCha12Rng) -> LineField<C> {
        let mut p = LineField::zeros(mesh);
        for t in &mut p.values {
            for k in t.iter_mut() {
                for c in k.iter_mut() {
                    *c = rng.gen_range(-1.0..1.0);
                }
            }
        }
        p
    }

    /// Two right triangles over the unit square, sharing the diagonal.
    fn strip() -> Mesh {
        let verts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        Mesh::build(verts, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn gradient_on_the_strip_by_hand() {
        let m = strip();
        let u = FaceField::from_values(vec![[2.0], [5.0]]);
        let g = gradient(&m, &u);
        for (e, edge) in m.edges().iter().enumerate() {
            if edge.is_interior() {
                // Jump is face1 minus face0 up to the stored orientation:
                // here the diagonal (0, 2) is traversed 2 -> 0 by the first
                // face, so the jump comes out u1 - u0 = 3.
                assert_eq!(g.values[e][0], 3.0);
            } else {
                assert_eq!(g.values[e][0], 0.0);
            }
        }
    }

    #[test]
    fn divergence_on_the_strip_by_hand() {
        let m = strip();
        let mut q = EdgeField::<1>::zeros(&m);
        let diag = m
            .edges()
            .iter()
            .position(|e| e.is_interior())
            .expect("strip has one interior edge");
        q.values[diag][0] = 1.0;
        let d = divergence(&m, &q);
        // Both faces have area 1/2 and the diagonal has length sqrt(2); the
        // signs are opposite, so the divergences are +/- 2 sqrt(2).
        let expect = 2.0 * 2f64.sqrt();
        assert!((d.values[0][0].abs() - expect).abs() < 1e-12);
        assert!((d.values[1][0].abs() - expect).abs() < 1e-12);
        assert!((d.values[0][0] + d.values[1][0]).abs() < 1e-12);
    }

    #[test]
    fn second_difference_on_the_tetrahedron_by_hand() {
        let m = shapes::tetrahedron();
        let u = FaceField::from_values(vec![[1.0], [0.0], [0.0], [0.0]]);
        let d = second_difference(&m, &u);
        // Face 0: both wings carry 0 around every corner, home value is 1.
        for k in 0..3 {
            assert_eq!(d.values[0][k][0], -2.0);
        }
        // Every other face touches face 0 across one edge, so exactly the
        // two lines anchored on that edge see it as a wing.
        for f in 1..4 {
            let mut got: Vec<f64> = (0..3).map(|k| d.values[f][k][0]).collect();
            got.sort_by(f64::total_cmp);
            assert_eq!(got, vec![0.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn second_difference_ignores_constants() {
        let m = shapes::icosphere(1);
        let u = FaceField::<1>::constant(&m, [7.5]);
        let d = second_difference(&m, &u);
        for t in &d.values {
            for k in t {
                assert_eq!(k[0], 0.0);
            }
        }
        let l = laplacian(&m, &u);
        for v in &l.values {
            assert!(v[0].abs() < 1e-12);
        }
    }

    #[test]
    fn second_difference_values_are_scale_invariant() {
        // Uniform scaling moves lengths and areas but not the differences.
        let m = shapes::icosphere(1);
        let scaled = m
            .with_vertices(m.vertices().iter().map(|p| Point3::from(p.coords * 3.0)).collect())
            .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let u = random_face_field::<1>(&m, &mut rng);
        let a = second_difference(&m, &u);
        let b = second_difference(&scaled, &u);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn adjoint_identity_for_gradient_and_divergence() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for mesh in [shapes::tetrahedron(), shapes::icosphere(1), shapes::grid_patch(5, 4)] {
            for _ in 0..10 {
                let u = random_face_field::<2>(&mesh, &mut rng);
                let mut q = EdgeField::<2>::zeros(&mesh);
                for v in &mut q.values {
                    for c in v.iter_mut() {
                        *c = rng.gen_range(-1.0..1.0);
                    }
                }
                let lhs = crate::field::edge_inner(&mesh, &gradient(&mesh, &u), &q);
                let rhs = -face_inner(&mesh, &u, &divergence(&mesh, &q));
                let scale = face_norm(&mesh, &u) * crate::field::edge_norm(&mesh, &q);
                assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn adjoint_identity_for_second_difference() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for mesh in [shapes::tetrahedron(), shapes::icosphere(1), shapes::grid_patch(4, 6)] {
            for _ in 0..10 {
                let u = random_face_field::<3>(&mesh, &mut rng);
                let p = random_line_field::<3>(&mesh, &mut rng);
                let lhs = line_inner(&mesh, &second_difference(&mesh, &u), &p);
                let rhs = face_inner(&mesh, &u, &second_difference_adjoint(&mesh, &p));
                let scale =
                    face_norm(&mesh, &u) * crate::field::line_norm(&mesh, &p);
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * scale.max(1.0),
                    "adjoint identity violated: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn laplacian_is_divergence_of_gradient_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        for mesh in [shapes::icosphere(1), shapes::grid_patch(6, 3)] {
            let u = random_face_field::<1>(&mesh, &mut rng);
            let composed = divergence(&mesh, &gradient(&mesh, &u));
            let direct = laplacian(&mesh, &u);
            let scale = face_norm(&mesh, &direct).max(1.0);
            for f in 0..mesh.face_count() {
                assert!((composed.values[f][0] - direct.values[f][0]).abs() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn operators_are_linear() {
        let m = shapes::icosphere(1);
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let u = random_face_field::<1>(&m, &mut rng);
        let v = random_face_field::<1>(&m, &mut rng);
        let mut combo = FaceField::<1>::zeros(&m);
        for f in 0..m.face_count() {
            combo.values[f][0] = 2.0 * u.values[f][0] - 3.0 * v.values[f][0];
        }
        let du = second_difference(&m, &u);
        let dv = second_difference(&m, &v);
        let dc = second_difference(&m, &combo);
        for f in 0..m.face_count() {
            for k in 0..3 {
                let expect = 2.0 * du.values[f][k][0] - 3.0 * dv.values[f][k][0];
                assert!((dc.values[f][k][0] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matrices_match_stencils() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        for mesh in [shapes::icosphere(1), shapes::grid_patch(5, 5)] {
            let u = random_face_field::<1>(&mesh, &mut rng);
            let nt = mesh.face_count();

            let g = second_difference_matrix(&mesh);
            let mut flat = vec![[0.0]; 3 * nt];
            g.apply(&u.values, &mut flat);
            let stencil = second_difference(&mesh, &u);
            for f in 0..nt {
                for k in 0..3 {
                    assert!((flat[3 * f + k][0] - stencil.values[f][k][0]).abs() < 1e-13);
                }
            }

            let gm = gradient_matrix(&mesh);
            let mut ge = vec![[0.0]; mesh.edge_count()];
            gm.apply(&u.values, &mut ge);
            let grad = gradient(&mesh, &u);
            for e in 0..mesh.edge_count() {
                assert!((ge[e][0] - grad.values[e][0]).abs() < 1e-13);
            }

            let lm = laplacian_matrix(&mesh);
            let mut lv = vec![[0.0]; nt];
            lm.apply(&u.values, &mut lv);
            let lap = laplacian(&mesh, &u);
            let scale = face_norm(&mesh, &lap).max(1.0);
            for f in 0..nt {
                assert!((lv[f][0] - lap.values[f][0]).abs() < 1e-13 * scale);
            }
        }
    }

    #[test]
    fn edge_reorientation_only_flips_gradient_signs() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let m = shapes::icosphere(1);
        let u = random_face_field::<1>(&m, &mut rng);
        let base_grad = gradient(&m, &u);
        let base_diff = second_difference(&m, &u);
        let base_norm = crate::field::edge_norm(&m, &base_grad);

        let mut flipped = m.clone();
        for e in (0..m.edge_count()).step_by(3) {
            flipped.flip_edge_orientation(e);
        }
        let g = gradient(&flipped, &u);
        for e in 0..m.edge_count() {
            let expect =
                if e % 3 == 0 { -base_grad.values[e][0] } else { base_grad.values[e][0] };
            assert_eq!(g.values[e][0], expect);
        }
        assert_eq!(crate::field::edge_norm(&flipped, &g), base_norm);
        // The second difference never sees edge orientations.
        assert_eq!(second_difference(&flipped, &u).values, base_diff.values);
    }

    #[test]
    fn weighted_regularizers_reduce_to_plain_ones() {
        let m = shapes::icosphere(1);
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let u = random_face_field::<3>(&m, &mut rng);
        let ones_l: LineWeights = vec![[1.0; 3]; m.face_count()];
        let ones_f: FaceWeights = vec![1.0; m.face_count()];
        let a = second_order_variation(&m, &u, None);
        let b = second_order_variation(&m, &u, Some(&ones_l));
        assert_eq!(a, b);
        let c = laplacian_variation(&m, &u, None);
        let d = laplacian_variation(&m, &u, Some(&ones_f));
        assert_eq!(c, d);
        assert!(a > 0.0 && c > 0.0);
    }
}
