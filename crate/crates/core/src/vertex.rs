//! Vertex updating that follows filtered normals without folding triangles.
//!
//! Classical updates match edges against target normals through an
//! orthogonality penalty, which cannot tell a normal from its negation — a
//! face that folds over satisfies it just as well. The energy here instead
//! rewards the actual unit normal of each face for pointing *along* its
//! target: `-sum_t area_in(t) dot(N_t, normal(v, t))` plus a small tether
//! to the input positions. Sign matters, so folded configurations sit high
//! on the landscape instead of being minima.
//!
//! The energy is smooth away from degenerate faces and is minimized with
//! limited-memory BFGS under a strong Wolfe line search; any trial step
//! that collapses a face is rejected by halving. The input areas are the
//! fixed weights — only the normal direction of the moving mesh enters.
//!
//! [`sun_update`] implements the orthogonality-penalty baseline with exact
//! line search, used for comparisons and in tests that demonstrate the
//! foldovers the sign-aware energy avoids.

use crate::field::FaceField;
use crate::mesh::{Mesh, MeshError};
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use std::collections::VecDeque;
use std::fmt;

/// Failures of the vertex stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexError {
    /// A face's cross product vanished, so its normal is undefined.
    DegenerateFace { face: usize },
    /// Rebuilding the mesh from updated positions failed.
    Mesh(MeshError),
}

impl fmt::Display for VertexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexError::DegenerateFace { face } => {
                write!(f, "face {face} is degenerate at the evaluation point")
            }
            VertexError::Mesh(e) => write!(f, "updated positions are invalid: {e}"),
        }
    }
}

impl std::error::Error for VertexError {}

impl From<MeshError> for VertexError {
    fn from(e: MeshError) -> Self {
        VertexError::Mesh(e)
    }
}

/// Tuning knobs for [`update_vertices`].
#[derive(Debug, Clone)]
pub struct UpdateConfig {
    /// Strength of the tether to the input positions.
    pub eta: f64,
    /// Iteration cap.
    pub max_iters: usize,
    /// Curvature pairs kept by the limited-memory approximation.
    pub history: usize,
    /// Sufficient-decrease constant of the Wolfe search.
    pub c1: f64,
    /// Curvature constant of the Wolfe search.
    pub c2: f64,
    /// Gradient stop: `grad_tol * sqrt(V) * bbox diagonal`.
    pub grad_tol: f64,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig {
            eta: 1e-3,
            max_iters: 500,
            history: 8,
            c1: 1e-4,
            c2: 0.9,
            grad_tol: 1e-8,
        }
    }
}

impl UpdateConfig {
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

/// What a vertex update produced.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    /// The mesh rebuilt at the final positions.
    pub mesh: Mesh,
    /// Accepted descent steps taken.
    pub iterations: usize,
    /// Energy at the start and after each accepted step.
    pub energy: Vec<f64>,
    /// Euclidean gradient norm at the final point.
    pub grad_norm: f64,
    /// Faces whose final normal opposes its target.
    pub foldovers: usize,
    /// Whether the gradient test fired before the iteration cap.
    pub converged: bool,
    /// Set when the line search gave up; the best iterate is still returned.
    pub line_search_failed: bool,
}

/// Faces whose current normal points against the target field.
pub fn foldover_count(mesh: &Mesh, target: &FaceField<3>) -> usize {
    assert_eq!(target.len(), mesh.face_count(), "target field does not match mesh");
    (0..mesh.face_count())
        .filter(|&f| {
            let n = mesh.normal(f);
            let t = target.values[f];
            n.x * t[0] + n.y * t[1] + n.z * t[2] <= 0.0
        })
        .count()
}

#[inline]
fn point(x: &[f64], v: usize) -> Vector3<f64> {
    Vector3::new(x[3 * v], x[3 * v + 1], x[3 * v + 2])
}

/// Run over all faces below this count stays sequential.
const PAR_FACES: usize = 4096;

struct Evaluation {
    energy: f64,
    grad: Option<Vec<f64>>,
}

/// Alignment energy and (optionally) its gradient at flat positions `x`.
/// `Err(face)` flags a face whose cross product fell below the degeneracy
/// floor `1e-14 * input area`.
fn evaluate(
    mesh: &Mesh,
    target: &FaceField<3>,
    x: &[f64],
    x_in: &[f64],
    eta: f64,
    want_grad: bool,
) -> Result<Evaluation, usize> {
    let nt = mesh.face_count();
    let per_face = |f: usize| -> Result<(f64, [Vector3<f64>; 3]), usize> {
        let [i, j, k] = mesh.triangles()[f];
        let (vi, vj, vk) = (point(x, i), point(x, j), point(x, k));
        let cross = (vj - vi).cross(&(vk - vi));
        let norm = cross.norm();
        let s_in = mesh.area(f);
        if norm < 1e-14 * s_in {
            return Err(f);
        }
        let unit = cross / norm;
        let t = target.values[f];
        let n = Vector3::new(t[0], t[1], t[2]);
        let energy = -s_in * n.dot(&unit);
        if !want_grad {
            return Ok((energy, [Vector3::zeros(); 3]));
        }
        // d(cross)/dv at a corner is a cross with the opposite edge; the
        // normalization projects out the component along the unit normal.
        let coeff = (s_in / norm) * (n.dot(&unit) * unit - n);
        let grads = [
            coeff.cross(&(vk - vj)),
            coeff.cross(&(vi - vk)),
            coeff.cross(&(vj - vi)),
        ];
        Ok((energy, grads))
    };

    let parts: Result<Vec<_>, usize> = if nt >= PAR_FACES {
        (0..nt).into_par_iter().map(per_face).collect()
    } else {
        (0..nt).map(per_face).collect()
    };
    let parts = parts?;

    let mut energy = 0.0;
    let mut grad = want_grad.then(|| vec![0.0; x.len()]);
    for (f, (e, g)) in parts.iter().enumerate() {
        energy += e;
        if let Some(grad) = &mut grad {
            for (slot, gv) in mesh.triangles()[f].iter().zip(g) {
                grad[3 * slot] += gv.x;
                grad[3 * slot + 1] += gv.y;
                grad[3 * slot + 2] += gv.z;
            }
        }
    }
    for v in 0..x.len() / 3 {
        let d = point(x, v) - point(x_in, v);
        energy += 0.5 * eta * d.norm_squared();
        if let Some(grad) = &mut grad {
            grad[3 * v] += eta * d.x;
            grad[3 * v + 1] += eta * d.y;
            grad[3 * v + 2] += eta * d.z;
        }
    }
    Ok(Evaluation { energy, grad })
}

/// Alignment energy at explicit positions; the mesh supplies connectivity,
/// fixed areas, and the tether anchors.
pub fn orientation_energy(
    mesh: &Mesh,
    target: &FaceField<3>,
    positions: &[Point3<f64>],
    eta: f64,
) -> Result<f64, VertexError> {
    assert_eq!(positions.len(), mesh.vertex_count(), "position count does not match mesh");
    assert_eq!(target.len(), mesh.face_count(), "target field does not match mesh");
    let x = flatten(positions);
    let x_in = flatten(mesh.vertices());
    evaluate(mesh, target, &x, &x_in, eta, false)
        .map(|e| e.energy)
        .map_err(|face| VertexError::DegenerateFace { face })
}

/// Gradient of [`orientation_energy`], one vector per vertex.
pub fn orientation_gradient(
    mesh: &Mesh,
    target: &FaceField<3>,
    positions: &[Point3<f64>],
    eta: f64,
) -> Result<Vec<Vector3<f64>>, VertexError> {
    assert_eq!(positions.len(), mesh.vertex_count(), "position count does not match mesh");
    assert_eq!(target.len(), mesh.face_count(), "target field does not match mesh");
    let x = flatten(positions);
    let x_in = flatten(mesh.vertices());
    let eval = evaluate(mesh, target, &x, &x_in, eta, true)
        .map_err(|face| VertexError::DegenerateFace { face })?;
    let g = eval.grad.expect("gradient was requested");
    Ok((0..positions.len()).map(|v| point(&g, v)).collect())
}

fn flatten(points: &[Point3<f64>]) -> Vec<f64> {
    let mut x = Vec::with_capacity(3 * points.len());
    for p in points {
        x.extend_from_slice(&[p.x, p.y, p.z]);
    }
    x
}

fn unflatten(x: &[f64]) -> Vec<Point3<f64>> {
    x.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// One strong-Wolfe line search step: returns `(t, f, g)` or `None`.
/// Infeasible trials (degenerate faces) count as infinitely bad, so the
/// bracketing naturally backs off by halving toward feasible territory.
fn wolfe_search<F>(
    phi: F,
    f0: f64,
    dphi0: f64,
    c1: f64,
    c2: f64,
) -> Option<(f64, f64, Vec<f64>)>
where
    F: Fn(f64) -> Option<(f64, f64, Vec<f64>)>, // t -> (f, dphi, grad)
{
    debug_assert!(dphi0 < 0.0);
    let zoom = |mut lo: f64, mut f_lo: f64, mut hi: f64| -> Option<(f64, f64, Vec<f64>)> {
        let mut fallback: Option<(f64, f64, Vec<f64>)> = None;
        for _ in 0..40 {
            let t = 0.5 * (lo + hi);
            match phi(t) {
                None => hi = t,
                Some((f, d, g)) => {
                    if f > f0 + c1 * t * dphi0 || f >= f_lo {
                        hi = t;
                    } else {
                        if d.abs() <= -c2 * dphi0 {
                            return Some((t, f, g));
                        }
                        if fallback.as_ref().is_none_or(|(_, fb, _)| f < *fb) {
                            fallback = Some((t, f, g.clone()));
                        }
                        if d * (hi - lo) >= 0.0 {
                            hi = lo;
                        }
                        lo = t;
                        f_lo = f;
                    }
                }
            }
            if (hi - lo).abs() < 1e-16 {
                break;
            }
        }
        // No strong-Wolfe point found; a sufficient-decrease point still
        // lets the outer loop continue (the curvature guard on the history
        // update keeps the approximation sane).
        fallback
    };

    let mut t_prev = 0.0;
    let mut f_prev = f0;
    let mut t = 1.0;
    for iter in 0..20 {
        match phi(t) {
            None => return zoom(t_prev, f_prev, t),
            Some((f, d, g)) => {
                if f > f0 + c1 * t * dphi0 || (iter > 0 && f >= f_prev) {
                    return zoom(t_prev, f_prev, t);
                }
                if d.abs() <= -c2 * dphi0 {
                    return Some((t, f, g));
                }
                if d >= 0.0 {
                    return zoom(t, f, t_prev);
                }
                t_prev = t;
                f_prev = f;
                t *= 2.0;
            }
        }
    }
    None
}

/// Move vertices to follow the target normals by limited-memory BFGS on
/// the sign-aware alignment energy, starting from the mesh's positions.
pub fn update_vertices(
    mesh: &Mesh,
    target: &FaceField<3>,
    config: &UpdateConfig,
) -> Result<UpdateOutcome, VertexError> {
    assert_eq!(target.len(), mesh.face_count(), "target field does not match mesh");
    assert!(config.eta >= 0.0, "eta must not be negative");
    assert!(0.0 < config.c1 && config.c1 < config.c2 && config.c2 < 1.0);

    let x_in = flatten(mesh.vertices());
    let tol = config.grad_tol * (mesh.vertex_count() as f64).sqrt() * mesh.bbox_diagonal();

    let mut x = x_in.clone();
    let first = evaluate(mesh, target, &x, &x_in, config.eta, true)
        .map_err(|face| VertexError::DegenerateFace { face })?;
    let mut f = first.energy;
    let mut g = first.grad.expect("gradient was requested");
    let mut energy = vec![f];

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut line_search_failed = false;

    for _ in 0..config.max_iters {
        if norm(&g) <= tol {
            converged = true;
            break;
        }

        // Two-loop recursion for the search direction.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for di in d.iter_mut() {
                *di *= gamma;
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }

        let mut dphi0 = dot(&g, &d);
        if dphi0 >= 0.0 {
            // The approximation lost positive definiteness; restart.
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            dphi0 = dot(&g, &d);
        }

        let phi = |t: f64| -> Option<(f64, f64, Vec<f64>)> {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            match evaluate(mesh, target, &xt, &x_in, config.eta, true) {
                Err(_) => None,
                Ok(e) => {
                    let grad = e.grad.expect("gradient was requested");
                    let slope = dot(&grad, &d);
                    Some((e.energy, slope, grad))
                }
            }
        };

        let Some((t, f_new, g_new)) = wolfe_search(phi, f, dphi0, config.c1, config.c2) else {
            line_search_failed = true;
            break;
        };

        let s: Vec<f64> = d.iter().map(|di| t * di).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if pairs.len() == config.history {
                pairs.pop_front();
            }
            let rho = 1.0 / sy;
            pairs.push_back((s.clone(), y, rho));
        }

        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        f = f_new;
        g = g_new;
        energy.push(f);
        iterations += 1;
    }

    let grad_norm = norm(&g);
    let updated = mesh.with_vertices(unflatten(&x))?;
    let foldovers = foldover_count(&updated, target);
    Ok(UpdateOutcome {
        mesh: updated,
        iterations,
        energy,
        grad_norm,
        foldovers,
        converged,
        line_search_failed,
    })
}

/// Orthogonality-penalty baseline: steepest descent with exact line search
/// on `sum_t area_in(t) sum_edges dot(N_t, edge)^2`. Sign-blind by
/// construction, hence prone to foldovers at strong noise.
pub fn sun_update(
    mesh: &Mesh,
    target: &FaceField<3>,
    iters: usize,
) -> Result<UpdateOutcome, VertexError> {
    assert_eq!(target.len(), mesh.face_count(), "target field does not match mesh");
    let nv = mesh.vertex_count();
    let mut x = flatten(mesh.vertices());
    let tol = 1e-8 * (nv as f64).sqrt() * mesh.bbox_diagonal();

    let eval = |x: &[f64], grad: Option<&mut Vec<f64>>| -> f64 {
        let mut energy = 0.0;
        if let Some(g) = &grad {
            debug_assert_eq!(g.len(), x.len());
        }
        let mut grad = grad;
        if let Some(g) = &mut grad {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for f in 0..mesh.face_count() {
            let tri = mesh.triangles()[f];
            let s = mesh.area(f);
            let t = target.values[f];
            let n = Vector3::new(t[0], t[1], t[2]);
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let proj = n.dot(&(point(x, a) - point(x, b)));
                energy += s * proj * proj;
                if let Some(g) = &mut grad {
                    let w = 2.0 * s * proj;
                    for c in 0..3 {
                        g[3 * a + c] += w * n[c];
                        g[3 * b + c] -= w * n[c];
                    }
                }
            }
        }
        energy
    };

    let mut g = vec![0.0; x.len()];
    let mut energy_trace = vec![eval(&x, Some(&mut g))];
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..iters {
        if norm(&g) <= tol {
            converged = true;
            break;
        }
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        // The energy is an exact quadratic along any ray: minimize it in
        // closed form instead of searching.
        let mut num = 0.0;
        let mut den = 0.0;
        for f in 0..mesh.face_count() {
            let tri = mesh.triangles()[f];
            let s = mesh.area(f);
            let t = target.values[f];
            let n = Vector3::new(t[0], t[1], t[2]);
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let pa = n.dot(&(point(&x, a) - point(&x, b)));
                let pb = n.dot(&(point(&d, a) - point(&d, b)));
                num += s * pa * pb;
                den += s * pb * pb;
            }
        }
        if den <= 0.0 {
            break;
        }
        let t_star = -num / den;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += t_star * di;
        }
        let e = eval(&x, Some(&mut g));
        energy_trace.push(e);
        iterations += 1;
    }

    let grad_norm = norm(&g);
    let updated = mesh.with_vertices(unflatten(&x))?;
    let foldovers = foldover_count(&updated, target);
    Ok(UpdateOutcome {
        mesh: updated,
        iterations,
        energy: energy_trace,
        grad_norm,
        foldovers,
        converged,
        line_search_failed: false,
    })
}
