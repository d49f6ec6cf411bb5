//! Minimal CSR matrices and a Jacobi-preconditioned conjugate gradient.
//!
//! The filtering subproblems reduce to symmetric positive definite systems
//! whose sparsity is fixed by the mesh, so a compact CSR type plus one CG
//! variant covers every solve in the crate. The CG runs `C` right-hand
//! sides in lockstep (one per channel) sharing the matrix-vector products.

use rayon::prelude::*;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Rows above this count are worth fanning out across threads.
const PAR_ROWS: usize = 2048;

impl Csr {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in &triplets {
            debug_assert!(r < nrows && c < ncols);
            if row_ptr[r + 1] > 0 && *cols.last().unwrap() == c && row_ptr[r + 1] == cols.len() {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] = cols.len();
            }
        }
        // Turn per-row end offsets into a prefix scan.
        for r in 0..nrows {
            if row_ptr[r + 1] == 0 {
                row_ptr[r + 1] = row_ptr[r];
            }
        }
        Csr { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of one row as parallel (column, value) slices.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    /// `y = A x`, all `C` channels at once.
    pub fn apply<const C: usize>(&self, x: &[[f64; C]], y: &mut [[f64; C]]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let run_row = |r: usize, out: &mut [f64; C]| {
            let mut acc = [0.0; C];
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                let xv = &x[self.cols[i]];
                let a = self.vals[i];
                for c in 0..C {
                    acc[c] += a * xv[c];
                }
            }
            *out = acc;
        };
        if self.nrows >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, out)| run_row(r, out));
        } else {
            for (r, out) in y.iter_mut().enumerate() {
                run_row(r, out);
            }
        }
    }

    /// `y = A^T x`, all `C` channels at once.
    pub fn apply_transpose<const C: usize>(&self, x: &[[f64; C]], y: &mut [[f64; C]]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for v in y.iter_mut() {
            *v = [0.0; C];
        }
        for r in 0..self.nrows {
            let xv = x[r];
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                let out = &mut y[self.cols[i]];
                let a = self.vals[i];
                for c in 0..C {
                    out[c] += a * xv[c];
                }
            }
        }
    }

    /// The main diagonal (zero where a row has no diagonal entry).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows.min(self.ncols)];
        for r in 0..d.len() {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[i] == r {
                    d[r] = self.vals[i];
                }
            }
        }
        d
    }

    /// `scale * self + diag(d)` as a new matrix (square matrices only).
    pub fn scaled_plus_diagonal(&self, scale: f64, d: &[f64]) -> Csr {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(d.len(), self.nrows);
        let mut triplets = Vec::with_capacity(self.nnz() + self.nrows);
        for r in 0..self.nrows {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((r, self.cols[i], scale * self.vals[i]));
            }
            triplets.push((r, r, d[r]));
        }
        Csr::from_triplets(self.nrows, self.ncols, triplets)
    }
}

/// `op' diag(weight) op` assembled by summing one small outer product per
/// row of `op` — the normal-equation matrix of a weighted least-squares
/// operator. Symmetric positive semidefinite by construction.
pub fn weighted_gram(op: &Csr, weight: &[f64]) -> Csr {
    assert_eq!(weight.len(), op.nrows());
    let mut triplets = Vec::with_capacity(3 * op.nnz());
    for r in 0..op.nrows() {
        let (cols, vals) = op.row(r);
        let w = weight[r];
        for (i, (&ci, &vi)) in cols.iter().zip(vals).enumerate() {
            for (&cj, &vj) in cols[i..].iter().zip(&vals[i..]) {
                let v = w * vi * vj;
                triplets.push((ci, cj, v));
                if ci != cj {
                    triplets.push((cj, ci, v));
                }
            }
        }
    }
    Csr::from_triplets(op.ncols(), op.ncols(), triplets)
}

/// What a CG run did: iterations taken and the residual history.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub iterations: usize,
    pub converged: bool,
    /// Block residual 2-norm after 0, 1, 2, ... iterations.
    pub residuals: Vec<f64>,
}

fn block_norm<const C: usize>(x: &[[f64; C]]) -> f64 {
    let mut s = 0.0;
    for v in x {
        for c in 0..C {
            s += v[c] * v[c];
        }
    }
    s.sqrt()
}

/// Jacobi-preconditioned conjugate gradient on a symmetric positive
/// definite system, one independent recurrence per channel.
///
/// `x` supplies the starting guess and receives the solution. Stops when
/// the block residual drops below `rel_tol` times the right-hand side norm
/// or after `max_iters` matrix applications.
pub fn jacobi_pcg<const C: usize>(
    a: &Csr,
    b: &[[f64; C]],
    x: &mut [[f64; C]],
    rel_tol: f64,
    max_iters: usize,
) -> CgOutcome {
    assert_eq!(a.nrows(), a.ncols());
    assert_eq!(b.len(), a.nrows());
    assert_eq!(x.len(), a.nrows());
    let n = a.nrows();
    let diag = a.diagonal();
    let inv_diag: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();

    let b_norm = block_norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = [0.0; C]);
        return CgOutcome { iterations: 0, converged: true, residuals: vec![0.0] };
    }
    let target = rel_tol * b_norm;

    let mut r = vec![[0.0; C]; n];
    a.apply(x, &mut r);
    for i in 0..n {
        for c in 0..C {
            r[i][c] = b[i][c] - r[i][c];
        }
    }
    let mut z: Vec<[f64; C]> = (0..n)
        .map(|i| {
            let mut v = [0.0; C];
            for c in 0..C {
                v[c] = r[i][c] * inv_diag[i];
            }
            v
        })
        .collect();
    let mut p = z.clone();
    let mut rho = [0.0; C];
    for i in 0..n {
        for c in 0..C {
            rho[c] += r[i][c] * z[i][c];
        }
    }

    let mut residuals = vec![block_norm(&r)];
    if residuals[0] <= target {
        return CgOutcome { iterations: 0, converged: true, residuals };
    }

    let mut q = vec![[0.0; C]; n];
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iters {
        a.apply(&p, &mut q);
        let mut denom = [0.0; C];
        for i in 0..n {
            for c in 0..C {
                denom[c] += p[i][c] * q[i][c];
            }
        }
        let mut alpha = [0.0; C];
        let mut live = false;
        for c in 0..C {
            if rho[c] != 0.0 && denom[c] > 0.0 {
                alpha[c] = rho[c] / denom[c];
                live = true;
            }
        }
        if !live {
            break;
        }
        for i in 0..n {
            for c in 0..C {
                x[i][c] += alpha[c] * p[i][c];
                r[i][c] -= alpha[c] * q[i][c];
            }
        }
        iterations += 1;
        let rn = block_norm(&r);
        residuals.push(rn);
        if rn <= target {
            converged = true;
            break;
        }
        let mut rho_next = [0.0; C];
        for i in 0..n {
            for c in 0..C {
                z[i][c] = r[i][c] * inv_diag[i];
                rho_next[c] += r[i][c] * z[i][c];
            }
        }
        for i in 0..n {
            for c in 0..C {
                let beta = if rho[c] != 0.0 { rho_next[c] / rho[c] } else { 0.0 };
                p[i][c] = z[i][c] + beta * p[i][c];
            }
        }
        rho = rho_next;
    }

    CgOutcome { iterations, converged, residuals }
}
