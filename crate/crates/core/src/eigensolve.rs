//! Lowest eigenpairs of symmetric positive operators.
//!
//! Small problems go through a dense symmetric eigendecomposition. Larger
//! ones use a matrix-free thick-restart Lanczos iteration with full
//! (two-pass Gram–Schmidt) reorthogonalization.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fracop::FracOperator;
use crate::grid::{DomainMask, GridFunction};

/// Masks up to this size are solved densely.
pub const DENSE_LIMIT: usize = 2000;

/// Real symmetric linear map on `ℝⁿ`.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Dense matrix, when cheap enough to assemble.
    fn to_dense(&self) -> Option<DMatrix<f64>> {
        None
    }
}

impl SymmetricOperator for FracOperator {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_real(x, y)
    }

    fn to_dense(&self) -> Option<DMatrix<f64>> {
        Some(self.dense_matrix())
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate() {
            *out = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn to_dense(&self) -> Option<DMatrix<f64>> {
        Some(self.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dense up to [`DENSE_LIMIT`], Lanczos above.
    Auto,
    Dense,
    Lanczos,
}

/// Eigenpairs with unit Euclidean eigenvectors.
#[derive(Debug, Clone)]
pub struct RealEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: Vec<bool>,
    pub method: Method,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    /// `L₂`-normalized.
    pub eigenvectors: Vec<GridFunction>,
    /// `‖A v − λ v‖` for each normalized pair.
    pub residuals: Vec<f64>,
    /// Dense: 1. Lanczos: operator applications.
    pub iterations: usize,
    pub converged: Vec<bool>,
    pub seed: u64,
    pub method: Method,
}

impl EigenResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn lowest(&self) -> f64 {
        self.eigenvalues[0]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn residual_norm(op: &dyn SymmetricOperator, lambda: f64, v: &[f64]) -> f64 {
    let mut av = vec![0.0; v.len()];
    op.apply(v, &mut av);
    axpy(-lambda, v, &mut av);
    norm(&av)
}

/// Sign convention: the ground state has positive sum, the others a
/// positive first significant entry.
fn fix_sign(v: &mut [f64], ground: bool) {
    let flip = if ground {
        v.iter().sum::<f64>() < 0.0
    } else {
        let big = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v.iter()
            .find(|x| x.abs() > 1e-6 * big)
            .is_some_and(|&x| x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn finish(
    op: &dyn SymmetricOperator,
    values: Vec<f64>,
    mut vectors: Vec<Vec<f64>>,
    tol: f64,
    iterations: usize,
    method: Method,
) -> RealEigen {
    for (i, v) in vectors.iter_mut().enumerate() {
        let nv = norm(v);
        v.iter_mut().for_each(|x| *x /= nv);
        fix_sign(v, i == 0);
    }
    let residuals: Vec<f64> = values
        .iter()
        .zip(&vectors)
        .map(|(&l, v)| residual_norm(op, l, v))
        .collect();
    let converged = residuals.iter().map(|&r| r <= tol).collect();
    RealEigen {
        values,
        vectors,
        residuals,
        iterations,
        converged,
        method,
    }
}

/// Lowest `k` pairs from a full dense decomposition.
pub fn dense_lowest(op: &dyn SymmetricOperator, k: usize, tol: f64) -> Result<RealEigen> {
    let m = op
        .to_dense()
        .ok_or_else(|| Error::Unsupported("operator has no dense form".into()))?;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order[..k]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    Ok(finish(op, values, vectors, tol, 1, Method::Dense))
}

/// Orthogonalizes `w` against `basis` twice, returning the accumulated
/// coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, b) in coeffs.iter_mut().zip(basis) {
            let d = dot(b, w);
            axpy(-d, b, w);
            *c += d;
        }
    }
    coeffs
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, basis: &[Vec<f64>]) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(basis, &mut v);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}

/// Thick-restart Lanczos for the `k` lowest pairs, stopping once every
/// wanted Ritz pair has residual `<= tol` or after `budget` applications.
pub fn lanczos_lowest(
    op: &dyn SymmetricOperator,
    k: usize,
    tol: f64,
    seed: u64,
    budget: usize,
) -> RealEigen {
    let n = op.dim();
    let m = (2 * k + 30).max(40).min(n);
    let keep = (k + (m - k) / 2).min(m - 1).max(k.min(m - 1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    basis.push(random_unit(n, &mut rng, &[]));
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut start = 0;
    let mut matvecs = 0;
    let mut w = vec![0.0; n];

    loop {
        let mut last_beta = 0.0;
        let mut residual = vec![0.0; n];
        for j in start..m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let coeffs = orthogonalize(&basis, &mut w);
            for (i, c) in coeffs.into_iter().enumerate() {
                h[(i, j)] = c;
                h[(j, i)] = c;
            }
            let beta = norm(&w);
            let scale = h[(j, j)].abs().max(1.0);
            if j + 1 < m {
                if beta > 1e-12 * scale {
                    h[(j + 1, j)] = beta;
                    h[(j, j + 1)] = beta;
                    basis.push(w.iter().map(|x| x / beta).collect());
                } else {
                    // invariant subspace found: continue with a fresh direction
                    h[(j + 1, j)] = 0.0;
                    h[(j, j + 1)] = 0.0;
                    let fresh = random_unit(n, &mut rng, &basis);
                    basis.push(fresh);
                }
            } else {
                last_beta = beta;
                if beta > 0.0 {
                    residual = w.iter().map(|x| x / beta).collect();
                }
            }
        }

        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let estimates: Vec<f64> = order[..k]
            .iter()
            .map(|&i| (last_beta * eig.eigenvectors[(m - 1, i)]).abs())
            .collect();
        let ritz = |count: usize| -> Vec<Vec<f64>> {
            order[..count]
                .iter()
                .map(|&i| {
                    let mut x = vec![0.0; n];
                    for (j, b) in basis.iter().enumerate() {
                        axpy(eig.eigenvectors[(j, i)], b, &mut x);
                    }
                    x
                })
                .collect()
        };

        let exhausted = matvecs >= budget || m == n;
        if estimates.iter().all(|&e| e <= 0.5 * tol) || exhausted {
            let values: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
            let result = finish(op, values, ritz(k), tol, matvecs, Method::Lanczos);
            if result.converged.iter().all(|&c| c) || exhausted {
                return result;
            }
        }

        let kept = ritz(keep);
        h.fill(0.0);
        for (i, &idx) in order[..keep].iter().enumerate() {
            h[(i, i)] = eig.eigenvalues[idx];
        }
        basis = kept;
        if last_beta > 0.0 {
            // the residual is orthogonal to the old basis, hence to the Ritz vectors
            let mut r = residual;
            orthogonalize(&basis, &mut r);
            let nr = norm(&r);
            basis.push(r.into_iter().map(|x| x / nr).collect());
        } else {
            let fresh = random_unit(n, &mut rng, &basis);
            basis.push(fresh);
        }
        start = keep;
    }
}

/// Budget of operator applications: `50·k·√n`.
pub fn iteration_budget(k: usize, n: usize) -> usize {
    (50.0 * k as f64 * (n as f64).sqrt()).ceil() as usize
}

/// Lowest `k` eigenpairs of a generic operator.
pub fn lowest_pairs(
    op: &dyn SymmetricOperator,
    k: usize,
    tol: f64,
    seed: u64,
    method: Method,
) -> Result<RealEigen> {
    let n = op.dim();
    if k == 0 {
        return Err(Error::param("k", "at least one eigenpair is required"));
    }
    if k > n {
        return Err(Error::param(
            "k",
            format!("k = {k} exceeds the mask size {n}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::param(
            "tol",
            format!("tolerance {tol} must be positive"),
        ));
    }
    let dense = match method {
        Method::Auto => n <= DENSE_LIMIT,
        Method::Dense => true,
        Method::Lanczos => false,
    };
    if dense {
        dense_lowest(op, k, tol)
    } else {
        Ok(lanczos_lowest(op, k, tol, seed, iteration_budget(k, n)))
    }
}

fn to_grid_functions(mask: &Arc<DomainMask>, vectors: &[Vec<f64>]) -> Vec<GridFunction> {
    let scale = 1.0 / mask.grid().cell_volume().sqrt();
    vectors
        .iter()
        .map(|v| {
            let values = v.iter().map(|&x| Complex64::new(x * scale, 0.0)).collect();
            GridFunction::from_values(mask.clone(), values).expect("eigenvector length")
        })
        .collect()
}

/// Lowest `k` eigenpairs of a masked operator.
pub fn smallest_eigs(op: &FracOperator, k: usize, tol: f64, seed: u64) -> Result<EigenResult> {
    smallest_eigs_with(op, k, tol, seed, Method::Auto)
}

pub fn smallest_eigs_with(
    op: &FracOperator,
    k: usize,
    tol: f64,
    seed: u64,
    method: Method,
) -> Result<EigenResult> {
    let r = lowest_pairs(op, k, tol, seed, method)?;
    Ok(EigenResult {
        eigenvectors: to_grid_functions(op.mask(), &r.vectors),
        eigenvalues: r.values,
        residuals: r.residuals,
        iterations: r.iterations,
        converged: r.converged,
        seed,
        method: r.method,
    })
}

/// Rayleigh quotient `form(u)/‖u‖²`.
pub fn rayleigh(op: &FracOperator, u: &GridFunction) -> Result<f64> {
    let n2 = u.norm_sq();
    if n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(op.form(u)? / n2)
}
