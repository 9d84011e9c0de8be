//! Preconditioned conjugate gradients and Lanczos-based condition estimates.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asp::LinearOperator;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// ||r_j|| / ||r_0|| after each iteration
    pub residual_history: Vec<f64>,
    /// sqrt(r_j . B r_j) / sqrt(r_0 . B r_0)
    pub preconditioned_history: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub setup_ms: f64,
    pub solve_ms: f64,
}

impl SolveReport {
    pub fn final_relative_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Extreme eigenvalues of the CG Lanczos tridiagonal.
pub fn lanczos_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let m = alphas.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut t = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < m {
            let o = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = o;
            t[(j + 1, j)] = o;
        }
    }
    let ev = t.symmetric_eigen().eigenvalues;
    (ev.min(), ev.max())
}

/// Solve A x = b with preconditioner B from x0 = 0; stops when ||r||/||r0|| <= tol.
pub fn pcg(
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    rhs: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    if rhs.len() != n || b.dim() != n {
        return Err(Error::DimensionMismatch(format!("operator {n}, preconditioner {}, rhs {}", b.dim(), rhs.len())));
    }
    let start = Instant::now();
    let mut rep = SolveReport { lambda_min: f64::NAN, lambda_max: f64::NAN, kappa: f64::NAN, ..Default::default() };
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let r0 = dot(&r, &r).sqrt();
    if r0 == 0.0 {
        rep.converged = true;
        rep.kappa = 1.0;
        return Ok((x, rep));
    }
    let mut z = vec![0.0; n];
    b.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    for it in 0..maxit {
        a.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !pq.is_finite() || pq <= 0.0 || !rz.is_finite() || rz <= 0.0 {
            return Err(Error::NotSpd(format!("breakdown in PCG at iteration {it}: p.Ap = {pq}, r.Br = {rz}")));
        }
        let alpha = rz / pq;
        alphas.push(alpha);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rel = dot(&r, &r).sqrt() / r0;
        rep.residual_history.push(rel);
        rep.iterations = it + 1;
        b.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        rep.preconditioned_history.push((rz_new.max(0.0) / rz0).sqrt());
        if rel <= tol {
            rep.converged = true;
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let (lmin, lmax) = lanczos_extremes(&alphas, &betas);
    rep.lambda_min = lmin;
    rep.lambda_max = lmax;
    rep.kappa = lmax / lmin;
    rep.solve_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((x, rep))
}

/// Exact condition number of B A from dense matrices (A SPD, B symmetric).
pub fn dense_condition(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let (lmin, lmax) = dense_extremes(a, b)?;
    if lmin <= 0.0 {
        return Err(Error::NotSpd(format!("preconditioned operator has eigenvalue {lmin}")));
    }
    Ok(lmax / lmin)
}

/// Extreme eigenvalues of B A via L^T B L with A = L L^T.
pub fn dense_extremes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, f64)> {
    let l = a.clone().cholesky().ok_or_else(|| Error::NotSpd("operator is not SPD".into()))?.l();
    let m = l.transpose() * b * &l;
    let m = (&m + m.transpose()) * 0.5;
    let ev = m.symmetric_eigen().eigenvalues;
    Ok((ev.min(), ev.max()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionMode {
    /// Ritz values from PCG on seeded random right-hand sides
    Iterative { probes: usize, seed: u64 },
    /// materialized operators, dimension at most 2000
    Dense,
}

pub fn estimate_condition(a: &dyn LinearOperator, b: &dyn LinearOperator, mode: ConditionMode) -> Result<f64> {
    let n = a.dim();
    match mode {
        ConditionMode::Dense => {
            if n > 2000 {
                return Err(Error::SizeCap(format!("dense condition estimate on {n} DOFs")));
            }
            dense_condition(&crate::asp::materialize(a), &crate::asp::materialize(b))
        }
        ConditionMode::Iterative { probes, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut lmin = f64::INFINITY;
            let mut lmax: f64 = 0.0;
            for _ in 0..probes.max(1) {
                let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (_, rep) = pcg(a, b, &rhs, 1e-14, n.min(1000))?;
                lmin = lmin.min(rep.lambda_min);
                lmax = lmax.max(rep.lambda_max);
            }
            Ok(lmax / lmin)
        }
    }
}
