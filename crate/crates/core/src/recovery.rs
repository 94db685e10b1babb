//! Signal recovery from quadratic measurements by multi-start damped
//! Gauss-Newton (Levenberg damping with a strict-decrease acceptance rule).
//!
//! The solver works in real coordinates: `y` itself for real ensembles and
//! `(Re y; Im y)` for complex ones. Residuals are `y* A_j y - b_j`, whose
//! Jacobian is the transpose of [`crate::measurement::jacobian`].

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::ensembles::{random_ensemble, Ensemble, FieldTag, RandomKind};
use crate::error::{param, Result};
use crate::linalg::{self, CVector};
use crate::measurement::{self, check_signal, phase_distance, MeasurementVector};
use crate::rng::{self, domain};

/// Relative residual below which a candidate counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Recovery counts as a success when the phase error is below this.
pub const SUCCESS_PHASE_ERROR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub residual_tol: f64,
    pub step_floor: f64,
    /// Extra Gauss-Newton steps taken after reaching `residual_tol`.
    pub polish_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iters: 200, residual_tol: CONVERGENCE_TOL, step_floor: 1e-14, polish_iters: 3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalSolve {
    pub y: CVector,
    /// `||M(y) - b|| / max(1, ||b||)`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryResult {
    #[serde(serialize_with = "crate::io::serialize_complex_vector")]
    pub candidate: CVector,
    pub residual: f64,
    pub restarts_used: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_error: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoverOptions {
    pub restarts: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        RecoverOptions { restarts: 20, seed: 0, solver: SolverOptions::default() }
    }
}

fn to_coords(field: FieldTag, y: &CVector) -> DVector<f64> {
    match field {
        FieldTag::Real => linalg::real_part(y),
        FieldTag::Complex => linalg::realify(y),
    }
}

fn from_coords(field: FieldTag, u: &DVector<f64>) -> CVector {
    match field {
        FieldTag::Real => linalg::real_to_complex(u),
        FieldTag::Complex => linalg::complexify(u),
    }
}

fn residuals(e: &Ensemble, y: &CVector, b: &[f64]) -> DVector<f64> {
    let m = measurement::measure_values(e, y);
    DVector::from_iterator(b.len(), m.iter().zip(b).map(|(p, q)| p - q))
}

/// `sum_j (y* A_j y - b_j)^2` and its gradient in real coordinates,
/// `4 sum_j r_j A_j y` (real) or `4 sum_j r_j F_j (Re y; Im y)` (complex).
pub fn residual_objective(e: &Ensemble, y: &CVector, b: &MeasurementVector) -> Result<(f64, DVector<f64>)> {
    check_signal(e.field(), e.dim(), y)?;
    if b.len() != e.len() {
        return param(format!("{} measurements given for {} matrices", b.len(), e.len()));
    }
    let r = residuals(e, y, b.values());
    let jac_t = measurement::jacobian_matrix(e, y);
    Ok((r.norm_squared(), jac_t * &r * 2.0))
}

/// Damped Gauss-Newton from `y0`.
pub fn local_solve(e: &Ensemble, b: &[f64], y0: &CVector, opts: &SolverOptions) -> LocalSolve {
    let field = e.field();
    let scale = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let mut u = to_coords(field, y0);
    let n = u.len();
    let mut y = from_coords(field, &u);
    let mut r = residuals(e, &y, b);
    let mut cost = r.norm_squared();
    let mut lambda = -1.0;
    let mut polished = 0;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if r.norm() / scale < opts.residual_tol {
            if polished >= opts.polish_iters {
                break;
            }
            polished += 1;
        }
        iterations += 1;
        let jac = measurement::jacobian_matrix(e, &y).transpose();
        let grad = jac.transpose() * &r;
        let normal = jac.transpose() * &jac;
        if lambda < 0.0 {
            let max_diag = normal.diagonal().iter().cloned().fold(0.0, f64::max);
            lambda = 1e-3 * max_diag.max(1e-12);
        }
        let mut accepted = None;
        for _ in 0..40 {
            let damped = &normal + DMatrix::<f64>::identity(n, n) * lambda;
            let step = match damped.cholesky() {
                Some(ch) => -ch.solve(&grad),
                None => {
                    lambda *= 4.0;
                    continue;
                }
            };
            let u_new = &u + &step;
            let y_new = from_coords(field, &u_new);
            let r_new = residuals(e, &y_new, b);
            let cost_new = r_new.norm_squared();
            if cost_new < cost {
                lambda = (lambda / 3.0).max(1e-300);
                accepted = Some((u_new, y_new, r_new, cost_new, step.norm()));
                break;
            }
            lambda *= 4.0;
            if !lambda.is_finite() {
                break;
            }
        }
        match accepted {
            Some((u_new, y_new, r_new, cost_new, step_norm)) => {
                u = u_new;
                y = y_new;
                r = r_new;
                cost = cost_new;
                if step_norm < opts.step_floor * (1.0 + u.norm()) {
                    break;
                }
            }
            None => break,
        }
    }
    LocalSolve { y, residual: r.norm() / scale, iterations }
}

/// Random starting point whose squared norm matches the measurement energy:
/// `d sum_j b_j / sum_j tr(A_j)` when that is positive, otherwise a
/// second-moment estimate, otherwise 1.
pub fn initial_point(e: &Ensemble, b: &[f64], rng: &mut rng::Rng) -> CVector {
    let d = e.dim() as f64;
    let trace: f64 = e.matrices().iter().map(|a| a.trace()).sum();
    let total: f64 = b.iter().sum();
    let mut energy = if trace > 0.0 { d * total / trace } else { -1.0 };
    if !(energy.is_finite() && energy > 0.0) {
        // E[(x*Ax)^2] ~ ||x||^4 (tr(A)^2 + 2||A||_F^2) / d^2 for a random direction.
        let second: f64 = e.matrices().iter().map(|a| a.trace().powi(2) + 2.0 * a.frobenius_norm().powi(2)).sum();
        let b2: f64 = b.iter().map(|v| v * v).sum();
        energy = if second > 0.0 { d * (b2 / second).sqrt() } else { 1.0 };
    }
    if !(energy.is_finite() && energy > 0.0) {
        energy = 1.0;
    }
    let g = rng::gaussian_vector(rng, e.field(), e.dim());
    let norm = g.norm();
    if norm == 0.0 {
        return g;
    }
    g * linalg::c(energy.sqrt() / norm, 0.0)
}

/// Multi-start recovery. Restarts run in order and stop at the first converged
/// candidate; otherwise the lowest residual wins, ties going to the earlier restart.
pub fn recover(
    e: &Ensemble,
    b: &MeasurementVector,
    opts: &RecoverOptions,
    truth: Option<&CVector>,
) -> Result<RecoveryResult> {
    if b.len() != e.len() {
        return param(format!("{} measurements given for {} matrices", b.len(), e.len()));
    }
    if b.values().iter().any(|v| !v.is_finite()) {
        return param("measurements must be finite");
    }
    if opts.restarts == 0 {
        return param("restarts must be at least 1");
    }
    if let Some(t) = truth {
        check_signal(e.field(), e.dim(), t)?;
    }
    let finish = |candidate: CVector, restarts_used: usize| {
        let b_norm = b.norm();
        let m = measurement::measure_values(e, &candidate);
        let residual =
            m.iter().zip(b.values()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt() / b_norm.max(1.0);
        RecoveryResult {
            phase_error: truth.map(|t| phase_distance(&candidate, t, e.field())),
            converged: residual < opts.solver.residual_tol,
            candidate,
            residual,
            restarts_used,
        }
    };
    if b.values().iter().all(|v| *v == 0.0) {
        return Ok(finish(CVector::zeros(e.dim()), 0));
    }
    let mut best: Option<LocalSolve> = None;
    let mut used = 0;
    for k in 0..opts.restarts {
        used = k + 1;
        let mut rng = rng::substream(opts.seed, domain::RECOVERY, k as u64);
        let y0 = initial_point(e, b.values(), &mut rng);
        let sol = local_solve(e, b.values(), &y0, &opts.solver);
        let done = sol.residual < opts.solver.residual_tol;
        if best.as_ref().is_none_or(|cur| sol.residual < cur.residual) {
            best = Some(sol);
        }
        if done {
            break;
        }
    }
    let best = best.expect("at least one restart");
    Ok(finish(best.y, used))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub field: FieldTag,
    pub d: usize,
    pub n_values: Vec<usize>,
    pub kind: RandomKind,
    /// Rank of every matrix; defaults to `d` (general) or 1 (projection).
    pub rank: Option<usize>,
    pub trials: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(field: FieldTag, d: usize, n_values: Vec<usize>, kind: RandomKind, trials: usize, seed: u64) -> Self {
        SweepConfig { field, d, n_values, kind, rank: None, trials, restarts: 20, max_iters: 200, seed }
    }

    fn member_rank(&self) -> usize {
        self.rank.unwrap_or(match self.kind {
            RandomKind::General => self.d,
            RandomKind::Projection => 1,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub field: FieldTag,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub kind: String,
    pub trials: usize,
    pub success_rate: f64,
    pub seed: u64,
}

pub const SWEEP_CSV_HEADER: &str = "field,d,N,kind,trials,success_rate,seed";

/// One recovery trial of a sweep: a fresh ensemble and signal per `(N, trial)`.
pub fn sweep_trial(cfg: &SweepConfig, n: usize, trial: usize) -> Result<RecoveryResult> {
    let index = ((n as u64) << 32) | trial as u64;
    let ens_seed = rng::child_seed(cfg.seed, domain::SWEEP, index);
    let e = random_ensemble(cfg.field, cfg.d, n, &vec![cfg.member_rank(); n], cfg.kind, ens_seed)?;
    let mut sig = rng::substream(cfg.seed, domain::SIGNAL, index);
    let x = rng::gaussian_vector(&mut sig, cfg.field, cfg.d);
    let b = measurement::measure(&e, &x)?;
    let opts = RecoverOptions {
        restarts: cfg.restarts,
        seed: rng::child_seed(cfg.seed, domain::RECOVERY, index),
        solver: SolverOptions { max_iters: cfg.max_iters, ..SolverOptions::default() },
    };
    recover(&e, &b, &opts, Some(&x))
}

/// Recovery success rate per `N`. Trials fan out over the current rayon pool;
/// the table does not depend on the number of workers.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.d == 0 || cfg.n_values.is_empty() {
        return param("sweep needs d >= 1 and a nonempty range of N");
    }
    if cfg.restarts == 0 {
        return param("restarts must be at least 1");
    }
    let rank = cfg.member_rank();
    if rank == 0 || rank > cfg.d {
        return param(format!("rank {rank} outside [1, {}]", cfg.d));
    }
    if cfg.trials == 0 {
        return Ok(Vec::new());
    }
    let mut rows = Vec::with_capacity(cfg.n_values.len());
    for &n in &cfg.n_values {
        if n == 0 {
            return param("N must be positive");
        }
        let outcomes = (0..cfg.trials)
            .into_par_iter()
            .map(|t| sweep_trial(cfg, n, t).map(|r| r.phase_error.is_some_and(|p| p < SUCCESS_PHASE_ERROR)))
            .collect::<Result<Vec<bool>>>()?;
        let successes = outcomes.iter().filter(|&&ok| ok).count();
        rows.push(SweepRow {
            field: cfg.field,
            d: cfg.d,
            n,
            kind: cfg.kind.as_str().to_string(),
            trials: cfg.trials,
            success_rate: successes as f64 / cfg.trials as f64,
            seed: cfg.seed,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", r.field, r.d, r.n, r.kind, r.trials, r.success_rate, r.seed);
    }
    out
}
