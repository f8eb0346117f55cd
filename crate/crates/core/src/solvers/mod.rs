//! Square-root Lasso and Square-root Slope fits.
//!
//! Both estimators minimize `‖Y − Xβ‖_n + pen(β)`. Since
//! `‖r‖_n = min_{σ>0} (σ/2 + ‖r‖_n²/(2σ))`, with the minimum at `σ = ‖r‖_n`,
//! the fit is the β-part of the joint minimization of
//! `σ/2 + ‖Y − Xβ‖_n²/(2σ) + pen(β)`. The solver alternates:
//!
//! 1. at fixed `σ`, solve `(1/(2σ))‖Y − Xβ‖_n² + pen(β)` (a Lasso or Slope
//!    problem with penalty scaled by `σ`),
//! 2. set `σ = ‖Y − Xβ‖_n`.
//!
//! When the active set is stable, step 2 is an affine map in `σ²`, so three
//! consecutive values determine its fixed point. The loop uses that
//! extrapolation whenever it lowers the objective, which removes the slow
//! linear tail the plain alternation has for large tuning constants.

mod apg;

use ndarray::{Array1, ArrayView1};

use crate::error::{invalid, Error, Result};
use crate::model::{empirical_norm_unchecked, RegressionData};
use crate::penalties::{LambdaSequence, Penalty};

use apg::{solve_fixed_scale, WorkingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPolicy {
    /// Step `1/L` with `L` the top eigenvalue of the working-set Gram block
    /// divided by the scale.
    Fixed,
    Backtracking,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Relative change of `σ̂` between outer iterations.
    pub objective_tol: f64,
    /// Absolute bound on [`kkt_residual`] at exit.
    pub kkt_tol: f64,
    /// Residuals with `‖r‖_n` below this are treated as interpolation.
    pub sigma_floor: f64,
    pub step_policy: StepPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer_iters: 200,
            max_inner_iters: 20_000,
            objective_tol: 1e-10,
            kkt_tol: 1e-8,
            sigma_floor: 1e-10,
            step_policy: StepPolicy::Backtracking,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters < 1 || self.max_inner_iters < 1 {
            return Err(invalid("iteration caps must be >= 1"));
        }
        if !(self.objective_tol > 0.0 && self.kkt_tol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(invalid("sigma_floor must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: Array1<f64>,
    /// `‖Y − Xβ̂‖_n`.
    pub sigma_hat: f64,
    /// `‖Y − Xβ̂‖_n + pen(β̂)`.
    pub objective: f64,
    pub outer_iters: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    /// The residual vanished (interpolation or `Y = 0`), or the scale
    /// iterates were shrinking geometrically towards zero. The loss is not
    /// differentiable at a zero residual and no certificate is available.
    pub degenerate: bool,
    /// Values of the joint objective `σ/2 + ‖Y − Xβ‖_n²/(2σ) + pen(β)` after
    /// every half-step of the alternation.
    pub objective_trace: Vec<f64>,
}

/// `‖Y − Xβ‖_n + λ|β|_1` minimized by the alternating scheme.
pub fn fit_sqrt_lasso(data: &RegressionData, lambda: f64, cfg: &SolverConfig) -> Result<FitResult> {
    fit(data, &Penalty::l1(lambda)?, cfg)
}

/// `‖Y − Xβ‖_n + |β|_*` minimized by the alternating scheme.
pub fn fit_sqrt_slope(data: &RegressionData, lambdas: &LambdaSequence, cfg: &SolverConfig) -> Result<FitResult> {
    fit(data, &Penalty::Sorted(lambdas.clone()), cfg)
}

fn check_inputs(data: &RegressionData, pen: &Penalty, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    pen.check_dim(data.p())?;
    let (max, ok) = crate::model::check_normalization(data.design());
    if !ok {
        return Err(Error::NotNormalized(max));
    }
    Ok(())
}

/// Minimizer of `(1/(2·scale))‖Y − Xβ‖_n² + |β|_*`.
pub fn fit_slope_fixed_scale(
    data: &RegressionData,
    lambdas: &LambdaSequence,
    scale: f64,
    cfg: &SolverConfig,
) -> Result<Array1<f64>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("scale must be positive, got {scale}")));
    }
    let pen = Penalty::Sorted(lambdas.clone());
    check_inputs(data, &pen, cfg)?;
    let p = data.p();
    let mut ws = WorkingSet::new(p);
    let mut lip = 1.0 / scale;
    let sol = solve_fixed_scale(
        data,
        &pen,
        scale,
        &vec![0.0; p],
        &mut ws,
        &mut lip,
        cfg.step_policy,
        cfg.kkt_tol,
        cfg.max_inner_iters,
    )?;
    Ok(Array1::from(sol.beta))
}

/// Distance of the normalized correlation `g = Xᵀr/(√n·|r|₂)` from the
/// subdifferential of the penalty at `beta`; zero iff `beta` minimizes
/// `‖Y − Xβ‖_n + pen(β)`.
pub fn kkt_residual(data: &RegressionData, beta: ArrayView1<f64>, penalty: &Penalty) -> Result<f64> {
    penalty.check_dim(data.p())?;
    let r = crate::model::residual(data, beta)?;
    let norm = empirical_norm_unchecked(r.view());
    if norm == 0.0 {
        return Err(Error::DegenerateResidual);
    }
    let scale = data.n() as f64 * norm;
    let g: Vec<f64> = data.design().tmul(r.view()).iter().map(|v| v / scale).collect();
    Ok(penalty.kkt(&g, &beta.to_vec()))
}

/// Population standard deviation.
fn std_dev(y: ArrayView1<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

struct Iterate {
    beta: Vec<f64>,
    sigma: f64,
    objective: f64,
    kkt: f64,
}

impl Iterate {
    fn into_result(self, outer: usize, converged: bool, degenerate: bool, trace: Vec<f64>) -> FitResult {
        FitResult {
            beta_hat: Array1::from(self.beta),
            sigma_hat: self.sigma,
            objective: self.objective,
            outer_iters: outer,
            kkt_residual: self.kkt,
            converged,
            degenerate,
            objective_trace: trace,
        }
    }
}

pub(crate) fn fit(data: &RegressionData, pen: &Penalty, cfg: &SolverConfig) -> Result<FitResult> {
    check_inputs(data, pen, cfg)?;
    let p = data.p();
    let n = data.n() as f64;
    let y = data.response();
    let y_norm = empirical_norm_unchecked(y);

    if y_norm < cfg.sigma_floor {
        let zero = Iterate {
            beta: vec![0.0; p],
            sigma: y_norm,
            objective: y_norm,
            kkt: 0.0,
        };
        return Ok(zero.into_result(0, false, true, vec![]));
    }

    let kkt_of = |corr: &[f64], beta: &[f64], sigma: f64| {
        let g: Vec<f64> = corr.iter().map(|c| c / sigma).collect();
        pen.kkt(&g, beta)
    };
    let resid_norm = |beta: &[f64]| {
        let r = &y - &data.design().mul(ArrayView1::from(beta));
        empirical_norm_unchecked(r.view())
    };
    let joint = |beta: &[f64], resid_norm: f64, sigma: f64| {
        sigma / 2.0 + resid_norm * resid_norm / (2.0 * sigma) + pen.value(beta)
    };

    let corr0: Vec<f64> = data.design().tmul(y).iter().map(|v| v / n).collect();
    let mut cur = Iterate {
        beta: vec![0.0; p],
        sigma: y_norm,
        objective: y_norm,
        kkt: kkt_of(&corr0, &vec![0.0; p], y_norm),
    };
    if cur.kkt <= cfg.kkt_tol {
        return Ok(cur.into_result(0, true, false, vec![y_norm]));
    }

    let sd = std_dev(y);
    let mut sigma = if sd > 0.0 { sd } else { y_norm };
    // The fixed-scale subproblem is solved well below the outer tolerance so
    // that its error does not dominate the certificate.
    let inner_tol = 0.05 * cfg.kkt_tol;
    let mut ws = WorkingSet::new(p);
    let mut lip = 1.0 / sigma;
    let mut trace = vec![joint(&cur.beta, y_norm, sigma)];
    // σ² values from consecutive plain alternation steps.
    let mut history = vec![sigma * sigma];
    let mut vanishing = 0;

    for outer in 1..=cfg.max_outer_iters {
        let sol = solve_fixed_scale(
            data,
            pen,
            sigma,
            &cur.beta,
            &mut ws,
            &mut lip,
            cfg.step_policy,
            inner_tol,
            cfg.max_inner_iters,
        )?;
        let rn = resid_norm(&sol.beta);
        trace.push(joint(&sol.beta, rn, sigma));
        let objective = rn + pen.value(&sol.beta);
        trace.push(objective);
        if rn < cfg.sigma_floor {
            let last = Iterate {
                beta: sol.beta,
                sigma: rn,
                objective,
                kkt: 0.0,
            };
            return Ok(last.into_result(outer, false, true, trace));
        }
        let rel = (rn - sigma).abs() / rn;
        cur = Iterate {
            kkt: kkt_of(&sol.corr, &sol.beta, rn),
            beta: sol.beta,
            sigma: rn,
            objective,
        };
        sigma = rn;
        if rel <= cfg.objective_tol && cur.kkt <= cfg.kkt_tol {
            return Ok(cur.into_result(outer, true, false, trace));
        }
        history.push(sigma * sigma);
        if history.len() < 3 {
            continue;
        }

        // Aitken extrapolation of the σ² sequence.
        let (x0, x1, x2) = (history[0], history[1], history[2]);
        history.clear();
        let (d1, d2) = (x1 - x0, x2 - x1);
        let ratio = d2 / d1;
        if d1 != 0.0 && ratio > 0.0 && ratio < 1.0 {
            let limit = x2 + d2 * ratio / (1.0 - ratio);
            // A σ² sequence shrinking geometrically towards 0 means the
            // minimizer interpolates; the alternation would only creep
            // towards it.
            if limit <= 1e-6 * x2 {
                vanishing += 1;
                if vanishing >= 2 {
                    return Ok(cur.into_result(outer, false, true, trace));
                }
                history.push(sigma * sigma);
                continue;
            }
            vanishing = 0;
            let sigma_e = limit.sqrt();
            let sol = solve_fixed_scale(
                data,
                pen,
                sigma_e,
                &cur.beta,
                &mut ws,
                &mut lip,
                cfg.step_policy,
                inner_tol,
                cfg.max_inner_iters,
            )?;
            let rn = resid_norm(&sol.beta);
            let objective = rn + pen.value(&sol.beta);
            if rn >= cfg.sigma_floor && objective <= cur.objective {
                trace.push(objective);
                let rel = (rn - sigma_e).abs() / rn;
                cur = Iterate {
                    kkt: kkt_of(&sol.corr, &sol.beta, rn),
                    beta: sol.beta,
                    sigma: rn,
                    objective,
                };
                sigma = rn;
                if rel <= cfg.objective_tol && cur.kkt <= cfg.kkt_tol {
                    return Ok(cur.into_result(outer, true, false, trace));
                }
            }
        }
        history.push(sigma * sigma);
    }
    Ok(cur.into_result(cfg.max_outer_iters, false, false, trace))
}

#[cfg(test)]
mod tests;
