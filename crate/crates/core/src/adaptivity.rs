//! Adaptation to unknown sparsity by aggregating fits over dyadic levels.
//!
//! For `s_*` in `{2, …, p/e}` let `M = ⌊log₂ s_*⌋`. The estimator is fitted
//! at `s = 2, 4, …, 2^{M+1}`; the top fit supplies the noise estimate
//! `σ̂ = ‖Y − Xβ̂_(2^{M+1})‖_n`. Level `m ≤ M` is accepted when every later
//! consecutive pair of fits is close:
//!
//! ```text
//! d(β̂_(2^{k−1}), β̂_(2^k)) ≤ 4·σ̂·C₀·w(2^k)   for k = m+1, …, M+1,
//! ```
//!
//! and the smallest accepted level is returned (or `M` when none is).
//! Neither `σ` nor `s` enter the procedure.

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{empirical_norm_unchecked, DesignMatrix, RegressionData};
use crate::penalties::sqrt_lasso_lambda;
use crate::solvers::{fit_sqrt_lasso, FitResult, SolverConfig};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Shape of the threshold function `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// `w(b) = sqrt((b/n)·log(p/b))`.
    Prediction,
    /// `w(b) = b^{1/q}·sqrt(log(2p/b)/n)`, `q ∈ [1, 2]`.
    Lq(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFunction {
    kind: WeightKind,
    n: usize,
    p: usize,
}

fn check_q(q: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&q) {
        return Err(invalid(format!("q must lie in [1, 2], got {q}")));
    }
    Ok(())
}

impl WeightFunction {
    pub fn new(kind: WeightKind, n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(invalid("n and p must be positive"));
        }
        if let WeightKind::Lq(q) = kind {
            check_q(q)?;
        }
        Ok(WeightFunction { kind, n, p })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    /// The exponent in `b^{1/q}`; the prediction weight behaves like `q = 2`.
    pub fn q(&self) -> f64 {
        match self.kind {
            WeightKind::Prediction => 2.0,
            WeightKind::Lq(q) => q,
        }
    }

    /// `w(b)`. Defined for `1 ≤ b < p` (prediction) or `1 ≤ b < 2p` (ℓ_q),
    /// where the logarithm is positive.
    pub fn eval(&self, b: usize) -> Result<f64> {
        let (n, p, bf) = (self.n as f64, self.p as f64, b as f64);
        match self.kind {
            WeightKind::Prediction => {
                if b < 1 || b >= self.p {
                    return Err(invalid(format!("b = {b} outside [1, {})", self.p)));
                }
                Ok((bf / n * (p / bf).ln()).sqrt())
            }
            WeightKind::Lq(q) => {
                if b < 1 || b >= 2 * self.p {
                    return Err(invalid(format!("b = {b} outside [1, {})", 2 * self.p)));
                }
                Ok(bf.powf(1.0 / q) * ((2.0 * p / bf).ln() / n).sqrt())
            }
        }
    }

    /// The three structural properties the aggregation needs, checked on
    /// `[1, s_star]`.
    pub fn check_assumptions(&self, s_star: usize) -> Result<WeightChecks> {
        if s_star < 2 || 2 * s_star >= self.p {
            return Err(invalid(format!("s_star = {s_star} must satisfy 2 <= s_star < p/2")));
        }
        let q = self.q();
        let values = (1..=2 * s_star).map(|b| self.eval(b)).collect::<Result<Vec<_>>>()?;
        let w = |b: usize| values[b - 1];
        let increasing = (1..s_star).all(|b| w(b) < w(b + 1));
        let c_prime = sum_constant(q);
        let big_m = floor_log2(s_star);
        let mut sum = 0.0;
        let mut sum_bound = true;
        for m in 1..=big_m {
            sum += w(1 << m);
            sum_bound &= sum <= c_prime * w(1 << m);
        }
        let c_second = 2f64.powf(1.0 / q);
        let doubling = (1..=s_star).all(|b| w(2 * b) <= c_second * w(b) * (1.0 + 1e-12));
        Ok(WeightChecks {
            increasing,
            sum_bound,
            doubling,
        })
    }
}

/// Outcome of [`WeightFunction::check_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightChecks {
    /// `w` strictly increasing on `{1, …, s_*}`.
    pub increasing: bool,
    /// `Σ_{k≤m} w(2^k) ≤ C′·w(2^m)` for `m = 1, …, M`.
    pub sum_bound: bool,
    /// `w(2b) ≤ 2^{1/q}·w(b)` for `b = 1, …, s_*`.
    pub doubling: bool,
}

impl WeightChecks {
    pub fn all(&self) -> bool {
        self.increasing && self.sum_bound && self.doubling
    }
}

/// `C′ = 1/(1 − 2^{−1/q}) + 4·sqrt(log 2)/(1 − 2^{−1/(2q)})`.
pub fn sum_constant(q: f64) -> f64 {
    1.0 / (1.0 - 2f64.powf(-1.0 / q)) + 4.0 * 2f64.ln().sqrt() / (1.0 - 2f64.powf(-1.0 / (2.0 * q)))
}

fn floor_log2(x: usize) -> usize {
    (usize::BITS - 1 - x.leading_zeros()) as usize
}

/// Distance used to compare consecutive fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    /// `‖X(β − β′)‖_n`.
    Prediction,
    /// `|β − β′|_q`, `q ∈ [1, 2]`.
    Lq(f64),
}

impl Distance {
    pub fn eval(&self, x: &DesignMatrix, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        let diff = &a - &b;
        match self {
            Distance::Prediction => empirical_norm_unchecked(x.mul(diff.view()).view()),
            Distance::Lq(q) => lq_norm(diff.view(), *q),
        }
    }

    /// The weight shape paired with this distance.
    pub fn paired_weight(&self) -> WeightKind {
        match self {
            Distance::Prediction => WeightKind::Prediction,
            Distance::Lq(q) => WeightKind::Lq(*q),
        }
    }
}

pub(crate) fn lq_norm(v: ArrayView1<f64>, q: f64) -> f64 {
    if q == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if q == 2.0 {
        v.dot(&v).sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    pub s_star: usize,
    pub c0: f64,
    pub distance: Distance,
    /// Must be the shape paired with `distance`.
    pub weight: WeightKind,
}

impl AdaptationConfig {
    /// Config with the weight paired to `distance`.
    pub fn new(s_star: usize, c0: f64, distance: Distance) -> Self {
        AdaptationConfig {
            s_star,
            c0,
            distance,
            weight: distance.paired_weight(),
        }
    }

    /// `M = ⌊log₂ s_*⌋`.
    pub fn big_m(&self) -> usize {
        floor_log2(self.s_star.max(1))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.s_star < 2 || self.s_star as f64 > p as f64 / std::f64::consts::E {
            return Err(invalid(format!(
                "s_star = {} must lie in [2, p/e] = [2, {:.3}]",
                self.s_star,
                p as f64 / std::f64::consts::E
            )));
        }
        if !(self.c0 >= 0.0 && self.c0.is_finite()) {
            return Err(invalid(format!("c0 must be finite and >= 0, got {}", self.c0)));
        }
        if let Distance::Lq(q) = self.distance {
            check_q(q)?;
        }
        if self.weight != self.distance.paired_weight() {
            return Err(invalid(format!(
                "weight {:?} does not match distance {:?}",
                self.weight, self.distance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationResult {
    pub beta_tilde: Array1<f64>,
    /// `2^{m̃}`.
    pub s_tilde: usize,
    pub m_tilde: usize,
    pub big_m: usize,
    /// `‖Y − Xβ̂_(2^{M+1})‖_n`.
    pub sigma_hat: f64,
    /// Fits at `2^1, …, 2^{M+1}`; entry `m − 1` is level `2^m`.
    pub per_level_fits: Vec<FitResult>,
    /// `d(β̂_(2^{k−1}), β̂_(2^k))` for `k = 2, …, M+1`.
    pub distances: Vec<f64>,
    /// `4·σ̂·C₀·w(2^k)` for `k = 2, …, M+1`.
    pub thresholds: Vec<f64>,
    /// Accepted levels `m`.
    pub selection_set: Vec<usize>,
    pub selection_set_nonempty: bool,
}

/// Runs the aggregation with `fitter(s)` producing the fit at level `s`.
/// Levels are fitted concurrently; the result does not depend on the order.
pub fn lepski_aggregate<F>(data: &RegressionData, cfg: &AdaptationConfig, fitter: F) -> Result<AdaptationResult>
where
    F: Fn(usize) -> Result<FitResult> + Sync,
{
    cfg.validate(data.p())?;
    let levels: Vec<usize> = (1..=cfg.big_m() + 1).map(|m| 1usize << m).collect();
    let fits = levels
        .par_iter()
        .map(|&s| {
            fitter(s).map_err(|e| Error::Level {
                level: s,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate_fits(data.design(), cfg, fits)
}

/// The selection step on precomputed fits at `2^1, …, 2^{M+1}`.
pub fn aggregate_fits(x: &DesignMatrix, cfg: &AdaptationConfig, fits: Vec<FitResult>) -> Result<AdaptationResult> {
    cfg.validate(x.p())?;
    let big_m = cfg.big_m();
    if fits.len() != big_m + 1 {
        return Err(invalid(format!(
            "expected {} level fits, got {}",
            big_m + 1,
            fits.len()
        )));
    }
    let w = WeightFunction::new(cfg.weight, x.n(), x.p())?;
    let sigma_hat = fits[big_m].sigma_hat;

    // Index i ↔ k = i + 2, comparing levels 2^{k−1} and 2^k.
    let distances: Vec<f64> = (2..=big_m + 1)
        .map(|k| {
            cfg.distance
                .eval(x, fits[k - 2].beta_hat.view(), fits[k - 1].beta_hat.view())
        })
        .collect();
    let thresholds = (2..=big_m + 1)
        .map(|k| Ok(4.0 * sigma_hat * cfg.c0 * w.eval(1 << k)?))
        .collect::<Result<Vec<f64>>>()?;
    let ok: Vec<bool> = distances.iter().zip(&thresholds).map(|(d, t)| d <= t).collect();

    // m is accepted iff every pair k > m passes: a suffix condition.
    let mut selection_set = Vec::new();
    let mut suffix_ok = true;
    for m in (1..=big_m).rev() {
        suffix_ok &= ok[m - 1];
        if suffix_ok {
            selection_set.push(m);
        }
    }
    selection_set.reverse();
    let nonempty = !selection_set.is_empty();
    let m_tilde = selection_set.first().copied().unwrap_or(big_m);
    Ok(AdaptationResult {
        beta_tilde: fits[m_tilde - 1].beta_hat.clone(),
        s_tilde: 1 << m_tilde,
        m_tilde,
        big_m,
        sigma_hat,
        per_level_fits: fits,
        distances,
        thresholds,
        selection_set,
        selection_set_nonempty: nonempty,
    })
}

/// Level `s ↦` Square-root Lasso fit with `λ = γ·sqrt(log(2p/s)/n)`.
pub fn sqrt_lasso_level_fitter<'a>(
    data: &'a RegressionData,
    gamma: f64,
    cfg: &'a SolverConfig,
) -> impl Fn(usize) -> Result<FitResult> + Sync + 'a {
    move |s| {
        let lambda = sqrt_lasso_lambda(data.n(), data.p(), s, gamma)?;
        fit_sqrt_lasso(data, lambda, cfg)
    }
}

/// `γ̃` with `λ_(s,γ) = λ_(2s,γ̃)`, i.e. `γ·sqrt(log(2p/s)/log(p/s))`.
pub fn doubled_level_gamma(p: usize, s: usize, gamma: f64) -> Result<f64> {
    if s < 1 || 2 * s > p {
        return Err(invalid(format!("need 1 <= s <= p/2, got s = {s}, p = {p}")));
    }
    let (p, s) = (p as f64, s as f64);
    Ok(gamma * ((2.0 * p / s).ln() / (p / s).ln()).sqrt())
}

/// Proof constants of the oracle inequalities for a given `γ` and
/// restricted-eigenvalue constant `κ`.
///
/// `c1p` and `c2p` are evaluated at the same multiplier, so pass `γ′` when
/// the Slope bounds are wanted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    pub gamma: f64,
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c1p: f64,
    pub c2p: f64,
    pub alpha: f64,
}

impl RateConstants {
    pub fn new(gamma: f64, kappa: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("gamma must be positive, got {gamma}")));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(invalid(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        let c2 = c2_of(gamma);
        Ok(RateConstants {
            gamma,
            kappa,
            c1: (88.0 + 22.0 * SQRT_2 + 32.0 * gamma) / 3.0,
            c2,
            c3: (704.0 + 176.0 * SQRT_2 + 256.0 * gamma) / 9.0,
            c4: c2,
            c1p: 64.0 + 16.0 * SQRT_2 + 34.0 * gamma,
            c2p: 16.0 + 4.0 * SQRT_2 + 4.0 * gamma,
            alpha: 2.0 + 3.0 * SQRT_2 * c2 / (16.0 * kappa * gamma),
        })
    }
}

fn c2_of(gamma: f64) -> f64 {
    8.0 + 2.0 * SQRT_2 + 4.0 * gamma
}

/// `C₀ = max(C₂(γ), C₂(γ̃))/κ²` with `γ̃` taken at `s_*`, the largest level
/// the threshold has to cover.
pub fn theory_c0(p: usize, s_star: usize, gamma: f64, kappa: f64) -> Result<f64> {
    let consts = RateConstants::new(gamma, kappa)?;
    let tilde = doubled_level_gamma(p, s_star, gamma)?;
    Ok(consts.c2.max(c2_of(tilde)) / (kappa * kappa))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SqlBoundKind {
    Prediction,
    Lq(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SqsBoundKind {
    Prediction,
    Sorted,
    L2,
}

/// `exp(−n/(4γ²))`, the smallest confidence level for which the oracle
/// inequalities are stated. Bounds are still evaluated below it.
pub fn delta0_floor(n: usize, gamma: f64) -> f64 {
    (-(n as f64) / (4.0 * gamma * gamma)).exp()
}

fn check_bound_args(n: usize, p: usize, s: usize, sigma: f64, delta0: f64) -> Result<()> {
    if n == 0 || s < 1 || s > p {
        return Err(invalid(format!("need n >= 1 and 1 <= s <= p, got n={n}, s={s}, p={p}")));
    }
    if !(sigma >= 0.0) {
        return Err(invalid("sigma must be >= 0"));
    }
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(invalid(format!("delta0 = {delta0} must lie in (0, 1)")));
    }
    Ok(())
}

/// Right-hand side of the Square-root Lasso oracle inequality: `σ` times the
/// larger of the two displayed branches.
pub fn theoretical_bound_sql(
    kind: SqlBoundKind,
    n: usize,
    p: usize,
    s: usize,
    sigma: f64,
    consts: &RateConstants,
    delta0: f64,
) -> Result<f64> {
    check_bound_args(n, p, s, sigma, delta0)?;
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let k2 = consts.kappa * consts.kappa;
    let log_d = (1.0 / delta0).ln();
    let (a, b) = match kind {
        SqlBoundKind::Prediction => (
            consts.c1 / k2 * (sf / nf * (pf / sf).ln()).sqrt(),
            consts.c2 * (log_d / nf).sqrt(),
        ),
        SqlBoundKind::Lq(q) => {
            check_q(q)?;
            let l = (2.0 * pf / sf).ln();
            (
                consts.c3 / k2 * sf.powf(1.0 / q) * (l / nf).sqrt(),
                consts.c4 * sf.powf(1.0 / q - 1.0) * (log_d * log_d / (nf * l)).sqrt(),
            )
        }
    };
    Ok(sigma * a.max(b))
}

/// Right-hand side of the Square-root Slope oracle inequality.
pub fn theoretical_bound_sqs(
    kind: SqsBoundKind,
    n: usize,
    p: usize,
    s: usize,
    sigma: f64,
    consts: &RateConstants,
    delta0: f64,
) -> Result<f64> {
    check_bound_args(n, p, s, sigma, delta0)?;
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let k = consts.kappa;
    let log_d = (1.0 / delta0).ln();
    let rate = sf / nf * (pf / sf).ln();
    let (a, b) = match kind {
        SqsBoundKind::Prediction => (consts.c1p / k * rate.sqrt(), consts.c2p * (log_d / nf).sqrt()),
        SqsBoundKind::Sorted => (consts.c1p / (k * k) * rate, consts.c2p * log_d / nf),
        SqsBoundKind::L2 => (
            consts.c1p / (k * k) * rate.sqrt(),
            consts.c2p * (log_d * log_d / (sf * nf * (pf / sf).ln())).sqrt(),
        ),
    };
    Ok(sigma * a.max(b))
}

/// `σ/2 ≤ σ̂ ≤ α·σ` for the fit that supplies `σ̂`.
pub fn sigma_hat_sandwich_check(fit_top: &FitResult, sigma_true: f64, consts: &RateConstants) -> bool {
    let s = fit_top.sigma_hat;
    sigma_true / 2.0 <= s && s <= consts.alpha * sigma_true
}
