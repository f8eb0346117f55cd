//! Diagnostics for the design: restricted-eigenvalue constants, the sample
//! size conditions of the oracle inequalities, and Monte Carlo checks of the
//! two probabilistic events the proofs rely on.
//!
//! The constants are
//!
//! ```text
//! κ(s)  = min { ‖Xδ‖_n / |δ|_2 : |δ|_1 ≤ (1 + c₀)·√s·|δ|_2 }
//! κ′(s) = min { ‖Xδ‖_n / |δ|_2 : |δ|_* ≤ (1 + c₀)·sqrt(Σ_{j≤s} λ_j²)·|δ|_2 }
//! ```
//!
//! Both minimizations are non-convex. [`estimate_kappa`] runs projected
//! gradient descent on the sphere from several starts and reports the best
//! value found, which is an upper bound certified by its witness.

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{check_normalization, empirical_norm_unchecked, DesignMatrix};
use crate::penalties::{dual_violation, sorted_abs_desc, sorted_l1_unchecked, LambdaSequence};
use crate::rng::{normal_vec, stream_rng};

/// `4 + √2`, the constant of the noise-event functionals.
const NOISE_CONST: f64 = 4.0 + std::f64::consts::SQRT_2;

/// Cone constant used with the ℓ1 cone.
pub const SRE_DEFAULT_C0: f64 = 5.0 / 3.0;
/// Cone constant used with the sorted-ℓ1 cone.
pub const WRE_DEFAULT_C0: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Sre,
    Wre,
}

/// A cone of approximately `s`-sparse directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    kind: ConeKind,
    s: usize,
    c0: f64,
    lambdas: Option<LambdaSequence>,
}

impl ConeSpec {
    /// `|δ|_1 ≤ (1 + c₀)·√s·|δ|_2`.
    pub fn sre(s: usize, c0: f64) -> Result<Self> {
        Self::check(s, c0)?;
        Ok(ConeSpec {
            kind: ConeKind::Sre,
            s,
            c0,
            lambdas: None,
        })
    }

    /// `|δ|_* ≤ (1 + c₀)·sqrt(Σ_{j≤s} λ_j²)·|δ|_2`.
    pub fn wre(s: usize, c0: f64, lambdas: LambdaSequence) -> Result<Self> {
        Self::check(s, c0)?;
        if s > lambdas.len() {
            return Err(invalid(format!("s = {s} exceeds the {} weights", lambdas.len())));
        }
        Ok(ConeSpec {
            kind: ConeKind::Wre,
            s,
            c0,
            lambdas: Some(lambdas),
        })
    }

    fn check(s: usize, c0: f64) -> Result<()> {
        if s < 1 {
            return Err(invalid("cone sparsity must be >= 1"));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(invalid(format!("c0 must be positive, got {c0}")));
        }
        Ok(())
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// The same cone at another sparsity. Cones grow with `s`.
    pub fn with_s(&self, s: usize) -> Result<Self> {
        match &self.lambdas {
            None => Self::sre(s, self.c0),
            Some(l) => Self::wre(s, self.c0, l.clone()),
        }
    }

    /// Largest admissible ratio `N(δ)/|δ|_2`.
    fn bound(&self) -> f64 {
        let scale = match &self.lambdas {
            None => (self.s as f64).sqrt(),
            Some(l) => l.weights()[..self.s].iter().map(|w| w * w).sum::<f64>().sqrt(),
        };
        (1.0 + self.c0) * scale
    }

    /// `|δ|_1` or `|δ|_*`.
    fn cone_norm(&self, d: &[f64]) -> f64 {
        match &self.lambdas {
            None => d.iter().map(|v| v.abs()).sum(),
            Some(l) => sorted_l1_unchecked(d, l.weights()),
        }
    }

    fn ratio(&self, d: &[f64]) -> f64 {
        self.cone_norm(d) / l2(d)
    }

    /// Membership with absolute slack `tol`.
    pub fn contains(&self, d: ArrayView1<f64>, tol: f64) -> bool {
        let d = d.to_vec();
        self.cone_norm(&d) <= self.bound() * l2(&d) + tol
    }

    /// Moves `d` into the cone by soft-thresholding its small entries, with
    /// the threshold found by bisection. Not the Euclidean projection.
    fn pull_in(&self, d: &mut [f64]) {
        let target = self.bound() * (1.0 - 1e-12);
        if l2(d) == 0.0 || self.ratio(d) <= target {
            return;
        }
        let top = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let shrink = |t: f64| -> Vec<f64> { d.iter().map(|&v| crate::penalties::soft(v, t)).collect() };
        let (mut lo, mut hi) = (0.0, top * (1.0 - 1e-9));
        if self.ratio(&shrink(hi)) > target {
            // Many tied maxima: fall back to one spike.
            let j = d.iter().position(|v| v.abs() == top).unwrap_or(0);
            let sign = d[j].signum();
            d.iter_mut().for_each(|v| *v = 0.0);
            d[j] = sign;
            return;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.ratio(&shrink(mid)) <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        d.copy_from_slice(&shrink(hi));
    }
}

fn l2(d: &[f64]) -> f64 {
    d.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn normalize(d: &mut [f64]) -> bool {
    let n = l2(d);
    if n == 0.0 {
        return false;
    }
    d.iter_mut().for_each(|v| *v /= n);
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaKind {
    /// `XᵀX/n = I`, so `‖Xδ‖_n = |δ|_2` on every cone.
    Exact,
    /// Best value found by the search; an upper bound on the true constant.
    HeuristicUpper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaEstimate {
    /// `‖X·best_witness‖_n`.
    pub value: f64,
    pub kind: KappaKind,
    pub restarts: usize,
    /// Unit vector in the cone.
    pub best_witness: Array1<f64>,
}

struct Gram {
    p: usize,
    g: Vec<f64>,
}

impl Gram {
    fn new(x: &DesignMatrix) -> Self {
        let (n, p) = (x.n() as f64, x.p());
        let mut g = vec![0.0; p * p];
        for a in 0..p {
            let ca = x.column(a);
            for b in 0..=a {
                let v = ca.dot(&x.column(b)) / n;
                g[a * p + b] = v;
                g[b * p + a] = v;
            }
        }
        Gram { p, g }
    }

    fn mul(&self, d: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.g[a * self.p..(a + 1) * self.p]
                .iter()
                .zip(d)
                .map(|(g, v)| g * v)
                .sum();
        }
    }

    fn quad(&self, d: &[f64], scratch: &mut [f64]) -> f64 {
        self.mul(d, scratch);
        d.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum::<f64>().max(0.0)
    }

    fn is_identity(&self, tol: f64) -> bool {
        (0..self.p).all(|a| {
            (0..self.p).all(|b| {
                let target = if a == b { 1.0 } else { 0.0 };
                (self.g[a * self.p + b] - target).abs() <= tol
            })
        })
    }

    /// Off-diagonal pair with the largest `|G_ab|`, optionally with `a` fixed.
    fn most_correlated(&self, fixed: Option<usize>) -> (usize, usize) {
        let mut best = (0, usize::from(self.p > 1), f64::NEG_INFINITY);
        let rows: Vec<usize> = match fixed {
            Some(a) => vec![a],
            None => (0..self.p).collect(),
        };
        for a in rows {
            for b in 0..self.p {
                if a != b && self.g[a * self.p + b].abs() > best.2 {
                    best = (a, b, self.g[a * self.p + b].abs());
                }
            }
        }
        (best.0, best.1)
    }

    fn pair_direction(&self, a: usize, b: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.p];
        d[a] = 1.0;
        if a != b {
            if self.g[a * self.p + b] >= 0.0 {
                d[b] = -1.0;
            } else {
                d[b] = 1.0;
            }
        }
        normalize(&mut d);
        d
    }
}

/// Projected gradient on sphere ∩ cone from `d`; returns `‖Xd‖_n²`.
fn descend(gram: &Gram, cone: &ConeSpec, d: &mut Vec<f64>, iters: usize) -> f64 {
    let p = gram.p;
    let mut scratch = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut f = gram.quad(d, &mut scratch);
    let mut eta = 1.0;
    for _ in 0..iters {
        gram.mul(d, &mut grad);
        let mut cand: Vec<f64> = d.iter().zip(&grad).map(|(v, g)| v - eta * g).collect();
        cone.pull_in(&mut cand);
        let fc = if normalize(&mut cand) {
            gram.quad(&cand, &mut scratch)
        } else {
            f64::INFINITY
        };
        if fc < f {
            *d = cand;
            f = fc;
            eta *= 1.5;
        } else {
            eta *= 0.5;
            if eta < 1e-10 {
                break;
            }
        }
    }
    f
}

const DESCENT_ITERS: usize = 60;

/// Estimates `κ` (SRE cone) or `κ′` (WRE cone) for a normalized design.
///
/// Each restart follows one trajectory through the cones at sparsity
/// `1, 2, …, s`, warm-starting every level from the previous one; the value
/// is the smallest `‖Xδ‖_n` seen anywhere along the way (smaller cones are
/// contained in larger ones). Single columns are always candidates, so the
/// value never exceeds 1. Restart 0 starts from the most correlated column
/// pair, odd restarts from a random column and its most correlated partner,
/// and even restarts from a Gaussian direction. Trajectory `i` depends only
/// on `(seed, i)`, which makes the value non-increasing both in `s` and in
/// the number of restarts.
pub fn estimate_kappa(x: &DesignMatrix, cone: &ConeSpec, restarts: usize, seed: u64) -> Result<KappaEstimate> {
    let (max, ok) = check_normalization(x);
    if !ok {
        return Err(Error::NotNormalized(max));
    }
    if restarts < 1 {
        return Err(invalid("restarts must be >= 1"));
    }
    let p = x.p();
    if let Some(l) = &cone.lambdas {
        if l.len() != p {
            return Err(Error::DimensionMismatch(format!("{} weights for {p} columns", l.len())));
        }
    }
    let gram = Gram::new(x);
    if gram.is_identity(1e-10) {
        let mut w = Array1::zeros(p);
        w[0] = 1.0;
        return Ok(KappaEstimate {
            value: 1.0,
            kind: KappaKind::Exact,
            restarts,
            best_witness: w,
        });
    }

    let mut scratch = vec![0.0; p];
    let (mut best_f, mut best) = (f64::INFINITY, vec![0.0; p]);
    for j in 0..p {
        let f = gram.g[j * p + j];
        if f < best_f {
            best_f = f;
            best = vec![0.0; p];
            best[j] = 1.0;
        }
    }

    let mut starts: Vec<Vec<f64>> = (0..restarts)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            if i == 0 {
                let (a, b) = gram.most_correlated(None);
                gram.pair_direction(a, b)
            } else if i % 2 == 1 {
                let a = rand::Rng::gen_range(&mut rng, 0..p);
                let (_, b) = gram.most_correlated(Some(a));
                gram.pair_direction(a, b)
            } else {
                let mut d = normal_vec(&mut rng, p);
                normalize(&mut d);
                d
            }
        })
        .collect();

    for level in 1..=cone.s {
        let c = cone.with_s(level)?;
        for d in starts.iter_mut() {
            c.pull_in(d);
            if !normalize(d) {
                continue;
            }
            let f = descend(&gram, &c, d, DESCENT_ITERS).min(gram.quad(d, &mut scratch));
            if f < best_f {
                best_f = f;
                best.clone_from(d);
            }
        }
    }

    let witness = Array1::from(best);
    let value = empirical_norm_unchecked(x.mul(witness.view()).view());
    Ok(KappaEstimate {
        value,
        kind: KappaKind::HeuristicUpper,
        restarts,
        best_witness: witness,
    })
}

/// Clause-by-clause outcome of a sample-size condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub gamma_ok: bool,
    /// `γ − (16 + 4√2)`.
    pub gamma_slack: f64,
    pub rate_ok: bool,
    pub rate_lhs: f64,
    pub rate_rhs: f64,
    /// `rate_rhs − rate_lhs`.
    pub rate_slack: f64,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.gamma_ok && self.rate_ok
    }

    fn new(gamma: f64, lhs: f64, rhs: f64) -> Self {
        let gamma_slack = gamma - crate::penalties::THEORY_GAMMA;
        ConditionReport {
            gamma_ok: gamma_slack >= 0.0,
            gamma_slack,
            rate_ok: lhs <= rhs,
            rate_lhs: lhs,
            rate_rhs: rhs,
            rate_slack: rhs - lhs,
        }
    }
}

fn check_condition_args(n: usize, p: usize, s: usize, gamma: f64, kappa: f64) -> Result<()> {
    if n == 0 || s < 1 || s > p {
        return Err(invalid(format!("need n >= 1 and 1 <= s <= p, got n={n}, s={s}, p={p}")));
    }
    if !(gamma > 0.0) || !(0.0..=1.0).contains(&kappa) {
        return Err(invalid(format!(
            "need gamma > 0 and kappa in [0, 1], got {gamma}, {kappa}"
        )));
    }
    Ok(())
}

/// `γ ≥ 16 + 4√2` and `(s/n)·log(2p/s) ≤ 9κ²/(256γ²)`.
pub fn validate_theorem1_conditions(n: usize, p: usize, s: usize, gamma: f64, kappa: f64) -> Result<ConditionReport> {
    check_condition_args(n, p, s, gamma, kappa)?;
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let lhs = sf / nf * (2.0 * pf / sf).ln();
    let rhs = 9.0 * kappa * kappa / (256.0 * gamma * gamma);
    Ok(ConditionReport::new(gamma, lhs, rhs))
}

/// `γ′ ≥ 16 + 4√2` and `(s/n)·log(2ep/s) ≤ κ′²/(256γ′²)`.
pub fn validate_theorem3_conditions(
    n: usize,
    p: usize,
    s: usize,
    gamma_prime: f64,
    kappa_prime: f64,
) -> Result<ConditionReport> {
    check_condition_args(n, p, s, gamma_prime, kappa_prime)?;
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let lhs = sf / nf * (2.0 * std::f64::consts::E * pf / sf).ln();
    let rhs = kappa_prime * kappa_prime / (256.0 * gamma_prime * gamma_prime);
    Ok(ConditionReport::new(gamma_prime, lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFunctionals {
    pub g: f64,
    pub h: f64,
    pub f: f64,
}

/// The functionals bounding `εᵀXu/n`:
///
/// ```text
/// G(u) = (4+√2)·σ·sqrt(log(1/δ₀)/n)·‖Xu‖_n
/// H(u) = (4+√2)·σ·Σ_j |u|_(j)·sqrt(log(2p/j)/n)
/// F(u) = (4+√2)·σ·sqrt(log(2p/s)/n)·(√s·|u|_2 + Σ_{j>s} |u|_(j))
/// ```
pub fn noise_functionals(
    u: ArrayView1<f64>,
    x: &DesignMatrix,
    sigma: f64,
    s: usize,
    delta0: f64,
) -> Result<NoiseFunctionals> {
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(invalid(format!("delta0 must lie in (0, 1), got {delta0}")));
    }
    let (n, p) = (x.n() as f64, x.p());
    if u.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "u has {} entries for {p} columns",
            u.len()
        )));
    }
    if s < 1 || s > p {
        return Err(invalid(format!("s = {s} must lie in [1, {p}]")));
    }
    let c = NOISE_CONST * sigma;
    let pf = p as f64;
    let sorted = sorted_abs_desc(&u.to_vec());
    let g = c * ((1.0 / delta0).ln() / n).sqrt() * empirical_norm_unchecked(x.mul(u).view());
    let h = c * sorted
        .iter()
        .enumerate()
        .map(|(j, a)| a * ((2.0 * pf / (j + 1) as f64).ln() / n).sqrt())
        .sum::<f64>();
    let tail: f64 = sorted[s..].iter().sum();
    let f = c * ((2.0 * pf / s as f64).ln() / n).sqrt() * ((s as f64).sqrt() * u.dot(&u).sqrt() + tail);
    Ok(NoiseFunctionals { g, h, f })
}

/// Empirical frequency of an event with the bound it is compared to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub frequency: f64,
    pub replicates: usize,
    /// Lower bound on the probability claimed by theory.
    pub bound: f64,
    /// Binomial standard error at the bound, `sqrt(b(1−b)/R)` with `b`
    /// clipped to `[0, 1]`.
    pub standard_error: f64,
}

impl MonteCarloEstimate {
    fn new(hits: usize, replicates: usize, bound: f64) -> Self {
        let b = bound.clamp(0.0, 1.0);
        MonteCarloEstimate {
            frequency: hits as f64 / replicates as f64,
            replicates,
            bound,
            standard_error: (b * (1.0 - b) / replicates as f64).sqrt(),
        }
    }

    /// `frequency ≥ bound − k·standard_error`.
    pub fn consistent(&self, k: f64) -> bool {
        self.frequency >= self.bound - k * self.standard_error
    }
}

/// Frequency of the sorted dual condition on `Xᵀε/n`: every partial sum of
/// its sorted absolute entries stays below the matching partial sum of
/// `(4+√2)·σ·sqrt(log(2p/j)/n)`. On that event `εᵀXu/n ≤ H(u)` for every
/// `u`, which implies the event `εᵀXu/n ≤ max(H(u), G(u))`. The bound
/// reported is `1 − δ₀/2`.
pub fn monte_carlo_noise_event(
    x: &DesignMatrix,
    sigma: f64,
    delta0: f64,
    replicates: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if replicates < 1 {
        return Err(invalid("replicates must be >= 1"));
    }
    if !(delta0 > 0.0 && delta0 < 1.0) || !(sigma >= 0.0) {
        return Err(invalid("need delta0 in (0, 1) and sigma >= 0"));
    }
    let (n, p) = (x.n(), x.p());
    let weights: Vec<f64> = (1..=p)
        .map(|j| NOISE_CONST * sigma * ((2.0 * p as f64 / j as f64).ln() / n as f64).sqrt())
        .collect();
    let hits = (0..replicates)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = stream_rng(seed, r as u64);
            let eps = Array1::from(normal_vec(&mut rng, n)) * sigma;
            let v: Vec<f64> = x.tmul(eps.view()).iter().map(|a| a / n as f64).collect();
            dual_violation(&v, &weights) <= 0.0
        })
        .count();
    Ok(MonteCarloEstimate::new(hits, replicates, 1.0 - delta0 / 2.0))
}

/// Frequency of `σ/√2 ≤ ‖ε‖_n ≤ 2σ` for `ε ~ N(0, σ²I_n)`, compared to
/// `1 − (1 + e²)·e^{−n/24}`. The event does not depend on `σ > 0`, so it is
/// evaluated on the standardized noise; `σ = 0` gives frequency 1.
pub fn monte_carlo_epsilon_concentration(
    n: usize,
    sigma: f64,
    replicates: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n < 1 || replicates < 1 || !(sigma >= 0.0) {
        return Err(invalid("need n >= 1, replicates >= 1 and sigma >= 0"));
    }
    let bound = 1.0 - (1.0 + std::f64::consts::E.powi(2)) * (-(n as f64) / 24.0).exp();
    if sigma == 0.0 {
        return Ok(MonteCarloEstimate::new(replicates, replicates, bound));
    }
    let hits = (0..replicates)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = stream_rng(seed, r as u64);
            let z = Array1::from(normal_vec(&mut rng, n));
            let norm = empirical_norm_unchecked(z.view());
            (std::f64::consts::FRAC_1_SQRT_2..=2.0).contains(&norm)
        })
        .count();
    Ok(MonteCarloEstimate::new(hits, replicates, bound))
}
