//! Tuning parameters, the sorted-ℓ1 norm and the proximal operators used by
//! the solvers.
//!
//! For a nonincreasing positive weight sequence `λ_1 ≥ … ≥ λ_p > 0` the
//! sorted-ℓ1 norm is `|u|_* = Σ_j λ_j |u|_(j)` where `|u|_(j)` is the `j`-th
//! largest absolute entry. With all weights equal it reduces to a scaled ℓ1
//! norm, which is how the Square-root Lasso fits into the same machinery.

use ndarray::{Array1, ArrayView1};

use crate::error::{invalid, Error, Result};

/// Smallest γ (and γ′) for which the oracle inequalities are stated.
pub const THEORY_GAMMA: f64 = 16.0 + 4.0 * std::f64::consts::SQRT_2;

/// Default tolerance of [`slope_dual_feasible`].
pub const DEFAULT_DUAL_TOL: f64 = 1e-8;

/// Nonincreasing positive weights of a sorted-ℓ1 norm, with the multiplier
/// they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSequence {
    weights: Vec<f64>,
    gamma: f64,
}

impl LambdaSequence {
    pub fn new(weights: Vec<f64>, gamma: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("lambda sequence must be non-empty"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("lambda weights must be finite and strictly positive"));
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("lambda weights must be nonincreasing"));
        }
        Ok(LambdaSequence { weights, gamma })
    }

    /// `p` copies of `lambda`: the sorted-ℓ1 norm becomes `lambda·|·|_1`.
    pub fn constant(p: usize, lambda: f64) -> Result<Self> {
        Self::new(vec![lambda; p], lambda)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The first `k` weights. Vectors supported on at most `k` coordinates
    /// have the same sorted-ℓ1 norm under the prefix as under the full
    /// sequence.
    pub fn prefix(&self, k: usize) -> LambdaSequence {
        LambdaSequence {
            weights: self.weights[..k].to_vec(),
            gamma: self.gamma,
        }
    }

    /// Multiplies every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> LambdaSequence {
        LambdaSequence {
            weights: self.weights.iter().map(|w| w * c).collect(),
            gamma: self.gamma * c,
        }
    }
}

/// `γ·sqrt(log(2p/s)/n)`.
pub fn sqrt_lasso_lambda(n: usize, p: usize, s: usize, gamma: f64) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(invalid("n and p must be positive"));
    }
    if s < 1 || s > p {
        return Err(invalid(format!("sparsity s = {s} must lie in [1, {p}]")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    Ok(gamma * ((2.0 * p as f64 / s as f64).ln() / n as f64).sqrt())
}

/// `λ_j = γ′·sqrt(log(2p/j)/n)` for `j = 1..=p`.
pub fn sqrt_slope_lambdas(n: usize, p: usize, gamma_prime: f64) -> Result<LambdaSequence> {
    if n == 0 || p == 0 {
        return Err(invalid("n and p must be positive"));
    }
    if !(gamma_prime > 0.0 && gamma_prime.is_finite()) {
        return Err(invalid(format!("gamma' must be positive, got {gamma_prime}")));
    }
    let weights = (1..=p)
        .map(|j| gamma_prime * ((2.0 * p as f64 / j as f64).ln() / n as f64).sqrt())
        .collect();
    LambdaSequence::new(weights, gamma_prime)
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// Absolute values sorted decreasingly.
pub(crate) fn sorted_abs_desc(v: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    a.sort_unstable_by(|x, y| y.total_cmp(x));
    a
}

pub(crate) fn sorted_l1_unchecked(v: &[f64], weights: &[f64]) -> f64 {
    sorted_abs_desc(v).iter().zip(weights).map(|(a, w)| a * w).sum()
}

/// `Σ_j λ_j |v|_(j)`.
pub fn sorted_l1_norm(v: ArrayView1<f64>, lambdas: &LambdaSequence) -> Result<f64> {
    check_len(v.len(), lambdas.len(), "vector vs lambda sequence")?;
    Ok(sorted_l1_unchecked(&v.to_vec(), lambdas.weights()))
}

/// Both sides of the sandwich on `sqrt(Σ_{j≤s} λ_j²)` together with the
/// value itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSumBounds {
    pub lower: f64,
    pub upper: f64,
    pub actual: f64,
}

impl LambdaSumBounds {
    pub fn holds(&self) -> bool {
        self.lower <= self.actual && self.actual <= self.upper
    }
}

/// `γ′·sqrt((s/n)·log(2p/s)) ≤ sqrt(Σ_{j≤s} λ_j²) ≤ γ′·sqrt((s/n)·log(2ep/s))`.
pub fn lambda_sum_bounds(n: usize, p: usize, s: usize, gamma_prime: f64) -> Result<LambdaSumBounds> {
    if s < 1 || s > p {
        return Err(invalid(format!("sparsity s = {s} must lie in [1, {p}]")));
    }
    let lambdas = sqrt_slope_lambdas(n, p, gamma_prime)?;
    let actual = lambdas.weights()[..s].iter().map(|l| l * l).sum::<f64>().sqrt();
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    Ok(LambdaSumBounds {
        lower: gamma_prime * (sf / nf * (2.0 * pf / sf).ln()).sqrt(),
        upper: gamma_prime * (sf / nf * (2.0 * std::f64::consts::E * pf / sf).ln()).sqrt(),
        actual,
    })
}

/// Componentwise `sign(v_i)·max(|v_i| − t, 0)`.
pub fn soft_threshold(v: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
    if !(t >= 0.0) {
        return Err(invalid(format!("threshold must be >= 0, got {t}")));
    }
    Ok(v.mapv(|x| soft(x, t)))
}

#[inline]
pub(crate) fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Least-squares nonincreasing fit by pooling adjacent violators.
fn pava_nonincreasing(w: &[f64]) -> Vec<f64> {
    // (sum, count) per block.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(w.len());
    for &x in w {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 > s1 / c1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, c0 + c1);
        }
    }
    let mut out = Vec::with_capacity(w.len());
    for (s, c) in blocks {
        out.extend(std::iter::repeat_n(s / c as f64, c));
    }
    out
}

/// Prox of `t·|·|_*` written into `out`. Lengths are the caller's problem.
pub(crate) fn prox_sorted_into(v: &[f64], weights: &[f64], t: f64, out: &mut [f64]) {
    let p = v.len();
    let mut order: Vec<usize> = (0..p).collect();
    // Stable: ties keep their original index order.
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    let shifted: Vec<f64> = order.iter().zip(weights).map(|(&i, &w)| v[i].abs() - t * w).collect();
    let fitted = pava_nonincreasing(&shifted);
    for (&i, f) in order.iter().zip(fitted) {
        out[i] = v[i].signum() * f.max(0.0);
    }
}

/// The unique minimizer of `½‖x − v‖₂² + t·|x|_*`.
///
/// Sorting `|v|` decreasingly turns the problem into an isotonic regression
/// of `|v|_(j) − t·λ_j` onto nonincreasing, nonnegative sequences; the result
/// is then unsorted and the signs of `v` restored.
pub fn prox_sorted_l1(v: ArrayView1<f64>, lambdas: &LambdaSequence, t: f64) -> Result<Array1<f64>> {
    check_len(v.len(), lambdas.len(), "vector vs lambda sequence")?;
    if !(t >= 0.0) {
        return Err(invalid(format!("prox scale must be >= 0, got {t}")));
    }
    let v = v.to_vec();
    let mut out = vec![0.0; v.len()];
    prox_sorted_into(&v, lambdas.weights(), t, &mut out);
    Ok(Array1::from(out))
}

/// `max_k (Σ_{j≤k} |g|_(j) − Σ_{j≤k} λ_j)`, clipped at zero. Zero iff `g` is in
/// the unit ball of the norm dual to `|·|_*`.
pub(crate) fn dual_violation(g: &[f64], weights: &[f64]) -> f64 {
    let sorted = sorted_abs_desc(g);
    let (mut sg, mut sl, mut worst) = (0.0, 0.0, 0.0_f64);
    for (a, w) in sorted.iter().zip(weights) {
        sg += a;
        sl += w;
        worst = worst.max(sg - sl);
    }
    worst
}

/// True iff every partial sum of the sorted `|g|` stays below the matching
/// partial sum of the weights, up to `tol`.
pub fn slope_dual_feasible(g: ArrayView1<f64>, lambdas: &LambdaSequence, tol: f64) -> Result<bool> {
    check_len(g.len(), lambdas.len(), "vector vs lambda sequence")?;
    Ok(dual_violation(&g.to_vec(), lambdas.weights()) <= tol)
}

/// The penalty term of a square-root estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    /// `λ·|β|_1`.
    L1 { lambda: f64 },
    /// `|β|_*` with the given weights.
    Sorted(LambdaSequence),
}

impl Penalty {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Penalty::L1 { lambda })
    }

    pub(crate) fn check_dim(&self, p: usize) -> Result<()> {
        match self {
            Penalty::L1 { .. } => Ok(()),
            Penalty::Sorted(l) => check_len(l.len(), p, "lambda sequence vs design columns"),
        }
    }

    pub fn value(&self, beta: &[f64]) -> f64 {
        match self {
            Penalty::L1 { lambda } => lambda * beta.iter().map(|b| b.abs()).sum::<f64>(),
            Penalty::Sorted(l) => sorted_l1_unchecked(beta, l.weights()),
        }
    }

    /// Prox of `t·penalty`.
    pub(crate) fn prox_into(&self, v: &[f64], t: f64, out: &mut [f64]) {
        match self {
            Penalty::L1 { lambda } => {
                let thr = t * lambda;
                for (o, x) in out.iter_mut().zip(v) {
                    *o = soft(*x, thr);
                }
            }
            Penalty::Sorted(l) => prox_sorted_into(v, l.weights(), t, out),
        }
    }

    /// The same penalty seen from a problem restricted to `k` coordinates.
    pub(crate) fn restrict(&self, k: usize) -> Penalty {
        match self {
            Penalty::L1 { lambda } => Penalty::L1 { lambda: *lambda },
            Penalty::Sorted(l) => Penalty::Sorted(l.prefix(k)),
        }
    }

    /// Distance of `g` from the subdifferential of the penalty at `beta`.
    ///
    /// For ℓ1 this is the worst coordinate: `(|g_i| − λ)_+` where `β_i = 0` and
    /// `|g_i − λ·sign(β_i)|` elsewhere. For the sorted norm it is the larger
    /// of the dual-ball violation and the complementarity gap
    /// `(|β|_* − ⟨g, β⟩)/|β|_1`. Both are invariant to rescaling `β`.
    pub(crate) fn kkt(&self, g: &[f64], beta: &[f64]) -> f64 {
        match self {
            Penalty::L1 { lambda } => g
                .iter()
                .zip(beta)
                .map(|(&gi, &bi)| {
                    if bi == 0.0 {
                        (gi.abs() - lambda).max(0.0)
                    } else {
                        (gi - lambda * bi.signum()).abs()
                    }
                })
                .fold(0.0, f64::max),
            Penalty::Sorted(l) => {
                let viol = dual_violation(g, l.weights());
                let l1: f64 = beta.iter().map(|b| b.abs()).sum();
                let gap = if l1 > 0.0 {
                    let inner: f64 = g.iter().zip(beta).map(|(a, b)| a * b).sum();
                    (sorted_l1_unchecked(beta, l.weights()) - inner).abs() / l1
                } else {
                    0.0
                };
                viol.max(gap)
            }
        }
    }
}
