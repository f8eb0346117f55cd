//! Synthetic experiments: data generation, grid runs and rate-normalized
//! summaries.
//!
//! A replicate is identified by `(n, p, s, replicate)`. The design, `β*` and
//! the standardized noise `z` are drawn from streams derived from the root
//! seed and that tuple only, so every `σ`, `γ` and method sees the same
//! `(X, β*, z)` and `Y = Xβ* + σz`. Errors of the scale-equivariant fits are
//! then exactly proportional to `σ` across cells.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptivity::{lepski_aggregate, lq_norm, sqrt_lasso_level_fitter, AdaptationConfig, Distance};
use crate::error::{invalid, Error, Result};
use crate::model::{empirical_norm_unchecked, normalize_columns, DesignMatrix, GroundTruth, RegressionData};
use crate::penalties::{sorted_l1_unchecked, sqrt_lasso_lambda, sqrt_slope_lambdas};
use crate::rng::{derive_seed, normal_vec, stream_rng};
use crate::solvers::{fit_sqrt_lasso, fit_sqrt_slope, SolverConfig};

/// Environment variable capping the worker threads of [`run_grid`]
/// (`0` or unset: one per core).
pub const THREADS_ENV: &str = "SQRT_SPARSE_THREADS";

pub const CSV_HEADER: [&str; 10] = [
    "n",
    "p",
    "s",
    "sigma",
    "method",
    "metric",
    "median",
    "iqr",
    "normalized_ratio",
    "failures",
];

const TAG_DESIGN: u64 = 1;
const TAG_BETA: u64 = 2;
const TAG_NOISE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    #[default]
    GaussianIid,
    /// Rows `√(1−ρ)·z + √ρ·w·1` with `z` standard normal and `w` a shared
    /// scalar, so all column pairs have correlation `ρ`.
    GaussianEquicorrelated { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BetaPattern {
    #[default]
    FirstSOnes,
    /// Uniform support of size `s` with independent ±1 values.
    RandomSupportUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SqrtLasso,
    SqrtSlope,
    LepskiLasso,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::SqrtLasso => "sqrt-lasso",
            Method::SqrtSlope => "sqrt-slope",
            Method::LepskiLasso => "lepski-lasso",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub s: Vec<usize>,
    pub sigma: Vec<f64>,
    /// `γ` for the Lasso methods, `γ′` for Slope.
    pub gamma: Vec<f64>,
}

/// Parameters of the `lepski-lasso` method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LepskiSpec {
    pub s_star: usize,
    pub c0: f64,
    /// `pred`, `l1` or `l2`.
    #[serde(default = "default_distance")]
    pub distance: String,
}

fn default_distance() -> String {
    "pred".to_string()
}

/// Parses the distance names used in specs and on the command line.
pub fn parse_distance(name: &str) -> Result<Distance> {
    match name {
        "pred" | "prediction" => Ok(Distance::Prediction),
        "l1" => Ok(Distance::Lq(1.0)),
        "l2" => Ok(Distance::Lq(2.0)),
        other => Err(invalid(format!("unknown distance '{other}' (expected pred, l1 or l2)"))),
    }
}

/// Overrides of [`SolverConfig`] fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub max_outer_iters: Option<usize>,
    pub max_inner_iters: Option<usize>,
    pub objective_tol: Option<f64>,
    pub kkt_tol: Option<f64>,
}

impl SolverSpec {
    pub fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(v) = self.max_outer_iters {
            cfg.max_outer_iters = v;
        }
        if let Some(v) = self.max_inner_iters {
            cfg.max_inner_iters = v;
        }
        if let Some(v) = self.objective_tol {
            cfg.objective_tol = v;
        }
        if let Some(v) = self.kkt_tol {
            cfg.kkt_tol = v;
        }
        cfg
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Method),
    Many(Vec<Method>),
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<Method>, D::Error> {
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(m) => vec![m],
        OneOrMany::Many(v) => v,
    })
}

fn default_q_list() -> Vec<f64> {
    vec![1.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub grid: GridSpec,
    /// A single method name is accepted under the key `method`.
    #[serde(alias = "method", deserialize_with = "one_or_many")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub design_kind: DesignKind,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub beta_pattern: BetaPattern,
    #[serde(default = "default_q_list")]
    pub q_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lepski: Option<LepskiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.n.is_empty() || g.p.is_empty() || g.s.is_empty() || g.sigma.is_empty() || g.gamma.is_empty() {
            return Err(invalid("every grid list must be nonempty"));
        }
        if self.methods.is_empty() {
            return Err(invalid("no methods given"));
        }
        if self.replicates < 1 {
            return Err(invalid("replicates must be >= 1"));
        }
        if g.n.contains(&0) || g.s.contains(&0) {
            return Err(invalid("n and s must be >= 1"));
        }
        for &p in &g.p {
            if let Some(&s) = g.s.iter().find(|&&s| s > p) {
                return Err(invalid(format!("s = {s} exceeds p = {p}")));
            }
        }
        if g.sigma.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid("sigma values must be positive and finite"));
        }
        if g.gamma.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid("gamma values must be positive and finite"));
        }
        if let DesignKind::GaussianEquicorrelated { rho } = self.design_kind {
            if !(0.0..1.0).contains(&rho) {
                return Err(invalid(format!("rho must lie in [0, 1), got {rho}")));
            }
        }
        if self.q_list.iter().any(|q| !(1.0..=2.0).contains(q)) {
            return Err(invalid("q_list entries must lie in [1, 2]"));
        }
        if self.methods.contains(&Method::LepskiLasso) {
            let l = self
                .lepski
                .as_ref()
                .ok_or_else(|| invalid("lepski-lasso needs a 'lepski' block with s_star and c0"))?;
            let cfg = AdaptationConfig::new(l.s_star, l.c0, parse_distance(&l.distance)?);
            for &p in &g.p {
                cfg.validate(p)?;
            }
        }
        if let Some(s) = &self.solver {
            s.config().validate()?;
        }
        Ok(())
    }

    fn solver_config(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_default().config()
    }
}

/// Gaussian design with normalized columns, deterministic in `seed`.
pub fn generate_design(kind: DesignKind, n: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
    if n == 0 || p == 0 {
        return Err(invalid("design needs n >= 1 and p >= 1"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut entries = normal_vec(&mut rng, n * p);
    if let DesignKind::GaussianEquicorrelated { rho } = kind {
        if !(0.0..1.0).contains(&rho) {
            return Err(invalid(format!("rho must lie in [0, 1), got {rho}")));
        }
        let shared = normal_vec(&mut rng, n);
        let (a, b) = ((1.0 - rho).sqrt(), rho.sqrt());
        for (i, row) in entries.chunks_mut(p).enumerate() {
            row.iter_mut().for_each(|v| *v = a * *v + b * shared[i]);
        }
    }
    normalize_columns(&DesignMatrix::from_rows(n, p, entries)?)
}

/// `β*` with `s` nonzero entries following `pattern`.
pub fn generate_beta(pattern: BetaPattern, p: usize, s: usize, seed: u64) -> Result<Array1<f64>> {
    if s > p {
        return Err(invalid(format!("s = {s} exceeds p = {p}")));
    }
    let mut beta = Array1::zeros(p);
    match pattern {
        BetaPattern::FirstSOnes => beta.slice_mut(ndarray::s![..s]).fill(1.0),
        BetaPattern::RandomSupportUnit => {
            let mut rng = stream_rng(seed, 0);
            for j in sample(&mut rng, p, s).into_vec() {
                beta[j] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
        }
    }
    Ok(beta)
}

/// `Y = Xβ* + σz` with `z` standard normal drawn from `seed`.
pub fn generate_instance(x: &DesignMatrix, truth: &GroundTruth, seed: u64) -> Result<RegressionData> {
    if truth.beta_star().len() != x.p() {
        return Err(Error::DimensionMismatch(format!(
            "beta_star has {} entries for {} columns",
            truth.beta_star().len(),
            x.p()
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let z = Array1::from(normal_vec(&mut rng, x.n()));
    let y = x.mul(truth.beta_star()) + z * truth.sigma();
    RegressionData::new(x.clone(), y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    /// `None` when every replicate of the cell failed.
    pub median: Option<f64>,
    pub iqr: Option<f64>,
    /// Median divided by the rate for the metric; `None` where no rate
    /// applies (`sigma_ratio`, `s_tilde`) or the rate vanishes (`s = p`).
    pub normalized_ratio: Option<f64>,
    /// The rate expression used for the normalization.
    pub rate: Option<String>,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub sigma: f64,
    /// Method name, suffixed with the tuning constant when the grid has
    /// several.
    pub method: String,
    pub gamma: f64,
    pub replicates: usize,
    /// Replicates whose fit returned an error or did not converge.
    pub failures: usize,
    /// More than 10% of the replicates failed.
    pub degraded: bool,
    pub metrics: Vec<MetricSummary>,
}

impl CellRecord {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub spec: ExperimentSpec,
    /// Sorted by `(n, p, s, sigma, method)`.
    pub cells: Vec<CellRecord>,
}

impl RateReport {
    pub fn cell(&self, n: usize, p: usize, s: usize, sigma: f64, method: &str) -> Option<&CellRecord> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.p == p && c.s == s && c.sigma == sigma && c.method == method)
    }
}

fn q_label(q: f64) -> String {
    format!("l{q}")
}

/// Rate a metric's median is divided by, with its label.
fn rate_for(metric: &str, n: usize, p: usize, s: usize, sigma: f64) -> Option<(f64, String)> {
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let log_ps = (pf / sf).ln();
    let rate = match metric {
        "prediction" | "l2" => (
            sigma * (sf / nf * log_ps).sqrt(),
            "sigma*sqrt((s/n)*log(p/s))".to_string(),
        ),
        "sorted" => (sigma * sf / nf * log_ps, "sigma*(s/n)*log(p/s)".to_string()),
        m if m.starts_with('l') => {
            let q: f64 = m[1..].parse().ok()?;
            (
                sigma * sf.powf(1.0 / q) * ((2.0 * pf / sf).ln() / nf).sqrt(),
                format!("sigma*s^(1/{q})*sqrt(log(2p/s)/n)"),
            )
        }
        _ => return None,
    };
    (rate.0 > 0.0 && rate.0.is_finite()).then_some(rate)
}

/// Median and interquartile range with linear interpolation between order
/// statistics.
fn median_iqr(samples: &[f64]) -> Option<(f64, f64)> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |t: f64| {
        let h = t * (v.len() - 1) as f64;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some((q(0.5), q(0.75) - q(0.25)))
}

/// One fit's metrics in canonical order, or `None` on failure.
type Outcome = Option<Vec<(String, f64)>>;

struct Job {
    sigma: f64,
    method: Method,
    gamma: f64,
}

fn error_metrics(
    x: &DesignMatrix,
    beta_hat: ArrayView1<f64>,
    beta_star: ArrayView1<f64>,
    q_list: &[f64],
    sorted_weights: Option<&[f64]>,
) -> Vec<(String, f64)> {
    let diff = &beta_hat - &beta_star;
    let mut out = vec![(
        "prediction".to_string(),
        empirical_norm_unchecked(x.mul(diff.view()).view()),
    )];
    for &q in q_list {
        out.push((q_label(q), lq_norm(diff.view(), q)));
    }
    if let Some(w) = sorted_weights {
        out.push(("sorted".to_string(), sorted_l1_unchecked(&diff.to_vec(), w)));
    }
    out
}

fn run_job(
    spec: &ExperimentSpec,
    x: &DesignMatrix,
    truth: &GroundTruth,
    noise_seed: u64,
    s: usize,
    job: &Job,
    cfg: &SolverConfig,
) -> Result<Outcome> {
    let (n, p) = (x.n(), x.p());
    let truth = GroundTruth::new(truth.beta_star().to_owned(), job.sigma)?;
    let data = generate_instance(x, &truth, noise_seed)?;
    let beta_star = truth.beta_star();
    let outcome = match job.method {
        Method::SqrtLasso => {
            let fit = fit_sqrt_lasso(&data, sqrt_lasso_lambda(n, p, s, job.gamma)?, cfg)?;
            fit.converged.then(|| {
                let mut m = error_metrics(x, fit.beta_hat.view(), beta_star, &spec.q_list, None);
                m.push(("sigma_ratio".to_string(), fit.sigma_hat / job.sigma));
                m
            })
        }
        Method::SqrtSlope => {
            let fit = fit_sqrt_slope(&data, &sqrt_slope_lambdas(n, p, job.gamma)?, cfg)?;
            // The sorted error uses unit-γ′ weights so that it does not move with γ′.
            let unit = sqrt_slope_lambdas(n, p, 1.0)?;
            fit.converged.then(|| {
                let mut m = error_metrics(x, fit.beta_hat.view(), beta_star, &spec.q_list, Some(unit.weights()));
                m.push(("sigma_ratio".to_string(), fit.sigma_hat / job.sigma));
                m
            })
        }
        Method::LepskiLasso => {
            let l = spec.lepski.as_ref().ok_or_else(|| invalid("missing lepski block"))?;
            let acfg = AdaptationConfig::new(l.s_star, l.c0, parse_distance(&l.distance)?);
            let res = lepski_aggregate(&data, &acfg, sqrt_lasso_level_fitter(&data, job.gamma, cfg))?;
            res.per_level_fits.iter().all(|f| f.converged).then(|| {
                let mut m = error_metrics(x, res.beta_tilde.view(), beta_star, &spec.q_list, None);
                m.push(("sigma_ratio".to_string(), res.sigma_hat / job.sigma));
                m.push(("s_tilde".to_string(), res.s_tilde as f64));
                m
            })
        }
    };
    Ok(outcome)
}

/// Thread cap from [`THREADS_ENV`]; `0` means one thread per core.
pub fn configured_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'"))),
    }
}

/// Runs every cell of the grid with the thread cap from [`THREADS_ENV`].
pub fn run_grid(spec: &ExperimentSpec) -> Result<RateReport> {
    run_grid_with_threads(spec, configured_threads()?)
}

/// Runs every cell on a pool of `threads` workers (`0`: one per core). The
/// report does not depend on `threads`.
pub fn run_grid_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<RateReport> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    pool.install(|| run_grid_inner(spec))
}

fn run_grid_inner(spec: &ExperimentSpec) -> Result<RateReport> {
    let g = &spec.grid;
    let cfg = spec.solver_config();
    let mut jobs = Vec::new();
    for &sigma in &g.sigma {
        for &method in &spec.methods {
            for &gamma in &g.gamma {
                jobs.push(Job { sigma, method, gamma });
            }
        }
    }

    let mut units = Vec::new();
    for &n in &g.n {
        for &p in &g.p {
            for &s in &g.s {
                units.push((n, p, s));
            }
        }
    }

    let mut cells = Vec::new();
    for &(n, p, s) in &units {
        let outcomes: Vec<Vec<Outcome>> = (0..spec.replicates)
            .into_par_iter()
            .map(|rep| -> Result<Vec<Outcome>> {
                let key = [n as u64, p as u64, s as u64, rep as u64];
                let seed = |tag: u64| derive_seed(spec.seed, &[key[0], key[1], key[2], key[3], tag]);
                let x = generate_design(spec.design_kind, n, p, seed(TAG_DESIGN))?;
                let beta = generate_beta(spec.beta_pattern, p, s, seed(TAG_BETA))?;
                let truth = GroundTruth::new(beta, 1.0)?;
                Ok(jobs
                    .iter()
                    .map(|job| run_job(spec, &x, &truth, seed(TAG_NOISE), s, job, &cfg).unwrap_or(None))
                    .collect())
            })
            .collect::<Result<_>>()?;

        for (j, job) in jobs.iter().enumerate() {
            let per_rep: Vec<&Outcome> = outcomes.iter().map(|o| &o[j]).collect();
            cells.push(summarize(spec, n, p, s, job, &per_rep));
        }
    }
    cells.sort_by(|a, b| {
        (a.n, a.p, a.s)
            .cmp(&(b.n, b.p, b.s))
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.method.cmp(&b.method))
    });
    Ok(RateReport {
        spec: spec.clone(),
        cells,
    })
}

fn summarize(spec: &ExperimentSpec, n: usize, p: usize, s: usize, job: &Job, per_rep: &[&Outcome]) -> CellRecord {
    let failures = per_rep.iter().filter(|o| o.is_none()).count();
    let names: Vec<String> = {
        let mut v = vec!["prediction".to_string()];
        v.extend(spec.q_list.iter().map(|&q| q_label(q)));
        if job.method == Method::SqrtSlope {
            v.push("sorted".to_string());
        }
        v.push("sigma_ratio".to_string());
        if job.method == Method::LepskiLasso {
            v.push("s_tilde".to_string());
        }
        v
    };
    let metrics = names
        .into_iter()
        .map(|name| {
            let samples: Vec<f64> = per_rep
                .iter()
                .filter_map(|o| o.as_ref())
                .filter_map(|m| m.iter().find(|(k, _)| *k == name).map(|(_, v)| *v))
                .collect();
            let stats = median_iqr(&samples);
            let rate = rate_for(&name, n, p, s, job.sigma);
            MetricSummary {
                normalized_ratio: stats.zip(rate.as_ref()).map(|((med, _), (r, _))| med / r),
                rate: rate.map(|(_, label)| label),
                median: stats.map(|s| s.0),
                iqr: stats.map(|s| s.1),
                metric: name,
                samples,
            }
        })
        .collect();
    let method = if spec.grid.gamma.len() > 1 {
        format!("{}(gamma={})", job.method.name(), job.gamma)
    } else {
        job.method.name().to_string()
    };
    CellRecord {
        n,
        p,
        s,
        sigma: job.sigma,
        method,
        gamma: job.gamma,
        replicates: per_rep.len(),
        failures,
        degraded: failures * 10 > per_rep.len(),
        metrics,
    }
}

/// Range of the normalized ratio of one metric across the cells of one
/// method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSpread {
    pub method: String,
    pub metric: String,
    pub min: f64,
    pub max: f64,
    /// `max / min`.
    pub spread: f64,
    /// `(n, p, s, sigma)` of the cells attaining the extremes.
    pub argmin: (usize, usize, usize, f64),
    pub argmax: (usize, usize, usize, f64),
}

/// Spread of the normalized ratios per `(method, metric)`.
pub fn rate_ratios(report: &RateReport) -> Result<Vec<RatioSpread>> {
    if report.cells.is_empty() {
        return Err(invalid("empty report"));
    }
    let mut out: Vec<RatioSpread> = Vec::new();
    for cell in &report.cells {
        for m in &cell.metrics {
            let Some(r) = m.normalized_ratio else { continue };
            let at = (cell.n, cell.p, cell.s, cell.sigma);
            match out.iter_mut().find(|e| e.method == cell.method && e.metric == m.metric) {
                None => out.push(RatioSpread {
                    method: cell.method.clone(),
                    metric: m.metric.clone(),
                    min: r,
                    max: r,
                    spread: 1.0,
                    argmin: at,
                    argmax: at,
                }),
                Some(e) => {
                    if r < e.min {
                        e.min = r;
                        e.argmin = at;
                    }
                    if r > e.max {
                        e.max = r;
                        e.argmax = at;
                    }
                    e.spread = e.max / e.min;
                }
            }
        }
    }
    out.sort_by(|a, b| (&a.method, &a.metric).cmp(&(&b.method, &b.metric)));
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV row per `(cell, metric)` under [`CSV_HEADER`].
pub fn write_report_csv<W: Write>(report: &RateReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in &report.cells {
        for m in &c.metrics {
            w.write_record([
                c.n.to_string(),
                c.p.to_string(),
                c.s.to_string(),
                c.sigma.to_string(),
                c.method.clone(),
                m.metric.clone(),
                opt(m.median),
                opt(m.iqr),
                opt(m.normalized_ratio),
                c.failures.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    format_version: u32,
    spec: &'a ExperimentSpec,
    cells: &'a [CellRecord],
    rate_ratios: Vec<RatioSpread>,
}

/// The full report (spec, seed, raw samples, spreads) as JSON.
pub fn write_report_json<W: Write>(report: &RateReport, out: W) -> Result<()> {
    let sidecar = Sidecar {
        format_version: 1,
        spec: &report.spec,
        cells: &report.cells,
        rate_ratios: rate_ratios(report)?,
    };
    serde_json::to_writer_pretty(out, &sidecar)?;
    Ok(())
}

/// `path` for the CSV and `path` with extension `json` for the sidecar.
pub fn write_report(report: &RateReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_report_csv(report, std::fs::File::create(path)?)?;
    let mut f = std::fs::File::create(path.with_extension("json"))?;
    write_report_json(report, &mut f)?;
    f.write_all(b"\n")?;
    Ok(())
}
