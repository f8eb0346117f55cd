use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sqrt_sparse::adaptivity::{lepski_aggregate, sqrt_lasso_level_fitter, AdaptationConfig};
use sqrt_sparse::design::{
    estimate_kappa, validate_theorem1_conditions, validate_theorem3_conditions, ConditionReport, ConeSpec, KappaKind,
    SRE_DEFAULT_C0, WRE_DEFAULT_C0,
};
use sqrt_sparse::experiments::{parse_distance, rate_ratios, run_grid, write_report, ExperimentSpec, RateReport};
use sqrt_sparse::io::{read_design, read_response};
use sqrt_sparse::{
    check_normalization, fit_sqrt_lasso, fit_sqrt_slope, normalize_columns, sqrt_lasso_lambda, sqrt_slope_lambdas,
    DesignMatrix, Error, RegressionData, SolverConfig, THEORY_GAMMA,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "sqrt-sparse",
    version,
    about = "Square-root Lasso / Slope fits, sparsity adaptation and design diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethod {
    SqrtLasso,
    SqrtSlope,
}

#[derive(Clone, Copy, ValueEnum)]
enum Cone {
    Sre,
    Wre,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Pred,
    L1,
    L2,
}

impl DistanceArg {
    fn name(self) -> &'static str {
        match self {
            DistanceArg::Pred => "pred",
            DistanceArg::L1 => "l1",
            DistanceArg::L2 => "l2",
        }
    }
}

#[derive(clap::Args)]
struct DataArgs {
    /// Design matrix CSV, one row per sample, no header.
    #[arg(long)]
    x: PathBuf,
    /// Response CSV, one value per line.
    #[arg(long)]
    y: PathBuf,
    /// Rescale the columns of X to unit empirical norm before fitting;
    /// coefficients are reported for the original columns.
    #[arg(long)]
    normalize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one estimator.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        method: FitMethod,
        #[arg(long, default_value_t = THEORY_GAMMA)]
        gamma: f64,
        /// Sparsity entering the Lasso tuning parameter.
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lepski-type aggregation of Square-root Lasso fits over dyadic sparsity levels.
    Adapt {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = THEORY_GAMMA)]
        gamma: f64,
        #[arg(long)]
        s_star: usize,
        #[arg(long)]
        c0: f64,
        #[arg(long, value_enum, default_value = "pred")]
        distance: DistanceArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo grid; writes the CSV and a JSON sidecar next to it.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Restricted-eigenvalue estimate and sample-size conditions for a design.
    CheckDesign {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        s: usize,
        /// Defaults to 5/3 for the SRE cone and 8 for the WRE cone.
        #[arg(long)]
        c0: Option<f64>,
        #[arg(long, value_enum, default_value = "sre")]
        cone: Cone,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = THEORY_GAMMA)]
        gamma: f64,
        #[arg(long)]
        normalize: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized-ratio spreads of a simulation sidecar JSON.
    Rates {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: error_code(&e),
            msg: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        msg: msg.into(),
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::StepSize => EXIT_USAGE,
        Error::Level { source, .. } => error_code(source),
        _ => EXIT_DATA,
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit {
            data,
            method,
            gamma,
            s,
            out,
        } => cmd_fit(&data, method, gamma, s, &out),
        Command::Adapt {
            data,
            gamma,
            s_star,
            c0,
            distance,
            out,
        } => cmd_adapt(&data, gamma, s_star, c0, distance, &out),
        Command::Simulate { spec, out } => cmd_simulate(&spec, &out),
        Command::CheckDesign {
            x,
            s,
            c0,
            cone,
            restarts,
            seed,
            gamma,
            normalize,
            out,
        } => cmd_check_design(&x, s, c0, cone, restarts, seed, gamma, normalize, out.as_deref()),
        Command::Rates { report, out } => cmd_rates(&report, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn load_design(path: &Path, normalize: bool) -> Result<DesignMatrix, Failure> {
    let x = read_design(path)?;
    if normalize {
        return Ok(normalize_columns(&x)?);
    }
    let (max, ok) = check_normalization(&x);
    if !ok {
        return Err(Failure {
            code: EXIT_DATA,
            msg: format!(
                "{} (pass --normalize to rescale the columns)",
                Error::NotNormalized(max)
            ),
        });
    }
    Ok(x)
}

fn load_data(args: &DataArgs) -> Result<RegressionData, Failure> {
    let x = load_design(&args.x, args.normalize)?;
    let y = read_response(&args.y)?;
    Ok(RegressionData::new(x, y)?)
}

fn write_json(value: &Value, out: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::from(e).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn original_scale(x: &DesignMatrix, beta: &ndarray::Array1<f64>) -> Vec<f64> {
    x.to_original_coefficients(beta.view()).to_vec()
}

fn cmd_fit(args: &DataArgs, method: FitMethod, gamma: f64, s: Option<usize>, out: &Path) -> Outcome {
    let data = load_data(args)?;
    let (n, p) = (data.n(), data.p());
    let cfg = SolverConfig::default();
    let (fit, tuning) = match method {
        FitMethod::SqrtLasso => {
            let s = s.ok_or_else(|| usage("--s is required for sqrt-lasso"))?;
            let lambda = sqrt_lasso_lambda(n, p, s, gamma)?;
            (
                fit_sqrt_lasso(&data, lambda, &cfg)?,
                json!({"method": "sqrt-lasso", "gamma": gamma, "s": s, "lambda": lambda}),
            )
        }
        FitMethod::SqrtSlope => {
            if s.is_some() {
                return Err(usage("--s only applies to sqrt-lasso"));
            }
            let lambdas = sqrt_slope_lambdas(n, p, gamma)?;
            (
                fit_sqrt_slope(&data, &lambdas, &cfg)?,
                json!({"method": "sqrt-slope", "gamma": gamma}),
            )
        }
    };
    let mut value = json!({
        "format_version": 1,
        "n": n,
        "p": p,
        "beta": original_scale(data.design(), &fit.beta_hat),
        "sigma_hat": fit.sigma_hat,
        "objective": fit.objective,
        "kkt_residual": fit.kkt_residual,
        "converged": fit.converged,
        "degenerate": fit.degenerate,
        "outer_iters": fit.outer_iters,
        "normalized": args.normalize,
    });
    value
        .as_object_mut()
        .unwrap()
        .extend(tuning.as_object().unwrap().clone());
    write_json(&value, Some(out))?;
    Ok(if fit.converged || fit.degenerate {
        0
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn cmd_adapt(args: &DataArgs, gamma: f64, s_star: usize, c0: f64, distance: DistanceArg, out: &Path) -> Outcome {
    let data = load_data(args)?;
    let cfg = SolverConfig::default();
    let acfg = AdaptationConfig::new(s_star, c0, parse_distance(distance.name())?);
    let res = lepski_aggregate(&data, &acfg, sqrt_lasso_level_fitter(&data, gamma, &cfg))?;
    // distances[i] and thresholds[i] compare levels 2^(i+1) and 2^(i+2).
    let levels: Vec<Value> = res
        .per_level_fits
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let cmp = i.checked_sub(1);
            json!({
                "s": 1usize << (i + 1),
                "beta": original_scale(data.design(), &f.beta_hat),
                "sigma_hat": f.sigma_hat,
                "objective": f.objective,
                "kkt_residual": f.kkt_residual,
                "converged": f.converged,
                "degenerate": f.degenerate,
                "distance_to_previous": cmp.map(|k| res.distances[k]),
                "threshold": cmp.map(|k| res.thresholds[k]),
            })
        })
        .collect();
    let value = json!({
        "format_version": 1,
        "gamma": gamma,
        "s_star": s_star,
        "c0": c0,
        "distance": distance.name(),
        "beta_tilde": original_scale(data.design(), &res.beta_tilde),
        "s_tilde": res.s_tilde,
        "m_tilde": res.m_tilde,
        "big_m": res.big_m,
        "sigma_hat": res.sigma_hat,
        "selection_set": res.selection_set,
        "selection_set_nonempty": res.selection_set_nonempty,
        "normalized": args.normalize,
        "levels": levels,
    });
    write_json(&value, Some(out))?;
    let ok = res.per_level_fits.iter().all(|f| f.converged || f.degenerate);
    Ok(if ok { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_simulate(spec: &Path, out: &Path) -> Outcome {
    let text = std::fs::read_to_string(spec).map_err(Error::from)?;
    let spec = ExperimentSpec::from_json(&text).map_err(|e| match e {
        Error::Json(_) => Failure {
            code: EXIT_DATA,
            msg: format!("malformed spec: {e}"),
        },
        other => other.into(),
    })?;
    let report = run_grid(&spec)?;
    write_report(&report, out)?;
    let failures: usize = report.cells.iter().map(|c| c.failures).sum();
    Ok(if failures == 0 { 0 } else { EXIT_NOT_CONVERGED })
}

fn condition_json(r: &ConditionReport) -> Value {
    json!({
        "holds": r.holds(),
        "gamma_ok": r.gamma_ok,
        "gamma_slack": r.gamma_slack,
        "rate_ok": r.rate_ok,
        "rate_lhs": r.rate_lhs,
        "rate_rhs": r.rate_rhs,
        "rate_slack": r.rate_slack,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_check_design(
    x: &Path,
    s: usize,
    c0: Option<f64>,
    cone: Cone,
    restarts: usize,
    seed: u64,
    gamma: f64,
    normalize: bool,
    out: Option<&Path>,
) -> Outcome {
    let x = load_design(x, normalize)?;
    let (n, p) = (x.n(), x.p());
    if s > p {
        return Err(usage(format!("--s {s} exceeds p = {p}")));
    }
    let (spec, name) = match cone {
        Cone::Sre => (ConeSpec::sre(s, c0.unwrap_or(SRE_DEFAULT_C0))?, "sre"),
        Cone::Wre => (
            ConeSpec::wre(s, c0.unwrap_or(WRE_DEFAULT_C0), sqrt_slope_lambdas(n, p, gamma)?)?,
            "wre",
        ),
    };
    let k = estimate_kappa(&x, &spec, restarts, seed)?;
    let kappa = k.value.min(1.0);
    let conditions = match cone {
        Cone::Sre => validate_theorem1_conditions(n, p, s, gamma, kappa)?,
        Cone::Wre => validate_theorem3_conditions(n, p, s, gamma, kappa)?,
    };
    let w = k.best_witness.view();
    let value = json!({
        "format_version": 1,
        "n": n,
        "p": p,
        "cone": name,
        "s": s,
        "c0": spec.c0(),
        "gamma": gamma,
        "seed": seed,
        "kappa": k.value,
        "kind": match k.kind { KappaKind::Exact => "exact", KappaKind::HeuristicUpper => "heuristic-upper" },
        "restarts": k.restarts,
        "witness": w.to_vec(),
        "witness_check": {
            "l2_norm": w.dot(&w).sqrt(),
            "in_cone": spec.contains(w, 1e-10),
            "prediction_norm": (x.mul(w).mapv(|v| v * v).sum() / n as f64).sqrt(),
        },
        "conditions": condition_json(&conditions),
    });
    write_json(&value, out)?;
    Ok(0)
}

fn cmd_rates(report: &Path, out: Option<&Path>) -> Outcome {
    let text = std::fs::read_to_string(report).map_err(Error::from)?;
    let report: RateReport = serde_json::from_str(&text).map_err(|e| Failure {
        code: EXIT_DATA,
        msg: format!("malformed report: {e}"),
    })?;
    let spreads = rate_ratios(&report)?;
    let value = json!({
        "format_version": 1,
        "rate_ratios": spreads,
    });
    write_json(&value, out)?;
    Ok(0)
}
