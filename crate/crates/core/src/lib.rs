//! Square-root Lasso and Square-root Slope estimators for sparse linear
//! regression with unknown noise level.
//!
//! The model is `Y = Xβ* + ε` with `ε ~ N(0, σ²I)` and `β*` having at most
//! `s` nonzero entries. Both estimators replace the squared loss by the
//! unsquared `‖Y − Xβ‖_n`, which makes the right tuning parameter free of `σ`:
//!
//! * Square-root Lasso: `argmin ‖Y − Xβ‖_n + λ|β|_1` with
//!   `λ = γ·sqrt(log(2p/s)/n)`,
//! * Square-root Slope: `argmin ‖Y − Xβ‖_n + Σ_j λ_j|β|_(j)` with
//!   `λ_j = γ′·sqrt(log(2p/j)/n)`, which needs neither `σ` nor `s`.
//!
//! Around the estimators sit a Lepski-type aggregation over dyadic sparsity
//! levels ([`adaptivity`]), restricted-eigenvalue diagnostics
//! ([`design`]) and a Monte Carlo harness ([`experiments`]).
//!
//! ```
//! use sqrt_sparse::{fit_sqrt_lasso, normalize_columns, sqrt_lasso_lambda};
//! use sqrt_sparse::{DesignMatrix, RegressionData, SolverConfig};
//!
//! let x = DesignMatrix::from_rows(4, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, -1.0, 0.5]).unwrap();
//! let x = normalize_columns(&x).unwrap();
//! let y = ndarray::array![1.1, -0.2, 0.8, -1.3];
//! let data = RegressionData::new(x, y).unwrap();
//! let lambda = sqrt_lasso_lambda(4, 2, 1, 0.5).unwrap();
//! let fit = fit_sqrt_lasso(&data, lambda, &SolverConfig::default()).unwrap();
//! assert!(fit.converged);
//! ```

pub mod adaptivity;
pub mod design;
mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod penalties;
mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{
    check_normalization, empirical_norm, normalize_columns, residual, DesignMatrix, GroundTruth, RegressionData,
};
pub use penalties::{
    lambda_sum_bounds, prox_sorted_l1, slope_dual_feasible, soft_threshold, sorted_l1_norm, sqrt_lasso_lambda,
    sqrt_slope_lambdas, LambdaSequence, Penalty, THEORY_GAMMA,
};
pub use solvers::{
    fit_slope_fixed_scale, fit_sqrt_lasso, fit_sqrt_slope, kkt_residual, FitResult, SolverConfig, StepPolicy,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/penalties.md")]
    mod penalties {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/adaptivity.md")]
    mod adaptivity {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
