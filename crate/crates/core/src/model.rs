//! Regression problem data: the design matrix, the response, and the
//! empirical norm `‖v‖_n = sqrt(Σ v_i² / n)` that every estimator in this
//! crate is phrased in.
//!
//! The design is stored column-major. The solvers touch the design almost
//! exclusively through columns (`Xᵀr`, sparse `Xβ`, working-set extraction),
//! so this keeps those products on contiguous memory.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ShapeBuilder};

use crate::error::{invalid, Error, Result};

/// Relative slack accepted when checking `max_j ‖X e_j‖_n ≤ 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Empirical norm `sqrt((1/n) Σ v_i²)`.
pub fn empirical_norm(v: ArrayView1<f64>) -> Result<f64> {
    if v.is_empty() {
        return Err(invalid("empirical norm of an empty vector"));
    }
    Ok(empirical_norm_unchecked(v))
}

pub(crate) fn empirical_norm_unchecked(v: ArrayView1<f64>) -> f64 {
    (v.dot(&v) / v.len() as f64).sqrt()
}

/// An `n × p` design matrix together with the column scale factors applied so
/// far. `scales[j]` is the multiplier that took the original column `j` to
/// the stored one.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: Array2<f64>,
    scales: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (n, p) = entries.dim();
        if n == 0 || p == 0 {
            return Err(invalid(format!("design must be non-empty, got {n}x{p}")));
        }
        if let Some(((i, j), _)) = entries.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("non-finite design entry at ({i}, {j})")));
        }
        // Re-lay the matrix out column-major regardless of the input order.
        let mut col_major = Array2::zeros((n, p).f());
        col_major.assign(&entries);
        Ok(DesignMatrix {
            entries: col_major,
            scales: vec![1.0; p],
        })
    }

    /// Builds a design from row-major data, `rows.len() == n * p`.
    pub fn from_rows(n: usize, p: usize, rows: Vec<f64>) -> Result<Self> {
        let a = Array2::from_shape_vec((n, p), rows).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(a)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn p(&self) -> usize {
        self.entries.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.entries.column(j)
    }

    /// Cumulative per-column scale factors applied by [`normalize_columns`].
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// True iff `max_j ‖X e_j‖_n ≤ 1 + 1e-12`.
    pub fn is_normalized(&self) -> bool {
        check_normalization(self).1
    }

    /// `X β` for a length-`p` vector. Zero coefficients are skipped, so this
    /// is cheap for sparse `β`.
    pub fn mul(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.n());
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                out.scaled_add(b, &self.entries.column(j));
            }
        }
        out
    }

    /// `Xᵀ v` for a length-`n` vector.
    pub fn tmul(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.entries.t().dot(&v)
    }

    /// Maps coefficients expressed for the original (unscaled) columns to the
    /// coordinates of this design.
    pub fn to_scaled_coefficients(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        beta.iter().zip(&self.scales).map(|(b, s)| b / s).collect()
    }

    /// Maps coefficients fitted on this design back to the original columns.
    pub fn to_original_coefficients(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        beta.iter().zip(&self.scales).map(|(b, s)| b * s).collect()
    }
}

/// Returns `(max_j ‖X e_j‖_n, max ≤ 1 + 1e-12)`.
pub fn check_normalization(x: &DesignMatrix) -> (f64, bool) {
    let max = x
        .entries
        .columns()
        .into_iter()
        .map(empirical_norm_unchecked)
        .fold(0.0_f64, f64::max);
    (max, max <= 1.0 + NORMALIZATION_TOL)
}

/// Rescales every column to unit empirical norm. The applied factors are
/// accumulated in [`DesignMatrix::scales`].
pub fn normalize_columns(x: &DesignMatrix) -> Result<DesignMatrix> {
    let mut out = x.clone();
    for (j, mut col) in out.entries.columns_mut().into_iter().enumerate() {
        let norm = empirical_norm_unchecked(col.view());
        if norm == 0.0 {
            return Err(Error::DegenerateColumn(j));
        }
        let factor = 1.0 / norm;
        col.mapv_inplace(|v| v * factor);
        out.scales[j] *= factor;
    }
    Ok(out)
}

/// Observed data `(X, Y)`.
#[derive(Debug, Clone)]
pub struct RegressionData {
    design: DesignMatrix,
    response: Array1<f64>,
}

impl RegressionData {
    pub fn new(design: DesignMatrix, response: Array1<f64>) -> Result<Self> {
        if response.len() != design.n() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries, design has {} rows",
                response.len(),
                design.n()
            )));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite response entry at {i}")));
        }
        Ok(RegressionData { design, response })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn response(&self) -> ArrayView1<'_, f64> {
        self.response.view()
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    /// Same design, response multiplied by `c`.
    pub fn scaled_response(&self, c: f64) -> RegressionData {
        RegressionData {
            design: self.design.clone(),
            response: &self.response * c,
        }
    }
}

/// `Y − Xβ`.
pub fn residual(data: &RegressionData, beta: ArrayView1<f64>) -> Result<Array1<f64>> {
    if beta.len() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient vector has {} entries, design has {} columns",
            beta.len(),
            data.p()
        )));
    }
    Ok(&data.response - &data.design.mul(beta))
}

/// The data-generating parameters of a synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    beta_star: Array1<f64>,
    sigma: f64,
    sparsity: usize,
}

impl GroundTruth {
    pub fn new(beta_star: Array1<f64>, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("noise scale must be finite and >= 0, got {sigma}")));
        }
        if beta_star.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite entry in beta_star"));
        }
        let sparsity = beta_star.iter().filter(|&&b| b != 0.0).count();
        Ok(GroundTruth {
            beta_star,
            sigma,
            sparsity,
        })
    }

    pub fn beta_star(&self) -> ArrayView1<'_, f64> {
        self.beta_star.view()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    /// Indices of the nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.beta_star
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn scaled_identity(n: usize, c: f64) -> DesignMatrix {
        DesignMatrix::new(Array2::eye(n) * c).unwrap()
    }

    #[test]
    fn empirical_norm_examples() {
        assert_eq!(empirical_norm(array![0.0, 0.0, 0.0, 0.0].view()).unwrap(), 0.0);
        assert_eq!(empirical_norm(array![2.0, 2.0, 2.0, 2.0].view()).unwrap(), 2.0);
        let v = empirical_norm(array![3.0, 4.0].view()).unwrap();
        assert!((v - 3.535_533_905_932_737_6).abs() < 1e-15);
        assert!(empirical_norm(Array1::<f64>::zeros(0).view()).is_err());
    }

    #[test]
    fn normalization_check_examples() {
        let (m, ok) = check_normalization(&scaled_identity(4, 2.0));
        assert!((m - 1.0).abs() < 1e-15 && ok);
        let (m, ok) = check_normalization(&scaled_identity(3, 2.0 * 3f64.sqrt()));
        assert!((m - 2.0).abs() < 1e-14 && !ok);
        let (m, ok) = check_normalization(&DesignMatrix::new(Array2::zeros((3, 2))).unwrap());
        assert_eq!(m, 0.0);
        assert!(ok);
    }

    #[test]
    fn normalize_examples() {
        let x = scaled_identity(4, 4.0);
        let z = normalize_columns(&x).unwrap();
        let expected = Array2::<f64>::eye(4) * 2.0;
        assert!(z.view().iter().zip(expected.iter()).all(|(a, b)| (a - b).abs() < 1e-14));

        let already = scaled_identity(4, 2.0);
        let again = normalize_columns(&already).unwrap();
        assert_eq!(again.view(), already.view());

        let col = DesignMatrix::from_rows(3, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let z = normalize_columns(&col).unwrap();
        assert!((z.scales()[0] - 3f64.sqrt()).abs() < 1e-15);
        assert!((empirical_norm(z.column(0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_column_is_rejected() {
        let x = DesignMatrix::from_rows(2, 2, vec![1.0, 0.0, 2.0, 0.0]).unwrap();
        assert!(matches!(normalize_columns(&x), Err(Error::DegenerateColumn(1))));
    }

    #[test]
    fn residual_examples() {
        let x = normalize_columns(&DesignMatrix::new(Array2::eye(2)).unwrap()).unwrap();
        let data = RegressionData::new(x.clone(), array![1.0, 2.0]).unwrap();
        assert_eq!(residual(&data, array![0.0, 0.0].view()).unwrap(), array![1.0, 2.0]);

        let beta = x.to_scaled_coefficients(array![1.0, 0.0].view());
        let r = residual(&data, beta.view()).unwrap();
        assert!((r[0]).abs() < 1e-15 && (r[1] - 2.0).abs() < 1e-15);

        let fitted = RegressionData::new(x.clone(), x.mul(array![0.3, -1.2].view())).unwrap();
        let r = residual(&fitted, array![0.3, -1.2].view()).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));

        assert!(residual(&data, array![1.0].view()).is_err());
    }

    #[test]
    fn rejects_non_finite_inputs() {
        assert!(DesignMatrix::from_rows(1, 2, vec![1.0, f64::NAN]).is_err());
        let x = scaled_identity(2, 1.0);
        assert!(RegressionData::new(x.clone(), array![1.0, f64::INFINITY]).is_err());
        assert!(RegressionData::new(x, array![1.0]).is_err());
    }

    #[test]
    fn ground_truth_counts_support() {
        let t = GroundTruth::new(array![0.0, 1.5, 0.0, -2.0], 1.0).unwrap();
        assert_eq!(t.sparsity(), 2);
        assert_eq!(t.support(), vec![1, 3]);
        assert!(GroundTruth::new(array![1.0], -1.0).is_err());
    }

    fn matrix_strategy() -> impl Strategy<Value = DesignMatrix> {
        (1usize..6, 1usize..6).prop_flat_map(|(n, p)| {
            proptest::collection::vec(0.1f64..10.0, n * p).prop_map(move |v| {
                // Keep every column away from zero by construction.
                DesignMatrix::from_rows(n, p, v).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn norm_is_absolutely_homogeneous(
            v in proptest::collection::vec(-1e3f64..1e3, 1..20),
            c in -1e3f64..1e3,
        ) {
            let v = Array1::from(v);
            let lhs = empirical_norm((&v * c).view()).unwrap();
            let rhs = c.abs() * empirical_norm(v.view()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn normalization_is_idempotent(x in matrix_strategy()) {
            let once = normalize_columns(&x).unwrap();
            let twice = normalize_columns(&once).unwrap();
            prop_assert!(check_normalization(&once).1);
            for (a, b) in once.view().iter().zip(twice.view().iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
