//! Ordinary least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Set when the design was rank deficient and a tiny ridge penalty was
    /// applied instead of the least-squares solve.
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefficients.len());
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut out = vec![self.intercept; x.n_rows()];
        for (j, beta) in self.coefficients.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(x.col(j)) {
                *o += beta * v;
            }
        }
        out
    }
}

/// Least squares with an intercept, solved by singular value decomposition.
/// A rank-deficient design falls back to a tiny ridge penalty and flags the
/// result.
pub fn fit_ols(x: &FeatureMatrix, y: &[f64]) -> Result<LinearModel> {
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {n} rows",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::DimensionMismatch(format!(
            "ols needs n > p, got n={n}, p={p}"
        )));
    }

    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let rhs = DVector::from_column_slice(y);

    let svd = design.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = 1e-12 * sigma_max.max(1.0);
    let rank = svd.rank(eps);

    if rank == p + 1 {
        let beta = svd
            .solve(&rhs, eps)
            .map_err(|e| Error::Numerical(format!("svd solve failed: {e}")))?;
        return Ok(LinearModel {
            intercept: beta[0],
            coefficients: beta.as_slice()[1..].to_vec(),
            rank_deficient: false,
        });
    }

    // ridge fallback: (X'X + lambda I) beta = X'y with a tiny lambda
    let xtx = design.transpose() * &design;
    let lambda = 1e-8 * (xtx.trace() / (p + 1) as f64).max(1e-300);
    let mut reg = xtx;
    for j in 0..p + 1 {
        reg[(j, j)] += lambda;
    }
    let xty = design.transpose() * rhs;
    let beta = reg
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge fallback factorization failed".into()))?
        .solve(&xty);
    Ok(LinearModel {
        intercept: beta[0],
        coefficients: beta.as_slice()[1..].to_vec(),
        rank_deficient: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn exact_interpolation_without_noise() {
        let x = FeatureMatrix::from_columns(vec![
            vec![0.0, 1.0, 2.0, 3.0, -1.0],
            vec![1.0, -1.0, 0.5, 2.0, 0.0],
        ]);
        let y: Vec<f64> = (0..5)
            .map(|i| 3.0 + 2.0 * x.get(i, 0) - x.get(i, 1))
            .collect();
        let m = fit_ols(&x, &y).unwrap();
        assert!(!m.rank_deficient);
        assert_abs_diff_eq!(m.intercept, 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.coefficients[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.coefficients[1], -1.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_target() {
        let x = FeatureMatrix::from_columns(vec![vec![0.0, 1.0, 2.0, 3.0]]);
        let y = vec![4.5; 4];
        let m = fit_ols(&x, &y).unwrap();
        assert_abs_diff_eq!(m.intercept, 4.5, epsilon = 1e-10);
        assert_abs_diff_eq!(m.coefficients[0], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut rng = crate::seed::SeedSpec::new(8).rng();
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
            .collect();
        let x = FeatureMatrix::from_columns(cols);
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + x.get(i, 0) - 2.0 * x.get(i, 2) + rng.random::<f64>())
            .collect();
        let m = fit_ols(&x, &y).unwrap();
        let pred = m.predict(&x);
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let scale = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..3 {
            let dot: f64 = resid.iter().zip(x.col(j)).map(|(r, v)| r * v).sum();
            assert!(dot.abs() / scale < 1e-6, "residual dot col {j} = {dot}");
        }
        let sum: f64 = resid.iter().sum();
        assert!(sum.abs() / scale < 1e-6);
    }

    #[test]
    fn duplicated_column_triggers_ridge_fallback() {
        let c = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let x = FeatureMatrix::from_columns(vec![c.clone(), c.clone()]);
        let y = vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
        let m = fit_ols(&x, &y).unwrap();
        assert!(m.rank_deficient);
        // the two copies share the weight; predictions still fit
        let pred = m.predict(&x);
        for (a, b) in pred.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-3);
        }
    }

    #[test]
    fn underdetermined_problem_is_an_error() {
        let x = FeatureMatrix::from_columns(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(fit_ols(&x, &[1.0, 2.0]).is_err());
    }
}
