//! Synthetic data-generating processes: correlated Gaussian features with a
//! linear or non-linear response.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    Linear,
    Nonlinear,
}

impl DgpKind {
    pub fn label(&self) -> &'static str {
        match self {
            DgpKind::Linear => "linear",
            DgpKind::Nonlinear => "nonlinear",
        }
    }
}

/// Specification of a data-generating process.
///
/// Features are draws from a centered Gaussian with Toeplitz covariance
/// `rho^|i-j|`; the response is `x1 - x2 + e` (linear) or
/// `x1 - sqrt(max(1 - x2, 0)) + x3*x4 + (x4/10)^2 + e` (non-linear) with
/// `e ~ N(0, noise_sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub kind: DgpKind,
    /// Number of feature columns (the target is appended as one more).
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
}

fn default_p() -> usize {
    4
}
fn default_rho() -> f64 {
    0.5
}
fn default_noise_sd() -> f64 {
    1.0
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        let min_p = match self.kind {
            DgpKind::Linear => 2,
            DgpKind::Nonlinear => 4,
        };
        if self.p < min_p {
            return Err(Error::InvalidSpec(format!(
                "dgp {:?} needs at least {min_p} features, got {}",
                self.kind, self.p
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidSpec(format!(
                "dgp rho must be in [0,1), got {}",
                self.rho
            )));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "dgp noise_sd must be nonnegative, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }

    /// Response value for one feature row, without noise.
    pub fn response(&self, x: &[f64]) -> f64 {
        match self.kind {
            DgpKind::Linear => x[0] - x[1],
            DgpKind::Nonlinear => {
                // sqrt argument clamped at zero: the formula is otherwise
                // undefined for x2 > 1
                x[0] - (1.0 - x[1]).max(0.0).sqrt() + x[2] * x[3] + (x[3] / 10.0).powi(2)
            }
        }
    }
}

/// Toeplitz covariance matrix with entries `rho^|i-j|` and unit diagonal.
pub fn toeplitz_sigma(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        rho.powi((i as i64 - j as i64).unsigned_abs() as i32)
    })
}

/// Sample `n` rows from the process. The target is the last column.
pub fn sample(spec: &DgpSpec, n: usize, seed: &SeedSpec) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidSpec("sample size must be positive".into()));
    }
    let sigma = toeplitz_sigma(spec.p, spec.rho);
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Numerical("Toeplitz covariance not positive definite".into()))?;
    let l = chol.l();

    let mut rng = seed.rng();
    let normal = StandardNormal;
    let p_total = spec.p + 1;
    let mut values = vec![0.0; n * p_total];
    let mut z = vec![0.0; spec.p];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = normal.sample(&mut rng);
        }
        let row = &mut values[i * p_total..(i + 1) * p_total];
        for j in 0..spec.p {
            // x = L z
            let mut acc = 0.0;
            for (k, &zk) in z.iter().enumerate().take(j + 1) {
                acc += l[(j, k)] * zk;
            }
            row[j] = acc;
        }
        let eps: f64 = normal.sample(&mut rng);
        row[spec.p] = spec.response(&row[..spec.p]) + spec.noise_sd * eps;
    }

    let mut names: Vec<String> = (1..=spec.p).map(|j| format!("x{j}")).collect();
    names.push("y".to_owned());
    Dataset::complete(values, names, spec.p)
}
