//! Independent oracles used by the acceptance suite. Nothing here calls the
//! code paths under test: least squares is solved by explicit normal
//! equations with Gauss-Jordan elimination, and the t quantile comes from
//! numerical integration of the density plus bisection.

use imlci_core::matrix::FeatureMatrix;

/// Solve `(X'X)^-1 X'y` with an explicit intercept column, by Gauss-Jordan
/// elimination. Returns `[intercept, beta_1, ..., beta_p]`.
pub fn normal_equation_ols(x: &FeatureMatrix, y: &[f64]) -> Vec<f64> {
    let p = x.n_cols() + 1;
    let design = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            x.get(i, j - 1)
        }
    };
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (i, &target) in y.iter().enumerate() {
        for a in 0..p {
            xty[a] += design(i, a) * target;
            for (b, cell) in xtx[a].iter_mut().enumerate() {
                *cell += design(i, a) * design(i, b);
            }
        }
    }
    let inv = gauss_jordan_inverse(xtx);
    (0..p)
        .map(|a| (0..p).map(|b| inv[a][b] * xty[b]).sum())
        .collect()
}

fn gauss_jordan_inverse(mut m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("nonempty");
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = m[col][col];
        assert!(scale.abs() > 1e-12, "singular normal equations");
        for j in 0..n {
            m[col][j] /= scale;
            inv[col][j] /= scale;
        }
        for row in 0..n {
            if row != col {
                let factor = m[row][col];
                for j in 0..n {
                    m[row][j] -= factor * m[col][j];
                    inv[row][j] -= factor * inv[col][j];
                }
            }
        }
    }
    inv
}

/// The corrected variance of the learner mean, written out directly.
pub fn corrected_variance_direct(values: &[f64], c: f64) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (1.0 / k + c) * ss / (k - 1.0)
}

/// Lanczos approximation of ln Gamma.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut series = 1.000000000190015;
    for (i, &c) in COEFFS.iter().enumerate() {
        series += c / (x + i as f64 + 1.0);
    }
    let tmp = x + 5.5;
    (x + 0.5) * tmp.ln() - tmp + (2.5066282746310005 * series / x).ln()
}

fn t_pdf(t: f64, df: f64) -> f64 {
    let ln_norm =
        ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_norm - (df + 1.0) / 2.0 * (1.0 + t * t / df).ln()).exp()
}

/// `P(T <= x)` for `x >= 0` by composite Simpson integration of the density.
fn t_cdf_simpson(x: f64, df: f64) -> f64 {
    assert!(x >= 0.0);
    let steps = 20_000;
    let h = x / steps as f64;
    let mut acc = t_pdf(0.0, df) + t_pdf(x, df);
    for i in 1..steps {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * t_pdf(i as f64 * h, df);
    }
    0.5 + acc * h / 3.0
}

/// Quantile of the t distribution by bisection on the integrated density.
pub fn t_quantile_by_integration(prob: f64, df: f64) -> f64 {
    assert!(prob > 0.0 && prob < 1.0);
    if prob < 0.5 {
        return -t_quantile_by_integration(1.0 - prob, df);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while t_cdf_simpson(hi, df) < prob {
        hi *= 2.0;
        assert!(hi < 1e9, "quantile bracket exploded");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf_simpson(mid, df) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}
