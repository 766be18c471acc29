//! Small numeric helpers shared across modules.

use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};

pub fn mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "mean of empty slice");
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (denominator k-1). Zero for a single value.
pub fn sample_variance(values: &[f64]) -> f64 {
    let k = values.len();
    assert!(k >= 1, "variance of empty slice");
    if k < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (k as f64 - 1.0)
}

pub fn mse(truth: &[f64], pred: &[f64]) -> f64 {
    assert_eq!(truth.len(), pred.len());
    assert!(!truth.is_empty());
    truth
        .iter()
        .zip(pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / truth.len() as f64
}

/// Quantile of the Student t distribution with `df` degrees of freedom.
///
/// Inverts the incomplete-beta-based CDF by bracketed Newton iteration; the
/// library's own generic inversion is only accurate to roughly 1e-4, which
/// is not enough here.
pub fn t_quantile(prob: f64, df: f64) -> f64 {
    assert!(prob > 0.0 && prob < 1.0, "quantile prob out of (0,1)");
    assert!(df > 0.0, "degrees of freedom must be positive");
    if prob == 0.5 {
        return 0.0;
    }
    if prob < 0.5 {
        return -t_quantile(1.0 - prob, df);
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");

    // initial guess from the library inversion, then a bracket around it
    let mut x = dist.inverse_cdf(prob);
    let mut lo = x - 1.0;
    let mut hi = x + 1.0;
    while dist.cdf(lo) > prob {
        lo -= 1.0;
    }
    while dist.cdf(hi) < prob {
        hi += 1.0;
    }
    for _ in 0..200 {
        let f = dist.cdf(x) - prob;
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let d = dist.pdf(x);
        let mut next = x - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-12 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mean_and_variance_basics() {
        assert_abs_diff_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_abs_diff_eq!(sample_variance(&[0.0, 2.0]), 2.0);
        assert_abs_diff_eq!(sample_variance(&[5.0]), 0.0);
    }

    #[test]
    fn t_quantile_reference_values() {
        // classical table values
        assert_abs_diff_eq!(t_quantile(0.975, 19.0), 2.093024, epsilon = 1e-5);
        assert_abs_diff_eq!(t_quantile(0.975, 1.0), 12.7062, epsilon = 1e-3);
        // large df approaches the normal quantile
        assert_abs_diff_eq!(t_quantile(0.975, 1e6), 1.959964, epsilon = 1e-4);
        // symmetry
        assert_abs_diff_eq!(
            t_quantile(0.025, 7.0),
            -t_quantile(0.975, 7.0),
            epsilon = 1e-10
        );
    }
}
