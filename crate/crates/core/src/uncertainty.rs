//! Resampling plans, learner-level variance estimation with the
//! test/train-overlap correction, t-based confidence intervals, and Rubin's
//! rules for pooling across multiple imputations.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::stats;

/// Degrees-of-freedom cap used when the between-imputation variance is zero.
const DF_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum ResampleStrategy {
    Bootstrap,
    Subsample {
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
    },
}

fn default_train_fraction() -> f64 {
    0.632
}

impl ResampleStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            ResampleStrategy::Bootstrap => "bootstrap",
            ResampleStrategy::Subsample { .. } => "subsample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    #[serde(flatten)]
    pub strategy: ResampleStrategy,
    /// Resampling iterations drawn.
    pub k: usize,
    /// Model refits actually used (first `refits_used` of the `k` draws).
    pub refits_used: usize,
}

impl ResampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidSpec(format!(
                "resampling needs k >= 2, got {}",
                self.k
            )));
        }
        if self.refits_used < 2 || self.refits_used > self.k {
            return Err(Error::InvalidSpec(format!(
                "refits_used must be in 2..=k, got {} (k={})",
                self.refits_used, self.k
            )));
        }
        if let ResampleStrategy::Subsample { train_fraction } = self.strategy {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "subsample train fraction must be in (0,1), got {train_fraction}"
                )));
            }
        }
        Ok(())
    }
}

/// Whether the learner variance uses the test/train correction term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceMode {
    pub adjusted: bool,
}

/// One train/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplePair {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draw `k` train/test pairs. Bootstrap: train is `n` draws with
/// replacement, test the out-of-bag rows (redrawn if empty). Subsample:
/// train is `floor(fraction * n)` rows without replacement, test the
/// complement.
pub fn resample_indices(
    n: usize,
    spec: &ResampleSpec,
    seed: &SeedSpec,
) -> Result<Vec<ResamplePair>> {
    spec.validate()?;
    if n < 10 {
        return Err(Error::InvalidSpec(format!(
            "resampling needs n >= 10, got {n}"
        )));
    }
    let mut pairs = Vec::with_capacity(spec.k);
    for j in 0..spec.k {
        let mut rng = seed.child("resample_pair", j as u64).rng();
        let pair = match spec.strategy {
            ResampleStrategy::Bootstrap => loop {
                let mut in_bag = vec![false; n];
                let train: Vec<usize> = (0..n)
                    .map(|_| {
                        let i = rng.random_range(0..n);
                        in_bag[i] = true;
                        i
                    })
                    .collect();
                let test: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
                if !test.is_empty() {
                    break ResamplePair { train, test };
                }
            },
            ResampleStrategy::Subsample { train_fraction } => {
                let n_train = ((train_fraction * n as f64).floor() as usize).max(1);
                let mut train: Vec<usize> = index::sample(&mut rng, n, n_train).into_vec();
                train.sort_unstable();
                let mut in_train = vec![false; n];
                for &i in &train {
                    in_train[i] = true;
                }
                let test: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
                ResamplePair { train, test }
            }
        };
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Average of the per-refit explanations.
pub fn learner_mean(values: &[f64]) -> f64 {
    stats::mean(values)
}

/// Variance of the learner mean: `(1/k + c) * sample_variance(values)`.
/// `c = 0` recovers the textbook estimator for independent refits; for
/// overlapping resamples `c = n_test / n_train` counteracts the correlation
/// between refits.
pub fn learner_variance(values: &[f64], c: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidSpec(
            "learner variance needs at least 2 refits".into(),
        ));
    }
    if c < 0.0 {
        return Err(Error::InvalidSpec(format!(
            "correction term must be nonnegative, got {c}"
        )));
    }
    let k = values.len() as f64;
    Ok((1.0 / k + c) * stats::sample_variance(values))
}

/// The correction term `c = n_test / n_train` for the realized plan:
/// the deterministic split ratio under subsampling, the mean out-of-bag
/// fraction under bootstrap. Zero in unadjusted mode.
pub fn correction_c(
    spec: &ResampleSpec,
    n: usize,
    pairs: &[ResamplePair],
    mode: VarianceMode,
) -> f64 {
    if !mode.adjusted {
        return 0.0;
    }
    match spec.strategy {
        ResampleStrategy::Subsample { train_fraction } => {
            let n_train = ((train_fraction * n as f64).floor() as usize).max(1);
            (n - n_train) as f64 / n_train as f64
        }
        ResampleStrategy::Bootstrap => {
            assert!(
                !pairs.is_empty(),
                "bootstrap correction needs realized pairs"
            );
            let mean_test =
                pairs.iter().map(|p| p.test.len() as f64).sum::<f64>() / pairs.len() as f64;
            mean_test / n as f64
        }
    }
}

/// Mean and corrected variance of one refit series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerEstimate {
    pub mean: f64,
    pub variance: f64,
    pub k_used: usize,
    pub c: f64,
}

impl LearnerEstimate {
    pub fn from_values(values: &[f64], c: f64) -> Result<Self> {
        Ok(LearnerEstimate {
            mean: learner_mean(values),
            variance: learner_variance(values, c)?,
            k_used: values.len(),
            c,
        })
    }
}

/// Two-sided t interval `mean +- t_{1-alpha/2, df} * sqrt(variance)`.
pub fn ci_t(mean: f64, variance: f64, df: f64, alpha: f64) -> (f64, f64) {
    assert!(variance >= 0.0, "negative variance");
    assert!(df > 0.0, "degrees of freedom must be positive");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha out of (0,1)");
    if variance == 0.0 {
        return (mean, mean);
    }
    let half = stats::t_quantile(1.0 - alpha / 2.0, df) * variance.sqrt();
    (mean - half, mean + half)
}

/// A pooled point estimate with its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledEstimate {
    pub point: f64,
    pub variance: f64,
    pub df: f64,
    pub ci: (f64, f64),
    pub alpha: f64,
}

impl PooledEstimate {
    pub fn width(&self) -> f64 {
        self.ci.1 - self.ci.0
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci.0 <= value && value <= self.ci.1
    }
}

/// Rubin's rules: total variance `T = W + (1 + 1/m) B` with within-variance
/// `W` and between-variance `B`, and the classical degrees of freedom
/// `(m-1) (1 + W / ((1+1/m) B))^2`.
pub fn rubin_pool(points: &[f64], variances: &[f64], alpha: f64) -> Result<PooledEstimate> {
    let m = points.len();
    if m < 2 || variances.len() != m {
        return Err(Error::InvalidSpec(format!(
            "rubin pooling needs m >= 2 points with matching variances, got {m}/{}",
            variances.len()
        )));
    }
    if variances.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidSpec("negative within-variance".into()));
    }
    let mf = m as f64;
    let q_bar = stats::mean(points);
    let w = stats::mean(variances);
    let b = stats::sample_variance(points);
    let infl = 1.0 + 1.0 / mf;
    let total = w + infl * b;
    let df = if b > 0.0 {
        ((mf - 1.0) * (1.0 + w / (infl * b)).powi(2)).min(DF_CAP)
    } else {
        DF_CAP
    };
    Ok(PooledEstimate {
        point: q_bar,
        variance: total,
        df,
        ci: ci_t(q_bar, total, df, alpha),
        alpha,
    })
}

/// Pool an `m x k` matrix of per-imputation, per-refit explanation values:
/// per imputation the learner mean and corrected variance, then Rubin's
/// rules across imputations. `c` carries the per-imputation correction term
/// (one entry broadcast to all imputations, or one per imputation).
pub fn mi_learner_estimate(
    per_imputation_values: &[Vec<f64>],
    c: &[f64],
    alpha: f64,
) -> Result<PooledEstimate> {
    let m = per_imputation_values.len();
    if m < 2 {
        return Err(Error::InvalidSpec(
            "mi_learner_estimate needs m >= 2 imputations".into(),
        ));
    }
    let k = per_imputation_values[0].len();
    if per_imputation_values.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidSpec("ragged refit matrix".into()));
    }
    if c.len() != 1 && c.len() != m {
        return Err(Error::InvalidSpec(format!(
            "correction terms must broadcast: got {} for m={m}",
            c.len()
        )));
    }
    let mut points = Vec::with_capacity(m);
    let mut variances = Vec::with_capacity(m);
    for (d, row) in per_imputation_values.iter().enumerate() {
        let cd = if c.len() == 1 { c[0] } else { c[d] };
        let est = LearnerEstimate::from_values(row, cd)?;
        points.push(est.mean);
        variances.push(est.variance);
    }
    rubin_pool(&points, &variances, alpha)
}

/// Single-imputation path: learner mean and corrected variance over the
/// refits, interval on `k - 1` degrees of freedom.
pub fn single_learner_estimate(values: &[f64], c: f64, alpha: f64) -> Result<PooledEstimate> {
    let est = LearnerEstimate::from_values(values, c)?;
    let df = est.k_used as f64 - 1.0;
    Ok(PooledEstimate {
        point: est.mean,
        variance: est.variance,
        df,
        ci: ci_t(est.mean, est.variance, df, alpha),
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn boot_spec(k: usize) -> ResampleSpec {
        ResampleSpec {
            strategy: ResampleStrategy::Bootstrap,
            k,
            refits_used: k,
        }
    }

    fn sub_spec(k: usize) -> ResampleSpec {
        ResampleSpec {
            strategy: ResampleStrategy::Subsample {
                train_fraction: 0.632,
            },
            k,
            refits_used: k,
        }
    }

    #[test]
    fn subsample_sizes_are_deterministic() {
        let pairs = resample_indices(1000, &sub_spec(5), &SeedSpec::new(1)).unwrap();
        for p in &pairs {
            assert_eq!(p.train.len(), 632);
            assert_eq!(p.test.len(), 368);
        }
    }

    #[test]
    fn train_and_test_are_disjoint() {
        for spec in [boot_spec(10), sub_spec(10)] {
            let pairs = resample_indices(200, &spec, &SeedSpec::new(2)).unwrap();
            for p in &pairs {
                let test: std::collections::HashSet<_> = p.test.iter().collect();
                assert!(p.train.iter().all(|i| !test.contains(i)));
                assert!(!p.test.is_empty());
            }
        }
    }

    #[test]
    fn bootstrap_oob_size_matches_expectation() {
        // E|test| = n (1 - 1/n)^n ~ n/e
        let n = 1000;
        let pairs = resample_indices(n, &boot_spec(200), &SeedSpec::new(3)).unwrap();
        let mean_test = pairs.iter().map(|p| p.test.len() as f64).sum::<f64>() / 200.0;
        assert_abs_diff_eq!(mean_test, 368.0, epsilon = 15.0);
    }

    #[test]
    fn learner_estimate_bundles_mean_and_variance() {
        let est = LearnerEstimate::from_values(&[0.0, 2.0], 0.5).unwrap();
        assert_abs_diff_eq!(est.mean, 1.0);
        assert_abs_diff_eq!(est.variance, 2.0);
        assert_eq!(est.k_used, 2);
        assert_eq!(est.c, 0.5);
    }

    #[test]
    fn learner_variance_arithmetic() {
        assert_abs_diff_eq!(learner_variance(&[0.0, 2.0], 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(learner_variance(&[0.0, 2.0], 0.5).unwrap(), 2.0);
        assert!(learner_variance(&[1.0], 0.0).is_err());
    }

    #[test]
    fn adjusted_variance_dominates_unadjusted() {
        let values = [0.3, -1.2, 0.9, 2.4, 0.0];
        let unadj = learner_variance(&values, 0.0).unwrap();
        let adj = learner_variance(&values, 368.0 / 632.0).unwrap();
        assert!(adj > unadj);
    }

    #[test]
    fn correction_terms() {
        let spec = sub_spec(5);
        let pairs = resample_indices(1000, &spec, &SeedSpec::new(4)).unwrap();
        let c = correction_c(&spec, 1000, &pairs, VarianceMode { adjusted: true });
        assert_abs_diff_eq!(c, 368.0 / 632.0, epsilon = 1e-12);
        assert_eq!(
            correction_c(&spec, 1000, &pairs, VarianceMode { adjusted: false }),
            0.0
        );

        let bspec = boot_spec(50);
        let bpairs = resample_indices(1000, &bspec, &SeedSpec::new(5)).unwrap();
        let cb = correction_c(&bspec, 1000, &bpairs, VarianceMode { adjusted: true });
        assert_abs_diff_eq!(cb, 0.368, epsilon = 0.03);
    }

    #[test]
    fn ci_basics() {
        assert_eq!(ci_t(1.5, 0.0, 10.0, 0.05), (1.5, 1.5));
        let (lo, hi) = ci_t(0.0, 1.0, 19.0, 0.05);
        assert_abs_diff_eq!(hi, 2.0930, epsilon = 1e-3);
        assert_abs_diff_eq!(lo, -hi, epsilon = 1e-12);
        // shrinking alpha widens the interval monotonically
        let mut last = 0.0;
        for alpha in [0.5, 0.2, 0.1, 0.05, 0.01] {
            let (_, hi) = ci_t(0.0, 1.0, 19.0, alpha);
            assert!(hi > last);
            last = hi;
        }
    }

    #[test]
    fn rubin_pool_hand_example() {
        let est = rubin_pool(&[1.0, 2.0], &[0.5, 0.5], 0.05).unwrap();
        assert_abs_diff_eq!(est.point, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(est.variance, 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(est.df, 25.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn rubin_pool_degenerate_between_variance() {
        let est = rubin_pool(&[2.0, 2.0, 2.0], &[0.4, 0.4, 0.4], 0.05).unwrap();
        assert_abs_diff_eq!(est.variance, 0.4, epsilon = 1e-15);
        assert_eq!(est.df, DF_CAP);
        let expected = ci_t(2.0, 0.4, DF_CAP, 0.05);
        assert_eq!(est.ci, expected);
    }

    #[test]
    fn pooled_variance_dominates_within_and_between() {
        let points = [0.1, 0.8, -0.3, 0.5];
        let vars = [0.2, 0.3, 0.25, 0.15];
        let est = rubin_pool(&points, &vars, 0.05).unwrap();
        let w = crate::stats::mean(&vars);
        let b = crate::stats::sample_variance(&points);
        assert!(est.variance >= w);
        assert!(est.variance >= b);
    }

    #[test]
    fn mi_estimate_duplicate_imputations() {
        let rows = vec![vec![0.0, 2.0], vec![0.0, 2.0]];
        let est = mi_learner_estimate(&rows, &[0.0], 0.05).unwrap();
        assert_abs_diff_eq!(est.point, 1.0, epsilon = 1e-15);
        // B = 0: total variance is the within part only
        assert_abs_diff_eq!(est.variance, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mi_estimate_hand_example() {
        let rows = vec![vec![0.0, 2.0], vec![2.0, 4.0]];
        let est = mi_learner_estimate(&rows, &[0.0], 0.05).unwrap();
        assert_abs_diff_eq!(est.point, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(est.variance, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn mi_estimate_rejects_ragged_input() {
        let rows = vec![vec![0.0, 2.0], vec![1.0]];
        assert!(mi_learner_estimate(&rows, &[0.0], 0.05).is_err());
    }

    #[test]
    fn coverage_calibration_ideal_setting() {
        // independent splits from N(0,1): the t interval on the mean of the
        // split means is exact, so empirical coverage must sit at 1 - alpha
        use rand_distr::{Distribution, StandardNormal};
        let replications = 2000;
        let k = 10;
        let split_size = 25;
        let mut covered = 0;
        for r in 0..replications {
            let mut rng = SeedSpec::new(2024).child("rep", r).rng();
            let means: Vec<f64> = (0..k)
                .map(|_| {
                    let s: f64 = (0..split_size)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            z
                        })
                        .sum();
                    s / split_size as f64
                })
                .collect();
            let est = single_learner_estimate(&means, 0.0, 0.05).unwrap();
            if est.covers(0.0) {
                covered += 1;
            }
        }
        let coverage = covered as f64 / replications as f64;
        assert_abs_diff_eq!(coverage, 0.95, epsilon = 0.02);
    }
}
