//! Multiple imputation by chained equations, with predictive mean matching
//! or random-forest draws.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::data::Dataset;
use crate::error::Result;
use crate::imputation::{predictors_for, visit_order, MultipleImputation};
use crate::matrix::FeatureMatrix;
use crate::models::{fit_ols, fit_rf, RfParams};
use crate::seed::SeedSpec;

struct Working {
    values: Vec<f64>, // row-major
    p: usize,
}

impl Working {
    fn matrix(&self, cols: &[usize], rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix::from_columns(
            cols.iter()
                .map(|&j| rows.iter().map(|&i| self.values[i * self.p + j]).collect())
                .collect(),
        )
    }
}

struct ColumnTask {
    col: usize,
    rows_obs: Vec<usize>,
    rows_mis: Vec<usize>,
    y_obs: Vec<f64>,
    predictors: Vec<usize>,
}

fn column_tasks(d: &Dataset) -> Vec<ColumnTask> {
    visit_order(d)
        .into_iter()
        .map(|j| {
            let rows_obs = d.observed_rows_of(j);
            let y_obs = rows_obs.iter().map(|&i| d.value(i, j)).collect();
            ColumnTask {
                col: j,
                rows_obs: rows_obs.clone(),
                rows_mis: d.missing_rows_of(j),
                y_obs,
                predictors: predictors_for(d, j),
            }
        })
        .collect()
}

/// Initialize a chain: missing cells start as uniform draws from the
/// column's observed values.
fn init_chain(d: &Dataset, tasks: &[ColumnTask], rng: &mut ChaCha12Rng) -> Working {
    let n = d.n_rows();
    let p = d.n_cols();
    let mut values = vec![0.0; n * p];
    for i in 0..n {
        for j in 0..p {
            if d.is_observed(i, j) {
                values[i * p + j] = d.value(i, j);
            }
        }
    }
    for task in tasks {
        for &i in &task.rows_mis {
            let pick = rng.random_range(0..task.y_obs.len());
            values[i * p + task.col] = task.y_obs[pick];
        }
    }
    Working { values, p }
}

/// Run `m` independent chains with `n_iter` sweeps each; `update` refills
/// one column's missing cells from its current regression.
fn run_chains(
    d: &Dataset,
    m: usize,
    n_iter: usize,
    seed: &SeedSpec,
    update: impl Fn(
        &mut Working,
        &ColumnTask,
        &SeedSpec,
        &mut ChaCha12Rng,
        &mut Vec<String>,
    ) -> Result<()>,
) -> Result<MultipleImputation> {
    let tasks = column_tasks(d);
    let mut completed = Vec::with_capacity(m);
    let mut warnings = Vec::new();
    for chain in 0..m {
        let chain_seed = seed.child("chain", chain as u64);
        let mut rng = chain_seed.child("draws", 0).rng();
        let mut work = init_chain(d, &tasks, &mut rng);
        for sweep in 0..n_iter {
            for (ci, task) in tasks.iter().enumerate() {
                let fit_seed = chain_seed
                    .child("sweep", sweep as u64)
                    .child("col", ci as u64);
                update(&mut work, task, &fit_seed, &mut rng, &mut warnings)?;
            }
        }
        completed.push(Dataset::complete(
            work.values,
            d.col_names().to_vec(),
            d.target_idx(),
        )?);
    }
    Ok(MultipleImputation {
        completed,
        warnings,
    })
}

/// MICE with predictive mean matching (type-1 matching): observed rows are
/// scored with coefficients fit on the observed rows, missing rows with
/// coefficients fit on a bootstrap resample of them, and each missing cell
/// copies one of the `donors` observed values with the closest score.
pub fn impute_mice_pmm(
    d: &Dataset,
    m: usize,
    n_iter: usize,
    donors: usize,
    seed: &SeedSpec,
) -> Result<MultipleImputation> {
    run_chains(
        d,
        m,
        n_iter,
        seed,
        |work, task, _fit_seed, rng, warnings| {
            let n_obs = task.rows_obs.len();
            let x_obs = work.matrix(&task.predictors, &task.rows_obs);
            let beta_hat = fit_ols(&x_obs, &task.y_obs)?;

            // parameter draw via bootstrap of the observed rows
            let boot: Vec<usize> = (0..n_obs).map(|_| rng.random_range(0..n_obs)).collect();
            let x_boot = x_obs.select_rows(&boot);
            let y_boot: Vec<f64> = boot.iter().map(|&i| task.y_obs[i]).collect();
            let beta_star = fit_ols(&x_boot, &y_boot)?;

            let pool = donors.min(n_obs);
            if pool < donors {
                warnings.push(format!(
                    "pmm donor pool reduced to {pool} for column {}",
                    task.col
                ));
            }

            // observed scores sorted once; each missing score takes its `pool`
            // nearest neighbours by two-pointer expansion
            let pred_obs = beta_hat.predict(&x_obs);
            let mut scored: Vec<(f64, usize)> = pred_obs.iter().cloned().zip(0..n_obs).collect();
            scored.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite pmm scores"));

            let x_mis = work.matrix(&task.predictors, &task.rows_mis);
            let pred_mis = beta_star.predict(&x_mis);
            for (&row, target) in task.rows_mis.iter().zip(pred_mis) {
                let start = scored.partition_point(|&(s, _)| s < target);
                let (mut lo, mut hi) = (start, start); // candidates are [lo, hi)
                while hi - lo < pool {
                    let take_left = match (lo > 0, hi < n_obs) {
                        (true, true) => {
                            (target - scored[lo - 1].0).abs() <= (scored[hi].0 - target).abs()
                        }
                        (true, false) => true,
                        (false, true) => false,
                        (false, false) => unreachable!("pool bounded by n_obs"),
                    };
                    if take_left {
                        lo -= 1;
                    } else {
                        hi += 1;
                    }
                }
                let donor = scored[lo + rng.random_range(0..pool)].1;
                work.values[row * work.p + task.col] = task.y_obs[donor];
            }
            Ok(())
        },
    )
}

/// MICE with random-forest draws: each missing cell routes through one
/// uniformly chosen tree and copies a uniformly chosen in-bag response from
/// the leaf it lands in.
pub fn impute_mice_rf(
    d: &Dataset,
    m: usize,
    n_iter: usize,
    n_trees: usize,
    seed: &SeedSpec,
) -> Result<MultipleImputation> {
    let params = RfParams {
        n_trees,
        ..RfParams::default()
    };
    run_chains(
        d,
        m,
        n_iter,
        seed,
        move |work, task, fit_seed, rng, _warnings| {
            let x_obs = work.matrix(&task.predictors, &task.rows_obs);
            let forest = fit_rf(&x_obs, &task.y_obs, &params, fit_seed)?;
            let x_mis = work.matrix(&task.predictors, &task.rows_mis);
            for (pos, &row) in task.rows_mis.iter().enumerate() {
                let tree = rng.random_range(0..n_trees);
                let leaf_rows = forest.leaf_in_bag_rows(tree, &|j| x_mis.get(pos, j));
                let donor = leaf_rows[rng.random_range(0..leaf_rows.len())];
                work.values[row * work.p + task.col] = task.y_obs[donor];
            }
            Ok(())
        },
    )
}
