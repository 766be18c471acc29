//! Injects missing values into complete data under MCAR, MAR and MNAR.
//!
//! All three mechanisms delete an exact count `round(n * proportion)` of
//! cells per amputed feature column. MAR and MNAR use rank weighting: the
//! larger a row's controlling value, the more likely the row's cell is
//! deleted. The target column is never amputed.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl Mechanism {
    pub fn label(&self) -> &'static str {
        match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Mnar => "mnar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissSpec {
    pub mechanism: Mechanism,
    pub proportion: f64,
}

impl MissSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.proportion > 0.0 && self.proportion < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "missingness proportion must be in (0,1), got {}",
                self.proportion
            )));
        }
        Ok(())
    }
}

/// Control/target split used by MAR: control columns stay fully observed
/// and drive the deletion pattern of their paired target columns.
///
/// Indices are positions into the dataset's feature-column list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarAssignment {
    pub control: Vec<usize>,
    pub target: Vec<usize>,
    /// Per target column, the paired control column.
    pub pairing: Vec<(usize, usize)>,
}

/// Randomly split `p` feature columns into a control half and a target half
/// and pair each target with a uniformly chosen control. With odd `p` the
/// control half gets the extra column, so controls can stay observed.
pub fn mar_assignment(p: usize, seed: &SeedSpec) -> Result<MarAssignment> {
    if p < 2 {
        return Err(Error::InvalidSpec(format!(
            "MAR needs at least 2 feature columns, got {p}"
        )));
    }
    let mut rng = seed.rng();
    let mut perm: Vec<usize> = (0..p).collect();
    // Fisher-Yates
    for i in (1..p).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let n_control = p.div_ceil(2);
    let mut control: Vec<usize> = perm[..n_control].to_vec();
    let mut target: Vec<usize> = perm[n_control..].to_vec();
    control.sort_unstable();
    target.sort_unstable();
    let pairing = target
        .iter()
        .map(|&t| (t, control[rng.random_range(0..control.len())]))
        .collect();
    Ok(MarAssignment {
        control,
        target,
        pairing,
    })
}

/// Mid-ranks (1-based, ties averaged).
fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // average of 1-based ranks i+1 ..= j+1
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Weighted sampling without replacement: `count` indices, probability of
/// each successive draw proportional to its weight (exponential-key method).
fn weighted_sample_without_replacement(
    weights: &[f64],
    count: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    debug_assert!(count <= weights.len());
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random();
            (u.ln() / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite keys"));
    keyed[..count].iter().map(|&(_, i)| i).collect()
}

/// Delete `round(n * proportion)` cells per amputed feature column.
///
/// MCAR amputes every feature column uniformly; MNAR amputes every feature
/// column with rank weights from the column itself; MAR amputes the target
/// half with rank weights from the paired control column.
pub fn ampute(d: &Dataset, spec: &MissSpec, seed: &SeedSpec) -> Result<Dataset> {
    spec.validate()?;
    if !d.is_fully_observed() {
        return Err(Error::InvalidSpec(
            "ampute requires fully observed input".to_owned(),
        ));
    }
    let n = d.n_rows();
    let n_miss = (n as f64 * spec.proportion).round() as usize;
    if n_miss < 1 {
        return Err(Error::InvalidSpec(format!(
            "proportion {} deletes no cells at n={n}",
            spec.proportion
        )));
    }
    if n_miss >= n {
        return Err(Error::InvalidSpec(format!(
            "proportion {} leaves no observed cells at n={n}",
            spec.proportion
        )));
    }

    let features = d.feature_indices();
    let mut cells: Vec<(usize, usize)> = Vec::new();
    match spec.mechanism {
        Mechanism::Mcar => {
            for (fpos, &col) in features.iter().enumerate() {
                let mut rng = seed.child("mcar_col", fpos as u64).rng();
                for i in index::sample(&mut rng, n, n_miss) {
                    cells.push((i, col));
                }
            }
        }
        Mechanism::Mnar => {
            for (fpos, &col) in features.iter().enumerate() {
                let mut rng = seed.child("mnar_col", fpos as u64).rng();
                let values: Vec<f64> = (0..n).map(|i| d.value(i, col)).collect();
                let w = ranks(&values);
                for i in weighted_sample_without_replacement(&w, n_miss, &mut rng) {
                    cells.push((i, col));
                }
            }
        }
        Mechanism::Mar => {
            let assignment = mar_assignment(features.len(), &seed.child("mar_assignment", 0))?;
            for (k, &(tpos, cpos)) in assignment.pairing.iter().enumerate() {
                let mut rng = seed.child("mar_col", k as u64).rng();
                let control_col = features[cpos];
                let values: Vec<f64> = (0..n).map(|i| d.value(i, control_col)).collect();
                let w = ranks(&values);
                let target_col = features[tpos];
                for i in weighted_sample_without_replacement(&w, n_miss, &mut rng) {
                    cells.push((i, target_col));
                }
            }
        }
    }
    d.with_masked_cells(&cells)
}
