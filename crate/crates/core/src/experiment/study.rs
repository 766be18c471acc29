//! Ground truth, replications, scoring, and the resumable study driver.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::experiment::pipeline::{pool_estimates, run_pipeline};
use crate::experiment::{
    layout_for, ComponentKey, ComponentLayout, ExperimentConfig, ExplainerKind,
};
use crate::missingness;
use crate::uncertainty::PooledEstimate;

/// Expected learner-level explanation values per component, simulated on
/// complete data.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub values: Vec<f64>,
}

fn component_label(key: &ComponentKey, layout: &ComponentLayout) -> String {
    let feature = &layout.feature_names()[key.feature];
    match key.grid_index {
        Some(g) => format!("{feature}@{g:02}"),
        None => feature.clone(),
    }
}

fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut acc, b| {
            acc.push_str(&format!("{b:02x}"));
            acc
        })
}

/// Hash identifying the ground-truth-relevant part of a config.
pub fn ground_truth_hash(config: &ExperimentConfig) -> String {
    let key = config.ground_truth_key();
    sha256_hex(&serde_json::to_string(&key).expect("serializable key"))
}

/// Hash of the full config (manifest bookkeeping).
pub fn config_hash(config: &ExperimentConfig) -> String {
    sha256_hex(&serde_json::to_string(config).expect("serializable config"))
}

/// Simulate the expected learner explanation on complete data: per
/// replication, sample, resample, fit and explain, then average the learner
/// means over all replications.
pub fn compute_ground_truth(
    config: &ExperimentConfig,
    layout: &ComponentLayout,
) -> Result<GroundTruth> {
    config.validate()?;
    let master = config.master_seed();
    let refits = config.resample.refits_used;
    let per_rep: Vec<Result<Vec<f64>>> = (0..config.ground_truth_replications)
        .into_par_iter()
        .map(|r| {
            let seed = master.child("ground_truth", r as u64);
            let data = crate::dgp::sample(&config.dgp, config.n, &seed.child("data", 0))?;
            let out = run_pipeline(
                &[data],
                &config.learner,
                &config.resample,
                layout,
                config.pfi_permutations,
                refits,
                &seed.child("pipeline", 0),
            )?;
            let mut means = vec![0.0; layout.n_components()];
            for refit in &out.values[0] {
                for (m, v) in means.iter_mut().zip(refit) {
                    *m += v;
                }
            }
            let scale = 1.0 / out.values[0].len() as f64;
            means.iter_mut().for_each(|m| *m *= scale);
            Ok(means)
        })
        .collect();

    let mut total = vec![0.0; layout.n_components()];
    let mut count = 0usize;
    for rep in per_rep {
        let means = rep?;
        for (t, m) in total.iter_mut().zip(&means) {
            *t += m;
        }
        count += 1;
    }
    let scale = 1.0 / count as f64;
    total.iter_mut().for_each(|t| *t *= scale);
    Ok(GroundTruth { values: total })
}

/// One replication of the full pipeline: sample, ampute, impute, resample,
/// fit, explain, pool. Returns pooled estimates per refit count in
/// `config.refit_counts()` order.
pub fn run_replication(
    config: &ExperimentConfig,
    layout: &ComponentLayout,
    replication: usize,
) -> Result<Vec<Vec<PooledEstimate>>> {
    let seed = config
        .master_seed()
        .child("replication", replication as u64);
    let data = crate::dgp::sample(&config.dgp, config.n, &seed.child("data", 0))?;
    let amputed = match &config.miss {
        Some(miss) => missingness::ampute(&data, miss, &seed.child("ampute", 0))?,
        None => data,
    };
    let completed: Vec<Dataset> = match &config.imputer {
        Some(imputer) => {
            imputer
                .impute(&amputed, &seed.child("impute", 0))?
                .completed
        }
        None => {
            if !amputed.is_fully_observed() {
                return Err(Error::InvalidSpec(
                    "incomplete data reached the fit stage without an imputer".into(),
                ));
            }
            vec![amputed]
        }
    };
    let refit_counts = config.refit_counts();
    let max_refits = *refit_counts.last().expect("nonempty refit counts");
    let out = run_pipeline(
        &completed,
        &config.learner,
        &config.resample,
        layout,
        config.pfi_permutations,
        max_refits,
        &seed.child("pipeline", 0),
    )?;
    refit_counts
        .iter()
        .map(|&k_used| {
            pool_estimates(
                &out,
                &config.resample,
                config.n,
                config.variance,
                config.alpha,
                k_used,
                layout,
            )
        })
        .collect()
}

/// Scored metrics for one component or aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub explainer: ExplainerKind,
    /// Component label: `x1@03` for a grid point, `x1` for a feature
    /// aggregate, `all` for the explainer aggregate.
    pub component: String,
    pub coverage: f64,
    pub avg_width: f64,
    /// Ground truth minus the mean point estimate: positive when the
    /// explanation is underestimated.
    pub bias: f64,
    pub n_completed: usize,
}

/// Score coverage, average interval width and bias per component against
/// the ground truth, then aggregate per feature (partial dependence averages
/// over its grid) and per explainer.
pub fn evaluate(
    estimates: &[&Vec<PooledEstimate>],
    gt: &GroundTruth,
    layout: &ComponentLayout,
) -> Result<Vec<MetricsRow>> {
    let n_reps = estimates.len();
    if n_reps == 0 {
        return Err(Error::InvalidSpec("no completed replications".into()));
    }
    let n_components = layout.n_components();
    for rep in estimates {
        if rep.len() != n_components {
            return Err(Error::DimensionMismatch(
                "estimate vector does not match component layout".into(),
            ));
        }
    }
    if gt.values.len() != n_components {
        return Err(Error::DimensionMismatch(
            "ground truth does not match component layout".into(),
        ));
    }

    let keys = layout.keys();
    let mut per_component = Vec::with_capacity(n_components);
    for c in 0..n_components {
        let truth = gt.values[c];
        let mut covered = 0usize;
        let mut width = 0.0;
        let mut point = 0.0;
        for rep in estimates {
            let e = &rep[c];
            if e.covers(truth) {
                covered += 1;
            }
            width += e.width();
            point += e.point;
        }
        per_component.push((
            covered as f64 / n_reps as f64,
            width / n_reps as f64,
            truth - point / n_reps as f64,
        ));
    }

    let mut rows = Vec::new();
    for &explainer in layout.explainers() {
        let idx: Vec<usize> = keys
            .iter()
            .enumerate()
            .filter(|(_, k)| k.explainer == explainer)
            .map(|(i, _)| i)
            .collect();
        // component rows
        for &i in &idx {
            let (coverage, avg_width, bias) = per_component[i];
            rows.push(MetricsRow {
                explainer,
                component: component_label(&keys[i], layout),
                coverage,
                avg_width,
                bias,
                n_completed: n_reps,
            });
        }
        // per-feature aggregates (the grid average) exist only where the
        // component rows are finer than one-per-feature
        let mut feature_rows = Vec::new();
        for f in 0..layout.n_features() {
            let fidx: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| keys[i].feature == f)
                .collect();
            let agg = aggregate(&per_component, &fidx);
            feature_rows.push(agg);
            if explainer == ExplainerKind::Pd {
                rows.push(MetricsRow {
                    explainer,
                    component: layout.feature_names()[f].clone(),
                    coverage: agg.0,
                    avg_width: agg.1,
                    bias: agg.2,
                    n_completed: n_reps,
                });
            }
        }
        // explainer aggregate: mean over the feature-level aggregates
        let all: Vec<usize> = (0..feature_rows.len()).collect();
        let agg = aggregate(&feature_rows, &all);
        rows.push(MetricsRow {
            explainer,
            component: "all".to_owned(),
            coverage: agg.0,
            avg_width: agg.1,
            bias: agg.2,
            n_completed: n_reps,
        });
    }
    Ok(rows)
}

fn aggregate(values: &[(f64, f64, f64)], idx: &[usize]) -> (f64, f64, f64) {
    let n = idx.len() as f64;
    let mut acc = (0.0, 0.0, 0.0);
    for &i in idx {
        acc.0 += values[i].0;
        acc.1 += values[i].1;
        acc.2 += values[i].2;
    }
    (acc.0 / n, acc.1 / n, acc.2 / n)
}

/// Number of result rows one setting contributes per refit count.
fn rows_per_refit_count(layout: &ComponentLayout) -> usize {
    let p = layout.n_features();
    layout
        .explainers()
        .iter()
        .map(|e| match e {
            ExplainerKind::Pd => {
                layout.grids().iter().map(|g| g.points.len()).sum::<usize>() + p + 1
            }
            ExplainerKind::Pfi | ExplainerKind::Shap => p + 1,
        })
        .sum()
}

/// Total result rows one setting contributes.
pub fn expected_result_rows(config: &ExperimentConfig) -> Result<usize> {
    let layout = layout_for(config)?;
    Ok(rows_per_refit_count(&layout) * config.refit_counts().len())
}

/// One named setting of a study grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySetting {
    pub id: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Default)]
pub struct StudyOptions {
    /// Reuse a previously computed ground-truth file; refused when its
    /// config hash matches no setting.
    pub ground_truth_file: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub results_path: PathBuf,
    pub rows_written: usize,
    pub settings_skipped: usize,
    /// `(setting id, explainer, refits_used, coverage, avg_width, bias)` of
    /// the per-explainer aggregate rows, for display.
    pub summary: Vec<(String, String, usize, f64, f64, f64)>,
}

const RESULTS_HEADER: &str = "setting,dgp,mechanism,proportion,imputer,learner,explainer,strategy,adjusted,refits_used,component,coverage,avg_width,bias,n_completed";

fn setting_row_prefix(setting: &StudySetting) -> String {
    let config = &setting.config;
    let (mechanism, proportion) = match &config.miss {
        Some(m) => (m.mechanism.label().to_owned(), m.proportion.to_string()),
        None => (String::new(), String::new()),
    };
    let imputer = config.imputer.as_ref().map_or("complete", |i| i.label());
    format!(
        "{},{},{},{},{},{},",
        setting.id,
        config.dgp.kind.label(),
        mechanism,
        proportion,
        imputer,
        config.learner.label()
    ) + &format!(
        "__EXPLAINER__,{},{},",
        config.resample.strategy.label(),
        config.variance.adjusted
    )
}

fn result_lines(setting: &StudySetting, refits_used: usize, rows: &[MetricsRow]) -> Vec<String> {
    let prefix_template = setting_row_prefix(setting);
    rows.iter()
        .map(|r| {
            let prefix = prefix_template.replace("__EXPLAINER__", r.explainer.label());
            format!(
                "{prefix}{refits_used},{},{},{},{},{}",
                r.component, r.coverage, r.avg_width, r.bias, r.n_completed
            )
        })
        .collect()
}

/// Write a ground-truth table: a hash comment line, then one row per
/// component in layout order.
pub fn write_ground_truth(
    path: &Path,
    hash: &str,
    gt: &GroundTruth,
    layout: &ComponentLayout,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# config_hash: {hash}\n"));
    out.push_str("explainer,component,value\n");
    for (key, value) in layout.keys().iter().zip(&gt.values) {
        out.push_str(&format!(
            "{},{},{}\n",
            key.explainer.label(),
            component_label(key, layout),
            value
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a ground-truth table back; returns its config hash and values in
/// file order.
pub fn read_ground_truth(path: &Path) -> Result<(String, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut hash = String::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix("# config_hash:") {
            hash = rest.trim().to_owned();
            continue;
        }
        if i <= 1 && line.starts_with("explainer,") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let value = line
            .rsplit(',')
            .next()
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidConfig(format!("bad ground-truth row: {line}")))?;
        values.push(value);
    }
    if hash.is_empty() {
        return Err(Error::InvalidConfig(
            "ground-truth file carries no config hash".into(),
        ));
    }
    Ok((hash, values))
}

/// Longest prefix of settings whose blocks are complete in an existing
/// results file; returns the retained lines and the prefix length.
fn resume_prefix(existing: &str, settings: &[StudySetting]) -> Result<(Vec<String>, usize)> {
    let mut lines = existing.lines();
    match lines.next() {
        Some(h) if h == RESULTS_HEADER => {}
        _ => return Ok((Vec::new(), 0)),
    }
    let body: Vec<&str> = lines.collect();
    let mut retained = Vec::new();
    let mut cursor = 0usize;
    let mut prefix_len = 0usize;
    for setting in settings {
        let expected = expected_result_rows(&setting.config)?;
        let block: Vec<&str> = body[cursor..]
            .iter()
            .take_while(|l| l.split(',').next() == Some(setting.id.as_str()))
            .copied()
            .collect();
        if block.len() != expected {
            break;
        }
        retained.extend(block.iter().map(|s| s.to_string()));
        cursor += expected;
        prefix_len += 1;
    }
    Ok((retained, prefix_len))
}

/// Run a grid of settings, writing `results.csv`, per-key ground-truth
/// files and `manifest.json` under `out_dir`. Completed settings found in
/// an existing results file are skipped, so interrupted studies resume.
pub fn run_study(
    settings: &[StudySetting],
    out_dir: &Path,
    options: &StudyOptions,
) -> Result<StudyOutcome> {
    if settings.is_empty() {
        return Err(Error::InvalidConfig("empty study grid".into()));
    }
    {
        let mut seen = std::collections::HashSet::new();
        for s in settings {
            s.config.validate()?;
            if !seen.insert(&s.id) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate setting id {}",
                    s.id
                )));
            }
            if s.id.contains(',') {
                return Err(Error::InvalidConfig(
                    "setting ids must not contain commas".into(),
                ));
            }
        }
    }
    fs::create_dir_all(out_dir)?;

    // manifest records the full grid and hashes
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "results": "results.csv",
        "settings": settings.iter().map(|s| serde_json::json!({
            "id": s.id,
            "config_hash": config_hash(&s.config),
            "ground_truth_hash": ground_truth_hash(&s.config),
            "config": s.config,
        })).collect::<Vec<_>>(),
    });
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;

    // external ground truth, if provided
    let mut gt_cache: HashMap<String, GroundTruth> = HashMap::new();
    if let Some(path) = &options.ground_truth_file {
        let (hash, values) = read_ground_truth(path)?;
        let matching = settings
            .iter()
            .find(|s| ground_truth_hash(&s.config) == hash);
        let setting = matching.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "ground-truth file {} matches no setting in this study",
                path.display()
            ))
        })?;
        let layout = layout_for(&setting.config)?;
        if values.len() != layout.n_components() {
            return Err(Error::InvalidConfig(format!(
                "ground-truth file has {} components, expected {}",
                values.len(),
                layout.n_components()
            )));
        }
        gt_cache.insert(hash, GroundTruth { values });
    }

    // resume: keep the longest complete prefix of an existing results file
    let results_path = out_dir.join("results.csv");
    let (retained, prefix_len) = match fs::read_to_string(&results_path) {
        Ok(existing) => resume_prefix(&existing, settings)?,
        Err(_) => (Vec::new(), 0),
    };
    let mut file_text = String::from(RESULTS_HEADER);
    file_text.push('\n');
    for line in &retained {
        file_text.push_str(line);
        file_text.push('\n');
    }
    fs::write(&results_path, &file_text)?;

    let mut file = fs::OpenOptions::new().append(true).open(&results_path)?;
    let mut rows_written = retained.len();
    let mut gt_file_index: HashMap<String, PathBuf> = HashMap::new();
    let distinct_gt: Vec<String> = {
        let mut seen = std::collections::HashSet::new();
        settings
            .iter()
            .map(|s| ground_truth_hash(&s.config))
            .filter(|h| seen.insert(h.clone()))
            .collect()
    };

    for (idx, setting) in settings.iter().enumerate() {
        if idx < prefix_len {
            continue;
        }
        let config = &setting.config;
        let layout = layout_for(config)?;
        let gt_hash = ground_truth_hash(config);

        // ground truth: external file, on-disk cache, or computed now
        let gt_path = if distinct_gt.len() == 1 {
            out_dir.join("ground_truth.csv")
        } else {
            out_dir.join(format!("ground_truth-{}.csv", &gt_hash[..8]))
        };
        if !gt_cache.contains_key(&gt_hash) {
            let from_disk = gt_path.exists().then(|| read_ground_truth(&gt_path));
            let gt = match from_disk {
                Some(Ok((hash, values)))
                    if hash == gt_hash && values.len() == layout.n_components() =>
                {
                    GroundTruth { values }
                }
                _ => compute_ground_truth(config, &layout)?,
            };
            gt_cache.insert(gt_hash.clone(), gt);
        }
        let gt = &gt_cache[&gt_hash];
        if !gt_file_index.contains_key(&gt_hash) {
            write_ground_truth(&gt_path, &gt_hash, gt, &layout)?;
            gt_file_index.insert(gt_hash.clone(), gt_path);
        }

        // replications in parallel, reduced in index order
        let replication_results: Vec<Result<Vec<Vec<PooledEstimate>>>> = (0..config.replications)
            .into_par_iter()
            .map(|r| run_replication(config, &layout, r))
            .collect();
        let mut completed: Vec<Vec<Vec<PooledEstimate>>> = Vec::new();
        let mut failures = 0usize;
        for rep in replication_results {
            match rep {
                Ok(est) => completed.push(est),
                Err(_) => failures += 1,
            }
        }
        if completed.is_empty() {
            return Err(Error::Numerical(format!(
                "all {} replications failed for setting {}",
                config.replications, setting.id
            )));
        }
        let _ = failures; // recorded through n_completed

        let mut block = Vec::new();
        for (ki, &k_used) in config.refit_counts().iter().enumerate() {
            let per_rep: Vec<&Vec<PooledEstimate>> = completed.iter().map(|rep| &rep[ki]).collect();
            let rows = evaluate(&per_rep, gt, &layout)?;
            block.extend(result_lines(setting, k_used, &rows));
        }
        let mut chunk = String::new();
        for line in &block {
            chunk.push_str(line);
            chunk.push('\n');
        }
        file.write_all(chunk.as_bytes())?;
        file.flush()?;
        rows_written += block.len();
    }
    drop(file);

    // summary from the final file's per-explainer aggregate rows
    let final_text = fs::read_to_string(&results_path)?;
    let mut summary = Vec::new();
    for line in final_text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() >= 15 && fields[10] == "all" {
            summary.push((
                fields[0].to_owned(),
                fields[6].to_owned(),
                fields[9].parse().unwrap_or(0),
                fields[11].parse().unwrap_or(f64::NAN),
                fields[12].parse().unwrap_or(f64::NAN),
                fields[13].parse().unwrap_or(f64::NAN),
            ));
        }
    }

    Ok(StudyOutcome {
        results_path,
        rows_written,
        settings_skipped: prefix_len,
        summary,
    })
}
