//! The `explain` subcommand: load a CSV, optionally ampute and impute, fit
//! resampled models and write per-feature explanation tables with intervals.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use imlci_core::analyze::{explain_dataset, AnalyzeOptions, AnalyzeReport};
use imlci_core::experiment::{ExplainerKind, LearnerSpec};
use imlci_core::imputation::ImputerSpec;
use imlci_core::missingness::{Mechanism, MissSpec};
use imlci_core::models::GbtParams;
use imlci_core::uncertainty::{ResampleSpec, ResampleStrategy, VarianceMode};

use crate::CliError;

#[derive(Args)]
pub struct ExplainArgs {
    /// Input CSV with a header row
    #[arg(long)]
    data: PathBuf,
    /// Target column name
    #[arg(long)]
    target: String,
    /// Field delimiter
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Output directory
    #[arg(long, default_value = "explain-out")]
    out: PathBuf,
    /// Simulate missingness first: mcar:0.4, mar:0.2, mnar:0.1
    #[arg(long)]
    ampute: Option<String>,
    /// Imputer: none, mean, missforest, mice-pmm:m=40, mice-rf:m=20
    #[arg(long, default_value = "none")]
    imputer: String,
    /// Learner: gbt or ols
    #[arg(long, default_value = "gbt")]
    learner: String,
    /// Resampling strategy: bootstrap or subsample
    #[arg(long, default_value = "bootstrap")]
    strategy: String,
    /// Resampling iterations
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Model refits used
    #[arg(long, default_value_t = 15)]
    refits: usize,
    /// Explainers (comma separated): pd,pfi,shap
    #[arg(long, default_value = "pd,pfi,shap")]
    explainers: String,
    /// Nominal error rate of the intervals
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Partial-dependence grid size
    #[arg(long, default_value_t = 20)]
    grid: usize,
    /// Permutations per importance score
    #[arg(long, default_value_t = 5)]
    n_perm: usize,
    /// Drop the test/train variance correction
    #[arg(long)]
    unadjusted: bool,
    /// Master seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_ampute(raw: &str) -> Result<MissSpec, CliError> {
    let (mech, prop) = raw
        .split_once(':')
        .ok_or_else(|| CliError::config(format!("--ampute '{raw}' is not MECHANISM:PROPORTION")))?;
    let mechanism = match mech {
        "mcar" => Mechanism::Mcar,
        "mar" => Mechanism::Mar,
        "mnar" => Mechanism::Mnar,
        other => return Err(CliError::config(format!("unknown mechanism '{other}'"))),
    };
    let proportion: f64 = prop
        .parse()
        .map_err(|_| CliError::config(format!("bad proportion '{prop}'")))?;
    Ok(MissSpec {
        mechanism,
        proportion,
    })
}

fn parse_imputer(raw: &str) -> Result<Option<ImputerSpec>, CliError> {
    let (name, args) = match raw.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (raw, None),
    };
    let m = match args {
        None => None,
        Some(a) => {
            let m = a
                .strip_prefix("m=")
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| CliError::config(format!("bad imputer argument '{a}'")))?;
            Some(m)
        }
    };
    let spec = match name {
        "none" => return Ok(None),
        "mean" => ImputerSpec::Mean,
        "missforest" => ImputerSpec::Missforest {
            max_iter: 10,
            rf: Default::default(),
        },
        "mice-pmm" => ImputerSpec::MicePmm {
            m: m.unwrap_or(10),
            n_iter: 5,
            donors: 5,
        },
        "mice-rf" => ImputerSpec::MiceRf {
            m: m.unwrap_or(10),
            n_iter: 5,
            n_trees: 10,
        },
        other => return Err(CliError::config(format!("unknown imputer '{other}'"))),
    };
    Ok(Some(spec))
}

fn parse_explainers(raw: &str) -> Result<Vec<ExplainerKind>, CliError> {
    raw.split(',')
        .map(|e| match e.trim() {
            "pd" => Ok(ExplainerKind::Pd),
            "pfi" => Ok(ExplainerKind::Pfi),
            "shap" => Ok(ExplainerKind::Shap),
            other => Err(CliError::config(format!("unknown explainer '{other}'"))),
        })
        .collect()
}

fn build_options(args: &ExplainArgs) -> Result<AnalyzeOptions, CliError> {
    let learner = match args.learner.as_str() {
        "gbt" => LearnerSpec::Gbt {
            params: GbtParams::default(),
        },
        "ols" => LearnerSpec::Ols,
        other => return Err(CliError::config(format!("unknown learner '{other}'"))),
    };
    let strategy = match args.strategy.as_str() {
        "bootstrap" => ResampleStrategy::Bootstrap,
        "subsample" => ResampleStrategy::Subsample {
            train_fraction: 0.632,
        },
        other => return Err(CliError::config(format!("unknown strategy '{other}'"))),
    };
    Ok(AnalyzeOptions {
        miss: args.ampute.as_deref().map(parse_ampute).transpose()?,
        imputer: parse_imputer(&args.imputer)?,
        learner,
        explainers: parse_explainers(&args.explainers)?,
        resample: ResampleSpec {
            strategy,
            k: args.k,
            refits_used: args.refits,
        },
        variance: VarianceMode {
            adjusted: !args.unadjusted,
        },
        alpha: args.alpha,
        grid_size: args.grid,
        pfi_permutations: args.n_perm,
        seed: args.seed,
    })
}

fn score_table(report: &AnalyzeReport, explainer: ExplainerKind) -> String {
    let mut out = String::from("feature,point,lo,hi\n");
    for row in &report.rows {
        if row.explainer == explainer && row.grid_value.is_none() {
            writeln!(
                out,
                "{},{},{},{}",
                row.feature, row.estimate.point, row.estimate.ci.0, row.estimate.ci.1
            )
            .expect("write to string");
        }
    }
    out
}

fn pd_table(report: &AnalyzeReport) -> String {
    let mut out = String::from("feature,grid_value,point,lo,hi\n");
    for row in &report.rows {
        if row.explainer == ExplainerKind::Pd {
            if let Some(v) = row.grid_value {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.feature, v, row.estimate.point, row.estimate.ci.0, row.estimate.ci.1
                )
                .expect("write to string");
            }
        }
    }
    out
}

fn mse_table(report: &AnalyzeReport) -> String {
    let mut out = String::from("imputation,refit,test_mse\n");
    for (d, j, mse) in &report.mse_per_fit {
        writeln!(out, "{d},{j},{mse}").expect("write to string");
    }
    out
}

pub fn run(args: ExplainArgs) -> Result<(), CliError> {
    crate::init_threads(args.threads)?;
    let options = build_options(&args)?;
    let data = imlci_core::load_csv(&args.data, args.delimiter, &args.target)?;
    let report = explain_dataset(&data, &options)?;

    std::fs::create_dir_all(&args.out)?;
    let explainers = &options.explainers;
    if explainers.contains(&ExplainerKind::Pd) {
        std::fs::write(args.out.join("pd.csv"), pd_table(&report))?;
    }
    if explainers.contains(&ExplainerKind::Pfi) {
        std::fs::write(
            args.out.join("pfi.csv"),
            score_table(&report, ExplainerKind::Pfi),
        )?;
    }
    if explainers.contains(&ExplainerKind::Shap) {
        std::fs::write(
            args.out.join("shap.csv"),
            score_table(&report, ExplainerKind::Shap),
        )?;
    }
    std::fs::write(args.out.join("mse.csv"), mse_table(&report))?;

    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "data": args.data.display().to_string(),
        "target": args.target,
        "options": options,
        "mean_test_mse": report.mean_mse,
        "warnings": report.warnings,
    });
    std::fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("serializable manifest") + "\n",
    )?;

    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "mean test MSE over {} fit(s): {:.4}",
        report.mse_per_fit.len(),
        report.mean_mse
    );
    for explainer in [ExplainerKind::Pfi, ExplainerKind::Shap] {
        if !explainers.contains(&explainer) {
            continue;
        }
        let mut scores: Vec<_> = report
            .rows
            .iter()
            .filter(|r| r.explainer == explainer && r.grid_value.is_none())
            .collect();
        scores.sort_by(|a, b| b.estimate.point.total_cmp(&a.estimate.point));
        println!("\ntop features by {}:", explainer.label());
        for row in scores.iter().take(5) {
            println!(
                "  {:<24} {:>9.4}  [{:.4}, {:.4}]",
                row.feature, row.estimate.point, row.estimate.ci.0, row.estimate.ci.1
            );
        }
    }
    println!("tables written to {}", args.out.display());
    Ok(())
}
