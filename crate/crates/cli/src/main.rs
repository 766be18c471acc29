//! Command-line front end: simulation studies, ground-truth computation,
//! and explanation of real datasets with confidence intervals.

mod config;
mod explain_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use imlci_core::error::Error as CoreError;
use imlci_core::experiment::{self, StudyOptions};

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "imlci",
    version,
    about = "Confidence intervals for model explanations under missing data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StudyArgs {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the master seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Dotted-path config overrides, e.g. --set miss.proportion=0.4
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation study and write coverage/width/bias tables
    Simulate {
        #[command(flatten)]
        study: StudyArgs,
        /// Reuse a ground-truth file written by `ground-truth`
        #[arg(long = "ground-truth")]
        ground_truth: Option<PathBuf>,
    },
    /// Compute and persist the simulated ground truth for a config
    GroundTruth {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Explain a CSV dataset with interval estimates per feature
    Explain(explain_cmd::ExplainArgs),
}

/// Errors carrying their process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let code = match &err {
            CoreError::InvalidConfig(_)
            | CoreError::InvalidSpec(_)
            | CoreError::UnknownTarget(_)
            | CoreError::Json(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::runtime(err.to_string())
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::config("threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn cmd_simulate(study: StudyArgs, ground_truth: Option<PathBuf>) -> Result<(), CliError> {
    init_threads(study.threads)?;
    let settings = config::load_settings(&study.config, &study.overrides, study.seed)?;
    let options = StudyOptions {
        ground_truth_file: ground_truth,
    };
    let outcome = experiment::run_study(&settings, &study.out, &options)?;
    if outcome.settings_skipped > 0 {
        println!(
            "resumed: {} setting(s) already complete",
            outcome.settings_skipped
        );
    }
    println!(
        "wrote {} rows to {}",
        outcome.rows_written,
        outcome.results_path.display()
    );
    println!(
        "\n{:<28} {:>5} {:>7} {:>9} {:>10} {:>10}",
        "setting", "expl", "refits", "coverage", "avg_width", "bias"
    );
    for (id, explainer, refits, coverage, width, bias) in &outcome.summary {
        println!("{id:<28} {explainer:>5} {refits:>7} {coverage:>9.3} {width:>10.4} {bias:>10.4}");
    }
    Ok(())
}

fn cmd_ground_truth(study: StudyArgs) -> Result<(), CliError> {
    init_threads(study.threads)?;
    let settings = config::load_settings(&study.config, &study.overrides, study.seed)?;
    std::fs::create_dir_all(&study.out).map_err(CliError::from)?;

    let mut seen = std::collections::HashSet::new();
    let mut written = Vec::new();
    for setting in &settings {
        let hash = experiment::ground_truth_hash(&setting.config);
        if !seen.insert(hash.clone()) {
            continue;
        }
        let layout = experiment::layout_for(&setting.config)?;
        let gt = experiment::compute_ground_truth(&setting.config, &layout)?;
        let path = if seen.len() == 1 {
            study.out.join("ground_truth.csv")
        } else {
            study.out.join(format!("ground_truth-{}.csv", &hash[..8]))
        };
        experiment::write_ground_truth(&path, &hash, &gt, &layout)?;
        println!("{} components -> {}", layout.n_components(), path.display());
        written.push((hash, path));
    }
    let manifest = serde_json::json!({
        "ground_truth_files": written
            .iter()
            .map(|(hash, path)| serde_json::json!({
                "config_hash": hash,
                "path": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            }))
            .collect::<Vec<_>>(),
    });
    std::fs::write(
        study.out.join("ground_truth_manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("serializable manifest") + "\n",
    )
    .map_err(CliError::from)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            study,
            ground_truth,
        } => cmd_simulate(study, ground_truth),
        Command::GroundTruth { study } => cmd_ground_truth(study),
        Command::Explain(args) => explain_cmd::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
