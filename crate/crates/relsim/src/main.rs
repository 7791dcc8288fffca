//! Command-line entry point. See `relsim --help`.
//!
//! Configuration resolves in three layers: built-in defaults, then a
//! `--config` key=value file, then individual flags. Flags share their
//! spelling with the config-file keys, and `--print-config` echoes the
//! resolved result in a form that can be fed back in as a config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relsim::config::RunConfig;
use relsim::pipeline;
use relsim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "relsim",
    version,
    about = "Clinician-graph relational-similarity features for treatment-initiation prediction",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure."
)]
struct Cli {
    /// Flat key=value config file applied before flag overrides
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Print the resolved configuration and exit
    #[arg(long, global = true)]
    print_config: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Option<Command>,
}

/// One optional flag per config key, same spelling as the file keys.
#[derive(Args)]
struct Overrides {
    /// Directory all pipeline artifacts live in
    #[arg(long = "workdir", global = true, value_name = "DIR")]
    workdir: Option<String>,
    /// Event-log CSV path (default: <workdir>/events.csv)
    #[arg(long = "events", global = true, value_name = "FILE")]
    events: Option<String>,
    /// Root random seed
    #[arg(long = "seed", global = true, value_name = "N")]
    seed: Option<String>,
    /// Earliest synthetic diagnosis date (YYYY-MM-DD)
    #[arg(long = "study_start", global = true, value_name = "DATE")]
    study_start: Option<String>,
    /// Start of the prediction span (YYYY-MM-DD)
    #[arg(long = "split_start", global = true, value_name = "DATE")]
    split_start: Option<String>,
    /// End (exclusive) of the prediction span (YYYY-MM-DD)
    #[arg(long = "split_end", global = true, value_name = "DATE")]
    split_end: Option<String>,
    /// Number of prediction intervals; the last is the hold-out
    #[arg(long = "n_intervals", global = true, value_name = "N")]
    n_intervals: Option<String>,
    /// Comma-separated clinician-role graphs (diag,followup)
    #[arg(long = "graphs", global = true, value_name = "ROLES")]
    graphs: Option<String>,
    /// Eigenvectors kept per graph
    #[arg(long = "k", global = true, value_name = "N")]
    k: Option<String>,
    /// Eigensolver residual tolerance
    #[arg(long = "tol", global = true, value_name = "X")]
    tol: Option<String>,
    /// Eigensolver restart-cycle budget
    #[arg(long = "max_iter", global = true, value_name = "N")]
    max_iter: Option<String>,
    /// Look-back window length in days
    #[arg(long = "lookback_days", global = true, value_name = "N")]
    lookback_days: Option<String>,
    /// Sub-windows for bag-of-words counts
    #[arg(long = "n_quarters", global = true, value_name = "N")]
    n_quarters: Option<String>,
    /// Minimum patient-fraction support for vocabulary codes
    #[arg(long = "min_support", global = true, value_name = "X")]
    min_support: Option<String>,
    /// Include top-clinician one-hot indicators (true/false)
    #[arg(long = "clinician_onehots", global = true, value_name = "BOOL")]
    clinician_onehots: Option<String>,
    /// How many top-frequency clinicians get one-hot columns
    #[arg(long = "top_clinicians", global = true, value_name = "N")]
    top_clinicians: Option<String>,
    /// Synthetic cohort size
    #[arg(long = "n_patients", global = true, value_name = "N")]
    n_patients: Option<String>,
    /// Number of diagnosis clinicians
    #[arg(long = "n_diag_clinicians", global = true, value_name = "N")]
    n_diag_clinicians: Option<String>,
    /// Number of follow-up clinicians
    #[arg(long = "n_followup_clinicians", global = true, value_name = "N")]
    n_followup_clinicians: Option<String>,
    /// Number of clinician communities
    #[arg(long = "n_communities", global = true, value_name = "N")]
    n_communities: Option<String>,
    /// Planted hot-community treatment-probability gap
    #[arg(long = "signal_strength", global = true, value_name = "X")]
    signal_strength: Option<String>,
    /// Poisson mean of background visits per patient
    #[arg(long = "visits_per_patient", global = true, value_name = "X")]
    visits_per_patient: Option<String>,
    /// Target pooled positive rate of the synthetic cohort
    #[arg(long = "positive_rate_target", global = true, value_name = "X")]
    positive_rate_target: Option<String>,
    /// L2 penalty for model training
    #[arg(long = "l2", global = true, value_name = "X")]
    l2: Option<String>,
    /// Initial learning rate for model training
    #[arg(long = "lr", global = true, value_name = "X")]
    lr: Option<String>,
    /// Maximum training epochs
    #[arg(long = "epochs", global = true, value_name = "N")]
    epochs: Option<String>,
    /// Comma-separated precision@k cutoffs
    #[arg(long = "metric_ks", global = true, value_name = "KS")]
    metric_ks: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> [(&'static str, &Option<String>); 27] {
        [
            ("workdir", &self.workdir),
            ("events", &self.events),
            ("seed", &self.seed),
            ("study_start", &self.study_start),
            ("split_start", &self.split_start),
            ("split_end", &self.split_end),
            ("n_intervals", &self.n_intervals),
            ("graphs", &self.graphs),
            ("k", &self.k),
            ("tol", &self.tol),
            ("max_iter", &self.max_iter),
            ("lookback_days", &self.lookback_days),
            ("n_quarters", &self.n_quarters),
            ("min_support", &self.min_support),
            ("clinician_onehots", &self.clinician_onehots),
            ("top_clinicians", &self.top_clinicians),
            ("n_patients", &self.n_patients),
            ("n_diag_clinicians", &self.n_diag_clinicians),
            ("n_followup_clinicians", &self.n_followup_clinicians),
            ("n_communities", &self.n_communities),
            ("signal_strength", &self.signal_strength),
            ("visits_per_patient", &self.visits_per_patient),
            ("positive_rate_target", &self.positive_rate_target),
            ("l2", &self.l2),
            ("lr", &self.lr),
            ("epochs", &self.epochs),
            ("metric_ks", &self.metric_ks),
        ]
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic event log and labeled cohort
    Synth,
    /// Build per-interval bipartite visit graphs
    Graphs,
    /// Compute relational-similarity features from the stored graphs
    Extract,
    /// Train the baseline and similarity-augmented models
    Train,
    /// Score the hold-out interval and write evaluation reports
    Evaluate,
    /// Compare the stored evaluation reports
    Compare,
    /// Run every stage in order: synth through compare
    All,
}

fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for (key, value) in cli.overrides.pairs() {
        if let Some(v) = value {
            cfg.apply(key, v)?;
        }
    }
    if cli.print_config {
        print!("{}", cfg.to_kv_string());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(Error::Usage(
            "missing subcommand; run with --help for usage".into(),
        ));
    };
    match command {
        Command::Synth => pipeline::run_synth(&cfg),
        Command::Graphs => pipeline::run_graphs(&cfg),
        Command::Extract => pipeline::run_extract(&cfg),
        Command::Train => pipeline::run_train(&cfg),
        Command::Evaluate => pipeline::run_evaluate(&cfg),
        Command::Compare => {
            let table = pipeline::run_compare(&cfg)?;
            print!("{}", table.render_text());
            Ok(())
        }
        Command::All => {
            let table = pipeline::run_all(&cfg)?;
            print!("{}", table.render_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is
            // a usage error.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
