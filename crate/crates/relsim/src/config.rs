//! Run configuration: one flat key=value namespace shared by config files
//! and command-line flags.
//!
//! Every knob has a documented default, the same spelling everywhere, and a
//! round-trippable textual form, so `--print-config` output can be fed back
//! in as a config file. All stage randomness derives from the single root
//! `seed`, offset per stage, so stages can be rerun in isolation without
//! disturbing each other.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::cohort::{fnv1a64, split_intervals, BowConfig, Interval};
use crate::eigen::SolverOptions;
use crate::error::{Error, Result};
use crate::graph::GraphRole;
use crate::model::TrainConfig;
use crate::synth::SynthConfig;

const DATE_FMT: &str = "%Y-%m-%d";

/// Deterministic per-stage seed derived from the root seed.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    root ^ fnv1a64(stage.as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Directory all pipeline artifacts are read from and written to.
    pub workdir: PathBuf,
    /// Event-log CSV path; empty means `<workdir>/events.csv`.
    pub events: String,
    /// Root random seed for the whole run.
    pub seed: u64,
    /// Earliest possible diagnosis date in the synthetic cohort.
    pub study_start: NaiveDate,
    /// Start of the span that is split into prediction intervals.
    pub split_start: NaiveDate,
    /// End (exclusive) of the prediction span.
    pub split_end: NaiveDate,
    /// Number of consecutive prediction intervals; the last one is the
    /// hold-out.
    pub n_intervals: usize,
    /// Which clinician-role graphs to build.
    pub graphs: Vec<GraphRole>,
    /// Eigenvectors kept per graph.
    pub k: usize,
    /// Eigensolver residual tolerance.
    pub tol: f64,
    /// Eigensolver restart-cycle budget.
    pub max_iter: usize,
    /// Look-back window (days) for graphs and bag-of-words counts.
    pub lookback_days: i64,
    /// Sub-windows the look-back is cut into for bag-of-words counts.
    pub n_quarters: usize,
    /// Minimum patient-fraction support for a code to enter the vocabulary.
    pub min_support: f64,
    /// Include one-hot indicators for the most frequent clinicians.
    pub clinician_onehots: bool,
    /// How many top-frequency clinicians get one-hot columns.
    pub top_clinicians: usize,
    pub n_patients: usize,
    pub n_diag_clinicians: usize,
    pub n_followup_clinicians: usize,
    pub n_communities: usize,
    /// Planted treatment-probability gap between hot and base communities.
    pub signal_strength: f64,
    /// Poisson mean of background visits per synthetic patient.
    pub visits_per_patient: f64,
    /// Target pooled positive rate of the synthetic cohort.
    pub positive_rate_target: f64,
    /// L2 penalty for logistic-regression training.
    pub l2: f64,
    /// Initial learning rate for logistic-regression training.
    pub lr: f64,
    /// Maximum training epochs.
    pub epochs: usize,
    /// Cut-offs for precision@k.
    pub metric_ks: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            workdir: PathBuf::from("out"),
            events: String::new(),
            seed: 42,
            study_start: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
            split_start: NaiveDate::from_ymd_opt(2017, 7, 1).unwrap(),
            split_end: NaiveDate::from_ymd_opt(2018, 12, 31).unwrap(),
            n_intervals: 3,
            graphs: vec![GraphRole::Diag, GraphRole::Followup],
            k: 5,
            tol: 1e-8,
            max_iter: 300,
            lookback_days: 365,
            n_quarters: 4,
            min_support: 0.01,
            clinician_onehots: true,
            top_clinicians: 50,
            n_patients: 12_000,
            n_diag_clinicians: 400,
            n_followup_clinicians: 400,
            n_communities: 5,
            signal_strength: 0.3,
            visits_per_patient: 12.0,
            positive_rate_target: 0.093,
            l2: 1e-4,
            lr: 0.1,
            epochs: 500,
            metric_ks: vec![100, 300, 600],
        }
    }
}

/// Canonical key order used by `to_kv_string`.
pub const CONFIG_KEYS: [&str; 27] = [
    "workdir",
    "events",
    "seed",
    "study_start",
    "split_start",
    "split_end",
    "n_intervals",
    "graphs",
    "k",
    "tol",
    "max_iter",
    "lookback_days",
    "n_quarters",
    "min_support",
    "clinician_onehots",
    "top_clinicians",
    "n_patients",
    "n_diag_clinicians",
    "n_followup_clinicians",
    "n_communities",
    "signal_strength",
    "visits_per_patient",
    "positive_rate_target",
    "l2",
    "lr",
    "epochs",
    "metric_ks",
];

fn parse_as<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Usage(format!("config: bad value '{value}' for '{key}': {e}")))
}

fn parse_date(key: &str, value: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(value.trim(), DATE_FMT).map_err(|_| {
        Error::Usage(format!(
            "config: bad value '{value}' for '{key}': expected YYYY-MM-DD"
        ))
    })
}

impl RunConfig {
    /// Applies one key=value assignment. Unknown keys and malformed values
    /// are usage errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "workdir" => self.workdir = PathBuf::from(value.trim()),
            "events" => self.events = value.trim().to_string(),
            "seed" => self.seed = parse_as(key, value)?,
            "study_start" => self.study_start = parse_date(key, value)?,
            "split_start" => self.split_start = parse_date(key, value)?,
            "split_end" => self.split_end = parse_date(key, value)?,
            "n_intervals" => self.n_intervals = parse_as(key, value)?,
            "graphs" => {
                let mut roles = Vec::new();
                for part in value.split(',') {
                    let role = GraphRole::from_str(part.trim())
                        .map_err(|e| Error::Usage(format!("config: {e} for 'graphs'")))?;
                    if roles.contains(&role) {
                        return Err(Error::Usage(format!(
                            "config: graph role '{}' listed twice",
                            role.tag()
                        )));
                    }
                    roles.push(role);
                }
                self.graphs = roles;
            }
            "k" => self.k = parse_as(key, value)?,
            "tol" => self.tol = parse_as(key, value)?,
            "max_iter" => self.max_iter = parse_as(key, value)?,
            "lookback_days" => self.lookback_days = parse_as(key, value)?,
            "n_quarters" => self.n_quarters = parse_as(key, value)?,
            "min_support" => self.min_support = parse_as(key, value)?,
            "clinician_onehots" => self.clinician_onehots = parse_as(key, value)?,
            "top_clinicians" => self.top_clinicians = parse_as(key, value)?,
            "n_patients" => self.n_patients = parse_as(key, value)?,
            "n_diag_clinicians" => self.n_diag_clinicians = parse_as(key, value)?,
            "n_followup_clinicians" => self.n_followup_clinicians = parse_as(key, value)?,
            "n_communities" => self.n_communities = parse_as(key, value)?,
            "signal_strength" => self.signal_strength = parse_as(key, value)?,
            "visits_per_patient" => self.visits_per_patient = parse_as(key, value)?,
            "positive_rate_target" => self.positive_rate_target = parse_as(key, value)?,
            "l2" => self.l2 = parse_as(key, value)?,
            "lr" => self.lr = parse_as(key, value)?,
            "epochs" => self.epochs = parse_as(key, value)?,
            "metric_ks" => {
                let mut ks = Vec::new();
                for part in value.split(',') {
                    ks.push(parse_as::<usize>(key, part)?);
                }
                self.metric_ks = ks;
            }
            other => {
                return Err(Error::Usage(format!("config: unknown key '{other}'")));
            }
        }
        Ok(())
    }

    /// Loads assignments from a flat key=value file. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Usage(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    i + 1
                )));
            };
            self.apply(key.trim(), value).map_err(|e| match e {
                Error::Usage(msg) => {
                    Error::Usage(format!("{}:{}: {msg}", path.display(), i + 1))
                }
                other => other,
            })?;
        }
        Ok(())
    }

    /// Serializes the full configuration, one `key=value` per line, in the
    /// order of [`CONFIG_KEYS`]. The output parses back to an equal config.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let value = match key {
                "workdir" => self.workdir.display().to_string(),
                "events" => self.events.clone(),
                "seed" => self.seed.to_string(),
                "study_start" => self.study_start.format(DATE_FMT).to_string(),
                "split_start" => self.split_start.format(DATE_FMT).to_string(),
                "split_end" => self.split_end.format(DATE_FMT).to_string(),
                "n_intervals" => self.n_intervals.to_string(),
                "graphs" => self
                    .graphs
                    .iter()
                    .map(|g| g.tag())
                    .collect::<Vec<_>>()
                    .join(","),
                "k" => self.k.to_string(),
                "tol" => self.tol.to_string(),
                "max_iter" => self.max_iter.to_string(),
                "lookback_days" => self.lookback_days.to_string(),
                "n_quarters" => self.n_quarters.to_string(),
                "min_support" => self.min_support.to_string(),
                "clinician_onehots" => self.clinician_onehots.to_string(),
                "top_clinicians" => self.top_clinicians.to_string(),
                "n_patients" => self.n_patients.to_string(),
                "n_diag_clinicians" => self.n_diag_clinicians.to_string(),
                "n_followup_clinicians" => self.n_followup_clinicians.to_string(),
                "n_communities" => self.n_communities.to_string(),
                "signal_strength" => self.signal_strength.to_string(),
                "visits_per_patient" => self.visits_per_patient.to_string(),
                "positive_rate_target" => self.positive_rate_target.to_string(),
                "l2" => self.l2.to_string(),
                "lr" => self.lr.to_string(),
                "epochs" => self.epochs.to_string(),
                "metric_ks" => self
                    .metric_ks
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                _ => unreachable!("CONFIG_KEYS and to_kv_string agree"),
            };
            out.push_str(key);
            out.push('=');
            out.push_str(&value);
            out.push('\n');
        }
        out
    }

    /// Cross-field sanity checks that individual setters cannot see.
    pub fn validate(&self) -> Result<()> {
        if self.n_intervals < 2 {
            return Err(Error::Usage(
                "config: n_intervals must be at least 2 (training plus hold-out)".into(),
            ));
        }
        if self.graphs.is_empty() {
            return Err(Error::Usage("config: graphs must not be empty".into()));
        }
        if self.k == 0 {
            return Err(Error::Usage("config: k must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Usage("config: tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Usage("config: max_iter must be at least 1".into()));
        }
        if self.n_quarters == 0 || self.lookback_days < self.n_quarters as i64 {
            return Err(Error::Usage(
                "config: lookback_days must cover at least n_quarters >= 1 days".into(),
            ));
        }
        if self.metric_ks.is_empty() || self.metric_ks.contains(&0) {
            return Err(Error::Usage(
                "config: metric_ks must be non-empty positive integers".into(),
            ));
        }
        if self.epochs == 0 || self.lr.is_nan() || self.lr <= 0.0 || self.l2.is_nan() || self.l2 < 0.0 {
            return Err(Error::Usage(
                "config: epochs >= 1, lr > 0 and l2 >= 0 required".into(),
            ));
        }
        if self.split_start >= self.split_end {
            return Err(Error::Usage(
                "config: split_start must precede split_end".into(),
            ));
        }
        Ok(())
    }

    /// The consecutive prediction intervals; the last is the hold-out.
    pub fn intervals(&self) -> Result<Vec<Interval>> {
        split_intervals(self.split_start, self.split_end, self.n_intervals)
    }

    pub fn holdout_index(&self) -> usize {
        self.n_intervals - 1
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        Ok(SynthConfig {
            n_patients: self.n_patients,
            n_diag_clinicians: self.n_diag_clinicians,
            n_followup_clinicians: self.n_followup_clinicians,
            n_communities: self.n_communities,
            signal_strength: self.signal_strength,
            visits_per_patient: self.visits_per_patient,
            positive_rate_target: self.positive_rate_target,
            seed: stage_seed(self.seed, "synth"),
            study_start: self.study_start,
            intervals: self.intervals()?,
        })
    }

    pub fn bow_config(&self) -> BowConfig {
        BowConfig {
            lookback_days: self.lookback_days,
            n_quarters: self.n_quarters,
            min_support: self.min_support,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            l2: self.l2,
            lr: self.lr,
            epochs: self.epochs,
        }
    }

    /// Solver options with the stage-specific seed offset.
    pub fn solver_options(&self, stage: &str) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: stage_seed(self.seed, stage),
        }
    }

    // Artifact locations. Stages communicate exclusively through these.

    pub fn events_path(&self) -> PathBuf {
        if self.events.is_empty() {
            self.workdir.join("events.csv")
        } else {
            PathBuf::from(&self.events)
        }
    }

    pub fn cohort_path(&self) -> PathBuf {
        self.workdir.join("cohort.csv")
    }

    pub fn graph_path(&self, interval_index: usize, role: GraphRole) -> PathBuf {
        self.workdir
            .join(format!("graph_i{interval_index}_{}.csv", role.tag()))
    }

    pub fn features_path(&self, interval_index: usize) -> PathBuf {
        self.workdir.join(format!("features_i{interval_index}.csv"))
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.workdir.join("vocabulary.txt")
    }

    pub fn clinicians_path(&self) -> PathBuf {
        self.workdir.join("top_clinicians.txt")
    }

    pub fn model_path(&self, name: &str) -> PathBuf {
        self.workdir.join(format!("model_{name}.json"))
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.workdir.join(format!("eval_{name}.csv"))
    }

    pub fn pr_curve_path(&self, name: &str) -> PathBuf {
        self.workdir.join(format!("pr_curve_{name}.csv"))
    }

    pub fn topk_curve_path(&self, name: &str) -> PathBuf {
        self.workdir.join(format!("topk_curve_{name}.csv"))
    }

    pub fn compare_path(&self) -> PathBuf {
        self.workdir.join("comparison.csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn defaults_validate_and_split_cleanly() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let ivs = cfg.intervals().unwrap();
        assert_eq!(ivs.len(), 3);
        assert_eq!(
            ivs[2].start(),
            NaiveDate::from_ymd_opt(2018, 7, 2).unwrap()
        );
    }

    #[test]
    fn kv_round_trip_reproduces_the_config() {
        let mut cfg = RunConfig::default();
        cfg.apply("k", "7").unwrap();
        cfg.apply("graphs", "followup").unwrap();
        cfg.apply("metric_ks", "50, 200").unwrap();
        cfg.apply("signal_strength", "0.125").unwrap();
        let text = cfg.to_kv_string();
        let mut back = RunConfig::default();
        for line in text.lines() {
            let (k, v) = line.split_once('=').unwrap();
            back.apply(k, v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        let mut cfg = RunConfig::default();
        let e = cfg.apply("bogus", "1").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        let e = cfg.apply("k", "five").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        let e = cfg.apply("graphs", "diag,diag").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        let e = cfg.apply("study_start", "01/02/2017").unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn config_files_support_comments_and_report_lines() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment").unwrap();
        writeln!(f).unwrap();
        writeln!(f, "k = 9").unwrap();
        writeln!(f, "workdir=custom/dir").unwrap();
        f.flush().unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(f.path()).unwrap();
        assert_eq!(cfg.k, 9);
        assert_eq!(cfg.workdir, PathBuf::from("custom/dir"));

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "k: 9").unwrap();
        f.flush().unwrap();
        let err = RunConfig::default().apply_file(f.path()).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }

    #[test]
    fn validation_rejects_degenerate_setups() {
        let cfg = RunConfig {
            n_intervals: 1,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());

        let cfg = RunConfig {
            metric_ks: vec![],
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());

        let cfg = RunConfig {
            graphs: vec![],
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stage_seeds_differ_by_stage_but_not_run() {
        assert_eq!(stage_seed(7, "synth"), stage_seed(7, "synth"));
        assert_ne!(stage_seed(7, "synth"), stage_seed(7, "extract"));
        assert_ne!(stage_seed(7, "synth"), stage_seed(8, "synth"));
    }

    #[test]
    fn default_events_path_lives_under_workdir() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.events_path(), PathBuf::from("out/events.csv"));
        let mut cfg = RunConfig::default();
        cfg.apply("events", "elsewhere/log.csv").unwrap();
        assert_eq!(cfg.events_path(), PathBuf::from("elsewhere/log.csv"));
    }
}
