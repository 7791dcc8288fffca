//! Pipeline stages behind the CLI subcommands.
//!
//! Each stage reads its inputs from files under the configured workdir and
//! writes its outputs back there, so stages can be rerun in isolation and
//! intermediate artifacts can be inspected or replaced. The stage graph:
//!
//! ```text
//! synth -> events.csv + cohort.csv
//! graphs -> graph_i{interval}_{role}.csv            (per interval, per role)
//! extract -> features_i{interval}.csv               (per interval)
//! train -> vocabulary.txt, top_clinicians.txt, model_{name}.json
//! evaluate -> eval_{name}.csv + curve CSVs          (hold-out interval)
//! compare -> comparison.csv
//! ```
//!
//! Temporal hygiene: every per-interval artifact (graph, bag-of-words
//! counts, similarity features, clinician indicators) is computed from the
//! look-back window ending at the interval start, and the vocabulary and
//! top-clinician lists are frozen on events dated strictly before the
//! hold-out interval. Events inside the hold-out interval therefore cannot
//! influence anything but hold-out labels and evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::Instant;

use chrono::Duration;

use crate::cohort::{
    bow_column_names, bow_vocabulary, build_bow_features, demographics, fnv1a64, history_flags,
    label_cohort, CohortTable, Interval, HISTORY_MARKER_CODES, N_AGE_BUCKETS,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{extract_similarity_features, read_features_csv, write_features_csv,
    SimilarityFeature};
use crate::graph::{
    build_bipartite_graph, load_events, read_graph_csv, write_events, write_graph_csv,
    VisitEvent,
};
use crate::metrics::{
    compare_runs, evaluate, pr_curve_points, precision_curve, ComparisonTable,
    EvalReport,
};
use crate::model::{predict_scores, train_logistic, FeatureMatrix, LinearModel};
use crate::synth::synth_generate;

/// Model artifact names: the bag-of-words-plus-demographics model and the
/// same model augmented with the relational-similarity block.
pub const BASELINE: &str = "baseline";
pub const AUGMENTED: &str = "augmented";

fn lookback_window(cfg: &RunConfig, interval: &Interval) -> Result<Interval> {
    Interval::new(
        interval.start() - Duration::days(cfg.lookback_days),
        interval.start(),
    )
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Generates the synthetic event log and the labeled cohort table.
pub fn run_synth(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let t = Instant::now();
    fs::create_dir_all(&cfg.workdir).map_err(|e| Error::io(&cfg.workdir, e))?;
    let events = synth_generate(&cfg.synth_config()?)?;
    write_events(&cfg.events_path(), &events)?;
    let intervals = cfg.intervals()?;
    let tables = intervals
        .iter()
        .enumerate()
        .map(|(i, iv)| label_cohort(&events, iv, i))
        .collect::<Result<Vec<_>>>()?;
    let cohort = CohortTable::merge(tables)?;
    cohort.write_csv(&cfg.cohort_path())?;
    log::info!(
        "synth: {} events, {} cohort rows ({} positive) in {:.2?}",
        events.len(),
        cohort.rows().len(),
        cohort.n_positive(),
        t.elapsed()
    );
    Ok(())
}

/// Builds the per-interval, per-role bipartite visit graphs over each
/// interval's look-back window.
pub fn run_graphs(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let t = Instant::now();
    let events = load_events(&cfg.events_path())?;
    let cohort = CohortTable::read_csv(&cfg.cohort_path())?;
    let intervals = cfg.intervals()?;
    let mut n_graphs = 0;
    for (i, interval) in intervals.iter().enumerate() {
        let rows = cohort.interval_rows(i);
        if rows.is_empty() {
            return Err(Error::Data(format!(
                "graphs: cohort has no rows for interval {i}"
            )));
        }
        let universe: Vec<String> = rows.iter().map(|r| r.patient_id.clone()).collect();
        let window = lookback_window(cfg, interval)?;
        for &role in &cfg.graphs {
            let g = build_bipartite_graph(&events, role, &universe, &window)?;
            write_graph_csv(&cfg.graph_path(i, role), &g)?;
            n_graphs += 1;
        }
    }
    log::info!("graphs: wrote {n_graphs} graphs in {:.2?}", t.elapsed());
    Ok(())
}

/// Computes the relational-similarity features for every interval from the
/// stored graphs.
pub fn run_extract(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let t = Instant::now();
    let cohort = CohortTable::read_csv(&cfg.cohort_path())?;
    let intervals = cfg.intervals()?;
    let solver = cfg.solver_options("extract");
    for i in 0..intervals.len() {
        let rows = cohort.interval_rows(i);
        if rows.is_empty() {
            return Err(Error::Data(format!(
                "extract: cohort has no rows for interval {i}"
            )));
        }
        let universe: Vec<String> = rows.iter().map(|r| r.patient_id.clone()).collect();
        let graphs = cfg
            .graphs
            .iter()
            .map(|&role| read_graph_csv(&cfg.graph_path(i, role), role, &universe))
            .collect::<Result<Vec<_>>>()?;
        let feats = extract_similarity_features(&graphs, cfg.k, &solver)?;
        write_features_csv(&cfg.features_path(i), &feats)?;
    }
    log::info!(
        "extract: embedded {} intervals x {} graphs (k = {}) in {:.2?}",
        intervals.len(),
        cfg.graphs.len(),
        cfg.k,
        t.elapsed()
    );
    Ok(())
}

/// Column layout shared by training and evaluation.
struct DesignSpec {
    /// Full augmented schema; the baseline uses the first `n_baseline`
    /// columns.
    schema: Vec<String>,
    n_baseline: usize,
    bow_len: usize,
    vocab: Vec<String>,
    top_clinicians: Vec<String>,
    /// Hash-bucket count for the clinician-id channel; 0 when disabled.
    n_clin_buckets: usize,
}

fn design_spec(cfg: &RunConfig, vocab: Vec<String>, top_clinicians: Vec<String>) -> DesignSpec {
    let mut schema = bow_column_names(&vocab, cfg.n_quarters);
    let bow_len = schema.len();
    for b in 0..N_AGE_BUCKETS {
        schema.push(format!("demo:age_b{b}"));
    }
    schema.push("demo:gender".to_string());
    for m in HISTORY_MARKER_CODES {
        schema.push(format!("hist:{m}"));
    }
    // Top-frequency clinician ids are feature-hashed into a fixed bucket
    // space; collisions are deliberate, as in the standard hashing trick.
    let n_clin_buckets = if top_clinicians.is_empty() {
        0
    } else {
        cfg.top_clinicians
    };
    for b in 0..n_clin_buckets {
        schema.push(format!("clin:h{b:02}"));
    }
    let n_baseline = schema.len();
    for role in &cfg.graphs {
        for j in 0..cfg.k {
            schema.push(format!("sim:{}:{j}", role.tag()));
        }
    }
    DesignSpec {
        schema,
        n_baseline,
        bow_len,
        vocab,
        top_clinicians,
        n_clin_buckets,
    }
}

/// Clinician ids ranked by pre-freeze visit volume, most frequent first,
/// ties broken by id.
fn top_clinician_ids(events: &[VisitEvent], freeze: chrono::NaiveDate, n: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in events {
        if e.date >= freeze {
            continue;
        }
        if let Some(c) = &e.clinician_id {
            *counts.entry(c.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(n);
    ranked.into_iter().map(|(c, _)| c.to_string()).collect()
}

/// Assembles one interval's design-matrix rows (augmented layout), aligned
/// with `patients`. The baseline view is the column prefix.
fn assemble_rows(
    cfg: &RunConfig,
    spec: &DesignSpec,
    events: &[VisitEvent],
    interval: &Interval,
    patients: &[String],
    sims: &[SimilarityFeature],
) -> Result<Vec<Vec<(usize, f64)>>> {
    let sim_dim = cfg.graphs.len() * cfg.k;
    if sims.len() != patients.len() {
        return Err(Error::Data(format!(
            "feature file has {} rows for a cohort of {}; rerun extract",
            sims.len(),
            patients.len()
        )));
    }
    for (s, p) in sims.iter().zip(patients) {
        if &s.patient_id != p {
            return Err(Error::Data(format!(
                "feature row for '{}' where cohort expects '{p}'; rerun extract",
                s.patient_id
            )));
        }
        if s.values.len() != sim_dim {
            return Err(Error::Data(format!(
                "feature rows carry {} values, expected {sim_dim}; rerun extract",
                s.values.len()
            )));
        }
    }

    let bow = build_bow_features(events, patients, interval, &spec.vocab, &cfg.bow_config())?;
    let hist = history_flags(events, patients, interval.start());

    let age_offset = spec.bow_len;
    let gender_col = age_offset + N_AGE_BUCKETS;
    let hist_offset = gender_col + 1;
    let clin_offset = hist_offset + HISTORY_MARKER_CODES.len();

    let mut clin_cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); patients.len()];
    if !spec.top_clinicians.is_empty() {
        let window = lookback_window(cfg, interval)?;
        let patient_idx: BTreeMap<&str, usize> = patients
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect();
        let clin_idx: BTreeMap<&str, usize> = spec
            .top_clinicians
            .iter()
            .map(|c| (c.as_str(), fnv1a64(c.as_bytes()) as usize % spec.n_clin_buckets))
            .collect();
        for e in events {
            if !window.contains(e.date) {
                continue;
            }
            let Some(c) = &e.clinician_id else { continue };
            let (Some(&pi), Some(&ci)) =
                (patient_idx.get(e.patient_id.as_str()), clin_idx.get(c.as_str()))
            else {
                continue;
            };
            clin_cols[pi].insert(ci);
        }
    }

    let mut rows = Vec::with_capacity(patients.len());
    for (i, p) in patients.iter().enumerate() {
        let mut row: Vec<(usize, f64)> =
            bow[i].iter().map(|&(c, n)| (c, f64::from(n))).collect();
        let demo = demographics(p);
        row.push((age_offset + demo.age_bucket, 1.0));
        if demo.gender == 1 {
            row.push((gender_col, 1.0));
        }
        for (m, &set) in hist[i].iter().enumerate() {
            if set {
                row.push((hist_offset + m, 1.0));
            }
        }
        for &ci in &clin_cols[i] {
            row.push((clin_offset + ci, 1.0));
        }
        for (j, &v) in sims[i].values.iter().enumerate() {
            if v != 0.0 {
                row.push((spec.n_baseline + j, v));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Trains the baseline and similarity-augmented models on the pooled
/// non-hold-out intervals; freezes and stores the vocabulary and
/// top-clinician list as artifacts.
pub fn run_train(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let t = Instant::now();
    let events = load_events(&cfg.events_path())?;
    let cohort = CohortTable::read_csv(&cfg.cohort_path())?;
    let intervals = cfg.intervals()?;
    let holdout = cfg.holdout_index();
    let freeze = intervals[holdout].start();

    let mut universe: BTreeSet<&str> = BTreeSet::new();
    for i in 0..holdout {
        for row in cohort.interval_rows(i) {
            universe.insert(row.patient_id.as_str());
        }
    }
    if universe.is_empty() {
        return Err(Error::Data("train: no training-interval cohort rows".into()));
    }
    let universe: Vec<String> = universe.into_iter().map(str::to_string).collect();
    let vocab = bow_vocabulary(&events, &universe, freeze, cfg.min_support)?;
    let top = if cfg.clinician_onehots {
        top_clinician_ids(&events, freeze, cfg.top_clinicians)
    } else {
        Vec::new()
    };
    write_lines(&cfg.vocab_path(), &vocab)?;
    write_lines(&cfg.clinicians_path(), &top)?;
    let spec = design_spec(cfg, vocab, top);

    let mut augmented = FeatureMatrix::new(spec.schema.clone());
    let mut baseline = FeatureMatrix::new(spec.schema[..spec.n_baseline].to_vec());
    let mut labels: Vec<u8> = Vec::new();
    for (i, interval) in intervals.iter().enumerate().take(holdout) {
        let rows = cohort.interval_rows(i);
        if rows.is_empty() {
            continue;
        }
        let patients: Vec<String> = rows.iter().map(|r| r.patient_id.clone()).collect();
        let sims = read_features_csv(&cfg.features_path(i))?;
        let design = assemble_rows(cfg, &spec, &events, interval, &patients, &sims)?;
        for (row, cohort_row) in design.into_iter().zip(rows) {
            baseline.push_row(
                row.iter()
                    .take_while(|&&(c, _)| c < spec.n_baseline)
                    .cloned()
                    .collect(),
            )?;
            augmented.push_row(row)?;
            labels.push(cohort_row.label);
        }
    }

    let train_cfg = cfg.train_config();
    let base_fit = train_logistic(&baseline, &labels, &train_cfg)?;
    let aug_fit = train_logistic(&augmented, &labels, &train_cfg)?;
    base_fit.model.save_json(&cfg.model_path(BASELINE))?;
    aug_fit.model.save_json(&cfg.model_path(AUGMENTED))?;
    log::info!(
        "train: {} rows x {} cols ({} epochs baseline, {} augmented) in {:.2?}",
        labels.len(),
        spec.schema.len(),
        base_fit.loss_history.len(),
        aug_fit.loss_history.len(),
        t.elapsed()
    );
    Ok(())
}

fn write_pr_curve(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut text = String::from("recall,precision\n");
    for (r, p) in points {
        text.push_str(&format!("{r},{p}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_topk_curve(path: &Path, points: &[(usize, f64)]) -> Result<()> {
    let mut text = String::from("k,precision\n");
    for (k, p) in points {
        text.push_str(&format!("{k},{p}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Scores the hold-out interval with both stored models and writes their
/// evaluation reports and curve points.
pub fn run_evaluate(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let t = Instant::now();
    let events = load_events(&cfg.events_path())?;
    let cohort = CohortTable::read_csv(&cfg.cohort_path())?;
    let intervals = cfg.intervals()?;
    let holdout = cfg.holdout_index();
    let rows = cohort.interval_rows(holdout);
    if rows.is_empty() {
        return Err(Error::Data("evaluate: hold-out cohort is empty".into()));
    }
    let patients: Vec<String> = rows.iter().map(|r| r.patient_id.clone()).collect();
    let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();

    let vocab = read_lines(&cfg.vocab_path())?;
    let top = read_lines(&cfg.clinicians_path())?;
    let spec = design_spec(cfg, vocab, top);
    let sims = read_features_csv(&cfg.features_path(holdout))?;
    let design = assemble_rows(cfg, &spec, &events, &intervals[holdout], &patients, &sims)?;

    let mut augmented = FeatureMatrix::new(spec.schema.clone());
    let mut baseline = FeatureMatrix::new(spec.schema[..spec.n_baseline].to_vec());
    for row in design {
        baseline.push_row(
            row.iter()
                .take_while(|&&(c, _)| c < spec.n_baseline)
                .cloned()
                .collect(),
        )?;
        augmented.push_row(row)?;
    }

    for (name, matrix) in [(BASELINE, &baseline), (AUGMENTED, &augmented)] {
        let model = LinearModel::load_json(&cfg.model_path(name))?;
        let scores = predict_scores(&model, matrix)?;
        let report = evaluate(&scores, &labels, &patients, &cfg.metric_ks)?;
        report.write_csv(&cfg.report_path(name))?;
        write_pr_curve(&cfg.pr_curve_path(name), &pr_curve_points(&scores, &labels)?)?;
        write_topk_curve(
            &cfg.topk_curve_path(name),
            &precision_curve(&scores, &labels, &patients)?,
        )?;
        log::info!("evaluate[{name}]: pr_auc = {:.4}", report.pr_auc);
    }
    log::info!("evaluate: scored {} hold-out rows in {:.2?}", rows.len(), t.elapsed());
    Ok(())
}

/// Reads both evaluation reports and writes (and returns) the comparison.
pub fn run_compare(cfg: &RunConfig) -> Result<ComparisonTable> {
    cfg.validate()?;
    let base = EvalReport::read_csv(&cfg.report_path(BASELINE))?;
    let aug = EvalReport::read_csv(&cfg.report_path(AUGMENTED))?;
    let table = compare_runs(&base, &aug)?;
    table.write_csv(&cfg.compare_path())?;
    Ok(table)
}

/// The whole pipeline, synth through compare.
pub fn run_all(cfg: &RunConfig) -> Result<ComparisonTable> {
    run_synth(cfg)?;
    run_graphs(cfg)?;
    run_extract(cfg)?;
    run_train(cfg)?;
    run_evaluate(cfg)?;
    run_compare(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    /// Small but non-degenerate config that runs the full pipeline in well
    /// under a second.
    fn small_config(workdir: PathBuf) -> RunConfig {
        RunConfig {
            workdir,
            n_patients: 400,
            n_diag_clinicians: 30,
            n_followup_clinicians: 15,
            visits_per_patient: 6.0,
            k: 3,
            metric_ks: vec![10, 40],
            epochs: 120,
            seed: 11,
            ..RunConfig::default()
        }
    }

    fn artifact_names(cfg: &RunConfig) -> Vec<PathBuf> {
        let mut paths = vec![
            cfg.events_path(),
            cfg.cohort_path(),
            cfg.vocab_path(),
            cfg.clinicians_path(),
            cfg.model_path(BASELINE),
            cfg.model_path(AUGMENTED),
            cfg.report_path(BASELINE),
            cfg.report_path(AUGMENTED),
            cfg.pr_curve_path(BASELINE),
            cfg.pr_curve_path(AUGMENTED),
            cfg.topk_curve_path(BASELINE),
            cfg.topk_curve_path(AUGMENTED),
            cfg.compare_path(),
        ];
        for i in 0..cfg.n_intervals {
            paths.push(cfg.features_path(i));
            for &role in &cfg.graphs {
                paths.push(cfg.graph_path(i, role));
            }
        }
        paths
    }

    #[test]
    fn full_pipeline_emits_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path().to_path_buf());
        let table = run_all(&cfg).unwrap();
        for path in artifact_names(&cfg) {
            assert!(path.is_file(), "missing artifact {}", path.display());
        }
        assert_eq!(table.rows.len(), cfg.metric_ks.len());
        assert!(table.baseline_pr_auc > 0.0 && table.baseline_pr_auc <= 1.0);
        let text = table.render_text();
        assert!(text.contains("pr_auc"), "{text}");
    }

    #[test]
    fn feature_files_have_k_times_graphs_columns() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path().to_path_buf());
        run_all(&cfg).unwrap();
        let feats = read_features_csv(&cfg.features_path(0)).unwrap();
        assert_eq!(feats[0].values.len(), cfg.graphs.len() * cfg.k);
    }

    #[test]
    fn reruns_and_rebuilt_intermediates_are_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let cfg_a = small_config(dir_a.path().to_path_buf());
        run_all(&cfg_a).unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg_b = small_config(dir_b.path().to_path_buf());
        run_all(&cfg_b).unwrap();
        for (pa, pb) in artifact_names(&cfg_a).iter().zip(artifact_names(&cfg_b)) {
            let a = fs::read(pa).unwrap();
            let b = fs::read(&pb).unwrap();
            assert_eq!(a, b, "artifact {} differs between reruns", pa.display());
        }

        // Deleting intermediates and rerunning their stages reproduces them.
        let features0 = cfg_a.features_path(0);
        let before = fs::read(&features0).unwrap();
        fs::remove_file(&features0).unwrap();
        run_extract(&cfg_a).unwrap();
        assert_eq!(fs::read(&features0).unwrap(), before);
    }

    #[test]
    fn stages_fail_cleanly_without_upstream_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path().to_path_buf());
        let err = run_graphs(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
        let err = run_compare(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn disabling_clinician_onehots_shrinks_the_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path().to_path_buf());
        cfg.clinician_onehots = false;
        run_all(&cfg).unwrap();
        let model = LinearModel::load_json(&cfg.model_path(BASELINE)).unwrap();
        assert!(model.schema.iter().all(|c| !c.starts_with("clin:")));
        assert!(read_lines(&cfg.clinicians_path()).unwrap().is_empty());
        let aug = LinearModel::load_json(&cfg.model_path(AUGMENTED)).unwrap();
        let n_sim = aug.schema.iter().filter(|c| c.starts_with("sim:")).count();
        assert_eq!(n_sim, cfg.graphs.len() * cfg.k);
    }
}
