//! Ranking metrics for rare-event prediction: area under the
//! precision-recall curve and precision at fixed cutoffs.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

fn validate_scored_labels(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Data("no scored examples".into()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score at index {i}")));
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::Data(format!("label at index {i} is not 0/1")));
    }
    Ok(())
}

/// Area under the precision-recall curve by the threshold-sweep definition.
///
/// Thresholds are the distinct scores in descending order; at each
/// threshold, all examples scoring at least that much are ranked. Tied
/// scores therefore enter as one block credited with the precision at the
/// block's end, which makes the value independent of input order. Undefined
/// (an error) when either class is absent.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    validate_scored_labels(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "precision-recall curve needs both classes (n_pos = {n_pos}, n_neg = {n_neg})"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut auc = 0.0;
    let mut tp = 0usize;
    let mut rank = 0usize;
    let mut i = 0;
    while i < order.len() {
        // Advance over one block of equal scores.
        let mut block_pos = 0usize;
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            block_pos += usize::from(labels[order[j]] == 1);
            j += 1;
        }
        tp += block_pos;
        rank = j;
        if block_pos > 0 {
            auc += ((block_pos * tp) as f64) / ((rank * n_pos) as f64);
        }
        i = j;
    }
    debug_assert_eq!(rank, scores.len());
    debug_assert_eq!(tp, n_pos);
    Ok(auc)
}

/// Number of true positives among the `k` highest-scored patients, with
/// ties broken by ascending patient id, and the resulting precision.
///
/// Requires `1 <= k <= n` and distinct patient ids, so the ranking (and
/// thus the metric) is fully deterministic.
pub fn precision_at_k(
    scores: &[f64],
    labels: &[u8],
    ids: &[String],
    k: usize,
) -> Result<(usize, f64)> {
    validate_scored_labels(scores, labels)?;
    if ids.len() != scores.len() {
        return Err(Error::Data(format!(
            "{} ids but {} scores",
            ids.len(),
            scores.len()
        )));
    }
    if k == 0 || k > scores.len() {
        return Err(Error::Data(format!(
            "k = {k} must lie in 1..={}",
            scores.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Data(format!("duplicate patient id '{id}'")));
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    let hits = order[..k]
        .iter()
        .filter(|&&i| labels[i] == 1)
        .count();
    Ok((hits, hits as f64 / k as f64))
}

/// Points of the precision-recall curve: `(recall, precision)` at the end
/// of each distinct-score block in descending score order, preceded by the
/// conventional `(0, 1)` anchor. The trapezoid-free area implied by these
/// points is exactly what [`pr_auc`] integrates.
pub fn pr_curve_points(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    validate_scored_labels(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "precision-recall curve needs both classes (n_pos = {n_pos}, n_neg = {n_neg})"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 1.0)];
    let mut tp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            tp += usize::from(labels[order[j]] == 1);
            j += 1;
        }
        points.push((tp as f64 / n_pos as f64, tp as f64 / j as f64));
        i = j;
    }
    Ok(points)
}

/// Precision at every cutoff `k = 1..=n`, under the same deterministic
/// ranking as [`precision_at_k`] (score descending, patient id ascending).
pub fn precision_curve(
    scores: &[f64],
    labels: &[u8],
    ids: &[String],
) -> Result<Vec<(usize, f64)>> {
    validate_scored_labels(scores, labels)?;
    if ids.len() != scores.len() {
        return Err(Error::Data(format!(
            "{} ids but {} scores",
            ids.len(),
            scores.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Data(format!("duplicate patient id '{id}'")));
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    let mut hits = 0usize;
    Ok(order
        .iter()
        .enumerate()
        .map(|(i, &idx)| {
            hits += usize::from(labels[idx] == 1);
            (i + 1, hits as f64 / (i + 1) as f64)
        })
        .collect())
}

/// Precision at one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionAtK {
    pub k: usize,
    pub hits: usize,
    pub precision: f64,
}

/// Evaluation summary for one scored cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub pr_auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// One entry per requested cutoff, ascending.
    pub precision: Vec<PrecisionAtK>,
}

pub const EVAL_CSV_HEADER: &str = "metric,k,value";

/// Scores a labeled cohort at the given cutoffs.
pub fn evaluate(scores: &[f64], labels: &[u8], ids: &[String], ks: &[usize]) -> Result<EvalReport> {
    let auc = pr_auc(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let mut sorted_ks: Vec<usize> = ks.to_vec();
    sorted_ks.sort_unstable();
    sorted_ks.dedup();
    if sorted_ks.is_empty() {
        return Err(Error::Data("no precision cutoffs requested".into()));
    }
    let mut precision = Vec::with_capacity(sorted_ks.len());
    for k in sorted_ks {
        let (hits, p) = precision_at_k(scores, labels, ids, k)?;
        precision.push(PrecisionAtK { k, hits, precision: p });
    }
    Ok(EvalReport {
        pr_auc: auc,
        n_pos,
        n_neg: labels.len() - n_pos,
        precision,
    })
}

impl EvalReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })?;
        let io_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
        wtr.write_record(EVAL_CSV_HEADER.split(',')).map_err(io_err)?;
        wtr.write_record(["pr_auc", "", &format!("{:.16e}", self.pr_auc)])
            .map_err(io_err)?;
        wtr.write_record(["n_pos", "", &self.n_pos.to_string()])
            .map_err(io_err)?;
        wtr.write_record(["n_neg", "", &self.n_neg.to_string()])
            .map_err(io_err)?;
        for p in &self.precision {
            wtr.write_record(["hits_at_k", &p.k.to_string(), &p.hits.to_string()])
                .map_err(io_err)?;
            wtr.write_record([
                "precision_at_k",
                &p.k.to_string(),
                &format!("{:.16e}", p.precision),
            ])
            .map_err(io_err)?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Data(format!("{}: {other:?}", path.display())),
            })?;
        {
            let headers = rdr
                .headers()
                .map_err(|e| Error::parse(path, 1, e.to_string()))?;
            let got = headers.iter().collect::<Vec<_>>().join(",");
            if got != EVAL_CSV_HEADER {
                return Err(Error::parse(
                    path,
                    1,
                    format!("expected header '{EVAL_CSV_HEADER}', got '{got}'"),
                ));
            }
        }
        let mut pr = None;
        let mut n_pos = None;
        let mut n_neg = None;
        let mut hits: Vec<(usize, usize)> = Vec::new();
        let mut precs: Vec<(usize, f64)> = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::parse(path, line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let metric = record.get(0).unwrap_or("");
            let kf = record.get(1).unwrap_or("").trim();
            let value = record.get(2).unwrap_or("").trim();
            let bad = |what: &str| Error::parse(path, line, format!("bad {what} '{value}'"));
            match metric {
                "pr_auc" => pr = Some(value.parse::<f64>().map_err(|_| bad("pr_auc"))?),
                "n_pos" => n_pos = Some(value.parse::<usize>().map_err(|_| bad("n_pos"))?),
                "n_neg" => n_neg = Some(value.parse::<usize>().map_err(|_| bad("n_neg"))?),
                "hits_at_k" | "precision_at_k" => {
                    let k: usize = kf
                        .parse()
                        .map_err(|_| Error::parse(path, line, format!("bad k '{kf}'")))?;
                    if metric == "hits_at_k" {
                        hits.push((k, value.parse().map_err(|_| bad("hits"))?));
                    } else {
                        precs.push((k, value.parse().map_err(|_| bad("precision"))?));
                    }
                }
                other => {
                    return Err(Error::parse(path, line, format!("unknown metric '{other}'")))
                }
            }
        }
        let (Some(pr_auc), Some(n_pos), Some(n_neg)) = (pr, n_pos, n_neg) else {
            return Err(Error::Data(format!(
                "{}: missing pr_auc/n_pos/n_neg rows",
                path.display()
            )));
        };
        if hits.len() != precs.len()
            || hits.iter().zip(&precs).any(|((ka, _), (kb, _))| ka != kb)
        {
            return Err(Error::Data(format!(
                "{}: hits_at_k and precision_at_k rows do not pair up",
                path.display()
            )));
        }
        let precision = hits
            .into_iter()
            .zip(precs)
            .map(|((k, h), (_, p))| PrecisionAtK { k, hits: h, precision: p })
            .collect();
        Ok(EvalReport {
            pr_auc,
            n_pos,
            n_neg,
            precision,
        })
    }
}

/// One cutoff's baseline-versus-proposed comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub k: usize,
    pub baseline_hits: usize,
    pub proposed_hits: usize,
    /// Relative improvement in percent; `None` when the baseline has no
    /// hits to improve upon.
    pub improvement_pct: Option<f64>,
}

/// Side-by-side comparison of two evaluation runs on the same cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub baseline_pr_auc: f64,
    pub proposed_pr_auc: f64,
    pub pr_auc_improvement_pct: Option<f64>,
    pub rows: Vec<CompareRow>,
}

fn pct_change(baseline: f64, proposed: f64) -> Option<f64> {
    if baseline == 0.0 {
        None
    } else {
        Some((proposed - baseline) / baseline * 100.0)
    }
}

/// Joins two reports cutoff-by-cutoff. The reports must describe the same
/// cohort (equal class counts) and the same cutoffs.
pub fn compare_runs(baseline: &EvalReport, proposed: &EvalReport) -> Result<ComparisonTable> {
    if baseline.n_pos != proposed.n_pos || baseline.n_neg != proposed.n_neg {
        return Err(Error::Data(format!(
            "reports describe different cohorts: {}+/{}- vs {}+/{}-",
            baseline.n_pos, baseline.n_neg, proposed.n_pos, proposed.n_neg
        )));
    }
    let bks: Vec<usize> = baseline.precision.iter().map(|p| p.k).collect();
    let pks: Vec<usize> = proposed.precision.iter().map(|p| p.k).collect();
    if bks != pks {
        return Err(Error::Data(format!(
            "reports use different cutoffs: {bks:?} vs {pks:?}"
        )));
    }
    let rows = baseline
        .precision
        .iter()
        .zip(&proposed.precision)
        .map(|(b, p)| CompareRow {
            k: b.k,
            baseline_hits: b.hits,
            proposed_hits: p.hits,
            improvement_pct: pct_change(b.hits as f64, p.hits as f64),
        })
        .collect();
    Ok(ComparisonTable {
        baseline_pr_auc: baseline.pr_auc,
        proposed_pr_auc: proposed.pr_auc,
        pr_auc_improvement_pct: pct_change(baseline.pr_auc, proposed.pr_auc),
        rows,
    })
}

fn fmt_pct(p: Option<f64>) -> String {
    match p {
        Some(v) => format!("{v:+.1}%"),
        None => "n/a".to_string(),
    }
}

pub const COMPARE_CSV_HEADER: &str = "metric,k,baseline,proposed,improvement_pct";

impl ComparisonTable {
    /// Human-readable summary; improvements are rounded to one decimal.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>6} {:>12} {:>12} {:>12}\n",
            "metric", "k", "baseline", "proposed", "improvement"
        ));
        out.push_str(&format!(
            "{:<14} {:>6} {:>12.6} {:>12.6} {:>12}\n",
            "pr_auc",
            "-",
            self.baseline_pr_auc,
            self.proposed_pr_auc,
            fmt_pct(self.pr_auc_improvement_pct)
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14} {:>6} {:>12} {:>12} {:>12}\n",
                "hits_at_k",
                r.k,
                r.baseline_hits,
                r.proposed_hits,
                fmt_pct(r.improvement_pct)
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })?;
        let io_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
        wtr.write_record(COMPARE_CSV_HEADER.split(',')).map_err(io_err)?;
        let pct = |p: Option<f64>| p.map(|v| format!("{v:.1}")).unwrap_or_default();
        wtr.write_record([
            "pr_auc".to_string(),
            String::new(),
            format!("{:.16e}", self.baseline_pr_auc),
            format!("{:.16e}", self.proposed_pr_auc),
            pct(self.pr_auc_improvement_pct),
        ])
        .map_err(io_err)?;
        for r in &self.rows {
            wtr.write_record([
                "hits_at_k".to_string(),
                r.k.to_string(),
                r.baseline_hits.to_string(),
                r.proposed_hits.to_string(),
                pct(r.improvement_pct),
            ])
            .map_err(io_err)?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
