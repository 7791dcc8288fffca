//! Prediction intervals, cohort labeling, and baseline covariates.
//!
//! The study period is cut into consecutive equal-length intervals; the last
//! one is the hold-out. For each interval, the cohort consists of patients
//! already diagnosed before the interval starts and not yet treated; the
//! label records whether treatment begins inside the interval. Baseline
//! covariates are quarterly bag-of-words counts over a look-back window plus
//! hashed demographics and condition-history flags.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Duration, NaiveDate};

use crate::error::{Error, Result};
use crate::graph::{EventType, VisitEvent};

pub const COHORT_CSV_HEADER: &str = "patient_id,interval_index,label";

/// Half-open date range [start, end).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    start: NaiveDate,
    end: NaiveDate,
}

impl Interval {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start >= end {
            return Err(Error::Data(format!(
                "interval start {start} must precede end {end}"
            )));
        }
        Ok(Interval { start, end })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d < self.end
    }

    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days()
    }
}

/// Splits [start, end) into `n` consecutive intervals of near-equal length.
///
/// When the span does not divide evenly, the leftover days go to the
/// earliest intervals, so lengths are non-increasing and differ by at most
/// one day. Requires at least one day per interval.
pub fn split_intervals(start: NaiveDate, end: NaiveDate, n: usize) -> Result<Vec<Interval>> {
    if start >= end {
        return Err(Error::Data(format!(
            "split_intervals: start {start} must precede end {end}"
        )));
    }
    if n == 0 {
        return Err(Error::Data("split_intervals: n must be at least 1".into()));
    }
    let total = (end - start).num_days();
    if (total as u64) < n as u64 {
        return Err(Error::Data(format!(
            "split_intervals: {total} days cannot form {n} non-empty intervals"
        )));
    }
    let base = total / n as i64;
    let rem = total % n as i64;
    let mut out = Vec::with_capacity(n);
    let mut cur = start;
    for i in 0..n as i64 {
        let len = base + i64::from(i < rem);
        let next = cur + Duration::days(len);
        out.push(Interval::new(cur, next)?);
        cur = next;
    }
    debug_assert_eq!(cur, end);
    Ok(out)
}

/// One labeled patient-interval pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortRow {
    pub patient_id: String,
    pub interval_index: usize,
    pub label: u8,
}

/// Labeled cohort rows, sorted by (interval_index, patient_id) with no
/// duplicate pairs and labels in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CohortTable {
    rows: Vec<CohortRow>,
}

impl CohortTable {
    pub fn from_rows(mut rows: Vec<CohortRow>) -> Result<Self> {
        rows.sort_by(|a, b| {
            (a.interval_index, a.patient_id.as_str()).cmp(&(b.interval_index, b.patient_id.as_str()))
        });
        for w in rows.windows(2) {
            if w[0].interval_index == w[1].interval_index && w[0].patient_id == w[1].patient_id {
                return Err(Error::Data(format!(
                    "duplicate cohort row for patient '{}' in interval {}",
                    w[0].patient_id, w[0].interval_index
                )));
            }
        }
        if let Some(r) = rows.iter().find(|r| r.label > 1) {
            return Err(Error::Data(format!(
                "label {} for patient '{}' is not 0/1",
                r.label, r.patient_id
            )));
        }
        Ok(CohortTable { rows })
    }

    pub fn merge(tables: Vec<CohortTable>) -> Result<Self> {
        Self::from_rows(tables.into_iter().flat_map(|t| t.rows).collect())
    }

    pub fn rows(&self) -> &[CohortRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows of one interval (the table is sorted by interval first).
    pub fn interval_rows(&self, interval_index: usize) -> &[CohortRow] {
        let lo = self.rows.partition_point(|r| r.interval_index < interval_index);
        let hi = self.rows.partition_point(|r| r.interval_index <= interval_index);
        &self.rows[lo..hi]
    }

    pub fn n_positive(&self) -> usize {
        self.rows.iter().filter(|r| r.label == 1).count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })?;
        let io_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
        wtr.write_record(COHORT_CSV_HEADER.split(',')).map_err(io_err)?;
        for r in &self.rows {
            wtr.write_record([
                r.patient_id.as_str(),
                &r.interval_index.to_string(),
                &r.label.to_string(),
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
            if got != COHORT_CSV_HEADER {
                return Err(Error::parse(
                    path,
                    1,
                    format!("expected header '{COHORT_CSV_HEADER}', got '{got}'"),
                ));
            }
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::parse(path, line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let patient_id = record.get(0).unwrap_or("").trim().to_string();
            if patient_id.is_empty() {
                return Err(Error::parse(path, line, "empty patient_id"));
            }
            let interval_index: usize = record
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, "interval_index must be an integer"))?;
            let label: u8 = record
                .get(2)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, "label must be 0 or 1"))?;
            if label > 1 {
                return Err(Error::parse(path, line, "label must be 0 or 1"));
            }
            rows.push(CohortRow {
                patient_id,
                interval_index,
                label,
            });
        }
        Self::from_rows(rows)
    }
}

/// Labels one interval's cohort.
///
/// A patient enters the cohort when some diagnosis event predates the
/// interval start and no treatment does; the label is 1 exactly when the
/// first treatment falls inside the interval. Patients treated before the
/// interval are at-risk no longer and are excluded.
pub fn label_cohort(
    events: &[VisitEvent],
    interval: &Interval,
    interval_index: usize,
) -> Result<CohortTable> {
    #[derive(Default)]
    struct Acc {
        first_diagnosis: Option<NaiveDate>,
        first_treatment: Option<NaiveDate>,
    }
    let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
    for e in events {
        let a = acc.entry(e.patient_id.as_str()).or_default();
        match e.event_type {
            EventType::Diagnosis => {
                if a.first_diagnosis.is_none_or(|d| e.date < d) {
                    a.first_diagnosis = Some(e.date);
                }
            }
            EventType::Treatment => {
                if a.first_treatment.is_none_or(|d| e.date < d) {
                    a.first_treatment = Some(e.date);
                }
            }
            EventType::Service => {}
        }
    }
    let mut rows = Vec::new();
    for (patient, a) in acc {
        let Some(diag) = a.first_diagnosis else {
            continue;
        };
        if diag >= interval.start() {
            continue;
        }
        if let Some(t) = a.first_treatment {
            if t < interval.start() {
                continue;
            }
            rows.push(CohortRow {
                patient_id: patient.to_string(),
                interval_index,
                label: u8::from(interval.contains(t)),
            });
        } else {
            rows.push(CohortRow {
                patient_id: patient.to_string(),
                interval_index,
                label: 0,
            });
        }
    }
    CohortTable::from_rows(rows)
}

/// Bag-of-words layout parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BowConfig {
    /// Look-back window length, ending at the interval start.
    pub lookback_days: i64,
    /// Number of equal sub-windows the look-back is cut into.
    pub n_quarters: usize,
    /// Minimum fraction of universe patients a code must touch (before the
    /// freeze date) to enter the vocabulary.
    pub min_support: f64,
}

impl Default for BowConfig {
    fn default() -> Self {
        BowConfig {
            lookback_days: 365,
            n_quarters: 4,
            min_support: 0.01,
        }
    }
}

/// Builds the code vocabulary from diagnosis/service events strictly before
/// `freeze`: a code is kept when at least `min_support` of the universe
/// patients have it. Returned sorted, so vocabulary indices are stable.
pub fn bow_vocabulary(
    events: &[VisitEvent],
    universe: &[String],
    freeze: NaiveDate,
    min_support: f64,
) -> Result<Vec<String>> {
    if !(0.0..=1.0).contains(&min_support) {
        return Err(Error::Data(format!(
            "min_support {min_support} must lie in [0, 1]"
        )));
    }
    if universe.is_empty() {
        return Err(Error::Data("bow_vocabulary: empty patient universe".into()));
    }
    let in_universe: BTreeSet<&str> = universe.iter().map(|s| s.as_str()).collect();
    let mut support: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in events {
        if e.date >= freeze || e.code.is_empty() {
            continue;
        }
        if !matches!(e.event_type, EventType::Diagnosis | EventType::Service) {
            continue;
        }
        if !in_universe.contains(e.patient_id.as_str()) {
            continue;
        }
        support
            .entry(e.code.as_str())
            .or_default()
            .insert(e.patient_id.as_str());
    }
    let threshold = min_support * universe.len() as f64;
    Ok(support
        .into_iter()
        .filter(|(_, patients)| patients.len() as f64 >= threshold)
        .map(|(code, _)| code.to_string())
        .collect())
}

/// Quarterly bag-of-words counts for one interval's cohort.
///
/// The look-back window is the `lookback_days` before the interval start,
/// split into `n_quarters` sub-windows (earliest first, longer sub-windows
/// first on uneven division). Row `i` belongs to `patients[i]`; entries are
/// `(quarter * vocab.len() + code_index, count)` pairs for diagnosis and
/// service events only, sorted by column.
pub fn build_bow_features(
    events: &[VisitEvent],
    patients: &[String],
    interval: &Interval,
    vocab: &[String],
    cfg: &BowConfig,
) -> Result<Vec<Vec<(usize, u32)>>> {
    if cfg.n_quarters == 0 {
        return Err(Error::Data("n_quarters must be at least 1".into()));
    }
    if cfg.lookback_days < cfg.n_quarters as i64 {
        return Err(Error::Data(format!(
            "lookback of {} days cannot hold {} quarters",
            cfg.lookback_days, cfg.n_quarters
        )));
    }
    let window_start = interval.start() - Duration::days(cfg.lookback_days);
    let quarters = split_intervals(window_start, interval.start(), cfg.n_quarters)?;
    let vocab_idx: BTreeMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let patient_idx: BTreeMap<&str, usize> = patients
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();

    let mut counts: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for e in events {
        if !matches!(e.event_type, EventType::Diagnosis | EventType::Service) {
            continue;
        }
        let Some(&pi) = patient_idx.get(e.patient_id.as_str()) else {
            continue;
        };
        let Some(&ci) = vocab_idx.get(e.code.as_str()) else {
            continue;
        };
        if e.date < window_start || e.date >= interval.start() {
            continue;
        }
        let q = quarters
            .iter()
            .position(|iv| iv.contains(e.date))
            .expect("date in look-back window lies in exactly one quarter");
        *counts.entry((pi, q * vocab.len() + ci)).or_insert(0) += 1;
    }

    let mut rows = vec![Vec::new(); patients.len()];
    for ((pi, col), n) in counts {
        rows[pi].push((col, n));
    }
    Ok(rows)
}

/// Column names matching [`build_bow_features`] layout.
pub fn bow_column_names(vocab: &[String], n_quarters: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(n_quarters * vocab.len());
    for q in 0..n_quarters {
        for code in vocab {
            names.push(format!("bow:q{q}:{code}"));
        }
    }
    names
}

pub const N_AGE_BUCKETS: usize = 6;

/// Condition-history marker codes tracked as explicit flags.
pub const HISTORY_MARKER_CODES: [&str; 11] = [
    "M00", "M01", "M02", "M03", "M04", "M05", "M06", "M07", "M08", "M09", "M10",
];

/// Deterministic demographics derived from the patient identifier.
///
/// The event log carries no demographics table, so age bucket and gender are
/// a stable hash of the id: the same patient always maps to the same values,
/// independent of the event log contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Demographics {
    pub age_bucket: usize,
    pub gender: usize,
}

pub fn demographics(patient_id: &str) -> Demographics {
    let h = fnv1a64(patient_id.as_bytes());
    Demographics {
        age_bucket: ((h >> 8) % N_AGE_BUCKETS as u64) as usize,
        gender: ((h >> 40) & 1) as usize,
    }
}

/// 64-bit FNV-1a; used for hashed demographics and for deriving per-stage
/// random seeds from the root seed.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Per-patient condition-history flags: flag `i` is set when the patient has
/// a diagnosis/service event with code `HISTORY_MARKER_CODES[i]` strictly
/// before `cutoff`.
pub fn history_flags(
    events: &[VisitEvent],
    patients: &[String],
    cutoff: NaiveDate,
) -> Vec<[bool; HISTORY_MARKER_CODES.len()]> {
    let patient_idx: BTreeMap<&str, usize> = patients
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let marker_idx: BTreeMap<&str, usize> = HISTORY_MARKER_CODES
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let mut flags = vec![[false; HISTORY_MARKER_CODES.len()]; patients.len()];
    for e in events {
        if e.date >= cutoff {
            continue;
        }
        if !matches!(e.event_type, EventType::Diagnosis | EventType::Service) {
            continue;
        }
        let (Some(&pi), Some(&mi)) = (
            patient_idx.get(e.patient_id.as_str()),
            marker_idx.get(e.code.as_str()),
        ) else {
            continue;
        };
        flags[pi][mi] = true;
    }
    flags
}
