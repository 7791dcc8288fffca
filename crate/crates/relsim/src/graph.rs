//! Visit-level event log and role-specific bipartite clinician-patient
//! graphs.
//!
//! An event log row is `patient_id,clinician_id,date,event_type,role,code`.
//! Diagnosis and service rows carry the clinician and the care role (DIAG
//! for the diagnosing relationship, FOLLOWUP for ongoing care); treatment
//! rows mark therapy initiation and carry no care role. A bipartite graph
//! collects, for one care role and one observation window, the number of
//! visits between each clinician and each patient of a fixed universe.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::cohort::Interval;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub const EVENT_LOG_HEADER: &str = "patient_id,clinician_id,date,event_type,role,code";
pub const GRAPH_CSV_HEADER: &str = "clinician_id,patient_id,weight";

const DATE_FMT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventType {
    Diagnosis,
    Service,
    Treatment,
}

impl EventType {
    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Diagnosis => "DIAGNOSIS",
            EventType::Service => "SERVICE",
            EventType::Treatment => "TREATMENT",
        }
    }
}

impl FromStr for EventType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "DIAGNOSIS" => Ok(EventType::Diagnosis),
            "SERVICE" => Ok(EventType::Service),
            "TREATMENT" => Ok(EventType::Treatment),
            other => Err(format!("unknown event_type '{other}'")),
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Diag,
    Followup,
    Na,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Diag => "DIAG",
            Role::Followup => "FOLLOWUP",
            Role::Na => "NA",
        }
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "DIAG" => Ok(Role::Diag),
            "FOLLOWUP" => Ok(Role::Followup),
            "NA" => Ok(Role::Na),
            other => Err(format!("unknown role '{other}'")),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The two care roles a bipartite graph can be built over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphRole {
    Diag,
    Followup,
}

impl GraphRole {
    pub fn tag(self) -> &'static str {
        match self {
            GraphRole::Diag => "diag",
            GraphRole::Followup => "followup",
        }
    }

    pub fn event_role(self) -> Role {
        match self {
            GraphRole::Diag => Role::Diag,
            GraphRole::Followup => Role::Followup,
        }
    }
}

impl FromStr for GraphRole {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "diag" => Ok(GraphRole::Diag),
            "followup" => Ok(GraphRole::Followup),
            other => Err(format!("unknown graph role '{other}'")),
        }
    }
}

/// One row of the visit-level event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitEvent {
    pub patient_id: String,
    /// Present on clinician-mediated rows; lab results and treatment
    /// initiations may omit it.
    pub clinician_id: Option<String>,
    pub date: NaiveDate,
    pub event_type: EventType,
    pub role: Role,
    pub code: String,
}

/// Reads and validates an event log.
///
/// Every malformed row is a hard error naming the file and line: a header
/// that does not match [`EVENT_LOG_HEADER`], an unparseable date, an unknown
/// event type or role, a treatment row with a care role, or a DIAG/FOLLOWUP
/// row without a clinician.
pub fn load_events(path: &Path) -> Result<Vec<VisitEvent>> {
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
        if got != EVENT_LOG_HEADER {
            return Err(Error::parse(
                path,
                1,
                format!("expected header '{EVENT_LOG_HEADER}', got '{got}'"),
            ));
        }
    }

    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");

        let patient_id = field(0).trim().to_string();
        if patient_id.is_empty() {
            return Err(Error::parse(path, line, "empty patient_id"));
        }
        let clinician_raw = field(1).trim();
        let clinician_id = if clinician_raw.is_empty() {
            None
        } else {
            Some(clinician_raw.to_string())
        };
        let date = NaiveDate::parse_from_str(field(2).trim(), DATE_FMT).map_err(|_| {
            Error::parse(
                path,
                line,
                format!("invalid date '{}', expected YYYY-MM-DD", field(2)),
            )
        })?;
        let event_type: EventType = field(3)
            .trim()
            .parse()
            .map_err(|m| Error::parse(path, line, m))?;
        let role: Role = field(4)
            .trim()
            .parse()
            .map_err(|m| Error::parse(path, line, m))?;
        let code = field(5).trim().to_string();

        if event_type == EventType::Treatment && role != Role::Na {
            return Err(Error::parse(
                path,
                line,
                "treatment rows must have role NA",
            ));
        }
        if matches!(role, Role::Diag | Role::Followup) && clinician_id.is_none() {
            return Err(Error::parse(
                path,
                line,
                format!("role {role} requires a clinician_id"),
            ));
        }

        events.push(VisitEvent {
            patient_id,
            clinician_id,
            date,
            event_type,
            role,
            code,
        });
    }
    Ok(events)
}

/// Writes an event log in the canonical column order.
pub fn write_events(path: &Path, events: &[VisitEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    })?;
    let io_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    wtr.write_record(EVENT_LOG_HEADER.split(','))
        .map_err(io_err)?;
    for e in events {
        wtr.write_record([
            e.patient_id.as_str(),
            e.clinician_id.as_deref().unwrap_or(""),
            &e.date.format(DATE_FMT).to_string(),
            e.event_type.as_str(),
            e.role.as_str(),
            e.code.as_str(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Weighted bipartite graph between the clinicians active in one care role
/// and a fixed patient universe.
///
/// Clinicians are sorted lexicographically; patients keep the universe
/// order. Edge weights are visit counts, so they are positive integers.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    role: GraphRole,
    clinicians: Vec<String>,
    patients: Vec<String>,
    /// (clinician index, patient index, count), sorted by (clinician,
    /// patient).
    edges: Vec<(usize, usize, u64)>,
}

impl BipartiteGraph {
    pub fn role(&self) -> GraphRole {
        self.role
    }

    pub fn n_clinicians(&self) -> usize {
        self.clinicians.len()
    }

    pub fn n_patients(&self) -> usize {
        self.patients.len()
    }

    pub fn clinicians(&self) -> &[String] {
        &self.clinicians
    }

    pub fn patients(&self) -> &[String] {
        &self.patients
    }

    pub fn edges(&self) -> &[(usize, usize, u64)] {
        &self.edges
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|&(_, _, w)| w).sum()
    }
}

/// Builds the bipartite graph for one care role over an observation window.
///
/// Counts every event with the matching role whose date lies in `window`
/// (start inclusive, end exclusive) and whose patient belongs to
/// `patient_universe`; events for other patients are ignored. The clinician
/// side is exactly the set of clinicians with at least one counted visit.
pub fn build_bipartite_graph(
    events: &[VisitEvent],
    role: GraphRole,
    patient_universe: &[String],
    window: &Interval,
) -> Result<BipartiteGraph> {
    if patient_universe.is_empty() {
        return Err(Error::Data(
            "build_bipartite_graph: empty patient universe".into(),
        ));
    }
    let mut patient_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, p) in patient_universe.iter().enumerate() {
        if patient_index.insert(p.as_str(), i).is_some() {
            return Err(Error::Data(format!(
                "build_bipartite_graph: duplicate patient id '{p}' in universe"
            )));
        }
    }

    let wanted = role.event_role();
    let mut clinician_set: BTreeSet<&str> = BTreeSet::new();
    let mut hits: Vec<(&str, usize)> = Vec::new();
    for e in events {
        if e.role != wanted || !window.contains(e.date) {
            continue;
        }
        let Some(pi) = patient_index.get(e.patient_id.as_str()) else {
            continue;
        };
        // load_events guarantees DIAG/FOLLOWUP rows carry a clinician, but
        // events may be built programmatically too.
        let Some(c) = e.clinician_id.as_deref() else {
            return Err(Error::Data(format!(
                "event for patient '{}' has role {} without a clinician",
                e.patient_id, e.role
            )));
        };
        clinician_set.insert(c);
        hits.push((c, *pi));
    }

    let clinicians: Vec<String> = clinician_set.iter().map(|s| s.to_string()).collect();
    let clinician_idx: BTreeMap<&str, usize> = clinician_set
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();

    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (c, pi) in hits {
        *counts.entry((clinician_idx[c], pi)).or_insert(0) += 1;
    }
    let edges: Vec<(usize, usize, u64)> = counts
        .into_iter()
        .map(|((ci, pi), w)| (ci, pi, w))
        .collect();

    Ok(BipartiteGraph {
        role,
        clinicians,
        patients: patient_universe.to_vec(),
        edges,
    })
}

/// Symmetric adjacency of the bipartite graph: clinicians occupy indices
/// `0..M`, patients `M..M+N`, and each edge contributes its weight in both
/// orientations. Patients without visits become all-zero rows.
pub fn adjacency_matrix(g: &BipartiteGraph) -> SparseMatrix {
    let m = g.n_clinicians();
    let dim = m + g.n_patients();
    let mut trips = Vec::with_capacity(2 * g.edges.len());
    for &(ci, pi, w) in &g.edges {
        trips.push((ci, m + pi, w as f64));
        trips.push((m + pi, ci, w as f64));
    }
    SparseMatrix::from_triplets(dim, &trips)
        .expect("graph indices are in bounds by construction")
}

/// Writes a graph's edge list as CSV, sorted by (clinician, patient) index,
/// so identical graphs serialize to identical bytes.
pub fn write_graph_csv(path: &Path, g: &BipartiteGraph) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    })?;
    let io_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    wtr.write_record(GRAPH_CSV_HEADER.split(',')).map_err(io_err)?;
    for &(ci, pi, w) in &g.edges {
        wtr.write_record([
            g.clinicians[ci].as_str(),
            g.patients[pi].as_str(),
            &w.to_string(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a graph edge list back against a known patient universe.
pub fn read_graph_csv(
    path: &Path,
    role: GraphRole,
    patient_universe: &[String],
) -> Result<BipartiteGraph> {
    let mut patient_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, p) in patient_universe.iter().enumerate() {
        if patient_index.insert(p.as_str(), i).is_some() {
            return Err(Error::Data(format!(
                "read_graph_csv: duplicate patient id '{p}' in universe"
            )));
        }
    }
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
        if got != GRAPH_CSV_HEADER {
            return Err(Error::parse(
                path,
                1,
                format!("expected header '{GRAPH_CSV_HEADER}', got '{got}'"),
            ));
        }
    }

    let mut clinician_set: BTreeSet<String> = BTreeSet::new();
    let mut raw: Vec<(String, usize, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let c = record.get(0).unwrap_or("").trim().to_string();
        let p = record.get(1).unwrap_or("").trim();
        let w: u64 = record
            .get(2)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, "weight must be a positive integer"))?;
        if c.is_empty() {
            return Err(Error::parse(path, line, "empty clinician_id"));
        }
        if w == 0 {
            return Err(Error::parse(path, line, "zero-weight edge"));
        }
        let Some(&pi) = patient_index.get(p) else {
            return Err(Error::parse(
                path,
                line,
                format!("patient '{p}' is not in the cohort universe"),
            ));
        };
        clinician_set.insert(c.clone());
        raw.push((c, pi, w));
    }
    let clinicians: Vec<String> = clinician_set.iter().cloned().collect();
    let clinician_idx: BTreeMap<&str, usize> = clinicians
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut edges: Vec<(usize, usize, u64)> = Vec::with_capacity(raw.len());
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (c, pi, w) in raw {
        let ci = clinician_idx[c.as_str()];
        if !seen.insert((ci, pi)) {
            return Err(Error::Data(format!(
                "{}: duplicate edge ({c}, {})",
                path.display(),
                patient_universe[pi]
            )));
        }
        edges.push((ci, pi, w));
    }
    edges.sort_unstable();
    Ok(BipartiteGraph {
        role,
        clinicians,
        patients: patient_universe.to_vec(),
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FMT).unwrap()
    }

    fn ev(p: &str, c: &str, date: &str, ty: EventType, role: Role, code: &str) -> VisitEvent {
        VisitEvent {
            patient_id: p.to_string(),
            clinician_id: if c.is_empty() {
                None
            } else {
                Some(c.to_string())
            },
            date: d(date),
            event_type: ty,
            role,
            code: code.to_string(),
        }
    }

    fn write_log(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_round_trips_through_write() {
        let events = vec![
            ev("p1", "c1", "2017-03-01", EventType::Diagnosis, Role::Diag, "CLL"),
            ev("p1", "c2", "2017-04-02", EventType::Service, Role::Followup, "S01"),
            ev("p1", "", "2017-05-03", EventType::Treatment, Role::Na, "TRT"),
            ev("p2", "", "2017-05-04", EventType::Service, Role::Na, "LAB"),
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_events(f.path(), &events).unwrap();
        let back = load_events(f.path()).unwrap();
        assert_eq!(back, events);
    }

    #[test]
    fn load_rejects_wrong_header() {
        let f = write_log("patient,clinician,date,event_type,role,code\n");
        let err = load_events(f.path()).unwrap_err();
        assert!(err.to_string().contains("expected header"));
    }

    #[test]
    fn load_rejects_bad_rows_with_line_numbers() {
        let header = EVENT_LOG_HEADER;
        let cases = [
            // (row, expected message fragment)
            ("p1,c1,2017-13-01,SERVICE,DIAG,S1", "invalid date"),
            ("p1,c1,2017-01-01,VISIT,DIAG,S1", "unknown event_type"),
            ("p1,c1,2017-01-01,SERVICE,PRIMARY,S1", "unknown role"),
            ("p1,c1,2017-01-01,TREATMENT,DIAG,T1", "role NA"),
            ("p1,,2017-01-01,SERVICE,DIAG,S1", "requires a clinician"),
            (",c1,2017-01-01,SERVICE,DIAG,S1", "empty patient_id"),
            ("p1,c1,2017-01-01,SERVICE,DIAG", "fields"),
        ];
        for (row, fragment) in cases {
            let f = write_log(&format!("{header}\n{row}\n"));
            let err = load_events(f.path()).unwrap_err();
            let msg = err.to_string();
            assert!(
                msg.contains(fragment) && msg.contains(":2"),
                "case '{row}': got '{msg}'"
            );
        }
    }

    fn sample_events() -> Vec<VisitEvent> {
        vec![
            ev("p1", "c1", "2017-02-01", EventType::Service, Role::Diag, "S1"),
            ev("p1", "c1", "2017-03-01", EventType::Service, Role::Diag, "S1"),
            ev("p2", "c1", "2017-02-15", EventType::Service, Role::Diag, "S2"),
            ev("p2", "c2", "2017-02-20", EventType::Service, Role::Followup, "S2"),
            // Outside the window.
            ev("p1", "c9", "2018-02-01", EventType::Service, Role::Diag, "S1"),
            // Unknown patient: ignored.
            ev("px", "c1", "2017-02-01", EventType::Service, Role::Diag, "S1"),
        ]
    }

    fn universe() -> Vec<String> {
        vec!["p1".into(), "p2".into(), "p3".into()]
    }

    fn window() -> Interval {
        Interval::new(d("2017-01-01"), d("2018-01-01")).unwrap()
    }

    #[test]
    fn builds_role_filtered_counted_graph() {
        let g =
            build_bipartite_graph(&sample_events(), GraphRole::Diag, &universe(), &window())
                .unwrap();
        assert_eq!(g.clinicians(), &["c1".to_string()]);
        assert_eq!(g.patients(), &universe()[..]);
        assert_eq!(g.edges(), &[(0, 0, 2), (0, 1, 1)]);
        assert_eq!(g.total_weight(), 3);

        let gf = build_bipartite_graph(
            &sample_events(),
            GraphRole::Followup,
            &universe(),
            &window(),
        )
        .unwrap();
        assert_eq!(gf.clinicians(), &["c2".to_string()]);
        assert_eq!(gf.edges(), &[(0, 1, 1)]);
    }

    #[test]
    fn window_is_half_open() {
        let events = vec![
            ev("p1", "c1", "2017-01-01", EventType::Service, Role::Diag, "S1"),
            ev("p1", "c1", "2018-01-01", EventType::Service, Role::Diag, "S1"),
            ev("p1", "c1", "2017-12-31", EventType::Service, Role::Diag, "S1"),
        ];
        let g = build_bipartite_graph(&events, GraphRole::Diag, &universe(), &window()).unwrap();
        // 2017-01-01 and 2017-12-31 count; 2018-01-01 does not.
        assert_eq!(g.total_weight(), 2);
    }

    #[test]
    fn event_order_does_not_matter() {
        let mut events = sample_events();
        let g1 =
            build_bipartite_graph(&events, GraphRole::Diag, &universe(), &window()).unwrap();
        events.reverse();
        let g2 =
            build_bipartite_graph(&events, GraphRole::Diag, &universe(), &window()).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn clinicians_are_sorted() {
        let events = vec![
            ev("p1", "zc", "2017-02-01", EventType::Service, Role::Diag, "S1"),
            ev("p1", "ac", "2017-02-02", EventType::Service, Role::Diag, "S1"),
            ev("p1", "mc", "2017-02-03", EventType::Service, Role::Diag, "S1"),
        ];
        let g = build_bipartite_graph(&events, GraphRole::Diag, &universe(), &window()).unwrap();
        assert_eq!(
            g.clinicians(),
            &["ac".to_string(), "mc".to_string(), "zc".to_string()]
        );
    }

    #[test]
    fn universe_must_be_nonempty_without_duplicates() {
        let err = build_bipartite_graph(&sample_events(), GraphRole::Diag, &[], &window());
        assert!(err.is_err());
        let dup = vec!["p1".to_string(), "p1".to_string()];
        let err = build_bipartite_graph(&sample_events(), GraphRole::Diag, &dup, &window());
        assert!(err.is_err());
    }

    #[test]
    fn adjacency_blocks_are_mirrored() {
        // One clinician, two visits to p1 and one to p2:
        // A = [[0,2,1,0],[2,0,0,0],[1,0,0,0],[0,0,0,0]] over (c1,p1,p2,p3).
        let events = vec![
            ev("p1", "c1", "2017-02-01", EventType::Service, Role::Diag, "S1"),
            ev("p1", "c1", "2017-03-01", EventType::Service, Role::Diag, "S1"),
            ev("p2", "c1", "2017-02-15", EventType::Service, Role::Diag, "S2"),
        ];
        let g = build_bipartite_graph(&events, GraphRole::Diag, &universe(), &window()).unwrap();
        let a = adjacency_matrix(&g);
        assert_eq!(a.dim(), 4);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.spmv(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![0.0, 2.0, 1.0, 0.0]);
        assert!(a.is_symmetric(0.0));
        // p3 never visits: all-zero row.
        let (cols, _) = a.row(3);
        assert!(cols.is_empty());
        assert_eq!(a.row_sums(), vec![3.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn graph_csv_round_trip_is_exact() {
        let g =
            build_bipartite_graph(&sample_events(), GraphRole::Diag, &universe(), &window())
                .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_graph_csv(f.path(), &g).unwrap();
        let back = read_graph_csv(f.path(), GraphRole::Diag, &universe()).unwrap();
        assert_eq!(back, g);
        // Writing the round-tripped graph again yields identical bytes.
        let f2 = tempfile::NamedTempFile::new().unwrap();
        write_graph_csv(f2.path(), &back).unwrap();
        assert_eq!(
            std::fs::read(f.path()).unwrap(),
            std::fs::read(f2.path()).unwrap()
        );
    }

    #[test]
    fn graph_csv_rejects_unknown_patient_and_bad_weight() {
        let f = write_log("clinician_id,patient_id,weight\nc1,zz,1\n");
        assert!(read_graph_csv(f.path(), GraphRole::Diag, &universe()).is_err());
        let f = write_log("clinician_id,patient_id,weight\nc1,p1,0\n");
        assert!(read_graph_csv(f.path(), GraphRole::Diag, &universe()).is_err());
        let f = write_log("clinician_id,patient_id,weight\nc1,p1,1.5\n");
        assert!(read_graph_csv(f.path(), GraphRole::Diag, &universe()).is_err());
    }
}
