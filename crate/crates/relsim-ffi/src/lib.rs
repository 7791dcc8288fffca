//! C ABI over the relsim core.
//!
//! Shape of the interface: opaque handles behind pointers, a status-code
//! enum mirroring the CLI's exit-code taxonomy, and a thread-local
//! last-error message. Every constructor has a matching `_free`, every
//! returned string is released with `relsim_string_free`, and every
//! entry point catches panics at the boundary so unwinding never crosses
//! into C.
//!
//! The authoritative C declarations live in `include/relsim.h`, generated
//! from this file by the build script.

use std::any::Any;
use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;
use std::str::FromStr;

use relsim::cohort::Interval;
use relsim::config::RunConfig;
use relsim::eigen::SolverOptions;
use relsim::features::extract_similarity_features;
use relsim::graph::{build_bipartite_graph, load_events, GraphRole};
use relsim::metrics::ComparisonTable;
use relsim::pipeline;
use relsim::Error;

/// Outcome of a relsim call. `RELSIM_STATUS_OK` is zero; the nonzero codes
/// match the CLI's exit codes (1 usage, 2 data, 3 numerical), with
/// `RELSIM_STATUS_INTERNAL_ERROR` reserved for caught panics.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelsimStatus {
    Ok = 0,
    InvalidArgument = 1,
    DataError = 2,
    NumericalError = 3,
    InternalError = 4,
}

/// Pipeline configuration; starts at the built-in defaults.
pub struct RelsimConfig {
    inner: RunConfig,
}

/// Result of a full pipeline run: hold-out PR-AUC and hits@k for the
/// baseline and the similarity-augmented model.
pub struct RelsimComparison {
    inner: ComparisonTable,
}

/// Per-patient relational-similarity features extracted from an event log.
pub struct RelsimFeatures {
    ids: Vec<CString>,
    dim: usize,
    /// Row-major `ids.len() x dim`.
    values: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type ApiResult<T> = Result<T, (RelsimStatus, String)>;

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', "?");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(sanitized).expect("NULs removed"));
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

fn status_for(e: &Error) -> RelsimStatus {
    match e.exit_code() {
        1 => RelsimStatus::InvalidArgument,
        2 => RelsimStatus::DataError,
        _ => RelsimStatus::NumericalError,
    }
}

fn from_core(e: Error) -> (RelsimStatus, String) {
    (status_for(&e), e.to_string())
}

fn invalid(msg: impl Into<String>) -> (RelsimStatus, String) {
    (RelsimStatus::InvalidArgument, msg.into())
}

fn panic_text(payload: Box<dyn Any + Send>) -> String {
    let detail = payload
        .downcast_ref::<&str>()
        .map(|s| (*s).to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into());
    format!("internal panic: {detail}")
}

/// Runs `body`, converting its error — or a panic — into a status code
/// plus thread-local message.
fn complete_status<F>(body: F) -> RelsimStatus
where
    F: FnOnce() -> ApiResult<()>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RelsimStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            set_error(&panic_text(payload));
            RelsimStatus::InternalError
        }
    }
}

/// Pointer-returning variant of `complete_status`: NULL signals failure.
fn complete_ptr<T, F>(body: F) -> *mut T
where
    F: FnOnce() -> ApiResult<*mut T>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(p)) => p,
        Ok(Err((_, msg))) => {
            set_error(&msg);
            ptr::null_mut()
        }
        Err(payload) => {
            set_error(&panic_text(payload));
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `p` must be NULL or a NUL-terminated string valid for reads.
unsafe fn required_str<'a>(p: *const c_char, what: &str) -> ApiResult<&'a str> {
    if p.is_null() {
        return Err(invalid(format!("{what} must not be NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn required_ref<'a, T>(p: *const T, what: &str) -> ApiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| invalid(format!("{what} must not be NULL")))
}

unsafe fn required_mut<'a, T>(p: *mut T, what: &str) -> ApiResult<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| invalid(format!("{what} must not be NULL")))
}

fn parse_date(value: &str, what: &str) -> ApiResult<chrono::NaiveDate> {
    chrono::NaiveDate::parse_from_str(value, "%Y-%m-%d")
        .map_err(|_| invalid(format!("{what}: expected YYYY-MM-DD, got '{value}'")))
}

fn leak<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

// ---------------------------------------------------------------------------
// Library-wide calls.
// ---------------------------------------------------------------------------

/// Version of the underlying relsim library as a static string.
#[no_mangle]
pub extern "C" fn relsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on the calling thread, or NULL if
/// the last call succeeded. The pointer stays valid until the next relsim
/// call on this thread.
#[no_mangle]
pub extern "C" fn relsim_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |msg| msg.as_ptr())
    })
}

/// Frees a string returned by a relsim call. NULL is a no-op.
///
/// # Safety
/// `s` must have been returned by a relsim function documented to be freed
/// this way, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn relsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

/// New configuration holding the built-in defaults. Free with
/// `relsim_config_free`.
#[no_mangle]
pub extern "C" fn relsim_config_new() -> *mut RelsimConfig {
    clear_error();
    leak(RelsimConfig {
        inner: RunConfig::default(),
    })
}

/// Sets one configuration key (same spelling as the CLI flags and config
/// files, e.g. "seed", "workdir", "k", "graphs").
///
/// # Safety
/// `cfg` must be a live handle from `relsim_config_new`; `key` and
/// `value` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn relsim_config_set(
    cfg: *mut RelsimConfig,
    key: *const c_char,
    value: *const c_char,
) -> RelsimStatus {
    clear_error();
    complete_status(|| {
        let cfg = required_mut(cfg, "cfg")?;
        let key = required_str(key, "key")?;
        let value = required_str(value, "value")?;
        cfg.inner.apply(key, value).map_err(from_core)
    })
}

/// Applies a flat key=value config file on top of the current values.
///
/// # Safety
/// `cfg` must be a live handle; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn relsim_config_load_file(
    cfg: *mut RelsimConfig,
    path: *const c_char,
) -> RelsimStatus {
    clear_error();
    complete_status(|| {
        let cfg = required_mut(cfg, "cfg")?;
        let path = PathBuf::from(required_str(path, "path")?);
        cfg.inner.apply_file(&path).map_err(from_core)
    })
}

/// Renders the resolved configuration as key=value lines. Free the result
/// with `relsim_string_free`.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsim_config_render(cfg: *const RelsimConfig) -> *mut c_char {
    clear_error();
    complete_ptr(|| {
        let cfg = required_ref(cfg, "cfg")?;
        let text = cfg.inner.to_kv_string().replace('\0', "?");
        Ok(CString::new(text).expect("NULs removed").into_raw())
    })
}

/// Frees a configuration handle. NULL is a no-op.
///
/// # Safety
/// `cfg` must be NULL or a live handle, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn relsim_config_free(cfg: *mut RelsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

// ---------------------------------------------------------------------------
// Full pipeline.
// ---------------------------------------------------------------------------

/// Runs the whole pipeline (synth through compare) under `cfg`, writing
/// artifacts into the configured workdir. Returns the model comparison, or
/// NULL on failure. Free with `relsim_comparison_free`.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsim_run_all(cfg: *const RelsimConfig) -> *mut RelsimComparison {
    clear_error();
    complete_ptr(|| {
        let cfg = required_ref(cfg, "cfg")?;
        let table = pipeline::run_all(&cfg.inner).map_err(from_core)?;
        Ok(leak(RelsimComparison { inner: table }))
    })
}

/// Hold-out PR-AUC of the baseline model; NaN if `cmp` is NULL.
///
/// # Safety
/// `cmp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsim_comparison_baseline_pr_auc(cmp: *const RelsimComparison) -> f64 {
    clear_error();
    match required_ref(cmp, "cmp") {
        Ok(cmp) => cmp.inner.baseline_pr_auc,
        Err((_, msg)) => {
            set_error(&msg);
            f64::NAN
        }
    }
}

/// Hold-out PR-AUC of the similarity-augmented model; NaN if `cmp` is NULL.
///
/// # Safety
/// `cmp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsim_comparison_proposed_pr_auc(cmp: *const RelsimComparison) -> f64 {
    clear_error();
    match required_ref(cmp, "cmp") {
        Ok(cmp) => cmp.inner.proposed_pr_auc,
        Err((_, msg)) => {
            set_error(&msg);
            f64::NAN
        }
    }
}

/// Number of precision@k rows in the comparison; 0 if `cmp` is NULL.
///
/// # Safety
/// `cmp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsim_comparison_n_rows(cmp: *const RelsimComparison) -> usize {
    clear_error();
    match required_ref(cmp, "cmp") {
        Ok(cmp) => cmp.inner.rows.len(),
        Err((_, msg)) => {
            set_error(&msg);
            0
        }
    }
}

/// Copies row `index` of the comparison into the out-parameters. The
/// improvement is a percentage relative to the baseline hit count, NaN
/// when the baseline has no hits. NULL out-parameters are skipped.
///
/// # Safety
/// `cmp` must be a live handle; each non-NULL out-parameter must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn relsim_comparison_row(
    cmp: *const RelsimComparison,
    index: usize,
    k: *mut usize,
    baseline_hits: *mut usize,
    proposed_hits: *mut usize,
    improvement_pct: *mut f64,
) -> RelsimStatus {
    clear_error();
    complete_status(|| {
        let cmp = required_ref(cmp, "cmp")?;
        let row = cmp.inner.rows.get(index).ok_or_else(|| {
            invalid(format!(
                "row index {index} out of range ({} rows)",
                cmp.inner.rows.len()
            ))
        })?;
        if !k.is_null() {
            *k = row.k;
        }
        if !baseline_hits.is_null() {
            *baseline_hits = row.baseline_hits;
        }
        if !proposed_hits.is_null() {
            *proposed_hits = row.proposed_hits;
        }
        if !improvement_pct.is_null() {
            *improvement_pct = row.improvement_pct.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Renders the comparison as the same text table the CLI prints. Free with
/// `relsim_string_free`.
///
/// # Safety
/// `cmp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsim_comparison_render(cmp: *const RelsimComparison) -> *mut c_char {
    clear_error();
    complete_ptr(|| {
        let cmp = required_ref(cmp, "cmp")?;
        let text = cmp.inner.render_text().replace('\0', "?");
        Ok(CString::new(text).expect("NULs removed").into_raw())
    })
}

/// Frees a comparison handle. NULL is a no-op.
///
/// # Safety
/// `cmp` must be NULL or a live handle, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn relsim_comparison_free(cmp: *mut RelsimComparison) {
    if !cmp.is_null() {
        drop(Box::from_raw(cmp));
    }
}

// ---------------------------------------------------------------------------
// Feature extraction.
// ---------------------------------------------------------------------------

/// Builds one bipartite visit graph per role named in `graphs` (comma
/// separated, e.g. "diag,followup") from the event-log CSV at
/// `events_path`, restricted to visits in `[window_start, window_end)`,
/// and extracts `k` spectral-similarity values per graph for every patient
/// in the log. Patients without qualifying visits get zero rows.
///
/// `tol`, `max_iter` and `seed` control the eigensolver; `tol` must be
/// positive and `max_iter` at least 1. Free the result with
/// `relsim_features_free`.
///
/// # Safety
/// The four string arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn relsim_extract_features(
    events_path: *const c_char,
    window_start: *const c_char,
    window_end: *const c_char,
    graphs: *const c_char,
    k: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> *mut RelsimFeatures {
    clear_error();
    complete_ptr(|| {
        let events_path = Path::new(required_str(events_path, "events_path")?);
        let start = parse_date(required_str(window_start, "window_start")?, "window_start")?;
        let end = parse_date(required_str(window_end, "window_end")?, "window_end")?;
        let roles_text = required_str(graphs, "graphs")?;
        let mut roles: Vec<GraphRole> = Vec::new();
        for part in roles_text.split(',') {
            let role = GraphRole::from_str(part.trim()).map_err(invalid)?;
            if roles.contains(&role) {
                return Err(invalid(format!("graph role '{}' listed twice", role.tag())));
            }
            roles.push(role);
        }
        if roles.is_empty() {
            return Err(invalid("graphs must name at least one role"));
        }
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(invalid("tol must be positive"));
        }
        if max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }

        let window = Interval::new(start, end).map_err(from_core)?;
        let events = load_events(events_path).map_err(from_core)?;
        let universe: BTreeSet<&str> = events.iter().map(|e| e.patient_id.as_str()).collect();
        let universe: Vec<String> = universe.into_iter().map(str::to_string).collect();
        let built: Vec<_> = roles
            .iter()
            .map(|&r| build_bipartite_graph(&events, r, &universe, &window))
            .collect::<Result<_, _>>()
            .map_err(from_core)?;
        let opts = SolverOptions {
            tol,
            max_iter,
            seed,
        };
        let feats = extract_similarity_features(&built, k, &opts).map_err(from_core)?;

        let dim = roles.len() * k;
        let mut ids = Vec::with_capacity(feats.len());
        let mut values = Vec::with_capacity(feats.len() * dim);
        for f in feats {
            ids.push(CString::new(f.patient_id.replace('\0', "?")).expect("NULs removed"));
            values.extend_from_slice(&f.values);
        }
        Ok(leak(RelsimFeatures { ids, dim, values }))
    })
}

/// Number of patients (rows); 0 if `feats` is NULL.
///
/// # Safety
/// `feats` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsim_features_n_patients(feats: *const RelsimFeatures) -> usize {
    clear_error();
    match required_ref(feats, "feats") {
        Ok(f) => f.ids.len(),
        Err((_, msg)) => {
            set_error(&msg);
            0
        }
    }
}

/// Values per row (number of graphs times k); 0 if `feats` is NULL.
///
/// # Safety
/// `feats` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsim_features_dim(feats: *const RelsimFeatures) -> usize {
    clear_error();
    match required_ref(feats, "feats") {
        Ok(f) => f.dim,
        Err((_, msg)) => {
            set_error(&msg);
            0
        }
    }
}

/// Patient id of row `index`, or NULL when out of range. The pointer stays
/// valid while the handle lives.
///
/// # Safety
/// `feats` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsim_features_patient_id(
    feats: *const RelsimFeatures,
    index: usize,
) -> *const c_char {
    clear_error();
    let looked_up = match required_ref(feats, "feats") {
        Ok(f) => f
            .ids
            .get(index)
            .map(|id| id.as_ptr())
            .ok_or_else(|| invalid(format!("row index {index} out of range ({} rows)", f.ids.len()))),
        Err(e) => Err(e),
    };
    match looked_up {
        Ok(p) => p,
        Err((_, msg)) => {
            set_error(&msg);
            ptr::null()
        }
    }
}

/// Copies row `index` into `out`, which must hold exactly
/// `relsim_features_dim` doubles.
///
/// # Safety
/// `feats` must be a live handle; `out` must be valid for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn relsim_features_row(
    feats: *const RelsimFeatures,
    index: usize,
    out: *mut f64,
    out_len: usize,
) -> RelsimStatus {
    clear_error();
    complete_status(|| {
        let f = required_ref(feats, "feats")?;
        if out.is_null() {
            return Err(invalid("out must not be NULL"));
        }
        if index >= f.ids.len() {
            return Err(invalid(format!(
                "row index {index} out of range ({} rows)",
                f.ids.len()
            )));
        }
        if out_len != f.dim {
            return Err(invalid(format!(
                "out_len {out_len} does not match feature dim {}",
                f.dim
            )));
        }
        let row = &f.values[index * f.dim..(index + 1) * f.dim];
        ptr::copy_nonoverlapping(row.as_ptr(), out, f.dim);
        Ok(())
    })
}

/// Frees a features handle. NULL is a no-op.
///
/// # Safety
/// `feats` must be NULL or a live handle, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn relsim_features_free(feats: *mut RelsimFeatures) {
    if !feats.is_null() {
        drop(Box::from_raw(feats));
    }
}
