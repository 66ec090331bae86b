//! C ABI over `interposer-sim`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every entry point returns an
//! [`IsimStatus`] and leaves a message for [`isim_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use interposer_sim::topology::stage_count_for;
use interposer_sim::{Error, ModelSource, RunConfig, SimReport};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsimStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidParameter = 4,
    UnknownName = 5,
    Simulation = 6,
    Io = 7,
    OutOfRange = 8,
    Undefined = 9,
    Panic = 10,
}

/// Numeric columns of a report row.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsimMetric {
    LaserMw = 0,
    TrimmingMw = 1,
    MziStaticMw = 2,
    GatewayMw = 3,
    MacMw = 4,
    ElectricalMw = 5,
    TotalMw = 6,
    MakespanS = 7,
    EnergyJ = 8,
    Bits = 9,
    EpbPjPerBit = 10,
    TotalMwNorm = 11,
    MakespanNorm = 12,
    EnergyNorm = 13,
    EpbNorm = 14,
}

/// Parsed run configuration.
pub struct IsimConfig {
    inner: RunConfig,
}

/// Results of a run or sweep, plus C copies of the row labels.
pub struct IsimReport {
    inner: SimReport,
    labels: Vec<(CString, CString)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> IsimStatus {
    match err {
        Error::ConfigParse { .. } | Error::MissingSection(_) | Error::ConfigValue { .. } => IsimStatus::Config,
        Error::UnknownModel(_) | Error::UnknownTopology(_) | Error::MissingBaseline(_) => IsimStatus::UnknownName,
        Error::Io { .. } => IsimStatus::Io,
        Error::DeadlockDetected { .. } | Error::UnmappedLayer(_) | Error::ZeroBits => IsimStatus::Simulation,
        _ => IsimStatus::InvalidParameter,
    }
}

fn fail(status: IsimStatus, msg: impl Into<String>) -> IsimStatus {
    set_error(msg);
    status
}

fn from_core(err: Error) -> IsimStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, turning a panic into `IsimStatus::Panic`.
fn guard(f: impl FnOnce() -> IsimStatus) -> IsimStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(IsimStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, IsimStatus> {
    if p.is_null() {
        return Err(fail(IsimStatus::NullArgument, format!("`{what}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(IsimStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

fn list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(String::from)
        .collect()
}

fn new_report(inner: SimReport) -> *mut IsimReport {
    let labels = inner
        .rows
        .iter()
        .map(|r| {
            let c = |s: &str| CString::new(s.replace('\0', " ")).unwrap_or_default();
            (c(&r.topology), c(&r.model))
        })
        .collect();
    Box::into_raw(Box::new(IsimReport { inner, labels }))
}

unsafe fn handle<'a>(report: *const IsimReport) -> Option<&'a IsimReport> {
    report.as_ref()
}

unsafe fn put_config(out: *mut *mut IsimConfig, cfg: RunConfig) -> IsimStatus {
    *out = Box::into_raw(Box::new(IsimConfig { inner: cfg }));
    IsimStatus::Ok
}

/// Message for the most recent failure on this thread, or null.
///
/// The pointer stays valid until the next `isim_*` call on the same thread.
#[no_mangle]
pub extern "C" fn isim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default configuration: TRINE, lenet5, default platform and devices.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn isim_config_default(out: *mut *mut IsimConfig) -> IsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(IsimStatus::NullArgument, "`out` is null");
        }
        put_config(out, RunConfig::default())
    })
}

/// Parses INI text into a configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn isim_config_parse(text: *const c_char, out: *mut *mut IsimConfig) -> IsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(IsimStatus::NullArgument, "`out` is null");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match interposer_sim::parse_config(text) {
            Ok(cfg) => put_config(out, cfg),
            Err(e) => from_core(e),
        }
    })
}

/// Reads and parses a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn isim_config_load(path: *const c_char, out: *mut *mut IsimConfig) -> IsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(IsimStatus::NullArgument, "`out` is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match interposer_sim::load_config(Path::new(path)) {
            Ok(cfg) => put_config(out, cfg),
            Err(e) => from_core(e),
        }
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must come from an `isim_config_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn isim_config_free(cfg: *mut IsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Simulates the configured topology on the first configured model.
///
/// # Safety
/// `cfg` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn isim_run(cfg: *const IsimConfig, out: *mut *mut IsimReport) -> IsimStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return fail(IsimStatus::NullArgument, "`cfg` or `out` is null");
        }
        match interposer_sim::run(&(*cfg).inner) {
            Ok(r) => {
                *out = new_report(r);
                IsimStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Sweeps comma-separated `topologies` against comma-separated builtin
/// `models`. A null or empty `models` falls back to the configured models.
///
/// # Safety
/// `cfg` must be a live handle, string arguments NUL-terminated or null
/// where allowed, and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn isim_sweep(
    cfg: *const IsimConfig,
    topologies: *const c_char,
    models: *const c_char,
    out: *mut *mut IsimReport,
) -> IsimStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return fail(IsimStatus::NullArgument, "`cfg` or `out` is null");
        }
        let topos = match str_arg(topologies, "topologies") {
            Ok(t) => list(t),
            Err(s) => return s,
        };
        if topos.is_empty() {
            return fail(IsimStatus::InvalidParameter, "no topologies given");
        }
        let cfg = &(*cfg).inner;
        let models: Vec<ModelSource> = if models.is_null() {
            Vec::new()
        } else {
            match str_arg(models, "models") {
                Ok(m) => list(m).into_iter().map(ModelSource::Builtin).collect(),
                Err(s) => return s,
            }
        };
        let models = if models.is_empty() {
            cfg.workload.models.clone()
        } else {
            models
        };
        match interposer_sim::sweep(cfg, &topos, &models) {
            Ok(r) => {
                *out = new_report(r);
                IsimStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Number of rows in a report; 0 for null.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isim_report_row_count(report: *const IsimReport) -> usize {
    handle(report).map_or(0, |r| r.inner.rows.len())
}

/// Reads one numeric column. Ratios and energy-per-bit are `Undefined`
/// when no bits moved or the baseline is missing.
///
/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn isim_report_metric(
    report: *const IsimReport,
    row: usize,
    metric: IsimMetric,
    out: *mut f64,
) -> IsimStatus {
    guard(|| {
        let Some(report) = handle(report).filter(|_| !out.is_null()) else {
            return fail(IsimStatus::NullArgument, "`report` or `out` is null");
        };
        let Some(r) = report.inner.rows.get(row) else {
            return fail(IsimStatus::OutOfRange, format!("row {row} out of range"));
        };
        let p = &r.power;
        let v = match metric {
            IsimMetric::LaserMw => Some(p.laser_mw),
            IsimMetric::TrimmingMw => Some(p.trimming_mw),
            IsimMetric::MziStaticMw => Some(p.mzi_static_mw),
            IsimMetric::GatewayMw => Some(p.gateway_mw),
            IsimMetric::MacMw => Some(p.mac_mw),
            IsimMetric::ElectricalMw => Some(p.electrical_mw),
            IsimMetric::TotalMw => Some(p.total_mw),
            IsimMetric::MakespanS => Some(r.makespan_s),
            IsimMetric::EnergyJ => Some(r.energy_j),
            IsimMetric::Bits => Some(r.bits as f64),
            IsimMetric::EpbPjPerBit => r.epb_pj_per_bit,
            IsimMetric::TotalMwNorm => r.total_mw_norm,
            IsimMetric::MakespanNorm => r.makespan_norm,
            IsimMetric::EnergyNorm => r.energy_norm,
            IsimMetric::EpbNorm => r.epb_norm,
        };
        match v {
            Some(v) => {
                *out = v;
                IsimStatus::Ok
            }
            None => fail(IsimStatus::Undefined, format!("{metric:?} undefined for row {row}")),
        }
    })
}

/// Topology name of a row, owned by the report; null when out of range.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isim_report_row_topology(report: *const IsimReport, row: usize) -> *const c_char {
    handle(report)
        .and_then(|r| r.labels.get(row))
        .map_or(ptr::null(), |l| l.0.as_ptr())
}

/// Model name of a row, owned by the report; null when out of range.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isim_report_row_model(report: *const IsimReport, row: usize) -> *const c_char {
    handle(report)
        .and_then(|r| r.labels.get(row))
        .map_or(ptr::null(), |l| l.1.as_ptr())
}

/// Writes the CSVs, summary and audit files into `dir`.
///
/// # Safety
/// `report` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn isim_report_write(report: *const IsimReport, dir: *const c_char) -> IsimStatus {
    guard(|| {
        let Some(report) = handle(report) else {
            return fail(IsimStatus::NullArgument, "`report` is null");
        };
        let dir = match str_arg(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match report.inner.write(Path::new(dir)) {
            Ok(()) => IsimStatus::Ok,
            Err(e) => from_core(e),
        }
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must come from `isim_run` or `isim_sweep` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn isim_report_free(report: *mut IsimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Switch stages per subnetwork for `compute_gateways` split over `subnetworks`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn isim_stage_count(compute_gateways: u32, subnetworks: u32, out: *mut u32) -> IsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(IsimStatus::NullArgument, "`out` is null");
        }
        if compute_gateways == 0 || subnetworks == 0 || subnetworks > compute_gateways {
            return fail(
                IsimStatus::InvalidParameter,
                format!("need 1 <= subnetworks ({subnetworks}) <= compute_gateways ({compute_gateways})"),
            );
        }
        *out = stage_count_for(compute_gateways as usize, subnetworks as usize);
        IsimStatus::Ok
    })
}
