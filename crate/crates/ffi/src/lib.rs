//! C ABI over `socialineq`.
//!
//! Every fallible function returns an [`SiStatus`]; on failure a message is
//! available from [`si_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their matching `*_free` function.
//! Strings returned through out-parameters are freed with [`si_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use socialineq::geo::{SpatialIndex, Tract};
use socialineq::ingest::parse_tracts;
use socialineq::metrics::{self, MetricError, PartialIndexSuite};
use socialineq::report::{self, Normalization, PipelineConfig, ReportError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Values rejected by a metric (empty, negative, non-finite, all zero).
    InvalidInput = 3,
    /// Unreadable or invalid tract GeoJSON.
    InvalidGeometry = 4,
    /// The point lies outside every tract.
    NotFound = 5,
    /// Buffer too small; the required length was written.
    BufferTooSmall = 6,
    /// Pipeline input error; see the message.
    InputError = 7,
    InvariantViolation = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: SiStatus, message: impl Into<String>) -> SiStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> SiStatus) -> SiStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SiStatus::Panic, "panic in socialineq"))
}

fn metric_status(e: MetricError) -> SiStatus {
    fail(SiStatus::InvalidInput, e.to_string())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn si_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn si_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn si_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if data.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(data, len))
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<Option<PathBuf>, SiStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(|s| Some(PathBuf::from(s)))
        .map_err(|_| fail(SiStatus::InvalidUtf8, "path is not UTF-8"))
}

/// Tract lookup structure built from a GeoJSON FeatureCollection.
pub struct SiSpatialIndex {
    index: SpatialIndex,
    ids: Vec<CString>,
}

/// Builds an index from `len` bytes of GeoJSON.
///
/// # Safety
/// `geojson` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn si_spatial_index_from_geojson(
    geojson: *const u8,
    len: usize,
    out: *mut *mut SiSpatialIndex,
) -> SiStatus {
    guard(|| {
        let (Some(bytes), false) = (slice(geojson, len), out.is_null()) else {
            return fail(SiStatus::NullPointer, "null argument");
        };
        let features = match parse_tracts(bytes) {
            Ok(f) => f,
            Err(e) => return fail(SiStatus::InvalidGeometry, e.to_string()),
        };
        let tracts: Result<Vec<_>, _> = features.iter().map(Tract::from_raw).collect();
        let index = match tracts.and_then(SpatialIndex::build) {
            Ok(i) => i,
            Err(e) => return fail(SiStatus::InvalidGeometry, e.to_string()),
        };
        let ids = index
            .tracts()
            .iter()
            .map(|t| CString::new(t.tract_id.replace('\0', " ")).expect("NUL replaced"))
            .collect();
        *out = Box::into_raw(Box::new(SiSpatialIndex { index, ids }));
        SiStatus::Ok
    })
}

/// # Safety
/// `index` must be null or a handle from [`si_spatial_index_from_geojson`].
#[no_mangle]
pub unsafe extern "C" fn si_spatial_index_free(index: *mut SiSpatialIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Number of tracts, or 0 for a null handle.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn si_spatial_index_len(index: *const SiSpatialIndex) -> usize {
    index.as_ref().map_or(0, |i| i.index.len())
}

/// Position (in tract-id order) of the tract containing the point.
/// Returns [`SiStatus::NotFound`] when no tract contains it.
///
/// # Safety
/// `index` must be a live handle and `out_position` writable.
#[no_mangle]
pub unsafe extern "C" fn si_spatial_index_assign(
    index: *const SiSpatialIndex,
    lat: f64,
    lon: f64,
    out_position: *mut usize,
) -> SiStatus {
    guard(|| {
        let (Some(index), false) = (index.as_ref(), out_position.is_null()) else {
            return fail(SiStatus::NullPointer, "null argument");
        };
        match index.index.assign_index(lat, lon) {
            Some(p) => {
                *out_position = p;
                SiStatus::Ok
            }
            None => fail(SiStatus::NotFound, "point is outside every tract"),
        }
    })
}

/// Tract id at `position`, owned by the index; null when out of range.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn si_spatial_index_tract_id(
    index: *const SiSpatialIndex,
    position: usize,
) -> *const c_char {
    index
        .as_ref()
        .and_then(|i| i.ids.get(position))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Headline indexes. Undefined entries (for example a ratio whose low
/// percentile is zero) are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiIndexSuite {
    pub gini: f64,
    pub ratio_80_20: f64,
    pub ratio_90_10: f64,
    pub hoover: f64,
    pub theil: f64,
}

impl From<PartialIndexSuite> for SiIndexSuite {
    fn from(s: PartialIndexSuite) -> Self {
        let v = s.values().map(|x| x.unwrap_or(f64::NAN));
        SiIndexSuite {
            gini: v[0],
            ratio_80_20: v[1],
            ratio_90_10: v[2],
            hoover: v[3],
            theil: v[4],
        }
    }
}

/// A validated vector of non-negative per-unit values.
pub struct SiDistribution {
    values: Vec<f64>,
}

/// Copies `len` values into a new distribution.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn si_distribution_new(
    values: *const f64,
    len: usize,
    out: *mut *mut SiDistribution,
) -> SiStatus {
    guard(|| {
        let (Some(values), false) = (slice(values, len), out.is_null()) else {
            return fail(SiStatus::NullPointer, "null argument");
        };
        let ids = (0..values.len()).map(|i| i.to_string()).collect();
        match metrics::Distribution::new("ffi", ids, values.to_vec()) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(SiDistribution { values: d.values }));
                SiStatus::Ok
            }
            Err(e) => metric_status(e),
        }
    })
}

/// # Safety
/// `dist` must be null or a handle from [`si_distribution_new`].
#[no_mangle]
pub unsafe extern "C" fn si_distribution_free(dist: *mut SiDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn si_distribution_gini(dist: *const SiDistribution, out: *mut f64) -> SiStatus {
    guard(|| {
        let (Some(d), false) = (dist.as_ref(), out.is_null()) else {
            return fail(SiStatus::NullPointer, "null argument");
        };
        match metrics::gini(&d.values) {
            Ok(g) => {
                *out = g;
                SiStatus::Ok
            }
            Err(e) => metric_status(e),
        }
    })
}

/// Fails with [`SiStatus::InvalidInput`] only when no index is defined.
///
/// # Safety
/// `dist` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn si_distribution_index_suite(
    dist: *const SiDistribution,
    out: *mut SiIndexSuite,
) -> SiStatus {
    guard(|| {
        let (Some(d), false) = (dist.as_ref(), out.is_null()) else {
            return fail(SiStatus::NullPointer, "null argument");
        };
        if let Err(e) = metrics::gini(&d.values) {
            return metric_status(e);
        }
        *out = PartialIndexSuite::compute(&d.values).into();
        SiStatus::Ok
    })
}

/// Writes the `n + 1` Lorenz points into `xs` and `ys`. `out_len` always
/// receives the point count; with a short buffer nothing else is written
/// and [`SiStatus::BufferTooSmall`] is returned.
///
/// # Safety
/// `xs` and `ys` must hold `capacity` doubles; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn si_distribution_lorenz(
    dist: *const SiDistribution,
    xs: *mut f64,
    ys: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> SiStatus {
    guard(|| {
        let (Some(d), false) = (dist.as_ref(), out_len.is_null()) else {
            return fail(SiStatus::NullPointer, "null argument");
        };
        let curve = match metrics::lorenz_curve(&d.values) {
            Ok(c) => c,
            Err(e) => return metric_status(e),
        };
        *out_len = curve.points.len();
        if capacity < curve.points.len() {
            return fail(SiStatus::BufferTooSmall, "Lorenz buffer too small");
        }
        if xs.is_null() || ys.is_null() {
            return fail(SiStatus::NullPointer, "null buffer");
        }
        for (i, &(x, y)) in curve.points.iter().enumerate() {
            *xs.add(i) = x;
            *ys.add(i) = y;
        }
        SiStatus::Ok
    })
}

/// Shannon entropy of the counts over ln of the nonzero category count.
///
/// # Safety
/// `counts` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn si_relative_entropy(counts: *const f64, len: usize, out: *mut f64) -> SiStatus {
    guard(|| {
        let (Some(counts), false) = (slice(counts, len), out.is_null()) else {
            return fail(SiStatus::NullPointer, "null argument");
        };
        match metrics::relative_entropy(counts) {
            Ok(h) => {
                *out = h;
                SiStatus::Ok
            }
            Err(e) => metric_status(e),
        }
    })
}

/// Runs the full pipeline with default settings and returns `report.json`
/// contents in `out_json`. `census_path` and `out_dir` may be null; when
/// `out_dir` is set every report file is written there as well.
///
/// # Safety
/// Paths must be null or NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn si_run_pipeline(
    events_path: *const c_char,
    tracts_path: *const c_char,
    census_path: *const c_char,
    out_dir: *const c_char,
    raw_counts: bool,
    partitions: usize,
    out_json: *mut *mut c_char,
) -> SiStatus {
    guard(|| {
        if out_json.is_null() {
            return fail(SiStatus::NullPointer, "null out_json");
        }
        let paths = (|| {
            Ok::<_, SiStatus>((
                path_arg(events_path)?,
                path_arg(tracts_path)?,
                path_arg(census_path)?,
                path_arg(out_dir)?,
            ))
        })();
        let (Some(events), Some(tracts), census, out_dir) = (match paths {
            Ok(p) => p,
            Err(status) => return status,
        }) else {
            return fail(SiStatus::NullPointer, "events and tracts paths are required");
        };
        let config = PipelineConfig {
            events_path: events,
            tracts_path: tracts,
            census_path: census,
            out_dir,
            normalization: if raw_counts {
                Normalization::Raw
            } else {
                Normalization::PerKm2
            },
            partitions: partitions.max(1),
            ..PipelineConfig::default()
        };
        match report::run_pipeline(&config) {
            Ok(analysis) => {
                let json = report::report_json(&analysis.report);
                *out_json = CString::new(json).expect("JSON has no NUL").into_raw();
                SiStatus::Ok
            }
            Err(e @ ReportError::InvariantViolation(_)) => fail(SiStatus::InvariantViolation, e.to_string()),
            Err(e) => fail(SiStatus::InputError, e.to_string()),
        }
    })
}
