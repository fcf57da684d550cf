//! C interface to pvtiles.
//!
//! Every fallible function returns a [`PvtStatus`]; on failure the message
//! is kept per thread and read with [`pvt_last_error_message`]. Handles are
//! opaque and released with their `_free` function. Strings returned to the
//! caller are released with [`pvt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use pvtiles::baseline::{predict_score, read_model, FeatureVector, LinearModel, ModelError};
use pvtiles::dataset::{read_manifest, stratified_split, write_manifest, DatasetError, DatasetManifest, Split, SplitFractions, TileLabel};
use pvtiles::metrics::{report, threshold_label, BinaryLabel, ClassReportRow, ClassificationReport, ConfusionMatrix, MetricsError};
use pvtiles::reconcile::ReconciliationReport;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    OutOfRange = 6,
    Undefined = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvtLabel {
    Negative = 0,
    Positive = 1,
    Unknown = 2,
    Unlabeled = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvtRow {
    Negative = 0,
    Positive = 1,
    MacroAvg = 2,
    WeightedAvg = 3,
}

/// One row of a classification report.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PvtClassRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Non-zero when the precision denominator was zero.
    pub precision_undefined: u8,
    pub recall_undefined: u8,
}

pub struct PvtManifest(DatasetManifest);

pub struct PvtReport {
    matrix: ConfusionMatrix,
    report: ClassificationReport,
}

pub struct PvtModel(LinearModel);

pub struct PvtReconciliation(ReconciliationReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut s = msg.into();
    s.retain(|c| c != '\0');
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(s).expect("nul bytes removed")));
}

struct Fail(PvtStatus, String);

type FfiResult<T> = Result<T, Fail>;

impl From<DatasetError> for Fail {
    fn from(e: DatasetError) -> Self {
        let status = match &e {
            DatasetError::Io(_) => PvtStatus::Io,
            DatasetError::ParseError { .. } | DatasetError::InvalidManifest(_) => PvtStatus::Parse,
            _ => PvtStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

impl From<MetricsError> for Fail {
    fn from(e: MetricsError) -> Self {
        let status = match &e {
            MetricsError::ScoreOutOfRange(_) | MetricsError::ConfidenceOutOfRange(_) => PvtStatus::OutOfRange,
            MetricsError::Io(_) => PvtStatus::Io,
            MetricsError::Parse { .. } => PvtStatus::Parse,
            _ => PvtStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

impl From<ModelError> for Fail {
    fn from(e: ModelError) -> Self {
        let status = match &e {
            ModelError::Io(_) => PvtStatus::Io,
            ModelError::Parse { .. } => PvtStatus::Parse,
            ModelError::ScoreOutOfRange(_) => PvtStatus::OutOfRange,
            _ => PvtStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

/// Runs `f`, turning errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> PvtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PvtStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PvtStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(PvtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg<'a>(p: *const c_char) -> FfiResult<&'a Path> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail(PvtStatus::InvalidUtf8, "path is not valid UTF-8".into()))
}

fn string_out(s: String) -> *mut c_char {
    CString::new(s.replace('\0', "")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn pvt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn pvt_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pvt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pvt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Inclusive threshold: `score >= threshold` is positive.
///
/// # Safety
/// `label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_threshold_label(score: f64, threshold: f64, label: *mut PvtLabel) -> PvtStatus {
    guard(|| {
        let l = threshold_label(score, threshold)?;
        *out(label, "label")? = match l {
            BinaryLabel::Positive => PvtLabel::Positive,
            BinaryLabel::Negative => PvtLabel::Negative,
        };
        Ok(())
    })
}

/// # Safety
/// `path` is a NUL-terminated string; `manifest` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_manifest_read(path: *const c_char, manifest: *mut *mut PvtManifest) -> PvtStatus {
    guard(|| {
        let slot = out(manifest, "manifest")?;
        let m = read_manifest(path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(PvtManifest(m)));
        Ok(())
    })
}

/// # Safety
/// `manifest` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pvt_manifest_write(manifest: *const PvtManifest, path: *const c_char) -> PvtStatus {
    guard(|| {
        let m = borrow(manifest, "manifest")?;
        write_manifest(path_arg(path)?, &m.0)?;
        Ok(())
    })
}

/// # Safety
/// `manifest` is a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_manifest_len(manifest: *const PvtManifest, len: *mut usize) -> PvtStatus {
    guard(|| {
        *out(len, "len")? = borrow(manifest, "manifest")?.0.records.len();
        Ok(())
    })
}

/// Number of records carrying `label`.
///
/// # Safety
/// `manifest` is a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_manifest_count_label(
    manifest: *const PvtManifest,
    label: PvtLabel,
    count: *mut usize,
) -> PvtStatus {
    guard(|| {
        let want = match label {
            PvtLabel::Negative => TileLabel::Negative,
            PvtLabel::Positive => TileLabel::Positive,
            PvtLabel::Unknown => TileLabel::Unknown,
            PvtLabel::Unlabeled => TileLabel::Unlabeled,
        };
        *out(count, "count")? = borrow(manifest, "manifest")?.0.records.iter().filter(|r| r.label == want).count();
        Ok(())
    })
}

/// Number of records assigned to the training split.
///
/// # Safety
/// `manifest` is a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_manifest_train_count(manifest: *const PvtManifest, count: *mut usize) -> PvtStatus {
    guard(|| {
        *out(count, "count")? = borrow(manifest, "manifest")?.0.in_split(Split::Train).count();
        Ok(())
    })
}

/// Stratified split into a new handle; the input is left untouched.
///
/// # Safety
/// `manifest` is a live handle; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_manifest_split(
    manifest: *const PvtManifest,
    train_fraction: f64,
    seed: u64,
    result: *mut *mut PvtManifest,
) -> PvtStatus {
    guard(|| {
        let m = borrow(manifest, "manifest")?;
        let slot = out(result, "result")?;
        let fr = SplitFractions::from_train(train_fraction)?;
        *slot = Box::into_raw(Box::new(PvtManifest(stratified_split(&m.0, fr, seed)?)));
        Ok(())
    })
}

/// # Safety
/// `manifest` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pvt_manifest_free(manifest: *mut PvtManifest) {
    if !manifest.is_null() {
        drop(Box::from_raw(manifest));
    }
}

/// # Safety
/// `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_report_from_counts(
    tp: u64,
    fp: u64,
    tn: u64,
    fn_: u64,
    result: *mut *mut PvtReport,
) -> PvtStatus {
    guard(|| {
        let slot = out(result, "result")?;
        let matrix = ConfusionMatrix::new(tp, fp, tn, fn_);
        let report = report(&matrix)?;
        *slot = Box::into_raw(Box::new(PvtReport { matrix, report }));
        Ok(())
    })
}

/// # Safety
/// `report` is a live handle; `accuracy` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_report_accuracy(report: *const PvtReport, accuracy: *mut f64) -> PvtStatus {
    guard(|| {
        *out(accuracy, "accuracy")? = borrow(report, "report")?.report.accuracy;
        Ok(())
    })
}

/// # Safety
/// `report` is a live handle; `row_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_report_row(report: *const PvtReport, row: PvtRow, row_out: *mut PvtClassRow) -> PvtStatus {
    guard(|| {
        let r = &borrow(report, "report")?.report;
        let src: &ClassReportRow = match row {
            PvtRow::Negative => &r.negative,
            PvtRow::Positive => &r.positive,
            PvtRow::MacroAvg => &r.macro_avg,
            PvtRow::WeightedAvg => &r.weighted_avg,
        };
        *out(row_out, "row_out")? = PvtClassRow {
            precision: src.precision,
            recall: src.recall,
            f1: src.f1,
            support: src.support,
            precision_undefined: src.precision_undefined.into(),
            recall_undefined: src.recall_undefined.into(),
        };
        Ok(())
    })
}

/// Report text followed by the confusion shares table. Free with
/// [`pvt_string_free`].
///
/// # Safety
/// `report` is a live handle; `text` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_report_render(report: *const PvtReport, text: *mut *mut c_char) -> PvtStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let slot = out(text, "text")?;
        *slot = string_out(format!("{}\n{}", r.report.render_text(), r.matrix.render_shares()));
        Ok(())
    })
}

/// # Safety
/// `report` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pvt_report_free(report: *mut PvtReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `path` is a NUL-terminated string; `model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_model_read(path: *const c_char, model: *mut *mut PvtModel) -> PvtStatus {
    guard(|| {
        let slot = out(model, "model")?;
        *slot = Box::into_raw(Box::new(PvtModel(read_model(path_arg(path)?)?)));
        Ok(())
    })
}

/// # Safety
/// `model` is a live handle; `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_model_dim(model: *const PvtModel, dim: *mut usize) -> PvtStatus {
    guard(|| {
        *out(dim, "dim")? = borrow(model, "model")?.0.dim();
        Ok(())
    })
}

/// Score in [0, 1] for one feature vector of `len` values.
///
/// # Safety
/// `model` is a live handle; `features` points to `len` doubles; `score`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_model_score(
    model: *const PvtModel,
    features: *const f64,
    len: usize,
    score: *mut f64,
) -> PvtStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        if features.is_null() && len > 0 {
            return Err(null("features"));
        }
        let x = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(features, len).to_vec() };
        *out(score, "score")? = predict_score(&m.0, &FeatureVector(x))?;
        Ok(())
    })
}

/// # Safety
/// `model` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pvt_model_free(model: *mut PvtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_reconciliation_from_counts(
    tp_in_register: u64,
    tp_new: u64,
    fp: u64,
    fn_: u64,
    tn: u64,
    result: *mut *mut PvtReconciliation,
) -> PvtStatus {
    guard(|| {
        *out(result, "result")? = Box::into_raw(Box::new(PvtReconciliation(ReconciliationReport {
            tp_in_register,
            tp_new,
            fp,
            fn_,
            tn,
        })));
        Ok(())
    })
}

/// Share of true positives not in the register. `PVT_STATUS_UNDEFINED`
/// when there are no true positives.
///
/// # Safety
/// `rec` is a live handle; `fraction` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_reconciliation_new_fraction(rec: *const PvtReconciliation, fraction: *mut f64) -> PvtStatus {
    guard(|| {
        let r = borrow(rec, "reconciliation")?;
        let slot = out(fraction, "fraction")?;
        *slot = r
            .0
            .new_fraction()
            .ok_or_else(|| Fail(PvtStatus::Undefined, "no true positives".into()))?;
        Ok(())
    })
}

/// # Safety
/// `rec` is a live handle; `text` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvt_reconciliation_render(rec: *const PvtReconciliation, text: *mut *mut c_char) -> PvtStatus {
    guard(|| {
        let r = borrow(rec, "reconciliation")?;
        *out(text, "text")? = string_out(r.0.render_text());
        Ok(())
    })
}

/// # Safety
/// `rec` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pvt_reconciliation_free(rec: *mut PvtReconciliation) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}
