//! C ABI over the metrics, reward functions and BM25 index.
//!
//! Every fallible function returns an [`SdStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be read with [`sd_last_error`]. Strings returned by the library are owned
//! by the caller and must be released with [`sd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use searchdepth::reward::{self, RewardConstants};
use searchdepth::retrieval::{ingest_corpus, RetrievalIndex};
use searchdepth::trajectory::from_json_str;
use searchdepth::{QuestionRecord, Trajectory};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Schema = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// BM25 index over a corpus file. Opaque to C.
pub struct SdIndex {
    inner: RetrievalIndex,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SdStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(SdStatus::NullPointer, format!("{what} is null"))
    }
}

fn set_last_error(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).expect("NULs removed"));
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            SdStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(Some(message));
            status
        }
        Err(_) => {
            set_last_error(Some("internal panic".into()));
            SdStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(SdStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn read_strs<'a>(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<&'a str>, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    (0..n).map(|i| read_str(*p.add(i), &format!("{what}[{i}]"))).collect()
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(SdStatus::InvalidArgument, "output contains a NUL byte".into()))
}

fn reward_failure(e: reward::RewardError) -> Failure {
    match e {
        reward::RewardError::Schema(s) => Failure(SdStatus::Schema, s.to_string()),
        other => Failure(SdStatus::InvalidArgument, other.to_string()),
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Writes 1 when `pred` matches any of the `n_golds` aliases after
/// normalisation, else 0.
///
/// # Safety
/// `pred` and each of `golds[0..n_golds]` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sd_exact_match(
    pred: *const c_char,
    golds: *const *const c_char,
    n_golds: usize,
    out: *mut u8,
) -> SdStatus {
    guard(|| {
        let pred = read_str(pred, "pred")?;
        let golds = read_strs(golds, n_golds, "golds")?;
        write(out, searchdepth::exact_match(pred, &golds), "out")
    })
}

/// Best token F1 of `pred` against the aliases.
///
/// # Safety
/// As for [`sd_exact_match`].
#[no_mangle]
pub unsafe extern "C" fn sd_token_f1(
    pred: *const c_char,
    golds: *const *const c_char,
    n_golds: usize,
    out: *mut f64,
) -> SdStatus {
    guard(|| {
        let pred = read_str(pred, "pred")?;
        let golds = read_strs(golds, n_golds, "golds")?;
        write(out, searchdepth::token_f1(pred, &golds), "out")
    })
}

/// Format reward with the default constants.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_format_reward(valid: bool, is_terminal: bool, out: *mut f64) -> SdStatus {
    guard(|| write(out, reward::format_reward(valid, is_terminal, &RewardConstants::default()), "out"))
}

/// Efficiency reward of step `t` (1-based) out of `depth`; `t_c` is -1 when
/// no intermediate answer was correct.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_efficiency_reward(t: usize, t_c: i64, depth: usize, out: *mut f64) -> SdStatus {
    guard(|| {
        let v = reward::efficiency_reward(t, t_c, depth, &RewardConstants::default()).map_err(reward_failure)?;
        write(out, v, "out")
    })
}

/// F1 gain of step `t` (1-based) over the best earlier step.
///
/// # Safety
/// `f1_by_step` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn sd_quality_reward(f1_by_step: *const f64, n: usize, t: usize, out: *mut f64) -> SdStatus {
    guard(|| {
        if f1_by_step.is_null() {
            return Err(Failure::null("f1_by_step"));
        }
        let f1s = std::slice::from_raw_parts(f1_by_step, n);
        write(out, reward::quality_reward(f1s, t).map_err(reward_failure)?, "out")
    })
}

/// Cumulative reward for stopping after 1..=max_depth searches. Fills
/// `out[0..max_depth]` and sets `written`. When `capacity` is too small
/// nothing is copied, `written` holds the required length and the call
/// returns `SD_STATUS_BUFFER_TOO_SMALL`.
///
/// # Safety
/// `out` must point to `capacity` writable doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_reward_curve(
    t_c: usize,
    max_depth: usize,
    include_outcome: bool,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> SdStatus {
    guard(|| {
        let curve = reward::cumulative_reward_curve(t_c, max_depth, &RewardConstants::default(), include_outcome)
            .map_err(reward_failure)?;
        write(written, curve.len(), "written")?;
        if capacity < curve.len() {
            return Err(Failure(SdStatus::BufferTooSmall, format!("need {} values, capacity {capacity}", curve.len())));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        for (i, (_, v)) in curve.iter().enumerate() {
            out.add(i).write(*v);
        }
        Ok(())
    })
}

/// Scores one trajectory (a JSON Lines record) against its question record
/// and returns the scored trajectory as JSON.
///
/// # Safety
/// Both inputs must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_score_trajectory_json(
    trajectory_json: *const c_char,
    record_json: *const c_char,
    out: *mut *mut c_char,
) -> SdStatus {
    guard(|| {
        let schema = |e: searchdepth::trajectory::SchemaError| Failure(SdStatus::Schema, e.to_string());
        let mut traj = Trajectory::from_json_line(read_str(trajectory_json, "trajectory_json")?).map_err(schema)?;
        let record: QuestionRecord = from_json_str(read_str(record_json, "record_json")?).map_err(schema)?;
        record.validate().map_err(schema)?;
        if traj.question_id != record.id {
            return Err(schema(searchdepth::trajectory::SchemaError::new("question_id", "does not match the record")));
        }
        reward::score_trajectory(&mut traj, &record, &RewardConstants::default()).map_err(reward_failure)?;
        write(out, into_c_string(traj.to_json_line())?, "out")
    })
}

/// Builds a BM25 index from a JSON Lines corpus file.
///
/// # Safety
/// `corpus_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_index_open(corpus_path: *const c_char, out: *mut *mut SdIndex) -> SdStatus {
    guard(|| {
        let path = read_str(corpus_path, "corpus_path")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let inner = ingest_corpus(Path::new(path)).map_err(|e| {
            let status = match &e {
                searchdepth::retrieval::CorpusError::Read(searchdepth::trajectory::JsonlError::Io { .. }) => SdStatus::Io,
                _ => SdStatus::Schema,
            };
            Failure(status, e.to_string())
        })?;
        write(out, Box::into_raw(Box::new(SdIndex { inner })), "out")
    })
}

/// Number of documents in the index.
///
/// # Safety
/// `index` must come from [`sd_index_open`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_index_len(index: *const SdIndex, out: *mut usize) -> SdStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| Failure::null("index"))?;
        write(out, index.inner.len(), "out")
    })
}

/// Top `k` documents for `query` as a JSON array of `{"id", "score"}`.
///
/// # Safety
/// `index` must come from [`sd_index_open`]; `query` must be a
/// NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_index_search_json(
    index: *const SdIndex,
    query: *const c_char,
    k: usize,
    out: *mut *mut c_char,
) -> SdStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| Failure::null("index"))?;
        let query = read_str(query, "query")?;
        let hits: Vec<serde_json::Value> = index
            .inner
            .search(query, k)
            .into_iter()
            .map(|(doc, score)| serde_json::json!({ "id": doc.id, "score": score }))
            .collect();
        write(out, into_c_string(serde_json::Value::from(hits).to_string())?, "out")
    })
}

/// Releases an index. NULL is ignored.
///
/// # Safety
/// `index` must come from [`sd_index_open`] and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sd_index_free(index: *mut SdIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}
