//! C ABI over the `subspace-ir` engine.
//!
//! Handles are opaque. Every fallible call returns a [`QirStatus`]; on any
//! status other than `QIR_STATUS_OK` a message is available from
//! [`qir_last_error_message`] on the same thread until the next call.
//!
//! An engine may be shared between threads for concurrent searches. Result
//! handles are not thread-safe.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use subspace_ir::corpus::{read_corpus, tokenize, CorpusIndex, Granularity};
use subspace_ir::docspace::{DimensionRule, WeightingScheme};
use subspace_ir::querydensity::{QueryConstruction, QueryTermWeighting};
use subspace_ir::retrieval::{first_pass, Engine, ParamConfig, DEFAULT_CANDIDATES};
use subspace_ir::termdensity::{TermDensityStore, DEFAULT_RANK_CAP, DEFAULT_SAMPLE_SIZE};
use subspace_ir::Error;

pub const QIR_FRAGMENT_DOCUMENT: u32 = 0;
pub const QIR_FRAGMENT_PARAGRAPH: u32 = 1;
pub const QIR_FRAGMENT_SENTENCE: u32 = 2;

pub const QIR_WEIGHTING_TFIDF: u32 = 0;
pub const QIR_WEIGHTING_TF: u32 = 1;
pub const QIR_WEIGHTING_BINARY: u32 = 2;

pub const QIR_DIM_HIGHEST: u32 = 0;
pub const QIR_DIM_MEAN: u32 = 1;
pub const QIR_DIM_ALL: u32 = 2;

pub const QIR_TERM_WEIGHT_UNIFORM: u32 = 0;
pub const QIR_TERM_WEIGHT_IDF: u32 = 1;

pub const QIR_CONSTRUCTION_MIXTURE: u32 = 0;
pub const QIR_CONSTRUCTION_SUPERPOSITION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QirStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Mismatch = 5,
    EmptyQuery = 6,
    InvalidArgument = 7,
    OutOfRange = 8,
    Internal = 9,
}

/// Model parameters for one search. Enumerated fields take the `QIR_*`
/// constants.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QirConfig {
    pub fragment: u32,
    pub doc_weighting: u32,
    pub query_weighting: u32,
    pub doc_dim: u32,
    pub query_dim: u32,
    pub term_weight: u32,
    pub construction: u32,
    /// BM25 candidates to re-rank.
    pub candidates: usize,
}

/// Term-density build options, fixed for the lifetime of an engine.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QirEngineOptions {
    pub rank_cap: usize,
    pub sample_size: usize,
    pub seed: u64,
}

pub struct QirEngine {
    engine: Engine,
}

pub struct QirResults {
    doc_ids: Vec<CString>,
    scores: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let msg = CString::new(message.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(QirStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => QirStatus::Io,
            Error::Parse { .. }
            | Error::Json { .. }
            | Error::StoreCorrupt(_)
            | Error::InvalidDocument(_)
            | Error::DuplicateDocument(_) => QirStatus::Parse,
            Error::StoreVersion { .. } | Error::ParameterMismatch(_) => QirStatus::Mismatch,
            Error::EmptyQuery => QirStatus::EmptyQuery,
            Error::InvalidValue { .. } => QirStatus::InvalidArgument,
            _ => QirStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QirStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QirStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QirStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(QirStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(QirStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn pick<T: Copy>(values: &[T], v: u32, what: &str) -> Result<T, Failure> {
    values
        .get(v as usize)
        .copied()
        .ok_or_else(|| Failure(QirStatus::InvalidArgument, format!("{what}: unknown value {v}")))
}

fn to_param_config(c: &QirConfig) -> Result<ParamConfig, Failure> {
    Ok(ParamConfig {
        granularity: pick(&Granularity::ALL, c.fragment, "fragment")?,
        doc_weighting: pick(&WeightingScheme::ALL, c.doc_weighting, "doc_weighting")?,
        query_weighting: pick(&WeightingScheme::ALL, c.query_weighting, "query_weighting")?,
        doc_dim: pick(&DimensionRule::ALL, c.doc_dim, "doc_dim")?,
        query_dim: pick(&DimensionRule::ALL, c.query_dim, "query_dim")?,
        term_weight: pick(&QueryTermWeighting::ALL, c.term_weight, "term_weight")?,
        construction: pick(&QueryConstruction::ALL, c.construction, "construction")?,
    }
    .normalized())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn qir_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn qir_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Fills `out` with the default configuration.
///
/// # Safety
/// `out` must be null or point to writable memory for a `QirConfig`.
#[no_mangle]
pub unsafe extern "C" fn qir_config_default(out: *mut QirConfig) -> QirStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(QirStatus::NullPointer, "out is null".into()));
        }
        let d = ParamConfig::default();
        let idx = |v: usize| v as u32;
        *out = QirConfig {
            fragment: idx(Granularity::ALL.iter().position(|g| *g == d.granularity).expect("listed")),
            doc_weighting: idx(WeightingScheme::ALL.iter().position(|w| *w == d.doc_weighting).expect("listed")),
            query_weighting: idx(WeightingScheme::ALL.iter().position(|w| *w == d.query_weighting).expect("listed")),
            doc_dim: idx(DimensionRule::ALL.iter().position(|x| *x == d.doc_dim).expect("listed")),
            query_dim: idx(DimensionRule::ALL.iter().position(|x| *x == d.query_dim).expect("listed")),
            term_weight: idx(QueryTermWeighting::ALL.iter().position(|x| *x == d.term_weight).expect("listed")),
            construction: idx(QueryConstruction::ALL.iter().position(|x| *x == d.construction).expect("listed")),
            candidates: DEFAULT_CANDIDATES,
        };
        Ok(())
    })
}

/// Fills `out` with the default engine options.
///
/// # Safety
/// `out` must be null or point to writable memory for a `QirEngineOptions`.
#[no_mangle]
pub unsafe extern "C" fn qir_engine_options_default(out: *mut QirEngineOptions) -> QirStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(QirStatus::NullPointer, "out is null".into()));
        }
        *out = QirEngineOptions {
            rank_cap: DEFAULT_RANK_CAP,
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
        };
        Ok(())
    })
}

unsafe fn open(
    options: *const QirEngineOptions,
    out: *mut *mut QirEngine,
    load: impl FnOnce() -> Result<CorpusIndex, Failure>,
) -> QirStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(QirStatus::NullPointer, "out is null".into()));
        }
        *out = ptr::null_mut();
        let mut engine = Engine::new(Arc::new(load()?));
        if let Some(o) = options.as_ref() {
            if o.rank_cap == 0 {
                return Err(Failure(QirStatus::InvalidArgument, "rank_cap must be at least 1".into()));
            }
            engine.rank_cap = o.rank_cap;
            engine.sample_size = o.sample_size;
            engine.seed = o.seed;
        }
        *out = Box::into_raw(Box::new(QirEngine { engine }));
        Ok(())
    })
}

/// Builds an engine from a JSONL corpus file. `options` may be null for
/// defaults. On success `*out` owns a handle released by [`qir_engine_free`].
///
/// # Safety
/// `path` must be null or a nul-terminated string; `options` null or valid;
/// `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qir_engine_open_corpus(
    path: *const c_char,
    options: *const QirEngineOptions,
    out: *mut *mut QirEngine,
) -> QirStatus {
    open(options, out, || {
        let path = PathBuf::from(str_arg(path, "path")?);
        Ok(CorpusIndex::build(read_corpus(&path)?, &Granularity::ALL)?)
    })
}

/// Opens an index directory written by the command-line `index` step.
///
/// # Safety
/// As for [`qir_engine_open_corpus`].
#[no_mangle]
pub unsafe extern "C" fn qir_engine_open_index(
    dir: *const c_char,
    options: *const QirEngineOptions,
    out: *mut *mut QirEngine,
) -> QirStatus {
    open(options, out, || {
        let dir = PathBuf::from(str_arg(dir, "dir")?);
        Ok(CorpusIndex::load(&dir)?)
    })
}

/// Registers a prebuilt term-density store. Fails with
/// `QIR_STATUS_MISMATCH` when it was built for another index.
///
/// # Safety
/// `engine` must be null or a live handle; `path` null or nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn qir_engine_add_store(engine: *const QirEngine, path: *const c_char) -> QirStatus {
    guard(|| {
        let engine = engine
            .as_ref()
            .ok_or_else(|| Failure(QirStatus::NullPointer, "engine is null".into()))?;
        let path = PathBuf::from(str_arg(path, "path")?);
        engine.engine.add_store(TermDensityStore::load(&path)?)?;
        Ok(())
    })
}

/// Runs one query. `config` may be null for defaults. On success `*out`
/// owns a result handle released by [`qir_results_free`].
///
/// # Safety
/// `engine` null or live; `query` null or nul-terminated; `config` null or
/// valid; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qir_engine_search(
    engine: *const QirEngine,
    query: *const c_char,
    config: *const QirConfig,
    out: *mut *mut QirResults,
) -> QirStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(QirStatus::NullPointer, "out is null".into()));
        }
        *out = ptr::null_mut();
        let engine = &engine
            .as_ref()
            .ok_or_else(|| Failure(QirStatus::NullPointer, "engine is null".into()))?
            .engine;
        let query = str_arg(query, "query")?;
        let (params, candidates) = match config.as_ref() {
            Some(c) => (to_param_config(c)?, c.candidates),
            None => (ParamConfig::default(), DEFAULT_CANDIDATES),
        };
        let terms = tokenize(query);
        let q = engine.query_density(&terms, &params)?;
        let cands = first_pass("", &terms, engine.index(), candidates);
        let list = engine.rerank(&cands, &q, &params);
        let (doc_ids, scores) = list
            .entries
            .into_iter()
            .map(|(d, s)| (CString::new(d).expect("doc ids have no nul"), s))
            .unzip();
        *out = Box::into_raw(Box::new(QirResults { doc_ids, scores }));
        Ok(())
    })
}

/// Number of ranked documents; 0 for a null handle.
///
/// # Safety
/// `results` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qir_results_len(results: *const QirResults) -> usize {
    results.as_ref().map_or(0, |r| r.doc_ids.len())
}

/// Document id at `rank` (0-based), owned by the handle; null when out of
/// range.
///
/// # Safety
/// `results` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qir_results_doc_id(results: *const QirResults, rank: usize) -> *const c_char {
    let mut p = ptr::null();
    let status = guard(|| {
        let r = results
            .as_ref()
            .ok_or_else(|| Failure(QirStatus::NullPointer, "results is null".into()))?;
        let id = r
            .doc_ids
            .get(rank)
            .ok_or_else(|| Failure(QirStatus::OutOfRange, format!("rank {rank} out of range")))?;
        p = id.as_ptr();
        Ok(())
    });
    if status == QirStatus::Ok {
        p
    } else {
        ptr::null()
    }
}

/// Score at `rank` (0-based).
///
/// # Safety
/// `results` null or live; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qir_results_score(results: *const QirResults, rank: usize, out: *mut f64) -> QirStatus {
    guard(|| {
        let r = results
            .as_ref()
            .ok_or_else(|| Failure(QirStatus::NullPointer, "results is null".into()))?;
        if out.is_null() {
            return Err(Failure(QirStatus::NullPointer, "out is null".into()));
        }
        *out = *r
            .scores
            .get(rank)
            .ok_or_else(|| Failure(QirStatus::OutOfRange, format!("rank {rank} out of range")))?;
        Ok(())
    })
}

/// # Safety
/// `results` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qir_results_free(results: *mut QirResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

/// # Safety
/// `engine` must be null or a handle not yet freed, with no search in flight.
#[no_mangle]
pub unsafe extern "C" fn qir_engine_free(engine: *mut QirEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}
