//! C interface to `grand-core`.
//!
//! Objects cross the boundary as opaque handles created by a `*_load`
//! function and released with the matching `*_free`. Every fallible call
//! returns a [`GrandStatus`]; on failure [`grand_last_error`] describes what
//! went wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use grand_core::embed::load_embeddings;
use grand_core::graph::{GraphError, KnowledgeGraph};
use grand_core::pipeline::{self, ExperimentConfig, PipelineError};
use grand_core::vectors::KeyedVectors;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrandStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    NotFound = 6,
    BufferTooSmall = 7,
    Failed = 8,
    Panic = 9,
}

/// A loaded knowledge graph.
pub struct GrandGraph {
    inner: KnowledgeGraph,
}

/// A table of named vectors.
pub struct GrandEmbedding {
    inner: KeyedVectors<f32>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(GrandStatus, String);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Config(_) => GrandStatus::Config,
            PipelineError::Io(_) | PipelineError::Graph(GraphError::Io(_)) => GrandStatus::Io,
            PipelineError::Graph(_) | PipelineError::Json(_) | PipelineError::Dataset(_) => GrandStatus::Parse,
            _ => GrandStatus::Failed,
        };
        Failure(status, e.to_string())
    }
}

/// Run `body`, turning errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> GrandStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => GrandStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GrandStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    Ok(PathBuf::from(str_arg(p, what)?))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(GrandStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GrandStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn null(what: &str) -> Failure {
    Failure(GrandStatus::NullArgument, format!("{what} is null"))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn grand_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn grand_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load an N-Triples file (optionally gzipped). Statements whose predicate
/// is `exclude_predicate` are dropped; pass null to keep everything.
///
/// # Safety
/// `path` and `exclude_predicate` must be null or NUL-terminated strings;
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn grand_graph_load(
    path: *const c_char,
    exclude_predicate: *const c_char,
    out: *mut *mut GrandGraph,
) -> GrandStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = path_arg(path, "path")?;
        let exclude = if exclude_predicate.is_null() {
            Vec::new()
        } else {
            vec![str_arg(exclude_predicate, "exclude_predicate")?.to_string()]
        };
        let g = pipeline::read_graph(&path, &exclude)?;
        *out = Box::into_raw(Box::new(GrandGraph { inner: g }));
        Ok(())
    })
}

/// # Safety
/// `g` must be a live handle from [`grand_graph_load`] or null.
#[no_mangle]
pub unsafe extern "C" fn grand_graph_entity_count(g: *const GrandGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.entity_count())
}

/// # Safety
/// `g` must be a live handle from [`grand_graph_load`] or null.
#[no_mangle]
pub unsafe extern "C" fn grand_graph_edge_count(g: *const GrandGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.edge_count())
}

/// # Safety
/// `g` must come from [`grand_graph_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn grand_graph_free(g: *mut GrandGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Load a vector file in word2vec text format.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn grand_embedding_load(path: *const c_char, out: *mut *mut GrandEmbedding) -> GrandStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = path_arg(path, "path")?;
        let kv = load_embeddings(&path).map_err(|e| Failure(GrandStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(GrandEmbedding { inner: kv }));
        Ok(())
    })
}

/// # Safety
/// `e` must be a live handle from [`grand_embedding_load`] or null.
#[no_mangle]
pub unsafe extern "C" fn grand_embedding_dim(e: *const GrandEmbedding) -> usize {
    e.as_ref().map_or(0, |e| e.inner.dim())
}

/// # Safety
/// `e` must be a live handle from [`grand_embedding_load`] or null.
#[no_mangle]
pub unsafe extern "C" fn grand_embedding_len(e: *const GrandEmbedding) -> usize {
    e.as_ref().map_or(0, |e| e.inner.len())
}

/// Copy the vector for `key` into `buf`, which holds `buf_len` floats.
///
/// # Safety
/// `e` must be a live handle, `key` a NUL-terminated string and `buf` valid
/// for `buf_len` writes.
#[no_mangle]
pub unsafe extern "C" fn grand_embedding_lookup(
    e: *const GrandEmbedding,
    key: *const c_char,
    buf: *mut f32,
    buf_len: usize,
) -> GrandStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("embedding"))?;
        let key = str_arg(key, "key")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let v = e
            .inner
            .get(key)
            .ok_or_else(|| Failure(GrandStatus::NotFound, format!("no vector for {key}")))?;
        if buf_len < v.len() {
            return Err(Failure(
                GrandStatus::BufferTooSmall,
                format!("need {} floats, got {buf_len}", v.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, v.len()).copy_from_slice(v);
        Ok(())
    })
}

/// # Safety
/// `e` must come from [`grand_embedding_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn grand_embedding_free(e: *mut GrandEmbedding) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Test-set scores of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GrandScores {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// Run the experiment described by a TOML config file. `scores` may be
/// null.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `scores` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn grand_run_experiment(config_path: *const c_char, scores: *mut GrandScores) -> GrandStatus {
    guard(|| {
        let path = path_arg(config_path, "config_path")?;
        let cfg = ExperimentConfig::load(&path)?;
        let outcome = pipeline::run(&cfg)?;
        if let Some(s) = scores.as_mut() {
            let m = &outcome.metrics.overall;
            *s = GrandScores {
                accuracy: m.accuracy,
                micro_f1: m.micro_f1,
                macro_f1: m.macro_f1,
            };
        }
        Ok(())
    })
}
