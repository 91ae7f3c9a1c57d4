//! C ABI for the `dtk` crate.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `dtk_*_new`/`dtk_*_parse`/`dtk_distributed_tree` call and released by the
//! matching `*_free`. Fallible calls return a [`DtkStatus`]; on failure the
//! message is kept per thread and read with [`dtk_last_error_message`].
//! No call unwinds into C: panics are caught and reported as
//! `DTK_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dtk::config::RunConfig;
use dtk::{dtk as dtk_dot, dtk_normalized, parse_tree, tk_fast, CompositionKind, DistributedTree, DtkError, Encoder, Tree};

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidConfig = 4,
    ProvenanceMismatch = 5,
    CapExceeded = 6,
    BufferTooSmall = 7,
    ZeroSelfKernel = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtkComposition {
    /// Shuffled circular convolution.
    Conv = 0,
    /// Shuffled γ-scaled element-wise product.
    Prod = 1,
}

/// Encoder: lexicon, composition operator and λ.
pub struct DtkModel {
    encoder: Encoder,
}

/// Parsed tree.
pub struct DtkTree(Tree);

/// Distributed tree: a vector plus the configuration that produced it.
pub struct DtkVector(DistributedTree);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: DtkStatus, msg: impl Into<String>) -> DtkStatus {
    set_error(msg);
    status
}

fn dtk_status(e: &DtkError) -> DtkStatus {
    match e {
        DtkError::InvalidLambda(_) | DtkError::Embedding(_) => DtkStatus::InvalidConfig,
        DtkError::ProvenanceMismatch { .. } => DtkStatus::ProvenanceMismatch,
        DtkError::FragmentCapExceeded { .. } => DtkStatus::CapExceeded,
        DtkError::ZeroSelfKernel => DtkStatus::ZeroSelfKernel,
    }
}

/// Runs `f` with the error slot cleared and panics turned into a status.
fn guard(f: impl FnOnce() -> DtkStatus) -> DtkStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(DtkStatus::Internal, "internal panic"),
    }
}

/// Creates an encoder. `dim` must be positive (powers of two are fast) and
/// `lambda` in (0, 1].
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dtk_model_new(
    dim: usize,
    lambda: f64,
    composition: DtkComposition,
    seed: u64,
    out: *mut *mut DtkModel,
) -> DtkStatus {
    guard(|| {
        if out.is_null() {
            return fail(DtkStatus::NullPointer, "out is null");
        }
        let kind = match composition {
            DtkComposition::Conv => CompositionKind::ShuffledConvolution,
            DtkComposition::Prod => CompositionKind::ShuffledProduct,
        };
        let cfg = RunConfig { dim, lambda, composition: kind, seed, ..RunConfig::default() };
        if let Err(e) = cfg.validate() {
            return fail(DtkStatus::InvalidConfig, e.to_string());
        }
        match cfg.encoder() {
            Ok(encoder) => {
                *out = Box::into_raw(Box::new(DtkModel { encoder }));
                DtkStatus::Ok
            }
            Err(e) => fail(dtk_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be null or a pointer from [`dtk_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtk_model_free(model: *mut DtkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parses a bracketed tree such as `(S (NP (D the) (N dog)) (VP (V ran)))`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dtk_tree_parse(text: *const c_char, out: *mut *mut DtkTree) -> DtkStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return fail(DtkStatus::NullPointer, "text or out is null");
        }
        let Ok(s) = CStr::from_ptr(text).to_str() else {
            return fail(DtkStatus::InvalidUtf8, "tree text is not UTF-8");
        };
        match parse_tree(s) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(DtkTree(t)));
                DtkStatus::Ok
            }
            Err(e) => fail(DtkStatus::ParseError, e.to_string()),
        }
    })
}

/// # Safety
/// `tree` must be null or a pointer from [`dtk_tree_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtk_tree_free(tree: *mut DtkTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Number of nodes, or 0 for a null tree.
///
/// # Safety
/// `tree` must be null or a live tree handle.
#[no_mangle]
pub unsafe extern "C" fn dtk_tree_node_count(tree: *const DtkTree) -> usize {
    tree.as_ref().map_or(0, |t| t.0.node_count())
}

/// Encodes `tree` with `model`.
///
/// # Safety
/// `model` and `tree` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dtk_distributed_tree(
    model: *const DtkModel,
    tree: *const DtkTree,
    out: *mut *mut DtkVector,
) -> DtkStatus {
    guard(|| {
        let (Some(m), Some(t)) = (model.as_ref(), tree.as_ref()) else {
            return fail(DtkStatus::NullPointer, "model or tree is null");
        };
        if out.is_null() {
            return fail(DtkStatus::NullPointer, "out is null");
        }
        match m.encoder.encode(&t.0) {
            Ok(dt) => {
                *out = Box::into_raw(Box::new(DtkVector(dt)));
                DtkStatus::Ok
            }
            Err(e) => fail(dtk_status(&e), e.to_string()),
        }
    })
}

/// Dimension of a vector, or 0 for null.
///
/// # Safety
/// `v` must be null or a live vector handle.
#[no_mangle]
pub unsafe extern "C" fn dtk_vector_dim(v: *const DtkVector) -> usize {
    v.as_ref().map_or(0, |v| v.0.dim())
}

/// Copies the components into `buf`, which must hold at least `len`
/// doubles; fails with `DTK_STATUS_BUFFER_TOO_SMALL` if `len` < dimension.
///
/// # Safety
/// `v` must be a live vector handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dtk_vector_copy(v: *const DtkVector, buf: *mut f64, len: usize) -> DtkStatus {
    guard(|| {
        let Some(v) = v.as_ref() else {
            return fail(DtkStatus::NullPointer, "vector is null");
        };
        if buf.is_null() {
            return fail(DtkStatus::NullPointer, "buffer is null");
        }
        let src = v.0.vector.as_slice();
        if len < src.len() {
            return fail(DtkStatus::BufferTooSmall, format!("need {} doubles, got {len}", src.len()));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        DtkStatus::Ok
    })
}

/// # Safety
/// `v` must be null or a vector handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtk_vector_free(v: *mut DtkVector) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

unsafe fn vector_pair<'a>(
    a: *const DtkVector,
    b: *const DtkVector,
    out: *mut f64,
) -> Result<(&'a DtkVector, &'a DtkVector), DtkStatus> {
    match (a.as_ref(), b.as_ref()) {
        (Some(a), Some(b)) if !out.is_null() => Ok((a, b)),
        _ => Err(fail(DtkStatus::NullPointer, "vector or out is null")),
    }
}

/// Distributed tree kernel: the dot product of two vectors made by models
/// with identical configuration.
///
/// # Safety
/// `a`, `b` must be live vector handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dtk_kernel(a: *const DtkVector, b: *const DtkVector, out: *mut f64) -> DtkStatus {
    guard(|| match vector_pair(a, b, out) {
        Err(s) => s,
        Ok((a, b)) => match dtk_dot(&a.0, &b.0) {
            Ok(v) => {
                *out = v;
                DtkStatus::Ok
            }
            Err(e) => fail(dtk_status(&e), e.to_string()),
        },
    })
}

/// Cosine-normalized distributed tree kernel.
///
/// # Safety
/// As [`dtk_kernel`].
#[no_mangle]
pub unsafe extern "C" fn dtk_kernel_normalized(a: *const DtkVector, b: *const DtkVector, out: *mut f64) -> DtkStatus {
    guard(|| match vector_pair(a, b, out) {
        Err(s) => s,
        Ok((a, b)) => match dtk_normalized(&a.0, &b.0) {
            Ok(v) => {
                *out = v;
                DtkStatus::Ok
            }
            Err(e) => fail(dtk_status(&e), e.to_string()),
        },
    })
}

/// Exact tree kernel with decay `lambda`.
///
/// # Safety
/// `a`, `b` must be live tree handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dtk_tree_kernel(a: *const DtkTree, b: *const DtkTree, lambda: f64, out: *mut f64) -> DtkStatus {
    guard(|| {
        let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
            return fail(DtkStatus::NullPointer, "tree is null");
        };
        if out.is_null() {
            return fail(DtkStatus::NullPointer, "out is null");
        }
        match tk_fast(&a.0, &b.0, lambda) {
            Ok(v) => {
                *out = v;
                DtkStatus::Ok
            }
            Err(e) => fail(dtk_status(&e), e.to_string()),
        }
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn dtk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dtk_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
