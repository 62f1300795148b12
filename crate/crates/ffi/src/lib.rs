//! C interface to `mixclust`.
//!
//! Objects are opaque handles created by `*_new` / `mix_cluster` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`MixStatus`]; on failure `mix_last_error_message` describes the error for
//! the calling thread. Labels crossing the boundary are 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mixclust::discrete::{cluster_scalar_mixture, ScalarInit, ScalarMode};
use mixclust::harness::{load_multilayer_edge_list, run_method, Clustering, Method};
use mixclust::metrics::hamming_rate;
use mixclust::models::{renyi_half_binomial, renyi_half_poisson_scalar, Diagonal, Family, ScalarModel};
use mixclust::tensor_core::Tensor3;
use mixclust::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixStatus {
    Ok = 0,
    NullPointer = 1,
    Argument = 2,
    Data = 3,
    Numeric = 4,
    Degenerate = 5,
    Io = 6,
    Panic = 7,
}

pub const MIX_FAMILY_BERNOULLI: u32 = 0;
pub const MIX_FAMILY_POISSON: u32 = 1;

pub const MIX_METHOD_REFINE_RSPEC: u32 = 0;
pub const MIX_METHOD_REFINE_SPLIT: u32 = 1;
pub const MIX_METHOD_RSPEC: u32 = 2;
pub const MIX_METHOD_M3SC: u32 = 3;
pub const MIX_METHOD_LOO: u32 = 4;

pub const MIX_SCALAR_BINOMIAL: u32 = 0;
pub const MIX_SCALAR_POISSON: u32 = 1;

pub const MIX_INIT_KMEANS: u32 = 0;
pub const MIX_INIT_MOM: u32 = 1;

/// Layer tensor, `d x d x n`.
pub struct MixTensor {
    inner: Tensor3,
}

/// Result of [`mix_cluster`].
pub struct MixClustering {
    inner: Clustering,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(MixStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Argument(_) | Error::Config(_) => MixStatus::Argument,
            Error::Shape(_) | Error::Parse { .. } => MixStatus::Data,
            Error::Domain(_) | Error::Numeric(_) => MixStatus::Numeric,
            Error::Degenerate(_) => MixStatus::Degenerate,
            Error::Io(_) => MixStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: MixStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn null(what: &str) -> Failure {
    fail(MixStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MixStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MixStatus::Panic
        }
    }
}

fn family(code: u32) -> Result<Family, Failure> {
    match code {
        MIX_FAMILY_BERNOULLI => Ok(Family::Bernoulli),
        MIX_FAMILY_POISSON => Ok(Family::Poisson),
        _ => Err(fail(MixStatus::Argument, format!("unknown family code {code}"))),
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mix_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a tensor from `nodes * nodes * layers` values, entry `(i, j, k)`
/// at offset `i + nodes * (j + nodes * k)`.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_tensor_new(
    nodes: usize,
    layers: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut MixTensor,
) -> MixStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let values = slice(values, len, "values")?.to_vec();
        let inner = Tensor3::from_vec([nodes, nodes, layers], values)?;
        if !inner.is_symmetric() {
            return Err(fail(MixStatus::Data, "every layer must be symmetric"));
        }
        write(out, Box::into_raw(Box::new(MixTensor { inner })), "out")
    })
}

/// Reads a `layer src dst [weight]` edge list.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mix_tensor_from_edge_list(
    path: *const c_char,
    family_code: u32,
    out: *mut *mut MixTensor,
) -> MixStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| fail(MixStatus::Argument, "path is not UTF-8"))?;
        let net = load_multilayer_edge_list(Path::new(path), family(family_code)?)?;
        write(out, Box::into_raw(Box::new(MixTensor { inner: net.tensor })), "out")
    })
}

/// Writes `[nodes, nodes, layers]` to `dims`.
///
/// # Safety
/// `tensor` must come from this library; `dims` must hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn mix_tensor_dims(tensor: *const MixTensor, dims: *mut usize) -> MixStatus {
    guard(|| {
        let t = tensor.as_ref().ok_or_else(|| null("tensor"))?;
        slice_mut(dims, 3, "dims")?.copy_from_slice(&t.inner.dims());
        Ok(())
    })
}

/// # Safety
/// `tensor` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mix_tensor_free(tensor: *mut MixTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Clusters the layers of `tensor` into two types with `k` communities.
///
/// # Safety
/// `tensor` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_cluster(
    tensor: *const MixTensor,
    family_code: u32,
    k: usize,
    method_code: u32,
    include_self_loops: bool,
    seed: u64,
    out: *mut *mut MixClustering,
) -> MixStatus {
    guard(|| {
        let t = tensor.as_ref().ok_or_else(|| null("tensor"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let method = match method_code {
            MIX_METHOD_REFINE_RSPEC => Method::RefineRspec,
            MIX_METHOD_REFINE_SPLIT => Method::RefineSplit,
            MIX_METHOD_RSPEC => Method::Rspec,
            MIX_METHOD_M3SC => Method::M3sc,
            MIX_METHOD_LOO => Method::Loo,
            other => return Err(fail(MixStatus::Argument, format!("unknown method code {other}"))),
        };
        let diagonal = if include_self_loops { Diagonal::Include } else { Diagonal::Exclude };
        let inner = run_method(&t.inner, method, family(family_code)?, k, diagonal, seed)?;
        write(out, Box::into_raw(Box::new(MixClustering { inner })), "out")
    })
}

/// Number of layers labeled.
///
/// # Safety
/// `clustering` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn mix_clustering_layers(clustering: *const MixClustering, out: *mut usize) -> MixStatus {
    guard(|| {
        let c = clustering.as_ref().ok_or_else(|| null("clustering"))?;
        write(out, c.inner.layer_labels.len(), "out")
    })
}

/// Copies the layer labels (0 or 1) into `labels`, which holds `len` values.
///
/// # Safety
/// `clustering` must come from this library; `labels` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mix_clustering_layer_labels(
    clustering: *const MixClustering,
    labels: *mut usize,
    len: usize,
) -> MixStatus {
    guard(|| {
        let c = clustering.as_ref().ok_or_else(|| null("clustering"))?;
        let src = &c.inner.layer_labels;
        if len != src.len() {
            return Err(fail(MixStatus::Argument, format!("buffer holds {len} labels, need {}", src.len())));
        }
        slice_mut(labels, len, "labels")?.copy_from_slice(src);
        Ok(())
    })
}

/// Copies the node communities of layer type `layer_type` (0 or 1).
///
/// # Safety
/// `clustering` must come from this library; `communities` must hold `len`
/// values.
#[no_mangle]
pub unsafe extern "C" fn mix_clustering_memberships(
    clustering: *const MixClustering,
    layer_type: usize,
    communities: *mut usize,
    len: usize,
) -> MixStatus {
    guard(|| {
        let c = clustering.as_ref().ok_or_else(|| null("clustering"))?;
        let src = c
            .inner
            .sigma
            .get(layer_type)
            .ok_or_else(|| fail(MixStatus::Argument, format!("layer type {layer_type} is not 0 or 1")))?;
        if len != src.len() {
            return Err(fail(MixStatus::Argument, format!("buffer holds {len} nodes, need {}", src.len())));
        }
        slice_mut(communities, len, "communities")?.copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `clustering` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mix_clustering_free(clustering: *mut MixClustering) {
    if !clustering.is_null() {
        drop(Box::from_raw(clustering));
    }
}

/// `(sqrt(theta1) - sqrt(theta2))^2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_divergence_poisson_scalar(theta1: f64, theta2: f64, out: *mut f64) -> MixStatus {
    guard(|| write(out, renyi_half_poisson_scalar(theta1, theta2)?, "out"))
}

/// Divergence between `Bin(trials, p1)` and `Bin(trials, p2)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_divergence_binomial(trials: u64, p1: f64, p2: f64, out: *mut f64) -> MixStatus {
    guard(|| write(out, renyi_half_binomial(trials, p1, p2)?, "out"))
}

/// Misclustering rate of `z` against `z_star`, minimized over relabelings.
///
/// # Safety
/// `z` and `z_star` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_hamming(
    z: *const usize,
    z_star: *const usize,
    n: usize,
    k: usize,
    out: *mut f64,
) -> MixStatus {
    guard(|| {
        let rate = hamming_rate(slice(z, n, "z")?, slice(z_star, n, "z_star")?, k)?;
        write(out, rate, "out")
    })
}

/// Clusters `n` counts from a two-component Binomial or Poisson mixture.
/// `trials` is ignored for Poisson.
///
/// # Safety
/// `counts` must hold `n` values and `labels` room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn mix_cluster_scalar(
    counts: *const u64,
    n: usize,
    model_code: u32,
    trials: u64,
    init_code: u32,
    leave_one_out: bool,
    seed: u64,
    labels: *mut usize,
) -> MixStatus {
    guard(|| {
        let x = slice(counts, n, "counts")?;
        let model = match model_code {
            MIX_SCALAR_BINOMIAL => ScalarModel::Binomial { trials },
            MIX_SCALAR_POISSON => ScalarModel::Poisson,
            other => return Err(fail(MixStatus::Argument, format!("unknown model code {other}"))),
        };
        let init = match init_code {
            MIX_INIT_KMEANS => ScalarInit::KMeans,
            MIX_INIT_MOM => ScalarInit::Mom,
            other => return Err(fail(MixStatus::Argument, format!("unknown init code {other}"))),
        };
        let mode = if leave_one_out { ScalarMode::LeaveOneOut } else { ScalarMode::Practical };
        let dst = slice_mut(labels, n, "labels")?;
        let r = cluster_scalar_mixture(x, model, init, mode, seed)?;
        dst.copy_from_slice(&r.labels);
        Ok(())
    })
}

/// Library version, NUL-terminated and static.
#[no_mangle]
pub extern "C" fn mix_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
