//! C ABI over the `facecov` pipeline.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `fc_*_new`, `fc_*_read` or `fc_*_load` call and released by the matching
//! `fc_*_free`. Fallible calls return an [`FcStatus`]; on failure
//! [`fc_last_error_message`] describes the error for the calling thread.
//! Output handles are written only on success.
//!
//! Matrices are passed as row-major `double` arrays.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use nalgebra::DMatrix;

use facecov::covpool::{pool_covariance, Region};
use facecov::pipeline::{extract_descriptors, load_trained, TrainedModel, SHALLOW_STREAM};
use facecov::spdnet::{affine_distance, load_chain, logeig, reeig, SpdChain, SpdChainConfig};
use facecov::tensorio::{read_fmap, ManifestEntry};
use facecov::{DatasetManifest, Error, FeatureTensor, Label, SpdMatrix, SymMatrix};

/// Call outcome. Failure codes match the `facecov` CLI exit codes where the
/// error families overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Bad argument value or configuration.
    InvalidArgument = 2,
    /// File format or I/O failure.
    Format = 3,
    /// Mesh geometry or surface patch failure.
    Geometry = 4,
    /// SPD math or covariance pooling failure.
    Spd = 5,
    /// Codebook failure.
    Codebook = 6,
    /// Classifier failure.
    Classifier = 7,
    /// Missing stream artifacts and other pipeline failures.
    Pipeline = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

/// Expression classes, in manifest label order.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcLabel {
    Happy = 0,
    Sad = 1,
    Disgust = 2,
    Surprise = 3,
    Fear = 4,
    Angry = 5,
    Neutral = 6,
}

impl From<Label> for FcLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Happy => FcLabel::Happy,
            Label::Sad => FcLabel::Sad,
            Label::Disgust => FcLabel::Disgust,
            Label::Surprise => FcLabel::Surprise,
            Label::Fear => FcLabel::Fear,
            Label::Angry => FcLabel::Angry,
            Label::Neutral => FcLabel::Neutral,
        }
    }
}

/// A feature tensor, usually `[c, h, w]`, stored as f32.
pub struct FcTensor(FeatureTensor);

/// A symmetric matrix. Operations that need positive definiteness check it.
pub struct FcMatrix(SymMatrix);

/// Frozen BiMap weights with their dimension schedule and ReEig threshold.
pub struct FcChain(SpdChain);

/// Trained codebooks and classifier.
pub struct FcModel {
    model: TrainedModel,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(FcStatus, String);

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e: Error = e.into();
        let status = match e.exit_code() {
            2 => FcStatus::InvalidArgument,
            3 => FcStatus::Format,
            4 => FcStatus::Geometry,
            5 => FcStatus::Spd,
            6 => FcStatus::Codebook,
            7 => FcStatus::Classifier,
            _ => FcStatus::Pipeline,
        };
        let mut text = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            let more = s.to_string();
            if !text.contains(&more) {
                text.push_str(": ");
                text.push_str(&more);
            }
            source = s.source();
        }
        Failure(status, text)
    }
}

fn null(what: &str) -> Failure {
    Failure(FcStatus::NullArgument, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(FcStatus::InvalidArgument, message.into())
}

/// Runs `body`, converting errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            FcStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn spd(m: &FcMatrix) -> Result<SpdMatrix, Failure> {
    Ok(SpdMatrix::new(m.0.as_matrix().clone())?)
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn fc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Two-letter code (`HA`, `SA`, ...) of a label, static storage.
#[no_mangle]
pub extern "C" fn fc_label_code(label: FcLabel) -> *const c_char {
    let code: &'static [u8] = match label {
        FcLabel::Happy => b"HA\0",
        FcLabel::Sad => b"SA\0",
        FcLabel::Disgust => b"DI\0",
        FcLabel::Surprise => b"SU\0",
        FcLabel::Fear => b"FE\0",
        FcLabel::Angry => b"AN\0",
        FcLabel::Neutral => b"NE\0",
    };
    code.as_ptr().cast()
}

/// Reads an FMAP file.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fc_tensor_read(path: *const c_char, out: *mut *mut FcTensor) -> FcStatus {
    guard(|| {
        let tensor = read_fmap(str_arg(path, "path")?)?;
        emit(out, FcTensor(tensor))
    })
}

/// Builds a tensor from `ndim` dimensions and `data_len` values (their
/// product).
///
/// # Safety
/// `dims` must hold `ndim` entries, `data` `data_len` entries; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_tensor_new(
    dims: *const usize,
    ndim: usize,
    data: *const f32,
    data_len: usize,
    out: *mut *mut FcTensor,
) -> FcStatus {
    guard(|| {
        let dims = slice_arg(dims, ndim, "dims")?.to_vec();
        let data = slice_arg(data, data_len, "data")?.to_vec();
        emit(out, FcTensor(FeatureTensor::new(dims, data)?))
    })
}

/// Rank of the tensor (0 for null). Copies up to `capacity` dimensions into
/// `dims` when it is non-null.
///
/// # Safety
/// `tensor` must come from this library; `dims` must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn fc_tensor_dims(tensor: *const FcTensor, dims: *mut usize, capacity: usize) -> usize {
    let Some(t) = tensor.as_ref() else { return 0 };
    let all = t.0.dims();
    if !dims.is_null() {
        for (k, &d) in all.iter().take(capacity).enumerate() {
            *dims.add(k) = d;
        }
    }
    all.len()
}

/// # Safety
/// `tensor` must come from this library (or be null) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fc_tensor_free(tensor: *mut FcTensor) {
    free(tensor)
}

/// Copies a `d x d` row-major symmetric matrix.
///
/// # Safety
/// `data` must hold `d * d` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_matrix_new(d: usize, data: *const f64, out: *mut *mut FcMatrix) -> FcStatus {
    guard(|| {
        if d == 0 {
            return Err(invalid("matrix dimension must be positive"));
        }
        let values = slice_arg(data, d * d, "data")?;
        let m = SymMatrix::new(DMatrix::from_row_slice(d, d, values))?;
        emit(out, FcMatrix(m))
    })
}

/// Side length of the matrix (0 for null).
///
/// # Safety
/// `m` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn fc_matrix_dim(m: *const FcMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// Copies the matrix row-major into `data`, which holds `len >= d * d` values.
///
/// # Safety
/// `m` must come from this library and `data` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn fc_matrix_copy(m: *const FcMatrix, data: *mut f64, len: usize) -> FcStatus {
    guard(|| {
        let m = &handle(m, "matrix")?.0;
        let d = m.dim();
        if len < d * d {
            return Err(invalid(format!("buffer of {len} values is smaller than {d}x{d}")));
        }
        if data.is_null() {
            return Err(null("data"));
        }
        let a = m.as_matrix();
        for i in 0..d {
            for j in 0..d {
                *data.add(i * d + j) = a[(i, j)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library (or be null) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fc_matrix_free(m: *mut FcMatrix) {
    free(m)
}

/// Ridge-regularized covariance of the `c` channels over pixel rows
/// `[row_begin, row_end)` and columns `[col_begin, col_end)` of a
/// `[c, h, w]` tensor.
///
/// # Safety
/// `tensor` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_pool_region(
    tensor: *const FcTensor,
    row_begin: usize,
    row_end: usize,
    col_begin: usize,
    col_end: usize,
    out: *mut *mut FcMatrix,
) -> FcStatus {
    guard(|| {
        let t = &handle(tensor, "tensor")?.0;
        let region = Region {
            rows: (row_begin, row_end),
            cols: (col_begin, col_end),
        };
        let cov = pool_covariance(t, region)?;
        emit(out, FcMatrix(cov.as_sym().clone()))
    })
}

/// [`fc_pool_region`] over the whole spatial extent.
///
/// # Safety
/// As for [`fc_pool_region`].
#[no_mangle]
pub unsafe extern "C" fn fc_pool_global(tensor: *const FcTensor, out: *mut *mut FcMatrix) -> FcStatus {
    guard(|| {
        let t = &handle(tensor, "tensor")?.0;
        let (_, h, w) = t.chw()?;
        let cov = pool_covariance(t, Region::full(h, w))?;
        emit(out, FcMatrix(cov.as_sym().clone()))
    })
}

/// Affine-invariant geodesic distance between two SPD matrices.
///
/// # Safety
/// `a` and `b` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_affine_distance(a: *const FcMatrix, b: *const FcMatrix, out: *mut f64) -> FcStatus {
    guard(|| {
        let a = spd(handle(a, "a")?)?;
        let b = spd(handle(b, "b")?)?;
        let d = affine_distance(&a, &b)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = d;
        Ok(())
    })
}

/// Eigenvalue rectification: eigenvalues below `epsilon` are raised to it.
///
/// # Safety
/// `m` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_reeig(m: *const FcMatrix, epsilon: f64, out: *mut *mut FcMatrix) -> FcStatus {
    guard(|| {
        let r = reeig(&handle(m, "matrix")?.0, epsilon)?;
        emit(out, FcMatrix(r.as_sym().clone()))
    })
}

/// Matrix logarithm of an SPD matrix.
///
/// # Safety
/// `m` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_logeig(m: *const FcMatrix, out: *mut *mut FcMatrix) -> FcStatus {
    guard(|| {
        let l = logeig(&spd(handle(m, "matrix")?)?)?;
        emit(out, FcMatrix(l))
    })
}

/// Chain with seeded orthonormal weights for the strictly decreasing
/// schedule `dims[0] > dims[1] > ...`.
///
/// # Safety
/// `dims` must hold `ndims` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_seeded(
    dims: *const usize,
    ndims: usize,
    epsilon: f64,
    seed: u64,
    out: *mut *mut FcChain,
) -> FcStatus {
    guard(|| {
        let dims = slice_arg(dims, ndims, "dims")?.to_vec();
        let config = SpdChainConfig::new(dims, epsilon)?;
        emit(out, FcChain(SpdChain::seeded(config, seed)?))
    })
}

/// Loads a chain written by `facecov reduce --save-weights`.
///
/// # Safety
/// `dir` and `stem` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_load(dir: *const c_char, stem: *const c_char, out: *mut *mut FcChain) -> FcStatus {
    guard(|| {
        let dir = PathBuf::from(str_arg(dir, "dir")?);
        let chain = load_chain(&dir, str_arg(stem, "stem")?)?;
        emit(out, FcChain(chain))
    })
}

/// Output side length of the chain (0 for null).
///
/// # Safety
/// `chain` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_output_dim(chain: *const FcChain) -> usize {
    chain.as_ref().map_or(0, |c| c.0.config.output_dim())
}

/// BiMap and ReEig per stage, then LogEig: an SPD input of the chain's input
/// size becomes a symmetric log-domain matrix of its output size.
///
/// # Safety
/// `chain` and `m` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_reduce(
    chain: *const FcChain,
    m: *const FcMatrix,
    out: *mut *mut FcMatrix,
) -> FcStatus {
    guard(|| {
        let chain = &handle(chain, "chain")?.0;
        let reduced = chain.reduce(&spd(handle(m, "matrix")?)?)?;
        emit(out, FcMatrix(reduced))
    })
}

/// # Safety
/// `chain` must come from this library (or be null) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_free(chain: *mut FcChain) {
    free(chain)
}

/// Loads a model directory written by `facecov train`.
///
/// # Safety
/// `dir` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_model_load(dir: *const c_char, out: *mut *mut FcModel) -> FcStatus {
    guard(|| {
        let model = load_trained(&PathBuf::from(str_arg(dir, "dir")?))?;
        let names = model
            .config
            .streams
            .iter()
            .map(|s| CString::new(s.as_str()).map_err(|_| invalid("stream name holds NUL")))
            .collect::<Result<_, _>>()?;
        emit(out, FcModel { model, names })
    })
}

/// Number of fused streams the model expects (0 for null).
///
/// # Safety
/// `model` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn fc_model_stream_count(model: *const FcModel) -> usize {
    model.as_ref().map_or(0, |m| m.names.len())
}

/// Name of stream `index`, or null when out of range. Owned by the model.
///
/// # Safety
/// `model` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn fc_model_stream_name(model: *const FcModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.names.get(index))
        .map_or(std::ptr::null(), |n| n.as_ptr())
}

/// Classifies one sample from its raw artifacts. `paths[i]` is the file for
/// stream `i` in model order: a mesh (OBJ or PLY) for the `shallow` stream,
/// an FMAP tensor for every other stream.
///
/// # Safety
/// `model` must come from this library, `paths` must hold `npaths`
/// NUL-terminated strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_model_predict(
    model: *const FcModel,
    paths: *const *const c_char,
    npaths: usize,
    out: *mut FcLabel,
) -> FcStatus {
    guard(|| {
        let m = &handle(model, "model")?.model;
        let paths = slice_arg(paths, npaths, "paths")?;
        if paths.len() != m.config.streams.len() {
            return Err(invalid(format!(
                "model expects {} stream files, got {}",
                m.config.streams.len(),
                paths.len()
            )));
        }
        let mut mesh_path = None;
        let mut tensor_paths = BTreeMap::new();
        for (stream, &p) in m.config.streams.iter().zip(paths) {
            let path = PathBuf::from(str_arg(p, "path")?);
            if stream == SHALLOW_STREAM {
                mesh_path = Some(path);
            } else {
                tensor_paths.insert(stream.clone(), path);
            }
        }
        // label is a placeholder; only the artifacts are read
        let entry = ManifestEntry {
            sample_id: "sample".into(),
            subject_id: "subject".into(),
            label: Label::Neutral,
            mesh_path,
            tensor_paths,
        };
        let manifest = DatasetManifest { entries: vec![entry] };
        let descriptors = extract_descriptors(&manifest, &m.config)?;
        let label = m.predict(&descriptors.per_sample[0])?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = label.into();
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library (or be null) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fc_model_free(model: *mut FcModel) {
    free(model)
}
