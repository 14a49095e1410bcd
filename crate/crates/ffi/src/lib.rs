//! C ABI over the core library.
//!
//! Every fallible call returns a [`LascStatus`]; on failure a message for
//! the calling thread is available from [`lasc_last_error`]. Handles are
//! opaque and must be released with their `_free` function. No function
//! keeps a pointer passed to it beyond the call.

use lowasc::audio::{AudioClip, Extractor, SpectrogramConfig, SpectrogramKind};
use lowasc::compress::{complexity_report, Variant};
use lowasc::engine::ModelFile;
use lowasc::fusion::{prod_fuse, ProbabilityMatrix};
use lowasc::report::{ModelBundle, SceneClassifier};
use lowasc::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LascStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    Parse = 4,
    Io = 5,
    Format = 6,
    Retryable = 7,
    Runtime = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// 0 mel, 1 gammatone, 2 constant-Q.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LascKind {
    Mel = 0,
    Gam = 1,
    Cqt = 2,
}

pub struct LascExtractor {
    inner: Extractor,
}

pub struct LascModel {
    bundle: ModelBundle,
    class_names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &Error) -> LascStatus {
    match e {
        Error::InvalidInput(_) | Error::Validation(_) => LascStatus::InvalidInput,
        Error::InvalidConfig(_) => LascStatus::InvalidConfig,
        Error::Parse { .. } => LascStatus::Parse,
        Error::Io { .. } => LascStatus::Io,
        Error::Format(_) => LascStatus::Format,
        Error::Retryable(_) => LascStatus::Retryable,
        Error::Divergence(_) | Error::Runtime(_) => LascStatus::Runtime,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (LascStatus, String)>) -> LascStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LascStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            LascStatus::Panic
        }
    }
}

fn lib<T>(r: lowasc::Result<T>) -> Result<T, (LascStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (LascStatus, String) {
    (LascStatus::NullPointer, "null pointer argument".into())
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, (LascStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| (LascStatus::InvalidInput, "string is not valid UTF-8".into()))
}

unsafe fn samples<'a>(p: *const f32, n: usize) -> Result<&'a [f32], (LascStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn lasc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn lasc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Front-end with default settings; `kind` is a [`LascKind`] value.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn lasc_extractor_new(kind: u32, out: *mut *mut LascExtractor) -> LascStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let k = match kind {
            k if k == LascKind::Mel as u32 => SpectrogramKind::Mel,
            k if k == LascKind::Gam as u32 => SpectrogramKind::Gam,
            k if k == LascKind::Cqt as u32 => SpectrogramKind::Cqt,
            other => return Err((LascStatus::InvalidInput, format!("unknown spectrogram kind {other}"))),
        };
        let inner = lib(Extractor::new(SpectrogramConfig::for_kind(k)))?;
        *out = Box::into_raw(Box::new(LascExtractor { inner }));
        Ok(())
    })
}

/// # Safety
/// `ex` must come from [`lasc_extractor_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lasc_extractor_free(ex: *mut LascExtractor) {
    if !ex.is_null() {
        drop(Box::from_raw(ex));
    }
}

/// Feature tensor for mono audio, written as band-major
/// `(band, frame, channel)` floats. `len` holds the capacity of `out` on
/// entry and the required length on return; pass `out = NULL` to query.
///
/// # Safety
/// `ex` must be a live handle, `audio` must hold `n` floats, `out` (if not
/// null) must hold `*len` floats, and `dims` must point to three `size_t`.
#[no_mangle]
pub unsafe extern "C" fn lasc_extract(
    ex: *const LascExtractor,
    audio: *const f32,
    n: usize,
    sample_rate: u32,
    out: *mut f32,
    len: *mut usize,
    dims: *mut usize,
) -> LascStatus {
    guard(|| {
        let ex = ex.as_ref().ok_or_else(null)?;
        if len.is_null() || dims.is_null() {
            return Err(null());
        }
        let clip = lib(AudioClip::new(samples(audio, n)?.to_vec(), sample_rate, "ffi"))?;
        let f = lib(ex.inner.features(&clip))?;
        *dims = f.bands;
        *dims.add(1) = f.frames;
        *dims.add(2) = f.channels;
        let cap = *len;
        *len = f.values.len();
        if out.is_null() {
            return Ok(());
        }
        if cap < f.values.len() {
            return Err((LascStatus::BufferTooSmall, format!("need {} floats, have {cap}", f.values.len())));
        }
        ptr::copy_nonoverlapping(f.values.as_ptr(), out, f.values.len());
        Ok(())
    })
}

/// Load a trained model file (float or int8).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lasc_model_load(path: *const c_char, out: *mut *mut LascModel) -> LascStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let p = cstr(path)?;
        let file = lib(ModelFile::load(std::path::Path::new(p)))?;
        let bundle = lib(ModelBundle::from_files(vec![("model".into(), file)]))?;
        let class_names = bundle.classes().iter().map(|c| CString::new(c.replace('\0', " ")).unwrap_or_default()).collect();
        *out = Box::into_raw(Box::new(LascModel { bundle, class_names }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`lasc_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lasc_model_free(m: *mut LascModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of scene classes, 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lasc_model_class_count(m: *const LascModel) -> usize {
    m.as_ref().map(|m| m.class_names.len()).unwrap_or(0)
}

/// Class name owned by the handle, or null when out of range.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lasc_model_class_name(m: *const LascModel, index: usize) -> *const c_char {
    m.as_ref().and_then(|m| m.class_names.get(index)).map(|c| c.as_ptr()).unwrap_or(ptr::null())
}

/// Scene probabilities for one recording, using the model's own front-end.
///
/// # Safety
/// `audio` must hold `n` floats and `probs` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn lasc_model_predict(
    m: *const LascModel,
    audio: *const f32,
    n: usize,
    sample_rate: u32,
    probs: *mut f64,
    cap: usize,
) -> LascStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(null)?;
        if probs.is_null() {
            return Err(null());
        }
        let c = m.class_names.len();
        if cap < c {
            return Err((LascStatus::BufferTooSmall, format!("need {c} doubles, have {cap}")));
        }
        let clip = lib(AudioClip::new(samples(audio, n)?.to_vec(), sample_rate, "ffi"))?;
        let p = lib(m.bundle.classify(&clip))?;
        ptr::copy_nonoverlapping(p.as_ptr(), probs, c);
        Ok(())
    })
}

/// PROD fusion for one clip: `probs` holds `models × classes` rows, each a
/// distribution. `out` receives `classes` unnormalized scores; `label`
/// receives the winning index.
///
/// # Safety
/// Buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn lasc_prod_fuse(probs: *const f64, models: usize, classes: usize, out: *mut f64, label: *mut usize) -> LascStatus {
    guard(|| {
        if probs.is_null() || out.is_null() || label.is_null() {
            return Err(null());
        }
        if models == 0 || classes == 0 {
            return Err((LascStatus::InvalidInput, "models and classes must be positive".into()));
        }
        let all = std::slice::from_raw_parts(probs, models * classes);
        let names: Vec<String> = (0..classes).map(|k| k.to_string()).collect();
        let mats = all
            .chunks(classes)
            .enumerate()
            .map(|(i, row)| lib(ProbabilityMatrix::new(format!("m{i}"), names.clone(), vec!["clip".into()], row.to_vec())))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&ProbabilityMatrix> = mats.iter().collect();
        let fused = lib(prod_fuse(&refs))?;
        ptr::copy_nonoverlapping(fused.row(0).as_ptr(), out, classes);
        *label = fused.labels()[0];
        Ok(())
    })
}

/// Trainable parameters and storage bytes of a named variant
/// (`baseline`, `nri`, `rd128`, `rd64`, `rd32`, `kb120`).
///
/// # Safety
/// `name` must be a NUL-terminated string; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lasc_variant_complexity(
    name: *const c_char,
    classes: usize,
    quantized: bool,
    params: *mut u64,
    bytes: *mut u64,
) -> LascStatus {
    guard(|| {
        if params.is_null() || bytes.is_null() {
            return Err(null());
        }
        let v: Variant = lib(cstr(name)?.parse())?;
        let r = lib(complexity_report(&lib(v.build(classes))?, if quantized { 8 } else { 32 }))?;
        *params = r.trainable_params;
        *bytes = r.memory_bytes;
        Ok(())
    })
}
