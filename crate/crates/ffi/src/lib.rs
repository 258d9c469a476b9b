//! C ABI over `thermofuse`.
//!
//! Conventions:
//! * Every fallible function returns a [`TfStatus`]; results go through out
//!   pointers. On failure the out pointer is left untouched and
//!   [`tf_last_error_message`] describes the problem.
//! * Objects are opaque handles created by `tf_*_new`/`_read`/... and
//!   released with the matching `tf_*_free`, which accepts NULL.
//! * Grids are row-major. Temperatures are °C, frames gray levels.
//! * Strings returned by the library are freed with [`tf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use thermofuse::burst::{load_burst, make_burst, normalize_frame, save_burst, Burst, BurstSpec, Normalization};
use thermofuse::calibration::{fit_per_pixel, fit_radial, load_measurements, read_coefficients, synthesize_frame, write_coefficients, CoefficientTensor, RadialModel, N_COEFFS};
use thermofuse::fusion::{fuse, naive_estimate, offset_eval, GainOffsetMaps, KernelStack, OffsetModel};
use thermofuse::io::{read_raw_map, write_raw_map};
use thermofuse::metrics::{default_thresholds, error_report, loss, mae, ssim, LossWeights};
use thermofuse::pipeline::{fit_offset_on_corpus, kernels_for, CorpusSpec, KernelChoice};
use thermofuse::{Error, Grid, Mask};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Shape = 4,
    Calibration = 5,
    Fit = 6,
    Config = 7,
    SingularHomography = 8,
    EmptyMask = 9,
    Format = 10,
    Io = 11,
    Json = 12,
    Panic = 13,
}

/// Temperature map or gray-level frame.
pub struct TfMap(Grid<f64>);

/// Validity mask.
pub struct TfMask(Mask);

/// Per-pixel camera coefficients.
pub struct TfCoefficients(CoefficientTensor);

/// Registered, normalized burst.
pub struct TfBurst(Burst);

/// Per-pixel fusion kernels.
pub struct TfKernels(KernelStack);

/// Offset polynomial.
pub struct TfOffsetModel(OffsetModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfFlightGeometry {
    pub gsd_m_per_px: f64,
    pub px_per_frame: f64,
    pub frames_per_object: f64,
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TfStatus {
    match e {
        Error::Domain(_) => TfStatus::Domain,
        Error::Shape { .. } => TfStatus::Shape,
        Error::Calibration(_) => TfStatus::Calibration,
        Error::Fit(_) => TfStatus::Fit,
        Error::Config(_) => TfStatus::Config,
        Error::SingularHomography(_) => TfStatus::SingularHomography,
        Error::EmptyMask => TfStatus::EmptyMask,
        Error::Format { .. } => TfStatus::Format,
        Error::Io { .. } => TfStatus::Io,
        Error::Json { .. } => TfStatus::Json,
    }
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            TfStatus::Ok
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(&format!("{name} is NULL"));
            TfStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_last_error(&msg);
            TfStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            TfStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn put<T>(out: *mut T, value: T, name: &'static str) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> FfiResult<()> {
    if len != src.len() {
        return Err(Failure::Invalid(format!("buffer holds {len} values, need {}", src.len())));
    }
    if len > 0 {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    }
    Ok(())
}

unsafe fn json_arg<T: serde::de::DeserializeOwned + Default>(p: *const c_char, name: &'static str) -> FfiResult<T> {
    if p.is_null() {
        return Ok(T::default());
    }
    serde_json::from_str(text(p, name)?).map_err(|e| Failure::Invalid(format!("{name}: {e}")))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no NUL bytes").into_raw()
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn tf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` is NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn tf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- maps ----

/// Copy `rows * cols` values into a new map.
///
/// # Safety
/// `data` points to `rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_map_new(data: *const f64, rows: usize, cols: usize, out: *mut *mut TfMap) -> TfStatus {
    guard(|| {
        let values = slice(data, rows * cols, "data")?.to_vec();
        put_handle(out, TfMap(Grid::from_vec(rows, cols, values)?))
    })
}

/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_map_filled(rows: usize, cols: usize, value: f64, out: *mut *mut TfMap) -> TfStatus {
    guard(|| put_handle(out, TfMap(Grid::filled(rows, cols, value))))
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_map_shape(map: *const TfMap, rows: *mut usize, cols: *mut usize) -> TfStatus {
    guard(|| {
        let m = get(map, "map")?;
        put(rows, m.0.rows(), "rows")?;
        put(cols, m.0.cols(), "cols")
    })
}

/// Copy the map into `out`, which holds exactly `len = rows * cols` values.
///
/// # Safety
/// `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_map_data(map: *const TfMap, out: *mut f64, len: usize) -> TfStatus {
    guard(|| copy_out(get(map, "map")?.0.as_slice(), out, len))
}

/// Read a raw map (`.f32`/`.f64` with JSON sidecar).
///
/// # Safety
/// `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tf_map_read_raw(path: *const c_char, out: *mut *mut TfMap) -> TfStatus {
    guard(|| {
        let m = read_raw_map(Path::new(text(path, "path")?))?;
        put_handle(out, TfMap(m))
    })
}

/// Write a raw little-endian `f32` map and its sidecar.
///
/// # Safety
/// Pointers are valid; `units` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tf_map_write_raw(map: *const TfMap, path: *const c_char, units: *const c_char) -> TfStatus {
    guard(|| {
        let m = get(map, "map")?;
        write_raw_map(Path::new(text(path, "path")?), &m.0, text(units, "units")?)?;
        Ok(())
    })
}

/// # Safety
/// `map` is NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tf_map_free(map: *mut TfMap) {
    free(map)
}

// ---- masks ----

/// Nonzero bytes are valid pixels.
///
/// # Safety
/// `data` points to `rows * cols` bytes.
#[no_mangle]
pub unsafe extern "C" fn tf_mask_new(data: *const u8, rows: usize, cols: usize, out: *mut *mut TfMask) -> TfStatus {
    guard(|| {
        let values = slice(data, rows * cols, "data")?.iter().map(|&v| v != 0).collect();
        put_handle(out, TfMask(Grid::from_vec(rows, cols, values)?))
    })
}

/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_mask_all(rows: usize, cols: usize, out: *mut *mut TfMask) -> TfStatus {
    guard(|| put_handle(out, TfMask(Mask::all_true(rows, cols))))
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_mask_count(mask: *const TfMask, out: *mut usize) -> TfStatus {
    guard(|| put(out, get(mask, "mask")?.0.count_true(), "out"))
}

/// Copy the mask as 0/1 bytes into `out` of exactly `len` bytes.
///
/// # Safety
/// `out` points to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tf_mask_data(mask: *const TfMask, out: *mut u8, len: usize) -> TfStatus {
    guard(|| {
        let bytes: Vec<u8> = get(mask, "mask")?.0.iter().map(|&b| b as u8).collect();
        copy_out(&bytes, out, len)
    })
}

/// # Safety
/// `mask` is NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tf_mask_free(mask: *mut TfMask) {
    free(mask)
}

// ---- coefficients ----

/// The built-in reference camera on a `rows × cols` frame.
///
/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_coefficients_reference(rows: usize, cols: usize, out: *mut *mut TfCoefficients) -> TfStatus {
    guard(|| put_handle(out, TfCoefficients(RadialModel::reference_camera().reconstruct(rows, cols)?)))
}

/// Every pixel gets the same eight coefficients.
///
/// # Safety
/// `coeffs` points to 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_coefficients_uniform(
    rows: usize,
    cols: usize,
    coeffs: *const f64,
    out: *mut *mut TfCoefficients,
) -> TfStatus {
    guard(|| {
        let c: [f64; N_COEFFS] = slice(coeffs, N_COEFFS, "coeffs")?.try_into().expect("length checked");
        put_handle(out, TfCoefficients(CoefficientTensor::uniform(rows, cols, c)?))
    })
}

/// # Safety
/// `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tf_coefficients_read(path: *const c_char, out: *mut *mut TfCoefficients) -> TfStatus {
    guard(|| put_handle(out, TfCoefficients(read_coefficients(Path::new(text(path, "path")?))?)))
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_coefficients_write(c: *const TfCoefficients, path: *const c_char) -> TfStatus {
    guard(|| {
        write_coefficients(Path::new(text(path, "path")?), &get(c, "coefficients")?.0)?;
        Ok(())
    })
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_coefficients_shape(c: *const TfCoefficients, rows: *mut usize, cols: *mut usize) -> TfStatus {
    guard(|| {
        let (r, k) = get(c, "coefficients")?.0.shape();
        put(rows, r, "rows")?;
        put(cols, k, "cols")
    })
}

/// The eight coefficients of one pixel.
///
/// # Safety
/// `out` points to 8 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_coefficients_pixel(c: *const TfCoefficients, row: usize, col: usize, out: *mut f64) -> TfStatus {
    guard(|| {
        let c = &get(c, "coefficients")?.0;
        let (rows, cols) = c.shape();
        if row >= rows || col >= cols {
            return Err(Failure::Invalid(format!("pixel ({row}, {col}) outside {rows}x{cols}")));
        }
        copy_out(&c.pixel(row, col), out, N_COEFFS)
    })
}

/// Fit a radial model of `degree` and return its reconstruction on the
/// same frame.
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_coefficients_radial(c: *const TfCoefficients, degree: usize, out: *mut *mut TfCoefficients) -> TfStatus {
    guard(|| {
        let c = &get(c, "coefficients")?.0;
        let (rows, cols) = c.shape();
        let rec = fit_radial(c, degree)?.reconstruct(rows, cols)?;
        put_handle(out, TfCoefficients(rec))
    })
}

/// Per-pixel fit from a measurement manifest.
///
/// # Safety
/// `manifest` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tf_calibrate(manifest: *const c_char, out: *mut *mut TfCoefficients) -> TfStatus {
    guard(|| {
        let ms = load_measurements(Path::new(text(manifest, "manifest")?))?;
        put_handle(out, TfCoefficients(fit_per_pixel(&ms)?.coefficients))
    })
}

/// Noiseless gray-level frame of temperature map `x` at ambient `t_amb`.
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_synthesize_frame(x: *const TfMap, t_amb: f64, c: *const TfCoefficients, out: *mut *mut TfMap) -> TfStatus {
    guard(|| {
        let f = synthesize_frame(&get(x, "x")?.0, t_amb, &get(c, "coefficients")?.0)?;
        put_handle(out, TfMap(f))
    })
}

/// # Safety
/// `c` is NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tf_coefficients_free(c: *mut TfCoefficients) {
    free(c)
}

// ---- bursts ----

/// Simulate a burst of `x`. `spec_json` is a burst spec in JSON, or NULL
/// for the defaults.
///
/// # Safety
/// Pointers are valid; `spec_json` is NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_make(
    x: *const TfMap,
    t_amb: f64,
    c: *const TfCoefficients,
    spec_json: *const c_char,
    out: *mut *mut TfBurst,
) -> TfStatus {
    guard(|| {
        let spec: BurstSpec = json_arg(spec_json, "spec_json")?;
        let b = make_burst(&get(x, "x")?.0, t_amb, &get(c, "coefficients")?.0, &spec)?;
        put_handle(out, TfBurst(b))
    })
}

/// Identity-registered burst from `n` gray-level frames. Frames are scaled
/// by the default gray range [0, 16383]; temperatures use [0, 70] °C.
///
/// # Safety
/// `frames` points to `n` valid map handles.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_stationary(frames: *const *const TfMap, n: usize, t_amb: f64, out: *mut *mut TfBurst) -> TfStatus {
    guard(|| {
        let handles = slice(frames, n, "frames")?;
        let norm = Normalization::from_spec(&BurstSpec::default());
        let [lo, hi] = norm.gray;
        let frames = handles
            .iter()
            .map(|&h| Ok(normalize_frame(&get(h, "frame")?.0, lo, hi)?))
            .collect::<FfiResult<Vec<_>>>()?;
        put_handle(out, TfBurst(Burst::stationary(frames, t_amb, norm)?))
    })
}

/// # Safety
/// `dir` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_load(dir: *const c_char, out: *mut *mut TfBurst) -> TfStatus {
    guard(|| put_handle(out, TfBurst(load_burst(Path::new(text(dir, "dir")?))?.0)))
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_save(b: *const TfBurst, dir: *const c_char) -> TfStatus {
    guard(|| {
        save_burst(Path::new(text(dir, "dir")?), &get(b, "burst")?.0, None)?;
        Ok(())
    })
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_len(b: *const TfBurst, out: *mut usize) -> TfStatus {
    guard(|| put(out, get(b, "burst")?.0.len(), "out"))
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_shape(b: *const TfBurst, rows: *mut usize, cols: *mut usize) -> TfStatus {
    guard(|| {
        let (r, c) = get(b, "burst")?.0.shape();
        put(rows, r, "rows")?;
        put(cols, c, "cols")
    })
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_pivot(b: *const TfBurst, out: *mut usize) -> TfStatus {
    guard(|| put(out, get(b, "burst")?.0.pivot, "out"))
}

/// Overlap of every frame with the pivot; `len` must equal the frame count.
///
/// # Safety
/// `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_overlaps(b: *const TfBurst, out: *mut f64, len: usize) -> TfStatus {
    guard(|| copy_out(&get(b, "burst")?.0.overlaps, out, len))
}

/// Pixels valid in at least one frame.
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_union_mask(b: *const TfBurst, out: *mut *mut TfMask) -> TfStatus {
    guard(|| put_handle(out, TfMask(get(b, "burst")?.0.union_mask())))
}

/// # Safety
/// `b` is NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tf_burst_free(b: *mut TfBurst) {
    free(b)
}

// ---- kernels ----

/// Kernels for `b`: `"identity"`, `"average"`, `"shifted"` or
/// `"file:PATH"`, of odd size `k`.
///
/// # Safety
/// Pointers are valid; `kind` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tf_kernels_for(b: *const TfBurst, kind: *const c_char, k: usize, out: *mut *mut TfKernels) -> TfStatus {
    guard(|| {
        let choice: KernelChoice = text(kind, "kind")?.parse()?;
        put_handle(out, TfKernels(kernels_for(&get(b, "burst")?.0, &choice, k)?))
    })
}

/// # Safety
/// `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tf_kernels_read(path: *const c_char, out: *mut *mut TfKernels) -> TfStatus {
    guard(|| put_handle(out, TfKernels(KernelStack::read(Path::new(text(path, "path")?))?)))
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_kernels_write(ks: *const TfKernels, path: *const c_char) -> TfStatus {
    guard(|| {
        get(ks, "kernels")?.0.write(Path::new(text(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `ks` is NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tf_kernels_free(ks: *mut TfKernels) {
    free(ks)
}

// ---- offset model ----

/// Parse `{"nu": .., "delta": [[..], ..]}`.
///
/// # Safety
/// `json` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tf_offset_from_json(json: *const c_char, out: *mut *mut TfOffsetModel) -> TfStatus {
    guard(|| {
        let om: OffsetModel = serde_json::from_str(text(json, "json")?).map_err(|e| Failure::Invalid(format!("json: {e}")))?;
        om.validate()?;
        put_handle(out, TfOffsetModel(om))
    })
}

/// Serialize to JSON; free the string with [`tf_string_free`].
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_offset_to_json(om: *const TfOffsetModel, out: *mut *mut c_char) -> TfStatus {
    guard(|| {
        let s = serde_json::to_string(&get(om, "model")?.0).expect("offset model serializes");
        put(out, to_c_string(s), "out")
    })
}

/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_offset_zeros(nu: usize, out: *mut *mut TfOffsetModel) -> TfStatus {
    guard(|| put_handle(out, TfOffsetModel(OffsetModel::zeros(nu))))
}

/// Fit on a simulated corpus. `corpus_json` is a corpus spec in JSON or
/// NULL for the defaults; `residual_rms` (normalized units) may be NULL.
///
/// # Safety
/// Pointers are valid or NULL where allowed.
#[no_mangle]
pub unsafe extern "C" fn tf_offset_fit(
    c: *const TfCoefficients,
    corpus_json: *const c_char,
    nu: usize,
    out: *mut *mut TfOffsetModel,
    residual_rms: *mut f64,
) -> TfStatus {
    guard(|| {
        let corpus: CorpusSpec = json_arg(corpus_json, "corpus_json")?;
        let c = &get(c, "coefficients")?.0;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let fit = fit_offset_on_corpus(c, &corpus, nu)?;
        if !residual_rms.is_null() {
            residual_rms.write(fit.residual_rms);
        }
        put_handle(out, TfOffsetModel(fit.model))
    })
}

/// Offset for normalized frame means and ambient temperature (°C).
///
/// # Safety
/// `means` points to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_offset_eval(om: *const TfOffsetModel, means: *const f64, n: usize, t_amb: f64, out: *mut f64) -> TfStatus {
    guard(|| {
        let v = offset_eval(slice(means, n, "means")?, t_amb, &get(om, "model")?.0)?;
        put(out, v, "out")
    })
}

/// # Safety
/// `om` is NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tf_offset_free(om: *mut TfOffsetModel) {
    free(om)
}

// ---- estimation ----

/// Kernel fusion plus offset, in °C.
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_fuse(b: *const TfBurst, ks: *const TfKernels, om: *const TfOffsetModel, out: *mut *mut TfMap) -> TfStatus {
    guard(|| {
        let x = fuse(&get(b, "burst")?.0, &get(ks, "kernels")?.0, &get(om, "model")?.0)?;
        put_handle(out, TfMap(x))
    })
}

/// Average of per-frame affine inverses for a camera with scalar gain and
/// offset (`I = gain·X + offset`). Pixels seen by no frame are NaN and
/// false in `mask_out`, which may be NULL.
///
/// # Safety
/// Pointers are valid or NULL where allowed.
#[no_mangle]
pub unsafe extern "C" fn tf_naive_estimate(
    b: *const TfBurst,
    gain: f64,
    offset: f64,
    out: *mut *mut TfMap,
    mask_out: *mut *mut TfMask,
) -> TfStatus {
    guard(|| {
        let b = &get(b, "burst")?.0;
        let (rows, cols) = b.shape();
        let gd = GainOffsetMaps::from_scalar(rows, cols, gain, offset)?;
        let (x, mask) = naive_estimate(b, &gd)?;
        put_handle(out, TfMap(x))?;
        if !mask_out.is_null() {
            put_handle(mask_out, TfMask(mask))?;
        }
        Ok(())
    })
}

// ---- metrics ----

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_mae(a: *const TfMap, b: *const TfMap, mask: *const TfMask, out: *mut f64) -> TfStatus {
    guard(|| put(out, mae(&get(a, "a")?.0, &get(b, "b")?.0, &get(mask, "mask")?.0)?, "out"))
}

/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_ssim(a: *const TfMap, b: *const TfMap, mask: *const TfMask, data_range: f64, out: *mut f64) -> TfStatus {
    guard(|| put(out, ssim(&get(a, "a")?.0, &get(b, "b")?.0, &get(mask, "mask")?.0, data_range)?, "out"))
}

/// Training loss on normalized maps.
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_loss(
    x_hat: *const TfMap,
    x: *const TfMap,
    mask: *const TfMask,
    lambda1: f64,
    lambda2: f64,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        let w = LossWeights { lambda1, lambda2 };
        put(out, loss(&get(x_hat, "x_hat")?.0, &get(x, "x")?.0, &get(mask, "mask")?.0, &w)?, "out")
    })
}

/// Error report (MAE, maximum error, cumulative curve) as JSON; free with
/// [`tf_string_free`].
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn tf_error_report_json(
    estimate: *const TfMap,
    truth: *const TfMap,
    mask: *const TfMask,
    out: *mut *mut c_char,
) -> TfStatus {
    guard(|| {
        let r = error_report(&get(estimate, "estimate")?.0, &get(truth, "truth")?.0, &get(mask, "mask")?.0, &default_thresholds())?;
        put(out, to_c_string(serde_json::to_string(&r).expect("report serializes")), "out")
    })
}

/// Ground sampling distance, image motion per frame and frames per ground
/// point for a nadir flight.
///
/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_flight_geometry(
    height_m: f64,
    focal_mm: f64,
    sensor_mm: f64,
    sensor_px: f64,
    speed_mps: f64,
    fps: f64,
    out: *mut TfFlightGeometry,
) -> TfStatus {
    guard(|| {
        let g = thermofuse::burst::flight_geometry(height_m, focal_mm, sensor_mm, sensor_px, speed_mps, fps)?;
        put(
            out,
            TfFlightGeometry {
                gsd_m_per_px: g.gsd_m_per_px,
                px_per_frame: g.px_per_frame,
                frames_per_object: g.frames_per_object,
            },
            "out",
        )
    })
}
