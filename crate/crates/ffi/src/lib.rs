//! C ABI over `hamsuspend`.
//!
//! A model is an opaque `HsModel` built from a TOML config. Every call
//! returns an `HsStatus`; on failure the message is kept per thread and can
//! be copied out with `hs_last_error`. Output buffers are caller-owned.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hamsuspend::flow::time_one_section_map;
use hamsuspend::{Error, ExperimentConfig, FlowOptions, SuspendedHamiltonian};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Config = 4,
    NoConvergence = 5,
    Contraction = 6,
    Quadrature = 7,
    Stiffness = 8,
    DomainExit = 9,
    Numerical = 10,
    Panic = 11,
}

/// Opaque handle: a suspended Hamiltonian with its integrator settings.
pub struct HsModel {
    hamiltonian: SuspendedHamiltonian,
    flow: FlowOptions,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> HsStatus {
    match err.root() {
        Error::InvalidArgument(_) | Error::UnsupportedOrder { .. } | Error::WrongProfile { .. } => {
            HsStatus::InvalidArgument
        }
        Error::Dimension { .. } => HsStatus::Dimension,
        Error::Config(_) | Error::Io(_) => HsStatus::Config,
        Error::NoConvergence { .. } => HsStatus::NoConvergence,
        Error::ContractionViolation(_) | Error::InvalidMap(_) => HsStatus::Contraction,
        Error::Quadrature { .. } => HsStatus::Quadrature,
        Error::Stiffness { .. } => HsStatus::Stiffness,
        Error::DomainExit { .. } => HsStatus::DomainExit,
        _ => HsStatus::Numerical,
    }
}

struct Fail(HsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HsStatus::NullPointer, format!("{what} is null"))
}

// Runs `f`, records any failure and turns panics into a status.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            HsStatus::Panic
        }
    }
}

unsafe fn model<'a>(m: *const HsModel) -> Result<&'a HsModel, Fail> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn input<'a>(p: *const f64, len: usize, expected: usize) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null("input"));
    }
    if len != expected {
        return Err(Error::Dimension { expected, got: len }.into());
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_out(out: *mut f64, values: &[f64]) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

fn build(cfg: ExperimentConfig) -> Result<*mut HsModel, Fail> {
    let hamiltonian = cfg.hamiltonian()?;
    let m = HsModel {
        hamiltonian,
        flow: cfg.flow_options(),
    };
    Ok(Box::into_raw(Box::new(m)))
}

/// Build a model from the default config.
///
/// # Safety
/// `out` must be a valid pointer; it receives a handle to free with
/// `hs_model_free`.
#[no_mangle]
pub unsafe extern "C" fn hs_model_new_default(out: *mut *mut HsModel) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = build(ExperimentConfig::default())?;
        Ok(())
    })
}

/// Build a model from TOML text; missing keys take their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_model_from_toml(toml: *const c_char, out: *mut *mut HsModel) -> HsStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|_| Fail(HsStatus::Config, "config is not UTF-8".to_string()))?;
        *out = build(ExperimentConfig::from_toml_str(text)?)?;
        Ok(())
    })
}

/// # Safety
/// `m` must come from a constructor here and not be used afterwards. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn hs_model_free(m: *mut HsModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `n`: section points have `2n` coordinates, phase points `2n + 2`.
///
/// # Safety
/// `m` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_model_half_dim(m: *const HsModel, out: *mut usize) -> HsStatus {
    guard(|| {
        let m = model(m)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.hamiltonian.isotopy().half_dim();
        Ok(())
    })
}

unsafe fn spatial_op<F>(m: *const HsModel, z: *const f64, len: usize, out: *mut f64, f: F) -> HsStatus
where
    F: FnOnce(&HsModel, &[f64]) -> hamsuspend::Result<Vec<f64>>,
{
    guard(|| {
        let m = model(m)?;
        let z = input(z, len, 2 * m.hamiltonian.isotopy().half_dim())?;
        let v = f(m, z)?;
        write_out(out, &v)
    })
}

unsafe fn phase_op<F>(m: *const HsModel, z: *const f64, len: usize, out: *mut f64, f: F) -> HsStatus
where
    F: FnOnce(&SuspendedHamiltonian, &[f64]) -> hamsuspend::Result<Vec<f64>>,
{
    guard(|| {
        let m = model(m)?;
        let z = input(z, len, 2 * m.hamiltonian.degrees_of_freedom())?;
        let v = f(&m.hamiltonian, z)?;
        write_out(out, &v)
    })
}

/// `g_α(z)`; `z` and `out` hold `2n` values.
///
/// # Safety
/// `z` must point to `len` values and `out` to room for `len`.
#[no_mangle]
pub unsafe extern "C" fn hs_isotopy_eval(
    m: *const HsModel,
    alpha: f64,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HsStatus {
    spatial_op(m, z, len, out, |m, z| m.hamiltonian.isotopy().eval(alpha, z))
}

/// `g_α⁻¹(z)`.
///
/// # Safety
/// As for `hs_isotopy_eval`.
#[no_mangle]
pub unsafe extern "C" fn hs_isotopy_inverse(
    m: *const HsModel,
    alpha: f64,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HsStatus {
    spatial_op(m, z, len, out, |m, z| m.hamiltonian.isotopy().inverse(alpha, z))
}

/// The isotopy's vector field `X_α(z)`.
///
/// # Safety
/// As for `hs_isotopy_eval`.
#[no_mangle]
pub unsafe extern "C" fn hs_isotopy_field(
    m: *const HsModel,
    alpha: f64,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HsStatus {
    spatial_op(m, z, len, out, |m, z| m.hamiltonian.isotopy().vector_field(alpha, z))
}

/// `K_α(z)` with the quadrature convergence check; writes one value.
///
/// # Safety
/// `z` must point to `len` values and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn hs_k_value(
    m: *const HsModel,
    alpha: f64,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HsStatus {
    spatial_op(m, z, len, out, |m, z| Ok(vec![m.hamiltonian.hamiltonian_k(alpha, z)?]))
}

/// The suspended Hamiltonian at a phase point; writes one value.
///
/// # Safety
/// `z` must point to `len = 2n + 2` values and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn hs_hamiltonian_value(
    m: *const HsModel,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HsStatus {
    phase_op(m, z, len, out, |s, z| Ok(vec![s.value(z)?]))
}

/// Gradient of the suspended Hamiltonian.
///
/// # Safety
/// `z` must point to `len = 2n + 2` values and `out` to room for `len`.
#[no_mangle]
pub unsafe extern "C" fn hs_hamiltonian_gradient(
    m: *const HsModel,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HsStatus {
    phase_op(m, z, len, out, |s, z| s.gradient(z))
}

/// Hamiltonian vector field `J∇H`.
///
/// # Safety
/// As for `hs_hamiltonian_gradient`.
#[no_mangle]
pub unsafe extern "C" fn hs_hamiltonian_field(
    m: *const HsModel,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HsStatus {
    phase_op(m, z, len, out, |s, z| s.vector_field(z))
}

/// Time-one section map of a point on the section, `2n` values in and
/// out. When `residual` is non-null it receives the distance to `g(z)`.
///
/// # Safety
/// `z` must point to `len` values, `out` to room for `len`; `residual` may
/// be null.
#[no_mangle]
pub unsafe extern "C" fn hs_section_map(
    m: *const HsModel,
    z: *const f64,
    len: usize,
    out: *mut f64,
    residual: *mut f64,
) -> HsStatus {
    guard(|| {
        let m = model(m)?;
        let z = input(z, len, 2 * m.hamiltonian.isotopy().half_dim())?;
        let rec = time_one_section_map(&m.hamiltonian, z, &m.flow)?;
        write_out(out, &rec.output)?;
        if !residual.is_null() {
            *residual = rec.residual;
        }
        Ok(())
    })
}

/// Copy the calling thread's last error message into `buf`, truncated and
/// NUL-terminated. Returns the full message length plus one, so a caller
/// can size a buffer by passing `cap = 0`.
///
/// # Safety
/// `buf` must have room for `cap` bytes; it may be null when `cap` is 0.
#[no_mangle]
pub unsafe extern "C" fn hs_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn hs_status_name(status: HsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        HsStatus::Ok => c"ok",
        HsStatus::NullPointer => c"null pointer",
        HsStatus::InvalidArgument => c"invalid argument",
        HsStatus::Dimension => c"dimension mismatch",
        HsStatus::Config => c"config error",
        HsStatus::NoConvergence => c"no convergence",
        HsStatus::Contraction => c"contraction violated",
        HsStatus::Quadrature => c"quadrature error",
        HsStatus::Stiffness => c"step size underflow",
        HsStatus::DomainExit => c"domain exit",
        HsStatus::Numerical => c"numerical error",
        HsStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}
