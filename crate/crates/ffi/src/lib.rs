//! C ABI over the biphoton toolkit.
//!
//! Every entry point returns a [`BpStatus`] and writes results through out
//! pointers. Objects live behind opaque handles created by `*_new` and
//! released by the matching `*_free`. After a non-OK status the message is
//! available from [`bp_last_error_message`] on the same thread. Panics never
//! cross the boundary; they surface as [`BpStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use biphoton::fixtures::{reference_density_matrix, singlet, singlet_density};
use biphoton::qalgebra::{c, fidelity_pure, CMat, PolDensityMatrix};
use biphoton::temporal::{beating_g2, envelope_eval, BeatingParams, BiphotonEnvelope, TwoSidedEnvelope};
use biphoton::tomography::{canonical_settings, chsh_optimize, mle_reconstruct, TomoRecord};
use biphoton::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotPhysical = 3,
    NumericalFailure = 4,
    /// The output holds the best iterate found before the budget ran out.
    NotConverged = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpBeatMode {
    /// `½ G₀(τ) (1 - cos δτ)`
    Antisymmetric = 0,
    /// `⅛ G₀(τ) (1 + cos(δτ - θ))`
    PhaseShifted = 1,
}

/// Two-qubit polarization density matrix in the (HH, HV, VH, VV) basis.
pub struct BpDensityMatrix(PolDensityMatrix);

/// One-sided biphoton envelope.
pub struct BpEnvelope(BiphotonEnvelope);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BpChshResult {
    pub s_max: f64,
    pub s_direct: f64,
    pub s_at_angles: f64,
    /// (polar, azimuth) on the Poincaré sphere for a, a', b, b'.
    pub angles: [f64; 8],
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BpStatus {
    match e {
        Error::InvalidParameter(_) | Error::Dimension { .. } | Error::Parse(_) => BpStatus::InvalidArgument,
        Error::NotHermitian(_) | Error::NotPhysical(_) | Error::NotNormalized(_) => BpStatus::NotPhysical,
        Error::NotConverged { .. } => BpStatus::NotConverged,
        _ => BpStatus::NumericalFailure,
    }
}

fn fail(status: BpStatus, msg: impl Into<String>) -> BpStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), BpStatus>) -> BpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BpStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(BpStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lib_err(e: Error) -> BpStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), BpStatus> {
    if p.is_null() {
        Err(fail(BpStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns the full message length
/// in bytes excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: caller guarantees `len` writable bytes at `buf`.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

fn emit_density(rho: PolDensityMatrix, out: *mut *mut BpDensityMatrix) {
    // SAFETY: checked non-null by every caller.
    unsafe { *out = Box::into_raw(Box::new(BpDensityMatrix(rho))) };
}

/// Builds a density matrix from row-major real and imaginary parts (16
/// entries each). Fails with `BP_STATUS_NOT_PHYSICAL` unless the matrix is
/// Hermitian, unit-trace and positive semidefinite.
///
/// # Safety
/// `re` and `im` must point to 16 readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_density_new(re: *const f64, im: *const f64, out: *mut *mut BpDensityMatrix) -> BpStatus {
    guard(|| {
        non_null(re, "re")?;
        non_null(im, "im")?;
        non_null(out, "out")?;
        // SAFETY: caller guarantees 16 readable doubles each.
        let (re, im) = unsafe { (std::slice::from_raw_parts(re, 16), std::slice::from_raw_parts(im, 16)) };
        let m = CMat::from_fn(4, 4, |i, j| c(re[4 * i + j], im[4 * i + j]));
        let rho = PolDensityMatrix::new(m).map_err(lib_err)?;
        emit_density(rho, out);
        Ok(())
    })
}

/// The polarization singlet `(|HV> - |VH>)/sqrt(2)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_density_singlet(out: *mut *mut BpDensityMatrix) -> BpStatus {
    guard(|| {
        non_null(out, "out")?;
        emit_density(singlet_density(), out);
        Ok(())
    })
}

/// Reference partially mixed state near the singlet (singlet fidelity 0.883).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_density_reference(out: *mut *mut BpDensityMatrix) -> BpStatus {
    guard(|| {
        non_null(out, "out")?;
        emit_density(reference_density_matrix(), out);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `rho` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_density_free(rho: *mut BpDensityMatrix) {
    if !rho.is_null() {
        // SAFETY: handle was created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(rho) });
    }
}

/// Writes the row-major real and imaginary parts (16 entries each).
///
/// # Safety
/// `rho` must be a live handle; `re` and `im` must point to 16 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_density_get(rho: *const BpDensityMatrix, re: *mut f64, im: *mut f64) -> BpStatus {
    guard(|| {
        non_null(rho, "rho")?;
        non_null(re, "re")?;
        non_null(im, "im")?;
        // SAFETY: live handle; 16 writable doubles each.
        let rho = unsafe { &(*rho).0 };
        for k in 0..16 {
            let z = rho.get(k / 4, k % 4);
            unsafe {
                *re.add(k) = z.re;
                *im.add(k) = z.im;
            }
        }
        Ok(())
    })
}

/// Root fidelity `sqrt(<ψ⁻|ρ|ψ⁻>)` against the polarization singlet.
///
/// # Safety
/// `rho` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_fidelity_singlet(rho: *const BpDensityMatrix, out: *mut f64) -> BpStatus {
    guard(|| {
        non_null(rho, "rho")?;
        non_null(out, "out")?;
        // SAFETY: live handle.
        let f = fidelity_pure(unsafe { &(*rho).0 }, &singlet()).map_err(lib_err)?;
        unsafe { *out = f };
        Ok(())
    })
}

/// Maximal CHSH value: analytic optimum plus a direct search over analyzers.
///
/// # Safety
/// `rho` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_chsh_optimize(rho: *const BpDensityMatrix, out: *mut BpChshResult) -> BpStatus {
    guard(|| {
        non_null(rho, "rho")?;
        non_null(out, "out")?;
        // SAFETY: live handle.
        let r = chsh_optimize(unsafe { &(*rho).0 });
        let mut angles = [0.0; 8];
        for (k, a) in r.angles.iter().enumerate() {
            angles[2 * k] = a.polar;
            angles[2 * k + 1] = a.azimuth;
        }
        unsafe {
            *out = BpChshResult {
                s_max: r.s_max,
                s_direct: r.s_direct,
                s_at_angles: r.s_at_angles,
                angles,
            }
        };
        Ok(())
    })
}

/// Maximum-likelihood reconstruction from 16 counts taken at the analyzer
/// pairs {H,V,D,R}x{H,V,D,R} in row-major order (HH, HV, HD, HR, VH, ...),
/// all with equal exposure. On `BP_STATUS_NOT_CONVERGED` `out` still
/// receives the best iterate.
///
/// # Safety
/// `counts` must point to 16 readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_mle_reconstruct(counts: *const f64, out: *mut *mut BpDensityMatrix) -> BpStatus {
    guard(|| {
        non_null(counts, "counts")?;
        non_null(out, "out")?;
        // SAFETY: 16 readable doubles.
        let counts = unsafe { std::slice::from_raw_parts(counts, 16) };
        let records = canonical_settings()
            .into_iter()
            .zip(counts)
            .map(|(s, &n)| TomoRecord::new(s, n, 1.0))
            .collect::<Result<Vec<_>, _>>()
            .map_err(lib_err)?;
        match mle_reconstruct(&records) {
            Ok(fit) => {
                emit_density(fit.rho, out);
                Ok(())
            }
            Err(Error::NotConverged { evaluations, best }) => {
                emit_density(best.rho, out);
                Err(fail(
                    BpStatus::NotConverged,
                    format!("optimizer did not converge after {evaluations} evaluations"),
                ))
            }
            Err(e) => Err(lib_err(e)),
        }
    })
}

/// Exponential envelope (`osc_rad_per_ns == 0`) or damped oscillation, unit area.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_envelope_new(
    decay_ns: f64,
    rise_ns: f64,
    osc_rad_per_ns: f64,
    out: *mut *mut BpEnvelope,
) -> BpStatus {
    guard(|| {
        non_null(out, "out")?;
        let env = if osc_rad_per_ns == 0.0 {
            BiphotonEnvelope::exponential(decay_ns, rise_ns)
        } else {
            BiphotonEnvelope::damped_oscillation(decay_ns, rise_ns, osc_rad_per_ns)
        }
        .map_err(lib_err)?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(BpEnvelope(env))) };
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `env` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_envelope_free(env: *mut BpEnvelope) {
    if !env.is_null() {
        // SAFETY: handle was created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(env) });
    }
}

/// `G₀(τ)` in 1/ns; zero for τ <= 0.
///
/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_envelope_eval(env: *const BpEnvelope, tau_ns: f64, out: *mut f64) -> BpStatus {
    guard(|| {
        non_null(env, "env")?;
        non_null(out, "out")?;
        if !tau_ns.is_finite() {
            return Err(fail(BpStatus::InvalidArgument, "tau must be finite"));
        }
        // SAFETY: live handle.
        let v = envelope_eval(unsafe { &(*env).0 }, tau_ns).map_err(lib_err)?;
        unsafe { *out = v };
        Ok(())
    })
}

/// Beating correlation over both time orderings (the envelope mirrored onto τ < 0).
/// `theta` is ignored in antisymmetric mode.
///
/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_beating_g2(
    env: *const BpEnvelope,
    mode: BpBeatMode,
    delta_rad_per_ns: f64,
    theta: f64,
    tau_ns: f64,
    out: *mut f64,
) -> BpStatus {
    guard(|| {
        non_null(env, "env")?;
        non_null(out, "out")?;
        let params = match mode {
            BpBeatMode::Antisymmetric => BeatingParams::antisymmetric(delta_rad_per_ns),
            BpBeatMode::PhaseShifted => BeatingParams::phase_shifted(delta_rad_per_ns, theta),
        };
        params.validate().map_err(lib_err)?;
        if !tau_ns.is_finite() {
            return Err(fail(BpStatus::InvalidArgument, "tau must be finite"));
        }
        // SAFETY: live handle.
        let two = TwoSidedEnvelope::symmetric(unsafe { (*env).0 });
        unsafe { *out = beating_g2(&two, &params, tau_ns) };
        Ok(())
    })
}

/// One Poisson draw from substream `(seed, tag, index)`. Identical inputs
/// give identical draws on every platform.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_sample_poisson(mean: f64, seed: u64, tag: u32, index: u32, out: *mut u64) -> BpStatus {
    guard(|| {
        non_null(out, "out")?;
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(fail(
                BpStatus::InvalidArgument,
                format!("mean must be finite and >= 0, got {mean}"),
            ));
        }
        // SAFETY: checked non-null.
        unsafe { *out = biphoton::rng::poisson(seed, tag, index, mean) };
        Ok(())
    })
}

/// Reads the last error as an owned string; for Rust-side tests and wrappers.
pub fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    // SAFETY: buffer holds `buf.len()` bytes.
    unsafe { bp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    // SAFETY: always NUL-terminated.
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_turns_panics_into_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, BpStatus::Panic);
        assert!(last_error().contains("boom"));
    }

    #[test]
    fn error_message_truncates_safely() {
        set_error("abcdef".into());
        let mut buf = [1 as c_char; 4];
        let n = unsafe { bp_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, 6);
        assert_eq!(buf[3], 0);
        assert_eq!(unsafe { bp_last_error_message(ptr::null_mut(), 0) }, 6);
    }

    #[test]
    fn version_is_crate_version() {
        let v = unsafe { CStr::from_ptr(bp_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}
