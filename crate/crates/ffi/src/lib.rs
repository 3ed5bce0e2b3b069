//! C ABI over `amis-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`AmisStatus`]; on failure a description is available from
//! [`amis_last_error_message`] on the same thread until the next failing
//! call. Panics never unwind into C: they are reported as
//! `AMIS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use amis_core::report::reports_to_csv;
use amis_core::{
    ess, importance_weights, is_estimate, is_stderr, run_experiment, sample, AmisError,
    ExperimentReport, GaussianComponent, MixtureProposal, ParameterPoint, PartialConfig, RunRngs,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// Importance weights underflowed or were all zero.
    Numeric = 4,
    Config = 5,
    RunFailed = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Mixture proposal handle.
pub struct AmisProposal(MixtureProposal);

/// Experiment configuration handle. Unset fields take the defaults of the
/// configured algorithm when the experiment runs.
pub struct AmisConfig(PartialConfig);

/// Experiment report handle.
pub struct AmisReport(ExperimentReport);

/// Importance-sampling estimate of one counterfactual Gaussian.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AmisEstimate {
    pub estimate: f64,
    pub ess: f64,
    pub std_error: f64,
}

/// Plain-data copy of a report. `fci` is NaN when `has_fci` is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AmisReportSummary {
    pub gamma: f64,
    pub ess_threshold: f64,
    pub n: usize,
    pub t: usize,
    pub r: usize,
    pub seed: u64,
    pub mean_regret: f64,
    pub mae: f64,
    pub mse: f64,
    pub var: f64,
    pub has_fci: u8,
    pub fci: f64,
    pub prc: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: AmisStatus,
    message: String,
}

impl Failure {
    fn new(status: AmisStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

fn status_of(e: &AmisError) -> AmisStatus {
    match e {
        AmisError::DimensionMismatch { .. } => AmisStatus::DimensionMismatch,
        AmisError::ProposalUnderflow { .. } | AmisError::DegenerateWeights => AmisStatus::Numeric,
        AmisError::Config { .. } => AmisStatus::Config,
        AmisError::Run { .. } => AmisStatus::RunFailed,
        AmisError::Candidate { source, .. } => status_of(source),
        AmisError::MalformedInput(_)
        | AmisError::InsufficientData { .. }
        | AmisError::NoCandidates
        | AmisError::UnsupportedDimension(_) => AmisStatus::InvalidArgument,
    }
}

impl From<AmisError> for Failure {
    fn from(e: AmisError) -> Self {
        Failure::new(status_of(&e), e.to_string())
    }
}

fn set_last_error(message: &str) {
    // interior NULs would truncate the C string; drop them
    let clean: String = message.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(clean).ok());
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> AmisStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AmisStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            AmisStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(AmisStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn doubles<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(AmisStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass pointers the C side guarantees are writable.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles were produced by this library.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

fn point(coords: &[f64]) -> Result<ParameterPoint, Failure> {
    Ok(ParameterPoint::new(coords.to_vec())?)
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn amis_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn amis_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a `k`-component diagonal Gaussian mixture in `dim` dimensions.
/// `means` and `sigmas` are row-major `k x dim`; `weights` has `k` entries
/// summing to 1.
///
/// # Safety
/// Array arguments must be valid for the stated lengths and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amis_proposal_new(
    means: *const f64,
    sigmas: *const f64,
    weights: *const f64,
    k: usize,
    dim: usize,
    out: *mut *mut AmisProposal,
) -> AmisStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if k == 0 || dim == 0 {
            return Err(Failure::new(
                AmisStatus::InvalidArgument,
                "k and dim must be positive",
            ));
        }
        let len = k
            .checked_mul(dim)
            .ok_or_else(|| Failure::new(AmisStatus::InvalidArgument, "k * dim overflows"))?;
        let means = doubles(means, len, "means")?;
        let sigmas = doubles(sigmas, len, "sigmas")?;
        let weights = doubles(weights, k, "weights")?;
        let comps = means
            .chunks(dim)
            .zip(sigmas.chunks(dim))
            .map(|(m, s)| Ok(GaussianComponent::new(point(m)?, s.to_vec())?))
            .collect::<Result<Vec<_>, Failure>>()?;
        let q = MixtureProposal::new(comps, weights.to_vec())?;
        *out = Box::into_raw(Box::new(AmisProposal(q)));
        Ok(())
    })
}

/// Releases a proposal. Null is ignored.
///
/// # Safety
/// `p` must be null or a handle from [`amis_proposal_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn amis_proposal_free(p: *mut AmisProposal) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Writes the dimension of `p` to `out`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amis_proposal_dim(p: *const AmisProposal, out: *mut usize) -> AmisStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(p, "proposal")?.0.dim();
        Ok(())
    })
}

/// Log density of the mixture at `x` (`dim` coordinates).
///
/// # Safety
/// `x` must be valid for `dim` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amis_proposal_log_pdf(
    p: *const AmisProposal,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> AmisStatus {
    guard(|| {
        let q = &handle(p, "proposal")?.0;
        let x = point(doubles(x, dim, "x")?)?;
        *out_ptr(out, "out")? = q.log_pdf(&x)?;
        Ok(())
    })
}

/// Draws `n` points into `out_points`, row-major `n x dim`. The same
/// `seed` always yields the same points.
///
/// # Safety
/// `out_points` must be writable for `n * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn amis_proposal_sample(
    p: *const AmisProposal,
    seed: u64,
    n: usize,
    out_points: *mut f64,
) -> AmisStatus {
    guard(|| {
        let q = &handle(p, "proposal")?.0;
        let dim = q.dim();
        if out_points.is_null() {
            return Err(null("out_points"));
        }
        let mut rng = RunRngs::derive(seed, 0).sampling;
        let xs = sample(q, n, &mut rng)?;
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| Failure::new(AmisStatus::InvalidArgument, "n * dim overflows"))?;
        let out = slice::from_raw_parts_mut(out_points, len);
        for (row, x) in out.chunks_mut(dim).zip(&xs) {
            row.copy_from_slice(x.coords());
        }
        Ok(())
    })
}

/// Importance-sampling estimate of `E_p[f]` for the diagonal Gaussian
/// `p = N(p_mean, p_sigma)` from `n` points `xs` (row-major `n x dim`)
/// drawn from `q`, with KPI values `f`.
///
/// # Safety
/// Array arguments must be valid for the stated lengths and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amis_estimate(
    q: *const AmisProposal,
    p_mean: *const f64,
    p_sigma: *const f64,
    dim: usize,
    xs: *const f64,
    f: *const f64,
    n: usize,
    out: *mut AmisEstimate,
) -> AmisStatus {
    guard(|| {
        let q = &handle(q, "proposal")?.0;
        let out = out_ptr(out, "out")?;
        let p = GaussianComponent::new(
            point(doubles(p_mean, dim, "p_mean")?)?,
            doubles(p_sigma, dim, "p_sigma")?.to_vec(),
        )?;
        if n < 2 {
            return Err(AmisError::InsufficientData { needed: 2, got: n }.into());
        }
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| Failure::new(AmisStatus::InvalidArgument, "n * dim overflows"))?;
        let flat = doubles(xs, len, "xs")?;
        let points = flat.chunks(dim).map(point).collect::<Result<Vec<_>, _>>()?;
        let f = doubles(f, n, "f")?;
        let w = importance_weights(&p, q, &points)?;
        *out = AmisEstimate {
            estimate: is_estimate(f, &w)?,
            ess: ess(&w)?,
            std_error: is_stderr(f, &w)?,
        };
        Ok(())
    })
}

/// New configuration for `algorithm` (`GIS`, `MVU`, `GU` or `PCU`).
///
/// # Safety
/// `algorithm` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amis_config_new(
    algorithm: *const c_char,
    out: *mut *mut AmisConfig,
) -> AmisStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = PartialConfig {
            algorithm: Some(text(algorithm, "algorithm")?.to_string()),
            ..Default::default()
        };
        cfg.clone().resolve()?;
        *out = Box::into_raw(Box::new(AmisConfig(cfg)));
        Ok(())
    })
}

/// Configuration parsed from TOML text using the experiment field names.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amis_config_from_toml(
    toml: *const c_char,
    out: *mut *mut AmisConfig,
) -> AmisStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = PartialConfig::from_toml_str(text(toml, "toml")?)?;
        cfg.clone().resolve()?;
        *out = Box::into_raw(Box::new(AmisConfig(cfg)));
        Ok(())
    })
}

/// Sets one numeric field: `gamma`, `ess_threshold`, `master_seed`,
/// `n_samples`, `t_iterations`, `r_runs`, `delta`,
/// `peak_distance_coefficient`, `confidence_coefficient`,
/// `counterfactual_sigma` or `grid_size`. Counts and the seed must be
/// non-negative integers. The whole configuration is revalidated and left
/// unchanged on error.
///
/// # Safety
/// `cfg` must be a live handle and `field` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn amis_config_set(
    cfg: *mut AmisConfig,
    field: *const c_char,
    value: f64,
) -> AmisStatus {
    guard(|| {
        // SAFETY: non-null handles were produced by this library.
        let cfg = unsafe { cfg.as_mut() }.ok_or_else(|| null("config"))?;
        let field = text(field, "field")?;
        let count = || -> Result<u64, Failure> {
            if value >= 0.0 && value.fract() == 0.0 && value < 2f64.powi(63) {
                Ok(value as u64)
            } else {
                Err(Failure::new(
                    AmisStatus::InvalidArgument,
                    format!("{field} must be a non-negative integer, got {value}"),
                ))
            }
        };
        let mut next = cfg.0.clone();
        match field {
            "gamma" => next.gamma = Some(value),
            "ess_threshold" => next.ess_threshold = Some(value),
            "delta" => next.delta = Some(value),
            "peak_distance_coefficient" => next.peak_distance_coefficient = Some(value),
            "confidence_coefficient" => next.confidence_coefficient = Some(value),
            "counterfactual_sigma" => next.counterfactual_sigma = Some(value),
            "master_seed" => next.master_seed = Some(count()?),
            "n_samples" => next.n_samples = Some(count()? as usize),
            "t_iterations" => next.t_iterations = Some(count()? as usize),
            "r_runs" => next.r_runs = Some(count()? as usize),
            "grid_size" => next.grid_size = Some(count()? as usize),
            other => {
                return Err(Failure::new(
                    AmisStatus::InvalidArgument,
                    format!("unknown field `{other}`"),
                ));
            }
        }
        next.clone().resolve()?;
        cfg.0 = next;
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must be null or a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn amis_config_free(cfg: *mut AmisConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configured experiment. `parallel` non-zero spreads runs over
/// threads; the report is the same either way.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amis_run_experiment(
    cfg: *const AmisConfig,
    parallel: u8,
    out: *mut *mut AmisReport,
) -> AmisStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let resolved = handle(cfg, "config")?.0.clone().resolve()?;
        let (report, _) = run_experiment(&resolved, parallel != 0)?;
        *out = Box::into_raw(Box::new(AmisReport(report)));
        Ok(())
    })
}

/// Copies the report's numbers into `out`.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amis_report_summary(
    report: *const AmisReport,
    out: *mut AmisReportSummary,
) -> AmisStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        *out_ptr(out, "out")? = AmisReportSummary {
            gamma: r.gamma,
            ess_threshold: r.ess_threshold,
            n: r.n,
            t: r.t,
            r: r.r,
            seed: r.seed,
            mean_regret: r.mean_regret,
            mae: r.mae,
            mse: r.mse,
            var: r.var,
            has_fci: r.fci.is_some() as u8,
            fci: r.fci.unwrap_or(f64::NAN),
            prc: r.prc,
        };
        Ok(())
    })
}

/// Writes the report as CSV (header plus one row) into `buf`, NUL
/// terminated. `needed` receives the required size including the NUL; when
/// `cap` is too small nothing is written and `AMIS_STATUS_BUFFER_TOO_SMALL`
/// is returned. `buf` may be null when `cap` is 0.
///
/// # Safety
/// `buf` must be writable for `cap` bytes and `needed` writable.
#[no_mangle]
pub unsafe extern "C" fn amis_report_csv(
    report: *const AmisReport,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> AmisStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        let needed = out_ptr(needed, "needed")?;
        let csv = reports_to_csv(std::slice::from_ref(r))
            .map_err(|e| Failure::new(AmisStatus::InvalidArgument, e.to_string()))?;
        *needed = csv.len() + 1;
        if cap < *needed {
            return Err(Failure::new(
                AmisStatus::BufferTooSmall,
                format!("report needs {} bytes, buffer has {cap}", *needed),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(csv.as_ptr(), buf.cast::<u8>(), csv.len());
        *buf.add(csv.len()) = 0;
        Ok(())
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn amis_report_free(report: *mut AmisReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
