//! C ABI over the core library.
//!
//! Objects cross the boundary as opaque heap handles created by a
//! `*_new`/`*_parse` function and released by the matching `*_free`.
//! Every fallible function returns an [`MlmcAbcStatus`]; the message of the
//! most recent failure on the calling thread is available through
//! [`mlmc_abc_last_error`]. Panics are caught and reported as
//! `MLMC_ABC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use mlmc_abc::abc::{abc_rejection, DistanceOracle, Prior, RejectionOptions};
use mlmc_abc::bench::{run_experiment, ExperimentConfig, Problem};
use mlmc_abc::mlmc::{mlmc_abc_cdf, Lattice, LatticeCdf, LevelPlan, MlmcOptions};
use mlmc_abc::models::{SisProblem, TbProblem, TbSettings};
use mlmc_abc::rng::Seed;
use mlmc_abc::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlmcAbcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Config = 4,
    Parse = 5,
    Numerical = 6,
    EmptySamples = 7,
    BudgetExhausted = 8,
    Degeneracy = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

fn status_of(e: &Error) -> MlmcAbcStatus {
    match e {
        Error::InvalidArgument(_) | Error::InvalidModel(_) | Error::UndefinedRatio | Error::LatticeMismatch => {
            MlmcAbcStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } => MlmcAbcStatus::DimensionMismatch,
        Error::Config(_) => MlmcAbcStatus::Config,
        Error::Parse(_) | Error::Csv(_) => MlmcAbcStatus::Parse,
        Error::Numerical(_) | Error::DegeneratePosterior | Error::ZeroVariance => MlmcAbcStatus::Numerical,
        Error::EmptySamples => MlmcAbcStatus::EmptySamples,
        Error::BudgetExhausted { .. } => MlmcAbcStatus::BudgetExhausted,
        Error::Degeneracy { .. } | Error::DegenerateTruncation { .. } | Error::KernelDegenerate(_) => {
            MlmcAbcStatus::Degeneracy
        }
        Error::Io(_) => MlmcAbcStatus::Io,
        Error::Level { source, .. } => status_of(source),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: MlmcAbcStatus, msg: impl Into<String>) -> MlmcAbcStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), MlmcAbcStatus>>(f: F) -> MlmcAbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MlmcAbcStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(MlmcAbcStatus::Panic, msg)
        }
    }
}

fn lift<T>(r: mlmc_abc::Result<T>) -> Result<T, MlmcAbcStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, MlmcAbcStatus> {
    if s.is_null() {
        return Err(fail(MlmcAbcStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(MlmcAbcStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn input<'a, T>(p: *const T, len: usize) -> Result<&'a [T], MlmcAbcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(MlmcAbcStatus::NullPointer, "null input array"));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize) -> Result<&'a mut [T], MlmcAbcStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(MlmcAbcStatus::NullPointer, "null output array"));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, MlmcAbcStatus> {
    p.as_ref().ok_or_else(|| fail(MlmcAbcStatus::NullPointer, "null handle"))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), MlmcAbcStatus> {
    if out.is_null() {
        return Err(fail(MlmcAbcStatus::NullPointer, "null output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Opaque prior distribution.
pub struct MlmcAbcPrior(Prior);

/// Opaque inference problem (model, observed data and discrepancy).
pub struct MlmcAbcProblem(Problem);

/// Opaque evaluation lattice.
pub struct MlmcAbcLattice(Lattice);

/// Opaque CDF estimate on a lattice.
pub struct MlmcAbcCdf(LatticeCdf);

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mlmc_abc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a prior such as `"a ~ uniform(0, 5); b ~ normal(0, 1)"`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_prior_parse(spec: *const c_char, out: *mut *mut MlmcAbcPrior) -> MlmcAbcStatus {
    guard(|| {
        let prior: Prior = lift(text(spec)?.parse())?;
        put(out, Box::into_raw(Box::new(MlmcAbcPrior(prior))))
    })
}

/// Number of prior components, or 0 for a null handle.
///
/// # Safety
/// `prior` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_prior_dim(prior: *const MlmcAbcPrior) -> usize {
    prior.as_ref().map_or(0, |p| p.0.dim())
}

/// Prior density at `theta` (length `dim`).
///
/// # Safety
/// `prior` must be a live handle, `theta` must hold `dim` values and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_prior_density(
    prior: *const MlmcAbcPrior,
    theta: *const f64,
    dim: usize,
    out: *mut f64,
) -> MlmcAbcStatus {
    guard(|| {
        let p = &handle(prior)?.0;
        if dim != p.dim() {
            return Err(fail(MlmcAbcStatus::DimensionMismatch, format!("expected {} values", p.dim())));
        }
        put(out, p.density(input(theta, dim)?))
    })
}

/// Releases a prior handle. Null is ignored.
///
/// # Safety
/// `prior` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_prior_free(prior: *mut MlmcAbcPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// The SIS problem with the bundled observations.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_problem_sis(out: *mut *mut MlmcAbcProblem) -> MlmcAbcStatus {
    guard(|| put(out, Box::into_raw(Box::new(MlmcAbcProblem(Problem::Sis(SisProblem::bundled()))))))
}

/// The tuberculosis problem with the bundled cluster data. A zero
/// `max_infections` selects the default cap.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_problem_tb(max_infections: u64, out: *mut *mut MlmcAbcProblem) -> MlmcAbcStatus {
    guard(|| {
        let mut settings = TbSettings::default();
        if max_infections > 0 {
            settings.max_infections = max_infections;
        }
        put(out, Box::into_raw(Box::new(MlmcAbcProblem(Problem::Tb(TbProblem::bundled(settings))))))
    })
}

/// Simulates once at `theta` and writes the discrepancy to observed data.
///
/// # Safety
/// `problem` must be a live handle, `theta` must hold `dim` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_problem_distance(
    problem: *const MlmcAbcProblem,
    theta: *const f64,
    dim: usize,
    seed: u64,
    out: *mut f64,
) -> MlmcAbcStatus {
    guard(|| {
        let p = &handle(problem)?.0;
        if dim != p.dim() {
            return Err(fail(MlmcAbcStatus::DimensionMismatch, format!("expected {} values", p.dim())));
        }
        let d = lift(p.simulate_distance(input(theta, dim)?, &mut Seed::new(seed).rng()))?;
        put(out, d)
    })
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_problem_free(problem: *mut MlmcAbcProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Regular lattice with `nodes[j]` points from `lo[j]` to `hi[j]`.
///
/// # Safety
/// `lo`, `hi` and `nodes` must each hold `dim` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_lattice_new(
    lo: *const f64,
    hi: *const f64,
    nodes: *const usize,
    dim: usize,
    out: *mut *mut MlmcAbcLattice,
) -> MlmcAbcStatus {
    guard(|| {
        let (lo, hi, nodes) = (input(lo, dim)?, input(hi, dim)?, input(nodes, dim)?);
        let spec = (0..dim).map(|j| (lo[j], hi[j], nodes[j])).collect();
        let lattice = lift(Lattice::new(spec))?;
        put(out, Box::into_raw(Box::new(MlmcAbcLattice(lattice))))
    })
}

/// Total node count, or 0 for a null handle.
///
/// # Safety
/// `lattice` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_lattice_len(lattice: *const MlmcAbcLattice) -> usize {
    lattice.as_ref().map_or(0, |l| l.0.len())
}

/// # Safety
/// `lattice` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_lattice_free(lattice: *mut MlmcAbcLattice) {
    if !lattice.is_null() {
        drop(Box::from_raw(lattice));
    }
}

/// ABC rejection sampling: writes `n` samples row-major into `samples`
/// (`n * dim` values) and the simulation count into `cost`.
///
/// # Safety
/// Handles must be live; `samples` must hold `n * dim` values; `cost` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_rejection(
    prior: *const MlmcAbcPrior,
    problem: *const MlmcAbcProblem,
    epsilon: f64,
    n: usize,
    seed: u64,
    samples: *mut f64,
    dim: usize,
    cost: *mut u64,
) -> MlmcAbcStatus {
    guard(|| {
        let (prior, problem) = (&handle(prior)?.0, &handle(problem)?.0);
        if dim != prior.dim() {
            return Err(fail(MlmcAbcStatus::DimensionMismatch, format!("expected dim {}", prior.dim())));
        }
        let out = output(samples, n * dim)?;
        let set = lift(abc_rejection(prior, None, problem, epsilon, n, Seed::new(seed), RejectionOptions::default()))?;
        for (row, s) in out.chunks_mut(dim.max(1)).zip(&set.samples) {
            row.copy_from_slice(s);
        }
        put(cost, set.cost.steps())
    })
}

/// Multilevel CDF estimate for thresholds `epsilons[0..levels]` with
/// `allocations[l]` samples on level `l`.
///
/// # Safety
/// Handles must be live; arrays must hold `levels` entries; `out` and
/// `cost` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_estimate_cdf(
    prior: *const MlmcAbcPrior,
    problem: *const MlmcAbcProblem,
    lattice: *const MlmcAbcLattice,
    epsilons: *const f64,
    allocations: *const usize,
    levels: usize,
    seed: u64,
    out: *mut *mut MlmcAbcCdf,
    cost: *mut u64,
) -> MlmcAbcStatus {
    guard(|| {
        let (prior, problem, lattice) = (&handle(prior)?.0, &handle(problem)?.0, &handle(lattice)?.0);
        let plan = lift(LevelPlan::new(input(epsilons, levels)?.to_vec(), input(allocations, levels)?.to_vec()))?;
        let run = lift(mlmc_abc_cdf(prior, problem, &plan, lattice, Seed::new(seed), MlmcOptions::default()))?;
        put(cost, run.total_cost())?;
        put(out, Box::into_raw(Box::new(MlmcAbcCdf(run.estimate.cdf))))
    })
}

/// Number of values in a CDF estimate, or 0 for a null handle.
///
/// # Safety
/// `cdf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_cdf_len(cdf: *const MlmcAbcCdf) -> usize {
    cdf.as_ref().map_or(0, |c| c.0.values().len())
}

/// Copies the node values (row-major, last axis fastest) into `out`.
///
/// # Safety
/// `cdf` must be a live handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_cdf_values(cdf: *const MlmcAbcCdf, out: *mut f64, len: usize) -> MlmcAbcStatus {
    guard(|| {
        let v = handle(cdf)?.0.values();
        if len < v.len() {
            return Err(fail(MlmcAbcStatus::BufferTooSmall, format!("need {} values", v.len())));
        }
        output(out, v.len())?.copy_from_slice(v);
        Ok(())
    })
}

/// Largest absolute node difference between two estimates on one lattice.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_cdf_sup_distance(
    a: *const MlmcAbcCdf,
    b: *const MlmcAbcCdf,
    out: *mut f64,
) -> MlmcAbcStatus {
    guard(|| {
        let d = lift(handle(a)?.0.sup_distance(&handle(b)?.0))?;
        put(out, d)
    })
}

/// # Safety
/// `cdf` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_cdf_free(cdf: *mut MlmcAbcCdf) {
    if !cdf.is_null() {
        drop(Box::from_raw(cdf));
    }
}

/// Runs an experiment from TOML or JSON text. `out_dir` and `cache_dir` may
/// be null. Writes the RMSE (NaN without a reference) and mean cost.
///
/// # Safety
/// Strings must be NUL-terminated or null where allowed; `rmse` and
/// `mean_cost` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_abc_run_config(
    config: *const c_char,
    out_dir: *const c_char,
    cache_dir: *const c_char,
    rmse: *mut f64,
    mean_cost: *mut f64,
) -> MlmcAbcStatus {
    guard(|| {
        let cfg = lift(ExperimentConfig::parse(text(config)?))?;
        let out = if out_dir.is_null() { None } else { Some(Path::new(text(out_dir)?)) };
        let cache = if cache_dir.is_null() { None } else { Some(Path::new(text(cache_dir)?)) };
        let report = lift(run_experiment(&cfg, out, cache))?;
        put(rmse, report.rmse().unwrap_or(f64::NAN))?;
        put(mean_cost, report.mean_cost())
    })
}
