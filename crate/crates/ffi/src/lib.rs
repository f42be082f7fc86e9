//! C ABI over `privmask-core`.
//!
//! Every function returns a [`PmStatus`] and writes results through out
//! pointers. Out pointers are only written on success. Parameter sets and
//! trajectory batches are opaque heap handles released by their `_free`
//! functions. After a failure, [`pm_last_error_message`] describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use privmask_core::design::{self, BoundaryStatus};
use privmask_core::oracle::{self, Target};
use privmask_core::sim::{self, TrajectoryBatch};
use privmask_core::{metrics, riccati, Error, MaskParams, SystemParams};

/// Result code of every `pm_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    InvalidArgument = 1,
    ZeroGain = 2,
    NegativeVariance = 3,
    NegativeWeight = 4,
    NonFinite = 5,
    IllDefinedNnr = 6,
    ZeroUplink = 7,
    NegativeInput = 8,
    DegenerateAll = 9,
    NoConvergence = 10,
    UnstableClosedLoop = 11,
    DegenerateMasks = 12,
    NonPositiveAlpha = 13,
    HorizonTooLarge = 14,
    SingularBlock = 15,
    HorizonTooShort = 16,
    ZeroProcessNoise = 17,
    EmptyInput = 18,
    NullPointer = 100,
    Panic = 101,
}

impl From<&Error> for PmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ZeroGain => PmStatus::ZeroGain,
            Error::NegativeVariance(_) => PmStatus::NegativeVariance,
            Error::NegativeWeight(_) => PmStatus::NegativeWeight,
            Error::NonFinite(_) => PmStatus::NonFinite,
            Error::IllDefinedNnr => PmStatus::IllDefinedNnr,
            Error::ZeroUplink => PmStatus::ZeroUplink,
            Error::NegativeInput(_) => PmStatus::NegativeInput,
            Error::DegenerateAll => PmStatus::DegenerateAll,
            Error::NoConvergence(_) => PmStatus::NoConvergence,
            Error::UnstableClosedLoop => PmStatus::UnstableClosedLoop,
            Error::DegenerateMasks => PmStatus::DegenerateMasks,
            Error::NonPositiveAlpha => PmStatus::NonPositiveAlpha,
            Error::HorizonTooLarge { .. } => PmStatus::HorizonTooLarge,
            Error::SingularBlock(_) => PmStatus::SingularBlock,
            Error::HorizonTooShort { .. } => PmStatus::HorizonTooShort,
            Error::ZeroProcessNoise => PmStatus::ZeroProcessNoise,
            Error::EmptyInput => PmStatus::EmptyInput,
            Error::InvalidArgument(_) => PmStatus::InvalidArgument,
        }
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Range(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<(), Failure>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Outcome) -> PmStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (PmStatus::Ok, String::new()),
        Ok(Err(Failure::Core(e))) => (PmStatus::from(&e), e.to_string()),
        Ok(Err(Failure::Null(name))) => (PmStatus::NullPointer, format!("null pointer: {name}")),
        Ok(Err(Failure::Range(msg))) => (PmStatus::InvalidArgument, msg),
        Err(_) => (PmStatus::Panic, "internal panic".to_string()),
    };
    set_last_error(&msg);
    status
}

fn out<'a, T>(ptr: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes either null or a valid, writable pointer.
    unsafe { ptr.as_mut() }.ok_or(Failure::Null(name))
}

fn handle<'a, T>(ptr: *const T, name: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles come from this library and are still live.
    unsafe { ptr.as_ref() }.ok_or(Failure::Null(name))
}

/// Message for the most recent failed call on this thread, or "" after a
/// success. Valid until the next `pm_*` call on the same thread.
#[no_mangle]
pub extern "C" fn pm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Validated plant, gain and cost weights.
pub struct PmSystem(SystemParams);

/// Stored Monte Carlo trajectories.
pub struct PmTrajectoryBatch(TrajectoryBatch);

/// Mask variances; validated where used.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmMasks {
    pub m: f64,
    pub n: f64,
}

impl PmMasks {
    fn params(&self) -> Result<MaskParams, Failure> {
        Ok(MaskParams::new(self.m, self.n)?)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmPrivacyRates {
    pub uplink: f64,
    pub downlink: f64,
    pub total: f64,
    pub divergent: bool,
}

impl From<metrics::PrivacyRates> for PmPrivacyRates {
    fn from(r: metrics::PrivacyRates) -> Self {
        Self {
            uplink: r.uplink,
            downlink: r.downlink,
            total: r.total,
            divergent: r.divergent,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmDesignReport {
    pub alpha_star: f64,
    pub c4: f64,
    pub c3: f64,
    pub c1: f64,
    pub c0: f64,
    pub residual: f64,
    pub mi_min: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmTradeoffPoint {
    pub lambda: f64,
    pub alpha_opt: f64,
    pub mi: f64,
    pub cost: f64,
    pub objective: f64,
    pub foc_residual: f64,
    pub at_boundary: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmBoundaryStatus {
    Ok = 0,
    UplinkUnbounded = 1,
    DownlinkUnbounded = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmFiniteHorizonInfo {
    pub horizon: usize,
    pub forward_sum: f64,
    pub backward_sum: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmTarget {
    Measurement = 0,
    Estimate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmDirectedInfo {
    pub forward: f64,
    pub backward: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmEstimate {
    pub mean: f64,
    pub std_err: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmStepRecord {
    pub t: usize,
    pub x: f64,
    pub n: f64,
    pub y: f64,
    pub u: f64,
    pub m: f64,
    pub v: f64,
    pub w: f64,
    pub xhat_pred: f64,
    pub xhat: f64,
    pub s_pred: f64,
    pub gain: f64,
}

/// Creates a parameter handle. Release it with [`pm_system_free`].
#[no_mangle]
pub extern "C" fn pm_system_new(a: f64, k: f64, w: f64, q: f64, r: f64, system: *mut *mut PmSystem) -> PmStatus {
    guard(|| {
        let slot = out(system, "system")?;
        let params = SystemParams::new(a, k, w, q, r)?;
        *slot = Box::into_raw(Box::new(PmSystem(params)));
        Ok(())
    })
}

/// Releases a handle from [`pm_system_new`]. Null is ignored.
///
/// # Safety
/// `system` must be null or a live handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn pm_system_free(system: *mut PmSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

#[no_mangle]
pub extern "C" fn pm_solve_are(a: f64, p: f64, n: f64, sigma: *mut f64) -> PmStatus {
    guard(|| {
        let slot = out(sigma, "sigma")?;
        *slot = riccati::solve_are(a, p, n)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_mi_rate(system: *const PmSystem, masks: PmMasks, rates: *mut PmPrivacyRates) -> PmStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let slot = out(rates, "rates")?;
        *slot = metrics::mi_rate(&sys.0, &masks.params()?).into();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_mi_rate_from_nnr(system: *const PmSystem, alpha: f64, rates: *mut PmPrivacyRates) -> PmStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let slot = out(rates, "rates")?;
        *slot = metrics::mi_rate_from_nnr(&sys.0, alpha)?.into();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_control_cost_rate(system: *const PmSystem, masks: PmMasks, cost: *mut f64) -> PmStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let slot = out(cost, "cost")?;
        *slot = metrics::control_cost_rate(&sys.0, &masks.params()?)?.cost;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_optimal_nnr(a: f64, k: f64, report: *mut PmDesignReport) -> PmStatus {
    guard(|| {
        let slot = out(report, "report")?;
        let r = design::optimal_nnr(a, k)?;
        *slot = PmDesignReport {
            alpha_star: r.alpha_star,
            c4: r.c4,
            c3: r.c3,
            c1: r.c1,
            c0: r.c0,
            residual: r.residual,
            mi_min: r.mi_min,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_masks_from_nnr(alpha: f64, w: f64, m: f64, masks: *mut PmMasks) -> PmStatus {
    guard(|| {
        let slot = out(masks, "masks")?;
        let p = design::masks_from_nnr(alpha, w, m)?;
        *slot = PmMasks { m: p.m(), n: p.n() };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_tradeoff_point(system: *const PmSystem, lambda: f64, point: *mut PmTradeoffPoint) -> PmStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let slot = out(point, "point")?;
        let p = design::tradeoff_point(&sys.0, lambda)?;
        *slot = PmTradeoffPoint {
            lambda: p.lambda,
            alpha_opt: p.alpha_opt,
            mi: p.mi,
            cost: p.cost,
            objective: p.objective,
            foc_residual: p.foc_residual,
            at_boundary: p.at_boundary,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_boundary_diagnostics(masks: PmMasks, w: f64, status: *mut PmBoundaryStatus) -> PmStatus {
    guard(|| {
        let slot = out(status, "status")?;
        if !w.is_finite() || w < 0.0 {
            return Err(Failure::Range("w must be finite and nonnegative".into()));
        }
        *slot = match design::boundary_diagnostics(&masks.params()?, w) {
            BoundaryStatus::Ok => PmBoundaryStatus::Ok,
            BoundaryStatus::UplinkUnbounded => PmBoundaryStatus::UplinkUnbounded,
            BoundaryStatus::DownlinkUnbounded => PmBoundaryStatus::DownlinkUnbounded,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_finite_horizon_info(
    system: *const PmSystem,
    masks: PmMasks,
    horizon: usize,
    info: *mut PmFiniteHorizonInfo,
) -> PmStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let slot = out(info, "info")?;
        let r = metrics::finite_horizon_info(&sys.0, &masks.params()?, horizon)?;
        *slot = PmFiniteHorizonInfo {
            horizon: r.horizon,
            forward_sum: r.forward_sum,
            backward_sum: r.backward_sum,
            total: r.total,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_exact_directed_info(
    system: *const PmSystem,
    masks: PmMasks,
    horizon: usize,
    target: PmTarget,
    info: *mut PmDirectedInfo,
) -> PmStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let slot = out(info, "info")?;
        let target = match target {
            PmTarget::Measurement => Target::Measurement,
            PmTarget::Estimate => Target::Estimate,
        };
        let d = oracle::exact_directed_info(&sys.0, &masks.params()?, horizon, target)?;
        *slot = PmDirectedInfo {
            forward: d.forward,
            backward: d.backward,
        };
        Ok(())
    })
}

/// Simulates `trajectories` runs of `horizon` steps. Release the batch
/// with [`pm_batch_free`].
#[no_mangle]
pub extern "C" fn pm_simulate(
    system: *const PmSystem,
    masks: PmMasks,
    horizon: usize,
    trajectories: usize,
    seed: u64,
    batch: *mut *mut PmTrajectoryBatch,
) -> PmStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let slot = out(batch, "batch")?;
        let b = sim::simulate(&sys.0, &masks.params()?, horizon, trajectories, seed)?;
        *slot = Box::into_raw(Box::new(PmTrajectoryBatch(b)));
        Ok(())
    })
}

/// Releases a batch from [`pm_simulate`]. Null is ignored.
///
/// # Safety
/// `batch` must be null or a live handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn pm_batch_free(batch: *mut PmTrajectoryBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// Number of trajectories and the horizon (steps `0..=horizon`).
#[no_mangle]
pub extern "C" fn pm_batch_shape(
    batch: *const PmTrajectoryBatch,
    trajectories: *mut usize,
    horizon: *mut usize,
) -> PmStatus {
    guard(|| {
        let b = handle(batch, "batch")?;
        let (tr, hz) = (out(trajectories, "trajectories")?, out(horizon, "horizon")?);
        *tr = b.0.len();
        *hz = b.0.horizon;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_batch_record(
    batch: *const PmTrajectoryBatch,
    trajectory: usize,
    t: usize,
    record: *mut PmStepRecord,
) -> PmStatus {
    guard(|| {
        let b = handle(batch, "batch")?;
        let slot = out(record, "record")?;
        if trajectory >= b.0.len() || t > b.0.horizon {
            return Err(Failure::Range(format!(
                "index ({trajectory}, {t}) outside {} trajectories of {} steps",
                b.0.len(),
                b.0.horizon
            )));
        }
        let r = b.0.record(trajectory, t);
        *slot = PmStepRecord {
            t: r.t,
            x: r.x,
            n: r.n,
            y: r.y,
            u: r.u,
            m: r.m,
            v: r.v,
            w: r.w,
            xhat_pred: r.xhat_pred,
            xhat: r.xhat,
            s_pred: r.s_pred,
            gain: r.gain,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_empirical_cost(
    batch: *const PmTrajectoryBatch,
    q: f64,
    r: f64,
    burn_in: usize,
    estimate: *mut PmEstimate,
) -> PmStatus {
    guard(|| {
        let b = handle(batch, "batch")?;
        let slot = out(estimate, "estimate")?;
        let e = sim::empirical_cost_with_burn_in(&b.0, q, r, burn_in)?;
        *slot = PmEstimate {
            mean: e.mean,
            std_err: e.std_err,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pm_empirical_prediction_error(
    batch: *const PmTrajectoryBatch,
    burn_in: usize,
    estimate: *mut PmEstimate,
) -> PmStatus {
    guard(|| {
        let b = handle(batch, "batch")?;
        let slot = out(estimate, "estimate")?;
        let e = sim::empirical_prediction_error_with_burn_in(&b.0, burn_in)?;
        *slot = PmEstimate {
            mean: e.mean,
            std_err: e.std_err,
        };
        Ok(())
    })
}
