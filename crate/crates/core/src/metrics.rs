//! Closed-form privacy-loss and control-cost rates.
//!
//! All information rates are in nats per step. A divergent rate is
//! reported in-band as `f64::INFINITY` with the `divergent` flag set, so
//! sweeps over grids that touch the boundary complete.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{MaskParams, SystemParams};
use crate::riccati::{positive_quadratic_root, prediction_covariances, solve_are, steady_state_second_moment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyRates {
    /// Directed information rate from the state to the cloud estimate.
    pub uplink: f64,
    /// Directed information rate carried back through the commands.
    pub downlink: f64,
    /// Mutual information rate, `uplink + downlink`.
    pub total: f64,
    pub divergent: bool,
}

impl PrivacyRates {
    fn from_parts(uplink: f64, downlink: f64) -> Self {
        let total = uplink + downlink;
        Self {
            uplink,
            downlink,
            total,
            divergent: total.is_infinite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostRate {
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteHorizonInfo {
    pub horizon: usize,
    /// `sum_t 1/2 ln(1 + S_t / n)` for `t = 1..=T`.
    pub forward_sum: f64,
    /// `T * 1/2 ln(1 + k^2 n / (m + w))`.
    pub backward_sum: f64,
    pub total: f64,
    pub forward_terms: Vec<f64>,
    pub backward_term: f64,
}

/// `1/2 ln(1 + Σ / n)` with `Σ` the steady prediction covariance.
pub fn uplink_rate(sys: &SystemParams, masks: &MaskParams) -> f64 {
    let p = masks.downlink_total(sys.w());
    let n = masks.n();
    if n == 0.0 {
        return if p > 0.0 { f64::INFINITY } else { 0.0 };
    }
    // n > 0 so the closed form cannot fail
    let sigma = solve_are(sys.a(), p, n).unwrap_or(f64::INFINITY);
    0.5 * (sigma / n).ln_1p()
}

/// `1/2 ln(1 + k^2 n / (m + w))`.
pub fn downlink_rate(sys: &SystemParams, masks: &MaskParams) -> f64 {
    let p = masks.downlink_total(sys.w());
    let n = masks.n();
    if p == 0.0 {
        return if n > 0.0 { f64::INFINITY } else { 0.0 };
    }
    0.5 * (sys.k() * sys.k() * n / p).ln_1p()
}

pub fn mi_rate(sys: &SystemParams, masks: &MaskParams) -> PrivacyRates {
    PrivacyRates::from_parts(uplink_rate(sys, masks), downlink_rate(sys, masks))
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::NonPositiveAlpha);
    }
    if alpha.is_infinite() {
        return Err(Error::NonFinite("alpha"));
    }
    Ok(alpha)
}

/// Normalized steady covariance `s = Σ / n` as a function of the
/// noise-to-noise ratio: the positive root of
/// `s^2 - (a^2 - 1 + 1/alpha) s - 1/alpha = 0`.
pub fn normalized_sigma(a: f64, alpha: f64) -> Result<f64> {
    let alpha = check_alpha(alpha)?;
    let inv = 1.0 / alpha;
    Ok(positive_quadratic_root(a * a - 1.0 + inv, inv))
}

/// Mutual information rate expressed through `alpha = n / (m + w)` only.
pub fn mi_rate_from_nnr(sys: &SystemParams, alpha: f64) -> Result<PrivacyRates> {
    let s = normalized_sigma(sys.a(), alpha)?;
    let k2 = sys.k() * sys.k();
    Ok(PrivacyRates::from_parts(0.5 * s.ln_1p(), 0.5 * (k2 * alpha).ln_1p()))
}

/// Alternative form that takes `1/2 ln s` instead of `1/2 ln(1 + s)` for the
/// uplink term. Kept only for comparison sweeps; it does not equal the
/// mutual information rate.
pub fn mi_rate_root_form(sys: &SystemParams, alpha: f64) -> Result<f64> {
    let s = normalized_sigma(sys.a(), alpha)?;
    let k2 = sys.k() * sys.k();
    Ok(0.5 * s.ln() + 0.5 * (k2 * alpha).ln_1p())
}

/// Exact derivative of [`mi_rate_from_nnr`]'s total with respect to alpha.
pub fn mi_rate_from_nnr_derivative(sys: &SystemParams, alpha: f64) -> Result<f64> {
    let s = normalized_sigma(sys.a(), alpha)?;
    let inv = 1.0 / alpha;
    let b = sys.a() * sys.a() - 1.0 + inv;
    // implicit differentiation of s^2 - b(alpha) s - 1/alpha = 0
    let ds = -(s + 1.0) * inv * inv / (2.0 * s - b);
    let k2 = sys.k() * sys.k();
    Ok(0.5 * ds / (1.0 + s) + 0.5 * k2 / (1.0 + k2 * alpha))
}

/// `(q + r k^2) P + r k^2 n` with `P` the steady state second moment.
pub fn control_cost_rate(sys: &SystemParams, masks: &MaskParams) -> Result<CostRate> {
    let pm = steady_state_second_moment(sys, masks)?;
    let rk2 = sys.r() * sys.k() * sys.k();
    Ok(CostRate {
        cost: (sys.q() + rk2) * pm.p_ss + rk2 * masks.n(),
    })
}

/// Per-step directed information sums over `t = 1..=horizon`.
pub fn finite_horizon_info(sys: &SystemParams, masks: &MaskParams, horizon: usize) -> Result<FiniteHorizonInfo> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let p = masks.downlink_total(sys.w());
    let n = masks.n();
    if n == 0.0 || p == 0.0 {
        return Err(Error::DegenerateMasks);
    }
    let forward_terms: Vec<f64> = prediction_covariances(sys.a(), p, n, horizon)
        .into_iter()
        .map(|s| 0.5 * (s / n).ln_1p())
        .collect();
    let forward_sum: f64 = forward_terms.iter().sum();
    let backward_term = 0.5 * (sys.k() * sys.k() * n / p).ln_1p();
    let backward_sum = horizon as f64 * backward_term;
    Ok(FiniteHorizonInfo {
        horizon,
        forward_sum,
        backward_sum,
        total: forward_sum + backward_sum,
        forward_terms,
        backward_term,
    })
}
