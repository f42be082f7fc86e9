//! Scalar Kalman prediction-covariance Riccati equation and the
//! closed-loop second-moment recursion.
//!
//! With `p = m + w` the one-step prediction covariance obeys
//!
//! ```text
//! S_{t+1} = a^2 [ (1 - l_t)^2 S_t + l_t^2 n ] + p,   l_t = S_t / (S_t + n),   S_1 = p
//! ```
//!
//! and its steady value `Σ` is the nonnegative root of
//! `Σ^2 - ((a^2 - 1) n + p) Σ - p n = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{MaskParams, SystemParams};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiSolution {
    /// Steady one-step prediction covariance.
    pub sigma: f64,
    /// Steady Kalman gain `sigma / (sigma + n)`.
    pub gain: f64,
    /// `S_1, S_2, ...` up to and including the converged value.
    pub transient: Vec<f64>,
    /// Number of recursion updates performed.
    pub iterations: usize,
}

/// Steady second moment of the closed-loop state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMoment {
    pub p_ss: f64,
}

fn check_nonneg(name: &'static str, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFinite(name));
    }
    if v < 0.0 {
        return Err(Error::NegativeInput(name));
    }
    Ok(v)
}

/// Positive root of `x^2 - b x - c = 0` for `c >= 0`, computed without
/// cancellation.
pub(crate) fn positive_quadratic_root(b: f64, c: f64) -> f64 {
    let disc = (b * b + 4.0 * c).sqrt();
    if b >= 0.0 {
        0.5 * (b + disc)
    } else {
        // other root is (b - disc)/2 < 0 and the product of roots is -c
        2.0 * c / (disc - b)
    }
}

/// Closed-form steady prediction covariance for plant coefficient `a`,
/// downlink-side variance `p = m + w` and uplink mask variance `n`.
pub fn solve_are(a: f64, p: f64, n: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("a"));
    }
    let p = check_nonneg("p", p)?;
    let n = check_nonneg("n", n)?;
    if p == 0.0 && n == 0.0 {
        return if a.abs() < 1.0 {
            Ok(0.0)
        } else {
            Err(Error::DegenerateAll)
        };
    }
    let b = (a * a - 1.0) * n + p;
    Ok(positive_quadratic_root(b, p * n))
}

/// Residual of `(a^2 n / (Σ + n) - 1) Σ + p = 0`.
pub fn are_residual(a: f64, p: f64, n: f64, sigma: f64) -> f64 {
    if sigma + n == 0.0 {
        return p;
    }
    (a * a * n / (sigma + n) - 1.0) * sigma + p
}

pub fn kalman_gain(s_pred: f64, n: f64) -> Result<f64> {
    let s_pred = check_nonneg("s_pred", s_pred)?;
    let n = check_nonneg("n", n)?;
    if s_pred + n == 0.0 {
        return Err(Error::DegenerateAll);
    }
    Ok(s_pred / (s_pred + n))
}

/// Gain used inside recursions: a noiseless, perfectly known state has
/// nothing to correct, so `0/0` maps to 0.
#[inline]
pub(crate) fn gain_or_zero(s_pred: f64, n: f64) -> f64 {
    let den = s_pred + n;
    if den == 0.0 {
        0.0
    } else {
        s_pred / den
    }
}

/// One step of the prediction-covariance recursion.
#[inline]
pub(crate) fn riccati_step(a: f64, p: f64, n: f64, s_pred: f64) -> f64 {
    let l = gain_or_zero(s_pred, n);
    let post = (1.0 - l) * (1.0 - l) * s_pred + l * l * n;
    a * a * post + p
}

/// `S_1, ..., S_len` starting from a known initial state.
pub fn prediction_covariances(a: f64, p: f64, n: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut s = p;
    for _ in 0..len {
        out.push(s);
        s = riccati_step(a, p, n, s);
    }
    out
}

/// Runs the Kalman covariance recursion from `Σ_0 = 0` until the distance
/// to the fixed point is below `tol`.
///
/// The stopping rule bounds the remaining error with the local contraction
/// factor `a^2 (1 - l)^2` of the recursion, so slowly converging cases are
/// not stopped early.
pub fn iterate_prediction_covariance(a: f64, p: f64, n: f64, tol: f64, max_iter: usize) -> Result<RiccatiSolution> {
    if !a.is_finite() {
        return Err(Error::NonFinite("a"));
    }
    let p = check_nonneg("p", p)?;
    let n = check_nonneg("n", n)?;
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let mut s = p;
    let mut transient = vec![s];
    for iter in 1..=max_iter {
        let next = riccati_step(a, p, n, s);
        transient.push(next);
        let step = (next - s).abs();
        let l = gain_or_zero(next, n);
        let rho = a * a * (1.0 - l) * (1.0 - l);
        let converged = step <= tol && (step == 0.0 || (rho < 1.0 && step * rho <= tol * (1.0 - rho)));
        if !next.is_finite() {
            return Err(Error::NoConvergence(iter));
        }
        if converged {
            return Ok(RiccatiSolution {
                sigma: next,
                gain: gain_or_zero(next, n),
                transient,
                iterations: iter,
            });
        }
        s = next;
    }
    Err(Error::NoConvergence(max_iter))
}

/// `P = (m + k^2 n + w) / (1 - (a + k)^2)`.
pub fn steady_state_second_moment(sys: &SystemParams, masks: &MaskParams) -> Result<SecondMoment> {
    let stab = sys.stability();
    if !stab.stable {
        return Err(Error::UnstableClosedLoop);
    }
    let k2 = sys.k() * sys.k();
    Ok(SecondMoment {
        p_ss: (masks.m() + k2 * masks.n() + sys.w()) / stab.margin,
    })
}

/// `P_1, ..., P_len` of `P_t = (a + k)^2 P_{t-1} + m + k^2 n + w`, `P_0 = 0`.
pub fn second_moment_sequence(sys: &SystemParams, masks: &MaskParams, len: usize) -> Vec<f64> {
    let pole = sys.a() + sys.k();
    let drive = masks.m() + sys.k() * sys.k() * masks.n() + sys.w();
    let mut out = Vec::with_capacity(len);
    let mut pt = 0.0;
    for _ in 0..len {
        pt = pole * pole * pt + drive;
        out.push(pt);
    }
    out
}
