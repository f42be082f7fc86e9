//! Mask design in terms of the noise-to-noise ratio `alpha = n / (m + w)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{mi_rate_from_nnr, mi_rate_from_nnr_derivative};
use crate::params::{MaskParams, SystemParams};

/// Relative residual bound accepted for the quartic root.
pub const QUARTIC_TOL: f64 = 1e-10;
/// Bound on the first-order residual of an interior trade-off optimum.
pub const FOC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignReport {
    pub alpha_star: f64,
    pub c4: f64,
    pub c3: f64,
    pub c1: f64,
    pub c0: f64,
    /// `|F(alpha_star)|` divided by the sum of the magnitudes of its terms.
    pub residual: f64,
    /// Mutual information rate at `alpha_star`, nats per step.
    pub mi_min: f64,
}

/// `F(alpha) = c4 alpha^4 + c3 alpha^3 + c1 alpha + c0`.
#[derive(Debug, Clone, Copy)]
struct Quartic {
    c4: f64,
    c3: f64,
    c1: f64,
    c0: f64,
}

impl Quartic {
    fn new(a: f64, k: f64) -> Self {
        let a2 = a * a;
        let k2 = k * k;
        Self {
            c4: (a2 - 1.0) * (a2 - 1.0),
            c3: 2.0 * (a2 + 1.0),
            c1: -2.0 / k2,
            c0: -1.0 / (k2 * k2),
        }
    }

    fn eval(&self, x: f64) -> f64 {
        ((self.c4 * x + self.c3) * x * x + self.c1) * x + self.c0
    }

    fn deriv(&self, x: f64) -> f64 {
        (4.0 * self.c4 * x + 3.0 * self.c3) * x * x + self.c1
    }

    fn scale(&self, x: f64) -> f64 {
        let x2 = x * x;
        (self.c4 * x2 * x2).abs() + (self.c3 * x2 * x).abs() + (self.c1 * x).abs() + self.c0.abs()
    }

    /// Unique positive root. `F(0) < 0`, `F` is eventually positive and
    /// changes sign once on `(0, inf)`.
    fn positive_root(&self) -> Result<f64> {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut doublings = 0;
        while self.eval(hi) <= 0.0 {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 2_000 || !hi.is_finite() {
                return Err(Error::NoConvergence(doublings));
            }
        }
        for _ in 0..2_000 {
            if hi - lo <= 1e-12 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        let d = self.deriv(x);
        if d != 0.0 {
            let polished = x - self.eval(x) / d;
            if polished > 0.0 && self.eval(polished).abs() <= self.eval(x).abs() {
                x = polished;
            }
        }
        Ok(x)
    }
}

fn checked_finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(name))
    }
}

/// The noise-to-noise ratio that minimizes the mutual information rate.
pub fn optimal_nnr(a: f64, k: f64) -> Result<DesignReport> {
    let a = checked_finite("a", a)?;
    let k = checked_finite("k", k)?;
    if k == 0.0 {
        return Err(Error::ZeroGain);
    }
    let f = Quartic::new(a, k);
    let alpha_star = f.positive_root()?;
    let sys = SystemParams::new(a, k, 0.0, 0.0, 0.0)?;
    Ok(DesignReport {
        alpha_star,
        c4: f.c4,
        c3: f.c3,
        c1: f.c1,
        c0: f.c0,
        residual: f.eval(alpha_star).abs() / f.scale(alpha_star),
        mi_min: mi_rate_from_nnr(&sys, alpha_star)?.total,
    })
}

pub fn min_privacy_rate(a: f64, k: f64) -> Result<f64> {
    Ok(optimal_nnr(a, k)?.mi_min)
}

/// Masks with downlink variance `m` and uplink variance `alpha (m + w)`.
pub fn masks_from_nnr(alpha: f64, w: f64, m: f64) -> Result<MaskParams> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::NonPositiveAlpha);
    }
    let alpha = checked_finite("alpha", alpha)?;
    let w = checked_finite("w", w)?;
    let m = checked_finite("m", m)?;
    if w < 0.0 {
        return Err(Error::NegativeVariance("w"));
    }
    if m < 0.0 {
        return Err(Error::NegativeVariance("m"));
    }
    if m + w == 0.0 {
        return Err(Error::IllDefinedNnr);
    }
    MaskParams::new(m, alpha * (m + w))
}

/// Steady control cost of the design `m = 0`, `n = alpha w`:
/// `(q + r k^2) w (1 + k^2 alpha) / (1 - (a + k)^2) + r k^2 alpha w`.
pub fn nnr_cost(sys: &SystemParams, alpha: f64) -> Result<f64> {
    if !sys.stability().stable {
        return Err(Error::UnstableClosedLoop);
    }
    let (base, slope) = cost_line(sys);
    Ok(base + slope * alpha)
}

/// Intercept and slope of [`nnr_cost`] in `alpha`.
fn cost_line(sys: &SystemParams) -> (f64, f64) {
    let k2 = sys.k() * sys.k();
    let rk2 = sys.r() * k2;
    let ak = sys.a() + sys.k();
    let gain = (sys.q() + rk2) * sys.w() / (1.0 - ak * ak);
    (gain, gain * k2 + rk2 * sys.w())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub lambda: f64,
    pub alpha_opt: f64,
    /// Mutual information rate at `alpha_opt`, nats per step.
    pub mi: f64,
    pub cost: f64,
    /// `mi + lambda * cost`.
    pub objective: f64,
    /// `|I'(alpha) + lambda C'(alpha)|` with `I'` from central differences.
    pub foc_residual: f64,
    /// The optimum sits at the lower end of the search interval.
    pub at_boundary: bool,
}

/// Search settings for [`tradeoff_point_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffOptions {
    pub grid_points: usize,
    /// The search interval is `[lower_ratio * alpha_star, alpha_star]`.
    pub lower_ratio: f64,
    /// Golden-section stopping width, relative to alpha.
    pub alpha_tol: f64,
}

impl Default for TradeoffOptions {
    fn default() -> Self {
        Self {
            grid_points: 601,
            lower_ratio: 1e-3,
            alpha_tol: 1e-10,
        }
    }
}

/// Five-point central difference of the information rate.
fn mi_slope_numeric(sys: &SystemParams, alpha: f64) -> Result<f64> {
    let h = 1e-3 * alpha;
    let f = |x: f64| mi_rate_from_nnr(sys, x).map(|r| r.total);
    Ok((f(alpha - 2.0 * h)? - 8.0 * f(alpha - h)? + 8.0 * f(alpha + h)? - f(alpha + 2.0 * h)?) / (12.0 * h))
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..500 {
        if hi - lo <= tol * hi {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Root of an increasing-through-zero function on `[lo, hi]`.
fn bisect_sign_change(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizes `I(alpha) + lambda C(alpha)` over `(0, alpha_star]`.
pub fn tradeoff_point(sys: &SystemParams, lambda: f64) -> Result<TradeoffPoint> {
    tradeoff_point_with(sys, lambda, &TradeoffOptions::default())
}

pub fn tradeoff_point_with(sys: &SystemParams, lambda: f64, opts: &TradeoffOptions) -> Result<TradeoffPoint> {
    let lambda = checked_finite("lambda", lambda)?;
    if lambda < 0.0 {
        return Err(Error::NegativeInput("lambda"));
    }
    if !sys.stability().stable {
        return Err(Error::UnstableClosedLoop);
    }
    if sys.w() == 0.0 {
        return Err(Error::ZeroProcessNoise);
    }
    if opts.grid_points < 3 || !(opts.lower_ratio > 0.0 && opts.lower_ratio < 1.0) || !(opts.alpha_tol > 0.0) {
        return Err(Error::InvalidArgument("trade-off search options out of range".into()));
    }
    let alpha_star = optimal_nnr(sys.a(), sys.k())?.alpha_star;
    let (_, slope) = cost_line(sys);
    let weighted = lambda * slope;

    let objective = |x: f64| -> f64 {
        mi_rate_from_nnr(sys, x).map(|r| r.total).unwrap_or(f64::INFINITY)
            + lambda * (nnr_cost(sys, x).unwrap_or(f64::INFINITY))
    };

    let (alpha_opt, at_boundary) = if weighted == 0.0 {
        (alpha_star, false)
    } else {
        let lo = opts.lower_ratio * alpha_star;
        let steps = opts.grid_points - 1;
        let ratio = (alpha_star / lo).ln();
        let grid: Vec<f64> = (0..=steps)
            .map(|i| {
                if i == steps {
                    alpha_star
                } else {
                    lo * (ratio * i as f64 / steps as f64).exp()
                }
            })
            .collect();
        let best = grid
            .iter()
            .enumerate()
            .map(|(i, &x)| (i, objective(x)))
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let i = best.0;
        let left = grid[i.saturating_sub(1)];
        let right = grid[(i + 1).min(steps)];
        let golden = golden_section(objective, left, right, opts.alpha_tol);

        // I'(alpha) + lambda C' has a sign change inside the bracket at an
        // interior optimum; the analytic slope locates it to full precision.
        let foc = |x: f64| mi_rate_from_nnr_derivative(sys, x).unwrap_or(f64::NAN) + weighted;
        let (g_left, g_right) = (foc(left), foc(right));
        let mut alpha = golden;
        if g_left < 0.0 && g_right > 0.0 {
            let root = bisect_sign_change(foc, left, right);
            if objective(root) <= objective(golden) + 1e-14 * objective(golden).abs() {
                alpha = root;
            }
        }
        let at_boundary = i == 0 && g_left >= 0.0;
        if at_boundary {
            alpha = lo;
        }
        (alpha, at_boundary)
    };

    let mi = mi_rate_from_nnr(sys, alpha_opt)?.total;
    let cost = nnr_cost(sys, alpha_opt)?;
    Ok(TradeoffPoint {
        lambda,
        alpha_opt,
        mi,
        cost,
        objective: mi + lambda * cost,
        foc_residual: (mi_slope_numeric(sys, alpha_opt)? + weighted).abs(),
        at_boundary,
    })
}

/// [`tradeoff_point`] for each weight, in input order.
pub fn tradeoff_curve(sys: &SystemParams, lambdas: &[f64]) -> Result<Vec<TradeoffPoint>> {
    if lambdas.is_empty() {
        return Err(Error::EmptyInput);
    }
    lambdas.par_iter().map(|&l| tradeoff_point(sys, l)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryStatus {
    Ok,
    /// `n = 0` with `m + w > 0`: the uplink rate diverges.
    UplinkUnbounded,
    /// `m + w = 0` with `n > 0`: the downlink rate diverges.
    DownlinkUnbounded,
}

impl BoundaryStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryStatus::Ok => "Ok",
            BoundaryStatus::UplinkUnbounded => "UplinkUnbounded",
            BoundaryStatus::DownlinkUnbounded => "DownlinkUnbounded",
        }
    }
}

pub fn boundary_diagnostics(masks: &MaskParams, w: f64) -> BoundaryStatus {
    let p = masks.downlink_total(w);
    if masks.n() == 0.0 && p > 0.0 {
        BoundaryStatus::UplinkUnbounded
    } else if p == 0.0 && masks.n() > 0.0 {
        BoundaryStatus::DownlinkUnbounded
    } else {
        BoundaryStatus::Ok
    }
}

/// One cell of a robustness sweep: masks sized for the nominal process
/// noise, evaluated against the true one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessCell {
    pub m: f64,
    pub w_true: f64,
    /// `alpha_design (m + w_nominal)`.
    pub n: f64,
    /// `n / (m + w_true)`.
    pub achieved_alpha: f64,
    /// `achieved_alpha / alpha_design - 1`.
    pub relative_deviation: f64,
    pub mi: f64,
}

/// Cells in row-major order: `m` outer, `w_true` inner.
pub fn robustness_sweep(
    sys: &SystemParams,
    alpha_design: f64,
    ms: &[f64],
    w_trues: &[f64],
) -> Result<Vec<RobustnessCell>> {
    if alpha_design.is_nan() || alpha_design <= 0.0 {
        return Err(Error::NonPositiveAlpha);
    }
    checked_finite("alpha", alpha_design)?;
    if ms.is_empty() || w_trues.is_empty() {
        return Err(Error::EmptyInput);
    }
    for &m in ms {
        if checked_finite("m", m)? < 0.0 {
            return Err(Error::NegativeInput("m"));
        }
    }
    for &w in w_trues {
        if checked_finite("w_true", w)? < 0.0 {
            return Err(Error::NegativeInput("w_true"));
        }
    }
    let cells: Vec<(f64, f64)> = ms.iter().flat_map(|&m| w_trues.iter().map(move |&w| (m, w))).collect();
    cells
        .par_iter()
        .map(|&(m, w_true)| {
            if m + w_true == 0.0 {
                return Err(Error::IllDefinedNnr);
            }
            let n = alpha_design * (m + sys.w());
            let achieved_alpha = n / (m + w_true);
            Ok(RobustnessCell {
                m,
                w_true,
                n,
                achieved_alpha,
                relative_deviation: achieved_alpha / alpha_design - 1.0,
                mi: mi_rate_from_nnr(sys, achieved_alpha)?.total,
            })
        })
        .collect()
}
