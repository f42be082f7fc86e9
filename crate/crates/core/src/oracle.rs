//! Exact finite-horizon mutual and directed information for the jointly
//! Gaussian closed loop.
//!
//! Every loop signal is a linear function of the independent noises
//! `W_1..W_T`, `N_0..N_T`, `M_0..M_{T-1}`. Propagating those coefficients
//! through the loop gives a square root `L D^{1/2}` of the covariance of any
//! set of signals. Log-determinants and conditional variances come from QR
//! factorizations of that root, which avoids squaring its condition number.
//! Nothing here uses the closed-form rate expressions, which makes this
//! module the reference the closed forms are checked against.
//!
//! The initial state and the initial estimate are the constant 0, so `X_0`
//! and `X̂_0` carry no information and are not part of the signal layout.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::finite_horizon_info;
use crate::params::{MaskParams, SystemParams};
use crate::riccati::{gain_or_zero, prediction_covariances};

pub const MAX_COVARIANCE_HORIZON: usize = 64;
pub const MAX_DIRECTED_HORIZON: usize = 32;
pub const MAX_REPORT_HORIZON: usize = 20;

/// Absolute tolerance of every consistency check.
pub const CHECK_TOL: f64 = 1e-9;

const PIVOT_RTOL: f64 = 1e-12;

/// A loop signal at a given time index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Signal {
    /// `X_t`, `t = 1..=T`.
    State(usize),
    /// `Y_t = X_t + N_t`, `t = 0..=T`.
    Measurement(usize),
    /// Filter estimate `X̂_t`, `t = 1..=T`.
    Estimate(usize),
    /// Raw command `U_t = k Y_t`, `t = 0..T`.
    Command(usize),
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::State(t) => write!(f, "X_{t}"),
            Signal::Measurement(t) => write!(f, "Y_{t}"),
            Signal::Estimate(t) => write!(f, "Xhat_{t}"),
            Signal::Command(t) => write!(f, "U_{t}"),
        }
    }
}

pub fn states(horizon: usize) -> Vec<Signal> {
    (1..=horizon).map(Signal::State).collect()
}

pub fn measurements(horizon: usize) -> Vec<Signal> {
    (0..=horizon).map(Signal::Measurement).collect()
}

pub fn estimates(horizon: usize) -> Vec<Signal> {
    (1..=horizon).map(Signal::Estimate).collect()
}

/// Which cloud-side sequence the directed information is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Target {
    Measurement,
    Estimate,
}

/// Noise coefficients of every loop signal over one horizon.
struct LoopExpansion {
    horizon: usize,
    variances: Vec<f64>,
    state: Vec<Vec<f64>>,
    measurement: Vec<Vec<f64>>,
    estimate: Vec<Vec<f64>>,
}

impl LoopExpansion {
    fn new(sys: &SystemParams, masks: &MaskParams, horizon: usize) -> Self {
        let t_len = horizon;
        let dim = 3 * t_len + 1;
        let w_idx = |t: usize| t - 1;
        let n_idx = |t: usize| t_len + t;
        let m_idx = |t: usize| 2 * t_len + 1 + t;

        let mut variances = vec![0.0; dim];
        for t in 1..=t_len {
            variances[w_idx(t)] = sys.w();
        }
        for t in 0..=t_len {
            variances[n_idx(t)] = masks.n();
        }
        for t in 0..t_len {
            variances[m_idx(t)] = masks.m();
        }

        let (a, k, n) = (sys.a(), sys.k(), masks.n());
        let p = masks.downlink_total(sys.w());
        let s_pred = prediction_covariances(a, p, n, t_len);

        // index 0 holds the constant X_0 = 0 and X̂_0 = 0
        let mut state = vec![vec![0.0; dim]; t_len + 1];
        let mut measurement = vec![vec![0.0; dim]; t_len + 1];
        let mut estimate = vec![vec![0.0; dim]; t_len + 1];
        measurement[0][n_idx(0)] = 1.0;
        for t in 1..=t_len {
            let l = gain_or_zero(s_pred[t - 1], n);
            let mut x = vec![0.0; dim];
            let mut xh = vec![0.0; dim];
            for j in 0..dim {
                let u_prev = k * measurement[t - 1][j];
                x[j] = a * state[t - 1][j] + u_prev;
                xh[j] = (1.0 - l) * (a * estimate[t - 1][j] + u_prev);
            }
            x[m_idx(t - 1)] += 1.0;
            x[w_idx(t)] += 1.0;
            let mut y = x.clone();
            y[n_idx(t)] += 1.0;
            for j in 0..dim {
                xh[j] += l * y[j];
            }
            state[t] = x;
            measurement[t] = y;
            estimate[t] = xh;
        }
        Self {
            horizon,
            variances,
            state,
            measurement,
            estimate,
        }
    }

    fn coeffs(&self, s: Signal, k: f64) -> Result<Vec<f64>> {
        let t_len = self.horizon;
        let out_of_range = || Error::InvalidArgument(format!("signal {s} is outside horizon {t_len}"));
        match s {
            Signal::State(t) if (1..=t_len).contains(&t) => Ok(self.state[t].clone()),
            Signal::Measurement(t) if t <= t_len => Ok(self.measurement[t].clone()),
            Signal::Estimate(t) if (1..=t_len).contains(&t) => Ok(self.estimate[t].clone()),
            Signal::Command(t) if t < t_len => Ok(self.measurement[t].iter().map(|c| k * c).collect()),
            _ => Err(out_of_range()),
        }
    }
}

/// Covariance of a stacked set of loop signals together with a square
/// root `root` (signals by unit noises) with `cov = root root^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCovariance {
    pub horizon: usize,
    pub signals: Vec<Signal>,
    pub cov: DMatrix<f64>,
    pub root: DMatrix<f64>,
}

impl JointCovariance {
    pub fn from_root(horizon: usize, signals: Vec<Signal>, root: DMatrix<f64>) -> Self {
        let cov = &root * root.transpose();
        Self {
            horizon,
            signals,
            cov,
            root,
        }
    }

    pub fn index_of(&self, s: Signal) -> Option<usize> {
        self.signals.iter().position(|&x| x == s)
    }

    /// Covariance entry of two signals in the layout.
    pub fn get(&self, a: Signal, b: Signal) -> Option<f64> {
        Some(self.cov[(self.index_of(a)?, self.index_of(b)?)])
    }

    /// Symmetry within 1e-14 and eigenvalues no lower than `-1e-12 * trace`.
    pub fn is_psd(&self) -> bool {
        let n = self.cov.nrows();
        for i in 0..n {
            for j in 0..i {
                if (self.cov[(i, j)] - self.cov[(j, i)]).abs() > 1e-14 {
                    return false;
                }
            }
        }
        if n == 0 {
            return true;
        }
        let trace = self.cov.trace();
        let eig = SymmetricEigen::new(self.cov.clone());
        eig.eigenvalues.iter().all(|&e| e >= -1e-12 * trace)
    }

    fn indices(&self, block: &[Signal]) -> Result<Vec<usize>> {
        block
            .iter()
            .map(|&s| {
                self.index_of(s)
                    .ok_or_else(|| Error::InvalidArgument(format!("signal {s} is not in the covariance layout")))
            })
            .collect()
    }
}

fn block_label(block: &[Signal]) -> String {
    let names: Vec<String> = block.iter().map(|s| s.to_string()).collect();
    format!("{{{}}}", names.join(","))
}

/// Exact covariance of the requested signals.
pub fn joint_covariance(
    sys: &SystemParams,
    masks: &MaskParams,
    horizon: usize,
    signals: &[Signal],
) -> Result<JointCovariance> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if horizon > MAX_COVARIANCE_HORIZON {
        return Err(Error::HorizonTooLarge {
            horizon,
            max: MAX_COVARIANCE_HORIZON,
        });
    }
    let expansion = LoopExpansion::new(sys, masks, horizon);
    let rows = signals
        .iter()
        .map(|&s| expansion.coeffs(s, sys.k()))
        .collect::<Result<Vec<_>>>()?;
    let d = &expansion.variances;
    let len = signals.len();
    let sd: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    let root = DMatrix::from_fn(len, sd.len(), |i, c| rows[i][c] * sd[c]);
    let mut cov = DMatrix::zeros(len, len);
    for i in 0..len {
        for j in 0..=i {
            let v: f64 = rows[i].iter().zip(&rows[j]).zip(d).map(|((x, y), dv)| x * y * dv).sum();
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(JointCovariance {
        horizon,
        signals: signals.to_vec(),
        cov,
        root,
    })
}

/// `|R_jj|` of the QR factorization whose columns are the block's root
/// rows. `R_jj^2` is the variance of signal `j` given the earlier ones.
fn root_diag(cov: &JointCovariance, idx: &[usize]) -> Vec<f64> {
    let rows = cov.root.ncols().max(idx.len());
    let cols = DMatrix::from_fn(rows, idx.len(), |r, j| {
        if r < cov.root.ncols() {
            cov.root[(idx[j], r)]
        } else {
            0.0
        }
    });
    let r = cols.qr().r();
    (0..idx.len()).map(|j| r[(j, j)].abs()).collect()
}

/// Log-determinant of a block's covariance; fails on a conditional
/// variance below `1e-12 * max diagonal`.
fn log_det(cov: &JointCovariance, block: &[Signal]) -> Result<f64> {
    let idx = cov.indices(block)?;
    let max_diag = idx.iter().map(|&i| cov.cov[(i, i)]).fold(0.0, f64::max);
    let diag = root_diag(cov, &idx);
    if diag.iter().any(|&d| !(d * d > PIVOT_RTOL * max_diag)) {
        return Err(Error::SingularBlock(block_label(block)));
    }
    Ok(diag.iter().map(|d| 2.0 * d.ln()).sum())
}

/// `I(A; B) = 1/2 (log det Σ_AA + log det Σ_BB - log det Σ_[AB][AB])` in nats.
pub fn exact_mi(cov: &JointCovariance, block_a: &[Signal], block_b: &[Signal]) -> Result<f64> {
    if block_a.is_empty() || block_b.is_empty() {
        return Err(Error::EmptyInput);
    }
    if block_a.iter().any(|s| block_b.contains(s)) {
        return Err(Error::InvalidArgument("blocks must be disjoint".into()));
    }
    let joint: Vec<Signal> = block_a.iter().chain(block_b).copied().collect();
    Ok(0.5 * (log_det(cov, block_a)? + log_det(cov, block_b)? - log_det(cov, &joint)?))
}

/// `Var(target | given)`: the squared distance of the target's root row
/// from the span of the given rows.
pub fn conditional_variance(cov: &JointCovariance, target: Signal, given: &[Signal]) -> Result<f64> {
    let ti = cov.indices(&[target])?[0];
    let var = cov.cov[(ti, ti)];
    let mut idx = cov.indices(given)?;
    let max_given = idx.iter().map(|&i| cov.cov[(i, i)]).fold(0.0, f64::max);
    idx.push(ti);
    let diag = root_diag(cov, &idx);
    let (last, head) = diag.split_last().expect("target is always present");
    if head.iter().any(|&d| !(d * d > PIVOT_RTOL * max_given)) {
        return Err(Error::SingularBlock(block_label(given)));
    }
    let schur = last * last;
    let scale = var.max(f64::MIN_POSITIVE);
    if !(schur > PIVOT_RTOL * scale) {
        let mut all = given.to_vec();
        all.push(target);
        return Err(Error::SingularBlock(block_label(&all)));
    }
    Ok(schur)
}

/// `I(target; extra | given)` for scalar `target`, as half the log ratio of
/// conditional variances.
fn conditional_term(cov: &JointCovariance, target: Signal, given: &[Signal], extra: &[Signal]) -> Result<f64> {
    if extra.is_empty() {
        return Ok(0.0);
    }
    let coarse = conditional_variance(cov, target, given)?;
    let fine_given: Vec<Signal> = given.iter().chain(extra).copied().collect();
    let fine = conditional_variance(cov, target, &fine_given)?;
    Ok(0.5 * (coarse / fine).ln())
}

/// Forward and backward directed information over `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectedInfo {
    pub forward: f64,
    pub backward: f64,
    /// Per-step forward terms, index `t = 0..=T`.
    pub forward_terms: Vec<f64>,
    /// Per-step backward terms, index `t = 0..=T`.
    pub backward_terms: Vec<f64>,
}

/// Exact `I(X^T -> Z^T)` and `I(0*Z^{T-1} -> X^T)` with `Z` the chosen
/// cloud-side sequence.
///
/// Forward term `t` is `I(X^t; Z_t | Z^{t-1})`, backward term `t` is
/// `I(Z^{t-1}; X_t | X^{t-1})`. Their sum is `I(X^T; Z^T)`.
pub fn exact_directed_info(
    sys: &SystemParams,
    masks: &MaskParams,
    horizon: usize,
    target: Target,
) -> Result<DirectedInfo> {
    if horizon > MAX_DIRECTED_HORIZON {
        return Err(Error::HorizonTooLarge {
            horizon,
            max: MAX_DIRECTED_HORIZON,
        });
    }
    let xs = states(horizon);
    // cloud-side sequence indexed by time; None marks the constant X̂_0
    let zs: Vec<Option<Signal>> = match target {
        Target::Measurement => (0..=horizon).map(|t| Some(Signal::Measurement(t))).collect(),
        Target::Estimate => (0..=horizon).map(|t| (t > 0).then_some(Signal::Estimate(t))).collect(),
    };
    let mut layout = xs.clone();
    layout.extend(zs.iter().flatten().copied());
    let cov = joint_covariance(sys, masks, horizon, &layout)?;

    let z_upto = |t_excl: usize| -> Vec<Signal> { zs[..t_excl].iter().flatten().copied().collect() };
    let x_upto = |t_incl: usize| -> Vec<Signal> { xs[..t_incl].to_vec() };

    let mut forward_terms = vec![0.0; horizon + 1];
    let mut backward_terms = vec![0.0; horizon + 1];
    for t in 0..=horizon {
        if let Some(z) = zs[t] {
            // X^0 = X_0 is constant, so the t = 0 forward term vanishes
            forward_terms[t] = conditional_term(&cov, z, &z_upto(t), &x_upto(t))?;
        }
        if t >= 1 {
            backward_terms[t] = conditional_term(&cov, xs[t - 1], &x_upto(t - 1), &z_upto(t))?;
        }
    }
    Ok(DirectedInfo {
        forward: forward_terms.iter().sum(),
        backward: backward_terms.iter().sum(),
        forward_terms,
        backward_terms,
    })
}

/// One named comparison in a [`consistency_report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub pass: bool,
    /// Informational rows are reported but do not gate the overall result.
    pub informational: bool,
}

impl Check {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64, informational: bool) -> Self {
        let abs_err = (lhs - rhs).abs();
        Self {
            name: name.into(),
            lhs,
            rhs,
            abs_err,
            pass: abs_err <= CHECK_TOL,
            informational,
        }
    }
}

/// True when every non-informational check passed.
pub fn all_required_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.informational || c.pass)
}

/// `None` for a numerically singular block, other errors unchanged.
fn unless_singular<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingularBlock(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Cross-checks the closed-form information sums against the exact
/// Gaussian computation.
///
/// Required rows: conservation of information on `(X^T, Y^T)`, the closed
/// form forward and backward sums, equality of the totals against `Y^T`
/// and `X̂^T`, and each per-step uplink term. Informational rows show the
/// forward/backward split against `X̂^T` and the totals once `Y_0` is
/// adjoined to `X̂^T`. An informational row whose block is singular under
/// the pivot tolerance is omitted; a singular required block is an error.
pub fn consistency_report(sys: &SystemParams, masks: &MaskParams, horizon: usize) -> Result<Vec<Check>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if horizon > MAX_REPORT_HORIZON {
        return Err(Error::HorizonTooLarge {
            horizon,
            max: MAX_REPORT_HORIZON,
        });
    }
    if masks.n() == 0.0 || masks.downlink_total(sys.w()) == 0.0 {
        return Err(Error::DegenerateMasks);
    }
    let closed = finite_horizon_info(sys, masks, horizon)?;
    let via_y = exact_directed_info(sys, masks, horizon, Target::Measurement)?;
    let via_xhat = unless_singular(exact_directed_info(sys, masks, horizon, Target::Estimate))?;

    let xs = states(horizon);
    let ys = measurements(horizon);
    let xhs = estimates(horizon);
    let mut layout = xs.clone();
    layout.extend(&ys);
    layout.extend(&xhs);
    let cov = joint_covariance(sys, masks, horizon, &layout)?;
    let mi_y = exact_mi(&cov, &xs, &ys)?;
    let mi_xhat = exact_mi(&cov, &xs, &xhs)?;
    let mut xhat_y0 = xhs.clone();
    xhat_y0.push(Signal::Measurement(0));
    let mi_xhat_y0 = unless_singular(exact_mi(&cov, &xs, &xhat_y0))?;

    let mut checks = vec![
        Check::new("conservation", mi_y, via_y.forward + via_y.backward, false),
        Check::new("forward_sum", via_y.forward, closed.forward_sum, false),
        Check::new("backward_sum", via_y.backward, closed.backward_sum, false),
        Check::new("invertibility_totals", mi_xhat, mi_y, false),
    ];
    if let Some(mi) = mi_xhat_y0 {
        checks.push(Check::new("invertibility_totals_with_y0", mi, mi_y, true));
    }
    if let Some(d) = via_xhat {
        checks.extend([
            Check::new("estimate_conservation", mi_xhat, d.forward + d.backward, true),
            Check::new("estimate_forward_sum", d.forward, closed.forward_sum, true),
            Check::new("estimate_backward_sum", d.backward, closed.backward_sum, true),
        ]);
    }
    for t in 1..=horizon {
        checks.push(Check::new(
            format!("uplink_term_{t}"),
            via_y.forward_terms[t],
            closed.forward_terms[t - 1],
            false,
        ));
    }
    Ok(checks)
}
