//! Monte Carlo closed-loop trajectories: plant, both privacy masks and the
//! cloud-side Kalman filter.
//!
//! Noise draws come from [`NoiseStream`], keyed by seed, trajectory and
//! time, so a batch is bit-reproducible regardless of how many workers
//! generate it. Moment estimators average each trajectory over time after a
//! burn-in and report standard errors across trajectories.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{MaskParams, SystemParams};
use crate::riccati::{gain_or_zero, prediction_covariances};
use crate::rng::NoiseStream;

pub const DEFAULT_BURN_IN: usize = 1_000;

pub const CSV_HEADER: &str = "traj,t,x,n,y,u,m,v,w,xhat_pred,xhat,s_pred,gain";

/// Every loop quantity at one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
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

/// Deterministic filter quantities `S_t = Σ_{t|t-1}` and `l_t` for
/// `t = 0..=T`; `S_0 = l_0 = 0` because the initial state is known.
fn filter_schedule(sys: &SystemParams, masks: &MaskParams, horizon: usize) -> (Vec<f64>, Vec<f64>) {
    let n = masks.n();
    let mut s_pred = Vec::with_capacity(horizon + 1);
    s_pred.push(0.0);
    s_pred.extend(prediction_covariances(
        sys.a(),
        masks.downlink_total(sys.w()),
        n,
        horizon,
    ));
    let gains = s_pred.iter().map(|&s| gain_or_zero(s, n)).collect();
    (s_pred, gains)
}

/// Runs one trajectory, handing each step to `visit`.
fn run_trajectory(
    sys: &SystemParams,
    masks: &MaskParams,
    s_pred: &[f64],
    gains: &[f64],
    stream: NoiseStream,
    mut visit: impl FnMut(&StepRecord),
) {
    let (a, k) = (sys.a(), sys.k());
    let sd_n = masks.n().sqrt();
    let sd_m = masks.m().sqrt();
    let sd_w = sys.w().sqrt();

    let z = stream.step(0);
    let n0 = sd_n * z[0];
    let m0 = sd_m * z[1];
    let y0 = n0;
    let u0 = k * y0;
    let mut rec = StepRecord {
        t: 0,
        x: 0.0,
        n: n0,
        y: y0,
        u: u0,
        m: m0,
        v: u0 + m0,
        w: 0.0,
        xhat_pred: 0.0,
        xhat: 0.0,
        s_pred: 0.0,
        gain: 0.0,
    };
    visit(&rec);
    for t in 1..s_pred.len() {
        let z = stream.step(t as u64);
        let (nt, mt, wt) = (sd_n * z[0], sd_m * z[1], sd_w * z[2]);
        let x = a * rec.x + rec.v + wt;
        let xhat_pred = a * rec.xhat + rec.u;
        let gain = gains[t];
        let y = x + nt;
        let xhat = xhat_pred + gain * (y - xhat_pred);
        let u = k * y;
        rec = StepRecord {
            t,
            x,
            n: nt,
            y,
            u,
            m: mt,
            v: u + mt,
            w: wt,
            xhat_pred,
            xhat,
            s_pred: s_pred[t],
            gain,
        };
        visit(&rec);
    }
}

/// Stored samples of one trajectory, indexed by `t = 0..=T`. `Y`, `U` and
/// `V` are recomputed on access exactly as the simulation computed them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub n: Vec<f64>,
    pub m: Vec<f64>,
    pub w: Vec<f64>,
    pub xhat_pred: Vec<f64>,
    pub xhat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub sys: SystemParams,
    pub masks: MaskParams,
    pub seed: u64,
    pub horizon: usize,
    /// `S_t`, shared by every trajectory.
    pub s_pred: Vec<f64>,
    /// `l_t`, shared by every trajectory.
    pub gains: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn y(&self, traj: usize, t: usize) -> f64 {
        let tr = &self.trajectories[traj];
        tr.x[t] + tr.n[t]
    }

    pub fn u(&self, traj: usize, t: usize) -> f64 {
        self.sys.k() * self.y(traj, t)
    }

    pub fn v(&self, traj: usize, t: usize) -> f64 {
        self.u(traj, t) + self.trajectories[traj].m[t]
    }

    pub fn record(&self, traj: usize, t: usize) -> StepRecord {
        let tr = &self.trajectories[traj];
        StepRecord {
            t,
            x: tr.x[t],
            n: tr.n[t],
            y: self.y(traj, t),
            u: self.u(traj, t),
            m: tr.m[t],
            v: self.v(traj, t),
            w: tr.w[t],
            xhat_pred: tr.xhat_pred[t],
            xhat: tr.xhat[t],
            s_pred: self.s_pred[t],
            gain: self.gains[t],
        }
    }

    /// Dumps every step of every trajectory as CSV under [`CSV_HEADER`].
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for traj in 0..self.len() {
            for t in 0..=self.horizon {
                let r = self.record(traj, t);
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    traj, t, r.x, r.n, r.y, r.u, r.m, r.v, r.w, r.xhat_pred, r.xhat, r.s_pred, r.gain
                )?;
            }
        }
        Ok(())
    }

    /// Time-averaged moments per trajectory after `burn_in` steps.
    pub fn moments(&self, burn_in: usize) -> Result<Vec<TrajectoryMoments>> {
        check_moment_preconditions(&self.sys, self.horizon, burn_in)?;
        Ok((0..self.len())
            .map(|traj| {
                let mut acc = MomentAccumulator::new(burn_in);
                for t in 0..=self.horizon {
                    acc.push(&self.record(traj, t));
                }
                acc.finish()
            })
            .collect())
    }
}

fn check_run(horizon: usize, trajectories: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if trajectories == 0 || trajectories > u32::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "trajectory count must be in 1..=2^32-1, got {trajectories}"
        )));
    }
    Ok(())
}

/// Generates `trajectories` independent closed-loop runs of `horizon` steps.
pub fn simulate(
    sys: &SystemParams,
    masks: &MaskParams,
    horizon: usize,
    trajectories: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    check_run(horizon, trajectories)?;
    let (s_pred, gains) = filter_schedule(sys, masks, horizon);
    let runs = (0..trajectories)
        .into_par_iter()
        .map(|traj| {
            let mut tr = Trajectory {
                x: Vec::with_capacity(horizon + 1),
                n: Vec::with_capacity(horizon + 1),
                m: Vec::with_capacity(horizon + 1),
                w: Vec::with_capacity(horizon + 1),
                xhat_pred: Vec::with_capacity(horizon + 1),
                xhat: Vec::with_capacity(horizon + 1),
            };
            run_trajectory(sys, masks, &s_pred, &gains, NoiseStream::new(seed, traj as u32), |r| {
                tr.x.push(r.x);
                tr.n.push(r.n);
                tr.m.push(r.m);
                tr.w.push(r.w);
                tr.xhat_pred.push(r.xhat_pred);
                tr.xhat.push(r.xhat);
            });
            tr
        })
        .collect();
    Ok(TrajectoryBatch {
        sys: *sys,
        masks: *masks,
        seed,
        horizon,
        s_pred,
        gains,
        trajectories: runs,
    })
}

/// Per-trajectory time averages over the post-burn-in steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryMoments {
    /// Mean of `X_t^2`.
    pub state_sq: f64,
    /// Mean of `U_t^2`.
    pub command_sq: f64,
    /// Mean of `(X_t - X̂_{t|t-1})^2`.
    pub pred_err_sq: f64,
    /// Mean of `X̂_t (X_t - X̂_t)`.
    pub estimate_error_cross: f64,
    /// Mean of `ν_t ν_{t-1}` with `ν_t = Y_t - X̂_{t|t-1}`.
    pub innovation_lag1: f64,
    /// Mean of `ν_t^2`.
    pub innovation_sq: f64,
    pub count: usize,
}

struct MomentAccumulator {
    burn_in: usize,
    state_sq: f64,
    command_sq: f64,
    pred_err_sq: f64,
    cross: f64,
    lag1: f64,
    innov_sq: f64,
    prev_innov: Option<f64>,
    count: usize,
}

impl MomentAccumulator {
    fn new(burn_in: usize) -> Self {
        Self {
            burn_in,
            state_sq: 0.0,
            command_sq: 0.0,
            pred_err_sq: 0.0,
            cross: 0.0,
            lag1: 0.0,
            innov_sq: 0.0,
            prev_innov: None,
            count: 0,
        }
    }

    #[inline]
    fn push(&mut self, r: &StepRecord) {
        if r.t < self.burn_in {
            return;
        }
        let e = r.x - r.xhat_pred;
        let nu = r.y - r.xhat_pred;
        self.state_sq += r.x * r.x;
        self.command_sq += r.u * r.u;
        self.pred_err_sq += e * e;
        self.cross += r.xhat * (r.x - r.xhat);
        self.innov_sq += nu * nu;
        if let Some(prev) = self.prev_innov {
            self.lag1 += nu * prev;
        }
        self.prev_innov = Some(nu);
        self.count += 1;
    }

    fn finish(self) -> TrajectoryMoments {
        let c = self.count as f64;
        TrajectoryMoments {
            state_sq: self.state_sq / c,
            command_sq: self.command_sq / c,
            pred_err_sq: self.pred_err_sq / c,
            estimate_error_cross: self.cross / c,
            innovation_lag1: if self.count > 1 { self.lag1 / (c - 1.0) } else { 0.0 },
            innovation_sq: self.innov_sq / c,
            count: self.count,
        }
    }
}

fn check_moment_preconditions(sys: &SystemParams, horizon: usize, burn_in: usize) -> Result<()> {
    if !sys.stability().stable {
        return Err(Error::UnstableClosedLoop);
    }
    if horizon <= burn_in {
        return Err(Error::HorizonTooShort { horizon, burn_in });
    }
    Ok(())
}

/// Monte Carlo run settings for the streaming estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarlo {
    pub horizon: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub burn_in: usize,
}

/// Same moments as [`TrajectoryBatch::moments`] on the batch that
/// [`simulate`] would produce, without storing the trajectories.
pub fn monte_carlo_moments(sys: &SystemParams, masks: &MaskParams, mc: &MonteCarlo) -> Result<Vec<TrajectoryMoments>> {
    check_run(mc.horizon, mc.trajectories)?;
    check_moment_preconditions(sys, mc.horizon, mc.burn_in)?;
    let (s_pred, gains) = filter_schedule(sys, masks, mc.horizon);
    Ok((0..mc.trajectories)
        .into_par_iter()
        .map(|traj| {
            let mut acc = MomentAccumulator::new(mc.burn_in);
            run_trajectory(
                sys,
                masks,
                &s_pred,
                &gains,
                NoiseStream::new(mc.seed, traj as u32),
                |r| acc.push(r),
            );
            acc.finish()
        })
        .collect())
}

/// Mean across trajectories with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    /// Whether `value` lies within `sigmas` standard errors of the mean.
    pub fn covers(&self, value: f64, sigmas: f64) -> bool {
        (self.mean - value).abs() <= sigmas * self.std_err
    }
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// Mean of per-trajectory values and the between-trajectory standard error.
/// A single trajectory has an infinite standard error.
pub fn across_trajectories(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let std_err = if values.len() < 2 {
        f64::INFINITY
    } else {
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&dev) / (n - 1.0) / n).sqrt()
    };
    if mean == 0.0 && values.iter().all(|&v| v == 0.0) {
        return Estimate {
            mean: 0.0,
            std_err: 0.0,
        };
    }
    Estimate { mean, std_err }
}

pub fn cost_estimate(moments: &[TrajectoryMoments], q: f64, r: f64) -> Estimate {
    let per: Vec<f64> = moments.iter().map(|m| q * m.state_sq + r * m.command_sq).collect();
    across_trajectories(&per)
}

pub fn prediction_error_estimate(moments: &[TrajectoryMoments]) -> Estimate {
    let per: Vec<f64> = moments.iter().map(|m| m.pred_err_sq).collect();
    across_trajectories(&per)
}

/// Time-averaged `q X_t^2 + r U_t^2` after the default burn-in.
pub fn empirical_cost(batch: &TrajectoryBatch, q: f64, r: f64) -> Result<Estimate> {
    empirical_cost_with_burn_in(batch, q, r, DEFAULT_BURN_IN)
}

pub fn empirical_cost_with_burn_in(batch: &TrajectoryBatch, q: f64, r: f64, burn_in: usize) -> Result<Estimate> {
    Ok(cost_estimate(&batch.moments(burn_in)?, q, r))
}

/// Second moment of the one-step prediction error `X_t - X̂_{t|t-1}`.
pub fn empirical_prediction_error(batch: &TrajectoryBatch) -> Result<Estimate> {
    empirical_prediction_error_with_burn_in(batch, DEFAULT_BURN_IN)
}

pub fn empirical_prediction_error_with_burn_in(batch: &TrajectoryBatch, burn_in: usize) -> Result<Estimate> {
    Ok(prediction_error_estimate(&batch.moments(burn_in)?))
}
