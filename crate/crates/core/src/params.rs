//! Validated parameter containers.
//!
//! Every noise quantity here is a variance, never a standard deviation.
//! Information quantities derived from these parameters are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(name))
    }
}

fn variance(name: &'static str, v: f64) -> Result<f64> {
    let v = finite(name, v)?;
    if v < 0.0 {
        return Err(Error::NegativeVariance(name));
    }
    Ok(v)
}

/// Plant, controller and cost constants of the scalar closed loop
/// `X_t = a X_{t-1} + U_{t-1} + M_{t-1} + W_t`, `U_t = k (X_t + N_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    a: f64,
    k: f64,
    w: f64,
    q: f64,
    r: f64,
}

impl SystemParams {
    /// Validates and builds the parameter set.
    ///
    /// `w` is the process-noise variance; `q` and `r` are the state and
    /// input cost weights. `q = r = 0` is accepted.
    pub fn new(a: f64, k: f64, w: f64, q: f64, r: f64) -> Result<Self> {
        let a = finite("a", a)?;
        let k = finite("k", k)?;
        if k == 0.0 {
            return Err(Error::ZeroGain);
        }
        let w = variance("w", w)?;
        let q = finite("q", q)?;
        let r = finite("r", r)?;
        if q < 0.0 {
            return Err(Error::NegativeWeight("q"));
        }
        if r < 0.0 {
            return Err(Error::NegativeWeight("r"));
        }
        Ok(Self { a, k, w, q, r })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Process-noise variance.
    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Same system with a different process-noise variance.
    pub fn with_w(&self, w: f64) -> Result<Self> {
        Self::new(self.a, self.k, w, self.q, self.r)
    }

    pub fn stability(&self) -> Stability {
        closed_loop_stable(self)
    }
}

/// Uplink and downlink mask variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    m: f64,
    n: f64,
}

impl MaskParams {
    /// `m` is the downlink (command) mask variance, `n` the uplink
    /// (measurement) mask variance.
    pub fn new(m: f64, n: f64) -> Result<Self> {
        Ok(Self {
            m: variance("m", m)?,
            n: variance("n", n)?,
        })
    }

    /// Downlink mask variance.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Uplink mask variance.
    pub fn n(&self) -> f64 {
        self.n
    }

    /// Combined variance `m + w` entering the plant between two samples.
    pub fn downlink_total(&self, w: f64) -> f64 {
        self.m + w
    }
}

/// Noise-to-noise ratio `alpha = n / (m + w)` together with `p = m + w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nnr {
    pub alpha: f64,
    pub p: f64,
}

/// Computes the noise-to-noise ratio of a mask design for process-noise
/// variance `w`.
pub fn nnr_of(masks: &MaskParams, w: f64) -> Result<Nnr> {
    let w = variance("w", w)?;
    let p = masks.m + w;
    if p == 0.0 {
        return Err(Error::IllDefinedNnr);
    }
    if masks.n == 0.0 {
        return Err(Error::ZeroUplink);
    }
    Ok(Nnr { alpha: masks.n / p, p })
}

/// Closed-loop stability of `X_t = (a + k) X_{t-1} + noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stability {
    pub stable: bool,
    /// `1 - (a + k)^2`; positive iff stable.
    pub margin: f64,
}

pub fn closed_loop_stable(sys: &SystemParams) -> Stability {
    let pole = sys.a + sys.k;
    Stability {
        stable: pole.abs() < 1.0,
        margin: 1.0 - pole * pole,
    }
}
