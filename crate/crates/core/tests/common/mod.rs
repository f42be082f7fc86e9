//! Test-side reference computations, written without the library's oracle.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Loop parameters for the reference model.
#[derive(Debug, Clone, Copy)]
pub struct Loop {
    pub a: f64,
    pub k: f64,
    pub w: f64,
    pub m: f64,
    pub n: f64,
}

impl Loop {
    /// Random stable loop with `n > 0` and `m + w > 0`.
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let a = rng.gen_range(-1.5..1.5);
        let k = loop {
            let k = rng.gen_range(-1.0 - a..1.0 - a) * 0.98;
            if f64::abs(k) > 0.05 {
                break k;
            }
        };
        let m = if rng.gen_bool(0.25) {
            0.0
        } else {
            rng.gen_range(0.0..0.3)
        };
        Self {
            a,
            k,
            w: rng.gen_range(0.01..0.5),
            m,
            n: rng.gen_range(0.01..1.0),
        }
    }
}

/// Every signal as a row vector of coefficients on the independent unit
/// noises `[W_1..W_T, N_0..N_T, M_0..M_{T-1}]`.
pub struct LinearModel {
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub xhat: Vec<DVector<f64>>,
}

impl LinearModel {
    pub fn build(l: &Loop, horizon: usize) -> Self {
        let t_max = horizon;
        let dim = t_max + (t_max + 1) + t_max;
        let w_col = |t: usize| t - 1;
        let n_col = |t: usize| t_max + t;
        let m_col = |t: usize| 2 * t_max + 1 + t;
        let unit = |col: usize, scale: f64| {
            let mut v = DVector::zeros(dim);
            v[col] = scale;
            v
        };
        let p = l.m + l.w;

        let mut x = vec![DVector::zeros(dim)];
        let mut y = vec![&x[0] + unit(n_col(0), l.n.sqrt())];
        let mut xhat = vec![DVector::zeros(dim)];
        let mut s_pred = p;
        for t in 1..=t_max {
            let u_prev = &y[t - 1] * l.k;
            let v_prev = &u_prev + unit(m_col(t - 1), l.m.sqrt());
            let xt = &x[t - 1] * l.a + &v_prev + unit(w_col(t), l.w.sqrt());
            let yt = &xt + unit(n_col(t), l.n.sqrt());
            let gain = s_pred / (s_pred + l.n);
            let pred = &xhat[t - 1] * l.a + &u_prev;
            let est = &pred + (&yt - &pred) * gain;
            s_pred = l.a * l.a * (1.0 - gain) * s_pred + p;
            x.push(xt);
            y.push(yt);
            xhat.push(est);
        }
        Self { x, y, xhat }
    }
}

fn gram(rows: &[&DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i].dot(rows[j]))
}

fn log_det(m: DMatrix<f64>) -> f64 {
    let chol = m.cholesky().expect("covariance block must be positive definite");
    2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `I(A; B)` for jointly Gaussian blocks given as coefficient rows.
pub fn gaussian_mi(a: &[&DVector<f64>], b: &[&DVector<f64>]) -> f64 {
    let mut joint: Vec<&DVector<f64>> = a.to_vec();
    joint.extend_from_slice(b);
    0.5 * (log_det(gram(a)) + log_det(gram(b)) - log_det(gram(&joint)))
}

/// Closed-form `sum_t 1/2 ln(1 + S_t/n) + T/2 ln(1 + k^2 n / p)` from the
/// prediction-covariance recursion.
pub fn closed_form_total(l: &Loop, horizon: usize) -> f64 {
    let p = l.m + l.w;
    let mut s = p;
    let mut forward = 0.0;
    for _ in 0..horizon {
        forward += 0.5 * (s / l.n).ln_1p();
        let gain = s / (s + l.n);
        s = l.a * l.a * (1.0 - gain) * s + p;
    }
    forward + horizon as f64 * 0.5 * (l.k * l.k * l.n / p).ln_1p()
}

/// `log10`-spaced points from `10^lo` to `10^hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}
