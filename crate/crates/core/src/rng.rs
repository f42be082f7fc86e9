//! Counter-based Gaussian noise streams.
//!
//! Every draw is a pure function of `(seed, trajectory, time, channel)`, so
//! trajectories can be generated in any order or on any number of workers
//! and still reproduce bit-for-bit. The block cipher is Philox4x32-10.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Noise channels drawn at each time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Uplink mask `N_t`.
    Uplink,
    /// Downlink mask `M_t`.
    Downlink,
    /// Process noise `W_t`.
    Process,
}

/// Standard normal draws for one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    key: [u32; 2],
    trajectory: u32,
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
fn box_muller(block: [u32; 4]) -> (f64, f64) {
    let x = (u64::from(block[0]) << 32) | u64::from(block[1]);
    let y = (u64::from(block[2]) << 32) | u64::from(block[3]);
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((x >> 11) + 1) as f64 * TWO_POW_M53;
    let u2 = (y >> 11) as f64 * TWO_POW_M53;
    let radius = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (radius * c, radius * s)
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u32) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            trajectory,
        }
    }

    #[inline]
    fn block(&self, t: u64, block: u32) -> [u32; 4] {
        philox4x32_10([t as u32, (t >> 32) as u32, self.trajectory, block], self.key)
    }

    /// Standard normal draws `(uplink, downlink, process)` at time `t`.
    #[inline]
    pub fn step(&self, t: u64) -> [f64; 3] {
        let (z0, z1) = box_muller(self.block(t, 0));
        let (z2, _) = box_muller(self.block(t, 1));
        [z0, z1, z2]
    }

    pub fn draw(&self, t: u64, channel: Channel) -> f64 {
        let z = self.step(t);
        match channel {
            Channel::Uplink => z[0],
            Channel::Downlink => z[1],
            Channel::Process => z[2],
        }
    }
}
