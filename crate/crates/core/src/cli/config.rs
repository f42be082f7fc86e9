//! Run configuration: command-line flags layered over an optional JSON file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use crate::design::masks_from_nnr;
use crate::error::{Error, Result};
use crate::params::{MaskParams, SystemParams};
use crate::sim::DEFAULT_BURN_IN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// `lo:hi:count`, inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Range {
    pub fn parse(name: &str, s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("{name} must be lo:hi:count, got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !lo.is_finite() || !hi.is_finite() || count == 0 || hi < lo || (count > 1 && hi == lo) {
            return Err(Error::InvalidArgument(format!(
                "{name} needs finite lo <= hi, count >= 1 and lo < hi when count > 1, got `{s}`"
            )));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn linear(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.hi
                } else {
                    self.lo + step * i as f64
                }
            })
            .collect()
    }

    /// Log-spaced points; requires `lo > 0`.
    pub fn logarithmic(&self, name: &str) -> Result<Vec<f64>> {
        if self.lo <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive for log spacing"
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.lo]);
        }
        let (l, h) = (self.lo.log10(), self.hi.log10());
        let last = self.count - 1;
        Ok((0..self.count)
            .map(|i| match i {
                0 => self.lo,
                i if i == last => self.hi,
                i => 10f64.powf(l + (h - l) * i as f64 / last as f64),
            })
            .collect())
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file and then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Open-loop plant gain (required).
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Feedback gain, nonzero (required).
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Process noise variance [default: 0.05].
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<f64>,
    /// State cost weight [default: 1].
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    /// Control cost weight [default: 1].
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    /// Downlink mask variance [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    /// Uplink mask variance [default: 0.05, or alpha*(m+w) with --alpha].
    #[arg(long, allow_hyphen_values = true)]
    pub n: Option<f64>,
    /// Noise-to-noise ratio n/(m+w); sets n when --n is absent.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Comma-separated trade-off weights.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Horizon in steps [default: 10 for verify, 100000 for simulate].
    #[arg(long = "T")]
    pub horizon: Option<usize>,
    /// Monte Carlo trajectories [default: 64].
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Random seed [default: 7].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps discarded before time averages [default: 1000].
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Worker threads for parallel sweeps and trajectories.
    #[arg(long)]
    pub threads: Option<usize>,
    /// lo:hi:count, linear [default: 0.01:0.5:50].
    #[arg(long, allow_hyphen_values = true)]
    pub m_range: Option<String>,
    /// lo:hi:count, linear [default: 0.01:0.5:50].
    #[arg(long, allow_hyphen_values = true)]
    pub n_range: Option<String>,
    /// lo:hi:count, logarithmic [default: 0.01:100:601].
    #[arg(long)]
    pub alpha_range: Option<String>,
    /// JSON file with any of the flag values, keyed by flag name.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the result to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Report information quantities in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
    /// Add the `1/2 ln s` comparison column to alpha sweeps.
    #[arg(long)]
    pub root_form: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    a: Option<f64>,
    k: Option<f64>,
    w: Option<f64>,
    q: Option<f64>,
    r: Option<f64>,
    m: Option<f64>,
    n: Option<f64>,
    alpha: Option<f64>,
    lambda: Option<Vec<f64>>,
    #[serde(rename = "T")]
    horizon: Option<usize>,
    trajectories: Option<usize>,
    seed: Option<u64>,
    burn_in: Option<usize>,
    threads: Option<usize>,
    m_range: Option<String>,
    n_range: Option<String>,
    alpha_range: Option<String>,
    output: Option<PathBuf>,
    format: Option<Format>,
    bits: Option<bool>,
    root_form: Option<bool>,
}

fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("bad config {}: {e}", path.display())))
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a: Option<f64>,
    pub k: Option<f64>,
    pub w: f64,
    pub q: f64,
    pub r: f64,
    pub m: f64,
    /// Uplink variance; `None` defers to `alpha` or the default.
    pub n: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Vec<f64>,
    pub lambda_given: bool,
    pub horizon: Option<usize>,
    pub trajectories: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub threads: Option<usize>,
    pub m_range: String,
    pub n_range: String,
    pub alpha_range: String,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub bits: bool,
    pub root_form: bool,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => read_config(p)?,
            None => FileConfig::default(),
        };
        let lambda = args.lambda.clone().or(file.lambda);
        Ok(Self {
            a: args.a.or(file.a),
            k: args.k.or(file.k),
            w: args.w.or(file.w).unwrap_or(0.05),
            q: args.q.or(file.q).unwrap_or(1.0),
            r: args.r.or(file.r).unwrap_or(1.0),
            m: args.m.or(file.m).unwrap_or(0.0),
            n: args.n.or(file.n),
            alpha: args.alpha.or(file.alpha),
            lambda_given: lambda.is_some(),
            lambda: lambda.unwrap_or_else(|| vec![0.0]),
            horizon: args.horizon.or(file.horizon),
            trajectories: args.trajectories.or(file.trajectories).unwrap_or(64),
            seed: args.seed.or(file.seed).unwrap_or(7),
            burn_in: args.burn_in.or(file.burn_in).unwrap_or(DEFAULT_BURN_IN),
            threads: args.threads.or(file.threads),
            m_range: args
                .m_range
                .clone()
                .or(file.m_range)
                .unwrap_or_else(|| "0.01:0.5:50".into()),
            n_range: args
                .n_range
                .clone()
                .or(file.n_range)
                .unwrap_or_else(|| "0.01:0.5:50".into()),
            alpha_range: args
                .alpha_range
                .clone()
                .or(file.alpha_range)
                .unwrap_or_else(|| "0.01:100:601".into()),
            output: args.output.clone().or(file.output),
            format: args.format.or(file.format),
            bits: args.bits || file.bits.unwrap_or(false),
            root_form: args.root_form || file.root_form.unwrap_or(false),
        })
    }

    fn required(name: &'static str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| Error::InvalidArgument(format!("--{name} is required")))
    }

    pub fn a(&self) -> Result<f64> {
        Self::required("a", self.a)
    }

    pub fn k(&self) -> Result<f64> {
        Self::required("k", self.k)
    }

    pub fn system(&self) -> Result<SystemParams> {
        SystemParams::new(self.a()?, self.k()?, self.w, self.q, self.r)
    }

    /// Explicit `n` wins, then `n = alpha (m + w)`, then `n = 0.05`.
    pub fn masks(&self) -> Result<MaskParams> {
        match (self.n, self.alpha) {
            (Some(n), _) => MaskParams::new(self.m, n),
            (None, Some(alpha)) => masks_from_nnr(alpha, self.w, self.m),
            (None, None) => MaskParams::new(self.m, 0.05),
        }
    }
}
