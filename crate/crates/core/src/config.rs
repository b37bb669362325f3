use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Profile;

/// Guard factor for the step-size check `dt <= SAFETY * dr^2`.
pub const DT_SAFETY: f64 = 32.0;

/// Full run specification; the JSON config file mirrors these field names.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub r_max: f64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub profile: Profile,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_tail_threshold")]
    pub tail_threshold: f64,
    #[serde(default = "default_eta1")]
    pub eta1: f64,
    #[serde(default = "default_eta2")]
    pub eta2: f64,
    #[serde(default = "default_eta3")]
    pub eta3: f64,
    #[serde(default = "default_c_eta1")]
    pub c_eta1: f64,
    #[serde(default = "default_eps_small")]
    pub eps_small: f64,
}

fn default_stride() -> usize {
    10
}
fn default_tail_threshold() -> f64 {
    1e-6
}
fn default_eta1() -> f64 {
    0.5
}
fn default_eta2() -> f64 {
    // eta1^2 / 4 at the default eta1
    0.0625
}
fn default_eta3() -> f64 {
    0.0625 * 0.0625
}
fn default_c_eta1() -> f64 {
    4.0
}
fn default_eps_small() -> f64 {
    0.25
}

impl RunConfig {
    /// Desk-scale defaults: n = 1024, r_max = 16, dt = 1e-3.
    pub fn default_with(profile: Profile, t_end: f64) -> Self {
        Self {
            r_max: 16.0,
            n: 1024,
            dt: 1e-3,
            t_end,
            profile,
            snapshot_stride: default_stride(),
            tail_threshold: default_tail_threshold(),
            eta1: default_eta1(),
            eta2: default_eta2(),
            eta3: default_eta3(),
            c_eta1: default_c_eta1(),
            eps_small: default_eps_small(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::Config(format!(
                "n = {} must be a power of two >= 8",
                self.n
            )));
        }
        if self.r_max.is_nan() || self.r_max <= 0.0 {
            return Err(Error::Config("r_max must be positive".into()));
        }
        if self.dt.is_nan() || self.dt <= 0.0 {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.t_end < 0.0 {
            return Err(Error::Config(
                "t_end must be nonnegative (backward runs negate internally)".into(),
            ));
        }
        let dr = self.r_max / self.n as f64;
        let dt_max = DT_SAFETY * dr * dr;
        if self.dt > dt_max {
            return Err(Error::Config(format!(
                "dt = {} exceeds dt_max = {dt_max:.3e} for this grid",
                self.dt
            )));
        }
        if self.tail_threshold.is_nan() || self.tail_threshold <= 0.0 || self.tail_threshold >= 1.0
        {
            return Err(Error::Config("tail_threshold must lie in (0, 1)".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be >= 1".into()));
        }
        if !(0.0 < self.eta3 && self.eta3 < self.eta2 && self.eta2 < self.eta1 && self.eta1 < 1.0) {
            return Err(Error::Config(format!(
                "analysis constants must satisfy 0 < eta3 < eta2 < eta1 < 1, got ({}, {}, {})",
                self.eta3, self.eta2, self.eta1
            )));
        }
        if self.c_eta1.is_nan() || self.c_eta1 < 1.0 {
            return Err(Error::Config("c_eta1 must be >= 1".into()));
        }
        if self.eps_small.is_nan() || self.eps_small <= 0.0 {
            return Err(Error::Config("eps_small must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
