use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::parse_flat;
use crate::error::{Error, Result};

/// Number of tunable planner parameters.
pub const PARAM_COUNT: usize = 8;

/// Names in action-vector order.
pub const PARAM_NAMES: [&str; PARAM_COUNT] = [
    "max_vel_x",
    "max_vel_theta",
    "vx_samples",
    "vtheta_samples",
    "occdist_scale",
    "pdist_scale",
    "gdist_scale",
    "inflation_radius",
];

const VX_SAMPLES: usize = 2;
const VTHETA_SAMPLES: usize = 3;

/// Runtime-tunable local planner parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub max_vel_x: f64,
    pub max_vel_theta: f64,
    pub vx_samples: u32,
    pub vtheta_samples: u32,
    pub occdist_scale: f64,
    pub pdist_scale: f64,
    pub gdist_scale: f64,
    pub inflation_radius: f64,
}

impl PlannerParams {
    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        [
            self.max_vel_x,
            self.max_vel_theta,
            self.vx_samples as f64,
            self.vtheta_samples as f64,
            self.occdist_scale,
            self.pdist_scale,
            self.gdist_scale,
            self.inflation_radius,
        ]
    }

    /// Sample counts are rounded to the nearest integer, ties toward +inf.
    pub fn from_array(v: [f64; PARAM_COUNT]) -> Self {
        Self {
            max_vel_x: v[0],
            max_vel_theta: v[1],
            vx_samples: round_half_up(v[VX_SAMPLES]).max(1.0) as u32,
            vtheta_samples: round_half_up(v[VTHETA_SAMPLES]).max(1.0) as u32,
            occdist_scale: v[4],
            pdist_scale: v[5],
            gdist_scale: v[6],
            inflation_radius: v[7],
        }
    }

    pub fn validate(&self, bounds: &ParamBounds) -> Result<()> {
        if self.vx_samples < 1 || self.vtheta_samples < 1 {
            return Err(Error::Config("sample counts must be at least 1".into()));
        }
        if !(self.max_vel_x > 0.0 && self.max_vel_theta > 0.0) {
            return Err(Error::Config("velocity limits must be positive".into()));
        }
        for ((name, v), (lo, hi)) in PARAM_NAMES.iter().zip(self.to_array()).zip(bounds.ranges) {
            if !v.is_finite() || v < lo - 1e-12 || v > hi + 1e-12 {
                return Err(Error::Config(format!("{name} = {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Flat `key = value` form, one parameter per line.
    pub fn to_flat(&self) -> String {
        let mut out = String::new();
        for (name, v) in PARAM_NAMES.iter().zip(self.to_array()) {
            let _ = writeln!(out, "{name} = {v}");
        }
        out
    }

    /// Parse a flat params document. Missing keys fall back to `defaults`.
    pub fn from_flat(text: &str, defaults: &PlannerParams) -> Result<Self> {
        let mut values = defaults.to_array();
        for entry in parse_flat(text)? {
            let slot = PARAM_NAMES
                .iter()
                .position(|n| *n == entry.key)
                .ok_or_else(|| Error::Config(format!("unknown parameter {:?} on line {}", entry.key, entry.line)))?;
            values[slot] = entry
                .value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {:?} for {}", entry.value, entry.key)))?;
        }
        Ok(Self::from_array(values))
    }

    pub fn read(path: &Path, defaults: &PlannerParams) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_flat(&text, defaults)
    }
}

pub(crate) fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Closed `[lo, hi]` box per parameter, in action-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub ranges: [(f64, f64); PARAM_COUNT],
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            ranges: [
                (0.2, 2.0),
                (0.314, 3.14),
                (4.0, 12.0),
                (8.0, 40.0),
                (0.1, 1.0),
                (0.1, 1.5),
                (0.1, 1.5),
                (0.1, 0.6),
            ],
        }
    }
}

impl ParamBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in PARAM_NAMES.iter().zip(self.ranges) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("bounds for {name} are invalid: [{lo}, {hi}]")));
            }
        }
        let (vx, vt) = (self.ranges[VX_SAMPLES], self.ranges[VTHETA_SAMPLES]);
        if vx.0 < 1.0 || vt.0 < 1.0 {
            return Err(Error::Config("sample-count bounds must be at least 1".into()));
        }
        if self.ranges[0].0 <= 0.0 || self.ranges[1].0 <= 0.0 {
            return Err(Error::Config("velocity bounds must be positive".into()));
        }
        Ok(())
    }

    /// Midpoint of every bound; the fixed baseline and the initial parameters.
    pub fn defaults(&self) -> PlannerParams {
        PlannerParams::from_array(self.ranges.map(|(lo, hi)| lo + 0.5 * (hi - lo)))
    }

    /// Map an action in `[-1, 1]^8` onto the box. Entries are clipped first.
    pub fn denormalize(&self, action: &[f64]) -> PlannerParams {
        let mut v = [0.0; PARAM_COUNT];
        for (k, slot) in v.iter_mut().enumerate() {
            let a = action.get(k).copied().unwrap_or(0.0);
            let a = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
            let (lo, hi) = self.ranges[k];
            *slot = lo + 0.5 * (a + 1.0) * (hi - lo);
        }
        PlannerParams::from_array(v)
    }

    /// Inverse of [`ParamBounds::denormalize`]; degenerate bounds map to 0.
    pub fn normalize(&self, params: &PlannerParams) -> [f64; PARAM_COUNT] {
        let mut out = [0.0; PARAM_COUNT];
        for (k, v) in params.to_array().into_iter().enumerate() {
            let (lo, hi) = self.ranges[k];
            out[k] = if hi > lo {
                (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
            } else {
                0.0
            };
        }
        out
    }
}
