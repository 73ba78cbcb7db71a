//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Unknown keys are
//! rejected and missing keys keep their defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::doppler::{DopplerParams, LogitModel};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_SEGMENTS;
use crate::fusion::FusionParams;
use crate::geometry::{alternating_schedule, RadarConfig};
use crate::preprocess::CartesianGrid;
use crate::scan_match::MatchParams;
use crate::sim::SimParams;

/// How masks are built in `masked` and `fused` odometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskKind {
    Identity,
    PowerPercentile,
    /// Doppler consistency against each scan's own velocity estimate.
    DopplerConsistency,
}

impl MaskKind {
    fn name(self) -> &'static str {
        match self {
            MaskKind::Identity => "identity",
            MaskKind::PowerPercentile => "power_percentile",
            MaskKind::DopplerConsistency => "doppler_consistency",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskConfig {
    pub kind: MaskKind,
    pub percentile: f64,
    /// Radial velocity tolerance in m/s.
    pub tolerance: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            kind: MaskKind::DopplerConsistency,
            percentile: 90.0,
            tolerance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub segments: Vec<f64>,
    /// Forward error in meters counted as a catastrophic failure.
    pub failure_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            segments: DEFAULT_SEGMENTS.to_vec(),
            failure_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub radar: RadarConfig,
    pub sim: SimParams,
    pub grid: CartesianGrid,
    pub matching: MatchParams,
    pub mask: MaskConfig,
    pub doppler: DopplerParams,
    pub fusion: FusionParams,
    pub eval: EvalConfig,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        let (mut model, mut floor) = (None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!("line {}: expected key = value", i + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), i + 1).is_some() {
                return Err(Error::InvalidConfig(format!("line {}: duplicate key {key}", i + 1)));
            }
            match key {
                "doppler.logit_model" => model = Some(value.to_string()),
                "doppler.logit_floor" => floor = Some(parse_num::<f64>(key, value)?),
                _ => cfg.set(key, value)?,
            }
        }
        let floor = floor.unwrap_or(1e-3);
        cfg.doppler.logit_model = match model.as_deref() {
            None | Some("gaussian_floor") => LogitModel::GaussianWithFloor { floor },
            Some("quadratic") => LogitModel::Quadratic,
            Some(other) => {
                return Err(Error::InvalidConfig(format!("doppler.logit_model: unknown model {other:?}")))
            }
        };
        cfg.radar.modulation = alternating_schedule(cfg.radar.n_azimuths);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.sim.noise.validate()?;
        self.grid.validate()?;
        self.matching.validate()?;
        self.doppler.bins.validate()?;
        self.fusion.validate()?;
        if self.fusion.b != self.doppler.bins.count {
            return Err(Error::InvalidConfig(format!(
                "fusion.b = {} differs from doppler.bin_count = {}",
                self.fusion.b, self.doppler.bins.count
            )));
        }
        if !(0.0..=100.0).contains(&self.mask.percentile) || !(self.mask.tolerance > 0.0) {
            return Err(Error::InvalidConfig("mask percentile or tolerance out of range".into()));
        }
        if self.eval.segments.is_empty() || self.eval.segments.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidConfig("eval.segments must be positive".into()));
        }
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "radar.n_azimuths" => self.radar.n_azimuths = parse_num(key, v)?,
            "radar.n_bins" => self.radar.n_bins = parse_num(key, v)?,
            "radar.bin_size" => self.radar.bin_size = parse_num(key, v)?,
            "radar.scan_rate" => self.radar.scan_rate = parse_num(key, v)?,
            "radar.carrier_freq" => self.radar.carrier_freq = parse_num(key, v)?,
            "radar.sweep_gradient" => self.radar.sweep_gradient = parse_num(key, v)?,
            "radar.doppler_factor" => self.radar.doppler_factor = parse_num(key, v)?,
            "sim.power_noise_sigma" => self.sim.noise.power_noise_sigma = parse_num(key, v)?,
            "sim.range_jitter_sigma" => self.sim.noise.range_jitter_sigma = parse_num(key, v)?,
            "sim.speckle_dropout_prob" => self.sim.noise.speckle_dropout_prob = parse_num(key, v)?,
            "sim.seed" => self.sim.noise.seed = parse_num(key, v)?,
            "sim.freeze_sweep_motion" => self.sim.freeze_sweep_motion = parse_bool(key, v)?,
            "match.grid_size" => self.grid.n = parse_num(key, v)?,
            "match.resolution" => self.grid.resolution = parse_num(key, v)?,
            "match.theta_search" => self.matching.theta_search = parse_num(key, v)?,
            "match.n_theta" => self.matching.n_theta = parse_num(key, v)?,
            "match.phase_correlation" => self.matching.phase_correlation = parse_bool(key, v)?,
            "match.smoothing_px" => self.matching.smoothing_px = parse_num(key, v)?,
            "match.mask" => {
                self.mask.kind = match v {
                    "identity" => MaskKind::Identity,
                    "power_percentile" => MaskKind::PowerPercentile,
                    "doppler_consistency" => MaskKind::DopplerConsistency,
                    _ => return Err(Error::InvalidConfig(format!("{key}: unknown mask {v:?}"))),
                }
            }
            "match.mask_percentile" => self.mask.percentile = parse_num(key, v)?,
            "match.mask_tolerance" => self.mask.tolerance = parse_num(key, v)?,
            "doppler.lag_window" => self.doppler.lag_window = parse_num(key, v)?,
            "doppler.window_strongest" => self.doppler.window_strongest = parse_bool(key, v)?,
            "doppler.strongest_half_width" => self.doppler.strongest_half_width = parse_num(key, v)?,
            "doppler.bin_count" => self.doppler.bins.count = parse_num(key, v)?,
            "doppler.bin_lo" => self.doppler.bins.lo = parse_num(key, v)?,
            "doppler.bin_hi" => self.doppler.bins.hi = parse_num(key, v)?,
            "fusion.tau_s" => self.fusion.tau_s = parse_num(key, v)?,
            "fusion.tau_d" => self.fusion.tau_d = parse_num(key, v)?,
            "fusion.tau_w" => self.fusion.tau_w = parse_num(key, v)?,
            "fusion.b" => self.fusion.b = parse_num(key, v)?,
            "eval.segments" => {
                self.eval.segments = v
                    .split(',')
                    .map(|s| parse_num(key, s.trim()))
                    .collect::<Result<Vec<f64>>>()?
            }
            "eval.failure_threshold" => self.eval.failure_threshold = parse_num(key, v)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, sorted by key.
    pub fn to_text(&self) -> String {
        let floor = match self.doppler.logit_model {
            LogitModel::GaussianWithFloor { floor } => floor,
            LogitModel::Quadratic => 1e-3,
        };
        let model = match self.doppler.logit_model {
            LogitModel::GaussianWithFloor { .. } => "gaussian_floor",
            LogitModel::Quadratic => "quadratic",
        };
        let segments = self
            .eval
            .segments
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let entries: BTreeMap<&str, String> = [
            ("radar.n_azimuths", self.radar.n_azimuths.to_string()),
            ("radar.n_bins", self.radar.n_bins.to_string()),
            ("radar.bin_size", self.radar.bin_size.to_string()),
            ("radar.scan_rate", self.radar.scan_rate.to_string()),
            ("radar.carrier_freq", self.radar.carrier_freq.to_string()),
            ("radar.sweep_gradient", self.radar.sweep_gradient.to_string()),
            ("radar.doppler_factor", self.radar.doppler_factor.to_string()),
            ("sim.power_noise_sigma", self.sim.noise.power_noise_sigma.to_string()),
            ("sim.range_jitter_sigma", self.sim.noise.range_jitter_sigma.to_string()),
            ("sim.speckle_dropout_prob", self.sim.noise.speckle_dropout_prob.to_string()),
            ("sim.seed", self.sim.noise.seed.to_string()),
            ("sim.freeze_sweep_motion", self.sim.freeze_sweep_motion.to_string()),
            ("match.grid_size", self.grid.n.to_string()),
            ("match.resolution", self.grid.resolution.to_string()),
            ("match.theta_search", self.matching.theta_search.to_string()),
            ("match.n_theta", self.matching.n_theta.to_string()),
            ("match.phase_correlation", self.matching.phase_correlation.to_string()),
            ("match.smoothing_px", self.matching.smoothing_px.to_string()),
            ("match.mask", self.mask.kind.name().to_string()),
            ("match.mask_percentile", self.mask.percentile.to_string()),
            ("match.mask_tolerance", self.mask.tolerance.to_string()),
            ("doppler.lag_window", self.doppler.lag_window.to_string()),
            ("doppler.window_strongest", self.doppler.window_strongest.to_string()),
            ("doppler.strongest_half_width", self.doppler.strongest_half_width.to_string()),
            ("doppler.bin_count", self.doppler.bins.count.to_string()),
            ("doppler.bin_lo", self.doppler.bins.lo.to_string()),
            ("doppler.bin_hi", self.doppler.bins.hi.to_string()),
            ("doppler.logit_model", model.to_string()),
            ("doppler.logit_floor", floor.to_string()),
            ("fusion.tau_s", self.fusion.tau_s.to_string()),
            ("fusion.tau_d", self.fusion.tau_d.to_string()),
            ("fusion.tau_w", self.fusion.tau_w.to_string()),
            ("fusion.b", self.fusion.b.to_string()),
            ("eval.segments", segments),
            ("eval.failure_threshold", self.eval.failure_threshold.to_string()),
        ]
        .into_iter()
        .collect();
        let mut s = String::new();
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
