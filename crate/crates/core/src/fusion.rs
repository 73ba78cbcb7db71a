//! Confidence-weighted blending of the forward translation estimates.

use ndarray::Array2;

use crate::doppler::{BinSpec, DopplerEstimate};
use crate::error::{Error, Result};
use crate::geometry::SE2Pose;
use crate::scan_match::MatchResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub tau_s: f64,
    pub tau_d: f64,
    pub tau_w: f64,
    /// Number of forward-translation hypotheses; must match the Doppler bins.
    pub b: usize,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            tau_s: 1.0,
            tau_d: 1.2,
            tau_w: 1e-4,
            b: 127,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, tau) in [("tau_s", self.tau_s), ("tau_d", self.tau_d), ("tau_w", self.tau_w)] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {tau}")));
            }
        }
        if self.b < 2 {
            return Err(Error::InvalidConfig(format!("b must be ≥ 2, got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedPose {
    /// Fused `t_x`; `t_y` and `theta` come from scan matching.
    pub pose: SE2Pose,
    pub w_s: f64,
    pub w_d: f64,
    pub c_s: f64,
    pub c_d: f64,
    /// Set when neither source had usable scores.
    pub warning: bool,
}

/// Max over the lateral axis, then linear resampling onto the bin centres.
///
/// Row `i` of `volume` holds the forward shift `(i - n/2)·resolution`.
/// Bins outside the volume take the global minimum.
pub fn reduce_correlation(volume: &Array2<f64>, resolution: f64, bins: &BinSpec) -> Vec<f64> {
    let n = volume.nrows();
    let profile: Vec<f64> = volume
        .rows()
        .into_iter()
        .map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let global_min = profile.iter().cloned().fold(f64::INFINITY, f64::min);
    let h = (n / 2) as f64;
    bins.centers()
        .into_iter()
        .map(|c| {
            let f = c / resolution + h;
            if n < 2 || f < 0.0 || f > (n - 1) as f64 {
                return global_min;
            }
            let i0 = (f.floor() as usize).min(n - 2);
            let g = f - i0 as f64;
            (1.0 - g) * profile[i0] + g * profile[i0 + 1]
        })
        .collect()
}

/// Zero mean, unit population standard deviation.
pub fn standardize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::Empty("standardize needs at least two values"));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1e-300)) || !sd.is_finite() {
        return Err(Error::FlatScores);
    }
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}

/// Largest entry of `softmax(scores / tau)`.
pub fn confidence(scores: &[f64], tau: f64) -> f64 {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|s| ((s - max) / tau).exp()).sum();
    1.0 / sum
}

/// Two-way softmax weights of `[c_s, c_d]` at temperature `tau_w`.
fn weights(c_s: f64, c_d: f64, tau_w: f64) -> (f64, f64) {
    let d = (c_d - c_s) / tau_w;
    // w_s = 1 / (1 + e^d), computed without overflow.
    let w_s = if d > 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    };
    (w_s, 1.0 - w_s)
}

/// Blends the forward translation of a scan match and a Doppler estimate.
pub fn fuse(m: &MatchResult, doppler: &DopplerEstimate, params: &FusionParams) -> Result<FusedPose> {
    params.validate()?;
    if doppler.bins.count != params.b || doppler.logits.len() != params.b {
        return Err(Error::LengthMismatch {
            left: params.b,
            right: doppler.logits.len(),
        });
    }
    let uniform = 1.0 / params.b as f64;
    let c_x = reduce_correlation(&m.correlation_volume, m.resolution, &doppler.bins);
    let c_s = standardize(&c_x).map(|z| confidence(&z, params.tau_s)).ok();
    let c_d = if doppler.confident {
        standardize(&doppler.logits).map(|z| confidence(&z, params.tau_d)).ok()
    } else {
        None
    };
    let warning = c_s.is_none() && c_d.is_none();
    let c_s = c_s.unwrap_or(uniform);
    let c_d = c_d.unwrap_or(uniform);
    let (w_s, w_d) = if warning {
        (0.5, 0.5)
    } else {
        weights(c_s, c_d, params.tau_w)
    };
    let (a, b) = (m.pose.t_x, doppler.t_x);
    let t_x = (w_s * a + w_d * b).clamp(a.min(b), a.max(b));
    Ok(FusedPose {
        pose: SE2Pose::new(t_x, m.pose.t_y, m.pose.theta),
        w_s,
        w_d,
        c_s,
        c_d,
        warning,
    })
}
