//! Odometry over a sequence of polar scans.

use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::doppler::{estimate_motion_single_scan, DopplerEstimate};
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusedPose};
use crate::geometry::{PolarScan, RadarConfig, SE2Pose};
use crate::io::config::{MaskKind, RunConfig};
use crate::preprocess::{compute_mask, split_channels, Mask, MaskStrategy, TwoChannelScan};
use crate::scan_match::match_scans_with_masks;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Scan matching on unmasked standard-modulation images.
    Raw,
    /// Scan matching with the configured mask.
    Masked,
    /// Single-scan Doppler velocity integrated over one scan period.
    Doppler,
    /// Masked scan matching fused with Doppler on `t_x`.
    Fused,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Mode::Raw),
            "masked" => Ok(Mode::Masked),
            "doppler" => Ok(Mode::Doppler),
            "fused" => Ok(Mode::Fused),
            _ => Err(Error::InvalidConfig(format!("unknown mode {s:?}"))),
        }
    }
}

/// Per-scan work shared by both pairs a scan takes part in.
#[derive(Debug, Clone)]
pub struct PreparedScan {
    pub channels: Option<TwoChannelScan>,
    pub mask: Option<Mask>,
    pub doppler: Option<DopplerEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    pub pose: SE2Pose,
    pub fusion: Option<FusedPose>,
}

fn mask_strategy(cfg: &RunConfig, doppler: Option<&DopplerEstimate>) -> MaskStrategy {
    match cfg.mask.kind {
        MaskKind::Identity => MaskStrategy::Identity,
        MaskKind::PowerPercentile => MaskStrategy::PowerPercentile(cfg.mask.percentile),
        MaskKind::DopplerConsistency => match doppler {
            Some(d) if d.confident => MaskStrategy::DopplerConsistency {
                v_ref: d.velocity,
                tol: cfg.mask.tolerance,
            },
            _ => MaskStrategy::Identity,
        },
    }
}

pub fn prepare_scan(
    scan: Arc<PolarScan>,
    radar: Arc<RadarConfig>,
    cfg: &RunConfig,
    mode: Mode,
) -> Result<PreparedScan> {
    let doppler = match mode {
        Mode::Raw => None,
        _ => Some(estimate_motion_single_scan(&scan, &radar, &cfg.doppler)),
    };
    if mode == Mode::Doppler {
        return Ok(PreparedScan {
            channels: None,
            mask: None,
            doppler,
        });
    }
    let channels = split_channels(scan, radar, cfg.grid)?;
    let strategy = match mode {
        Mode::Raw => MaskStrategy::Identity,
        _ => mask_strategy(cfg, doppler.as_ref()),
    };
    let mask = compute_mask(&strategy, &channels)?;
    Ok(PreparedScan {
        channels: Some(channels),
        mask: Some(mask),
        doppler,
    })
}

pub fn estimate_pair(prev: &PreparedScan, curr: &PreparedScan, cfg: &RunConfig, mode: Mode) -> Result<PairEstimate> {
    let missing = || Error::InvalidConfig("scan was not prepared for this mode".into());
    if mode == Mode::Doppler {
        // The scan ending the interval carries the velocity over it.
        let d = curr.doppler.as_ref().ok_or_else(missing)?;
        if !d.confident {
            return Err(Error::NoStructure("Doppler estimate unconfident"));
        }
        return Ok(PairEstimate {
            pose: SE2Pose::new(d.t_x, d.t_y, 0.0),
            fusion: None,
        });
    }
    let (a, b) = (prev.channels.as_ref().ok_or_else(missing)?, curr.channels.as_ref().ok_or_else(missing)?);
    let (ma, mb) = (prev.mask.as_ref().ok_or_else(missing)?, curr.mask.as_ref().ok_or_else(missing)?);
    let m = match_scans_with_masks(a, b, ma, mb, &cfg.matching)?;
    if mode != Mode::Fused {
        return Ok(PairEstimate {
            pose: m.pose,
            fusion: None,
        });
    }
    let d = curr.doppler.as_ref().ok_or_else(missing)?;
    let f = fuse(&m, d, &cfg.fusion)?;
    Ok(PairEstimate {
        pose: f.pose,
        fusion: Some(f),
    })
}

/// Relative pose for every consecutive pair. `None` entries mark scans that
/// could not be loaded; pairs touching them yield an error.
pub fn run_pairs(
    scans: &[Option<Arc<PolarScan>>],
    radar: &RadarConfig,
    cfg: &RunConfig,
    mode: Mode,
) -> Vec<Result<PairEstimate>> {
    let radar = Arc::new(radar.clone());
    let prepared: Vec<Result<PreparedScan>> = scans
        .par_iter()
        .map(|s| match s {
            Some(s) => prepare_scan(s.clone(), radar.clone(), cfg, mode),
            None => Err(Error::Format("unreadable scan".into())),
        })
        .collect();
    (1..prepared.len())
        .into_par_iter()
        .map(|k| match (&prepared[k - 1], &prepared[k]) {
            (Ok(a), Ok(b)) => estimate_pair(a, b, cfg, mode),
            (Err(e), _) | (_, Err(e)) => Err(Error::Format(format!("scan unavailable: {e}"))),
        })
        .collect()
}

/// Like [`run_pairs`] but fails on the first error.
pub fn run_odometry(scans: &[PolarScan], radar: &RadarConfig, cfg: &RunConfig, mode: Mode) -> Result<Vec<PairEstimate>> {
    if scans.len() < 2 {
        return Err(Error::Empty("odometry needs at least two scans"));
    }
    let wrapped: Vec<Option<Arc<PolarScan>>> = scans.iter().map(|s| Some(Arc::new(s.clone()))).collect();
    run_pairs(&wrapped, radar, cfg, mode).into_iter().collect()
}
