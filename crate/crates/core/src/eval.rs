//! Trajectory integration and KITTI-style odometry errors.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::SE2Pose;

/// Segment lengths in meters used when none are configured.
pub const DEFAULT_SEGMENTS: [f64; 4] = [10.0, 20.0, 40.0, 80.0];

/// Relative poses and their integration anchored at the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEstimate {
    pub relative: Vec<SE2Pose>,
    pub absolute: Vec<SE2Pose>,
}

impl TrajectoryEstimate {
    pub fn from_relatives(relative: Vec<SE2Pose>) -> Self {
        let absolute = integrate(&relative);
        Self { relative, absolute }
    }
}

/// Left fold of compositions starting at the identity.
pub fn integrate(relatives: &[SE2Pose]) -> Vec<SE2Pose> {
    let mut out = Vec::with_capacity(relatives.len() + 1);
    let mut acc = SE2Pose::IDENTITY;
    out.push(acc);
    for r in relatives {
        acc = acc.compose(r);
        out.push(acc);
    }
    out
}

/// Relative pose between consecutive absolute poses.
pub fn relatives_of(absolute: &[SE2Pose]) -> Vec<SE2Pose> {
    absolute
        .windows(2)
        .map(|w| w[0].inverse().compose(&w[1]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentError {
    pub length: f64,
    /// Percent of the segment length.
    pub trans_pct: f64,
    /// Degrees per kilometer.
    pub rot_deg_per_km: f64,
    /// Number of (start, length) pairs averaged.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometryErrors {
    pub trans_error: f64,
    pub rot_error: f64,
    pub segments: Vec<SegmentError>,
}

impl OdometryErrors {
    /// Metrics table with one row per segment length and a final `all` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("segment_length_m,trans_pct,rot_deg_per_km\n");
        for seg in &self.segments {
            let _ = writeln!(s, "{},{},{}", seg.length, seg.trans_pct, seg.rot_deg_per_km);
        }
        let _ = writeln!(s, "all,{},{}", self.trans_error, self.rot_error);
        s
    }
}

fn path_lengths(poses: &[SE2Pose]) -> Vec<f64> {
    let mut d = Vec::with_capacity(poses.len());
    let mut acc = 0.0;
    d.push(0.0);
    for w in poses.windows(2) {
        acc += (w[1].t_x - w[0].t_x).hypot(w[1].t_y - w[0].t_y);
        d.push(acc);
    }
    d
}

/// Average relative-pose drift over all segments of the given lengths.
///
/// For every start index and length `L`, the end is the first index whose
/// ground-truth path length from the start reaches `L`.
pub fn kitti_errors(gt: &[SE2Pose], est: &[SE2Pose], segment_lengths: &[f64]) -> Result<OdometryErrors> {
    if gt.len() != est.len() {
        return Err(Error::LengthMismatch {
            left: gt.len(),
            right: est.len(),
        });
    }
    if gt.len() < 2 {
        return Err(Error::TrajectoryTooShort(format!("{} poses", gt.len())));
    }
    if segment_lengths.is_empty() || segment_lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidConfig("segment lengths must be positive".into()));
    }
    let dist = path_lengths(gt);
    let mut segments = Vec::new();
    let (mut t_sum, mut r_sum, mut count) = (0.0, 0.0, 0usize);
    for &len in segment_lengths {
        let (mut t_acc, mut r_acc, mut k) = (0.0, 0.0, 0usize);
        for first in 0..gt.len() {
            let Some(last) = (first..gt.len()).find(|&j| dist[j] - dist[first] >= len) else {
                break;
            };
            let gt_rel = gt[first].inverse().compose(&gt[last]);
            let est_rel = est[first].inverse().compose(&est[last]);
            let e = gt_rel.inverse().compose(&est_rel);
            t_acc += e.translation_norm() / len * 100.0;
            r_acc += e.theta.abs() / len * 180.0 / std::f64::consts::PI * 1000.0;
            k += 1;
        }
        if k > 0 {
            segments.push(SegmentError {
                length: len,
                trans_pct: t_acc / k as f64,
                rot_deg_per_km: r_acc / k as f64,
                samples: k,
            });
            t_sum += t_acc;
            r_sum += r_acc;
            count += k;
        }
    }
    if count == 0 {
        return Err(Error::TrajectoryTooShort(format!(
            "path length {:.2} m is shorter than every segment",
            dist.last().copied().unwrap_or(0.0)
        )));
    }
    Ok(OdometryErrors {
        trans_error: t_sum / count as f64,
        rot_error: r_sum / count as f64,
        segments,
    })
}

/// Steps whose forward translation misses the ground truth by more than
/// `trans_threshold`. Non-finite estimates count as failures.
pub fn failure_count(gt: &[SE2Pose], est: &[SE2Pose], trans_threshold: f64) -> Result<usize> {
    if gt.len() != est.len() {
        return Err(Error::LengthMismatch {
            left: gt.len(),
            right: est.len(),
        });
    }
    Ok(gt
        .iter()
        .zip(est)
        .filter(|(g, e)| {
            let d = (e.t_x - g.t_x).abs();
            d > trans_threshold || (d.is_nan() && trans_threshold.is_finite())
        })
        .count())
}
