//! Polar to Cartesian conversion, modulation-channel splitting and masking.
//!
//! Cartesian images are indexed `[ix, iy]` with `x = (ix - c) · resolution`
//! forward and `y = (iy - c) · resolution` to the left, where
//! `c = (n - 1) / 2` is the sensor position.

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::Array2;

use crate::doppler::{radial_velocity_from_offset, windowed_offset};
use crate::error::{Error, Result};
use crate::geometry::{is_alternating, EgoVelocity, Modulation, PolarScan, RadarConfig};

/// Square sensor-centred raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGrid {
    pub n: usize,
    /// Meters per pixel.
    pub resolution: f64,
}

impl Default for CartesianGrid {
    /// 255 × 255 pixels spanning ±50 m.
    fn default() -> Self {
        Self::spanning(255, 50.0)
    }
}

impl CartesianGrid {
    /// Grid of `n` pixels whose outermost pixel centres sit at `±half_extent`.
    pub fn spanning(n: usize, half_extent: f64) -> Self {
        Self {
            n,
            resolution: 2.0 * half_extent / (n as f64 - 1.0),
        }
    }

    pub fn center(&self) -> f64 {
        (self.n as f64 - 1.0) / 2.0
    }

    pub fn half_extent(&self) -> f64 {
        self.center() * self.resolution
    }

    /// Metric coordinate of a pixel index along either axis.
    pub fn coord(&self, index: f64) -> f64 {
        (index - self.center()) * self.resolution
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 32 {
            return Err(Error::InvalidConfig(format!("grid size {} is below 32", self.n)));
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "resolution must be > 0, got {}",
                self.resolution
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartesianScan {
    pub power: Array2<f64>,
    pub resolution: f64,
}

impl CartesianScan {
    pub fn n(&self) -> usize {
        self.power.nrows()
    }

    pub fn grid(&self) -> CartesianGrid {
        CartesianGrid {
            n: self.n(),
            resolution: self.resolution,
        }
    }
}

/// Which azimuths feed a Cartesian image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    All,
    Only(Modulation),
}

/// Cartesian images of the two modulation subsets of one scan.
///
/// The source scan and sensor configuration travel along so that masks can
/// be derived from the polar data.
#[derive(Debug, Clone)]
pub struct TwoChannelScan {
    /// Standard (+1) modulation azimuths.
    pub channel_1: CartesianScan,
    /// Reversed (-1) modulation azimuths.
    pub channel_2: CartesianScan,
    pub source: Arc<PolarScan>,
    pub config: Arc<RadarConfig>,
}

impl TwoChannelScan {
    pub fn grid(&self) -> CartesianGrid {
        self.channel_1.grid()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub weights: Array2<f64>,
}

impl Mask {
    pub fn ones(n: usize) -> Self {
        Self {
            weights: Array2::ones((n, n)),
        }
    }

    pub fn new(weights: Array2<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Format("mask weights must lie in [0, 1]".into()));
        }
        Ok(Self { weights })
    }
}

/// Analytic replacements for a learned masking network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskStrategy {
    Identity,
    /// Keep pixels whose two-channel mean power reaches this percentile.
    PowerPercentile(f64),
    /// Down-weight returns whose inter-modulation offset implies a radial
    /// velocity inconsistent with the static world seen from `v_ref`.
    DopplerConsistency { v_ref: EgoVelocity, tol: f64 },
}

impl MaskStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MaskStrategy::Identity => Ok(()),
            MaskStrategy::PowerPercentile(p) if (0.0..=100.0).contains(&p) => Ok(()),
            MaskStrategy::PowerPercentile(p) => {
                Err(Error::InvalidConfig(format!("percentile {p} outside [0, 100]")))
            }
            MaskStrategy::DopplerConsistency { tol, .. } if tol > 0.0 && tol.is_finite() => Ok(()),
            MaskStrategy::DopplerConsistency { tol, .. } => {
                Err(Error::InvalidConfig(format!("tolerance must be > 0, got {tol}")))
            }
        }
    }
}

/// Window length in bins for local Doppler offsets.
pub const DOPPLER_WINDOW_BINS: usize = 32;
/// Maximum lag searched inside a local window.
pub const DOPPLER_WINDOW_LAG: usize = 32;
/// Largest geometric range drift, in bins per azimuth, of a measurable window.
pub const DOPPLER_MAX_DRIFT: f64 = 10.0;
/// Windows whose correlation peak falls below this are unmeasurable.
pub const DOPPLER_MIN_CORRELATION: f64 = 0.3;

/// Rows of a polar scan interpreted as a uniformly spaced full sweep.
struct AzimuthSubset {
    rows: Vec<usize>,
    first_angle: f64,
    step: f64,
}

impl AzimuthSubset {
    fn new(scan: &PolarScan, channel: Channel) -> Result<Self> {
        let rows: Vec<usize> = (0..scan.n_azimuths())
            .filter(|&i| match channel {
                Channel::All => true,
                Channel::Only(m) => scan.modulation[i] == m,
            })
            .collect();
        if rows.is_empty() {
            return Err(Error::Empty("no azimuths with the requested modulation"));
        }
        Ok(Self {
            first_angle: scan.azimuth_angles[rows[0]],
            step: TAU / rows.len() as f64,
            rows,
        })
    }

    /// Neighbouring subset indices and interpolation fraction for angle `phi`.
    fn locate(&self, phi: f64) -> (usize, usize, f64) {
        let m = self.rows.len();
        let f = ((phi - self.first_angle) / self.step).rem_euclid(m as f64);
        let j0 = (f.floor() as usize).min(m - 1);
        (j0, (j0 + 1) % m, f - j0 as f64)
    }
}

/// Range profile sampler that averages bins over a pixel-sized footprint, so
/// narrow returns survive resampling onto a coarser grid.
struct BoxProfile {
    prefix: Vec<f64>,
    values: Vec<f64>,
}

impl BoxProfile {
    fn new(row: impl Iterator<Item = f64>) -> Self {
        let values: Vec<f64> = row.collect();
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &values {
            acc += v;
            prefix.push(acc);
        }
        Self { prefix, values }
    }

    /// Integral of the piecewise-constant profile (bin `j` covers
    /// `[j - 0.5, j + 0.5)`) from its start to `u`.
    fn integral(&self, u: f64) -> f64 {
        let n = self.values.len();
        let x = (u + 0.5).clamp(0.0, n as f64);
        let k = (x.floor() as usize).min(n);
        let mut s = self.prefix[k];
        if k < n {
            s += (x - k as f64) * self.values[k];
        }
        s
    }

    fn sample(&self, center: f64, width: f64) -> f64 {
        if width <= 1.0 {
            let n = self.values.len();
            if center < 0.0 || center > (n - 1) as f64 {
                return 0.0;
            }
            let j = (center.floor() as usize).min(n - 1);
            let f = center - j as f64;
            let next = if j + 1 < n { self.values[j + 1] } else { 0.0 };
            return (1.0 - f) * self.values[j] + f * next;
        }
        let a = center - width / 2.0;
        let b = center + width / 2.0;
        (self.integral(b) - self.integral(a)) / width
    }
}

/// Resamples a polar scan (or one modulation subset of it) onto a grid.
/// Each subset is treated as a full uniformly spaced sweep.
/// Interpolation is linear in azimuth; in range, profiles are averaged over
/// the pixel footprint.
pub fn polar_to_cartesian(
    scan: &PolarScan,
    config: &RadarConfig,
    channel: Channel,
    grid: CartesianGrid,
) -> Result<CartesianScan> {
    grid.validate()?;
    let subset = AzimuthSubset::new(scan, channel)?;
    let profiles: Vec<BoxProfile> = subset
        .rows
        .iter()
        .map(|&r| BoxProfile::new(scan.power.row(r).iter().map(|&p| p as f64)))
        .collect();
    let max_range = scan.n_bins() as f64 * config.bin_size;
    let width = grid.resolution / config.bin_size;
    let n = grid.n;
    let mut power = Array2::zeros((n, n));
    for ix in 0..n {
        let x = grid.coord(ix as f64);
        for iy in 0..n {
            let y = grid.coord(iy as f64);
            let r = x.hypot(y);
            if r > max_range {
                continue;
            }
            let (j0, j1, f) = subset.locate(y.atan2(x));
            let fr = r / config.bin_size;
            let v = (1.0 - f) * profiles[j0].sample(fr, width) + f * profiles[j1].sample(fr, width);
            power[[ix, iy]] = v.max(0.0);
        }
    }
    Ok(CartesianScan {
        power,
        resolution: grid.resolution,
    })
}

/// Builds the standard and reversed modulation images of one scan.
pub fn split_channels(
    scan: Arc<PolarScan>,
    config: Arc<RadarConfig>,
    grid: CartesianGrid,
) -> Result<TwoChannelScan> {
    if !is_alternating(&scan.modulation) {
        return Err(Error::NonAlternating);
    }
    let channel_1 = polar_to_cartesian(&scan, &config, Channel::Only(Modulation::Standard), grid)?;
    let channel_2 = polar_to_cartesian(&scan, &config, Channel::Only(Modulation::Reversed), grid)?;
    Ok(TwoChannelScan {
        channel_1,
        channel_2,
        source: scan,
        config,
    })
}

/// Linear-interpolation percentile (`p` in `[0, 100]`).
pub(crate) fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let (_, &mut below, above) = v.select_nth_unstable_by(lo, |a, b| a.total_cmp(b));
    let next = if pos > lo as f64 {
        above.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        below
    };
    below + (pos - lo as f64) * (next - below)
}

pub fn compute_mask(strategy: &MaskStrategy, scan: &TwoChannelScan) -> Result<Mask> {
    strategy.validate()?;
    let n = scan.channel_1.n();
    match *strategy {
        MaskStrategy::Identity => Ok(Mask::ones(n)),
        MaskStrategy::PowerPercentile(p) => {
            let mean = (&scan.channel_1.power + &scan.channel_2.power) * 0.5;
            let flat: Vec<f64> = mean.iter().copied().collect();
            let threshold = percentile(&flat, p);
            Ok(Mask {
                weights: mean.mapv(|v| if v >= threshold { 1.0 } else { 0.0 }),
            })
        }
        MaskStrategy::DopplerConsistency { v_ref, tol } => {
            let polar = doppler_weight_map(&scan.source, &scan.config, scan.grid(), &v_ref, tol);
            Ok(Mask {
                weights: polar.to_cartesian(&scan.config, scan.grid()),
            })
        }
    }
}

/// Per-(reversed azimuth, range window) Doppler-consistency weights.
struct PolarWeights {
    /// Angles of the reversed azimuths, uniformly spaced.
    angles: Vec<f64>,
    /// `weights[a][w]` for reversed azimuth `a`, window `w`.
    weights: Vec<Vec<f64>>,
    stride: f64,
    first_center: f64,
}

impl PolarWeights {
    fn to_cartesian(&self, config: &RadarConfig, grid: CartesianGrid) -> Array2<f64> {
        let n = grid.n;
        let m = self.angles.len();
        let step = TAU / m as f64;
        let n_windows = self.weights.first().map_or(0, |w| w.len());
        let mut out = Array2::ones((n, n));
        if m == 0 || n_windows == 0 {
            return out;
        }
        for ix in 0..n {
            let x = grid.coord(ix as f64);
            for iy in 0..n {
                let y = grid.coord(iy as f64);
                let fr = x.hypot(y) / config.bin_size;
                let fw = ((fr - self.first_center) / self.stride).clamp(0.0, (n_windows - 1) as f64);
                let w0 = (fw.floor() as usize).min(n_windows - 1);
                let w1 = (w0 + 1).min(n_windows - 1);
                let gw = fw - w0 as f64;
                let fa = ((y.atan2(x) - self.angles[0]) / step).rem_euclid(m as f64);
                let a0 = (fa.floor() as usize).min(m - 1);
                let a1 = (a0 + 1) % m;
                let ga = fa - a0 as f64;
                let at = |a: usize| (1.0 - gw) * self.weights[a][w0] + gw * self.weights[a][w1];
                out[[ix, iy]] = ((1.0 - ga) * at(a0) + ga * at(a1)).clamp(0.0, 1.0);
            }
        }
        out
    }
}

fn doppler_weight_map(
    scan: &PolarScan,
    config: &RadarConfig,
    grid: CartesianGrid,
    v_ref: &EgoVelocity,
    tol: f64,
) -> PolarWeights {
    let n_az = scan.n_azimuths();
    let n_bins = scan.n_bins();
    let len = DOPPLER_WINDOW_BINS;
    let stride = len / 2;
    // Only windows that can land inside the image matter.
    let reach = ((grid.half_extent() * std::f64::consts::SQRT_2 / config.bin_size).ceil() as usize
        + len)
        .min(n_bins);
    let n_windows = if reach >= len { (reach - len) / stride + 1 } else { 0 };

    let all: Vec<f64> = scan.power.iter().map(|&p| p as f64).collect();
    let peak = all.iter().cloned().fold(0.0, f64::max);
    let med = percentile(&all, 50.0);
    let deviations: Vec<f64> = all.iter().map(|v| (v - med).abs()).collect();
    let mad = percentile(&deviations, 50.0);
    let floor = (med + 8.0 * 1.4826 * mad).max(0.01 * peak);

    let reversed: Vec<usize> = (0..n_az)
        .filter(|&i| scan.modulation[i] == Modulation::Reversed)
        .collect();
    let row = |i: usize| -> Vec<f64> { scan.power.row(i).iter().map(|&p| p as f64).collect() };

    let mut weights = Vec::with_capacity(reversed.len());
    for &m in &reversed {
        let mut col = vec![1.0; n_windows];
        if m == 0 || m + 1 >= n_az {
            weights.push(col);
            continue;
        }
        let minus = row(m);
        let before = row(m - 1);
        let after = row(m + 1);
        let angle = scan.azimuth_angles[m];
        let expected = v_ref.v_x * angle.cos() + v_ref.v_y * angle.sin();
        for (w, slot) in col.iter_mut().enumerate() {
            let start = w * stride;
            let seg = &minus[start..start + len];
            if seg.iter().cloned().fold(0.0, f64::max) < floor {
                continue;
            }
            let (o1, c1) = windowed_offset(&minus, &before, start, len, DOPPLER_WINDOW_LAG);
            let (o2, c2) = windowed_offset(&minus, &after, start, len, DOPPLER_WINDOW_LAG);
            if c1 < DOPPLER_MIN_CORRELATION || c2 < DOPPLER_MIN_CORRELATION {
                continue;
            }
            // Range drifting fast across azimuths (oblique surfaces, corners)
            // swamps the Doppler offset; leave such windows unmeasured.
            if 0.5 * (o1 - o2).abs() > DOPPLER_MAX_DRIFT {
                continue;
            }
            let implied = radial_velocity_from_offset(0.5 * (o1 + o2) * config.bin_size, config);
            let d = implied - expected;
            *slot = (-d * d / (2.0 * tol * tol)).exp();
        }
        weights.push(col);
    }
    PolarWeights {
        angles: reversed.iter().map(|&i| scan.azimuth_angles[i]).collect(),
        weights,
        stride: stride as f64,
        first_center: (len as f64 - 1.0) / 2.0,
    }
}

/// Element-wise product of a scan with a mask.
pub fn apply_mask(scan: &CartesianScan, mask: &Mask) -> Result<CartesianScan> {
    if scan.power.dim() != mask.weights.dim() {
        return Err(Error::ShapeMismatch {
            expected: scan.power.dim(),
            actual: mask.weights.dim(),
        });
    }
    Ok(CartesianScan {
        power: &scan.power * &mask.weights,
        resolution: scan.resolution,
    })
}
