//! Single-scan ego-velocity estimation from the alternating-modulation
//! Doppler shift.
//!
//! Each reversed-modulation azimuth is compared with its two standard
//! neighbours. Averaging the two range offsets cancels the geometric range
//! change between adjacent azimuths to first order, leaving twice the Doppler
//! range shift, which maps linearly to the radial velocity. A robust cosine
//! fit over all bearings then yields the planar ego velocity.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{EgoVelocity, Modulation, PolarScan, RadarConfig};

pub const MIN_MEASUREMENTS: usize = 8;
pub const MIN_BEARING_SPAN: f64 = PI / 2.0;

const HUBER_K: f64 = 1.345;
const MIN_ITERATIONS: usize = 3;
const MAX_ITERATIONS: usize = 20;
const CONVERGENCE: f64 = 1e-4;
/// Lower bound on the robust residual scale, m/s.
const MIN_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMeasurement {
    pub bearing: f64,
    pub v_r: f64,
    /// Correlation peak quality in `[0, 1]`.
    pub confidence: f64,
    pub inlier: bool,
}

/// Uniform discretisation of forward translation hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            count: 127,
            lo: -1.0,
            hi: 5.0,
        }
    }
}

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 || !(self.hi > self.lo) {
            return Err(Error::InvalidConfig(format!(
                "bins need count >= 2 and hi > lo, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Distance between neighbouring bin centres.
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.center(i)).collect()
    }

    /// Bin whose centre is nearest to `t` (clamped to the range).
    pub fn index_of(&self, t: f64) -> usize {
        let f = ((t - self.lo) / self.width()).round();
        f.clamp(0.0, (self.count - 1) as f64) as usize
    }
}

/// Shape of the analytic logits vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogitModel {
    /// Gaussian log-likelihood `-(c - t)² / (2σ²)`.
    Quadratic,
    /// Log of a Gaussian plus a uniform floor:
    /// `ln(exp(-(c - t)² / (2σ²)) + floor)`. Far-away hypotheses saturate at
    /// `ln(floor)` instead of diverging quadratically.
    GaussianWithFloor { floor: f64 },
}

impl Default for LogitModel {
    fn default() -> Self {
        LogitModel::GaussianWithFloor { floor: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerParams {
    /// Maximum lag, in bins, searched by the offset correlation.
    pub lag_window: usize,
    /// Restrict the offset correlation to a window around the strongest return.
    pub window_strongest: bool,
    /// Half width in bins of that window.
    pub strongest_half_width: usize,
    pub bins: BinSpec,
    pub logit_model: LogitModel,
}

impl Default for DopplerParams {
    fn default() -> Self {
        Self {
            lag_window: 16,
            window_strongest: false,
            strongest_half_width: 64,
            bins: BinSpec::default(),
            logit_model: LogitModel::default(),
        }
    }
}

/// Result of the robust cosine fit.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFit {
    pub v_x: f64,
    pub v_y: f64,
    /// One flag per input measurement; unusable measurements are `false`.
    pub inliers: Vec<bool>,
    pub residual_rms: f64,
    pub covariance: [[f64; 2]; 2],
    pub inlier_fraction: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DopplerEstimate {
    /// `omega` is always zero: rotation is not observable from Doppler.
    pub velocity: EgoVelocity,
    pub t_x: f64,
    pub t_y: f64,
    pub logits: Vec<f64>,
    pub bins: BinSpec,
    pub inlier_fraction: f64,
    pub fit_residual_rms: f64,
    /// False when the fit failed; the logits are then uniform.
    pub confident: bool,
    pub failure: Option<String>,
}

impl DopplerEstimate {
    pub fn unconfident(bins: BinSpec, reason: String) -> Self {
        Self {
            velocity: EgoVelocity::default(),
            t_x: 0.0,
            t_y: 0.0,
            logits: vec![0.0; bins.count],
            bins,
            inlier_fraction: 0.0,
            fit_residual_rms: 0.0,
            confident: false,
            failure: Some(reason),
        }
    }
}

fn parabola_vertex(a: f64, b: f64, c: f64) -> f64 {
    let denom = 2.0 * (2.0 * b - a - c);
    if denom.abs() < 1e-300 {
        0.0
    } else {
        ((c - a) / denom).clamp(-1.0, 1.0)
    }
}

/// Normalized cross-correlation of `a[a_range]` against `b` shifted by each
/// lag in `-max_lag..=max_lag`, i.e. the score at lag `ℓ` compares `a[i]`
/// with `b[i + ℓ]`. Means and deviations are taken over the two aligned
/// segments at each lag. Returns `None` when `a` is flat.
fn prefix_sums(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut s = Vec::with_capacity(values.len() + 1);
    let mut q = Vec::with_capacity(values.len() + 1);
    let (mut a, mut b) = (0.0, 0.0);
    s.push(0.0);
    q.push(0.0);
    for &v in values {
        a += v;
        b += v * v;
        s.push(a);
        q.push(b);
    }
    (s, q)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = (a.chunks_exact(4), a.chunks_exact(4).remainder());
    for (x, y) in ca.zip(b.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(&b[a.len() - ra.len()..]).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn ncc_scores(a: &[f64], b: &[f64], start: usize, len: usize, max_lag: usize) -> Option<Vec<f64>> {
    let seg = &a[start..start + len];
    let mean_a = seg.iter().sum::<f64>() / len as f64;
    let var_a: f64 = seg.iter().map(|x| (x - mean_a).powi(2)).sum();
    if var_a <= 1e-24 {
        return None;
    }
    // Local prefix sums give every overlap's mean and variance in O(1).
    let b_lo = start.saturating_sub(max_lag);
    let b_hi = (start + len + max_lag).min(b.len());
    let (sa, qa) = prefix_sums(seg);
    let (sb, qb) = prefix_sums(&b[b_lo..b_hi]);
    let mut scores = Vec::with_capacity(2 * max_lag + 1);
    for k in 0..=2 * max_lag {
        let lag = k as isize - max_lag as isize;
        let lo = (start as isize + lag).max(0) as usize;
        let hi = ((start + len) as isize + lag).min(b.len() as isize).max(0) as usize;
        let n = hi.saturating_sub(lo);
        if n < 2 {
            scores.push(0.0);
            continue;
        }
        // Aligned overlap in `a` coordinates, relative to `start`.
        let a_lo = (lo as isize - lag) as usize - start;
        let (i0, i1) = (lo - b_lo, hi - b_lo);
        let nf = n as f64;
        let (sx, sxx) = (sa[a_lo + n] - sa[a_lo], qa[a_lo + n] - qa[a_lo]);
        let (sy, syy) = (sb[i1] - sb[i0], qb[i1] - qb[i0]);
        let num = dot(&seg[a_lo..a_lo + n], &b[lo..hi]) - sx * sy / nf;
        let va = sxx - sx * sx / nf;
        let vb = syy - sy * sy / nf;
        let denom = (va.max(0.0) * vb.max(0.0)).sqrt();
        scores.push(if denom > 1e-24 { (num / denom).clamp(-1.0, 1.0) } else { 0.0 });
    }
    Some(scores)
}

fn refine_scores(scores: &[f64], max_lag: usize) -> (f64, f64) {
    let (imax, best) = scores
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let frac = if imax > 0 && imax + 1 < scores.len() {
        parabola_vertex(scores[imax - 1], scores[imax], scores[imax + 1])
    } else {
        0.0
    };
    (
        imax as f64 - max_lag as f64 + frac,
        best.clamp(0.0, 1.0),
    )
}

/// Offset (fractional bins) of `profile_b` relative to `profile_a` and the
/// correlation peak height as confidence. A flat profile yields `(0, 0)`.
pub fn azimuth_offset(profile_a: &[f64], profile_b: &[f64], window: usize) -> Result<(f64, f64)> {
    if profile_a.len() != profile_b.len() {
        return Err(Error::LengthMismatch {
            left: profile_a.len(),
            right: profile_b.len(),
        });
    }
    if profile_a.len() < window.max(2) {
        return Err(Error::Format(format!(
            "profiles of length {} are shorter than the lag window {window}",
            profile_a.len()
        )));
    }
    Ok(windowed_offset(profile_a, profile_b, 0, profile_a.len(), window))
}

/// Like [`azimuth_offset`] but only correlating `profile_a[start..start+len]`.
pub fn windowed_offset(
    profile_a: &[f64],
    profile_b: &[f64],
    start: usize,
    len: usize,
    max_lag: usize,
) -> (f64, f64) {
    let flat_b = {
        let lo = start.saturating_sub(max_lag);
        let hi = (start + len + max_lag).min(profile_b.len());
        let seg = &profile_b[lo..hi];
        let m = seg.iter().sum::<f64>() / seg.len().max(1) as f64;
        seg.iter().all(|x| (x - m).abs() < 1e-15)
    };
    if flat_b {
        return (0.0, 0.0);
    }
    match ncc_scores(profile_a, profile_b, start, len, max_lag) {
        Some(scores) => refine_scores(&scores, max_lag),
        None => (0.0, 0.0),
    }
}

/// Radial velocity implied by an inter-modulation range offset in meters
/// (standard minus reversed perceived range).
pub fn radial_velocity_from_offset(offset: f64, config: &RadarConfig) -> f64 {
    offset * config.sweep_gradient / (config.doppler_factor * config.carrier_freq)
}

fn row_f64(scan: &PolarScan, i: usize) -> Vec<f64> {
    scan.power.row(i).iter().map(|&p| p as f64).collect()
}

/// Per-bearing radial velocities from a scan with alternating modulation.
///
/// One measurement per reversed azimuth that has standard neighbours on
/// both sides; the sweep seam is skipped.
pub fn extract_radial_measurements(
    scan: &PolarScan,
    config: &RadarConfig,
    params: &DopplerParams,
) -> Result<Vec<RadialMeasurement>> {
    if !crate::geometry::is_alternating(&scan.modulation) {
        return Err(Error::NonAlternating);
    }
    let n = scan.n_azimuths();
    let n_bins = scan.n_bins();
    let lag = params.lag_window;
    if n_bins < 2 * lag + 2 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(n / 2);
    for m in 1..n.saturating_sub(1) {
        if scan.modulation[m] != Modulation::Reversed {
            continue;
        }
        let minus = row_f64(scan, m);
        let before = row_f64(scan, m - 1);
        let after = row_f64(scan, m + 1);
        let (start, len) = if params.window_strongest {
            let (imax, _) = minus
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            let lo = imax.saturating_sub(params.strongest_half_width);
            let hi = (imax + params.strongest_half_width + 1).min(n_bins);
            (lo, hi - lo)
        } else {
            (0, n_bins)
        };
        let (o1, c1) = windowed_offset(&minus, &before, start, len, lag);
        let (o2, c2) = windowed_offset(&minus, &after, start, len, lag);
        let offset_bins = 0.5 * (o1 + o2);
        out.push(RadialMeasurement {
            bearing: scan.azimuth_angles[m],
            v_r: radial_velocity_from_offset(offset_bins * config.bin_size, config),
            confidence: c1.min(c2),
            inlier: true,
        });
    }
    Ok(out)
}

/// Smallest arc containing every bearing.
fn bearing_span(bearings: &[f64]) -> f64 {
    if bearings.len() < 2 {
        return 0.0;
    }
    let mut b: Vec<f64> = bearings.iter().map(|x| x.rem_euclid(TAU)).collect();
    b.sort_by(|x, y| x.total_cmp(y));
    let mut largest_gap = b[0] + TAU - b[b.len() - 1];
    for w in b.windows(2) {
        largest_gap = largest_gap.max(w[1] - w[0]);
    }
    TAU - largest_gap
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn solve_weighted(rows: &[(f64, f64, f64)], weights: &[f64]) -> Option<([f64; 2], [[f64; 2]; 2])> {
    let (mut a00, mut a01, mut a11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&(c, s, y), &w) in rows.iter().zip(weights) {
        a00 += w * c * c;
        a01 += w * c * s;
        a11 += w * s * s;
        b0 += w * c * y;
        b1 += w * s * y;
    }
    let det = a00 * a11 - a01 * a01;
    if !(det.abs() > 1e-12 * (a00 * a11).max(1e-300)) {
        return None;
    }
    let inv = [[a11 / det, -a01 / det], [-a01 / det, a00 / det]];
    let x = [inv[0][0] * b0 + inv[0][1] * b1, inv[1][0] * b0 + inv[1][1] * b1];
    Some((x, inv))
}

/// Confidence-weighted Huber IRLS fit of `v_r(α) = v_x cos α + v_y sin α`.
pub fn fit_ego_velocity(measurements: &[RadialMeasurement]) -> Result<VelocityFit> {
    let usable: Vec<usize> = (0..measurements.len())
        .filter(|&i| {
            let m = &measurements[i];
            m.confidence > 0.0 && m.v_r.is_finite() && m.bearing.is_finite()
        })
        .collect();
    if usable.len() < MIN_MEASUREMENTS {
        return Err(Error::InsufficientSupport {
            usable: usable.len(),
            required: MIN_MEASUREMENTS,
        });
    }
    let bearings: Vec<f64> = usable.iter().map(|&i| measurements[i].bearing).collect();
    let span = bearing_span(&bearings);
    if span < MIN_BEARING_SPAN {
        return Err(Error::DegenerateGeometry {
            span,
            required: MIN_BEARING_SPAN,
        });
    }

    let rows: Vec<(f64, f64, f64)> = usable
        .iter()
        .map(|&i| {
            let m = &measurements[i];
            let (s, c) = m.bearing.sin_cos();
            (c, s, m.v_r)
        })
        .collect();
    let conf: Vec<f64> = usable
        .iter()
        .map(|&i| measurements[i].confidence.min(1.0))
        .collect();
    let mut huber = vec![1.0; rows.len()];
    let mut weights = conf.clone();
    let (mut x, mut inv) =
        solve_weighted(&rows, &weights).ok_or(Error::DegenerateGeometry { span, required: MIN_BEARING_SPAN })?;
    let mut iterations = 1;
    let residuals = |x: &[f64; 2]| -> Vec<f64> {
        rows.iter().map(|&(c, s, y)| y - x[0] * c - x[1] * s).collect()
    };
    while iterations < MAX_ITERATIONS {
        let r = residuals(&x);
        let mut abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
        let scale = (1.4826 * median(&mut abs)).max(MIN_SCALE);
        let delta = HUBER_K * scale;
        for (h, ri) in huber.iter_mut().zip(&r) {
            *h = if ri.abs() <= delta { 1.0 } else { delta / ri.abs() };
        }
        for ((w, c), h) in weights.iter_mut().zip(&conf).zip(&huber) {
            *w = c * h;
        }
        let Some((nx, ninv)) = solve_weighted(&rows, &weights) else {
            break;
        };
        let change = (nx[0] - x[0]).hypot(nx[1] - x[1]);
        x = nx;
        inv = ninv;
        iterations += 1;
        if iterations >= MIN_ITERATIONS && change < CONVERGENCE {
            break;
        }
    }

    let r = residuals(&x);
    let (mut wr2, mut wsum) = (0.0, 0.0);
    for (ri, w) in r.iter().zip(&weights) {
        wr2 += w * ri * ri;
        wsum += w;
    }
    let sigma2 = if wsum > 2.0 { wr2 / (wsum - 2.0) } else { wr2 / wsum.max(1e-12) };
    let covariance = [
        [sigma2 * inv[0][0], sigma2 * inv[0][1]],
        [sigma2 * inv[1][0], sigma2 * inv[1][1]],
    ];

    let mut inliers = vec![false; measurements.len()];
    let (mut n_in, mut sq_in) = (0usize, 0.0);
    for (k, &i) in usable.iter().enumerate() {
        if huber[k] >= 0.5 {
            inliers[i] = true;
            n_in += 1;
            sq_in += r[k] * r[k];
        }
    }
    Ok(VelocityFit {
        v_x: x[0],
        v_y: x[1],
        inliers,
        residual_rms: if n_in > 0 { (sq_in / n_in as f64).sqrt() } else { 0.0 },
        covariance,
        inlier_fraction: n_in as f64 / usable.len() as f64,
        iterations,
    })
}

/// Per-bin scores for the forward translation `v_x · scan_period`.
///
/// The width is `σ_t = max(scan_period · sqrt(cov[0][0]), bin_width / 2)`.
pub fn velocity_logits(fit: &VelocityFit, bins: &BinSpec, scan_period: f64, model: LogitModel) -> Vec<f64> {
    let t = fit.v_x * scan_period;
    let sigma = (scan_period * fit.covariance[0][0].max(0.0).sqrt()).max(bins.width() / 2.0);
    bins.centers()
        .into_iter()
        .map(|c| {
            let q = -(c - t).powi(2) / (2.0 * sigma * sigma);
            match model {
                LogitModel::Quadratic => q,
                LogitModel::GaussianWithFloor { floor } => (q.exp() + floor).ln(),
            }
        })
        .collect()
}

/// Extract, fit and discretise in one go. Failures produce an unconfident
/// estimate with uniform logits instead of an error.
pub fn estimate_motion_single_scan(
    scan: &PolarScan,
    config: &RadarConfig,
    params: &DopplerParams,
) -> DopplerEstimate {
    let fit = extract_radial_measurements(scan, config, params)
        .and_then(|m| fit_ego_velocity(&m));
    match fit {
        Ok(fit) => {
            let period = config.scan_period();
            let logits = velocity_logits(&fit, &params.bins, period, params.logit_model);
            DopplerEstimate {
                velocity: EgoVelocity {
                    v_x: fit.v_x,
                    v_y: fit.v_y,
                    omega: 0.0,
                },
                t_x: fit.v_x * period,
                t_y: fit.v_y * period,
                logits,
                bins: params.bins,
                inlier_fraction: fit.inlier_fraction,
                fit_residual_rms: fit.residual_rms,
                confident: true,
                failure: None,
            }
        }
        Err(e) => {
            log::debug!("doppler estimate unconfident: {e}");
            DopplerEstimate::unconfident(params.bins, e.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::doppler_range_shift;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_profile(n: usize, centers: &[(f64, f64)]) -> Vec<f64> {
        (0..n)
            .map(|i| {
                centers
                    .iter()
                    .map(|&(c, a)| a * (-(i as f64 - c).powi(2) / (2.0 * 2.25)).exp())
                    .sum()
            })
            .collect()
    }

    fn measurements(v: (f64, f64), n: usize) -> Vec<RadialMeasurement> {
        (0..n)
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                RadialMeasurement {
                    bearing: a,
                    v_r: v.0 * a.cos() + v.1 * a.sin(),
                    confidence: 1.0,
                    inlier: true,
                }
            })
            .collect()
    }

    #[test]
    fn identical_profiles_have_zero_offset() {
        let p = gaussian_profile(400, &[(100.0, 1.0), (230.0, 0.5)]);
        let (o, c) = azimuth_offset(&p, &p, 16).unwrap();
        assert!(o.abs() < 1e-9);
        assert!(c > 0.999);
    }

    #[test]
    fn shifted_profile_offset() {
        let a = gaussian_profile(400, &[(100.0, 1.0), (230.0, 0.5)]);
        let b = gaussian_profile(400, &[(104.0, 1.0), (234.0, 0.5)]);
        let (o, _) = azimuth_offset(&a, &b, 16).unwrap();
        assert!((o - 4.0).abs() < 0.25, "{o}");
    }

    #[test]
    fn flat_profile_is_unconfident() {
        let a = vec![1.0; 100];
        let b = gaussian_profile(100, &[(50.0, 1.0)]);
        assert_eq!(azimuth_offset(&a, &b, 16).unwrap(), (0.0, 0.0));
        assert_eq!(azimuth_offset(&b, &a, 16).unwrap(), (0.0, 0.0));
        assert!(azimuth_offset(&a, &b[..50], 16).is_err());
    }

    #[test]
    fn uncorrelated_noise_has_low_confidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let a: Vec<f64> = (0..3600).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..3600).map(|_| rng.random::<f64>()).collect();
            let (_, c) = azimuth_offset(&a, &b, 16).unwrap();
            assert!(c < 0.3, "{c}");
        }
    }

    #[test]
    fn radial_velocity_inverts_shift() {
        let cfg = RadarConfig::default();
        assert_eq!(radial_velocity_from_offset(0.0, &cfg), 0.0);
        let off = 2.0 * doppler_range_shift(5.0, &cfg, 1.0);
        assert!((radial_velocity_from_offset(off, &cfg) - 5.0).abs() < 1e-9);
        let v1 = radial_velocity_from_offset(0.1, &cfg);
        let v2 = radial_velocity_from_offset(0.2, &cfg);
        assert!((v2 - 2.0 * v1).abs() < 1e-12);
    }

    #[test]
    fn exact_model_fit() {
        let fit = fit_ego_velocity(&measurements((3.0, 0.0), 200)).unwrap();
        assert!((fit.v_x - 3.0).abs() < 1e-6);
        assert!(fit.v_y.abs() < 1e-6);
        assert!(fit.inliers.iter().all(|&i| i));
    }

    #[test]
    fn fit_rejects_corrupted_measurements() {
        let mut m = measurements((3.0, 0.0), 200);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut corrupted = Vec::new();
        while corrupted.len() < 40 {
            let i = rng.random_range(0..200);
            if !corrupted.contains(&i) {
                corrupted.push(i);
                m[i].v_r += 10.0;
            }
        }
        let fit = fit_ego_velocity(&m).unwrap();
        assert!((fit.v_x - 3.0).abs() < 0.05, "v_x {}", fit.v_x);
        assert!(fit.v_y.abs() < 0.05, "v_y {}", fit.v_y);
        for &i in &corrupted {
            assert!(!fit.inliers[i], "measurement {i} not flagged");
        }
    }

    #[test]
    fn narrow_cone_is_degenerate() {
        let m: Vec<RadialMeasurement> = (0..50)
            .map(|k| {
                let a = -0.26 + 0.52 * k as f64 / 49.0;
                RadialMeasurement {
                    bearing: a,
                    v_r: 3.0 * a.cos(),
                    confidence: 1.0,
                    inlier: true,
                }
            })
            .collect();
        assert!(matches!(fit_ego_velocity(&m), Err(Error::DegenerateGeometry { .. })));
    }

    #[test]
    fn too_few_measurements() {
        let m = measurements((1.0, 0.0), 7);
        assert!(matches!(
            fit_ego_velocity(&m),
            Err(Error::InsufficientSupport { .. })
        ));
        let mut m = measurements((1.0, 0.0), 20);
        for x in m.iter_mut().skip(4) {
            x.confidence = 0.0;
        }
        assert!(fit_ego_velocity(&m).is_err());
    }

    fn fit_with(v_x: f64, var: f64) -> VelocityFit {
        VelocityFit {
            v_x,
            v_y: 0.0,
            inliers: vec![],
            residual_rms: 0.0,
            covariance: [[var, 0.0], [0.0, var]],
            inlier_fraction: 1.0,
            iterations: 1,
        }
    }

    #[test]
    fn logits_peak_on_exact_bin_center() {
        let bins = BinSpec::default();
        let t = bins.center(40);
        for model in [LogitModel::Quadratic, LogitModel::default()] {
            let l = velocity_logits(&fit_with(t / 0.25, 0.0), &bins, 0.25, model);
            let max = l.iter().cloned().fold(f64::MIN, f64::max);
            let argmaxes: Vec<usize> = (0..l.len()).filter(|&i| l[i] == max).collect();
            assert_eq!(argmaxes, vec![40]);
        }
    }

    #[test]
    fn quadratic_logits_are_concave() {
        let bins = BinSpec::default();
        let l = velocity_logits(&fit_with(5.3, 0.04), &bins, 0.25, LogitModel::Quadratic);
        for w in l.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] <= 1e-9);
        }
    }

    #[test]
    fn widening_flattens_quadratic_logits() {
        let bins = BinSpec::default();
        let range = |l: &[f64]| {
            l.iter().cloned().fold(f64::MIN, f64::max) - l.iter().cloned().fold(f64::MAX, f64::min)
        };
        // σ_t = 0.25·sqrt(var) = 0.2 m, well above the half-bin floor.
        let base = velocity_logits(&fit_with(4.0, 0.64), &bins, 0.25, LogitModel::Quadratic);
        // Four times the width (16x variance) shrinks the spread 16x.
        let wide = velocity_logits(&fit_with(4.0, 0.64 * 16.0), &bins, 0.25, LogitModel::Quadratic);
        assert!((range(&base) / range(&wide) - 16.0).abs() < 1e-9);
        // Four times the variance (2x width) shrinks it 4x.
        let wider_var = velocity_logits(&fit_with(4.0, 0.64 * 4.0), &bins, 0.25, LogitModel::Quadratic);
        assert!((range(&base) / range(&wider_var) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn bin_spec_geometry() {
        let b = BinSpec::default();
        assert_eq!(b.center(0), -1.0);
        assert!((b.center(126) - 5.0).abs() < 1e-12);
        assert_eq!(b.index_of(-3.0), 0);
        assert_eq!(b.index_of(9.0), 126);
        assert!(BinSpec { count: 1, lo: 0.0, hi: 1.0 }.validate().is_err());
        assert!(BinSpec { count: 5, lo: 1.0, hi: 1.0 }.validate().is_err());
    }

    #[test]
    fn pure_noise_scan_is_unconfident() {
        let cfg = RadarConfig::with_geometry(400, 400);
        let mut scan = PolarScan::zeros(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        scan.power.mapv_inplace(|_| rng.random::<f32>());
        let est = estimate_motion_single_scan(&scan, &cfg, &DopplerParams::default());
        // Either the fit fails or it is made of noise; noise must not look like motion.
        if est.confident {
            assert!(est.inlier_fraction <= 1.0);
        } else {
            assert!(est.logits.iter().all(|&l| l == 0.0));
        }
        let zero = PolarScan::zeros(&cfg);
        let est = estimate_motion_single_scan(&zero, &cfg, &DopplerParams::default());
        assert!(!est.confident);
        assert!(est.logits.iter().all(|&l| l == 0.0));
        assert_eq!(est.logits.len(), 127);
    }

    proptest! {
        #[test]
        fn logits_argmax_matches_fitted_bin(v in -6.0..22.0f64, var in 0.0..4.0f64) {
            let bins = BinSpec::default();
            for model in [LogitModel::Quadratic, LogitModel::default()] {
                let l = velocity_logits(&fit_with(v, var), &bins, 0.25, model);
                prop_assert!(l.iter().all(|x| x.is_finite()));
                // Far outside the bins the floored model is flat; there is no peak to check.
                if l.iter().all(|&x| x == l[0]) {
                    prop_assert!(model != LogitModel::Quadratic);
                    prop_assert!(v * 0.25 < bins.lo - 0.1 || v * 0.25 > bins.hi + 0.1);
                    continue;
                }
                let arg = (0..l.len()).max_by(|&a, &b| l[a].total_cmp(&l[b])).unwrap();
                prop_assert_eq!(arg, bins.index_of(v * 0.25));
            }
        }

        #[test]
        fn fit_recovers_any_velocity(vx in -15.0..15.0f64, vy in -5.0..5.0f64) {
            let fit = fit_ego_velocity(&measurements((vx, vy), 120)).unwrap();
            prop_assert!((fit.v_x - vx).abs() < 1e-6);
            prop_assert!((fit.v_y - vy).abs() < 1e-6);
        }
    }
}
