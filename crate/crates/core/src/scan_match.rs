//! Fourier-domain correlative scan matching.
//!
//! Rotation is recovered first from the translation-invariant spectrum
//! magnitudes, then the previous scan is rotated and the translation is found
//! by cross-correlation. The relative pose follows the convention
//! `curr(p) = prev(R(θ)·p + t)`: it is the pose of the current sensor frame
//! expressed in the previous one, so positive `t_x` is forward motion.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::SE2Pose;
use crate::preprocess::{apply_mask, compute_mask, CartesianScan, Mask, MaskStrategy, TwoChannelScan};

/// Angular samples of the half-plane spectrum used for rotation search.
const POLAR_ANGLES: usize = 2048;
/// Lowest spectral radius (in frequency bins) used for rotation search.
const POLAR_MIN_RADIUS: f64 = 3.0;
/// Zero-padding factor of the spectrum used for rotation search.
const SPECTRUM_PADDING: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    /// Half range of the rotation search in radians.
    pub theta_search: f64,
    /// Number of rotation candidates spanning `[-theta_search, theta_search]`.
    pub n_theta: usize,
    /// Whiten the translation spectrum (phase correlation).
    pub phase_correlation: bool,
    /// Gaussian pre-smoothing of the masked images, in pixels. Zero disables.
    pub smoothing_px: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            theta_search: 0.5,
            n_theta: 256,
            phase_correlation: false,
            smoothing_px: 1.0,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_search > 0.0 && self.theta_search < PI / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "theta_search must lie in (0, π/2), got {}",
                self.theta_search
            )));
        }
        if self.n_theta < 3 {
            return Err(Error::InvalidConfig(format!("n_theta must be ≥ 3, got {}", self.n_theta)));
        }
        if !(self.smoothing_px >= 0.0 && self.smoothing_px.is_finite()) {
            return Err(Error::InvalidConfig("smoothing_px must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn theta_candidates(&self) -> Vec<f64> {
        let step = 2.0 * self.theta_search / (self.n_theta - 1) as f64;
        (0..self.n_theta)
            .map(|k| -self.theta_search + k as f64 * step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub pose: SE2Pose,
    /// Score per rotation candidate (see [`MatchParams::theta_candidates`]).
    pub rotation_profile: Vec<f64>,
    /// Translation scores `C_xy[[i, j]]` for the shift `(i - n/2, j - n/2)`
    /// pixels, expressed in the rotated previous frame.
    pub correlation_volume: Array2<f64>,
    pub peak_score: f64,
    pub resolution: f64,
}

/// Sub-sample peak location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubpixelPeak {
    pub location: f64,
    /// Set when the peak sits on the boundary and could not be refined.
    pub at_boundary: bool,
}

/// Quadratic fit through a peak and its two neighbours.
pub fn refine_peak_subpixel(profile: &[f64], peak: usize) -> SubpixelPeak {
    if peak == 0 || peak + 1 >= profile.len() {
        return SubpixelPeak {
            location: peak as f64,
            at_boundary: true,
        };
    }
    SubpixelPeak {
        location: peak as f64 + parabola_offset(profile[peak - 1], profile[peak], profile[peak + 1]),
        at_boundary: false,
    }
}

/// Separable quadratic refinement of a 2D peak.
pub fn refine_peak_subpixel_2d(volume: &Array2<f64>, peak: (usize, usize)) -> (SubpixelPeak, SubpixelPeak) {
    let (i, j) = peak;
    let col: Vec<f64> = volume.column(j).to_vec();
    let row: Vec<f64> = volume.row(i).to_vec();
    (refine_peak_subpixel(&col, i), refine_peak_subpixel(&row, j))
}

fn parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = 2.0 * (2.0 * b - a - c);
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    ((c - a) / denom).clamp(-1.0, 1.0)
}

fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with_borrow_mut(|p| if inverse { p.plan_fft_inverse(n) } else { p.plan_fft_forward(n) })
}

/// Columns transformed per batch in [`fft2`].
const COLUMN_BATCH: usize = 16;

/// In-place 2D FFT of a row-major `rows × cols` buffer.
fn fft2(data: &mut [Complex<f64>], rows: usize, cols: usize, inverse: bool) {
    let row_fft = plan(cols, inverse);
    row_fft.process(data);
    // Columns go through a small scratch block. Its stride is padded so
    // that power-of-two sizes do not map every column onto the same cache
    // sets.
    let col_fft = plan(rows, inverse);
    let stride = rows + 8;
    let mut block = vec![Complex::default(); COLUMN_BATCH * stride];
    for j0 in (0..cols).step_by(COLUMN_BATCH) {
        let w = COLUMN_BATCH.min(cols - j0);
        for i in 0..rows {
            let src = &data[i * cols + j0..i * cols + j0 + w];
            for (k, &v) in src.iter().enumerate() {
                block[k * stride + i] = v;
            }
        }
        for k in 0..w {
            col_fft.process(&mut block[k * stride..k * stride + rows]);
        }
        for i in 0..rows {
            let dst = &mut data[i * cols + j0..i * cols + j0 + w];
            for (k, v) in dst.iter_mut().enumerate() {
                *v = block[k * stride + i];
            }
        }
    }
}

fn check_shapes(a: &CartesianScan, b: &CartesianScan) -> Result<()> {
    if a.power.dim() != b.power.dim() {
        return Err(Error::ShapeMismatch {
            expected: a.power.dim(),
            actual: b.power.dim(),
        });
    }
    if a.power.nrows() != a.power.ncols() || a.power.nrows() < 4 {
        return Err(Error::Format(format!("expected a square image, got {:?}", a.power.dim())));
    }
    Ok(())
}

fn has_structure(img: &Array2<f64>) -> bool {
    let first = img.iter().next().copied().unwrap_or(0.0);
    img.iter().any(|&v| (v - first).abs() > 1e-12)
}

/// Zero-mean copy of an image, as fed to the translation correlation.
pub fn prepare_for_correlation(img: &Array2<f64>) -> Array2<f64> {
    let m = img.mean().unwrap_or(0.0);
    img.mapv(|v| v - m)
}

/// Bilinear lookup with zero outside the image.
fn sample_bilinear(img: &Array2<f64>, fi: f64, fj: f64) -> f64 {
    let (n0, n1) = img.dim();
    if !(fi > -1.0 && fj > -1.0 && fi < n0 as f64 && fj < n1 as f64) {
        return 0.0;
    }
    let i0 = fi.floor() as isize;
    let j0 = fj.floor() as isize;
    let u = fi - i0 as f64;
    let v = fj - j0 as f64;
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= n0 as isize || j >= n1 as isize {
            0.0
        } else {
            img[[i as usize, j as usize]]
        }
    };
    (1.0 - u) * (1.0 - v) * at(i0, j0)
        + u * (1.0 - v) * at(i0 + 1, j0)
        + (1.0 - u) * v * at(i0, j0 + 1)
        + u * v * at(i0 + 1, j0 + 1)
}

/// Rotates an image about its centre: `out(p) = in(R(θ)·p)`.
pub fn rotate_image(img: &CartesianScan, theta: f64) -> CartesianScan {
    let n = img.n();
    let c = (n as f64 - 1.0) / 2.0;
    let (s, co) = theta.sin_cos();
    let power = Array2::from_shape_fn((n, n), |(i, j)| {
        let x = i as f64 - c;
        let y = j as f64 - c;
        sample_bilinear(&img.power, co * x - s * y + c, s * x + co * y + c)
    });
    CartesianScan {
        power,
        resolution: img.resolution,
    }
}

/// Separable Gaussian blur with zero padding.
fn gaussian_blur(img: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma <= 0.0 {
        return img.clone();
    }
    let half = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let (n0, n1) = img.dim();
    let mut tmp = Array2::zeros((n0, n1));
    for i in 0..n0 {
        for j in 0..n1 {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let jj = j as isize + k as isize - half;
                if jj >= 0 && (jj as usize) < n1 {
                    acc += w * img[[i, jj as usize]];
                }
            }
            tmp[[i, j]] = acc / norm;
        }
    }
    let mut out = Array2::zeros((n0, n1));
    for i in 0..n0 {
        for (k, w) in kernel.iter().enumerate() {
            let ii = i as isize + k as isize - half;
            if ii < 0 || ii as usize >= n0 {
                continue;
            }
            let src = tmp.row(ii as usize);
            let mut dst = out.row_mut(i);
            dst.scaled_add(w / norm, &src);
        }
    }
    out
}

/// Splits `z[k]` and `z[-k]` of the transform of `a + i·b` (both real) into
/// the transforms of `a` and `b` at `k`.
fn unpack(zk: Complex<f64>, zmk: Complex<f64>) -> (Complex<f64>, Complex<f64>) {
    let c = zmk.conj();
    ((zk + c) * 0.5, (zk - c) * Complex::new(0.0, -0.5))
}

/// Log-magnitude spectra of two radially Hann-windowed images, resampled
/// onto `POLAR_ANGLES` angles in `[0, π)` and zero-meaned per radius.
fn polar_log_spectra(a: &Array2<f64>, b: &Array2<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = a.nrows();
    let c = (n as f64 - 1.0) / 2.0;
    let radius = n as f64 / 2.0;
    let (mean_a, mean_b) = (a.mean().unwrap_or(0.0), b.mean().unwrap_or(0.0));
    // Zero padding samples the spectrum twice as densely, which keeps the
    // bilinear polar lookup from blurring the angular structure.
    let m = (SPECTRUM_PADDING * n).next_power_of_two();
    let mut buf = vec![Complex::default(); m * m];
    for i in 0..n {
        for j in 0..n {
            let r = ((i as f64 - c).powi(2) + (j as f64 - c).powi(2)).sqrt();
            let w = if r < radius { 0.5 * (1.0 + (PI * r / radius).cos()) } else { 0.0 };
            buf[i * m + j] = Complex::new((a[[i, j]] - mean_a) * w, (b[[i, j]] - mean_b) * w);
        }
    }
    fft2(&mut buf, m, m, false);

    let scale = m as f64 / n as f64;
    let r_max = (n as f64 / 2.0 - 1.0).floor() as usize;
    let r_min = POLAR_MIN_RADIUS as usize;
    // Only the upper half-plane inside the largest ring is ever sampled.
    // Row i holds frequency i - h, column j frequency j; both images share
    // one buffer as (a, b) pairs.
    let h = m / 2;
    let reach = (r_max as f64 * scale + 2.0).powi(2);
    let mut mag = vec![(0.0, 0.0); m * h];
    for i in 0..m {
        let fi = (i + h) % m;
        let mi = (m - fi) % m;
        let di = (i as f64 - h as f64).powi(2);
        for j in 0..h {
            if di + (j * j) as f64 > reach {
                continue;
            }
            let (fa, fb) = unpack(buf[fi * m + j], buf[mi * m + (m - j) % m]);
            mag[i * h + j] = (fa.norm_sqr().sqrt().ln_1p(), fb.norm_sqr().sqrt().ln_1p());
        }
    }

    let directions: Vec<(f64, f64)> = (0..POLAR_ANGLES)
        .map(|k| (PI * k as f64 / POLAR_ANGLES as f64).sin_cos())
        .collect();
    let centre = h as f64;
    let n_rings = (r_min..=r_max).count();
    let mut ra = Vec::with_capacity(n_rings);
    let mut rb = Vec::with_capacity(n_rings);
    for r in r_min..=r_max {
        let rr = r as f64 * scale;
        // rr <= h - 2, so every bilinear neighbour is inside the buffer.
        debug_assert!(rr <= centre - 2.0);
        let (mut pa, mut pb) = (Vec::with_capacity(POLAR_ANGLES), Vec::with_capacity(POLAR_ANGLES));
        for &(s, co) in &directions {
            let (fi, fj) = (centre + rr * co, rr * s);
            let (i0, j0) = (fi as usize, fj as usize);
            let (u, v) = (fi - i0 as f64, fj - j0 as f64);
            let k = i0 * h + j0;
            let (w00, w01, w10, w11) = ((1.0 - u) * (1.0 - v), (1.0 - u) * v, u * (1.0 - v), u * v);
            let (c00, c01, c10, c11) = (mag[k], mag[k + 1], mag[k + h], mag[k + h + 1]);
            pa.push(w00 * c00.0 + w01 * c01.0 + w10 * c10.0 + w11 * c11.0);
            pb.push(w00 * c00.1 + w01 * c01.1 + w10 * c10.1 + w11 * c11.1);
        }
        for ring in [&mut pa, &mut pb] {
            let mean = ring.iter().sum::<f64>() / ring.len() as f64;
            ring.iter_mut().for_each(|x| *x -= mean);
        }
        ra.push(pa);
        rb.push(pb);
    }
    (ra, rb)
}

/// Rotation between two scans from their spectrum magnitudes. Returns the
/// refined angle and the score of every candidate.
pub fn estimate_rotation(
    s_prev: &CartesianScan,
    s_curr: &CartesianScan,
    theta_search: f64,
    n_theta: usize,
) -> Result<(f64, Vec<f64>)> {
    check_shapes(s_prev, s_curr)?;
    let params = MatchParams {
        theta_search,
        n_theta,
        ..MatchParams::default()
    };
    params.validate()?;
    if !has_structure(&s_prev.power) || !has_structure(&s_curr.power) {
        return Err(Error::NoStructure("rotation search"));
    }
    let (rp, rc) = polar_log_spectra(&s_prev.power, &s_curr.power);

    // Sum over rings of circular angular cross-correlations.
    let fwd = plan(POLAR_ANGLES, false);
    let inv = plan(POLAR_ANGLES, true);
    let mut acc = vec![Complex::default(); POLAR_ANGLES];
    let mut z = vec![Complex::default(); POLAR_ANGLES];
    for (p, c) in rp.iter().zip(rc.iter()) {
        for (zk, (&x, &y)) in z.iter_mut().zip(p.iter().zip(c)) {
            *zk = Complex::new(x, y);
        }
        fwd.process(&mut z);
        for k in 0..POLAR_ANGLES {
            let (fp, fc) = unpack(z[k], z[(POLAR_ANGLES - k) % POLAR_ANGLES]);
            acc[k] += fp * fc.conj();
        }
    }
    inv.process(&mut acc);
    let corr: Vec<f64> = acc.iter().map(|z| z.re / POLAR_ANGLES as f64).collect();

    // corr[s] scores the angular shift s·π/POLAR_ANGLES.
    let step = PI / POLAR_ANGLES as f64;
    let candidates = params.theta_candidates();
    let profile: Vec<f64> = candidates
        .iter()
        .map(|&theta| {
            let f = (theta / step).rem_euclid(POLAR_ANGLES as f64);
            let k0 = (f.floor() as usize) % POLAR_ANGLES;
            let k1 = (k0 + 1) % POLAR_ANGLES;
            let g = f - f.floor();
            (1.0 - g) * corr[k0] + g * corr[k1]
        })
        .collect();
    let (k, _) = argmax(profile.iter().copied());
    let peak = refine_peak_subpixel(&profile, k);
    if peak.at_boundary {
        log::debug!("rotation peak on search boundary");
    }
    let theta_step = 2.0 * theta_search / (n_theta - 1) as f64;
    Ok((-theta_search + peak.location * theta_step, profile))
}

/// Translation between a rotation-compensated previous scan and the current
/// scan. Returns `(t_x, t_y)` in meters and the `n × n` correlation volume.
pub fn estimate_translation(
    s_prev_rotated: &CartesianScan,
    s_curr: &CartesianScan,
) -> Result<((f64, f64), Array2<f64>)> {
    estimate_translation_with(s_prev_rotated, s_curr, false)
}

pub fn estimate_translation_with(
    s_prev_rotated: &CartesianScan,
    s_curr: &CartesianScan,
    phase_correlation: bool,
) -> Result<((f64, f64), Array2<f64>)> {
    check_shapes(s_prev_rotated, s_curr)?;
    if !has_structure(&s_prev_rotated.power) || !has_structure(&s_curr.power) {
        return Err(Error::NoStructure("translation search"));
    }
    let n = s_curr.n();
    let m = (2 * n).next_power_of_two();
    let a = prepare_for_correlation(&s_prev_rotated.power);
    let b = prepare_for_correlation(&s_curr.power);
    let mut buf = vec![Complex::default(); m * m];
    for (((i, j), &x), &y) in a.indexed_iter().zip(b.iter()) {
        buf[i * m + j] = Complex::new(x, y);
    }
    fft2(&mut buf, m, m, false);
    let mut prod: Vec<Complex<f64>> = (0..m * m)
        .map(|k| {
            let (i, j) = (k / m, k % m);
            let (fa, fb) = unpack(buf[k], buf[((m - i) % m) * m + (m - j) % m]);
            let z = fa * fb.conj();
            if phase_correlation {
                let mag = z.norm();
                if mag > 1e-12 {
                    z / mag
                } else {
                    Complex::default()
                }
            } else {
                z
            }
        })
        .collect();
    fft2(&mut prod, m, m, true);
    let scale = 1.0 / (m * m) as f64;
    let h = n / 2;
    // prod[d] = Σ_p a(p + d)·b(p), so the peak sits at the sensor motion.
    let volume = Array2::from_shape_fn((n, n), |(i, j)| {
        let di = (i + m - h) % m;
        let dj = (j + m - h) % m;
        prod[di * m + dj].re * scale
    });
    let (flat, _) = argmax(volume.iter().copied());
    let peak = (flat / n, flat % n);
    let (pi, pj) = refine_peak_subpixel_2d(&volume, peak);
    let res = s_curr.resolution;
    Ok((((pi.location - h as f64) * res, (pj.location - h as f64) * res), volume))
}

fn smoothed(img: &CartesianScan, sigma: f64) -> CartesianScan {
    CartesianScan {
        power: gaussian_blur(&img.power, sigma),
        resolution: img.resolution,
    }
}

/// Rotation then translation on two already masked images.
pub fn match_images(prev: &CartesianScan, curr: &CartesianScan, params: &MatchParams) -> Result<MatchResult> {
    params.validate()?;
    check_shapes(prev, curr)?;
    let prev = smoothed(prev, params.smoothing_px);
    let curr = smoothed(curr, params.smoothing_px);
    let (theta, rotation_profile) = estimate_rotation(&prev, &curr, params.theta_search, params.n_theta)?;
    let prev_rot = rotate_image(&prev, theta);
    let ((tx, ty), correlation_volume) = estimate_translation_with(&prev_rot, &curr, params.phase_correlation)?;
    // The translation was measured in the rotated previous frame.
    let (s, c) = theta.sin_cos();
    let pose = SE2Pose::new(c * tx - s * ty, s * tx + c * ty, theta);
    let peak_score = correlation_volume.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(MatchResult {
        pose,
        rotation_profile,
        correlation_volume,
        peak_score,
        resolution: curr.resolution,
    })
}

/// Masks `channel_1` of both scans with the given per-scan masks and matches.
pub fn match_scans_with_masks(
    prev: &TwoChannelScan,
    curr: &TwoChannelScan,
    mask_prev: &Mask,
    mask_curr: &Mask,
    params: &MatchParams,
) -> Result<MatchResult> {
    let a = apply_mask(&prev.channel_1, mask_prev)?;
    let b = apply_mask(&curr.channel_1, mask_curr)?;
    match_images(&a, &b, params)
}

/// Computes the masks with `strategy`, applies them and matches.
pub fn match_scans(
    prev: &TwoChannelScan,
    curr: &TwoChannelScan,
    strategy: &MaskStrategy,
    params: &MatchParams,
) -> Result<MatchResult> {
    check_shapes(&prev.channel_1, &curr.channel_1)?;
    let mp = compute_mask(strategy, prev)?;
    let mc = compute_mask(strategy, curr)?;
    match_scans_with_masks(prev, curr, &mp, &mc, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(n: usize, seed: u64, count: usize) -> CartesianScan {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres: Vec<(f64, f64, f64, f64)> = (0..count)
            .map(|_| {
                (
                    rng.random_range(0.15..0.85) * n as f64,
                    rng.random_range(0.15..0.85) * n as f64,
                    rng.random_range(0.5..2.0),
                    rng.random_range(1.0..2.5),
                )
            })
            .collect();
        let power = Array2::from_shape_fn((n, n), |(i, j)| {
            centres
                .iter()
                .map(|&(ci, cj, a, s)| {
                    a * (-((i as f64 - ci).powi(2) + (j as f64 - cj).powi(2)) / (2.0 * s * s)).exp()
                })
                .sum()
        });
        CartesianScan { power, resolution: 0.4 }
    }

    /// `out(p) = in(R(θ)p + t)` with `t` in meters.
    fn view_from(img: &CartesianScan, pose: &SE2Pose) -> CartesianScan {
        let n = img.n();
        let c = (n as f64 - 1.0) / 2.0;
        let res = img.resolution;
        let power = Array2::from_shape_fn((n, n), |(i, j)| {
            let p = [(i as f64 - c) * res, (j as f64 - c) * res];
            let q = pose.transform_point(p);
            sample_bilinear(&img.power, q[0] / res + c, q[1] / res + c)
        });
        CartesianScan { power, resolution: res }
    }

    fn shift_px(img: &CartesianScan, di: isize, dj: isize) -> CartesianScan {
        let n = img.n() as isize;
        let power = Array2::from_shape_fn(img.power.dim(), |(i, j)| {
            let (si, sj) = (i as isize + di, j as isize + dj);
            if si >= 0 && sj >= 0 && si < n && sj < n {
                img.power[[si as usize, sj as usize]]
            } else {
                0.0
            }
        });
        CartesianScan { power, resolution: img.resolution }
    }

    #[test]
    fn parabola_examples() {
        assert_eq!(refine_peak_subpixel(&[1.0, 2.0, 1.0], 1).location, 1.0);
        let p = refine_peak_subpixel(&[1.0, 2.0, 1.5], 1);
        assert!((p.location - (1.0 + 1.0 / 6.0)).abs() < 1e-12);
        assert!(!p.at_boundary);
        let b = refine_peak_subpixel(&[3.0, 2.0, 1.0], 0);
        assert!(b.at_boundary);
        assert_eq!(b.location, 0.0);
        assert!(refine_peak_subpixel(&[1.0, 2.0, 3.0], 2).at_boundary);
    }

    #[test]
    fn self_match_rotation_and_translation() {
        let img = blobs(128, 1, 40);
        let (theta, profile) = estimate_rotation(&img, &img, 0.5, 256).unwrap();
        assert!(theta.abs() < 1e-3, "{theta}");
        assert_eq!(profile.len(), 256);
        let ((tx, ty), vol) = estimate_translation(&img, &img).unwrap();
        assert!(tx.abs() < 0.1 * 0.4 && ty.abs() < 0.1 * 0.4);
        let (flat, _) = argmax(vol.iter().copied());
        assert_eq!((flat / 128, flat % 128), (64, 64));
    }

    #[test]
    fn constructed_rotation_is_recovered() {
        let img = blobs(128, 2, 60);
        let rotated = rotate_image(&img, 0.1);
        let (theta, _) = estimate_rotation(&img, &rotated, 0.5, 256).unwrap();
        assert!((theta - 0.1).abs() < 0.005, "{theta}");
    }

    #[test]
    fn constructed_shift_is_recovered() {
        let img = blobs(128, 3, 50);
        let curr = shift_px(&img, 3, -2);
        let ((tx, ty), _) = estimate_translation(&img, &curr).unwrap();
        assert!((tx - 3.0 * 0.4).abs() < 0.25 * 0.4, "{tx}");
        assert!((ty + 2.0 * 0.4).abs() < 0.25 * 0.4, "{ty}");
    }

    #[test]
    fn phase_correlation_flag_finds_the_same_shift() {
        let img = blobs(96, 4, 50);
        let curr = shift_px(&img, -5, 4);
        let ((tx, ty), _) = estimate_translation_with(&img, &curr, true).unwrap();
        assert!((tx + 5.0 * 0.4).abs() < 0.5 * 0.4 && (ty - 4.0 * 0.4).abs() < 0.5 * 0.4);
    }

    #[test]
    fn fft_volume_equals_spatial_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 64;
        let a = CartesianScan {
            power: Array2::from_shape_fn((n, n), |_| rng.random::<f64>()),
            resolution: 1.0,
        };
        let b = CartesianScan {
            power: Array2::from_shape_fn((n, n), |_| rng.random::<f64>()),
            resolution: 1.0,
        };
        let (_, vol) = estimate_translation(&a, &b).unwrap();
        let pa = prepare_for_correlation(&a.power);
        let pb = prepare_for_correlation(&b.power);
        for dx in -10isize..=10 {
            for dy in -10isize..=10 {
                let mut direct = 0.0;
                for i in 0..n as isize {
                    for j in 0..n as isize {
                        let (si, sj) = (i + dx, j + dy);
                        if si >= 0 && sj >= 0 && si < n as isize && sj < n as isize {
                            direct += pa[[si as usize, sj as usize]] * pb[[i as usize, j as usize]];
                        }
                    }
                }
                let v = vol[[(dx + 32) as usize, (dy + 32) as usize]];
                assert!((v - direct).abs() <= 1e-6 * direct.abs().max(1e-3), "{dx},{dy}");
            }
        }
    }

    #[test]
    fn brute_force_rotation_agrees() {
        let n = 96;
        let params = MatchParams::default();
        let cands = params.theta_candidates();
        let step = cands[1] - cands[0];
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for scene in 0..20 {
            let img = blobs(n, 100 + scene, 50);
            let truth = rng.random_range(-0.3..0.3);
            let curr = rotate_image(&img, truth);
            let (theta, _) = estimate_rotation(&img, &curr, params.theta_search, params.n_theta).unwrap();
            // Normalized, since rotation moves energy across the border.
            let (best, _) = argmax(cands.iter().map(|&t| {
                let r = prepare_for_correlation(&rotate_image(&img, t).power);
                let c = prepare_for_correlation(&curr.power);
                let dot = |a: &Array2<f64>, b: &Array2<f64>| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
                dot(&r, &c) / (dot(&r, &r) * dot(&c, &c)).sqrt()
            }));
            assert!((theta - cands[best]).abs() <= step, "{theta} vs {}", cands[best]);
        }
    }

    #[test]
    fn rotation_is_antisymmetric() {
        let img = blobs(128, 5, 60);
        let curr = view_from(&img, &SE2Pose::new(1.0, -0.5, 0.15));
        let (ab, _) = estimate_rotation(&img, &curr, 0.5, 256).unwrap();
        let (ba, _) = estimate_rotation(&curr, &img, 0.5, 256).unwrap();
        assert!((ab + ba).abs() <= 2.0 / 255.0, "{ab} {ba}");
    }

    #[test]
    fn full_match_recovers_pose() {
        let img = blobs(160, 6, 80);
        let truth = SE2Pose::new(1.2, -0.6, 0.08);
        let curr = view_from(&img, &truth);
        let r = match_images(&img, &curr, &MatchParams::default()).unwrap();
        assert!((r.pose.t_x - truth.t_x).abs() < 0.1, "{:?}", r.pose);
        assert!((r.pose.t_y - truth.t_y).abs() < 0.1, "{:?}", r.pose);
        assert!((r.pose.theta - truth.theta).abs() < 0.01, "{:?}", r.pose);
    }

    #[test]
    fn shifting_both_scans_keeps_the_estimate() {
        let img = blobs(128, 8, 50);
        let curr = shift_px(&img, 2, 1);
        let ((tx, ty), _) = estimate_translation(&img, &curr).unwrap();
        let ((tx2, ty2), _) = estimate_translation(&shift_px(&img, -4, 3), &shift_px(&curr, -4, 3)).unwrap();
        assert!((tx - tx2).abs() < 0.1 * 0.4 && (ty - ty2).abs() < 0.1 * 0.4);
    }

    #[test]
    fn degenerate_input_errors() {
        let z = CartesianScan {
            power: Array2::zeros((64, 64)),
            resolution: 1.0,
        };
        let img = blobs(64, 1, 10);
        assert!(matches!(estimate_rotation(&z, &img, 0.5, 256), Err(Error::NoStructure(_))));
        assert!(matches!(estimate_translation(&img, &z), Err(Error::NoStructure(_))));
        let other = blobs(32, 1, 5);
        assert!(matches!(estimate_translation(&img, &other), Err(Error::ShapeMismatch { .. })));
    }
}
