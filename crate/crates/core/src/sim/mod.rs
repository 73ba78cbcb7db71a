//! Deterministic FMCW scanning-radar simulator.
//!
//! Every visible reflector deposits a Gaussian range blob on the azimuths
//! whose beam covers it. The perceived range carries the modulation-dependent
//! Doppler shift, so consecutive azimuths with opposite sawtooth directions
//! show the characteristic zig-zag displacement whenever the reflector has a
//! radial velocity relative to the sensor.

pub mod scenes;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{wrap, EgoVelocity, PolarScan, RadarConfig, SE2Pose};

/// Range blob standard deviation, in bins.
pub const BLOB_SIGMA_BINS: f64 = 1.5;
/// Standard deviation of the Gaussian beam gain, in azimuth spacings; the
/// gain is cut off at three sigma. The beam is wide enough that either
/// modulation channel alone samples every reflector almost uniformly.
pub const BEAM_SIGMA_AZIMUTHS: f64 = 1.5;

/// A static point reflector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflector {
    pub position: [f64; 2],
    pub reflectivity: f64,
}

/// A reflector moving with constant world-frame velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingReflector {
    /// Position at `t = 0`.
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub reflectivity: f64,
}

impl MovingReflector {
    pub fn position_at(&self, t: f64) -> [f64; 2] {
        [
            self.position[0] + self.velocity[0] * t,
            self.position[1] + self.velocity[1] * t,
        ]
    }
}

/// Synthetic environment. Walls and vehicles are stored as dense point samplings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct World {
    pub static_points: Vec<Reflector>,
    pub dynamic_objects: Vec<MovingReflector>,
}

impl World {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_point(&mut self, position: [f64; 2], reflectivity: f64) {
        self.static_points.push(Reflector {
            position,
            reflectivity,
        });
    }

    /// Samples the segment `a → b` every `spacing` meters (both ends included).
    pub fn add_wall(&mut self, a: [f64; 2], b: [f64; 2], reflectivity: f64, spacing: f64) {
        for p in sample_segment(a, b, spacing) {
            self.add_point(p, reflectivity);
        }
    }

    pub fn add_mover(&mut self, position: [f64; 2], velocity: [f64; 2], reflectivity: f64) {
        self.dynamic_objects.push(MovingReflector {
            position,
            velocity,
            reflectivity,
        });
    }

    /// Adds a rectangular vehicle outline of `length × width` centred at
    /// `center`, aligned with its velocity (or with +x when at rest).
    pub fn add_moving_box(
        &mut self,
        center: [f64; 2],
        velocity: [f64; 2],
        length: f64,
        width: f64,
        reflectivity: f64,
        spacing: f64,
    ) {
        let speed = velocity[0].hypot(velocity[1]);
        let (c, s) = if speed > 0.0 {
            (velocity[0] / speed, velocity[1] / speed)
        } else {
            (1.0, 0.0)
        };
        let (hl, hw) = (length / 2.0, width / 2.0);
        let corners = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        let world = |p: [f64; 2]| [center[0] + c * p[0] - s * p[1], center[1] + s * p[0] + c * p[1]];
        for k in 0..4 {
            let a = world(corners[k]);
            let b = world(corners[(k + 1) % 4]);
            let mut pts = sample_segment(a, b, spacing);
            pts.pop();
            for p in pts {
                self.add_mover(p, velocity, reflectivity);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.static_points.len() + self.dynamic_objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty("world has no reflectors"));
        }
        let refl = self
            .static_points
            .iter()
            .map(|p| p.reflectivity)
            .chain(self.dynamic_objects.iter().map(|p| p.reflectivity));
        for r in refl {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidConfig(format!("reflectivity must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

fn sample_segment(a: [f64; 2], b: [f64; 2], spacing: f64) -> Vec<[f64; 2]> {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let n = ((len / spacing.max(1e-6)).ceil() as usize).max(1);
    (0..=n)
        .map(|k| {
            let f = k as f64 / n as f64;
            [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
        })
        .collect()
}

/// One ground-truth sample: the pose is the sensor pose at `timestamp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub timestamp: f64,
    pub pose: SE2Pose,
    pub velocity: EgoVelocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    /// Validates ordering and that the stated velocities agree with the
    /// finite difference of consecutive poses within 5 %.
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self> {
        for w in samples.windows(2) {
            let dt = w[1].timestamp - w[0].timestamp;
            if !(dt > 0.0) {
                return Err(Error::Format(format!(
                    "timestamps must strictly increase ({} then {})",
                    w[0].timestamp, w[1].timestamp
                )));
            }
            let fd = w[0].pose.inverse().compose(&w[1].pose).log(dt);
            let avg = [
                0.5 * (w[0].velocity.v_x + w[1].velocity.v_x),
                0.5 * (w[0].velocity.v_y + w[1].velocity.v_y),
                0.5 * (w[0].velocity.omega + w[1].velocity.omega),
            ];
            let diff = (fd.v_x - avg[0]).hypot(fd.v_y - avg[1]);
            let scale = fd.speed().max(avg[0].hypot(avg[1]));
            let dw = (fd.omega - avg[2]).abs();
            let wscale = fd.omega.abs().max(avg[2].abs());
            if diff > 0.05 * scale + 1e-6 || dw > 0.05 * wscale + 1e-6 {
                return Err(Error::Format(format!(
                    "velocity at t={} disagrees with pose finite difference",
                    w[0].timestamp
                )));
            }
        }
        Ok(Self { samples })
    }

    /// Derives body-frame velocities from the poses by finite differences.
    pub fn from_poses(timestamps: &[f64], poses: &[SE2Pose]) -> Result<Self> {
        if timestamps.len() != poses.len() {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: poses.len(),
            });
        }
        let n = poses.len();
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let velocity = if n < 2 {
                EgoVelocity::default()
            } else {
                let (a, b) = if k + 1 < n { (k, k + 1) } else { (k - 1, k) };
                let dt = timestamps[b] - timestamps[a];
                if !(dt > 0.0) {
                    return Err(Error::Format("timestamps must strictly increase".into()));
                }
                poses[a].inverse().compose(&poses[b]).log(dt)
            };
            samples.push(TrajectorySample {
                timestamp: timestamps[k],
                pose: poses[k],
                velocity,
            });
        }
        Self::new_unchecked_velocity(samples)
    }

    fn new_unchecked_velocity(samples: Vec<TrajectorySample>) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].timestamp > w[0].timestamp)) {
            return Err(Error::Format("timestamps must strictly increase".into()));
        }
        Ok(Self { samples })
    }

    /// `n` samples at `rate` Hz moving with a constant body-frame twist.
    pub fn constant_velocity(start: SE2Pose, velocity: EgoVelocity, rate: f64, n: usize) -> Self {
        let dt = 1.0 / rate;
        let step = SE2Pose::exp(&velocity, dt);
        let mut pose = start;
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            samples.push(TrajectorySample {
                timestamp: k as f64 * dt,
                pose,
                velocity,
            });
            pose = pose.compose(&step);
        }
        Self { samples }
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `inv(pose_k) ∘ pose_{k+1}` for every consecutive pair.
    pub fn relative_poses(&self) -> Vec<SE2Pose> {
        self.samples
            .windows(2)
            .map(|w| w[0].pose.inverse().compose(&w[1].pose))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimNoise {
    /// Additive Gaussian power noise per bin.
    pub power_noise_sigma: f64,
    /// Gaussian perturbation of each reflector's perceived range, meters.
    pub range_jitter_sigma: f64,
    /// Probability that a reflector is missing from a whole scan.
    pub speckle_dropout_prob: f64,
    pub seed: u64,
}

impl Default for SimNoise {
    fn default() -> Self {
        Self {
            power_noise_sigma: 0.0,
            range_jitter_sigma: 0.0,
            speckle_dropout_prob: 0.0,
            seed: 0,
        }
    }
}

impl SimNoise {
    pub fn validate(&self) -> Result<()> {
        if !(self.power_noise_sigma >= 0.0 && self.range_jitter_sigma >= 0.0) {
            return Err(Error::InvalidConfig("noise sigmas must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.speckle_dropout_prob) {
            return Err(Error::InvalidConfig("dropout probability must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimParams {
    pub noise: SimNoise,
    /// Render every azimuth from the mid-sweep pose instead of moving the
    /// sensor along its velocity during the revolution.
    pub freeze_sweep_motion: bool,
}

impl SimParams {
    pub fn noise_free() -> Self {
        Self::default()
    }

    pub fn with_noise(noise: SimNoise) -> Self {
        Self {
            noise,
            freeze_sweep_motion: false,
        }
    }
}

/// Range error induced by the Doppler beat for one modulation direction.
///
/// `sign · k · f_e · v_r / (2 s)`: the Doppler beat `k · v_r · f_e / c`
/// converted to range with `c · Δf / (2 · df/dt)`.
pub fn doppler_range_shift(v_r: f64, config: &RadarConfig, modulation_sign: f64) -> f64 {
    modulation_sign * config.doppler_factor * config.carrier_freq * v_r
        / (2.0 * config.sweep_gradient)
}

/// Closing speed between the sensor and a point (positive when the range shrinks).
///
/// `ego_vel` is in the body frame, `point_vel` in the world frame.
pub fn radial_velocity_of_point(
    point_pos: [f64; 2],
    point_vel: [f64; 2],
    ego_pose: &SE2Pose,
    ego_vel: &EgoVelocity,
) -> Result<f64> {
    let dx = point_pos[0] - ego_pose.t_x;
    let dy = point_pos[1] - ego_pose.t_y;
    let range = dx.hypot(dy);
    if !(range > 1e-9) {
        return Err(Error::ZeroRange);
    }
    let ego_world = ego_pose.rotate_vector([ego_vel.v_x, ego_vel.v_y]);
    Ok((dx * (ego_world[0] - point_vel[0]) + dy * (ego_world[1] - point_vel[1])) / range)
}

struct Emitter {
    /// World position at mid-sweep.
    position: [f64; 2],
    velocity: [f64; 2],
    reflectivity: f64,
    range_jitter: f64,
}

/// Renders one revolution.
///
/// `ego_pose` is the sensor pose at mid-sweep; azimuth `i` is acquired at
/// `t0 + i / (scan_rate · n_azimuths)`, and unless
/// [`SimParams::freeze_sweep_motion`] is set the sensor moves with `ego_vel`
/// between azimuths. `scan_index` selects the noise stream.
pub fn synthesize_scan(
    world: &World,
    ego_pose: &SE2Pose,
    ego_vel: &EgoVelocity,
    config: &RadarConfig,
    params: &SimParams,
    t0: f64,
    scan_index: u64,
) -> Result<PolarScan> {
    config.validate()?;
    world.validate()?;
    params.noise.validate()?;

    let n_az = config.n_azimuths;
    let n_bins = config.n_bins;
    let spacing = config.azimuth_spacing();
    let dt_az = config.azimuth_period();
    let t_mid = t0 + 0.5 * config.scan_period();

    let az_poses: Vec<SE2Pose> = (0..n_az)
        .map(|i| {
            if params.freeze_sweep_motion {
                *ego_pose
            } else {
                let t = t0 + i as f64 * dt_az;
                ego_pose.compose(&SE2Pose::exp(ego_vel, t - t_mid))
            }
        })
        .collect();
    let az_inv: Vec<SE2Pose> = az_poses.iter().map(|p| p.inverse()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.noise.seed);
    rng.set_stream(scan_index);
    let jitter = Normal::new(0.0, params.noise.range_jitter_sigma.max(0.0))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut emitters = Vec::with_capacity(world.len());
    let statics = world
        .static_points
        .iter()
        .map(|p| (p.position, [0.0, 0.0], p.reflectivity));
    let movers = world
        .dynamic_objects
        .iter()
        .map(|m| (m.position_at(t_mid), m.velocity, m.reflectivity));
    for (position, velocity, reflectivity) in statics.chain(movers) {
        let dropped = params.noise.speckle_dropout_prob > 0.0
            && rng.random::<f64>() < params.noise.speckle_dropout_prob;
        let range_jitter = if params.noise.range_jitter_sigma > 0.0 {
            jitter.sample(&mut rng)
        } else {
            0.0
        };
        if !dropped {
            emitters.push(Emitter {
                position,
                velocity,
                reflectivity,
                range_jitter,
            });
        }
    }

    let max_range = config.max_range();
    let beam_sigma = BEAM_SIGMA_AZIMUTHS * spacing;
    let beam = 3.0 * beam_sigma;
    let sweep_half = 0.5 * config.scan_period();
    let ego_speed = ego_vel.speed();
    let mut power = ndarray::Array2::<f64>::zeros((n_az, n_bins));
    let sigma_bins = BLOB_SIGMA_BINS;
    let reach = (3.0 * sigma_bins).ceil() as isize;

    for e in &emitters {
        let local = ego_pose.inverse().transform_point(e.position);
        let r_mid = local[0].hypot(local[1]);
        if r_mid > max_range + ego_speed * sweep_half + 1.0 {
            continue;
        }
        // Bearing drift over half a sweep bounds which azimuths can see the point.
        let drift = if params.freeze_sweep_motion {
            0.0
        } else {
            ego_vel.omega.abs() * sweep_half
                + (ego_speed + e.velocity[0].hypot(e.velocity[1])) * sweep_half / r_mid.max(1e-3)
        };
        let half_window = ((beam + drift.min(std::f64::consts::PI)) / spacing).ceil() as isize + 1;
        let bearing_mid = local[1].atan2(local[0]);
        let center = (bearing_mid / spacing).round() as isize;
        let lo = center - half_window;
        let hi = center + half_window;
        let span = (hi - lo + 1) as usize;
        for k in 0..span.min(n_az) {
            let i = (lo + k as isize).rem_euclid(n_az as isize) as usize;
            let t_i = t0 + i as f64 * dt_az;
            let world_pos = [
                e.position[0] + e.velocity[0] * (t_i - t_mid),
                e.position[1] + e.velocity[1] * (t_i - t_mid),
            ];
            let q = az_inv[i].transform_point(world_pos);
            let range = q[0].hypot(q[1]);
            if !(range > config.bin_size) || range > max_range {
                continue;
            }
            let off = wrap(q[1].atan2(q[0]) - config.azimuth_angle(i)).abs();
            if off >= beam {
                continue;
            }
            let gain = (-0.5 * (off / beam_sigma).powi(2)).exp();
            let los = [q[0] / range, q[1] / range];
            let u = az_inv[i].rotate_vector(e.velocity);
            let v_r = los[0] * (ego_vel.v_x - u[0]) + los[1] * (ego_vel.v_y - u[1]);
            let perceived = range
                + e.range_jitter
                + doppler_range_shift(v_r, config, config.modulation[i].sign());
            if !(perceived > 0.0) || perceived > max_range {
                continue;
            }
            let amp = e.reflectivity * gain / range;
            let c = perceived / config.bin_size;
            let c_int = c.round() as isize;
            let mut row = power.row_mut(i);
            for j in (c_int - reach)..=(c_int + reach) {
                if j < 0 || j >= n_bins as isize {
                    continue;
                }
                let d = j as f64 - c;
                if d.abs() > 3.0 * sigma_bins {
                    continue;
                }
                row[j as usize] += amp * (-0.5 * d * d / (sigma_bins * sigma_bins)).exp();
            }
        }
    }

    let sigma = params.noise.power_noise_sigma;
    let mut out = ndarray::Array2::<f32>::zeros((n_az, n_bins));
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for (o, p) in out.iter_mut().zip(power.iter()) {
            *o = (p + normal.sample(&mut rng)).max(0.0) as f32;
        }
    } else {
        for (o, p) in out.iter_mut().zip(power.iter()) {
            *o = *p as f32;
        }
    }

    let t0_us = (t0 * 1e6).round() as i64;
    let timestamps_us = (0..n_az)
        .map(|i| (t0_us + (i as f64 * dt_az * 1e6).round() as i64).max(0) as u64)
        .collect();

    Ok(PolarScan {
        power: out,
        azimuth_angles: (0..n_az).map(|i| config.azimuth_angle(i)).collect(),
        modulation: config.modulation.clone(),
        timestamps_us,
    })
}

/// Renders one scan per trajectory sample and returns the ground-truth
/// relative poses between consecutive samples.
///
/// Each sample's timestamp is treated as the mid-sweep time of its scan.
pub fn simulate_sequence(
    world: &World,
    trajectory: &Trajectory,
    config: &RadarConfig,
    params: &SimParams,
) -> Result<(Vec<PolarScan>, Vec<SE2Pose>)> {
    if trajectory.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let half = 0.5 * config.scan_period();
    let scans = trajectory
        .samples()
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            synthesize_scan(
                world,
                &s.pose,
                &s.velocity,
                config,
                params,
                s.timestamp - half,
                k as u64,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((scans, trajectory.relative_poses()))
}
