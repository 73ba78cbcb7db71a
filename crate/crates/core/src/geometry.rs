//! Shared radar-domain types and SE(2) algebra.
//!
//! Frame convention used throughout the crate: +x is forward, +y is
//! lateral-left, azimuth 0 points along +x and azimuth angles increase
//! counter-clockwise.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Sawtooth direction used for one azimuth of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    /// Rising sawtooth, sign +1.
    Standard,
    /// Falling sawtooth, sign -1.
    Reversed,
}

impl Modulation {
    pub fn sign(self) -> f64 {
        match self {
            Modulation::Standard => 1.0,
            Modulation::Reversed => -1.0,
        }
    }

    pub fn from_sign(sign: f64) -> Self {
        if sign >= 0.0 {
            Modulation::Standard
        } else {
            Modulation::Reversed
        }
    }
}

/// Alternating schedule starting with [`Modulation::Standard`] on azimuth 0.
pub fn alternating_schedule(n_azimuths: usize) -> Vec<Modulation> {
    (0..n_azimuths)
        .map(|i| {
            if i % 2 == 0 {
                Modulation::Standard
            } else {
                Modulation::Reversed
            }
        })
        .collect()
}

/// Sensor description shared by the simulator and every estimator.
///
/// `carrier_freq` and `sweep_gradient` default to placeholder values for a
/// 76.5 GHz automotive sensor; the sweep parameters of real hardware have to
/// be supplied by the user.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarConfig {
    pub n_azimuths: usize,
    pub n_bins: usize,
    /// Range bin size in meters.
    pub bin_size: f64,
    /// Revolutions per second.
    pub scan_rate: f64,
    /// Emitted carrier frequency `f_e` in Hz.
    pub carrier_freq: f64,
    /// Sweep gradient `|df/dt|` in Hz/s.
    pub sweep_gradient: f64,
    /// Multiplier on the Doppler beat; 1.0 uses `Δf = Δv/c · f_e` as is.
    pub doppler_factor: f64,
    pub modulation: Vec<Modulation>,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            n_azimuths: 400,
            n_bins: 3600,
            bin_size: 0.0438,
            scan_rate: 4.0,
            carrier_freq: 76.5e9,
            sweep_gradient: 1.0e12,
            doppler_factor: 1.0,
            modulation: alternating_schedule(400),
        }
    }
}

impl RadarConfig {
    /// Default sensor with a different azimuth/bin count; the schedule is
    /// regenerated to match.
    pub fn with_geometry(n_azimuths: usize, n_bins: usize) -> Self {
        Self {
            n_azimuths,
            n_bins,
            modulation: alternating_schedule(n_azimuths),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_azimuths == 0 || self.n_azimuths % 2 != 0 {
            return bad(format!("n_azimuths must be even and positive, got {}", self.n_azimuths));
        }
        if self.n_bins == 0 {
            return bad("n_bins must be positive".into());
        }
        if self.modulation.len() != self.n_azimuths {
            return bad(format!(
                "modulation schedule has {} entries for {} azimuths",
                self.modulation.len(),
                self.n_azimuths
            ));
        }
        for (name, value) in [
            ("bin_size", self.bin_size),
            ("carrier_freq", self.carrier_freq),
            ("sweep_gradient", self.sweep_gradient),
            ("scan_rate", self.scan_rate),
            ("doppler_factor", self.doppler_factor),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {value}"));
            }
        }
        Ok(())
    }

    pub fn max_range(&self) -> f64 {
        self.n_bins as f64 * self.bin_size
    }

    pub fn azimuth_angle(&self, index: usize) -> f64 {
        TAU * index as f64 / self.n_azimuths as f64
    }

    pub fn azimuth_spacing(&self) -> f64 {
        TAU / self.n_azimuths as f64
    }

    /// Seconds between two consecutive azimuths.
    pub fn azimuth_period(&self) -> f64 {
        1.0 / (self.scan_rate * self.n_azimuths as f64)
    }

    /// Seconds per revolution.
    pub fn scan_period(&self) -> f64 {
        1.0 / self.scan_rate
    }

    pub fn is_alternating(&self) -> bool {
        is_alternating(&self.modulation)
    }
}

pub(crate) fn is_alternating(schedule: &[Modulation]) -> bool {
    schedule.len() >= 2
        && schedule.len() % 2 == 0
        && schedule.windows(2).all(|w| w[0] != w[1])
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap(theta))
}

/// Infallible variant for internal use where finiteness is already known.
pub(crate) fn wrap(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Rigid planar transform: rotation `theta` followed by translation `(t_x, t_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SE2Pose {
    pub t_x: f64,
    pub t_y: f64,
    pub theta: f64,
}

impl SE2Pose {
    pub const IDENTITY: SE2Pose = SE2Pose {
        t_x: 0.0,
        t_y: 0.0,
        theta: 0.0,
    };

    pub fn new(t_x: f64, t_y: f64, theta: f64) -> Self {
        Self {
            t_x,
            t_y,
            theta: wrap(theta),
        }
    }

    /// `self ∘ other`: apply `other` in the frame of `self`.
    pub fn compose(&self, other: &SE2Pose) -> SE2Pose {
        let (s, c) = self.theta.sin_cos();
        SE2Pose::new(
            self.t_x + c * other.t_x - s * other.t_y,
            self.t_y + s * other.t_x + c * other.t_y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> SE2Pose {
        let (s, c) = self.theta.sin_cos();
        SE2Pose::new(
            -(c * self.t_x + s * self.t_y),
            s * self.t_x - c * self.t_y,
            -self.theta,
        )
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.t_x + c * p[0] - s * p[1], self.t_y + s * p[0] + c * p[1]]
    }

    /// Rotates a vector (no translation).
    pub fn rotate_vector(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn translation_norm(&self) -> f64 {
        self.t_x.hypot(self.t_y)
    }

    /// Pose reached after moving with a constant body-frame twist for `dt` seconds.
    pub fn exp(vel: &EgoVelocity, dt: f64) -> SE2Pose {
        let phi = vel.omega * dt;
        let (vx, vy) = (vel.v_x * dt, vel.v_y * dt);
        let (a, b) = if phi.abs() < 1e-9 {
            (1.0 - phi * phi / 6.0, phi / 2.0)
        } else {
            (phi.sin() / phi, (1.0 - phi.cos()) / phi)
        };
        SE2Pose::new(a * vx - b * vy, b * vx + a * vy, phi)
    }

    /// Constant twist that reaches `self` from the identity in `dt` seconds.
    pub fn log(&self, dt: f64) -> EgoVelocity {
        let phi = self.theta;
        let (a, b) = if phi.abs() < 1e-9 {
            (1.0 - phi * phi / 6.0, phi / 2.0)
        } else {
            (phi.sin() / phi, (1.0 - phi.cos()) / phi)
        };
        // Invert [[a, -b], [b, a]].
        let det = a * a + b * b;
        let vx = (a * self.t_x + b * self.t_y) / det;
        let vy = (-b * self.t_x + a * self.t_y) / det;
        EgoVelocity {
            v_x: vx / dt,
            v_y: vy / dt,
            omega: phi / dt,
        }
    }
}

/// Body-frame velocity of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EgoVelocity {
    pub v_x: f64,
    pub v_y: f64,
    pub omega: f64,
}

impl EgoVelocity {
    pub fn new(v_x: f64, v_y: f64, omega: f64) -> Result<Self> {
        if !(v_x.is_finite() && v_y.is_finite() && omega.is_finite()) {
            return Err(Error::NonFinite("velocity"));
        }
        Ok(Self { v_x, v_y, omega })
    }

    pub fn forward(v_x: f64) -> Self {
        Self {
            v_x,
            v_y: 0.0,
            omega: 0.0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }
}

/// One radar revolution in polar form.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarScan {
    /// `n_azimuths × n_bins` received power.
    pub power: Array2<f32>,
    pub azimuth_angles: Vec<f64>,
    pub modulation: Vec<Modulation>,
    /// Per-azimuth acquisition time in microseconds.
    pub timestamps_us: Vec<u64>,
}

impl PolarScan {
    pub fn zeros(config: &RadarConfig) -> Self {
        Self {
            power: Array2::zeros((config.n_azimuths, config.n_bins)),
            azimuth_angles: (0..config.n_azimuths).map(|i| config.azimuth_angle(i)).collect(),
            modulation: config.modulation.clone(),
            timestamps_us: vec![0; config.n_azimuths],
        }
    }

    pub fn n_azimuths(&self) -> usize {
        self.power.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.power.ncols()
    }

    pub fn timestamp(&self, azimuth: usize) -> f64 {
        self.timestamps_us[azimuth] as f64 * 1e-6
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_azimuths();
        if self.azimuth_angles.len() != n || self.modulation.len() != n || self.timestamps_us.len() != n
        {
            return Err(Error::Format(format!(
                "per-azimuth arrays disagree with {n} power rows"
            )));
        }
        if self.power.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Format("power must be finite and non-negative".into()));
        }
        let increasing = self.azimuth_angles.windows(2).all(|w| w[1] > w[0]);
        let in_range = self
            .azimuth_angles
            .iter()
            .all(|a| (0.0..TAU).contains(a));
        if !(increasing && in_range) {
            return Err(Error::Format("azimuth angles must increase over [0, 2π)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &SE2Pose, b: &SE2Pose, tol: f64) -> bool {
        (a.t_x - b.t_x).abs() < tol
            && (a.t_y - b.t_y).abs() < tol
            && wrap(a.theta - b.theta).abs() < tol
    }

    #[test]
    fn compose_examples() {
        let p = SE2Pose::new(0.3, -1.2, 0.7);
        assert_eq!(SE2Pose::IDENTITY.compose(&p), p);

        let step = SE2Pose::new(1.0, 0.0, 0.0);
        assert_eq!(step.compose(&step), SE2Pose::new(2.0, 0.0, 0.0));

        let turned = SE2Pose::new(0.0, 0.0, PI / 2.0).compose(&step);
        assert!(close(&turned, &SE2Pose::new(0.0, 1.0, PI / 2.0), 1e-12));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(SE2Pose::IDENTITY.inverse(), SE2Pose::IDENTITY);
        assert!(close(
            &SE2Pose::new(1.0, 0.0, 0.0).inverse(),
            &SE2Pose::new(-1.0, 0.0, 0.0),
            1e-15
        ));
        let p = SE2Pose::new(1.0, 2.0, PI / 3.0);
        assert!(close(&p.compose(&p.inverse()), &SE2Pose::IDENTITY, 1e-12));
        assert!(close(&p.inverse().compose(&p), &SE2Pose::IDENTITY, 1e-12));
    }

    #[test]
    fn wrap_angle_examples() {
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        assert!(wrap_angle(TAU).unwrap().abs() < 1e-15);
        assert!((wrap_angle(3.5 * PI).unwrap() + 0.5 * PI).abs() < 1e-12);
        assert_eq!(wrap_angle(PI).unwrap(), PI);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn default_config_matches_sensor_geometry() {
        let cfg = RadarConfig::default();
        assert_eq!(cfg.n_azimuths, 400);
        assert_eq!(cfg.n_bins, 3600);
        assert_eq!(cfg.bin_size, 0.0438);
        assert_eq!(cfg.scan_rate, 4.0);
        assert_eq!(cfg.modulation[0], Modulation::Standard);
        assert_eq!(cfg.modulation[1], Modulation::Reversed);
        assert!(cfg.is_alternating());
        cfg.validate().unwrap();
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = RadarConfig::default();
        cfg.n_azimuths = 401;
        assert!(cfg.validate().is_err());
        let mut cfg = RadarConfig::default();
        cfg.bin_size = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RadarConfig::default();
        cfg.modulation.pop();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exp_log_round_trip() {
        let v = EgoVelocity::new(4.0, 0.5, 0.3).unwrap();
        let p = SE2Pose::exp(&v, 0.25);
        let back = p.log(0.25);
        assert!((back.v_x - v.v_x).abs() < 1e-12);
        assert!((back.v_y - v.v_y).abs() < 1e-12);
        assert!((back.omega - v.omega).abs() < 1e-12);
    }

    fn pose() -> impl Strategy<Value = SE2Pose> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64)
            .prop_map(|(x, y, t)| SE2Pose::new(x, y, t))
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in pose(), b in pose(), c in pose()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(close(&left, &right, 1e-9));
        }

        #[test]
        fn inverse_round_trips(a in pose()) {
            prop_assert!(close(&a.compose(&a.inverse()), &SE2Pose::IDENTITY, 1e-9));
        }

        #[test]
        fn theta_always_wrapped(a in pose(), b in pose()) {
            let c = a.compose(&b);
            prop_assert!(c.theta > -PI && c.theta <= PI);
        }

        #[test]
        fn wrap_preserves_angle_mod_tau(t in -1e3..1e3f64) {
            let w = wrap_angle(t).unwrap();
            prop_assert!(w > -PI && w <= PI);
            let k = ((t - w) / TAU).round();
            prop_assert!((t - w - k * TAU).abs() < 1e-9);
        }
    }
}
