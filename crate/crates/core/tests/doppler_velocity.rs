use rdo_core::doppler::{estimate_motion_single_scan, DopplerParams};
use rdo_core::sim::{scenes, synthesize_scan, SimNoise, SimParams};
use rdo_core::{EgoVelocity, RadarConfig, SE2Pose};

fn scan_at(v: EgoVelocity, params: &SimParams) -> (rdo_core::PolarScan, RadarConfig) {
    let radar = RadarConfig::with_geometry(400, 1400);
    let world = scenes::feature_rich(21, (-60.0, 60.0));
    let scan = synthesize_scan(&world, &SE2Pose::IDENTITY, &v, &radar, params, 0.0, 0).unwrap();
    (scan, radar)
}

#[test]
fn recovers_ego_velocity_from_one_scan() {
    let cases = [(3.0, 0.0), (6.0, 0.5), (-2.0, 0.0), (9.0, -1.0)];
    for (vx, vy) in cases {
        let v = EgoVelocity::new(vx, vy, 0.0).unwrap();
        let (scan, radar) = scan_at(v, &SimParams::noise_free());
        let est = estimate_motion_single_scan(&scan, &radar, &DopplerParams::default());
        assert!(est.confident, "{vx},{vy}: {:?}", est.failure);
        assert!((est.velocity.v_x - vx).abs() < 0.15, "{vx},{vy}: {:?}", est.velocity);
        assert!((est.velocity.v_y - vy).abs() < 0.3, "{vx},{vy}: {:?}", est.velocity);
        let period = radar.scan_period();
        assert!((est.t_x - est.velocity.v_x * period).abs() < 1e-12);
    }
}

#[test]
fn noisy_scan_still_tracks_forward_speed() {
    let noise = SimNoise {
        power_noise_sigma: 0.01,
        range_jitter_sigma: 0.01,
        speckle_dropout_prob: 0.05,
        seed: 8,
    };
    let (scan, radar) = scan_at(EgoVelocity::forward(5.0), &SimParams::with_noise(noise));
    let est = estimate_motion_single_scan(&scan, &radar, &DopplerParams::default());
    assert!(est.confident);
    assert!((est.velocity.v_x - 5.0).abs() < 0.25, "{:?}", est.velocity);
    let best = est
        .logits
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |a, (i, &l)| if l > a.1 { (i, l) } else { a })
        .0;
    assert_eq!(best, est.bins.index_of(est.t_x));
}

#[test]
fn constant_modulation_is_unconfident() {
    let (mut scan, radar) = scan_at(EgoVelocity::forward(5.0), &SimParams::noise_free());
    let first = scan.modulation[0];
    scan.modulation.iter_mut().for_each(|m| *m = first);
    let est = estimate_motion_single_scan(&scan, &radar, &DopplerParams::default());
    assert!(!est.confident);
    assert!(est.logits.iter().all(|&l| l == est.logits[0]));
}
