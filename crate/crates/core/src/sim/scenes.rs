//! Scene generators used by tests, benchmarks and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::World;

/// Urban-like clutter along a straight route on the x axis: scattered point
/// reflectors, building facades and poles. `x_range` is the stretch of road
/// that must be populated.
pub fn feature_rich(seed: u64, x_range: (f64, f64)) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = World::new();
    let (x0, x1) = x_range;
    let len = x1 - x0;

    let n_points = (len * 6.0) as usize;
    for _ in 0..n_points {
        let x = rng.random_range(x0..x1);
        let y: f64 = rng.random_range(-60.0..60.0);
        if y.abs() < 3.0 {
            continue;
        }
        world.add_point([x, y], rng.random_range(0.5..3.0));
    }

    let n_buildings = (len / 6.0) as usize;
    for _ in 0..n_buildings {
        let cx = rng.random_range(x0..x1);
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let cy = side * rng.random_range(7.0..45.0);
        let w = rng.random_range(4.0..14.0);
        let d = rng.random_range(3.0..10.0);
        let refl = rng.random_range(1.0..2.5);
        let a = rng.random_range(-0.6..0.6f64);
        let (s, c) = a.sin_cos();
        let corner = |u: f64, v: f64| [cx + c * u - s * v, cy + s * u + c * v];
        let pts = [
            corner(-w / 2.0, -d / 2.0),
            corner(w / 2.0, -d / 2.0),
            corner(w / 2.0, d / 2.0),
            corner(-w / 2.0, d / 2.0),
        ];
        for k in 0..4 {
            world.add_wall(pts[k], pts[(k + 1) % 4], refl, 0.1);
        }
    }

    let n_poles = (len / 3.0) as usize;
    for _ in 0..n_poles {
        let x = rng.random_range(x0..x1);
        let y = if rng.random::<bool>() { 4.5 } else { -4.5 } + rng.random_range(-0.5..0.5);
        world.add_point([x, y], rng.random_range(2.0..5.0));
    }
    world
}

/// Straight tunnel along x with uniform, featureless walls at `y = ±half_width`.
pub fn tunnel(x_range: (f64, f64), half_width: f64) -> World {
    let mut world = World::new();
    for y in [-half_width, half_width] {
        world.add_wall([x_range.0, y], [x_range.1, y], 1.0, 0.05);
    }
    world
}

/// Adds `count` vehicles near a route driven along +x at `ego_speed`.
/// Vehicles either follow close behind/ahead at similar speed, travel in the
/// opposite lane, or cross, so their Doppler signature differs from the
/// static scene. Positions are given at `t = 0`.
pub fn add_distractors(world: &mut World, seed: u64, count: usize, ego_speed: f64, route_len: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d157);
    for k in 0..count {
        let kind = (k + rng.random_range(0..3usize)) % 3;
        let (center, velocity) = match kind {
            // Chase or lead car in an adjacent lane, nearly matching the ego speed.
            0 => {
                let speed = ego_speed * rng.random_range(0.9..1.1);
                let x = rng.random_range(-12.0..12.0);
                let y = if rng.random::<bool>() { 3.5 } else { -3.5 };
                ([x, y], [speed, 0.0])
            }
            // Oncoming traffic.
            1 => {
                let speed = rng.random_range(6.0..12.0);
                let x = rng.random_range(0.3..0.8) * (route_len + 40.0);
                ([x, rng.random_range(-7.0..-4.0)], [-speed, 0.0])
            }
            // Overtaking traffic in the far lane.
            _ => {
                let speed = ego_speed + rng.random_range(2.0..5.0);
                let x = rng.random_range(-20.0..5.0);
                ([x, rng.random_range(5.0..7.5)], [speed, 0.0])
            }
        };
        let length = rng.random_range(4.5..12.0);
        let width = rng.random_range(1.8..2.6);
        let refl = rng.random_range(4.0..8.0);
        world.add_moving_box(center, velocity, length, width, refl, 0.08);
    }
}
