use std::f64::consts::PI;

use nalgebra::Vector2;
use plato::env::{
    generate_canyon, generate_forest, raycast_laser, respawn, CanyonParams, Circle, ForestParams,
    ObstacleField, Segment, TaskCost, VehicleState, ControlInput,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn segment_distance(s: &Segment, p: Vector2<f64>) -> f64 {
    let ab = s.b - s.a;
    let t = ((p - s.a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (s.a + ab * t)).norm()
}

/// Periodic image offsets, -1..=1 along each periodic axis.
fn images(field: &ObstacleField) -> Vec<Vector2<f64>> {
    let [px, py] = field.period();
    let xs: Vec<f64> = px.map_or(vec![0.0], |p| vec![-p, 0.0, p]);
    let ys: Vec<f64> = py.map_or(vec![0.0], |p| vec![-p, 0.0, p]);
    xs.iter()
        .flat_map(|&x| ys.iter().map(move |&y| Vector2::new(x, y)))
        .collect()
}

/// Centerline height by direct linear interpolation over every vertex pair.
fn canyon_center_y(field: &ObstacleField, x: f64) -> f64 {
    let pts = &field.corridor().unwrap().centerline;
    for w in pts.windows(2) {
        if w[0].x <= x && x <= w[1].x {
            let t = (x - w[0].x) / (w[1].x - w[0].x);
            return w[0].y + t * (w[1].y - w[0].y);
        }
    }
    panic!("x = {x} outside the centerline");
}

/// Minimum over every primitive and every periodic image, no acceleration.
fn brute_signed_distance(field: &ObstacleField, p: Vector2<f64>) -> f64 {
    let p = field.wrap(p);
    let mut best = f64::INFINITY;
    for off in images(field) {
        let q = p + off;
        for c in field.circles() {
            best = best.min((q - c.center).norm() - c.radius);
        }
    }
    let mut wall = f64::INFINITY;
    for off in images(field) {
        for s in field.segments() {
            wall = wall.min(segment_distance(s, p + off));
        }
    }
    if let Some(corridor) = field.corridor() {
        if (p.y - canyon_center_y(field, p.x)).abs() >= corridor.half_width {
            wall = -wall;
        }
    }
    best.min(wall)
}

fn sample_point(field: &ObstacleField, rng: &mut ChaCha8Rng) -> Vector2<f64> {
    let [lo, hi] = field.bounds();
    Vector2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y))
}

fn forest() -> ObstacleField {
    generate_forest(
        3,
        &ForestParams {
            avg_spacing: 6.0,
            tree_radius: 1.0,
            ..ForestParams::default()
        },
    )
    .unwrap()
}

fn canyon() -> ObstacleField {
    generate_canyon(5, &CanyonParams::default(), 0.25).unwrap()
}

#[test]
fn signed_distance_matches_brute_force_on_primitives() {
    let field = ObstacleField::from_primitives(
        vec![
            Circle { center: Vector2::new(1.0, 2.0), radius: 0.5 },
            Circle { center: Vector2::new(-3.0, 0.5), radius: 1.2 },
        ],
        vec![
            Segment { a: Vector2::new(-5.0, -2.0), b: Vector2::new(5.0, -1.0) },
            Segment { a: Vector2::new(4.0, 4.0), b: Vector2::new(4.5, -0.5) },
        ],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let p = Vector2::new(rng.random_range(-6.0..6.0), rng.random_range(-4.0..5.0));
        let expected = brute_signed_distance(&field, p);
        assert!((field.signed_distance(p) - expected).abs() <= 1e-9, "at {p:?}");
    }
}

#[test]
fn signed_distance_matches_brute_force_in_generated_worlds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for field in [forest(), canyon()] {
        for _ in 0..2000 {
            let p = sample_point(&field, &mut rng);
            let expected = brute_signed_distance(&field, p);
            let got = field.signed_distance(p);
            assert!((got - expected).abs() <= 1e-9, "{:?} at {p:?}: {got} vs {expected}", field.kind());
        }
    }
}

#[test]
fn raycast_matches_ray_marching() {
    let max_range = 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for field in [forest(), canyon()] {
        let mut rays = 0;
        while rays < 25 {
            let origin = sample_point(&field, &mut rng);
            if brute_signed_distance(&field, origin) <= 0.05 {
                continue;
            }
            rays += 1;
            let angle = rng.random_range(-PI..PI);
            let dir = Vector2::new(angle.cos(), angle.sin());
            let mut marched = max_range;
            let mut t = 0.0;
            while t <= max_range {
                if brute_signed_distance(&field, origin + dir * t) <= 0.0 {
                    marched = t;
                    break;
                }
                t += 1e-3;
            }
            let got = field.ray_distance(origin, angle, max_range);
            assert!((got - marched).abs() <= 2e-3, "{:?}: {got} vs marched {marched}", field.kind());
        }
    }
}

#[test]
fn laser_beams_fan_symmetrically_around_heading() {
    let field = ObstacleField::from_primitives(
        vec![],
        vec![Segment { a: Vector2::new(-10.0, 3.0), b: Vector2::new(10.0, 3.0) }],
    );
    let x = VehicleState::at_rest(Vector2::zeros(), PI / 2.0);
    let beams = raycast_laser(&field, &x, 15, PI, 10.0);
    assert_eq!(beams.len(), 15);
    assert!((beams[7] - 3.0).abs() < 1e-12);
    for i in 0..7 {
        assert!((beams[i] - beams[14 - i]).abs() < 1e-9);
    }
    assert_eq!(beams[0], 10.0);
}

/// One-sample Kolmogorov-Smirnov statistic against U[0, 1].
fn ks_uniform(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &u)| (u - i as f64 / n).max((i + 1) as f64 / n - u))
        .fold(0.0, f64::max)
}

#[test]
fn canyon_turn_magnitudes_are_uniform() {
    let params = CanyonParams::default();
    let mut turns = Vec::new();
    let mut seed = 0;
    while turns.len() < 10_000 {
        let field = generate_canyon(seed, &params, 0.25).unwrap();
        let directions = field.corridor().unwrap().directions();
        turns.extend(directions.windows(2).map(|w| (w[1] - w[0]).abs() / params.max_turn));
        seed += 1;
    }
    assert!(turns.iter().all(|&t| t <= 1.0 + 1e-9));
    let d = ks_uniform(turns);
    assert!(d <= 0.02, "KS statistic {d}");
}

fn mean_nearest_neighbor(field: &ObstacleField, extent: f64) -> Option<f64> {
    let centers: Vec<Vector2<f64>> = field.circles().iter().map(|c| c.center).collect();
    if centers.len() < 2 {
        return None;
    }
    let torus = |a: Vector2<f64>, b: Vector2<f64>| {
        let mut d = a - b;
        for i in 0..2 {
            d[i] -= extent * (d[i] / extent).round();
        }
        d.norm()
    };
    let total: f64 = centers
        .iter()
        .enumerate()
        .map(|(i, a)| {
            centers
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| torus(*a, *b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Some(total / centers.len() as f64)
}

#[test]
fn forest_spacing_statistic() {
    for spacing in [2.5, 4.0, 6.0] {
        let params = ForestParams {
            extent: 40.0,
            avg_spacing: spacing,
            spawn_clearance: 0.0,
            ..ForestParams::default()
        };
        let means: Vec<f64> = (0..20)
            .filter_map(|seed| mean_nearest_neighbor(&generate_forest(seed, &params).unwrap(), params.extent))
            .collect();
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        assert!(
            (mean / spacing - 1.0).abs() <= 0.15,
            "spacing {spacing}: realized {mean}"
        );
    }
}

#[test]
fn respawns_keep_twice_the_safety_distance() {
    let cost = TaskCost::default();
    let clearance = 2.0 * cost.d_safe;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for field in [forest(), canyon()] {
        for _ in 0..100 {
            let x = respawn(&field, clearance, &mut rng).unwrap();
            assert!(brute_signed_distance(&field, x.position) >= clearance);
            assert_eq!(x.velocity, Vector2::zeros());
        }
    }
}

#[test]
fn stage_cost_terms_match_hand_computation() {
    let cost = TaskCost::default();
    let field = ObstacleField::from_circles(vec![Circle { center: Vector2::new(0.5, 0.0), radius: 0.2 }]);
    let x = VehicleState {
        position: Vector2::zeros(),
        heading: 0.1,
        velocity: Vector2::new(1.0, 0.2),
        angular_velocity: -0.3,
    };
    let u = ControlInput::new(2.0, -1.0);
    let terms = cost.terms(&field, &x, u);
    // Velocity error (-0.5, 0.2); signed distance 0.3, so the hinge is 0.45.
    assert!((terms.velocity - 1e3 * 0.29).abs() < 1e-9);
    assert!((terms.heading - 1e4 * 0.01).abs() < 1e-9);
    assert!((terms.angular_velocity - 250.0 * 0.09).abs() < 1e-9);
    assert!((terms.control - 5f64.powi(-3) * 5.0).abs() < 1e-12);
    assert!((terms.obstacle - 1e3 * 0.45).abs() < 1e-9);
    let total = 290.0 + 100.0 + 22.5 + 0.04 + 450.0;
    assert!((cost.stage_cost(&field, &x, u) - total).abs() < 1e-9);
    let normalized = 1.0 - (-total / 1e3).exp();
    assert!((cost.normalized_cost(&field, &x, u) - normalized).abs() < 1e-12);
}

#[test]
fn heading_error_wraps() {
    let cost = TaskCost::default();
    let field = ObstacleField::empty();
    let mut x = VehicleState::at_rest(Vector2::zeros(), PI - 0.1);
    x.velocity = cost.target_velocity();
    let near = cost.terms(&field, &x, cost.hover()).heading;
    x.heading = -PI + 0.1;
    let far = cost.terms(&field, &x, cost.hover()).heading;
    assert!((near - far).abs() < 1e-6);
}

fn arb_state() -> impl Strategy<Value = VehicleState> {
    (-30.0..30.0, -30.0..30.0, -PI..PI, -5.0..5.0, -5.0..5.0, -3.0..3.0).prop_map(
        |(px, py, h, vx, vy, w)| VehicleState {
            position: Vector2::new(px, py),
            heading: h,
            velocity: Vector2::new(vx, vy),
            angular_velocity: w,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_is_nonnegative_and_normalized_cost_is_a_fraction(
        x in arb_state(), thrust in -10.0..10.0, torque in -10.0..10.0
    ) {
        let field = forest();
        let cost = TaskCost::default();
        let u = ControlInput::new(thrust, torque);
        prop_assert!(cost.stage_cost(&field, &x, u) >= 0.0);
        let n = cost.normalized_cost(&field, &x, u);
        prop_assert!((0.0..=1.0).contains(&n));
    }

    #[test]
    fn generators_depend_only_on_the_seed(seed in any::<u64>()) {
        let params = ForestParams::default();
        prop_assert_eq!(generate_forest(seed, &params).unwrap(), generate_forest(seed, &params).unwrap());
        let canyon = CanyonParams::default();
        prop_assert_eq!(
            generate_canyon(seed, &canyon, 0.25).unwrap(),
            generate_canyon(seed, &canyon, 0.25).unwrap()
        );
    }

    #[test]
    fn wrapping_preserves_signed_distance(seed in 0u64..50, px in -20.0..40.0, py in -20.0..40.0) {
        let field = generate_forest(seed, &ForestParams::default()).unwrap();
        let p = Vector2::new(px, py);
        let shifted = p + Vector2::new(20.0, -20.0);
        prop_assert!((field.signed_distance(p) - field.signed_distance(shifted)).abs() < 1e-9);
    }
}
