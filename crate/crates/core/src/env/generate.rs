//! Seeded procedural worlds: a winding canyon and a Poisson-disk forest.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::world::{Circle, Corridor, FieldKind, ObstacleField, Segment};
use crate::error::{Error, Result};

/// Ratio between the mean nearest-neighbor distance and the Poisson-disk
/// exclusion radius of a saturated toroidal Bridson sampling (measured over
/// many seeds; see the `forest_spacing_statistic` test).
const POISSON_SPACING_RATIO: f64 = 1.09;

/// Candidate attempts per active point in Bridson's algorithm.
const BRIDSON_ATTEMPTS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CanyonParams {
    /// Approximate centerline length of one period (m).
    pub length: f64,
    /// Vertical distance between the two walls (m).
    pub width: f64,
    /// Largest direction change between consecutive segments (rad).
    pub max_turn: f64,
    pub segment_length: f64,
}

impl Default for CanyonParams {
    fn default() -> Self {
        CanyonParams {
            length: 60.0,
            width: 5.0,
            max_turn: std::f64::consts::FRAC_PI_4,
            segment_length: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    /// Side of the square, periodic forest cell (m).
    pub extent: f64,
    pub tree_radius: f64,
    /// Target mean nearest-neighbor distance between trunk centers (m).
    pub avg_spacing: f64,
    /// Minimum free gap between two trunks (m), typically the vehicle diameter.
    pub min_gap: f64,
    /// Radius around the origin kept free of trunks (m).
    pub spawn_clearance: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            extent: 20.0,
            tree_radius: 0.5,
            avg_spacing: 2.5,
            min_gap: 0.5,
            spawn_clearance: 2.0,
        }
    }
}

/// Generates a periodic canyon. The centerline direction performs a random
/// walk whose increments are uniform in `[-max_turn, max_turn]`, reflected so
/// the direction itself stays within `±max_turn`. The second half of each
/// period mirrors the first, so the walls close up seamlessly.
pub fn generate_canyon(seed: u64, params: &CanyonParams, vehicle_radius: f64) -> Result<ObstacleField> {
    let CanyonParams {
        length,
        width,
        max_turn,
        segment_length,
    } = *params;
    if !(width > 2.0 * vehicle_radius) {
        return Err(Error::InvalidParameter(format!(
            "canyon width {width} must exceed the vehicle diameter {}",
            2.0 * vehicle_radius
        )));
    }
    if !(0.0..FRAC_PI_2).contains(&max_turn) {
        return Err(Error::InvalidParameter(format!(
            "canyon max_turn must lie in [0, π/2), got {max_turn}"
        )));
    }
    if !(segment_length > 0.0 && length >= 2.0 * segment_length) {
        return Err(Error::InvalidParameter(format!(
            "canyon needs segment_length > 0 and length >= 2 segments (length {length}, segment {segment_length})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_half = (length / (2.0 * segment_length)).ceil() as usize;
    let mut directions = vec![0.0_f64];
    loop {
        let last = *directions.last().unwrap();
        if directions.len() >= min_half && last.abs() <= 0.5 * max_turn {
            break;
        }
        let delta = if max_turn > 0.0 {
            rng.random_range(-max_turn..=max_turn)
        } else {
            0.0
        };
        let next = if (last + delta).abs() > max_turn {
            last - delta
        } else {
            last + delta
        };
        directions.push(next);
    }
    let mirrored: Vec<f64> = directions.iter().rev().map(|d| -d).collect();
    directions.extend(mirrored);

    let mut centerline = Vec::with_capacity(directions.len() + 1);
    let mut p = Vector2::zeros();
    centerline.push(p);
    for d in &directions {
        p += Vector2::new(d.cos(), d.sin()) * segment_length;
        centerline.push(p);
    }
    let period = p.x;
    // The mirrored half cancels the vertical drift exactly up to rounding.
    centerline.last_mut().unwrap().y = 0.0;

    let half_width = 0.5 * width;
    let offset = Vector2::new(0.0, half_width);
    let mut segments = Vec::with_capacity(2 * directions.len());
    for w in centerline.windows(2) {
        segments.push(Segment {
            a: w[0] + offset,
            b: w[1] + offset,
        });
        segments.push(Segment {
            a: w[0] - offset,
            b: w[1] - offset,
        });
    }
    let ymin = centerline.iter().map(|c| c.y).fold(f64::INFINITY, f64::min) - half_width;
    let ymax = centerline.iter().map(|c| c.y).fold(f64::NEG_INFINITY, f64::max) + half_width;

    Ok(ObstacleField::new(
        FieldKind::Canyon,
        seed,
        [Vector2::new(0.0, ymin), Vector2::new(period, ymax)],
        [Some(period), None],
        Vec::new(),
        segments,
        Some(Corridor {
            centerline,
            half_width,
        }),
    ))
}

/// Generates a periodic forest of equal-radius trunks by Bridson Poisson-disk
/// sampling on the torus, then clears the spawn region around the origin.
pub fn generate_forest(seed: u64, params: &ForestParams) -> Result<ObstacleField> {
    let ForestParams {
        extent,
        tree_radius,
        avg_spacing,
        min_gap,
        spawn_clearance,
    } = *params;
    if !(tree_radius > 0.0 && extent > 0.0 && min_gap >= 0.0) {
        return Err(Error::InvalidParameter(format!("invalid forest parameters {params:?}")));
    }
    if !(avg_spacing > 2.0 * tree_radius) {
        return Err(Error::InvalidParameter(format!(
            "avg_spacing {avg_spacing} must exceed the trunk diameter {}",
            2.0 * tree_radius
        )));
    }
    let exclusion = avg_spacing / POISSON_SPACING_RATIO;
    let required = 2.0 * tree_radius + min_gap;
    if exclusion < required {
        return Err(Error::Generation(format!(
            "forest too dense: spacing {avg_spacing} implies center distance {exclusion:.3}, \
             but trunks need {required:.3} for a {min_gap} m gap"
        )));
    }
    let bounds = [Vector2::zeros(), Vector2::new(extent, extent)];
    let period = [Some(extent), Some(extent)];
    if extent < exclusion {
        return Ok(ObstacleField::new(FieldKind::Forest, seed, bounds, period, vec![], vec![], None));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = bridson_torus(&mut rng, extent, exclusion);
    let circles = centers
        .into_iter()
        .filter(|c| torus_distance(*c, Vector2::zeros(), extent) - tree_radius >= spawn_clearance)
        .map(|center| Circle {
            center,
            radius: tree_radius,
        })
        .collect();
    Ok(ObstacleField::new(FieldKind::Forest, seed, bounds, period, circles, vec![], None))
}

pub(crate) fn torus_distance(a: Vector2<f64>, b: Vector2<f64>, extent: f64) -> f64 {
    let mut d = a - b;
    for i in 0..2 {
        d[i] = d[i].rem_euclid(extent);
        if d[i] > 0.5 * extent {
            d[i] -= extent;
        }
    }
    d.norm()
}

fn bridson_torus<R: Rng>(rng: &mut R, extent: f64, radius: f64) -> Vec<Vector2<f64>> {
    let cell = radius / std::f64::consts::SQRT_2;
    let n = ((extent / cell).ceil() as usize).max(1);
    let cell = extent / n as f64;
    let mut grid: Vec<Option<usize>> = vec![None; n * n];
    let cell_of = |p: Vector2<f64>| {
        let i = ((p.x / cell) as usize).min(n - 1);
        let j = ((p.y / cell) as usize).min(n - 1);
        (i, j)
    };
    // Neighborhood in cells that can hold a point closer than `radius`.
    let reach = (radius / cell).ceil() as isize;

    let mut points: Vec<Vector2<f64>> = Vec::new();
    let mut active = Vec::new();
    let first = Vector2::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent));
    let (i, j) = cell_of(first);
    grid[i * n + j] = Some(0);
    points.push(first);
    active.push(0);

    while !active.is_empty() {
        let k = rng.random_range(0..active.len());
        let base = points[active[k]];
        let mut placed = false;
        for _ in 0..BRIDSON_ATTEMPTS {
            let r = radius * (1.0 + rng.random::<f64>() * 3.0).sqrt();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let cand = Vector2::new(
                (base.x + r * theta.cos()).rem_euclid(extent),
                (base.y + r * theta.sin()).rem_euclid(extent),
            );
            let (ci, cj) = cell_of(cand);
            let mut ok = true;
            'scan: for di in -reach..=reach {
                for dj in -reach..=reach {
                    let gi = (ci as isize + di).rem_euclid(n as isize) as usize;
                    let gj = (cj as isize + dj).rem_euclid(n as isize) as usize;
                    if let Some(idx) = grid[gi * n + gj] {
                        if torus_distance(points[idx], cand, extent) < radius {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
            }
            if ok {
                let idx = points.len();
                grid[ci * n + cj] = Some(idx);
                points.push(cand);
                active.push(idx);
                placed = true;
                break;
            }
        }
        if !placed {
            active.swap_remove(k);
        }
    }
    points
}
