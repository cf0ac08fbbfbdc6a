//! Obstacle geometry: circles (tree trunks) and wall segments, optionally
//! periodic along each axis so the vehicle can fly indefinitely.

use std::fmt::Write as _;

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vehicle::VehicleState;
use crate::error::{Error, Result};

const RESPAWN_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Empty,
    Canyon,
    Forest,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Empty => "empty",
            FieldKind::Canyon => "canyon",
            FieldKind::Forest => "forest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vector2<f64>,
    pub radius: f64,
}

impl Circle {
    fn signed_distance(&self, p: Vector2<f64>) -> (f64, Vector2<f64>) {
        let d = p - self.center;
        let n = d.norm();
        let grad = if n > 0.0 { d / n } else { Vector2::new(1.0, 0.0) };
        (n - self.radius, grad)
    }

    /// First hit distance along `origin + t·dir` (unit `dir`); zero when the
    /// origin is inside.
    fn ray_hit(&self, origin: Vector2<f64>, dir: Vector2<f64>) -> Option<f64> {
        let oc = origin - self.center;
        let c = oc.norm_squared() - self.radius * self.radius;
        if c <= 0.0 {
            return Some(0.0);
        }
        let b = dir.dot(&oc);
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let t = -b - disc.sqrt();
        (t >= 0.0).then_some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
}

impl Segment {
    fn closest_point(&self, p: Vector2<f64>) -> Vector2<f64> {
        let ab = self.b - self.a;
        let len2 = ab.norm_squared();
        if len2 == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(&ab) / len2).clamp(0.0, 1.0);
        self.a + ab * t
    }

    fn distance(&self, p: Vector2<f64>) -> (f64, Vector2<f64>) {
        let d = p - self.closest_point(p);
        let n = d.norm();
        let grad = if n > 0.0 {
            d / n
        } else {
            let ab = self.b - self.a;
            Vector2::new(-ab.y, ab.x).normalize()
        };
        (n, grad)
    }

    fn ray_hit(&self, origin: Vector2<f64>, dir: Vector2<f64>) -> Option<f64> {
        let e = self.b - self.a;
        let denom = cross(dir, e);
        if denom.abs() < 1e-15 {
            return None;
        }
        let w = self.a - origin;
        let t = cross(w, e) / denom;
        let s = cross(w, dir) / denom;
        (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
    }

    fn x_range(&self) -> (f64, f64) {
        (self.a.x.min(self.b.x), self.a.x.max(self.b.x))
    }
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// A corridor between two walls offset vertically by `±half_width` from an
/// x-monotone centerline. Points outside the corridor are inside rock.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub centerline: Vec<Vector2<f64>>,
    pub half_width: f64,
}

impl Corridor {
    /// Centerline height at `x`, which must lie within the centerline's span.
    pub fn center_y(&self, x: f64) -> f64 {
        let pts = &self.centerline;
        let i = pts.partition_point(|p| p.x <= x).clamp(1, pts.len() - 1);
        let (p, q) = (pts[i - 1], pts[i]);
        let t = if q.x > p.x { (x - p.x) / (q.x - p.x) } else { 0.0 };
        p.y + t * (q.y - p.y)
    }

    pub fn contains(&self, p: Vector2<f64>) -> bool {
        (p.y - self.center_y(p.x)).abs() < self.half_width
    }

    /// Heading of each centerline segment.
    pub fn directions(&self) -> Vec<f64> {
        self.centerline
            .windows(2)
            .map(|w| (w[1].y - w[0].y).atan2(w[1].x - w[0].x))
            .collect()
    }
}

/// Procedurally generated obstacle world. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleField {
    kind: FieldKind,
    seed: u64,
    /// Bounding box `[min, max]` of the base cell.
    bounds: [Vector2<f64>; 2],
    period: [Option<f64>; 2],
    circles: Vec<Circle>,
    /// Sorted by minimum x.
    segments: Vec<Segment>,
    max_segment_dx: f64,
    corridor: Option<Corridor>,
}

impl ObstacleField {
    pub fn empty() -> Self {
        ObstacleField {
            kind: FieldKind::Empty,
            seed: 0,
            bounds: [Vector2::zeros(), Vector2::zeros()],
            period: [None, None],
            circles: Vec::new(),
            segments: Vec::new(),
            max_segment_dx: 0.0,
            corridor: None,
        }
    }

    pub(crate) fn new(
        kind: FieldKind,
        seed: u64,
        bounds: [Vector2<f64>; 2],
        period: [Option<f64>; 2],
        circles: Vec<Circle>,
        mut segments: Vec<Segment>,
        corridor: Option<Corridor>,
    ) -> Self {
        segments.sort_by(|s, t| s.x_range().0.total_cmp(&t.x_range().0));
        let max_segment_dx = segments
            .iter()
            .map(|s| s.x_range().1 - s.x_range().0)
            .fold(0.0, f64::max);
        ObstacleField {
            kind,
            seed,
            bounds,
            period,
            circles,
            segments,
            max_segment_dx,
            corridor,
        }
    }

    /// Circles only, no periodicity. Mostly useful for tests and examples.
    pub fn from_circles(circles: Vec<Circle>) -> Self {
        let mut field = ObstacleField::new(
            FieldKind::Forest,
            0,
            [Vector2::zeros(), Vector2::zeros()],
            [None, None],
            circles,
            Vec::new(),
            None,
        );
        field.bounds = field.primitive_bounds();
        field
    }

    /// Free-standing segments with no corridor sign convention.
    pub fn from_primitives(circles: Vec<Circle>, segments: Vec<Segment>) -> Self {
        let mut field = ObstacleField::new(
            FieldKind::Forest,
            0,
            [Vector2::zeros(), Vector2::zeros()],
            [None, None],
            circles,
            segments,
            None,
        );
        field.bounds = field.primitive_bounds();
        field
    }

    fn primitive_bounds(&self) -> [Vector2<f64>; 2] {
        let mut lo = Vector2::repeat(f64::INFINITY);
        let mut hi = Vector2::repeat(f64::NEG_INFINITY);
        for c in &self.circles {
            lo = lo.inf(&(c.center - Vector2::repeat(c.radius)));
            hi = hi.sup(&(c.center + Vector2::repeat(c.radius)));
        }
        for s in &self.segments {
            lo = lo.inf(&s.a.inf(&s.b));
            hi = hi.sup(&s.a.sup(&s.b));
        }
        if lo.x.is_finite() {
            [lo, hi]
        } else {
            [Vector2::zeros(), Vector2::zeros()]
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn corridor(&self) -> Option<&Corridor> {
        self.corridor.as_ref()
    }

    pub fn period(&self) -> [Option<f64>; 2] {
        self.period
    }

    pub fn bounds(&self) -> [Vector2<f64>; 2] {
        self.bounds
    }

    pub fn is_empty(&self) -> bool {
        self.circles.is_empty() && self.segments.is_empty()
    }

    /// Maps `p` into the base cell along periodic axes.
    pub fn wrap(&self, p: Vector2<f64>) -> Vector2<f64> {
        let mut q = p;
        for axis in 0..2 {
            if let Some(period) = self.period[axis] {
                q[axis] = (q[axis] - self.bounds[0][axis]).rem_euclid(period) + self.bounds[0][axis];
            }
        }
        q
    }

    fn image_offsets(&self) -> impl Iterator<Item = Vector2<f64>> + '_ {
        let xs: &[f64] = if self.period[0].is_some() { &[0.0, -1.0, 1.0] } else { &[0.0] };
        let ys: &[f64] = if self.period[1].is_some() { &[0.0, -1.0, 1.0] } else { &[0.0] };
        let px = self.period[0].unwrap_or(0.0);
        let py = self.period[1].unwrap_or(0.0);
        xs.iter()
            .flat_map(move |&i| ys.iter().map(move |&j| Vector2::new(i * px, j * py)))
    }

    /// Segments whose x-range may intersect `[lo, hi]`.
    fn segments_in_x(&self, lo: f64, hi: f64) -> &[Segment] {
        let start = self
            .segments
            .partition_point(|s| s.x_range().0 < lo - self.max_segment_dx);
        let end = self.segments.partition_point(|s| s.x_range().0 <= hi);
        &self.segments[start..end.max(start)]
    }

    /// Distance to the nearest obstacle surface (negative inside an obstacle)
    /// and its gradient with respect to `p`.
    pub fn signed_distance_with_gradient(&self, p: Vector2<f64>) -> (f64, Vector2<f64>) {
        let p = self.wrap(p);
        let mut best = (f64::INFINITY, Vector2::new(1.0, 0.0));
        for offset in self.image_offsets() {
            for c in &self.circles {
                let (d, g) = c.signed_distance(p - offset);
                if d < best.0 {
                    best = (d, g);
                }
            }
        }
        if self.segments.is_empty() {
            return best;
        }

        let mut wall = (f64::INFINITY, Vector2::new(1.0, 0.0));
        // Any wall closer than `reach` must overlap [x - reach, x + reach].
        let reach = match &self.corridor {
            Some(corridor) => {
                let cy = corridor.center_y(p.x);
                let vertical = ((p.y - cy).abs() - corridor.half_width).abs();
                vertical + 1e-9
            }
            None => f64::INFINITY,
        };
        for offset in self.image_offsets() {
            let q = p - offset;
            let candidates = if reach.is_finite() {
                self.segments_in_x(q.x - reach, q.x + reach)
            } else {
                &self.segments[..]
            };
            for s in candidates {
                let (d, g) = s.distance(q);
                if d < wall.0 {
                    wall = (d, g);
                }
            }
        }
        if let Some(corridor) = &self.corridor {
            if !corridor.contains(p) {
                wall = (-wall.0, -wall.1);
            }
        }
        if wall.0 < best.0 {
            wall
        } else {
            best
        }
    }

    pub fn signed_distance(&self, p: Vector2<f64>) -> f64 {
        self.signed_distance_with_gradient(p).0
    }

    /// Range along a single ray, clipped to `max_range`.
    pub fn ray_distance(&self, origin: Vector2<f64>, angle: f64, max_range: f64) -> f64 {
        let origin = self.wrap(origin);
        let dir = Vector2::new(angle.cos(), angle.sin());
        let mut best = max_range;
        for offset in self.image_offsets() {
            let o = origin - offset;
            for c in &self.circles {
                if let Some(t) = c.ray_hit(o, dir) {
                    best = best.min(t);
                }
            }
            let end = o.x + dir.x * max_range;
            for s in self.segments_in_x(o.x.min(end), o.x.max(end)) {
                if let Some(t) = s.ray_hit(o, dir) {
                    best = best.min(t);
                }
            }
        }
        best
    }

    /// Plain-text geometry listing: one primitive per line, `circle cx cy r`
    /// or `segment x1 y1 x2 y2`, preceded by `#` comment lines.
    pub fn to_listing(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# kind {} seed {}", self.kind.name(), self.seed);
        let p = |v: Option<f64>| v.map_or("none".to_string(), |v| v.to_string());
        let _ = writeln!(out, "# period {} {}", p(self.period[0]), p(self.period[1]));
        for c in &self.circles {
            let _ = writeln!(out, "circle {} {} {}", c.center.x, c.center.y, c.radius);
        }
        for s in &self.segments {
            let _ = writeln!(out, "segment {} {} {} {}", s.a.x, s.a.y, s.b.x, s.b.y);
        }
        out
    }
}

/// Readings of `beam_count` beams spread uniformly over `fan_angle`, centered
/// on the vehicle heading. Noise is left to the caller.
pub fn raycast_laser(
    field: &ObstacleField,
    x: &VehicleState,
    beam_count: usize,
    fan_angle: f64,
    max_range: f64,
) -> Vec<f64> {
    (0..beam_count)
        .map(|i| {
            let offset = if beam_count == 1 {
                0.0
            } else {
                -0.5 * fan_angle + fan_angle * i as f64 / (beam_count - 1) as f64
            };
            field.ray_distance(x.position, x.heading + offset, max_range)
        })
        .collect()
}

/// True iff the vehicle disc overlaps an obstacle (`signed_distance < radius`).
pub fn crash_check(field: &ObstacleField, x: &VehicleState, vehicle_radius: f64) -> bool {
    field.signed_distance(x.position) < vehicle_radius
}

/// Places the vehicle at rest, heading zero, where the signed distance is at
/// least `clearance`. An empty field always yields the origin.
pub fn respawn<R: Rng + ?Sized>(
    field: &ObstacleField,
    clearance: f64,
    rng: &mut R,
) -> Result<VehicleState> {
    if field.is_empty() {
        return Ok(VehicleState::at_rest(Vector2::zeros(), 0.0));
    }
    let [lo, hi] = field.bounds;
    for _ in 0..RESPAWN_ATTEMPTS {
        let p = match &field.corridor {
            Some(corridor) => {
                let x = rng.random_range(lo.x..hi.x);
                let y = corridor.center_y(x)
                    + rng.random_range(-corridor.half_width..corridor.half_width);
                Vector2::new(x, y)
            }
            None => Vector2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y)),
        };
        if field.signed_distance(p) >= clearance {
            return Ok(VehicleState::at_rest(p, 0.0));
        }
    }
    Err(Error::Generation(format!(
        "no location with clearance {clearance} m found after {RESPAWN_ATTEMPTS} attempts"
    )))
}
