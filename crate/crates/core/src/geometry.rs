//! Continuous 2D world: unicycle kinematics with multiplicative actuation
//! noise, circular obstacles and ray clearance queries.
//!
//! Angles are degrees everywhere, normalized to `(-180, 180]`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("command out of range: linear {linear} m/s, angular {angular} deg/s")]
    CommandOutOfRange { linear: f64, angular: f64 },
}

/// Maps any finite angle onto `(-180, 180]`, keeping `+180`.
pub fn normalize_angle(a: f64) -> Result<f64, GeometryError> {
    if !a.is_finite() {
        return Err(GeometryError::NonFinite(a));
    }
    Ok(wrap(a))
}

/// Infallible variant for values that are finite by construction.
pub(crate) fn wrap(a: f64) -> f64 {
    debug_assert!(a.is_finite());
    if a > -180.0 && a <= 180.0 {
        return a;
    }
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point at `dist` along world-frame `angle` (degrees).
    pub fn offset(&self, angle: f64, dist: f64) -> Point {
        let (s, c) = angle.to_radians().sin_cos();
        Point::new(self.x + dist * c, self.y + dist * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Degrees in `(-180, 180]`.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap(heading),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// World-frame bearing of `to` seen from `from`, ignoring `from`'s heading.
pub fn bearing_to(from: Point, to: Point) -> Result<f64, GeometryError> {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    if dx == 0.0 && dy == 0.0 {
        return Err(GeometryError::Degenerate("coincident points"));
    }
    normalize_angle(dy.atan2(dx).to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    #[serde(rename = "x")]
    pub center_x: f64,
    #[serde(rename = "y")]
    pub center_y: f64,
    #[serde(rename = "r")]
    pub radius: f64,
    /// Tall obstacles also block line of sight to the target.
    #[serde(default)]
    pub tall: bool,
}

impl Obstacle {
    pub fn new(center_x: f64, center_y: f64, radius: f64, tall: bool) -> Self {
        Self {
            center_x,
            center_y,
            radius,
            tall,
        }
    }

    pub fn center(&self) -> Point {
        Point::new(self.center_x, self.center_y)
    }

    /// Strict interior test; the boundary counts as outside.
    pub fn contains_strictly(&self, p: Point) -> bool {
        let (dx, dy) = (p.x - self.center_x, p.y - self.center_y);
        dx * dx + dy * dy < self.radius * self.radius
    }

    /// Distance along the ray to the first boundary crossing, if any.
    /// Returns `Some(0.0)` when the origin is inside.
    pub fn ray_hit(&self, origin: Point, angle: f64) -> Option<f64> {
        let (s, c) = angle.to_radians().sin_cos();
        let (fx, fy) = (origin.x - self.center_x, origin.y - self.center_y);
        let b = fx * c + fy * s;
        let k = fx * fx + fy * fy - self.radius * self.radius;
        if k < 0.0 {
            return Some(0.0);
        }
        let disc = b * b - k;
        if disc < 0.0 {
            return None;
        }
        // Origin outside: both roots share a sign, so the nearer one decides.
        let t = -b - disc.sqrt();
        (t >= 0.0).then_some(t)
    }

    /// Shortest distance from the center to segment `a`–`b`, compared to the radius.
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        segment_distance(self.center(), a, b) <= self.radius
    }
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * vx, a.y + t * vy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_reach_radius")]
    pub reach_radius: f64,
}

fn default_reach_radius() -> f64 {
    0.4
}

impl Target {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    /// m/s
    pub linear_speed: f64,
    /// deg/s
    pub angular_speed: f64,
    /// seconds per simulation tick
    pub tick: f64,
    /// std-dev of the per-tick multiplicative factor applied to each command component
    pub noise_sigma: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            linear_speed: 0.2,
            angular_speed: 45.0,
            tick: 0.1,
            noise_sigma: 0.02,
        }
    }
}

impl MotionParams {
    /// Commanded translation per full-speed tick.
    pub fn linear_step(&self) -> f64 {
        self.linear_speed * self.tick
    }

    /// Commanded rotation per full-speed tick.
    pub fn angular_step(&self) -> f64 {
        self.angular_speed * self.tick
    }
}

/// Deterministic world state. The harness run loop is its only writer.
///
/// Random draws are taken from the world's own generator in this order:
/// every motion tick draws the linear factor then the angular factor, and
/// every target detection draws one uniform sample.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub robot: Pose,
    pub obstacles: Vec<Obstacle>,
    pub target: Target,
    /// Simulation ticks elapsed.
    pub clock: u64,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(robot: Pose, obstacles: Vec<Obstacle>, target: Target, seed: u64) -> Self {
        Self {
            robot,
            obstacles,
            target,
            clock: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn robot_position(&self) -> Point {
        self.robot.position()
    }

    pub fn inside_any_obstacle(&self, p: Point) -> bool {
        self.obstacles.iter().any(|o| o.contains_strictly(p))
    }

    pub(crate) fn draw_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn draw_factor(&mut self, sigma: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        1.0 + sigma * z
    }

    /// Advances one tick of noisy unicycle motion and returns the distance
    /// actually travelled. Translation is cancelled when the end point
    /// would lie inside an obstacle; rotation still applies.
    pub fn step(
        &mut self,
        linear: f64,
        angular: f64,
        params: &MotionParams,
    ) -> Result<f64, GeometryError> {
        const SLACK: f64 = 1e-12;
        if !linear.is_finite()
            || !angular.is_finite()
            || linear.abs() > params.linear_speed * (1.0 + SLACK)
            || angular.abs() > params.angular_speed * (1.0 + SLACK)
        {
            return Err(GeometryError::CommandOutOfRange { linear, angular });
        }
        let lin_factor = self.draw_factor(params.noise_sigma);
        let ang_factor = self.draw_factor(params.noise_sigma);
        let dist = linear * lin_factor * params.tick;
        let turn = angular * ang_factor * params.tick;

        let next = self.robot.position().offset(self.robot.heading, dist);
        let moved = if self.inside_any_obstacle(next) {
            0.0
        } else {
            self.robot.x = next.x;
            self.robot.y = next.y;
            dist.abs()
        };
        self.robot.heading = wrap(self.robot.heading + turn);
        self.clock += 1;
        Ok(moved)
    }

    /// Advances the clock without moving the robot.
    pub fn idle_tick(&mut self) {
        self.clock += 1;
    }
}

/// Value-style wrapper around [`World::step`].
pub fn step_robot(
    mut world: World,
    linear: f64,
    angular: f64,
    params: &MotionParams,
) -> Result<World, GeometryError> {
    world.step(linear, angular, params)?;
    Ok(world)
}

/// Free distance along a ray: the first obstacle crossing, `max_dist` when
/// nothing is hit, `0` when the origin is inside an obstacle.
pub fn ray_clear(world: &World, origin: Point, angle: f64, max_dist: f64) -> f64 {
    debug_assert!(max_dist > 0.0);
    world
        .obstacles
        .iter()
        .filter_map(|o| o.ray_hit(origin, angle))
        .fold(max_dist, f64::min)
}
