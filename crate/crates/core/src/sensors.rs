//! Perception channels: exact odometry, a front-cone obstacle flag and a
//! target detector that can be occluded by tall obstacles and misses
//! true sightings at a configurable rate.

use serde::{Deserialize, Serialize};

use crate::geometry::{bearing_to, segment_distance, wrap, Point, World};

/// The sensor tuple sent to the decision side each cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionRecord {
    pub direction: f64,
    pub x: f64,
    pub y: f64,
    /// Serialized as `0`/`1`.
    #[serde(with = "flag")]
    pub obstacle: bool,
}

mod flag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "flag must be 0 or 1, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Odometry {
    pub direction: f64,
    pub x: f64,
    pub y: f64,
}

/// Result of a target search. `bearing` is a world-frame angle and is the
/// sentinel `0.0` whenever `found` is false.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookOutcome {
    pub found: bool,
    pub bearing: f64,
}

impl LookOutcome {
    pub const NOT_FOUND: LookOutcome = LookOutcome {
        found: false,
        bearing: 0.0,
    };

    pub fn found(bearing: f64) -> Self {
        Self {
            found: true,
            bearing: wrap(bearing),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorParams {
    pub fov_half_angle: f64,
    pub detect_range: f64,
    pub false_negative_rate: f64,
    pub false_positive_rate: f64,
    pub obstacle_threshold: f64,
    pub obstacle_cone_half_angle: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            fov_half_angle: 30.0,
            detect_range: 5.0,
            false_negative_rate: 0.1,
            false_positive_rate: 0.0,
            obstacle_threshold: 0.5,
            obstacle_cone_half_angle: 30.0,
        }
    }
}

pub fn read_odometry(world: &World) -> Odometry {
    Odometry {
        direction: world.robot.heading,
        x: world.robot.x,
        y: world.robot.y,
    }
}

pub fn perceive(world: &World, params: &SensorParams) -> PerceptionRecord {
    let odo = read_odometry(world);
    PerceptionRecord {
        direction: odo.direction,
        x: odo.x,
        y: odo.y,
        obstacle: sense_obstacle(world, params),
    }
}

/// Front obstacle flag for the robot's current heading.
pub fn sense_obstacle(world: &World, params: &SensorParams) -> bool {
    obstacle_in_cone(world, world.robot_position(), world.robot.heading, params)
}

/// True when some obstacle boundary point lies within `obstacle_threshold`
/// of `origin` and within the half-cone around `heading`.
///
/// The sector is connected and contains `origin`, which is never strictly
/// inside an obstacle, so it meets a boundary iff it meets the closed disk.
pub fn obstacle_in_cone(world: &World, origin: Point, heading: f64, params: &SensorParams) -> bool {
    world.obstacles.iter().any(|o| {
        sector_distance(
            o.center(),
            origin,
            heading,
            params.obstacle_cone_half_angle,
            params.obstacle_threshold,
        ) <= o.radius
    })
}

/// Distance from `p` to the circular sector of radius `reach` and half-angle
/// `half` (degrees, < 180) opening from `apex` along `heading`.
fn sector_distance(p: Point, apex: Point, heading: f64, half: f64, reach: f64) -> f64 {
    let d = p.distance(apex);
    if d == 0.0 {
        return 0.0;
    }
    let off = wrap(bearing_to(apex, p).unwrap_or(heading) - heading).abs();
    if off <= half {
        return (d - reach).max(0.0);
    }
    let left = apex.offset(heading + half, reach);
    let right = apex.offset(heading - half, reach);
    segment_distance(p, apex, left).min(segment_distance(p, apex, right))
}

/// The noise-free detection predicate: in range, inside the field of view
/// around `gaze`, and not hidden behind a tall obstacle.
pub fn target_visible(world: &World, gaze: f64, params: &SensorParams) -> bool {
    let robot = world.robot_position();
    let target = world.target.position();
    let dist = robot.distance(target);
    if dist == 0.0 || dist > params.detect_range {
        return false;
    }
    let bearing = match bearing_to(robot, target) {
        Ok(b) => b,
        Err(_) => return false,
    };
    if wrap(bearing - gaze).abs() > params.fov_half_angle {
        return false;
    }
    !world
        .obstacles
        .iter()
        .any(|o| o.tall && o.intersects_segment(robot, target))
}

/// Samples the detector once. Always consumes exactly one uniform draw.
pub fn detect_target(world: &mut World, gaze: f64, params: &SensorParams) -> LookOutcome {
    let visible = target_visible(world, gaze, params);
    let u = world.draw_uniform();
    if visible {
        if u >= params.false_negative_rate {
            let bearing = bearing_to(world.robot_position(), world.target.position())
                .expect("visible target is never coincident with the robot");
            return LookOutcome::found(bearing);
        }
    } else if u < params.false_positive_rate {
        return LookOutcome::found(gaze);
    }
    LookOutcome::NOT_FOUND
}
