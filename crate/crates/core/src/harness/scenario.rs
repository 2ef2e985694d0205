use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::RobotParams;
use crate::geometry::{normalize_angle, Obstacle, Pose, Target, World};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario schema error: {0}")]
    Schema(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    /// After the cycle with this 0-based index has executed.
    AtCycle { cycle: u32 },
    /// After the first cycle whose look found the target.
    OnFirstDetection,
    /// Operator command in live mode. Not allowed in scenario files.
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventAction {
    AddObstacle {
        x: f64,
        y: f64,
        r: f64,
        #[serde(default)]
        tall: bool,
    },
    /// Obstacle centered on the midpoint of the robot→target segment at
    /// the moment the trigger fires.
    AddObstacleOnPath {
        #[serde(default = "default_path_radius")]
        r: f64,
        #[serde(default = "default_true")]
        tall: bool,
    },
}

fn default_path_radius() -> f64 {
    0.3
}

fn default_true() -> bool {
    true
}

impl EventAction {
    /// The concrete obstacle this action adds in `world`'s current state.
    pub fn resolve(&self, world: &World) -> Obstacle {
        match *self {
            EventAction::AddObstacle { x, y, r, tall } => Obstacle::new(x, y, r, tall),
            EventAction::AddObstacleOnPath { r, tall } => {
                let (p, t) = (world.robot_position(), world.target.position());
                Obstacle::new((p.x + t.x) / 2.0, (p.y + t.y) / 2.0, r, tall)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEvent {
    pub trigger: Trigger,
    pub action: EventAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub start_pose: Pose,
    pub target: Target,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
    #[serde(default)]
    pub params: RobotParams,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: u32,
}

fn default_schema_version() -> u32 {
    SCENARIO_SCHEMA_VERSION
}

fn default_max_cycles() -> u32 {
    200
}

/// Rejects an obstacle that would contain `robot` (boundary included).
pub fn check_obstacle_placement(robot: Pose, obstacle: &Obstacle) -> Result<(), String> {
    if !(obstacle.radius > 0.0 && obstacle.radius.is_finite())
        || !obstacle.center_x.is_finite()
        || !obstacle.center_y.is_finite()
    {
        return Err(format!(
            "obstacle ({}, {}, r={}) has a non-finite or non-positive field",
            obstacle.center_x, obstacle.center_y, obstacle.radius
        ));
    }
    if obstacle.center().distance(robot.position()) <= obstacle.radius {
        return Err(format!(
            "obstacle at ({}, {}) r={} contains the robot",
            obstacle.center_x, obstacle.center_y, obstacle.radius
        ));
    }
    Ok(())
}

fn finite(name: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::Invalid(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<(), ScenarioError> {
    finite(name, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::Invalid(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn probability(name: &str, v: f64) -> Result<(), ScenarioError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ScenarioError::Invalid(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let mut s: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks every invariant and normalizes the start heading.
    pub fn validate(&mut self) -> Result<(), ScenarioError> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(ScenarioError::Schema(format!(
                "unsupported schema_version {} (expected {SCENARIO_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        finite("start_pose.x", self.start_pose.x)?;
        finite("start_pose.y", self.start_pose.y)?;
        self.start_pose.heading = normalize_angle(self.start_pose.heading)
            .map_err(|e| ScenarioError::Invalid(format!("start_pose.heading: {e}")))?;
        finite("target.x", self.target.x)?;
        finite("target.y", self.target.y)?;
        positive("target.reach_radius", self.target.reach_radius)?;

        for o in &self.obstacles {
            check_obstacle_placement(self.start_pose, o).map_err(ScenarioError::Invalid)?;
            if o.center().distance(self.target.position()) < o.radius + self.target.reach_radius {
                return Err(ScenarioError::Invalid(format!(
                    "obstacle at ({}, {}) r={} overlaps the target disk",
                    o.center_x, o.center_y, o.radius
                )));
            }
        }
        for e in &self.events {
            if e.trigger == Trigger::Manual {
                return Err(ScenarioError::Invalid(
                    "manual triggers come from live commands and cannot appear in a scenario"
                        .into(),
                ));
            }
            if let EventAction::AddObstacle { x, y, r, .. } = e.action {
                finite("event x", x)?;
                finite("event y", y)?;
                positive("event r", r)?;
            }
            if let EventAction::AddObstacleOnPath { r, .. } = e.action {
                positive("event r", r)?;
            }
        }

        let m = &self.params.motion;
        positive("motion.linear_speed", m.linear_speed)?;
        positive("motion.angular_speed", m.angular_speed)?;
        positive("motion.tick", m.tick)?;
        finite("motion.noise_sigma", m.noise_sigma)?;
        if m.noise_sigma < 0.0 {
            return Err(ScenarioError::Invalid(
                "motion.noise_sigma must be >= 0".into(),
            ));
        }
        let s = &self.params.sensors;
        positive("sensors.fov_half_angle", s.fov_half_angle)?;
        positive("sensors.detect_range", s.detect_range)?;
        probability("sensors.false_negative_rate", s.false_negative_rate)?;
        probability("sensors.false_positive_rate", s.false_positive_rate)?;
        positive("sensors.obstacle_threshold", s.obstacle_threshold)?;
        positive(
            "sensors.obstacle_cone_half_angle",
            s.obstacle_cone_half_angle,
        )?;
        let a = &self.params.actions;
        finite("actions.head_sweep_half_angle", a.head_sweep_half_angle)?;
        positive("actions.head_step", a.head_step)?;
        positive("actions.forward_distance", a.forward_distance)?;
        positive("actions.heading_tolerance", a.heading_tolerance)?;
        finite("actions.clearance_required", a.clearance_required)?;
        positive("actions.search_step", a.search_step)?;
        positive("actions.search_burst", a.search_burst)?;
        Ok(())
    }

    /// Fresh world for one run.
    pub fn world(&self, seed: u64) -> World {
        World::new(self.start_pose, self.obstacles.clone(), self.target, seed)
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}
