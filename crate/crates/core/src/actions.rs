//! Sense-while-acting primitives. Each action is a loop over simulation
//! ticks that senses every tick and ends on its own condition; none of
//! them has a timeout.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ray_clear, wrap, GeometryError, MotionParams, World};
use crate::sensors::{detect_target, obstacle_in_cone, sense_obstacle, LookOutcome, SensorParams};

/// The decision program's output vocabulary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionCommand {
    None,
    Looking,
    Search(f64),
    Forward(f64),
}

impl fmt::Display for ActionCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionCommand::None => f.write_str("none"),
            ActionCommand::Looking => f.write_str("looking_Qbo"),
            ActionCommand::Search(d) => write!(f, "search_Qbo({d})"),
            ActionCommand::Forward(d) => write!(f, "forward_Qbo({d})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    Obstacle,
    /// The harness stopped the action at a tick boundary.
    Halted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionOutcome {
    None,
    Looked(LookOutcome),
    Forward(StopReason),
    Search {
        chosen_direction: f64,
        stop_reason: StopReason,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionResult {
    pub outcome: ActionOutcome,
    pub ticks: u32,
}

impl ActionResult {
    pub fn stop_reason(&self) -> Option<StopReason> {
        match self.outcome {
            ActionOutcome::Forward(r) => Some(r),
            ActionOutcome::Search { stop_reason, .. } => Some(stop_reason),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("no clear direction around {direction} after a full scan")]
    Stuck { direction: f64, ticks: u32 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionParams {
    pub head_sweep_half_angle: f64,
    pub head_step: f64,
    pub forward_distance: f64,
    pub heading_tolerance: f64,
    pub clearance_required: f64,
    pub search_step: f64,
    pub search_burst: f64,
}

impl Default for ActionParams {
    fn default() -> Self {
        Self {
            head_sweep_half_angle: 60.0,
            head_step: 15.0,
            forward_distance: 1.0,
            heading_tolerance: 2.0,
            clearance_required: 1.2,
            search_step: 15.0,
            search_burst: 0.5,
        }
    }
}

/// Every tunable that the simulated robot uses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    pub motion: MotionParams,
    pub sensors: SensorParams,
    pub actions: ActionParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickControl {
    Continue,
    Halt,
}

/// Called after every tick an action consumes. The world may be changed
/// here (obstacles added at a tick boundary); the action senses the new
/// state on its next tick.
pub trait TickObserver {
    fn after_tick(&mut self, world: &mut World) -> TickControl;
}

impl TickObserver for () {
    fn after_tick(&mut self, _world: &mut World) -> TickControl {
        TickControl::Continue
    }
}

impl<F: FnMut(&mut World) -> TickControl> TickObserver for F {
    fn after_tick(&mut self, world: &mut World) -> TickControl {
        self(world)
    }
}

/// Gaze offsets for the head sweep: 0, +s, -s, +2s, -2s, ...
pub fn gaze_offsets(params: &ActionParams) -> Vec<f64> {
    let steps = (params.head_sweep_half_angle / params.head_step).round() as i32;
    symmetric_offsets(steps, params.head_step)
}

/// Search candidates relative to the requested direction, closest first.
pub fn search_offsets(params: &ActionParams) -> Vec<f64> {
    let steps = (180.0 / params.search_step).round() as i32;
    symmetric_offsets(steps, params.search_step)
}

fn symmetric_offsets(steps: i32, step: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    for k in 1..=steps {
        out.push(k as f64 * step);
        out.push(-(k as f64) * step);
    }
    out
}

fn rotation_ticks(motion: &MotionParams) -> u32 {
    (180.0 / motion.angular_step()).ceil() as u32
}

fn advance_ticks(distance: f64, motion: &MotionParams) -> u32 {
    (distance / motion.linear_step()).ceil() as u32
}

pub fn looking_tick_bound(params: &RobotParams) -> u32 {
    gaze_offsets(&params.actions).len() as u32
}

/// Rotation plus twice the nominal advance, leaving margin for noise.
pub fn forward_tick_bound(params: &RobotParams) -> u32 {
    rotation_ticks(&params.motion)
        + 2 * advance_ticks(params.actions.forward_distance, &params.motion)
}

pub fn search_tick_bound(params: &RobotParams) -> u32 {
    search_offsets(&params.actions).len() as u32
        + rotation_ticks(&params.motion)
        + 2 * advance_ticks(params.actions.search_burst, &params.motion)
}

/// Head sweep for the target. The base does not move; one tick per gaze.
pub fn act_looking(
    world: &mut World,
    params: &RobotParams,
    hook: &mut dyn TickObserver,
) -> (LookOutcome, u32) {
    let heading = world.robot.heading;
    let mut ticks = 0;
    for offset in gaze_offsets(&params.actions) {
        let outcome = detect_target(world, wrap(heading + offset), &params.sensors);
        world.idle_tick();
        ticks += 1;
        let control = hook.after_tick(world);
        if outcome.found {
            return (outcome, ticks);
        }
        if control == TickControl::Halt {
            break;
        }
    }
    (LookOutcome::NOT_FOUND, ticks)
}

/// Turns in place until the heading is within tolerance of `direction`.
fn rotate_to(
    world: &mut World,
    direction: f64,
    params: &RobotParams,
    hook: &mut dyn TickObserver,
    ticks: &mut u32,
) -> Result<TickControl, ActionError> {
    let motion = &params.motion;
    loop {
        let error = wrap(direction - world.robot.heading);
        if error.abs() <= params.actions.heading_tolerance {
            return Ok(TickControl::Continue);
        }
        let omega = (error / motion.tick).clamp(-motion.angular_speed, motion.angular_speed);
        world.step(0.0, omega, motion)?;
        *ticks += 1;
        if hook.after_tick(world) == TickControl::Halt {
            return Ok(TickControl::Halt);
        }
    }
}

/// Drives straight for a commanded distance, checking the front cone
/// before every tick.
fn advance(
    world: &mut World,
    distance: f64,
    params: &RobotParams,
    hook: &mut dyn TickObserver,
    ticks: &mut u32,
) -> Result<StopReason, ActionError> {
    let motion = &params.motion;
    let mut remaining = distance;
    loop {
        if remaining <= 1e-9 {
            return Ok(StopReason::Completed);
        }
        if sense_obstacle(world, &params.sensors) {
            return Ok(StopReason::Obstacle);
        }
        let v = motion.linear_speed.min(remaining / motion.tick);
        world.step(v, 0.0, motion)?;
        remaining -= v * motion.tick;
        *ticks += 1;
        if hook.after_tick(world) == TickControl::Halt {
            return Ok(StopReason::Halted);
        }
    }
}

pub fn act_forward(
    world: &mut World,
    direction: f64,
    params: &RobotParams,
    hook: &mut dyn TickObserver,
) -> Result<ActionResult, ActionError> {
    let mut ticks = 0;
    let reason = match rotate_to(world, direction, params, hook, &mut ticks)? {
        TickControl::Halt => StopReason::Halted,
        TickControl::Continue => advance(
            world,
            params.actions.forward_distance,
            params,
            hook,
            &mut ticks,
        )?,
    };
    Ok(ActionResult {
        outcome: ActionOutcome::Forward(reason),
        ticks,
    })
}

/// A candidate heading is usable when the ray along it is free for the
/// required clearance and the front cone is empty for every heading the
/// turn may settle on, so the burst that follows can actually start.
pub fn direction_clear(world: &World, heading: f64, params: &RobotParams) -> bool {
    let origin = world.robot_position();
    let required = params.actions.clearance_required;
    let mut cone = params.sensors;
    cone.obstacle_cone_half_angle += params.actions.heading_tolerance;
    ray_clear(world, origin, heading, required) >= required
        && !obstacle_in_cone(world, origin, heading, &cone)
}

/// Scans candidate headings nearest to `direction` first (one tick each),
/// turns to the first clear one and moves a short burst along it.
pub fn act_search(
    world: &mut World,
    direction: f64,
    params: &RobotParams,
    hook: &mut dyn TickObserver,
) -> Result<ActionResult, ActionError> {
    let mut ticks = 0;
    let mut chosen = None;
    for offset in search_offsets(&params.actions) {
        let candidate = wrap(direction + offset);
        let clear = direction_clear(world, candidate, params);
        world.idle_tick();
        ticks += 1;
        let control = hook.after_tick(world);
        if clear {
            chosen = Some(candidate);
            break;
        }
        if control == TickControl::Halt {
            return Ok(ActionResult {
                outcome: ActionOutcome::Search {
                    chosen_direction: direction,
                    stop_reason: StopReason::Halted,
                },
                ticks,
            });
        }
    }
    let Some(chosen) = chosen else {
        return Err(ActionError::Stuck { direction, ticks });
    };
    let stop_reason = match rotate_to(world, chosen, params, hook, &mut ticks)? {
        TickControl::Halt => StopReason::Halted,
        TickControl::Continue => {
            advance(world, params.actions.search_burst, params, hook, &mut ticks)?
        }
    };
    Ok(ActionResult {
        outcome: ActionOutcome::Search {
            chosen_direction: chosen,
            stop_reason,
        },
        ticks,
    })
}

pub fn act_none(_world: &mut World) -> ActionResult {
    ActionResult {
        outcome: ActionOutcome::None,
        ticks: 0,
    }
}

/// Runs any command. `Looking` is included so callers can dispatch
/// uniformly; it reports through [`ActionOutcome::Looked`].
pub fn execute(
    world: &mut World,
    command: ActionCommand,
    params: &RobotParams,
    hook: &mut dyn TickObserver,
) -> Result<ActionResult, ActionError> {
    match command {
        ActionCommand::None => Ok(act_none(world)),
        ActionCommand::Looking => {
            let (outcome, ticks) = act_looking(world, params, hook);
            Ok(ActionResult {
                outcome: ActionOutcome::Looked(outcome),
                ticks,
            })
        }
        ActionCommand::Forward(d) => act_forward(world, d, params, hook),
        ActionCommand::Search(d) => act_search(world, d, params, hook),
    }
}
