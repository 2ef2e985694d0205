//! Reactive robot navigation: sense-while-acting atomic actions selected
//! each cycle by an ordered-clause decision program, run in a deterministic
//! 2D simulator.

pub mod actions;
pub mod decision;
pub mod geometry;
pub mod harness;
pub mod logic;
pub mod protocol;
pub mod sensors;
