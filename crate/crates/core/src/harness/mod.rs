//! Scenario loading, the run loop, tracing, batch statistics and the live
//! viewer bridge.

mod batch;
mod live;
mod run;
mod scenario;
mod trace;

#[cfg(feature = "parallel")]
pub use batch::batch_parallel;
pub use batch::{batch, batch_sequential, BatchSummary, SeedRange};
pub use live::{serve_live, LiveCommand, LiveConfig, LiveFrame, LiveHandle, Snapshot, TickFrame};
pub use run::{
    apply_event, run, run_with, LiveAction, LiveControl, Policy, RunError, RunMode, RunReport,
    Transport,
};
pub use scenario::{
    check_obstacle_placement, load_scenario, EventAction, Scenario, ScenarioError, ScenarioEvent,
    Trigger, SCENARIO_SCHEMA_VERSION,
};
pub use trace::{
    command_direction, count_recoveries, is_subsequence, CycleRecord, EventRecord, JsonlWriter,
    NullSink, Phase, Tee, TerminalReason, TerminalRecord, Trace, TraceRecord, TraceSink,
    TRACE_SCHEMA_VERSION,
};
