use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::Serialize;

use super::run::{run_with, Policy, RunMode, RunReport};
use super::scenario::Scenario;
use super::trace::{NullSink, TerminalReason};

/// Inclusive seed range written `A..B`, or a single seed `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedRange(pub RangeInclusive<u64>);

impl SeedRange {
    pub fn seeds(&self) -> Vec<u64> {
        self.0.clone().collect()
    }
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| format!("bad seed `{t}`: {e}"))
        };
        let (a, b) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
            None => {
                let n = parse(s)?;
                (n, n)
            }
        };
        if a > b {
            return Err(format!("empty seed range {s}"));
        }
        Ok(SeedRange(a..=b))
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.0.start(), self.0.end())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Means over all runs.
    pub mean_cycles: f64,
    pub mean_path_length: f64,
    pub reports: Vec<RunReport>,
}

impl BatchSummary {
    pub fn from_reports(reports: Vec<RunReport>) -> Self {
        let runs = reports.len();
        let successes = reports.iter().filter(|r| r.reached).count();
        let n = runs.max(1) as f64;
        Self {
            runs,
            successes,
            success_rate: successes as f64 / n,
            mean_cycles: reports
                .iter()
                .map(|r| f64::from(r.cycles_used))
                .sum::<f64>()
                / n,
            mean_path_length: reports.iter().map(|r| r.path_length).sum::<f64>() / n,
            reports,
        }
    }
}

fn one(scenario: &Scenario, seed: u64, policy: &Policy) -> RunReport {
    match run_with(
        scenario,
        seed,
        &RunMode::InProcess,
        policy,
        &mut NullSink,
        None,
    ) {
        Ok(r) => r,
        // NullSink never fails, so this only guards against future sinks.
        Err(e) => RunReport {
            seed,
            reached: false,
            cycles_used: 0,
            path_length: 0.0,
            detect_loss_recoveries: 0,
            reason: TerminalReason::ProtocolError,
            detail: Some(e.to_string()),
            final_pose: scenario.start_pose,
        },
    }
}

pub fn batch_sequential(scenario: &Scenario, seeds: &[u64], policy: &Policy) -> BatchSummary {
    BatchSummary::from_reports(seeds.iter().map(|&s| one(scenario, s, policy)).collect())
}

#[cfg(feature = "parallel")]
pub fn batch_parallel(scenario: &Scenario, seeds: &[u64], policy: &Policy) -> BatchSummary {
    use rayon::prelude::*;
    BatchSummary::from_reports(
        seeds
            .par_iter()
            .map(|&s| one(scenario, s, policy))
            .collect(),
    )
}

/// Runs every seed in process. Seeds run in parallel when the `parallel`
/// feature is on; reports keep seed order either way.
pub fn batch(scenario: &Scenario, seeds: &[u64], policy: &Policy) -> BatchSummary {
    #[cfg(feature = "parallel")]
    {
        batch_parallel(scenario, seeds, policy)
    }
    #[cfg(not(feature = "parallel"))]
    {
        batch_sequential(scenario, seeds, policy)
    }
}
