//! Deterministic synchronous network simulator for Snowflake⁺, Snowman
//! and Frosty, with invariant monitors and trace replay.

pub mod adversary;
pub mod binomial;
pub mod blockgen;
pub mod config;
pub mod error;
pub mod frosty_sim;
pub mod metrics;
pub mod monitor;
pub mod recorder;
pub mod search;
mod snowflake_sim;
mod snowman_sim;
pub mod trace;

use std::io::Write;

use rayon::prelude::*;

use snowfrost_core::{Block, LabelCodec};

pub use config::{Protocol, ProtocolParams, SimConfig, Strategy, TraceLevel};
pub use error::SimError;
pub use metrics::{write_csv, Metrics, MetricsCollector};
pub use monitor::{Monitor, Verdicts, Violation, ViolationKind};
pub use recorder::{Recorder, RunOutput};
pub use snowflake_sim::{initial_values, minority_colour};
pub use trace::{read_trace, Event, Record};

/// Runs one simulation, writing the trace to `out` when given.
pub fn run(cfg: &SimConfig, out: Option<&mut dyn Write>) -> Result<RunOutput, SimError> {
    let (params, warnings) = cfg.validate()?;
    let corrupt = adversary::corrupted_set(cfg.n, cfg.f, cfg.adversary.corruption, cfg.seed);
    let genesis = Block::genesis(LabelCodec::new(cfg.label_width)?);
    let mut rec = Recorder::new(out, cfg.trace, cfg.halt_on_violation);
    rec.emit(
        0,
        Event::RunStart {
            config: cfg.clone(),
            corrupt: corrupt.clone(),
            genesis: trace::Bits((**genesis.chain_bits()).clone()),
            warnings,
        },
    );
    let (slots, halted) = match &params {
        ProtocolParams::Snowflake(p) => snowflake_sim::run(cfg, p, &corrupt, &mut rec)?,
        ProtocolParams::Snowman(p) => snowman_sim::run(cfg, p, &corrupt, &mut rec)?,
        ProtocolParams::Frosty(p) => frosty_sim::run(cfg, p, &corrupt, &mut rec)?,
    };
    rec.finish(slots, halted)
}

/// Runs one simulation and returns the trace bytes with the outcome.
pub fn run_traced(cfg: &SimConfig) -> Result<(Vec<u8>, RunOutput), SimError> {
    let mut buf = Vec::new();
    let out = run(cfg, Some(&mut buf))?;
    Ok((buf, out))
}

/// Re-checks a recorded trace. Uses only the records, so a trace
/// replayed any number of times yields the same verdicts and metrics.
pub fn replay(records: &[Record]) -> RunOutput {
    let mut monitor = Monitor::new();
    let mut metrics = MetricsCollector::new();
    for r in records {
        monitor.observe(r);
        metrics.observe(r);
    }
    let verdicts = monitor.verdicts();
    let metrics = metrics.finish(&verdicts);
    RunOutput { verdicts, metrics }
}

/// Runs `cfg` once per seed in parallel, without keeping traces. Results
/// are in seed order.
pub fn sweep(cfg: &SimConfig, seeds: &[u64]) -> Result<Vec<RunOutput>, SimError> {
    seeds.par_iter().map(|&s| run(&cfg.with_seed(s), None)).collect()
}
