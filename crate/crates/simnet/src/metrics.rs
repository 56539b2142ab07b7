//! Per-run summary, accumulated from trace records, written as CSV rows.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::monitor::Verdicts;
use crate::trace::{Event, Record};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub name: String,
    pub seed: u64,
    pub protocol: String,
    pub n: u32,
    pub f: u32,
    pub slots: u64,
    pub rounds: u64,
    pub decided: u32,
    pub decided_ones: u32,
    pub decided_zeros: u32,
    pub first_decision_round: Option<u64>,
    pub last_decision_round: Option<u64>,
    pub min_rule: Option<usize>,
    pub max_rule: Option<usize>,
    /// Shortest and longest correct final, in bits, at the end of the run.
    pub min_final_bits: Option<usize>,
    pub max_final_bits: Option<usize>,
    pub final_changes: u64,
    pub max_epoch: u64,
    pub confirmed_epochs: u64,
    pub stuck_msgs: u64,
    pub proposals: u64,
    pub qcs: u64,
    pub blocks: u64,
    pub violations: u64,
    pub claim3_max_latency: Option<u64>,
    pub odd_epoch_max_duration: Option<u64>,
    pub halted: bool,
}

/// Builds [`Metrics`] from a record stream.
#[derive(Clone, Debug, Default)]
pub struct MetricsCollector {
    m: Metrics,
    correct: Vec<bool>,
    finals: Vec<Option<usize>>,
    genesis_bits: usize,
    confirmed: Vec<u64>,
}

impl MetricsCollector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, r: &Record) {
        let m = &mut self.m;
        match &r.event {
            Event::RunStart {
                config,
                corrupt,
                genesis,
                ..
            } => {
                m.name = config.name.clone();
                m.seed = config.seed;
                m.protocol = config.protocol.name().to_string();
                m.n = config.n;
                m.f = config.f;
                self.correct = vec![true; config.n as usize];
                for &c in corrupt {
                    if let Some(x) = self.correct.get_mut(c as usize) {
                        *x = false;
                    }
                }
                self.genesis_bits = genesis.0.len();
                self.finals = vec![None; config.n as usize];
            }
            Event::Decide { round, value, rule, .. } => {
                m.decided += 1;
                if *value {
                    m.decided_ones += 1;
                } else {
                    m.decided_zeros += 1;
                }
                m.first_decision_round = Some(m.first_decision_round.map_or(*round, |x| x.min(*round)));
                m.last_decision_round = Some(m.last_decision_round.map_or(*round, |x| x.max(*round)));
                m.min_rule = Some(m.min_rule.map_or(*rule, |x| x.min(*rule)));
                m.max_rule = Some(m.max_rule.map_or(*rule, |x| x.max(*rule)));
            }
            Event::SnowflakeRound { round, .. } | Event::ChainRound { round, .. } => m.rounds = m.rounds.max(*round),
            Event::Final { proc, value, .. } => {
                m.final_changes += 1;
                if let Some(f) = self.finals.get_mut(*proc as usize) {
                    *f = Some(value.0.len());
                }
            }
            Event::Epoch { epoch, .. } => m.max_epoch = m.max_epoch.max(*epoch),
            Event::Confirm { epoch, .. } => {
                if !self.confirmed.contains(epoch) {
                    self.confirmed.push(*epoch);
                    m.confirmed_epochs += 1;
                }
            }
            Event::Envelope { kind, .. } if kind == "stuck" => m.stuck_msgs += 1,
            Event::Proposal { .. } => m.proposals += 1,
            Event::Qc { .. } => m.qcs += 1,
            Event::Block { .. } => m.blocks += 1,
            Event::Finish { slots, halted } => {
                m.slots = *slots;
                m.halted = *halted;
            }
            _ => {}
        }
    }

    /// Final metrics, merged with the monitor's verdicts.
    pub fn finish(&self, verdicts: &Verdicts) -> Metrics {
        let mut m = self.m.clone();
        if m.protocol != "snowflake" {
            let lens = self
                .finals
                .iter()
                .zip(&self.correct)
                .filter(|(_, c)| **c)
                .map(|(f, _)| f.unwrap_or(self.genesis_bits));
            m.min_final_bits = lens.clone().min();
            m.max_final_bits = lens.max();
        }
        m.violations = verdicts.violations.len() as u64;
        m.claim3_max_latency = verdicts.stats.claim3_max_latency;
        m.odd_epoch_max_duration = verdicts.stats.odd_epoch_max_duration;
        m
    }
}

/// Writes rows with a header.
pub fn write_csv<W: Write>(out: W, rows: &[Metrics]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
