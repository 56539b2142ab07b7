//! Event sink shared by the engines: feeds the monitor and metrics and
//! optionally writes the trace.

use std::io::Write;

use crate::config::TraceLevel;
use crate::error::SimError;
use crate::metrics::{Metrics, MetricsCollector};
use crate::monitor::{Monitor, Verdicts};
use crate::trace::{write_record, Event, Record};

/// Verdicts and metrics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub verdicts: Verdicts,
    pub metrics: Metrics,
}

pub struct Recorder<'w> {
    monitor: Monitor,
    metrics: MetricsCollector,
    out: Option<&'w mut dyn Write>,
    level: TraceLevel,
    halt_on_violation: bool,
    io_error: Option<std::io::Error>,
}

impl<'w> Recorder<'w> {
    pub fn new(out: Option<&'w mut dyn Write>, level: TraceLevel, halt_on_violation: bool) -> Self {
        Recorder {
            monitor: Monitor::new(),
            metrics: MetricsCollector::new(),
            out,
            level,
            halt_on_violation,
            io_error: None,
        }
    }

    /// Whether per-processor detail events should be produced.
    pub fn full(&self) -> bool {
        self.level == TraceLevel::Full
    }

    pub fn emit(&mut self, t: u64, event: Event) {
        let r = Record { t, event };
        self.monitor.observe(&r);
        self.metrics.observe(&r);
        if let Some(out) = self.out.as_mut() {
            if self.io_error.is_none() {
                if let Err(e) = write_record(out, &r) {
                    self.io_error = Some(e);
                }
            }
        }
    }

    /// True once a violation was flagged and halting was requested.
    pub fn should_halt(&self) -> bool {
        self.halt_on_violation && self.monitor.has_violation()
    }

    pub fn finish(mut self, slots: u64, halted: bool) -> Result<RunOutput, SimError> {
        self.emit(slots, Event::Finish { slots, halted });
        if let Some(out) = self.out.as_mut() {
            out.flush()?;
        }
        if let Some(e) = self.io_error {
            return Err(e.into());
        }
        let verdicts = self.monitor.verdicts();
        let metrics = self.metrics.finish(&verdicts);
        Ok(RunOutput { verdicts, metrics })
    }
}
