//! Run traces: one record per optimizer event, written as JSON lines.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle::EvalCounters;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    AgdStep,
    CertifyFail,
    WitnessFound,
    NcExploit,
    Restart,
    /// Restart caused by a change of the smoothness estimate.
    RestartSmoothness,
    Terminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer_step: u64,
    pub inner_step: u64,
    pub f_value: Option<f64>,
    pub grad_norm: Option<f64>,
    pub event: Event,
    pub n_value: u64,
    pub n_gradient: u64,
}

impl TraceRecord {
    pub fn counters(&self) -> EvalCounters {
        EvalCounters {
            n_value: self.n_value,
            n_gradient: self.n_gradient,
        }
    }
}

/// Event log of one run. Recording is opt-in: a disabled trace drops records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    enabled: bool,
    records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn enabled() -> Self {
        RunTrace {
            enabled: true,
            records: Vec::new(),
        }
    }

    pub fn disabled() -> Self {
        RunTrace::default()
    }

    pub fn new(enabled: bool) -> Self {
        RunTrace {
            enabled,
            records: Vec::new(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn count(&self, event: Event) -> usize {
        self.records.iter().filter(|r| r.event == event).count()
    }

    pub fn push(
        &mut self,
        outer_step: u64,
        inner_step: u64,
        f_value: Option<f64>,
        grad_norm: Option<f64>,
        event: Event,
        counters: EvalCounters,
    ) {
        if !self.enabled {
            return;
        }
        debug_assert!(self
            .records
            .last()
            .map_or(true, |last| last.outer_step <= outer_step
                && last.n_value <= counters.n_value
                && last.n_gradient <= counters.n_gradient));
        self.records.push(TraceRecord {
            outer_step,
            inner_step,
            f_value,
            grad_norm,
            event,
            n_value: counters.n_value,
            n_gradient: counters.n_gradient,
        });
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<RunTrace> {
        let mut records = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            records.push(serde_json::from_str(line)?);
        }
        Ok(RunTrace {
            enabled: true,
            records,
        })
    }
}
