//! Round traces and the per-round event log.

use std::io::{self, Write};

use crate::orbit::SatelliteId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    KeySetup,
    DownlinkStart { sat: SatelliteId },
    GlobalReceived { sat: SatelliteId },
    GlobalForwarded { from: SatelliteId, to: SatelliteId },
    TrainingDone { sat: SatelliteId },
    ChainHop { from: SatelliteId, to: SatelliteId },
    PartialAggregated { sat: SatelliteId },
    PartialComplete { sat: SatelliteId },
    PartialDelivered { sat: SatelliteId },
    ReportReady { sat: SatelliteId, orbit: usize },
    UplinkStart { sat: SatelliteId },
    UplinkDone { sat: SatelliteId },
    ServerAggregated,
}

/// A timestamped event. `after` indexes its causal predecessor in the same log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub after: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn push(&mut self, event: Event) -> usize {
        if let Some(p) = event.after {
            debug_assert!(p < self.events.len(), "predecessor must already be logged");
        }
        self.events.push(event);
        self.events.len() - 1
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// True when every event is no earlier than its predecessor.
    pub fn is_causal(&self) -> bool {
        self.events.iter().all(|e| match e.after {
            Some(p) => p < self.events.len() && e.t >= self.events[p].t,
            None => true,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: u64,
    pub start_s: f64,
    pub end_s: f64,
    /// Arrival of each orbit's (or satellite's, in direct sync) report at the server.
    pub report_s: Vec<f64>,
    pub reporters: Vec<SatelliteId>,
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
    pub encrypt_ms: f64,
    pub recover_ms: f64,
    /// Global loss of the model produced by this round.
    pub train_loss: f64,
    /// Recovered quantized sum; absent in direct sync.
    pub quantized_sum: Option<Vec<u64>>,
    pub clamped_entries: usize,
    pub events: EventLog,
}

pub const ROUNDS_CSV_HEADER: &str =
    "round,start_s,end_s,report_s,uplink_bytes,downlink_bytes,encrypt_ms,recover_ms,train_loss";

/// Writes `# key=value` comment lines, the header, then one row per round.
///
/// Wall-clock timings vary between runs; unless `wall_clock` is set they are
/// written as zero so that the file is reproducible.
pub fn write_rounds_csv<W: Write>(
    mut out: W,
    meta: &[(&str, String)],
    traces: &[RoundTrace],
    wall_clock: bool,
) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    writeln!(out, "{ROUNDS_CSV_HEADER}")?;
    for tr in traces {
        let reports: Vec<String> = tr.report_s.iter().map(|t| format!("{t:.3}")).collect();
        let (enc, rec) = if wall_clock {
            (tr.encrypt_ms, tr.recover_ms)
        } else {
            (0.0, 0.0)
        };
        writeln!(
            out,
            "{},{:.3},{:.3},{},{},{},{:.3},{:.3},{:.9}",
            tr.round,
            tr.start_s,
            tr.end_s,
            reports.join(";"),
            tr.uplink_bytes,
            tr.downlink_bytes,
            enc,
            rec,
            tr.train_loss
        )?;
    }
    Ok(())
}
