//! On-orbit forwarding and partial aggregation for one orbit.
//!
//! The satellite that first holds the global model trains, broadcasts the
//! global model both ways around the ring, then starts a one-directional
//! chain in which every satellite folds its own trained model into the
//! running partial. Once the partial is back at the initiator it is spread
//! both ways again until some satellite that can see the ground station
//! holds it.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fl::trace::{Event, EventKind, EventLog};
use crate::fl::trainer::TrainError;
use crate::model::ModelVector;
use crate::orbit::{SatelliteId, VisibilitySchedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PassError {
    #[error("orbit {orbit} has no satellites")]
    EmptyOrbit { orbit: usize },
    #[error("satellite {sat} is not on orbit {orbit}")]
    HolderNotOnOrbit { orbit: usize, sat: SatelliteId },
    #[error("no satellite on orbit {orbit} becomes visible after t = {after:.1} s")]
    NoVisibility { orbit: usize, after: f64 },
    #[error("satellite {sat}: {source}")]
    Training {
        sat: SatelliteId,
        #[source]
        source: TrainError,
    },
}

/// Direction of the aggregation chain. Clockwise walks increasing slot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    #[default]
    Clockwise,
    Counterclockwise,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Clockwise => "clockwise",
            Direction::Counterclockwise => "counterclockwise",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clockwise" => Ok(Direction::Clockwise),
            "counterclockwise" => Ok(Direction::Counterclockwise),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// Lookup of the earliest visibility at or after a time.
pub trait Visibility {
    fn next_visible(&self, sat: SatelliteId, t: f64) -> Option<f64>;
}

impl Visibility for VisibilitySchedule {
    fn next_visible(&self, sat: SatelliteId, t: f64) -> Option<f64> {
        VisibilitySchedule::next_visible(self, sat, t)
    }
}

/// `(1 - a) * running + a * next` with `a = next_size / (visited_size + next_size)`.
///
/// With this weight the chain's running model is always the data-size
/// weighted mean of every model folded in so far.
pub fn partial_aggregate(
    running: &ModelVector,
    next: &ModelVector,
    visited_size: usize,
    next_size: usize,
) -> ModelVector {
    let alpha = next_size as f64 / (visited_size + next_size) as f64;
    running
        .values()
        .iter()
        .zip(next.values())
        .map(|(r, n)| (1.0 - alpha) * r + alpha * n)
        .collect::<Vec<_>>()
        .into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PassPhase {
    Broadcast,
    Aggregate,
    Distribute,
    Reported,
}

/// Running state of one orbit's pass.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitPassState {
    pub orbit: usize,
    pub running: ModelVector,
    pub visited_size: usize,
    pub direction: Direction,
    phase: PassPhase,
}

impl OrbitPassState {
    pub fn new(orbit: usize, direction: Direction) -> Self {
        Self {
            orbit,
            running: ModelVector::default(),
            visited_size: 0,
            direction,
            phase: PassPhase::Broadcast,
        }
    }

    pub fn phase(&self) -> PassPhase {
        self.phase
    }

    /// Moves to a later phase.
    pub fn advance(&mut self, next: PassPhase) {
        assert!(next > self.phase, "phase {:?} cannot follow {:?}", next, self.phase);
        self.phase = next;
    }

    /// Folds one satellite's trained model into the running partial.
    pub fn absorb(&mut self, model: &ModelVector, data_size: usize) {
        debug_assert_eq!(self.phase, PassPhase::Aggregate);
        self.running = if self.visited_size == 0 {
            model.clone()
        } else {
            partial_aggregate(&self.running, model, self.visited_size, data_size)
        };
        self.visited_size += data_size;
    }
}

/// Result of local training on one satellite.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: ModelVector,
    pub loss: f64,
    pub data_size: usize,
    pub compute_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitPassOutcome {
    pub orbit: usize,
    pub partial: ModelVector,
    pub data_size: usize,
    /// Earliest time a satellite holding the partial is visible.
    pub report_ready_t: f64,
    pub reporter: SatelliteId,
    /// Time the partial was complete at the initiator.
    pub partial_complete_t: f64,
    /// Index into the event log of the report-ready event.
    pub report_event: usize,
}

pub struct OrbitPass<'a, V: Visibility> {
    pub orbit: usize,
    /// Satellites in slot order.
    pub members: &'a [SatelliteId],
    /// Satellite that received the global model.
    pub holder: SatelliteId,
    pub receipt_t: f64,
    /// Index of the receipt event in the log, if recorded.
    pub receipt_event: Option<usize>,
    pub direction: Direction,
    /// ISL delay for one model over one hop.
    pub hop_delay_s: f64,
    pub visibility: &'a V,
}

impl<V: Visibility> OrbitPass<'_, V> {
    /// Runs broadcast, training, the aggregation chain and distribution.
    pub fn run<F>(&self, global: &ModelVector, log: &mut EventLog, mut train: F) -> Result<OrbitPassOutcome, PassError>
    where
        F: FnMut(SatelliteId, &ModelVector) -> Result<TrainedModel, TrainError>,
    {
        let orbit = self.orbit;
        let k = self.members.len();
        if k == 0 {
            return Err(PassError::EmptyOrbit { orbit });
        }
        let h = self
            .members
            .iter()
            .position(|&m| m == self.holder)
            .ok_or(PassError::HolderNotOnOrbit {
                orbit,
                sat: self.holder,
            })?;
        let ring = |a: usize, b: usize| {
            let d = (a + k - b) % k;
            d.min(k - d)
        };
        let hop = self.hop_delay_s;
        let mut train_at = |slot: usize| {
            let sat = self.members[slot];
            train(sat, global).map_err(|source| PassError::Training { sat, source })
        };

        let mut state = OrbitPassState::new(orbit, self.direction);
        let mut trained: Vec<Option<TrainedModel>> = vec![None; k];
        let mut done_t = vec![0.0; k];
        let mut done_ev = vec![0usize; k];

        // the initiator trains before broadcasting
        let first = train_at(h)?;
        done_t[h] = self.receipt_t + first.compute_s;
        done_ev[h] = log.push(Event {
            t: done_t[h],
            kind: EventKind::TrainingDone { sat: self.holder },
            after: self.receipt_event,
        });
        trained[h] = Some(first);

        let broadcast_t = done_t[h];
        for slot in (0..k).filter(|&s| s != h) {
            let arrive = broadcast_t + ring(h, slot) as f64 * hop;
            let got = log.push(Event {
                t: arrive,
                kind: EventKind::GlobalForwarded {
                    from: self.holder,
                    to: self.members[slot],
                },
                after: Some(done_ev[h]),
            });
            let tm = train_at(slot)?;
            done_t[slot] = arrive + tm.compute_s;
            done_ev[slot] = log.push(Event {
                t: done_t[slot],
                kind: EventKind::TrainingDone {
                    sat: self.members[slot],
                },
                after: Some(got),
            });
            trained[slot] = Some(tm);
        }

        state.advance(PassPhase::Aggregate);
        let step = |i: usize| match self.direction {
            Direction::Clockwise => (h + i) % k,
            Direction::Counterclockwise => (h + k - i) % k,
        };
        let take =
            |slot: usize, trained: &[Option<TrainedModel>]| trained[slot].clone().expect("every satellite trained");
        let own = take(h, &trained);
        state.absorb(&own.model, own.data_size);
        let mut t = done_t[h];
        let mut last_ev = done_ev[h];
        for i in 1..k {
            let slot = step(i);
            let from = self.members[step(i - 1)];
            let arrive = t + hop;
            let hop_ev = log.push(Event {
                t: arrive,
                kind: EventKind::ChainHop {
                    from,
                    to: self.members[slot],
                },
                after: Some(last_ev),
            });
            let (t_next, pred) = if done_t[slot] > arrive {
                (done_t[slot], done_ev[slot])
            } else {
                (arrive, hop_ev)
            };
            t = t_next;
            let tm = take(slot, &trained);
            state.absorb(&tm.model, tm.data_size);
            last_ev = log.push(Event {
                t,
                kind: EventKind::PartialAggregated {
                    sat: self.members[slot],
                },
                after: Some(pred),
            });
        }
        if k > 1 {
            t += hop;
        }
        let complete_ev = log.push(Event {
            t,
            kind: EventKind::PartialComplete { sat: self.holder },
            after: Some(last_ev),
        });
        let partial_complete_t = t;

        state.advance(PassPhase::Distribute);
        // first satellite (by time, then id) that holds the partial while visible
        let mut best: Option<(f64, SatelliteId, f64)> = None;
        for slot in 0..k {
            let sat = self.members[slot];
            let have = t + ring(h, slot) as f64 * hop;
            if let Some(ready) = self.visibility.next_visible(sat, have) {
                let better = match best {
                    None => true,
                    Some((bt, bs, _)) => (ready, sat) < (bt, bs),
                };
                if better {
                    best = Some((ready, sat, have));
                }
            }
        }
        let (ready, reporter, have) = best.ok_or(PassError::NoVisibility { orbit, after: t })?;
        let delivered = log.push(Event {
            t: have,
            kind: EventKind::PartialDelivered { sat: reporter },
            after: Some(complete_ev),
        });
        let report_event = log.push(Event {
            t: ready,
            kind: EventKind::ReportReady { sat: reporter, orbit },
            after: Some(delivered),
        });
        state.advance(PassPhase::Reported);

        Ok(OrbitPassOutcome {
            orbit,
            partial: state.running,
            data_size: state.visited_size,
            report_ready_t: ready,
            reporter,
            partial_complete_t,
            report_event,
        })
    }
}
