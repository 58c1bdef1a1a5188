//! Round orchestration over the simulated constellation.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::avnet::KeySetup;
use crate::config::ScenarioConfig;
use crate::fl::orbit_pass::{OrbitPass, PassError, TrainedModel};
use crate::fl::trace::{Event, EventKind, EventLog, RoundTrace};
use crate::fl::trainer::{local_train, Objective, Shard, SyntheticTask, TrainError};
use crate::group::{GroupError, GroupParams, HASH_TO_SCALAR_ID};
use crate::model::ModelVector;
use crate::orbit::{
    distance_km, link_budget, transmission_delay, visibility_windows, Constellation, LinkParams, SatelliteId,
    VisibilitySchedule, VisibilityWindow,
};
use crate::secure_agg::{
    aggregate_recover, dequantize_average, encrypt_model, plaintext_sum, quantize_counting, round_id, AggregationError,
    CipherVector, QuantizationScheme, QuantizedVector,
};
use crate::seed::derive_seed;

const TAG_KEYS: u64 = 1;
const TAG_TASK: u64 = 2;
const TAG_SHARD: u64 = 3;
const TAG_INIT: u64 = 4;
const TAG_TRAIN: u64 = 5;
const TAG_DLOG: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    FedSecure,
    DirectSync,
    /// Same flow as `FedSecure` with encryption replaced by a plaintext sum.
    PlaintextDebug,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::FedSecure => "fedsecure",
            Mode::DirectSync => "direct_sync",
            Mode::PlaintextDebug => "plaintext_debug",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fedsecure" => Ok(Mode::FedSecure),
            "direct_sync" => Ok(Mode::DirectSync),
            "plaintext_debug" => Ok(Mode::PlaintextDebug),
            other => Err(format!(
                "unknown mode `{other}` (expected fedsecure, direct_sync or plaintext_debug)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("round {round} incomplete: {reason}")]
    Incomplete { round: u64, reason: String },
}

impl SimError {
    fn from_pass(round: u64, err: PassError) -> Self {
        match err {
            PassError::Training { source, .. } => SimError::Train(source),
            other => SimError::Incomplete {
                round,
                reason: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxRounds,
    Converged,
    /// The given round could not finish inside the visibility horizon.
    HorizonExhausted {
        round: u64,
    },
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub traces: Vec<RoundTrace>,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy)]
struct Holder {
    sat: SatelliteId,
    start: f64,
    done: f64,
}

pub struct Simulation {
    config: ScenarioConfig,
    constellation: Constellation,
    link: LinkParams,
    schedule: VisibilitySchedule,
    group: GroupParams,
    scheme: QuantizationScheme,
    keys: KeySetup,
    shards: Vec<Shard>,
    global: ModelVector,
    holders: Option<Vec<Holder>>,
    clock: f64,
    round: u64,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        let group = config.group_params()?;
        Self::with_group(config, group)
    }

    /// Builds the simulation around an already generated group.
    pub fn with_group(config: ScenarioConfig, group: GroupParams) -> Result<Self, SimError> {
        let scheme = config.scheme()?;
        scheme.check_group(&group)?;
        let orbits = config.constellation.orbits;
        let crypto = config.seeds.crypto;
        let keys = KeySetup::run(&group, orbits, |i| derive_seed(crypto, &[TAG_KEYS, i as u64]));

        let constellation = config.constellation();
        let windows = visibility_windows(
            &constellation,
            &config.ground_station,
            config.run.horizon_s,
            config.run.step_s,
        );
        let schedule = VisibilitySchedule::new(constellation.satellite_count(), windows, config.run.horizon_s);

        let train = config.seeds.train;
        let t = &config.training;
        let task = SyntheticTask::new(t.trainer.task, t.features, derive_seed(train, &[TAG_TASK]));
        let shards = (0..constellation.satellite_count())
            .map(|sat| task.shard(t.samples_per_satellite, derive_seed(train, &[TAG_SHARD, sat as u64])))
            .collect();
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(train, &[TAG_INIT]));
        let global: ModelVector = (0..task.model_len())
            .map(|_| 0.01 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect::<Vec<f64>>()
            .into();

        Ok(Self {
            link: config.link_params(),
            config,
            constellation,
            schedule,
            group,
            scheme,
            keys,
            shards,
            global,
            holders: None,
            clock: 0.0,
            round: 0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.run.mode
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn schedule(&self) -> &VisibilitySchedule {
        &self.schedule
    }

    pub fn windows(&self) -> Vec<VisibilityWindow> {
        let mut w: Vec<_> = self.schedule.all().copied().collect();
        w.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.satellite.cmp(&b.satellite)));
        w
    }

    pub fn group(&self) -> &GroupParams {
        &self.group
    }

    pub fn scheme(&self) -> &QuantizationScheme {
        &self.scheme
    }

    pub fn keys(&self) -> &KeySetup {
        &self.keys
    }

    pub fn shards(&self) -> &[Shard] {
        &self.shards
    }

    pub fn global_model(&self) -> &ModelVector {
        &self.global
    }

    /// Bytes exchanged once by the key setup.
    pub fn setup_bytes(&self) -> u64 {
        self.keys.wire_bytes(&self.group)
    }

    /// Sample-weighted mean loss of `model` over every shard.
    pub fn global_loss(&self, model: &ModelVector) -> f64 {
        let (mut total, mut n) = (0.0, 0usize);
        for s in &self.shards {
            total += s.loss(model.values()) * s.len() as f64;
            n += s.len();
        }
        total / n as f64
    }

    /// Delay of one model transfer between orbit neighbours.
    pub fn hop_delay_s(&self) -> f64 {
        let k = self.config.constellation.sats_per_orbit;
        let d = if k > 1 {
            self.constellation.neighbour_distance_km(k)
        } else {
            0.0
        };
        transmission_delay(self.global.wire_bytes(), self.config.link.isl_rate_bps, d)
    }

    pub fn compute_s(&self) -> f64 {
        let t = &self.config.training;
        (t.samples_per_satellite * t.trainer.local_iterations) as f64 / t.throughput
    }

    /// Completion time of a ground link transfer starting at `t`.
    fn ground_transfer(&self, sat: SatelliteId, t: f64, bytes: u64) -> f64 {
        let d = distance_km(
            &self.constellation.position(sat, t),
            &self.config.ground_station.position(t),
        );
        t + transmission_delay(bytes, link_budget(d, &self.link).rate_bps, d)
    }

    fn first_visible(&self, sats: &[SatelliteId], t: f64) -> Option<(f64, SatelliteId)> {
        sats.iter()
            .filter_map(|&s| self.schedule.next_visible(s, t).map(|v| (v, s)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    }

    fn train_sat(&self, round: u64, sat: SatelliteId, global: &ModelVector) -> Result<TrainedModel, TrainError> {
        let shard = &self.shards[sat];
        let seed = derive_seed(self.config.seeds.train, &[TAG_TRAIN, round, sat as u64]);
        let (model, loss) = local_train(global, shard, &self.config.training.trainer, seed)?;
        Ok(TrainedModel {
            model,
            loss,
            data_size: shard.len(),
            compute_s: self.compute_s(),
        })
    }

    fn incomplete(&self, round: u64, what: &str, after: f64) -> SimError {
        SimError::Incomplete {
            round,
            reason: format!("no visibility for {what} after t = {after:.1} s"),
        }
    }

    fn downlink(&self, round: u64, sats: &[SatelliteId], t: f64, what: &str) -> Result<Holder, SimError> {
        let (start, sat) = self
            .first_visible(sats, t)
            .ok_or_else(|| self.incomplete(round, what, t))?;
        Ok(Holder {
            sat,
            start,
            done: self.ground_transfer(sat, start, self.global.wire_bytes()),
        })
    }

    fn log_receipt(log: &mut EventLog, h: &Holder, after: Option<usize>) -> usize {
        let s = log.push(Event {
            t: h.start,
            kind: EventKind::DownlinkStart { sat: h.sat },
            after,
        });
        log.push(Event {
            t: h.done,
            kind: EventKind::GlobalReceived { sat: h.sat },
            after: Some(s),
        })
    }

    /// Runs one global round and advances the simulation state.
    pub fn step(&mut self) -> Result<RoundTrace, SimError> {
        let round = self.round + 1;
        let trace = match self.config.run.mode {
            Mode::DirectSync => self.direct_round(round)?,
            mode => self.orbit_round(round, mode)?,
        };
        self.round = round;
        Ok(trace)
    }

    fn orbit_round(&mut self, round: u64, mode: Mode) -> Result<RoundTrace, SimError> {
        let start = self.clock;
        let orbits = self.config.constellation.orbits;
        let model_bytes = self.global.wire_bytes();
        let rid = round_id(round);
        let mut log = EventLog::default();
        let mut downlink_bytes = 0;

        let holders = match &self.holders {
            Some(h) => h.clone(),
            None => {
                let mut hs = Vec::with_capacity(orbits);
                for l in 0..orbits {
                    hs.push(self.downlink(round, &self.constellation.orbit_members(l), start, "initial downlink")?);
                    downlink_bytes += model_bytes;
                }
                hs
            }
        };

        let hop = self.hop_delay_s();
        let mut ciphers: Vec<CipherVector> = Vec::new();
        let mut plain: Vec<QuantizedVector> = Vec::new();
        let mut encrypt_ms = 0.0;
        let mut uplink_bytes = 0;
        let mut clamped_entries = 0;
        let mut report_s = Vec::with_capacity(orbits);
        let mut reporters = Vec::with_capacity(orbits);
        let mut last_uplink: Option<(f64, usize)> = None;

        for (l, h) in holders.iter().enumerate() {
            let received = Self::log_receipt(&mut log, h, None);
            let members = self.constellation.orbit_members(l);
            let pass = OrbitPass {
                orbit: l,
                members: &members,
                holder: h.sat,
                receipt_t: h.done,
                receipt_event: Some(received),
                direction: self.config.training.direction,
                hop_delay_s: hop,
                visibility: &self.schedule,
            };
            let out = pass
                .run(&self.global, &mut log, |sat, g| self.train_sat(round, sat, g))
                .map_err(|e| SimError::from_pass(round, e))?;

            let (q, clamped) = quantize_counting(&out.partial, &self.scheme);
            clamped_entries += clamped;
            let bytes = match mode {
                Mode::FedSecure => {
                    let t0 = Instant::now();
                    let c = encrypt_model(&q, self.keys.secrets[l].s(), &rid, &self.group);
                    encrypt_ms += t0.elapsed().as_secs_f64() * 1e3;
                    let n = c.wire_len(&self.group) as u64;
                    ciphers.push(c);
                    n
                }
                _ => {
                    let n = (4 + rid.len() + 8 * q.len()) as u64;
                    plain.push(q);
                    n
                }
            };
            uplink_bytes += bytes;
            let up_start = out.report_ready_t;
            let up_done = self.ground_transfer(out.reporter, up_start, bytes);
            let s = log.push(Event {
                t: up_start,
                kind: EventKind::UplinkStart { sat: out.reporter },
                after: Some(out.report_event),
            });
            let d = log.push(Event {
                t: up_done,
                kind: EventKind::UplinkDone { sat: out.reporter },
                after: Some(s),
            });
            if last_uplink.is_none_or(|(t, _)| up_done > t) {
                last_uplink = Some((up_done, d));
            }
            report_s.push(up_done);
            reporters.push(out.reporter);
        }

        let (t_agg, agg_pred) = last_uplink.expect("at least one orbit");
        let agg_event = log.push(Event {
            t: t_agg,
            kind: EventKind::ServerAggregated,
            after: Some(agg_pred),
        });
        let mut recover_ms = 0.0;
        let sum = match mode {
            Mode::FedSecure => {
                let t0 = Instant::now();
                let sum = aggregate_recover(
                    &ciphers,
                    &self.keys.aggregation_key,
                    &rid,
                    &self.scheme,
                    &self.group,
                    self.config.run.dlog,
                    derive_seed(self.config.seeds.crypto, &[TAG_DLOG, round]),
                )?;
                recover_ms = t0.elapsed().as_secs_f64() * 1e3;
                sum
            }
            _ => plaintext_sum(&plain)?,
        };
        let new_global = dequantize_average(&sum, &self.scheme)?;

        let mut next = Vec::with_capacity(orbits);
        let mut end = t_agg;
        for l in 0..orbits {
            let h = self.downlink(round, &self.constellation.orbit_members(l), t_agg, "model downlink")?;
            Self::log_receipt(&mut log, &h, Some(agg_event));
            downlink_bytes += model_bytes;
            end = end.max(h.done);
            next.push(h);
        }

        let train_loss = self.global_loss(&new_global);
        self.global = new_global;
        self.holders = Some(next);
        self.clock = t_agg;
        Ok(RoundTrace {
            round,
            start_s: start,
            end_s: end,
            report_s,
            reporters,
            uplink_bytes,
            downlink_bytes,
            encrypt_ms,
            recover_ms,
            train_loss,
            quantized_sum: Some(sum),
            clamped_entries,
            events: log,
        })
    }

    fn direct_round(&mut self, round: u64) -> Result<RoundTrace, SimError> {
        let start = self.clock;
        let n = self.constellation.satellite_count();
        let model_bytes = self.global.wire_bytes();
        let mut log = EventLog::default();
        let mut downlink_bytes = 0;

        let holders = match &self.holders {
            Some(h) => h.clone(),
            None => {
                let mut hs = Vec::with_capacity(n);
                for sat in 0..n {
                    hs.push(self.downlink(round, &[sat], start, "initial downlink")?);
                    downlink_bytes += model_bytes;
                }
                hs
            }
        };

        let mut models = Vec::with_capacity(n);
        let mut report_s = Vec::with_capacity(n);
        let mut last_uplink: Option<(f64, usize)> = None;
        for h in &holders {
            let received = Self::log_receipt(&mut log, h, None);
            let tm = self.train_sat(round, h.sat, &self.global)?;
            let ready = h.done + tm.compute_s;
            let trained = log.push(Event {
                t: ready,
                kind: EventKind::TrainingDone { sat: h.sat },
                after: Some(received),
            });
            let up_start = self
                .schedule
                .next_visible(h.sat, ready)
                .ok_or_else(|| self.incomplete(round, "uplink", ready))?;
            let up_done = self.ground_transfer(h.sat, up_start, model_bytes);
            let s = log.push(Event {
                t: up_start,
                kind: EventKind::UplinkStart { sat: h.sat },
                after: Some(trained),
            });
            let d = log.push(Event {
                t: up_done,
                kind: EventKind::UplinkDone { sat: h.sat },
                after: Some(s),
            });
            if last_uplink.is_none_or(|(t, _)| up_done > t) {
                last_uplink = Some((up_done, d));
            }
            report_s.push(up_done);
            models.push(tm);
        }

        let (t_agg, agg_pred) = last_uplink.expect("at least one satellite");
        let agg_event = log.push(Event {
            t: t_agg,
            kind: EventKind::ServerAggregated,
            after: Some(agg_pred),
        });
        let total: usize = models.iter().map(|m| m.data_size).sum();
        let mut avg = vec![0.0; self.global.len()];
        for m in &models {
            let w = m.data_size as f64 / total as f64;
            for (a, v) in avg.iter_mut().zip(m.model.values()) {
                *a += w * v;
            }
        }
        let new_global = ModelVector::new(avg);

        let mut next = Vec::with_capacity(n);
        let mut end = t_agg;
        for sat in 0..n {
            let h = self.downlink(round, &[sat], t_agg, "model downlink")?;
            Self::log_receipt(&mut log, &h, Some(agg_event));
            downlink_bytes += model_bytes;
            end = end.max(h.done);
            next.push(h);
        }

        let train_loss = self.global_loss(&new_global);
        self.global = new_global;
        self.holders = Some(next);
        self.clock = t_agg;
        Ok(RoundTrace {
            round,
            start_s: start,
            end_s: end,
            report_s,
            reporters: (0..n).collect(),
            uplink_bytes: model_bytes * n as u64,
            downlink_bytes,
            encrypt_ms: 0.0,
            recover_ms: 0.0,
            train_loss,
            quantized_sum: None,
            clamped_entries: 0,
            events: log,
        })
    }

    /// Runs rounds until `max_rounds`, convergence or the end of the horizon.
    pub fn run(&mut self) -> Result<RunReport, SimError> {
        let r = self.config.run.clone();
        let mut traces: Vec<RoundTrace> = Vec::new();
        let stop = loop {
            if traces.len() >= r.max_rounds {
                break StopReason::MaxRounds;
            }
            match self.step() {
                Ok(t) => traces.push(t),
                Err(SimError::Incomplete { round, .. }) if !traces.is_empty() => {
                    break StopReason::HorizonExhausted { round };
                }
                Err(e) => return Err(e),
            }
            if converged(&traces, r.epsilon, r.patience) {
                break StopReason::Converged;
            }
        };
        Ok(RunReport { traces, stop })
    }

    /// `# key=value` lines recorded at the top of the rounds file.
    pub fn trace_meta(&self) -> Vec<(&'static str, String)> {
        vec![
            ("mode", self.mode().to_string()),
            ("seed_crypto", self.config.seeds.crypto.to_string()),
            ("seed_train", self.config.seeds.train.to_string()),
            ("group_bits", self.group.modulus_bits().to_string()),
            ("hash_to_scalar", HASH_TO_SCALAR_ID.to_string()),
            ("dlog", self.config.run.dlog.to_string()),
        ]
    }
}

/// Loss improved by less than `epsilon` over the last `patience` rounds.
pub fn converged(traces: &[RoundTrace], epsilon: f64, patience: usize) -> bool {
    if traces.len() <= patience {
        return false;
    }
    let last = traces[traces.len() - 1].train_loss;
    let before = traces[traces.len() - 1 - patience].train_loss;
    before - last < epsilon
}
