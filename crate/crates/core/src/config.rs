//! Scenario files: flat `section.key = value` lines, `#` comments.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::dlog::DlogAlgorithm;
use crate::fl::engine::Mode;
use crate::fl::orbit_pass::Direction;
use crate::fl::trainer::{Task, TrainerConfig};
use crate::group::{GroupError, GroupParams};
use crate::orbit::{db_to_linear, dbm_to_watts, Constellation, GroundStation, LinkParams};
use crate::secure_agg::QuantizationScheme;

pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.conf");

const REQUIRED: &[&str] = &[
    "constellation.orbits",
    "constellation.sats_per_orbit",
    "constellation.altitude_km",
    "constellation.inclination_deg",
    "gs.latitude_deg",
    "gs.longitude_deg",
    "gs.min_elevation_deg",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationConfig {
    pub orbits: usize,
    pub sats_per_orbit: usize,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub raan_spacing_deg: f64,
    /// Right ascension of the first plane.
    pub raan_offset_deg: f64,
    pub phase_step_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub power_dbm: f64,
    pub sat_gain_dbi: f64,
    pub gs_gain_dbi: f64,
    pub noise_temp_k: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub isl_rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupSpec {
    Generate { bits: u64 },
    Explicit { p: String, q: String, g: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantConfig {
    pub scale: f64,
    pub clip: f64,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub trainer: TrainerConfig,
    pub features: usize,
    pub samples_per_satellite: usize,
    /// Samples processed per second of on-board compute.
    pub throughput: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub max_rounds: usize,
    pub epsilon: f64,
    pub patience: usize,
    pub horizon_s: f64,
    pub step_s: f64,
    pub dlog: DlogAlgorithm,
    pub wall_clock_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub crypto: u64,
    pub train: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub constellation: ConstellationConfig,
    pub ground_station: GroundStation,
    pub link: LinkConfig,
    pub group: GroupSpec,
    pub quant: QuantConfig,
    pub training: TrainingConfig,
    pub run: RunConfig,
    pub seeds: Seeds,
}

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn get<T: FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.take(key) {
            Some(v) => v.parse().map_err(|e: T::Err| invalid(key, e.to_string())),
            None => default.ok_or_else(|| ConfigError::Missing(vec![key.to_string()])),
        }
    }
}

fn check(ok: bool, key: &str, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(key, reason))
    }
}

impl ScenarioConfig {
    pub fn default_scenario() -> Self {
        Self::parse(DEFAULT_SCENARIO).expect("shipped scenario parses")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.trim().to_string(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.trim().to_string(),
                });
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate {
                    line: i + 1,
                    key: k.to_string(),
                });
            }
        }
        let missing: Vec<String> = REQUIRED
            .iter()
            .filter(|k| !map.contains_key(**k))
            .map(|k| k.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError::Missing(missing));
        }
        let mut e = Entries { map };

        let constellation = ConstellationConfig {
            orbits: e.get("constellation.orbits", None)?,
            sats_per_orbit: e.get("constellation.sats_per_orbit", None)?,
            altitude_km: e.get("constellation.altitude_km", None)?,
            inclination_deg: e.get("constellation.inclination_deg", None)?,
            raan_spacing_deg: e.get("constellation.raan_spacing_deg", Some(90.0))?,
            raan_offset_deg: e.get("constellation.raan_offset_deg", Some(0.0))?,
            phase_step_deg: e.get("constellation.phase_step_deg", Some(0.0))?,
        };
        let ground_station = GroundStation {
            latitude_deg: e.get("gs.latitude_deg", None)?,
            longitude_deg: e.get("gs.longitude_deg", None)?,
            min_elevation_deg: e.get("gs.min_elevation_deg", None)?,
        };
        let link = LinkConfig {
            power_dbm: e.get("link.power_dbm", Some(40.0))?,
            sat_gain_dbi: e.get("link.sat_gain_dbi", Some(6.98))?,
            gs_gain_dbi: e.get("link.gs_gain_dbi", Some(6.98))?,
            noise_temp_k: e.get("link.noise_temp_k", Some(354.81))?,
            bandwidth_hz: e.get("link.bandwidth_hz", Some(50e6))?,
            carrier_hz: e.get("link.carrier_hz", Some(2.5e9))?,
            isl_rate_bps: e.get("link.isl_rate_bps", Some(100e6))?,
        };
        let explicit = (e.take("group.p"), e.take("group.q"), e.take("group.g"));
        let bits = e.take("group.bits");
        let group = match (explicit, bits) {
            ((None, None, None), None) => GroupSpec::Generate { bits: 2048 },
            ((None, None, None), Some(b)) => GroupSpec::Generate {
                bits: b
                    .parse()
                    .map_err(|err: std::num::ParseIntError| invalid("group.bits", err.to_string()))?,
            },
            ((Some(p), Some(q), Some(g)), None) => GroupSpec::Explicit { p, q, g },
            ((Some(_), Some(_), Some(_)), Some(_)) => {
                return Err(invalid("group.bits", "cannot be combined with group.p/q/g"))
            }
            _ => {
                return Err(invalid(
                    "group.p",
                    "group.p, group.q and group.g must be given together",
                ))
            }
        };
        let quant = QuantConfig {
            scale: e.get("quant.scale", Some(QuantizationScheme::DEFAULT_SCALE))?,
            clip: e.get("quant.clip", Some(QuantizationScheme::DEFAULT_CLIP))?,
            offset: e.get("quant.offset", Some(QuantizationScheme::DEFAULT_OFFSET))?,
        };
        let training = TrainingConfig {
            trainer: TrainerConfig {
                task: e.get("trainer.task", Some(Task::SyntheticClassification))?,
                learning_rate: e.get("trainer.learning_rate", Some(0.1))?,
                batch_size: e.get("trainer.batch_size", Some(32))?,
                local_iterations: e.get("trainer.local_iterations", Some(25))?,
            },
            features: e.get("trainer.features", Some(8))?,
            samples_per_satellite: e.get("trainer.samples_per_satellite", Some(240))?,
            throughput: e.get("trainer.throughput", Some(100.0))?,
            direction: e.get("trainer.direction", Some(Direction::Clockwise))?,
        };
        let run = RunConfig {
            mode: e.get("run.mode", Some(Mode::FedSecure))?,
            max_rounds: e.get("run.max_rounds", Some(10))?,
            epsilon: e.get("run.epsilon", Some(1e-6))?,
            patience: e.get("run.patience", Some(3))?,
            horizon_s: e.get("run.horizon_s", Some(604_800.0))?,
            step_s: e.get("run.step_s", Some(10.0))?,
            dlog: e.get("run.dlog", Some(DlogAlgorithm::Bsgs))?,
            wall_clock_timing: e.get("trace.wall_clock_timing", Some(false))?,
        };
        let seeds = Seeds {
            crypto: e.get("seeds.crypto", Some(1))?,
            train: e.get("seeds.train", Some(2))?,
        };
        if let Some(key) = e.map.keys().next() {
            return Err(ConfigError::UnknownKey { key: key.clone() });
        }
        let cfg = Self {
            constellation,
            ground_station,
            link,
            group,
            quant,
            training,
            run,
            seeds,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.constellation;
        check(c.orbits >= 1, "constellation.orbits", "must be at least 1")?;
        check(
            c.sats_per_orbit >= 1,
            "constellation.sats_per_orbit",
            "must be at least 1",
        )?;
        check(
            c.altitude_km.is_finite() && c.altitude_km > 0.0,
            "constellation.altitude_km",
            "altitude must be positive",
        )?;
        check(
            (0.0..=180.0).contains(&c.inclination_deg),
            "constellation.inclination_deg",
            "must lie in [0, 180]",
        )?;
        check(
            c.raan_spacing_deg.is_finite(),
            "constellation.raan_spacing_deg",
            "must be finite",
        )?;
        check(
            c.raan_offset_deg.is_finite(),
            "constellation.raan_offset_deg",
            "must be finite",
        )?;
        check(
            c.phase_step_deg.is_finite(),
            "constellation.phase_step_deg",
            "must be finite",
        )?;

        let gs = &self.ground_station;
        check(
            (-90.0..=90.0).contains(&gs.latitude_deg),
            "gs.latitude_deg",
            "must lie in [-90, 90]",
        )?;
        check(
            (-360.0..=360.0).contains(&gs.longitude_deg),
            "gs.longitude_deg",
            "must lie in [-360, 360]",
        )?;
        check(
            (0.0..90.0).contains(&gs.min_elevation_deg),
            "gs.min_elevation_deg",
            "must lie in [0, 90)",
        )?;

        let l = &self.link;
        check(l.power_dbm.is_finite(), "link.power_dbm", "must be finite")?;
        check(l.sat_gain_dbi.is_finite(), "link.sat_gain_dbi", "must be finite")?;
        check(l.gs_gain_dbi.is_finite(), "link.gs_gain_dbi", "must be finite")?;
        for (key, v) in [
            ("link.noise_temp_k", l.noise_temp_k),
            ("link.bandwidth_hz", l.bandwidth_hz),
            ("link.carrier_hz", l.carrier_hz),
            ("link.isl_rate_bps", l.isl_rate_bps),
        ] {
            check(v.is_finite() && v > 0.0, key, "must be positive")?;
        }

        match &self.group {
            GroupSpec::Generate { bits } => check(*bits >= 16, "group.bits", "must be at least 16")?,
            GroupSpec::Explicit { p, q, g } => {
                for (key, v) in [("group.p", p), ("group.q", q), ("group.g", g)] {
                    check(
                        !v.is_empty() && v.bytes().all(|b| b.is_ascii_digit()),
                        key,
                        "must be a decimal integer",
                    )?;
                }
            }
        }

        self.scheme().map_err(|err| invalid("quant", err.to_string()))?;

        let t = &self.training;
        check(
            t.trainer.learning_rate.is_finite() && t.trainer.learning_rate > 0.0,
            "trainer.learning_rate",
            "must be positive",
        )?;
        check(t.trainer.batch_size >= 1, "trainer.batch_size", "must be at least 1")?;
        check(
            t.trainer.local_iterations >= 1,
            "trainer.local_iterations",
            "must be at least 1",
        )?;
        check(t.features >= 1, "trainer.features", "must be at least 1")?;
        check(
            t.samples_per_satellite >= 1,
            "trainer.samples_per_satellite",
            "must be at least 1",
        )?;
        check(
            t.throughput.is_finite() && t.throughput > 0.0,
            "trainer.throughput",
            "must be positive",
        )?;

        let r = &self.run;
        check(r.max_rounds >= 1, "run.max_rounds", "must be at least 1")?;
        check(
            r.epsilon.is_finite() && r.epsilon >= 0.0,
            "run.epsilon",
            "must be non-negative",
        )?;
        check(r.patience >= 1, "run.patience", "must be at least 1")?;
        check(
            r.horizon_s.is_finite() && r.horizon_s > 0.0,
            "run.horizon_s",
            "must be positive",
        )?;
        check(r.step_s.is_finite() && r.step_s > 0.0, "run.step_s", "must be positive")?;
        Ok(())
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let c = &self.constellation;
        kv("constellation.orbits", &c.orbits);
        kv("constellation.sats_per_orbit", &c.sats_per_orbit);
        kv("constellation.altitude_km", &c.altitude_km);
        kv("constellation.inclination_deg", &c.inclination_deg);
        kv("constellation.raan_spacing_deg", &c.raan_spacing_deg);
        kv("constellation.raan_offset_deg", &c.raan_offset_deg);
        kv("constellation.phase_step_deg", &c.phase_step_deg);
        let gs = &self.ground_station;
        kv("gs.latitude_deg", &gs.latitude_deg);
        kv("gs.longitude_deg", &gs.longitude_deg);
        kv("gs.min_elevation_deg", &gs.min_elevation_deg);
        let l = &self.link;
        kv("link.power_dbm", &l.power_dbm);
        kv("link.sat_gain_dbi", &l.sat_gain_dbi);
        kv("link.gs_gain_dbi", &l.gs_gain_dbi);
        kv("link.noise_temp_k", &l.noise_temp_k);
        kv("link.bandwidth_hz", &l.bandwidth_hz);
        kv("link.carrier_hz", &l.carrier_hz);
        kv("link.isl_rate_bps", &l.isl_rate_bps);
        match &self.group {
            GroupSpec::Generate { bits } => kv("group.bits", bits),
            GroupSpec::Explicit { p, q, g } => {
                kv("group.p", p);
                kv("group.q", q);
                kv("group.g", g);
            }
        }
        let q = &self.quant;
        kv("quant.scale", &q.scale);
        kv("quant.clip", &q.clip);
        kv("quant.offset", &q.offset);
        let t = &self.training;
        kv("trainer.task", &t.trainer.task);
        kv("trainer.learning_rate", &t.trainer.learning_rate);
        kv("trainer.batch_size", &t.trainer.batch_size);
        kv("trainer.local_iterations", &t.trainer.local_iterations);
        kv("trainer.features", &t.features);
        kv("trainer.samples_per_satellite", &t.samples_per_satellite);
        kv("trainer.throughput", &t.throughput);
        kv("trainer.direction", &t.direction);
        let r = &self.run;
        kv("run.mode", &r.mode);
        kv("run.max_rounds", &r.max_rounds);
        kv("run.epsilon", &r.epsilon);
        kv("run.patience", &r.patience);
        kv("run.horizon_s", &r.horizon_s);
        kv("run.step_s", &r.step_s);
        kv("run.dlog", &r.dlog);
        kv("seeds.crypto", &self.seeds.crypto);
        kv("seeds.train", &self.seeds.train);
        kv("trace.wall_clock_timing", &r.wall_clock_timing);
        s
    }

    pub fn constellation(&self) -> Constellation {
        let c = &self.constellation;
        Constellation::walker(
            c.orbits,
            c.sats_per_orbit,
            c.altitude_km,
            c.inclination_deg,
            c.raan_spacing_deg,
            c.phase_step_deg,
        )
        .with_raan_offset(c.raan_offset_deg)
    }

    pub fn link_params(&self) -> LinkParams {
        let l = &self.link;
        LinkParams {
            power_w: dbm_to_watts(l.power_dbm),
            sat_gain: db_to_linear(l.sat_gain_dbi),
            gs_gain: db_to_linear(l.gs_gain_dbi),
            noise_temp_k: l.noise_temp_k,
            bandwidth_hz: l.bandwidth_hz,
            carrier_hz: l.carrier_hz,
        }
    }

    /// One party per orbit.
    pub fn scheme(&self) -> Result<QuantizationScheme, crate::secure_agg::AggregationError> {
        QuantizationScheme::new(
            self.quant.scale,
            self.quant.offset,
            self.quant.clip,
            self.constellation.orbits,
        )
    }

    pub fn group_params(&self) -> Result<GroupParams, GroupError> {
        match &self.group {
            GroupSpec::Generate { bits } => GroupParams::generate(*bits, self.seeds.crypto),
            GroupSpec::Explicit { p, q, g } => {
                GroupParams::from_decimal(p, q, g).unwrap_or(Err(GroupError::CompositeModulus))
            }
        }
    }
}
