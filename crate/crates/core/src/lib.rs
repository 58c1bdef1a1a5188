//! Secure federated learning for LEO constellations.
//!
//! Satellites on the same orbit aggregate their models over inter-satellite
//! links and the first one to see the ground station uploads an encrypted
//! orbit partial. The ground station only learns the sum over orbits,
//! thanks to keys derived from an anonymous veto network.
//!
//! The building blocks are usable on their own:
//!
//! * [`group`] and [`dlog`]: prime-order group arithmetic and bounded discrete logs.
//! * [`avnet`]: the key setup that yields per-orbit secrets and the aggregation key.
//! * [`secure_agg`]: quantization, encryption and sum recovery.
//! * [`orbit`]: circular Walker constellations, visibility windows and link budgets.
//! * [`fl`]: local training, the on-orbit forwarding pass and round orchestration.
//! * [`metrics`]: segmentation metrics and communication overhead.
//! * [`config`] and [`cli`]: scenario files and the command line front end.

pub mod avnet;
pub mod cli;
pub mod config;
pub mod dlog;
pub mod fl;
pub mod group;
pub mod metrics;
pub mod model;
pub mod orbit;
pub mod secure_agg;
pub mod seed;

pub use avnet::{AggregationKey, AvnetError, KeySetup, PartySecret, Round1Board, SubsetKey};
pub use config::{ConfigError, ScenarioConfig};
pub use dlog::{discrete_log, DlogAlgorithm, DlogError};
pub use fl::{Mode, RoundTrace, SimError, Simulation};
pub use group::{GroupElement, GroupError, GroupParams, Scalar};
pub use metrics::{MetricsError, OverheadReport};
pub use model::ModelVector;
pub use orbit::{Constellation, GroundStation, LinkParams, VisibilitySchedule, VisibilityWindow};
pub use secure_agg::{AggregationError, CipherVector, QuantizationScheme, QuantizedVector};

/// Any error the crate can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Dlog(#[from] DlogError),
    #[error(transparent)]
    Avnet(#[from] AvnetError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
