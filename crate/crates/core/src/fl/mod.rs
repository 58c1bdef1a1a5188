//! Federated learning over the constellation.

pub mod engine;
pub mod orbit_pass;
pub mod trace;
pub mod trainer;

pub use engine::{converged, Mode, RunReport, SimError, Simulation, StopReason};
pub use orbit_pass::{
    partial_aggregate, Direction, OrbitPass, OrbitPassOutcome, OrbitPassState, PassError, PassPhase, TrainedModel,
    Visibility,
};
pub use trace::{write_rounds_csv, Event, EventKind, EventLog, RoundTrace, ROUNDS_CSV_HEADER};
pub use trainer::{local_train, Objective, Shard, SyntheticTask, Task, TrainError, TrainerConfig};
