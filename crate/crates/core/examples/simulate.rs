//! Five rounds of the default scenario in each mode.

use fedsecure::config::ScenarioConfig;
use fedsecure::fl::{Mode, Simulation};

fn main() {
    let base = ScenarioConfig::default_scenario();
    let group = base.group_params().unwrap();
    for mode in [Mode::FedSecure, Mode::PlaintextDebug, Mode::DirectSync] {
        let mut cfg = base.clone();
        cfg.run.mode = mode;
        cfg.run.max_rounds = 5;
        let mut sim = Simulation::with_group(cfg, group.clone()).unwrap();
        let report = sim.run().unwrap();
        println!("{mode}:");
        for t in &report.traces {
            println!(
                "  round {}: done at {:6.2} h, loss {:.6}, uplink {} B, reporters {:?}",
                t.round,
                t.end_s / 3600.0,
                t.train_loss,
                t.uplink_bytes,
                t.reporters
            );
        }
    }
}
