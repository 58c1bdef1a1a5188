//! First-round completion against the right ascension of the first plane,
//! for a given plane spacing (degrees, default 90).
//!
//! `cargo run --example epoch_sweep -- 20`

use fedsecure::config::{GroupSpec, ScenarioConfig};
use fedsecure::fl::{Mode, Simulation};

fn main() {
    let spacing: f64 = std::env::args()
        .nth(1)
        .map_or(90.0, |s| s.parse().expect("spacing in degrees"));
    let mut in_band = 0;
    let mut total = 0;
    println!("raan_offset  fedsecure_h  direct_sync_h");
    for offset in (0..360).step_by(10) {
        let first = |mode: Mode| {
            let mut cfg = ScenarioConfig::default_scenario();
            cfg.group = GroupSpec::Generate { bits: 64 };
            cfg.constellation.raan_spacing_deg = spacing;
            cfg.constellation.raan_offset_deg = offset as f64;
            cfg.run.mode = mode;
            Simulation::new(cfg).unwrap().step().unwrap().end_s / 3600.0
        };
        let (fed, direct) = (first(Mode::FedSecure), first(Mode::DirectSync));
        total += 1;
        if (0.3..=5.0).contains(&fed) {
            in_band += 1;
        }
        println!("{offset:11}  {fed:11.2}  {direct:13.2}");
    }
    println!("first round within 0.3-5 h for {in_band} of {total} offsets");
}
