//! Downlink budget against slant range, and transfer times for a few payloads.

use fedsecure::orbit::{linear_to_db, link_budget, transmission_delay, LinkParams};

fn main() {
    let p = LinkParams::reference();
    println!("distance_km  fspl_db  snr_db  rate_mbps");
    for d in [1200.0, 1500.0, 2000.0, 2500.0, 3000.0, 3500.0] {
        let lb = link_budget(d, &p);
        println!(
            "{d:11.0}  {:7.2}  {:6.2}  {:9.3}",
            linear_to_db(lb.fspl),
            linear_to_db(lb.snr),
            lb.rate_bps / 1e6
        );
    }
    let rate = link_budget(1200.0, &p).rate_bps;
    for (label, bytes) in [
        ("9-parameter model", 72u64),
        ("one 2048-bit element", 256),
        ("497 MB", 497_000_000),
    ] {
        println!(
            "{label:>20}: {:.3} s at 1200 km",
            transmission_delay(bytes, rate, 1200.0)
        );
    }
}
