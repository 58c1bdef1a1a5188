//! Visibility windows of the default constellation over one day.

use fedsecure::config::ScenarioConfig;
use fedsecure::orbit::{visibility_windows, write_windows_csv, VisibilitySchedule};

fn main() {
    let cfg = ScenarioConfig::default_scenario();
    let c = cfg.constellation();
    let day = 86_400.0;
    let windows = visibility_windows(&c, &cfg.ground_station, day, 10.0);
    let schedule = VisibilitySchedule::new(c.satellite_count(), windows.clone(), day);

    println!(
        "period {:.1} min, {} windows in 24 h",
        c.period_s() / 60.0,
        windows.len()
    );
    for sat in 0..c.satellite_count() {
        let ws = schedule.windows_of(sat);
        let longest = ws.iter().map(|w| w.duration()).fold(0.0, f64::max);
        println!(
            "sat {sat:2} (orbit {}): {:2} windows, longest {:5.1} min, longest gap {:5.2} h",
            c.locate(sat).0,
            ws.len(),
            longest / 60.0,
            schedule.longest_gap(sat) / 3600.0
        );
    }
    let mut first = windows.clone();
    first.sort_by(|a, b| a.start.total_cmp(&b.start));
    println!();
    write_windows_csv(&first[..5.min(first.len())], std::io::stdout()).unwrap();
}
