//! The on-orbit pass on a scripted eight-satellite ring: the initiator is
//! visible only briefly and a later satellite reports the partial model.

use fedsecure::fl::{Direction, EventLog, OrbitPass, TrainedModel};
use fedsecure::model::ModelVector;
use fedsecure::orbit::{VisibilitySchedule, VisibilityWindow};

fn main() {
    let windows = vec![
        VisibilityWindow {
            satellite: 0,
            start: 0.0,
            end: 30.0,
        },
        VisibilityWindow {
            satellite: 6,
            start: 400.0,
            end: 900.0,
        },
    ];
    let schedule = VisibilitySchedule::new(8, windows, 3600.0);
    let members: Vec<usize> = (0..8).collect();
    let pass = OrbitPass {
        orbit: 0,
        members: &members,
        holder: 0,
        receipt_t: 5.0,
        receipt_event: None,
        direction: Direction::Clockwise,
        hop_delay_s: 0.4,
        visibility: &schedule,
    };
    let mut log = EventLog::default();
    let out = pass
        .run(&ModelVector::zeros(2), &mut log, |sat, _| {
            Ok(TrainedModel {
                model: vec![sat as f64, -(sat as f64)].into(),
                loss: 0.0,
                data_size: 100 + 10 * sat,
                compute_s: 60.0,
            })
        })
        .unwrap();

    for e in log.events() {
        println!("{:8.1} s  {:?}", e.t, e.kind);
    }
    println!(
        "partial {:?} over {} samples, reported by satellite {} at {:.1} s",
        out.partial.values(),
        out.data_size,
        out.reporter,
        out.report_ready_t
    );
}
