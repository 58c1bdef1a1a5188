//! Circular-orbit constellation geometry, ground-station visibility and the
//! satellite-to-ground link model.
//!
//! Positions are in an Earth-centered inertial frame, in kilometres. The
//! ground station sits on a spherical Earth rotating at the sidereal rate,
//! with its meridian aligned to the x axis at `t = 0`.

use std::f64::consts::PI;
use std::io::{self, Write};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const EARTH_GM_KM3_S2: f64 = 398_600.441_8;
pub const SIDEREAL_DAY_S: f64 = 86_164.1;
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
pub const SPEED_OF_LIGHT_KM_S: f64 = SPEED_OF_LIGHT_M_S / 1000.0;
pub const BOLTZMANN_J_K: f64 = 1.380_649e-23;

/// Bisection stops once a boundary is bracketed this tightly, in seconds.
const BOUNDARY_RESOLUTION_S: f64 = 0.1;

pub type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn distance_km(a: &Vec3, b: &Vec3) -> f64 {
    norm(&sub(a, b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub raan_deg: f64,
    pub phase_offset_deg: f64,
    pub satellite_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub orbits: Vec<Orbit>,
    pub altitude_km: f64,
    pub inclination_deg: f64,
}

/// Flat satellite index: orbits in order, slots in order within an orbit.
pub type SatelliteId = usize;

impl Constellation {
    /// Walker-style layout: `orbit_count` planes spaced `raan_spacing_deg`
    /// apart, plane `l` phased by `l * phase_step_deg`.
    pub fn walker(
        orbit_count: usize,
        sats_per_orbit: usize,
        altitude_km: f64,
        inclination_deg: f64,
        raan_spacing_deg: f64,
        phase_step_deg: f64,
    ) -> Self {
        let orbits = (0..orbit_count)
            .map(|l| Orbit {
                raan_deg: l as f64 * raan_spacing_deg,
                phase_offset_deg: l as f64 * phase_step_deg,
                satellite_count: sats_per_orbit,
            })
            .collect();
        Self {
            orbits,
            altitude_km,
            inclination_deg,
        }
    }

    /// Rotates every plane by `deg` of right ascension. Together with the
    /// ground station longitude this fixes the geometry at `t = 0`.
    pub fn with_raan_offset(mut self, deg: f64) -> Self {
        for o in &mut self.orbits {
            o.raan_deg += deg;
        }
        self
    }

    pub fn semi_major_axis_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    /// Mean motion in rad/s.
    pub fn mean_motion(&self) -> f64 {
        (EARTH_GM_KM3_S2 / self.semi_major_axis_km().powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }

    pub fn satellite_count(&self) -> usize {
        self.orbits.iter().map(|o| o.satellite_count).sum()
    }

    /// Ids of the satellites on orbit `orbit`, in slot order.
    pub fn orbit_members(&self, orbit: usize) -> Vec<SatelliteId> {
        let start: usize = self.orbits[..orbit].iter().map(|o| o.satellite_count).sum();
        (start..start + self.orbits[orbit].satellite_count).collect()
    }

    /// `(orbit, slot)` of a flat id.
    pub fn locate(&self, id: SatelliteId) -> (usize, usize) {
        let mut rest = id;
        for (l, o) in self.orbits.iter().enumerate() {
            if rest < o.satellite_count {
                return (l, rest);
            }
            rest -= o.satellite_count;
        }
        panic!("satellite id {id} out of range");
    }

    /// Distance between neighbouring satellites on an orbit with `k` members.
    pub fn neighbour_distance_km(&self, k: usize) -> f64 {
        if k <= 1 {
            0.0
        } else {
            2.0 * self.semi_major_axis_km() * (PI / k as f64).sin()
        }
    }

    pub fn position(&self, id: SatelliteId, t: f64) -> Vec3 {
        let (l, slot) = self.locate(id);
        let orbit = &self.orbits[l];
        let a = self.semi_major_axis_km();
        let u = (orbit.phase_offset_deg + 360.0 * slot as f64 / orbit.satellite_count as f64).to_radians()
            + self.mean_motion() * t;
        let (su, cu) = u.sin_cos();
        let (so, co) = orbit.raan_deg.to_radians().sin_cos();
        let (si, ci) = self.inclination_deg.to_radians().sin_cos();
        [
            a * (co * cu - so * ci * su),
            a * (so * cu + co * ci * su),
            a * (si * su),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteState {
    pub id: SatelliteId,
    pub orbit: usize,
    pub slot: usize,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStation {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub min_elevation_deg: f64,
}

impl GroundStation {
    /// Rolla, Missouri.
    pub fn rolla() -> Self {
        Self {
            latitude_deg: 37.9514,
            longitude_deg: -91.7713,
            min_elevation_deg: 10.0,
        }
    }

    pub fn position(&self, t: f64) -> Vec3 {
        let lat = self.latitude_deg.to_radians();
        let lon = self.longitude_deg.to_radians() + 2.0 * PI * t / SIDEREAL_DAY_S;
        let (sl, cl) = lat.sin_cos();
        [
            EARTH_RADIUS_KM * cl * lon.cos(),
            EARTH_RADIUS_KM * cl * lon.sin(),
            EARTH_RADIUS_KM * sl,
        ]
    }
}

/// Positions of every satellite and of the ground station at time `t`.
pub fn propagate(constellation: &Constellation, gs: &GroundStation, t: f64) -> (Vec<SatelliteState>, Vec3) {
    let sats = (0..constellation.satellite_count())
        .map(|id| {
            let (orbit, slot) = constellation.locate(id);
            SatelliteState {
                id,
                orbit,
                slot,
                position: constellation.position(id, t),
            }
        })
        .collect();
    (sats, gs.position(t))
}

/// Angle between the station's zenith `r_s` and the line of sight `r_i - r_s`, in degrees.
pub fn zenith_angle_deg(r_i: &Vec3, r_s: &Vec3) -> f64 {
    let los = sub(r_i, r_s);
    let c = (dot(r_s, &los) / (norm(r_s) * norm(&los))).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Line-of-sight predicate: zenith angle at most `90 - min_elevation` degrees.
pub fn is_visible(r_i: &Vec3, r_s: &Vec3, min_elevation_deg: f64) -> bool {
    zenith_angle_deg(r_i, r_s) <= 90.0 - min_elevation_deg
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub power_w: f64,
    pub sat_gain: f64,
    pub gs_gain: f64,
    pub noise_temp_k: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl LinkParams {
    /// 40 dBm, 6.98 dBi on both ends, 354.81 K, 50 MHz at 2.5 GHz.
    pub fn reference() -> Self {
        Self {
            power_w: dbm_to_watts(40.0),
            sat_gain: db_to_linear(6.98),
            gs_gain: db_to_linear(6.98),
            noise_temp_k: 354.81,
            bandwidth_hz: 50e6,
            carrier_hz: 2.5e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Free-space path loss, linear.
    pub fspl: f64,
    /// Signal-to-noise ratio, linear.
    pub snr: f64,
    /// Shannon capacity in bit/s.
    pub rate_bps: f64,
}

pub fn link_budget(distance_km: f64, params: &LinkParams) -> LinkBudget {
    let d_m = distance_km * 1000.0;
    let fspl = (4.0 * PI * d_m * params.carrier_hz / SPEED_OF_LIGHT_M_S).powi(2);
    let snr = params.power_w * params.sat_gain * params.gs_gain
        / (BOLTZMANN_J_K * params.noise_temp_k * params.bandwidth_hz * fspl);
    LinkBudget {
        fspl,
        snr,
        rate_bps: params.bandwidth_hz * (1.0 + snr).log2(),
    }
}

/// Serialization plus propagation delay, in seconds.
pub fn transmission_delay(bytes: u64, rate_bps: f64, distance_km: f64) -> f64 {
    8.0 * bytes as f64 / rate_bps + distance_km / SPEED_OF_LIGHT_KM_S
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityWindow {
    pub satellite: SatelliteId,
    pub start: f64,
    pub end: f64,
}

impl VisibilityWindow {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

fn visible_at(constellation: &Constellation, gs: &GroundStation, id: SatelliteId, t: f64) -> bool {
    is_visible(&constellation.position(id, t), &gs.position(t), gs.min_elevation_deg)
}

/// Bisects `[lo, hi]` where visibility differs at the ends; returns the end
/// on the visible side once the bracket is below the resolution.
fn refine(constellation: &Constellation, gs: &GroundStation, id: SatelliteId, mut lo: f64, mut hi: f64) -> f64 {
    let lo_visible = visible_at(constellation, gs, id, lo);
    while hi - lo > BOUNDARY_RESOLUTION_S {
        let mid = 0.5 * (lo + hi);
        if visible_at(constellation, gs, id, mid) == lo_visible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo_visible {
        lo
    } else {
        hi
    }
}

/// Windows over `[0, horizon_s]`, sorted by satellite then start time.
///
/// The predicate is sampled every `step_s` seconds and each crossing is
/// refined by bisection. Windows open at `0` or still open at the horizon
/// are cut there.
pub fn visibility_windows(
    constellation: &Constellation,
    gs: &GroundStation,
    horizon_s: f64,
    step_s: f64,
) -> Vec<VisibilityWindow> {
    assert!(step_s > 0.0, "sampling step must be positive");
    let mut out = Vec::new();
    for id in 0..constellation.satellite_count() {
        let mut prev_t = 0.0;
        let mut prev = visible_at(constellation, gs, id, 0.0);
        let mut open = prev.then_some(0.0);
        let mut t = 0.0;
        while t < horizon_s {
            t = (t + step_s).min(horizon_s);
            let now = visible_at(constellation, gs, id, t);
            if now != prev {
                let edge = refine(constellation, gs, id, prev_t, t);
                if now {
                    open = Some(edge);
                } else if let Some(start) = open.take() {
                    if edge > start {
                        out.push(VisibilityWindow {
                            satellite: id,
                            start,
                            end: edge,
                        });
                    }
                }
            }
            prev = now;
            prev_t = t;
        }
        if let Some(start) = open {
            if horizon_s > start {
                out.push(VisibilityWindow {
                    satellite: id,
                    start,
                    end: horizon_s,
                });
            }
        }
    }
    out
}

pub fn write_windows_csv<W: Write>(windows: &[VisibilityWindow], mut w: W) -> io::Result<()> {
    writeln!(w, "satellite_id,start_s,end_s")?;
    for win in windows {
        writeln!(w, "{},{:.1},{:.1}", win.satellite, win.start, win.end)?;
    }
    Ok(())
}

/// Per-satellite window lookup.
#[derive(Debug, Clone, Default)]
pub struct VisibilitySchedule {
    windows: Vec<Vec<VisibilityWindow>>,
    horizon_s: f64,
}

impl VisibilitySchedule {
    pub fn new(satellites: usize, windows: Vec<VisibilityWindow>, horizon_s: f64) -> Self {
        let mut per_sat = vec![Vec::new(); satellites];
        for w in windows {
            per_sat[w.satellite].push(w);
        }
        for ws in &mut per_sat {
            ws.sort_by(|a, b| a.start.total_cmp(&b.start));
        }
        Self {
            windows: per_sat,
            horizon_s,
        }
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_s
    }

    pub fn windows_of(&self, sat: SatelliteId) -> &[VisibilityWindow] {
        &self.windows[sat]
    }

    pub fn all(&self) -> impl Iterator<Item = &VisibilityWindow> {
        self.windows.iter().flatten()
    }

    /// Earliest time `>= t` at which `sat` is inside a window.
    pub fn next_visible(&self, sat: SatelliteId, t: f64) -> Option<f64> {
        self.windows[sat].iter().find(|w| w.end >= t).map(|w| w.start.max(t))
    }

    /// Window containing `t`, if any.
    pub fn window_at(&self, sat: SatelliteId, t: f64) -> Option<&VisibilityWindow> {
        self.windows[sat].iter().find(|w| w.contains(t))
    }

    /// Longest interval without visibility for `sat` inside the horizon.
    pub fn longest_gap(&self, sat: SatelliteId) -> f64 {
        let mut last_end = 0.0;
        let mut gap: f64 = 0.0;
        for w in &self.windows[sat] {
            gap = gap.max(w.start - last_end);
            last_end = w.end;
        }
        gap.max(self.horizon_s - last_end)
    }
}
