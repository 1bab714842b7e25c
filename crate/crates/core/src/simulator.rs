//! Ground-truth world simulation: waypoint driving under the noisy velocity
//! model and gated, noisy range-bearing sensing.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlamError};
use crate::models::{measure, motion_mean, sample_control, MotionNoiseParams, SensorNoiseParams};
use crate::types::{wrap_angle, ControlInput, LandmarkTruth, Pose2D, RangeBearing};

/// Waypoint is considered reached inside this radius (m).
pub const WAYPOINT_RADIUS: f64 = 0.3;
/// Rotational command limit of the waypoint controller (rad/s).
pub const MAX_TURN_RATE: f64 = FRAC_PI_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub landmarks: Vec<LandmarkTruth>,
    pub waypoints: Vec<(f64, f64)>,
    pub initial_pose: Pose2D,
    pub dt: f64,
    pub motion_noise: MotionNoiseParams,
    pub sensor_noise: SensorNoiseParams,
    pub max_range: f64,
    pub fov: f64,
    pub speed: f64,
    pub turn_gain: f64,
    pub seed: u64,
}

pub const PRESETS: [&str; 3] = ["sim100", "circle2m", "corridor"];

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.landmarks.is_empty() {
            return Err(SlamError::invalid(
                "landmarks",
                "scenario needs at least one landmark",
            ));
        }
        let mut ids: Vec<_> = self.landmarks.iter().map(|l| l.id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SlamError::invalid(
                "landmarks",
                "landmark ids must be unique",
            ));
        }
        if self.waypoints.is_empty() {
            return Err(SlamError::invalid(
                "waypoints",
                "scenario needs at least one waypoint",
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SlamError::invalid("sim.dt", "must be finite and > 0"));
        }
        if !(self.max_range > 0.0) {
            return Err(SlamError::invalid("sim.max_range", "must be > 0"));
        }
        if !(self.fov > 0.0 && self.fov <= 2.0 * PI) {
            return Err(SlamError::invalid("sim.fov", "must lie in (0, 2π]"));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(SlamError::invalid("sim.speed", "must be finite and > 0"));
        }
        if !(self.turn_gain > 0.0 && self.turn_gain.is_finite()) {
            return Err(SlamError::invalid(
                "sim.turn_gain",
                "must be finite and > 0",
            ));
        }
        self.motion_noise.validate()?;
        // Injected sensor noise may be switched off entirely.
        let n = &self.sensor_noise;
        if !(n.sigma_r >= 0.0
            && n.sigma_r.is_finite()
            && n.sigma_phi >= 0.0
            && n.sigma_phi.is_finite())
        {
            return Err(SlamError::invalid(
                "sim.sensor",
                "noise standard deviations must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Switches off injected motion and sensor noise.
    pub fn noise_free(mut self) -> Self {
        self.motion_noise = MotionNoiseParams::zero();
        self.sensor_noise = SensorNoiseParams {
            sigma_r: 0.0,
            sigma_phi: 0.0,
        };
        self
    }

    /// `(min_x, min_y, max_x, max_y)` over landmarks and waypoints.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let xs = self
            .landmarks
            .iter()
            .map(|l| (l.x, l.y))
            .chain(self.waypoints.iter().copied())
            .chain(std::iter::once((self.initial_pose.x, self.initial_pose.y)));
        xs.fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), (x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
        )
    }

    /// Builds a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "sim100" => Ok(sim100()),
            "circle2m" => Ok(circle2m()),
            "corridor" => Ok(corridor()),
            other => Err(SlamError::invalid(
                "scenario",
                format!(
                    "unknown scenario `{other}` (expected one of {})",
                    PRESETS.join(", ")
                ),
            )),
        }
    }
}

// Van der Corput radical inverse; with bases 2 and 3 gives a Halton layout.
fn radical_inverse(mut i: u32, base: u32) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= f64::from(base);
        r += f * f64::from(i % base);
        i /= base;
    }
    r
}

fn distance_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

/// 100 m × 100 m outdoor field with a ~156 m rectangular loop.
fn sim100() -> Scenario {
    let speed = 2.0;
    let (hx, hy) = (23.5, 14.5);
    let corners = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy), (-hx, -hy)];
    let route: Vec<(f64, f64)> = corners.to_vec();
    let mut landmarks = Vec::new();
    let mut i = 1;
    while landmarks.len() < 12 {
        let p = (
            -49.0 + 98.0 * radical_inverse(i, 2),
            -49.0 + 98.0 * radical_inverse(i, 3),
        );
        i += 1;
        let clearance = route
            .windows(2)
            .map(|w| distance_to_segment(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min);
        if clearance >= 3.0 {
            landmarks.push(LandmarkTruth::new(landmarks.len() as u32, p.0, p.1));
        }
    }
    // Boundary markers fix the extent of the field; they lie out of sensor
    // range of the whole route.
    for (x, y) in [(-48.0, -48.0), (48.0, -48.0), (48.0, 48.0), (-48.0, 48.0)] {
        landmarks.push(LandmarkTruth::new(landmarks.len() as u32, x, y));
    }
    Scenario {
        name: "sim100".into(),
        landmarks,
        waypoints: route[1..].to_vec(),
        initial_pose: Pose2D::new(-hx, -hy, 0.0),
        dt: 0.25,
        motion_noise: MotionNoiseParams::constant_at_speed(0.02, 0.2f64.to_radians(), speed)
            .expect("valid preset"),
        sensor_noise: SensorNoiseParams::new(0.3, 3f64.to_radians()).expect("valid preset"),
        max_range: 30.0,
        fov: 2.0 * PI,
        speed,
        turn_gain: 1.0,
        seed: 1,
    }
}

/// Small arena circled twice at π/36 m/s, 18 identified landmarks.
fn circle2m() -> Scenario {
    let speed = PI / 36.0;
    let landmarks = (0..18)
        .map(|k| {
            let a = (20.0 * k as f64 + 10.0).to_radians();
            LandmarkTruth::new(k, 1.45 * a.cos(), 1.45 * a.sin())
        })
        .collect();
    let waypoints = (1..=36)
        .map(|k| {
            let a = (20.0 * k as f64).to_radians();
            (a.cos(), a.sin())
        })
        .collect();
    Scenario {
        name: "circle2m".into(),
        landmarks,
        waypoints,
        initial_pose: Pose2D::new(1.0, 0.0, FRAC_PI_2),
        dt: 2.0,
        motion_noise: MotionNoiseParams::constant_at_speed(0.005, 0.5f64.to_radians(), speed)
            .expect("valid preset"),
        sensor_noise: SensorNoiseParams::new(0.03, 2f64.to_radians()).expect("valid preset"),
        max_range: 3.0,
        fov: FRAC_PI_2,
        speed,
        turn_gain: 0.4,
        seed: 1,
    }
}

/// Corridor loop around a 26.7 m × 48 m building; landmarks are doors on
/// both walls.
fn corridor() -> Scenario {
    let (w, h) = (26.7, 48.0);
    let inset = 1.0;
    let speed = 0.2;
    let corners: [(f64, f64); 5] = [
        (inset, inset),
        (w - inset, inset),
        (w - inset, h - inset),
        (inset, h - inset),
        (inset, inset),
    ];
    let mut landmarks = Vec::new();
    for edge in corners.windows(2) {
        let (a, b) = (edge[0], edge[1]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let (tx, ty) = ((b.0 - a.0) / len, (b.1 - a.1) / len);
        // Left normal points into the building for a counter-clockwise loop.
        let (nx, ny) = (-ty, tx);
        let doors = (len / 1.5).floor() as usize;
        for k in 0..doors {
            let s = 0.75 + 1.5 * k as f64;
            for side in [1.0, -1.0] {
                let id = landmarks.len() as u32;
                landmarks.push(LandmarkTruth::new(
                    id,
                    a.0 + tx * s + side * nx * inset,
                    a.1 + ty * s + side * ny * inset,
                ));
            }
        }
    }
    // Outer corners pin the building footprint.
    for (x, y) in [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)] {
        let id = landmarks.len() as u32;
        landmarks.push(LandmarkTruth::new(id, x, y));
    }
    Scenario {
        name: "corridor".into(),
        landmarks,
        waypoints: corners[1..].to_vec(),
        initial_pose: Pose2D::new(inset, inset, 0.0),
        dt: 2.0,
        motion_noise: MotionNoiseParams::constant_at_speed(0.01, 0.5f64.to_radians(), speed)
            .expect("valid preset"),
        sensor_noise: SensorNoiseParams::new(0.02, 0.5f64.to_radians()).expect("valid preset"),
        max_range: 3.0,
        fov: FRAC_PI_2,
        speed,
        turn_gain: 0.4,
        seed: 1,
    }
}

/// One simulated time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStep {
    pub step: u64,
    pub t: f64,
    /// Pose after executing `applied`.
    pub true_pose: Pose2D,
    /// Command issued by the controller (what the filter sees as odometry).
    pub control: ControlInput,
    /// Velocities actually executed.
    pub applied: ControlInput,
    pub observations: Vec<RangeBearing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub initial_pose: Pose2D,
    pub dt: f64,
    pub steps: Vec<SimStep>,
}

impl SimLog {
    /// Distance implied by the issued forward speed.
    pub fn path_length(&self) -> f64 {
        self.steps.iter().map(|s| s.control.v.abs() * self.dt).sum()
    }

    /// JSON-lines: a header object then one object per step.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            initial_pose: &'a Pose2D,
            dt: f64,
        }
        serde_json::to_writer(
            &mut w,
            &Header {
                initial_pose: &self.initial_pose,
                dt: self.dt,
            },
        )?;
        writeln!(w)?;
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            initial_pose: Pose2D,
            dt: f64,
        }
        let mut lines = r.lines();
        let header: Header = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(SlamError::Mismatch("empty simulation log".into())),
        };
        let steps = lines
            .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
            .map(|l| Ok(serde_json::from_str(&l?)?))
            .collect::<Result<Vec<SimStep>>>()?;
        Ok(Self {
            initial_pose: header.initial_pose,
            dt: header.dt,
            steps,
        })
    }
}

/// Noisy, gated observations of every landmark in range and field of view,
/// ascending by id.
pub fn sense<R: Rng + ?Sized>(
    pose: &Pose2D,
    scenario: &Scenario,
    rng: &mut R,
) -> Vec<RangeBearing> {
    let mut landmarks: Vec<&LandmarkTruth> = scenario.landmarks.iter().collect();
    landmarks.sort_by_key(|l| l.id);
    let half_fov = 0.5 * scenario.fov;
    let noise = &scenario.sensor_noise;
    landmarks
        .into_iter()
        .filter_map(|lm| {
            let z = measure(pose, lm).ok()?;
            if z.r > scenario.max_range || z.phi.abs() > half_fov {
                return None;
            }
            let er: f64 = rng.sample(StandardNormal);
            let ep: f64 = rng.sample(StandardNormal);
            Some(RangeBearing::new(
                lm.id,
                z.r + noise.sigma_r * er,
                z.phi + noise.sigma_phi * ep,
            ))
        })
        .collect()
}

/// Waypoint-following controller command for the current pose.
pub fn controller(pose: &Pose2D, target: (f64, f64), scenario: &Scenario) -> ControlInput {
    let bearing = (target.1 - pose.y).atan2(target.0 - pose.x);
    let w = (scenario.turn_gain * wrap_angle(bearing - pose.theta))
        .clamp(-MAX_TURN_RATE, MAX_TURN_RATE);
    ControlInput::new(scenario.speed, w)
}

/// Drives the waypoint course to completion, logging truth, controls and
/// observations at every step.
pub fn drive<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<SimLog> {
    scenario.validate()?;
    let dist = |p: &Pose2D, w: (f64, f64)| ((w.0 - p.x).powi(2) + (w.1 - p.y).powi(2)).sqrt();
    let mut pose = scenario.initial_pose;
    let mut steps = Vec::new();
    let mut target = 0;
    let mut on_target = 0u64;
    let mut budget = step_budget(dist(&pose, scenario.waypoints[0]), scenario);
    while target < scenario.waypoints.len() {
        let wp = scenario.waypoints[target];
        if dist(&pose, wp) <= WAYPOINT_RADIUS {
            target += 1;
            on_target = 0;
            if let Some(next) = scenario.waypoints.get(target) {
                budget = step_budget(dist(&pose, *next), scenario);
            }
            continue;
        }
        if on_target >= budget {
            return Err(SlamError::Simulation(format!(
                "waypoint {target} at ({:.3}, {:.3}) not reached after {on_target} steps; robot at ({:.3}, {:.3})",
                wp.0, wp.1, pose.x, pose.y
            )));
        }
        let control = controller(&pose, wp, scenario);
        let applied = sample_control(&control, &scenario.motion_noise, rng);
        pose = motion_mean(&pose, &applied, scenario.dt);
        let observations = sense(&pose, scenario, rng);
        let step = steps.len() as u64 + 1;
        steps.push(SimStep {
            step,
            t: step as f64 * scenario.dt,
            true_pose: pose,
            control,
            applied,
            observations,
        });
        on_target += 1;
    }
    Ok(SimLog {
        initial_pose: scenario.initial_pose,
        dt: scenario.dt,
        steps,
    })
}

fn step_budget(distance: f64, scenario: &Scenario) -> u64 {
    let expected = (distance / (scenario.speed * scenario.dt)).ceil().max(1.0);
    (10.0 * expected) as u64 + 10
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::MotionNoiseParams;
    use crate::rng;

    fn quiet(mut s: Scenario) -> Scenario {
        s.motion_noise = MotionNoiseParams::zero();
        s
    }

    #[test]
    fn presets_have_stated_geometry() {
        let s = Scenario::preset("sim100").unwrap();
        let (x0, y0, x1, y1) = s.bounds();
        assert!(x1 - x0 <= 100.0 && y1 - y0 <= 100.0);
        assert!(x1 - x0 >= 90.0 && y1 - y0 >= 90.0);

        let c = Scenario::preset("circle2m").unwrap();
        assert_eq!(c.landmarks.len(), 18);
        for w in &c.waypoints {
            assert!(((w.0 * w.0 + w.1 * w.1).sqrt() - 1.0).abs() < 1e-12);
        }
        assert!((c.speed - PI / 36.0).abs() < 1e-15);
        assert_eq!(c.dt, 2.0);

        let k = Scenario::preset("corridor").unwrap();
        let (x0, y0, x1, y1) = k.bounds();
        assert!((x1 - x0 - 26.7).abs() < 1e-9 && (y1 - y0 - 48.0).abs() < 1e-9);

        assert!(matches!(
            Scenario::preset("mars"),
            Err(SlamError::InvalidParameter { ref key, .. }) if key == "scenario"
        ));
    }

    #[test]
    fn sim100_path_length_near_156m() {
        let s = Scenario::preset("sim100").unwrap();
        for seed in 1..=10 {
            let log = drive(&s, &mut rng::stream(seed, 0, 0)).unwrap();
            let len = log.path_length();
            assert!(
                len >= 150.0 && (len - 156.0).abs() <= 0.05 * 156.0,
                "seed {seed}: {len}"
            );
            assert!((log.steps.len() as f64 * s.dt * s.speed - len).abs() < 1e-9);
        }
    }

    #[test]
    fn every_preset_completes() {
        for name in PRESETS {
            let s = Scenario::preset(name).unwrap();
            for seed in 1..=8 {
                let log = drive(&s, &mut rng::stream(seed, 0, 0)).unwrap();
                assert!(!log.steps.is_empty(), "{name}");
                assert!(
                    log.steps.iter().any(|st| !st.observations.is_empty()),
                    "{name}"
                );
            }
        }
    }

    #[test]
    fn straight_course_reaches_final_waypoint() {
        let mut s = quiet(Scenario::preset("sim100").unwrap());
        s.initial_pose = Pose2D::new(0.0, 0.0, 0.0);
        s.waypoints = vec![(10.0, 0.0), (20.0, 0.0)];
        let log = drive(&s, &mut rng::stream(1, 0, 0)).unwrap();
        let last = log.steps.last().unwrap().true_pose;
        assert!(((last.x - 20.0).powi(2) + last.y.powi(2)).sqrt() <= WAYPOINT_RADIUS);
    }

    #[test]
    fn unreachable_waypoint_aborts() {
        let mut s = quiet(Scenario::preset("sim100").unwrap());
        s.initial_pose = Pose2D::new(0.0, 0.0, 0.0);
        // Turning circle radius is speed / MAX_TURN_RATE ≈ 2.5 m: a target
        // 0.5 m to the side can never be entered.
        s.waypoints = vec![(0.0, 0.5)];
        s.speed = 2.0;
        assert!(matches!(
            drive(&s, &mut rng::stream(1, 0, 0)),
            Err(SlamError::Simulation(_))
        ));
    }

    #[test]
    fn drive_is_seed_deterministic() {
        let s = Scenario::preset("circle2m").unwrap();
        let a = drive(&s, &mut rng::stream(5, 0, 0)).unwrap();
        let b = drive(&s, &mut rng::stream(5, 0, 0)).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_jsonl(&mut ba).unwrap();
        b.write_jsonl(&mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_eq!(SimLog::read_jsonl(&ba[..]).unwrap(), a);
    }

    #[test]
    fn sensing_gates_range_and_fov() {
        let mut s = Scenario::preset("circle2m").unwrap();
        s.landmarks = vec![
            LandmarkTruth::new(0, 1.0, 0.0),
            LandmarkTruth::new(1, 5.0, 0.0),
            LandmarkTruth::new(2, -1.0, 0.0),
        ];
        let obs = sense(&Pose2D::default(), &s, &mut rng::stream(1, 0, 0));
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].landmark_id.0, 0);
    }

    #[test]
    fn sensing_mirror_symmetry() {
        let mut s = Scenario::preset("circle2m").unwrap();
        s.landmarks = (0..12)
            .map(|k| {
                let a = -1.0 + k as f64 * 0.18;
                LandmarkTruth::new(k, 2.0 * a.cos(), 2.0 * a.sin())
            })
            .collect();
        let mirrored = Scenario {
            landmarks: s
                .landmarks
                .iter()
                .map(|l| LandmarkTruth { y: -l.y, ..*l })
                .collect(),
            ..s.clone()
        };
        let ids = |sc: &Scenario| -> Vec<u32> {
            sense(&Pose2D::default(), sc, &mut rng::stream(1, 0, 0))
                .iter()
                .map(|z| z.landmark_id.0)
                .collect()
        };
        assert_eq!(ids(&s), ids(&mirrored));
    }

    #[test]
    fn zero_noise_sensing_is_exact() {
        let mut s = Scenario::preset("sim100").unwrap();
        s.sensor_noise = SensorNoiseParams {
            sigma_r: 0.0,
            sigma_phi: 0.0,
        };
        let pose = Pose2D::new(1.0, 2.0, 0.3);
        for z in sense(&pose, &s, &mut rng::stream(1, 0, 0)) {
            let lm = s.landmarks.iter().find(|l| l.id == z.landmark_id).unwrap();
            assert_eq!(z, measure(&pose, lm).unwrap());
        }
    }

    #[test]
    fn sensor_noise_std_matches() {
        let mut s = Scenario::preset("sim100").unwrap();
        s.landmarks = vec![LandmarkTruth::new(0, 5.0, 3.0)];
        s.sensor_noise = SensorNoiseParams::new(0.3, 0.05).unwrap();
        let pose = Pose2D::default();
        let truth = measure(&pose, &s.landmarks[0]).unwrap();
        let mut rng = rng::stream(2, 0, 0);
        let n = 100_000;
        let (mut sr, mut sp) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let z = sense(&pose, &s, &mut rng)[0];
            sr.push(z.r - truth.r);
            sp.push(wrap_angle(z.phi - truth.phi));
        }
        let std = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        assert!((std(&sr) / 0.3 - 1.0).abs() < 0.03);
        assert!((std(&sp) / 0.05 - 1.0).abs() < 0.03);
    }
}
