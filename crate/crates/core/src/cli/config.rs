//! Flat `key = value` configuration with dotted keys.
//!
//! ```text
//! # comment
//! scenario = sim100
//! sensor.sigma_r = 0.3
//! [ut]
//! alpha = 0.5          # same as ut.alpha
//! sensor.sigma_r = 0.3 # dotted keys ignore the section
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SlamError};
use crate::models::{MotionNoiseParams, SensorNoiseParams};
use crate::simulator::Scenario;
use crate::ufastslam::{FilterConfig, WeightForm};
use crate::unscented::UtParams;

pub const KEYS: &[&str] = &[
    "scenario",
    "algo",
    "particles",
    "seed",
    "sim.dt",
    "sim.speed",
    "sim.max_range",
    "sim.fov",
    "sim.turn_gain",
    "sim.noise_free",
    "sim.landmark_count",
    "sensor.sigma_r",
    "sensor.sigma_phi",
    "motion.a1",
    "motion.a2",
    "motion.a3",
    "motion.a4",
    "ut.alpha",
    "ut.kappa",
    "ut.beta",
    "filter.resample_fraction",
    "filter.weight_form",
    "filter.weight_includes_pose",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    UFastSlam,
    FastSlam2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::UFastSlam, Algorithm::FastSlam2];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::UFastSlam => "ufastslam",
            Algorithm::FastSlam2 => "fastslam2",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = SlamError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ufastslam" | "ufast" | "unscented" => Ok(Algorithm::UFastSlam),
            "fastslam2" | "fastslam2.0" | "fastslam" => Ok(Algorithm::FastSlam2),
            other => Err(SlamError::invalid(
                "algo",
                format!("unknown algorithm `{other}` (expected ufastslam or fastslam2)"),
            )),
        }
    }
}

/// Raw settings, later keys overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(pub BTreeMap<String, String>);

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = BTreeMap::new();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                SlamError::invalid(format!("line {}", n + 1), "expected `key = value`")
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(SlamError::invalid(format!("line {}", n + 1), "empty key"));
            }
            let key = if section.is_empty() || k.contains('.') {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            out.insert(key, v.trim().to_string());
        }
        let s = Settings(out);
        s.check_keys()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(SlamError::invalid(key, "unknown configuration key"));
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| SlamError::invalid(assignment, "expected `key=value`"))?;
        self.set(k.trim(), v.trim())
    }

    fn check_keys(&self) -> Result<()> {
        match self.0.keys().find(|k| !KEYS.contains(&k.as_str())) {
            Some(k) => Err(SlamError::invalid(k.clone(), "unknown configuration key")),
            None => Ok(()),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| SlamError::invalid(key, format!("cannot parse `{v}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// The simulated world, including the noise actually injected.
    pub scenario: Scenario,
    pub filter: FilterConfig,
    pub algo: Algorithm,
    pub seed: u64,
}

impl RunSpec {
    pub fn resolve(settings: &Settings) -> Result<Self> {
        let name: String = settings.get_or("scenario", "sim100".to_string())?;
        let mut sc = Scenario::preset(&name)?;
        let algo = settings.get_or("algo", Algorithm::UFastSlam)?;
        let particles: usize = settings.get_or("particles", 100)?;
        let seed: u64 = settings.get_or("seed", sc.seed)?;
        sc.seed = seed;
        sc.dt = settings.get_or("sim.dt", sc.dt)?;
        sc.speed = settings.get_or("sim.speed", sc.speed)?;
        sc.max_range = settings.get_or("sim.max_range", sc.max_range)?;
        sc.fov = settings.get_or("sim.fov", sc.fov)?;
        sc.turn_gain = settings.get_or("sim.turn_gain", sc.turn_gain)?;
        if let Some(n) = settings.get::<usize>("sim.landmark_count")? {
            if n == 0 || n > sc.landmarks.len() {
                return Err(SlamError::invalid(
                    "sim.landmark_count",
                    format!("must lie in 1..={}", sc.landmarks.len()),
                ));
            }
            sc.landmarks.truncate(n);
        }
        sc.sensor_noise = SensorNoiseParams {
            sigma_r: settings.get_or("sensor.sigma_r", sc.sensor_noise.sigma_r)?,
            sigma_phi: settings.get_or("sensor.sigma_phi", sc.sensor_noise.sigma_phi)?,
        };
        sc.sensor_noise.validate()?;
        let m = sc.motion_noise;
        sc.motion_noise = MotionNoiseParams {
            a1: settings.get_or("motion.a1", m.a1)?,
            a2: settings.get_or("motion.a2", m.a2)?,
            a3: settings.get_or("motion.a3", m.a3)?,
            a4: settings.get_or("motion.a4", m.a4)?,
        };
        sc.motion_noise.validate()?;

        let mut filter = FilterConfig::new(particles, sc.motion_noise, sc.sensor_noise);
        filter.ut = UtParams::new(
            settings.get_or("ut.alpha", filter.ut.alpha)?,
            settings.get_or("ut.kappa", filter.ut.kappa)?,
            settings.get_or("ut.beta", filter.ut.beta)?,
        )?;
        filter.resample_fraction =
            settings.get_or("filter.resample_fraction", filter.resample_fraction)?;
        filter.weight_form =
            settings.get_or::<WeightForm>("filter.weight_form", filter.weight_form)?;
        filter.weight_includes_pose =
            settings.get_or("filter.weight_includes_pose", filter.weight_includes_pose)?;
        filter.validate()?;

        if settings.get_or("sim.noise_free", false)? {
            sc = sc.noise_free();
        }
        sc.validate()?;
        Ok(Self {
            scenario: sc,
            filter,
            algo,
            seed,
        })
    }
}
