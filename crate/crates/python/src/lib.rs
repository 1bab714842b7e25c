//! `ufslam_py`: Python access to the motion and sensor models, the unscented
//! transform, the two filters and whole simulated runs.

use std::collections::BTreeMap;

use nalgebra::{SMatrix, SVector, Vector2, Vector3};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use slam::cli::{output, Algorithm, RunSpec, Settings};
use slam::metrics::estimated_state;
use slam::models::{self, MotionNoiseParams, SensorNoiseParams};
use slam::ufastslam::{effective_particles as n_eff, FilterConfig, FilterState};
use slam::unscented::{self, UtParams};
use slam::{ControlInput, Gaussian, LandmarkId, Pose2D, RangeBearing, SlamError};

type Triple = (f64, f64, f64);
type LandmarkRow = (u32, (f64, f64), Option<(f64, f64)>);

fn err(e: SlamError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pose(p: Triple) -> Pose2D {
    Pose2D::new(p.0, p.1, p.2)
}

#[pyfunction]
fn wrap_angle(a: f64) -> f64 {
    slam::wrap_angle(a)
}

#[pyfunction]
#[pyo3(signature = (n, alpha = 1.0, kappa = 0.0, beta = 2.0))]
fn ut_weights(n: usize, alpha: f64, kappa: f64, beta: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    unscented::ut_weights(n, &UtParams::new(alpha, kappa, beta).map_err(err)?).map_err(err)
}

fn sigma_points_n<const D: usize>(
    mean: &[f64],
    cov: &[Vec<f64>],
    p: &UtParams,
) -> PyResult<Vec<Vec<f64>>> {
    if cov.len() != D || cov.iter().any(|r| r.len() != D) {
        return Err(PyValueError::new_err("cov must be n x n"));
    }
    let g = Gaussian::new(
        SVector::<f64, D>::from_column_slice(mean),
        SMatrix::<f64, D, D>::from_fn(|i, j| cov[i][j]),
    )
    .map_err(err)?;
    let set = unscented::sigma_points(&g, p).map_err(err)?;
    Ok(set
        .points
        .iter()
        .map(|x| x.iter().copied().collect())
        .collect())
}

/// Sigma points (2n + 1 rows) for a Gaussian of dimension 1..=7.
#[pyfunction]
#[pyo3(signature = (mean, cov, alpha = 1.0, kappa = 0.0, beta = 2.0))]
fn sigma_points(
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    alpha: f64,
    kappa: f64,
    beta: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let p = UtParams::new(alpha, kappa, beta).map_err(err)?;
    match mean.len() {
        1 => sigma_points_n::<1>(&mean, &cov, &p),
        2 => sigma_points_n::<2>(&mean, &cov, &p),
        3 => sigma_points_n::<3>(&mean, &cov, &p),
        4 => sigma_points_n::<4>(&mean, &cov, &p),
        5 => sigma_points_n::<5>(&mean, &cov, &p),
        6 => sigma_points_n::<6>(&mean, &cov, &p),
        7 => sigma_points_n::<7>(&mean, &cov, &p),
        n => Err(PyValueError::new_err(format!(
            "dimension {n} not supported (1..=7)"
        ))),
    }
}

#[pyfunction]
fn motion_mean(p: Triple, v: f64, w: f64, dt: f64) -> Triple {
    let out = models::motion_mean(&pose(p), &ControlInput::new(v, w), dt);
    (out.x, out.y, out.theta)
}

/// `(range, bearing)` of a landmark seen from `pose`.
#[pyfunction]
fn measure(p: Triple, landmark: (f64, f64)) -> PyResult<(f64, f64)> {
    let z = models::measure_vec(
        &Vector3::new(p.0, p.1, p.2),
        &Vector2::new(landmark.0, landmark.1),
    )
    .map_err(err)?;
    Ok((z[0], z[1]))
}

#[pyfunction]
fn inverse_measure(p: Triple, r: f64, phi: f64) -> PyResult<(f64, f64)> {
    let m = models::inverse_measure(&pose(p), &RangeBearing::new(LandmarkId(0), r, phi))
        .map_err(err)?;
    Ok((m[0], m[1]))
}

#[pyfunction]
fn effective_particles(weights: Vec<f64>) -> PyResult<f64> {
    n_eff(&weights).map_err(err)
}

#[pyfunction]
fn scenario_names() -> Vec<&'static str> {
    slam::simulator::PRESETS.to_vec()
}

fn settings(config: Option<BTreeMap<String, String>>) -> PyResult<Settings> {
    let mut s = Settings::default();
    for (k, v) in config.unwrap_or_default() {
        s.set(&k, v).map_err(err)?;
    }
    Ok(s)
}

/// Simulates and filters one run. `config` uses the same keys as the CLI
/// configuration file. Returns a dict with `summary`, `steps` and `landmarks`.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn run<'py>(
    py: Python<'py>,
    config: Option<BTreeMap<String, String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = RunSpec::resolve(&settings(config)?).map_err(err)?;
    let out = py.detach(|| slam::cli::execute(&spec)).map_err(err)?;
    let json = py.import("json")?;
    let summary = serde_json_string(&output::summary(&out))?;
    let d = PyDict::new(py);
    d.set_item("summary", json.call_method1("loads", (summary,))?)?;
    let steps: Vec<(u64, f64, Triple, Triple, f64)> = output::step_rows(&out)
        .into_iter()
        .map(|r| {
            (
                r.step,
                r.t,
                (r.true_x, r.true_y, r.true_theta),
                (r.est_x, r.est_y, r.est_theta),
                r.pos_err,
            )
        })
        .collect();
    d.set_item("steps", steps)?;
    let lms: Vec<LandmarkRow> = output::landmark_rows(&out)
        .into_iter()
        .map(|l| (l.id, (l.true_x, l.true_y), l.est_x.zip(l.est_y)))
        .collect();
    d.set_item("landmarks", lms)?;
    Ok(d)
}

fn serde_json_string(s: &output::Summary) -> PyResult<String> {
    serde_json::to_string(s).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A particle filter driven step by step from Python.
#[pyclass]
struct Filter {
    inner: slam::cli::Filter,
    state: FilterState,
}

#[pymethods]
impl Filter {
    #[new]
    #[pyo3(signature = (algo = "ufastslam", particles = 100, motion = (0.05, 0.01, 0.02, 0.05), sensor = (0.3, 0.05), initial = (0.0, 0.0, 0.0), seed = 1))]
    fn new(
        algo: &str,
        particles: usize,
        motion: (f64, f64, f64, f64),
        sensor: (f64, f64),
        initial: Triple,
        seed: u64,
    ) -> PyResult<Self> {
        let algo: Algorithm = algo.parse().map_err(err)?;
        let cfg = FilterConfig::new(
            particles,
            MotionNoiseParams::new(motion.0, motion.1, motion.2, motion.3).map_err(err)?,
            SensorNoiseParams::new(sensor.0, sensor.1).map_err(err)?,
        );
        let inner = slam::cli::Filter::new(algo, cfg).map_err(err)?;
        let state = inner.initial_state(pose(initial), seed).map_err(err)?;
        Ok(Self { inner, state })
    }

    /// Advances one step; `observations` holds `(landmark_id, range, bearing)`.
    #[pyo3(signature = (v, w, dt, observations = Vec::new()))]
    fn step(
        &mut self,
        py: Python<'_>,
        v: f64,
        w: f64,
        dt: f64,
        observations: Vec<(u32, f64, f64)>,
    ) -> PyResult<()> {
        let z: Vec<RangeBearing> = observations
            .into_iter()
            .map(|(id, r, phi)| RangeBearing::new(LandmarkId(id), r, phi))
            .collect();
        let next = py
            .detach(|| {
                self.inner
                    .step(&self.state, &ControlInput::new(v, w), dt, &z)
            })
            .map_err(err)?;
        self.state = next;
        Ok(())
    }

    /// Weighted pose estimate `(x, y, theta)`.
    fn pose(&self) -> Triple {
        let (p, _) = estimated_state(&self.state);
        (p.x, p.y, p.theta)
    }

    fn landmarks(&self) -> BTreeMap<u32, (f64, f64)> {
        let (_, map) = estimated_state(&self.state);
        map.into_iter()
            .map(|(id, m)| (id.0, (m[0], m[1])))
            .collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.state.weights()
    }

    #[getter]
    fn n_eff(&self) -> f64 {
        self.state.n_eff
    }

    #[getter]
    fn step_index(&self) -> u64 {
        self.state.step_index
    }
}

#[pymodule]
fn ufslam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(wrap_angle, m)?)?;
    m.add_function(wrap_pyfunction!(ut_weights, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_points, m)?)?;
    m.add_function(wrap_pyfunction!(motion_mean, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_measure, m)?)?;
    m.add_function(wrap_pyfunction!(effective_particles, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_class::<Filter>()?;
    Ok(())
}
