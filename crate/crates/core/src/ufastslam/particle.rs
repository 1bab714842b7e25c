//! Particle set representation and the pieces of the Rao-Blackwellized step
//! that do not depend on how the pose proposal is linearized.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlamError};
use crate::models::{
    inverse_measure, inverse_measure_jacobians, measure_vec, measurement_jacobians,
    MotionNoiseParams, SensorNoiseParams,
};
use crate::rng::{self, RESAMPLE_LANE};
use crate::types::{symmetrize_psd, ControlInput, Gaussian, LandmarkId, Pose2D, RangeBearing};
use crate::unscented::{psd_sqrt, UtParams};

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkEstimate {
    pub id: LandmarkId,
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl LandmarkEstimate {
    pub fn gaussian(&self) -> Gaussian<2> {
        Gaussian::new_unchecked(self.mean, self.cov)
    }
}

/// One trajectory hypothesis with its conditionally independent landmark map.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub pose: Gaussian<3>,
    pub landmarks: BTreeMap<LandmarkId, LandmarkEstimate>,
    pub weight: f64,
    pub log_weight: f64,
}

impl Particle {
    pub fn new(pose: Pose2D, weight: f64) -> Self {
        Self {
            pose: Gaussian::point(pose.to_vector()),
            landmarks: BTreeMap::new(),
            weight,
            log_weight: weight.ln(),
        }
    }

    pub fn pose_mean(&self) -> Pose2D {
        Pose2D::from_vector(&self.pose.mean)
    }
}

/// How a particle's importance weight is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightForm {
    /// Innovation covariance from the landmark sigma-point transform.
    #[default]
    Unscented,
    /// Linearized `H_p·P·H_pᵀ + H_m·Σ·H_mᵀ + R` evaluated during the proposal.
    Jacobian,
}

impl std::str::FromStr for WeightForm {
    type Err = SlamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unscented" => Ok(Self::Unscented),
            "jacobian" => Ok(Self::Jacobian),
            other => Err(SlamError::invalid(
                "filter.weight_form",
                format!("expected `unscented` or `jacobian`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub particle_count: usize,
    pub ut: UtParams,
    pub motion: MotionNoiseParams,
    pub sensor: SensorNoiseParams,
    /// Resample when `N_eff < resample_fraction · M`.
    pub resample_fraction: f64,
    pub weight_form: WeightForm,
    /// With the unscented form, also fold the pose uncertainty of the
    /// proposal into the innovation covariance used for the weight.
    pub weight_includes_pose: bool,
}

impl FilterConfig {
    pub fn new(
        particle_count: usize,
        motion: MotionNoiseParams,
        sensor: SensorNoiseParams,
    ) -> Self {
        Self {
            particle_count,
            ut: UtParams::default(),
            motion,
            sensor,
            resample_fraction: 0.5,
            weight_form: WeightForm::Unscented,
            weight_includes_pose: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particle_count == 0 {
            return Err(SlamError::invalid("particles", "must be >= 1"));
        }
        if !(self.resample_fraction > 0.0 && self.resample_fraction <= 1.0) {
            return Err(SlamError::invalid(
                "filter.resample_fraction",
                "must lie in (0, 1]",
            ));
        }
        self.motion.validate()?;
        self.sensor.validate()?;
        self.ut.scale(7)?;
        self.ut.scale(2)?;
        Ok(())
    }

    pub fn resample_threshold(&self) -> f64 {
        self.resample_fraction * self.particle_count as f64
    }
}

/// The particle set after some number of steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub particles: Vec<Particle>,
    pub step_index: u64,
    /// Root of every per-particle random stream.
    pub seed: u64,
    /// `N_eff` after the most recent normalization.
    pub n_eff: f64,
    /// Whether the most recent step resampled.
    pub resampled: bool,
}

impl FilterState {
    /// All particles start at `initial` with zero uncertainty and equal weight.
    pub fn new(config: &FilterConfig, initial: Pose2D, seed: u64) -> Result<Self> {
        config.validate()?;
        let m = config.particle_count;
        Ok(Self {
            particles: vec![Particle::new(initial, 1.0 / m as f64); m],
            step_index: 0,
            seed,
            n_eff: m as f64,
            resampled: false,
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }
}

/// New landmark from a first observation, with covariance pushed through
/// the inverse measurement Jacobians.
pub fn init_landmark(
    pose: &Gaussian<3>,
    z: &RangeBearing,
    r_t: &Matrix2<f64>,
) -> Result<LandmarkEstimate> {
    let p = Pose2D::from_vector(&pose.mean);
    let mean = inverse_measure(&p, z)?;
    let (h_pose, h_z) = inverse_measure_jacobians(&p, z);
    let cov = h_z * r_t * h_z.transpose() + h_pose * pose.cov * h_pose.transpose();
    Ok(LandmarkEstimate {
        id: z.landmark_id,
        mean,
        cov: symmetrize_psd(&cov)?,
    })
}

fn checked_inverse(s: &Matrix2<f64>, what: &str) -> Result<Matrix2<f64>> {
    let det = s.determinant();
    let scale = s.abs().max();
    if !(det > 1e-300 && det > 1e-14 * scale * scale) {
        return Err(SlamError::Numerical(format!(
            "{what} not invertible (det {det:e})"
        )));
    }
    s.try_inverse()
        .ok_or_else(|| SlamError::Numerical(format!("{what} not invertible")))
}

pub(crate) fn inverse_innovation(s: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    checked_inverse(s, "innovation covariance")
}

/// `ln N(ν; 0, S)` for a 2-D innovation.
pub fn log_gaussian_density(nu: &Vector2<f64>, s: &Matrix2<f64>) -> Result<f64> {
    let inv = inverse_innovation(s)?;
    let det = s.determinant();
    let maha = (nu.transpose() * inv * nu)[(0, 0)];
    Ok(-0.5 * ((2.0 * PI).powi(2) * det).ln() - 0.5 * maha)
}

/// `|2πS|^{-1/2} exp(-½ νᵀS⁻¹ν)` with `ν = z − ẑ` (bearing wrapped).
pub fn importance_weight(z: &RangeBearing, z_hat: &RangeBearing, s: &Matrix2<f64>) -> Result<f64> {
    Ok(log_importance_weight(z, &z_hat.to_vector(), s)?.exp())
}

pub fn log_importance_weight(
    z: &RangeBearing,
    z_hat: &Vector2<f64>,
    s: &Matrix2<f64>,
) -> Result<f64> {
    log_gaussian_density(&z.residual(z_hat), s)
}

/// `1 / Σ wᵢ²` over normalized weights.
pub fn effective_particles(weights: &[f64]) -> Result<f64> {
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if !(sum_sq > 0.0) || !sum_sq.is_finite() {
        return Err(SlamError::Numerical("all particle weights are zero".into()));
    }
    Ok(1.0 / sum_sq)
}

/// Normalizes log-weights in place (log-sum-exp) and returns `N_eff`.
pub fn normalize_weights(particles: &mut [Particle]) -> Result<f64> {
    let max = particles
        .iter()
        .map(|p| p.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(SlamError::Numerical(format!(
            "particle log-weights degenerate (max {max})"
        )));
    }
    let total: f64 = particles.iter().map(|p| (p.log_weight - max).exp()).sum();
    let log_total = max + total.ln();
    for p in particles.iter_mut() {
        p.weight = (p.log_weight - max).exp() / total;
        p.log_weight -= log_total;
    }
    effective_particles(&particles.iter().map(|p| p.weight).collect::<Vec<_>>())
}

/// Low-variance resampling: one uniform draw `u ∈ [0, 1/M)`, strata at
/// `u + k/M`. Returns the source index for each output slot.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let m = weights.len();
    if m == 0 {
        return Vec::new();
    }
    let step = 1.0 / m as f64;
    let start: f64 = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(m);
    let mut cumulative = weights[0];
    let mut i = 0;
    for k in 0..m {
        let target = start + k as f64 * step;
        while target > cumulative && i + 1 < m {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

/// Resamples when `N_eff` drops below `resample_fraction · M`; otherwise
/// the particle weights are kept as they are.
pub fn resample<R: Rng + ?Sized>(
    state: &FilterState,
    config: &FilterConfig,
    rng: &mut R,
) -> Result<FilterState> {
    let weights = state.weights();
    let n_eff = effective_particles(&weights)?;
    let mut next = state.clone();
    next.n_eff = n_eff;
    if n_eff >= config.resample_threshold() {
        next.resampled = false;
        return Ok(next);
    }
    let m = weights.len();
    let w = 1.0 / m as f64;
    next.particles = systematic_indices(&weights, rng)
        .into_iter()
        .map(|i| {
            let mut p = state.particles[i].clone();
            p.weight = w;
            p.log_weight = w.ln();
            p
        })
        .collect();
    next.resampled = true;
    Ok(next)
}

/// Linearized predicted measurement and innovation covariance
/// `H_p·P·H_pᵀ + H_m·Σ·H_mᵀ + R` at the pose mean.
pub(crate) fn jacobian_innovation(
    pose: &Gaussian<3>,
    lm: &LandmarkEstimate,
    r_t: &Matrix2<f64>,
) -> Result<(Vector2<f64>, nalgebra::Matrix2x3<f64>, Matrix2<f64>)> {
    let z_hat = measure_vec(&pose.mean, &lm.mean)?;
    let (h_pose, h_lm) = measurement_jacobians(&pose.mean, &lm.mean)?;
    let l = h_pose * pose.cov * h_pose.transpose() + h_lm * lm.cov * h_lm.transpose() + r_t;
    Ok((z_hat, h_pose, 0.5 * (l + l.transpose())))
}

/// The parts of a step that differ between the unscented filter and the
/// linearized baseline.
pub(crate) trait ProposalBackend: Sync {
    /// Predicted pose refined by the known-landmark observations, plus any
    /// log-weight contribution scored during the proposal.
    fn propose(
        &self,
        particle: &Particle,
        u: &ControlInput,
        dt: f64,
        known: &[RangeBearing],
    ) -> Result<(Gaussian<3>, f64)>;

    /// Landmark posterior given the sampled pose, plus its log-weight
    /// contribution.
    fn update_landmark(
        &self,
        lm: &LandmarkEstimate,
        pose: &Pose2D,
        z: &RangeBearing,
    ) -> Result<(LandmarkEstimate, f64)>;
}

pub(crate) fn canonical_observations(observations: &[RangeBearing]) -> Result<Vec<RangeBearing>> {
    let mut seen = HashSet::with_capacity(observations.len());
    for z in observations {
        if !seen.insert(z.landmark_id) {
            return Err(SlamError::DuplicateObservation(z.landmark_id));
        }
        if !(z.r.is_finite() && z.phi.is_finite()) {
            return Err(SlamError::NonFinite("observation"));
        }
    }
    let mut sorted = observations.to_vec();
    sorted.sort_by_key(|z| z.landmark_id);
    Ok(sorted)
}

fn sample_pose<R: Rng + ?Sized>(g: &Gaussian<3>, rng: &mut R) -> Result<Pose2D> {
    let root = psd_sqrt(&symmetrize_psd(&g.cov)?)?;
    let xi = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(Pose2D::from_vector(&(g.mean + root * xi)))
}

fn step_particle<B: ProposalBackend>(
    backend: &B,
    config: &FilterConfig,
    seed: u64,
    step: u64,
    index: usize,
    particle: &Particle,
    u: &ControlInput,
    dt: f64,
    observations: &[RangeBearing],
) -> Result<Particle> {
    let mut next = particle.clone();
    let known: Vec<RangeBearing> = observations
        .iter()
        .filter(|z| particle.landmarks.contains_key(&z.landmark_id))
        .copied()
        .collect();
    let (pose, mut log_w) = backend
        .propose(particle, u, dt, &known)
        .map_err(|e| e.in_particle(index, None))?;

    if observations.is_empty() {
        next.pose = pose;
        return Ok(next);
    }

    let mut rng = rng::stream(seed, index as u64, step);
    let sample = sample_pose(&pose, &mut rng).map_err(|e| e.in_particle(index, None))?;
    next.pose = Gaussian::point(sample.to_vector());

    let r_t = config.sensor.cov();
    for z in observations {
        let id = z.landmark_id;
        let updated = match particle.landmarks.get(&id) {
            Some(lm) => {
                let (lm, w) = backend
                    .update_landmark(lm, &sample, z)
                    .map_err(|e| e.in_particle(index, Some(id)))?;
                log_w += w;
                lm
            }
            None => {
                init_landmark(&next.pose, z, &r_t).map_err(|e| e.in_particle(index, Some(id)))?
            }
        };
        next.landmarks.insert(id, updated);
    }
    if !log_w.is_finite() {
        return Err(SlamError::NonFinite("log-weight").in_particle(index, None));
    }
    next.log_weight += log_w;
    Ok(next)
}

/// One full filter step: per-particle proposal, sampling and landmark
/// updates in parallel, then normalization and gated resampling.
pub(crate) fn run_step<B: ProposalBackend>(
    backend: &B,
    config: &FilterConfig,
    state: &FilterState,
    u: &ControlInput,
    dt: f64,
    observations: &[RangeBearing],
) -> Result<FilterState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SlamError::invalid("dt", "must be finite and > 0"));
    }
    if !u.is_finite() {
        return Err(SlamError::NonFinite("control"));
    }
    let observations = canonical_observations(observations)?;
    let step = state.step_index + 1;
    let particles = state
        .particles
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            step_particle(
                backend,
                config,
                state.seed,
                step,
                k,
                p,
                u,
                dt,
                &observations,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut next = FilterState {
        particles,
        step_index: step,
        seed: state.seed,
        n_eff: state.n_eff,
        resampled: false,
    };
    if observations.is_empty() {
        return Ok(next);
    }
    next.n_eff = normalize_weights(&mut next.particles)?;
    let mut rng = rng::stream(state.seed, RESAMPLE_LANE, step);
    resample(&next, config, &mut rng)
}
