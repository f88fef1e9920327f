//! Monte-Carlo estimator of the cylinder's xy position from beam
//! measurements and executed actions.
//!
//! Particle weights are updated with a per-beam mixture likelihood
//! (Gaussian around the expected reading plus a uniform glitch term),
//! treating the eight beams as conditionally independent. Likelihoods are
//! accumulated in log domain with max subtraction; the mixture normalizer
//! is dropped since it is constant across particles.

use crate::config::{BeamModelParams, MotionNoiseParams};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::hand::{sensor_frames, HandParams, JointVector};
use crate::sensor::{apply_mode, raycast_cylinder, MeasurementVector, SensingMode};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec2,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Effective sample size, 1 / sum of squared normalized weights.
    pub fn effective_sample_size(&self) -> f64 {
        let sq: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        if sq > 0.0 {
            1.0 / sq
        } else {
            0.0
        }
    }

    fn set_uniform_weights(&mut self) {
        let w = 1.0 / self.len() as f64;
        for p in self.particles.iter_mut() {
            p.weight = w;
        }
    }
}

/// N particles drawn from an isotropic Gaussian about the known start,
/// with uniform weights.
pub fn init_particles<R: Rng>(start: Vec2, spread: f64, n: usize, rng: &mut R) -> ParticleSet {
    assert!(n >= 1);
    let gauss = Normal::new(0.0, spread).expect("spread > 0");
    let particles = (0..n)
        .map(|_| Particle {
            position: start + Vec2::new(gauss.sample(rng), gauss.sample(rng)),
            weight: 1.0 / n as f64,
        })
        .collect();
    ParticleSet { particles }
}

/// Unnormalized mixture density of one beam reading given its expectation:
/// w1 * N(z; z_star, sigma^2) + w2 / z_max.
pub fn beam_likelihood(z: f64, z_star: f64, params: &BeamModelParams) -> f64 {
    let d = (z - z_star) / params.sigma;
    let gauss = (-0.5 * d * d).exp() / (params.sigma * (2.0 * std::f64::consts::PI).sqrt());
    params.w1 * gauss + params.w2 / params.z_max
}

/// Expected readings for one particle hypothesis, mode truncation applied.
fn expected_for_particle(
    position: Vec2,
    frames: &[crate::hand::SensorFrame],
    hand: &HandParams,
    object_radius: f64,
    mode: SensingMode,
) -> Vec<f64> {
    let raw: Vec<f64> = frames
        .iter()
        .map(|f| {
            raycast_cylinder(
                f,
                position,
                object_radius,
                hand.sensor_range_min,
                hand.sensor_range_max,
            )
        })
        .collect();
    match mode {
        SensingMode::Proximity => raw,
        SensingMode::Tactile { d_tact_max } => raw.iter().map(|&v| v.min(d_tact_max)).collect(),
    }
}

/// Multiply every particle's weight by the joint beam likelihood of `z`
/// under its hypothesis, then renormalize.
///
/// In tactile mode the truncation is applied to both the observation and
/// the expected readings. On total underflow the weights are reset to
/// uniform and `DegenerateWeights` is reported.
pub fn measurement_update(
    ps: &mut ParticleSet,
    z: &MeasurementVector,
    joints: &JointVector,
    mode: SensingMode,
    hand: &HandParams,
    object_radius: f64,
    params: &BeamModelParams,
) -> Result<()> {
    let frames = sensor_frames(joints, hand);
    let z_obs = apply_mode(z, mode);
    let mut log_w: Vec<f64> = Vec::with_capacity(ps.len());
    for p in &ps.particles {
        let expected = expected_for_particle(p.position, &frames, hand, object_radius, mode);
        let mut acc = if p.weight > 0.0 {
            p.weight.ln()
        } else {
            f64::NEG_INFINITY
        };
        for (zj, zs) in z_obs.0.iter().zip(expected.iter()) {
            acc += beam_likelihood(*zj, *zs, params).ln();
        }
        log_w.push(acc);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        ps.set_uniform_weights();
        return Err(Error::DegenerateWeights);
    }
    let mut sum = 0.0;
    for (p, lw) in ps.particles.iter_mut().zip(log_w.iter()) {
        p.weight = (lw - max).exp();
        sum += p.weight;
    }
    for p in ps.particles.iter_mut() {
        p.weight /= sum;
    }
    Ok(())
}

/// Shift every particle by the expected displacement plus isotropic
/// Gaussian noise. Weights are untouched.
pub fn motion_update<R: Rng>(
    ps: &mut ParticleSet,
    expected_delta: Vec2,
    noise: &MotionNoiseParams,
    rng: &mut R,
) {
    let gauss = Normal::new(0.0, noise.sigma_motion).expect("sigma_motion > 0");
    for p in ps.particles.iter_mut() {
        p.position += expected_delta + Vec2::new(gauss.sample(rng), gauss.sample(rng));
    }
}

/// Systematic (low-variance) resampling when the effective sample size
/// drops below `threshold_fraction * N`. Returns whether a resample ran.
pub fn resample_if_needed<R: Rng>(
    ps: &mut ParticleSet,
    threshold_fraction: f64,
    rng: &mut R,
) -> bool {
    let n = ps.len();
    if ps.effective_sample_size() >= threshold_fraction * n as f64 {
        return false;
    }
    let u0: f64 = rng.gen_range(0.0..1.0) / n as f64;
    let mut new = Vec::with_capacity(n);
    let mut cum = ps.particles[0].weight;
    let mut i = 0;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        while u > cum && i + 1 < n {
            i += 1;
            cum += ps.particles[i].weight;
        }
        new.push(Particle {
            position: ps.particles[i].position,
            weight: 1.0 / n as f64,
        });
    }
    ps.particles = new;
    true
}

/// Weighted mean position and weighted sample covariance.
pub fn estimate(ps: &ParticleSet) -> (Vec2, [[f64; 2]; 2]) {
    let mut mean = Vec2::ZERO;
    for p in &ps.particles {
        mean += p.weight * p.position;
    }
    let mut cov = [[0.0; 2]; 2];
    for p in &ps.particles {
        let d = p.position - mean;
        cov[0][0] += p.weight * d.x * d.x;
        cov[0][1] += p.weight * d.x * d.y;
        cov[1][1] += p.weight * d.y * d.y;
    }
    cov[1][0] = cov[0][1];
    (mean, cov)
}
