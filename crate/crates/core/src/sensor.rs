//! Analytic time-of-flight beam simulation against the cylinder.
//!
//! Produces both the noiseless expected readings used by the filter and
//! noisy synthetic readings standing in for the real sensors. Tactile
//! sensing is emulated by truncating all readings at `d_tact_max` on both
//! the generative and the expected side.

use crate::config::SensorNoiseParams;
use crate::geom::Vec2;
use crate::hand::{sensor_frames, HandParams, JointVector, SensorFrame};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Beam distances, left-finger sensors 1-4 then right-finger sensors 1-4.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector(pub Vec<f64>);

impl MeasurementVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SensingMode {
    Proximity,
    Tactile { d_tact_max: f64 },
}

/// Distance along the beam to the cylinder, clamped to the sensor range.
/// Returns `z_max` on a miss or when the nearest hit is behind the origin.
pub fn raycast_cylinder(
    frame: &SensorFrame,
    center: Vec2,
    radius: f64,
    range_min: f64,
    z_max: f64,
) -> f64 {
    let oc = center - frame.origin;
    let b = oc.dot(frame.direction);
    let c = oc.norm_squared() - radius * radius;
    if c < 0.0 {
        // origin already inside the cylinder: saturate at the minimum range
        return range_min;
    }
    let disc = b * b - c;
    if disc < 0.0 || b < 0.0 {
        return z_max;
    }
    (b - disc.sqrt()).clamp(range_min, z_max)
}

/// Noiseless expected reading of every sensor for a hypothesized cylinder
/// position.
pub fn expected_measurements(
    joints: &JointVector,
    object: Vec2,
    hand: &HandParams,
    radius: f64,
) -> MeasurementVector {
    let frames = sensor_frames(joints, hand);
    MeasurementVector(
        frames
            .iter()
            .map(|f| {
                raycast_cylinder(f, object, radius, hand.sensor_range_min, hand.sensor_range_max)
            })
            .collect(),
    )
}

/// Clamp every reading to at most `d_tact_max`.
pub fn tactile_truncate(z: &MeasurementVector, d_tact_max: f64) -> MeasurementVector {
    MeasurementVector(z.0.iter().map(|&v| v.min(d_tact_max)).collect())
}

pub fn apply_mode(z: &MeasurementVector, mode: SensingMode) -> MeasurementVector {
    match mode {
        SensingMode::Proximity => z.clone(),
        SensingMode::Tactile { d_tact_max } => tactile_truncate(z, d_tact_max),
    }
}

/// Noisy synthetic reading: expected + Gaussian noise per beam, occasional
/// uniform glitch, range clamp, then the mode truncation.
pub fn simulate_measurements<R: Rng>(
    joints: &JointVector,
    object: Vec2,
    hand: &HandParams,
    radius: f64,
    noise: &SensorNoiseParams,
    mode: SensingMode,
    rng: &mut R,
) -> MeasurementVector {
    let expected = expected_measurements(joints, object, hand, radius);
    let gauss = Normal::new(0.0, noise.sigma).expect("sigma > 0");
    let noisy: Vec<f64> = expected
        .0
        .iter()
        .map(|&z| {
            let v = if noise.outlier_rate > 0.0 && rng.gen::<f64>() < noise.outlier_rate {
                rng.gen_range(hand.sensor_range_min..hand.sensor_range_max)
            } else {
                z + gauss.sample(rng)
            };
            v.clamp(hand.sensor_range_min, hand.sensor_range_max)
        })
        .collect();
    apply_mode(&MeasurementVector(noisy), mode)
}
