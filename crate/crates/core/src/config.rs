//! Experiment configuration: one TOML file with a block per subsystem.
//! Every tunable named elsewhere in the crate appears here with its default.

use crate::error::{Error, Result};
use crate::hand::HandParams;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Cylinder and task geometry.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectParams {
    pub radius: f64,
    /// Cylinder center at trial start (mm, relative to the finger-base line).
    pub start_position: [f64; 2],
    /// Goal: mirror of the start across x = 0.
    pub goal_position: [f64; 2],
}

impl Default for ObjectParams {
    fn default() -> Self {
        ObjectParams {
            radius: 40.0,
            start_position: [-45.0, 45.0],
            goal_position: [45.0, 45.0],
        }
    }
}

/// Quasi-static simulator constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Max speed of an unbraked joint tracking its motor command (rad/s).
    pub joint_rate_limit: f64,
    /// Fingertip-cylinder gap below which a contact is reported (mm).
    pub contact_tolerance: f64,
    /// Convergence tolerance of the contact projection loop (mm).
    pub projection_tolerance: f64,
    pub projection_max_iterations: usize,
    /// Max joint travel per internal substep (rad); bounds tunneling.
    pub max_joint_delta_per_substep: f64,
    /// Scale on the net per-step push displacement of the object. 1 is pure
    /// projection (the object ends each step exactly touching the pusher);
    /// larger values let a pushed object separate from the fingertip in
    /// proportion to the push, standing in for the momentum that a
    /// quasi-static model otherwise discards.
    pub push_overshoot: f64,
    /// Upper bound (mm) on the extra displacement added by push_overshoot in
    /// one step. Gentle pushes separate in full proportion; violent shoves
    /// shed the excess, standing in for contact damping.
    pub push_overshoot_cap: f64,
    /// Joint-space rays swept during preset pose search, one per finger
    /// (scaled by a scalar flexion parameter in [0, 1]).
    pub preset_pattern_left: [f64; 3],
    pub preset_pattern_right: [f64; 3],
    /// Target surface gap for the preset contact bisection (mm).
    pub preset_contact_gap: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            joint_rate_limit: 0.175,
            contact_tolerance: 0.5,
            projection_tolerance: 1e-3,
            projection_max_iterations: 128,
            max_joint_delta_per_substep: 0.01,
            push_overshoot: 3.5,
            push_overshoot_cap: 8.0,
            preset_pattern_left: [0.0, 1.1, 1.57],
            preset_pattern_right: [1.57, 0.05, 0.05],
            preset_contact_gap: 0.25,
        }
    }
}

/// Synthetic sensor noise (generative side).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoiseParams {
    pub sigma: f64,
    /// Probability per beam per reading of a uniform glitch.
    pub outlier_rate: f64,
}

impl Default for SensorNoiseParams {
    fn default() -> Self {
        SensorNoiseParams {
            sigma: 2.0,
            outlier_rate: 0.01,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub noise: SensorNoiseParams,
    /// Truncation distance emulating a contact-only sensor (mm).
    pub d_tact_max: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            noise: SensorNoiseParams::default(),
            d_tact_max: 18.0,
        }
    }
}

/// Beam mixture model used for particle weighting.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamModelParams {
    pub sigma: f64,
    pub w1: f64,
    pub w2: f64,
    pub z_max: f64,
}

impl Default for BeamModelParams {
    fn default() -> Self {
        BeamModelParams {
            sigma: 5.0,
            w1: 0.95,
            w2: 0.05,
            z_max: 255.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionNoiseParams {
    /// Isotropic particle diffusion per control step (mm).
    pub sigma_motion: f64,
}

impl Default for MotionNoiseParams {
    fn default() -> Self {
        MotionNoiseParams { sigma_motion: 2.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    pub num_particles: usize,
    pub beam: BeamModelParams,
    pub motion: MotionNoiseParams,
    /// Std of the initial particle cloud about the known start (mm).
    pub init_spread: f64,
    /// Resample when ESS falls below this fraction of N.
    pub ess_threshold_fraction: f64,
    /// Measurement update rate (Hz); control runs slower, see trial block.
    pub rate_hz: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            num_particles: 1000,
            beam: BeamModelParams::default(),
            motion: MotionNoiseParams::default(),
            init_spread: 3.0,
            ess_threshold_fraction: 0.5,
            rate_hz: 18.0,
        }
    }
}

/// How the terminal goal-distance term of the rollout cost is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalDistanceMetric {
    /// |x_goal - x_terminal|: matches the horizontal success criterion.
    Horizontal,
    /// 2-D distance to the goal point.
    Euclidean,
    /// |dx| + vertical_weight * |dy|: keeps full horizontal sensitivity even
    /// when vertical drift dominates, while still discouraging pushes that
    /// drive the object out of the fingers' reach.
    #[default]
    Weighted,
}

/// How the per-step contact indicator of the rollout cost is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactPenalty {
    /// One penalty unit per fingertip out of contact (0, 1 or 2 per step).
    PerFingertip,
    /// One penalty unit only when no fingertip touches the object. Rewards
    /// keeping a pushing finger on the object without forcing a two-finger
    /// squeeze, freeing the other finger to stand off and reposition.
    AnyContact,
    /// Like AnyContact, but the no-contact unit ramps linearly with the
    /// nearest fingertip's surface gap, saturating at soft_contact_range.
    /// Rollouts that merely get closer to a lost object score better than
    /// ones that ignore it, giving the planner a recovery gradient even when
    /// contact is unreachable within the horizon.
    #[default]
    SoftAnyContact,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MppiParams {
    pub num_rollouts: usize,
    pub horizon: usize,
    pub lambda: f64,
    /// Weight of the no-contact indicator term.
    pub a1: f64,
    /// How the no-contact indicator is counted per step.
    pub contact_penalty: ContactPenalty,
    /// Gap (mm) at which the soft contact penalty saturates at one unit.
    pub soft_contact_range: f64,
    /// Weight of the terminal goal-distance term (distance in meters).
    pub a2: f64,
    /// Brake switch threshold: switch only if a candidate's cost is below
    /// (1 - phi) times the active configuration's cost.
    pub phi: f64,
    pub motor_noise_sigma: f64,
    /// Every other perturbed rollout uses motor noise scaled by this factor.
    /// Coarse samples explore recovery maneuvers; fine samples resolve the
    /// sub-millimeter nudges needed to land inside the success window.
    pub fine_noise_scale: f64,
    pub goal_distance_metric: GoalDistanceMetric,
    /// Scale on the vertical error term of the weighted goal metric.
    /// Smaller values keep the horizontal error dominant near the goal while
    /// still penalizing vertical drift out of the fingers' workspace.
    /// Ignored by the horizontal and euclidean metrics.
    pub vertical_weight: f64,
    /// Extra scale on horizontal error past the goal in the push direction,
    /// weighted-metric only. The object can only be pushed from below, so
    /// overshooting the goal near the far finger's reach boundary is hard or
    /// impossible to undo; values above 1 make rollouts that overshoot look
    /// strictly worse than ones that stop short.
    pub overshoot_weight: f64,
}

impl Default for MppiParams {
    fn default() -> Self {
        MppiParams {
            num_rollouts: 297,
            horizon: 15,
            lambda: 0.1,
            a1: 0.1,
            contact_penalty: ContactPenalty::SoftAnyContact,
            soft_contact_range: 60.0,
            a2: 200.0,
            phi: 0.05,
            motor_noise_sigma: 0.25,
            fine_noise_scale: 0.05,
            goal_distance_metric: GoalDistanceMetric::Weighted,
            vertical_weight: 0.6,
            overshoot_weight: 3.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialParams {
    pub timeout_s: f64,
    pub success_radius: f64,
    pub control_rate_hz: f64,
    /// Std of the jitter added to ground truth in fiducial mode (mm).
    pub fiducial_jitter_sigma: f64,
    /// After the success radius is first crossed, the loop keeps running for
    /// this long before final distances are measured (s). The controller steers
    /// on its estimate during this window, so the final distance reflects
    /// estimation quality rather than the success threshold. Set to 0 to
    /// measure at the crossing tick.
    pub settle_time_s: f64,
}

impl Default for TrialParams {
    fn default() -> Self {
        TrialParams {
            timeout_s: 60.0,
            success_radius: 1.0,
            control_rate_hz: 5.0,
            fiducial_jitter_sigma: 0.5,
            settle_time_s: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub hand: HandParams,
    pub object: ObjectParams,
    pub sim: SimParams,
    pub sensor: SensorConfig,
    pub filter: FilterParams,
    pub controller: MppiParams,
    pub trial: TrialParams,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Config = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let c = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        c(
            self.hand.link_lengths.iter().all(|&l| l > 0.0),
            "link lengths must be positive",
        )?;
        c(self.hand.sensor_range_min > 0.0, "sensor_range_min must be positive")?;
        c(
            self.hand.sensor_range_max > self.hand.sensor_range_min,
            "sensor_range_max must exceed sensor_range_min",
        )?;
        c(self.object.radius > 0.0, "object radius must be positive")?;
        c(self.sensor.noise.sigma > 0.0, "sensor noise sigma must be positive")?;
        c(
            (0.0..1.0).contains(&self.sensor.noise.outlier_rate),
            "outlier_rate must be in [0, 1)",
        )?;
        c(
            (self.filter.beam.w1 + self.filter.beam.w2 - 1.0).abs() < 1e-9,
            "beam model weights w1 + w2 must equal 1",
        )?;
        c(self.filter.num_particles >= 1, "need at least one particle")?;
        c(
            self.filter.motion.sigma_motion > 0.0,
            "sigma_motion must be positive",
        )?;
        c(self.controller.horizon >= 1, "horizon must be at least 1")?;
        c(
            self.controller.num_rollouts.is_multiple_of(9),
            "num_rollouts must be divisible by the 9 brake configurations",
        )?;
        c(self.controller.lambda > 0.0, "lambda must be positive")?;
        c(self.trial.timeout_s > 0.0, "timeout must be positive")?;
        c(
            self.trial.control_rate_hz > 0.0 && self.filter.rate_hz >= self.trial.control_rate_hz,
            "filter rate must be at least the control rate",
        )?;
        Ok(())
    }

    /// Control period (s).
    pub fn dt(&self) -> f64 {
        1.0 / self.trial.control_rate_hz
    }
}
