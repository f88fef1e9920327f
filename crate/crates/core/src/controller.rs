//! Sampling-based model predictive controller over the hybrid
//! motor/brake action space.
//!
//! Every sampled action sequence keeps a single brake configuration for
//! its whole horizon; the continuous motor commands are averaged with
//! softmin weights per configuration, and the active configuration only
//! changes when a candidate beats it by the switching threshold.

use crate::config::{ContactPenalty, GoalDistanceMetric, MppiParams};
use crate::geom::Vec2;
use crate::world::{BrakeConfig, HybridAction, World, WorldState, NUM_BRAKE_CONFIGS};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// Motor commands over the horizon under one fixed brake configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSequence {
    pub brake: BrakeConfig,
    /// One [left, right] motor command pair per horizon step.
    pub motors: Vec<[f64; 2]>,
}

impl ActionSequence {
    pub fn first_action(&self) -> HybridAction {
        HybridAction {
            motors: self.motors[0],
            brakes: self.brake,
        }
    }

    /// Drop the first step and repeat the last, warm-starting the next tick.
    pub fn shifted(&self) -> ActionSequence {
        let mut motors = self.motors[1..].to_vec();
        motors.push(*self.motors.last().expect("non-empty sequence"));
        ActionSequence {
            brake: self.brake,
            motors,
        }
    }
}

/// Persistent controller state across ticks.
#[derive(Clone, Debug)]
pub struct ControllerState {
    pub nominal: Vec<ActionSequence>,
    pub active: Option<usize>,
    pub active_cost: f64,
}

impl ControllerState {
    /// Nominal sequences that hold the current free-joint positions.
    pub fn new(state: &WorldState, params: &MppiParams) -> Self {
        let nominal = BrakeConfig::all()
            .iter()
            .map(|&brake| {
                let idx = brake.free_joint_indices();
                let hold = [state.joints.0[idx[0]], state.joints.0[idx[1]]];
                ActionSequence {
                    brake,
                    motors: vec![hold; params.horizon],
                }
            })
            .collect();
        ControllerState {
            nominal,
            active: None,
            active_cost: f64::INFINITY,
        }
    }
}

/// Cost of a completed rollout: contact penalty summed over the horizon's
/// successor states plus the terminal goal distance in meters.
pub fn trajectory_cost(
    states: &[WorldState],
    world: &World,
    params: &MppiParams,
    goal: Vec2,
    metric: GoalDistanceMetric,
) -> f64 {
    let contact_penalty: f64 = states[1..]
        .iter()
        .map(|s| {
            let missing = world.fingertips_out_of_contact(s);
            match params.contact_penalty {
                ContactPenalty::PerFingertip => missing as f64,
                ContactPenalty::AnyContact => f64::from(missing == 2),
                ContactPenalty::SoftAnyContact => {
                    if missing < 2 {
                        0.0
                    } else {
                        (world.min_fingertip_gap(s) / params.soft_contact_range).clamp(0.0, 1.0)
                    }
                }
            }
        })
        .sum();
    let terminal = states.last().expect("non-empty trajectory").object_position;
    let dist_mm = match metric {
        GoalDistanceMetric::Horizontal => (goal.x - terminal.x).abs(),
        GoalDistanceMetric::Euclidean => goal.distance(terminal),
        GoalDistanceMetric::Weighted => {
            // push direction: from the configured start toward the goal
            let sign = (goal.x - world.object.start_position[0]).signum();
            let along = (terminal.x - goal.x) * sign;
            let horizontal = if along > 0.0 {
                params.overshoot_weight * along
            } else {
                -along
            };
            horizontal + params.vertical_weight * (goal.y - terminal.y).abs()
        }
    };
    params.a1 * contact_penalty + params.a2 * dist_mm / 1000.0
}

/// Per brake configuration, `num_rollouts / 9` sequences: the unperturbed
/// nominal plus Gaussian perturbations of it, clamped to the joint limits.
pub fn sample_sequences<R: Rng>(
    ctrl: &ControllerState,
    world: &World,
    params: &MppiParams,
    rng: &mut R,
) -> Vec<ActionSequence> {
    let per_config = params.num_rollouts / NUM_BRAKE_CONFIGS;
    let coarse = Normal::new(0.0, params.motor_noise_sigma).expect("sigma >= 0");
    let fine = Normal::new(0.0, params.motor_noise_sigma * params.fine_noise_scale)
        .expect("sigma >= 0");
    let lo = world.hand.joint_limit_low;
    let hi = world.hand.joint_limit_high;
    let mut out = Vec::with_capacity(params.num_rollouts);
    for nominal in &ctrl.nominal {
        out.push(nominal.clone());
        for k in 1..per_config {
            // alternate coarse exploration with fine refinement samples;
            // coarse samples add a per-sequence bias held across the whole
            // horizon (a "move there and hold" reach primitive) so that
            // multi-step maneuvers away from the nominal are actually
            // representable, not washed out by independent per-step noise
            let gauss = if k % 2 == 0 { &fine } else { &coarse };
            let bias = if k % 2 == 0 {
                [0.0, 0.0]
            } else {
                [coarse.sample(rng), coarse.sample(rng)]
            };
            let motors = nominal
                .motors
                .iter()
                .map(|&[l, r]| {
                    [
                        (l + bias[0] + gauss.sample(rng)).clamp(lo, hi),
                        (r + bias[1] + gauss.sample(rng)).clamp(lo, hi),
                    ]
                })
                .collect();
            out.push(ActionSequence {
                brake: nominal.brake,
                motors,
            });
        }
    }
    out
}

/// Roll one sequence through the simulator and return its cost.
fn rollout_cost(
    world: &World,
    start: &WorldState,
    seq: &ActionSequence,
    dt: f64,
    params: &MppiParams,
    goal: Vec2,
    metric: GoalDistanceMetric,
) -> f64 {
    let mut states = Vec::with_capacity(seq.motors.len() + 1);
    states.push(*start);
    let mut s = *start;
    for &motors in &seq.motors {
        let action = HybridAction {
            motors,
            brakes: seq.brake,
        };
        s = world.step(&s, &action, dt).expect("sampled commands are clamped");
        states.push(s);
    }
    trajectory_cost(&states, world, params, goal, metric)
}

/// Costs of all sequences, rolled out independently in parallel.
pub fn rollout_batch(
    world: &World,
    start: &WorldState,
    sequences: &[ActionSequence],
    dt: f64,
    params: &MppiParams,
    goal: Vec2,
    metric: GoalDistanceMetric,
) -> Vec<f64> {
    sequences
        .par_iter()
        .map(|seq| rollout_cost(world, start, seq, dt, params, goal, metric))
        .collect()
}

/// Softmin weights over costs: w_k proportional to exp(-(J_k - min J) / lambda).
pub fn softmin_weights(costs: &[f64], lambda: f64) -> Vec<f64> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = costs.iter().map(|&c| (-(c - min) / lambda).exp()).collect();
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Cost-weighted average of same-brake sequences.
pub fn mppi_average(sequences: &[ActionSequence], costs: &[f64], lambda: f64) -> ActionSequence {
    assert!(!sequences.is_empty());
    assert_eq!(sequences.len(), costs.len());
    let brake = sequences[0].brake;
    debug_assert!(sequences.iter().all(|s| s.brake == brake));
    let w = softmin_weights(costs, lambda);
    let horizon = sequences[0].motors.len();
    let mut motors = vec![[0.0; 2]; horizon];
    for (seq, &wk) in sequences.iter().zip(w.iter()) {
        for (step, &[l, r]) in seq.motors.iter().enumerate() {
            motors[step][0] += wk * l;
            motors[step][1] += wk * r;
        }
    }
    // pin each slot to the samples' hull: rounding in the weighted sum must
    // not push a command past a joint limit shared by every sample
    for (step, slot) in motors.iter_mut().enumerate() {
        for (m, value) in slot.iter_mut().enumerate() {
            let (lo, hi) = sequences
                .iter()
                .map(|s| s.motors[step][m])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            *value = value.clamp(lo, hi);
        }
    }
    ActionSequence { brake, motors }
}

/// Pick the brake configuration and action for this tick.
///
/// First tick: global minimum cost. Later ticks: switch away from the
/// active configuration only if a candidate's cost is below
/// (1 - phi) * active cost.
pub fn select_action(
    ctrl: &mut ControllerState,
    averaged: &[(ActionSequence, f64)],
    params: &MppiParams,
) -> HybridAction {
    assert_eq!(averaged.len(), NUM_BRAKE_CONFIGS);
    let argmin = averaged
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("nine configs");
    let chosen = match ctrl.active {
        None => argmin,
        Some(active) => {
            if argmin != active && averaged[argmin].1 < (1.0 - params.phi) * averaged[active].1 {
                argmin
            } else {
                active
            }
        }
    };
    ctrl.active = Some(chosen);
    ctrl.active_cost = averaged[chosen].1;
    ctrl.nominal = averaged.iter().map(|(seq, _)| seq.shifted()).collect();
    averaged[chosen].0.first_action()
}

/// One full controller tick: sample, roll out, average per configuration,
/// evaluate the averaged sequences, and select. Returns the action and the
/// per-configuration costs of the averaged sequences.
pub fn plan<R: Rng>(
    ctrl: &mut ControllerState,
    world: &World,
    planning_state: &WorldState,
    goal: Vec2,
    dt: f64,
    params: &MppiParams,
    rng: &mut R,
) -> (HybridAction, Vec<f64>) {
    let metric = params.goal_distance_metric;
    let sequences = sample_sequences(ctrl, world, params, rng);
    let costs = rollout_batch(world, planning_state, &sequences, dt, params, goal, metric);
    let per_config = params.num_rollouts / NUM_BRAKE_CONFIGS;
    let averaged: Vec<ActionSequence> = (0..NUM_BRAKE_CONFIGS)
        .map(|c| {
            let lo = c * per_config;
            let hi = lo + per_config;
            mppi_average(&sequences[lo..hi], &costs[lo..hi], params.lambda)
        })
        .collect();
    let avg_costs = rollout_batch(world, planning_state, &averaged, dt, params, goal, metric);
    let scored: Vec<(ActionSequence, f64)> = averaged
        .into_iter()
        .zip(avg_costs.iter().copied())
        .collect();
    let action = select_action(ctrl, &scored, params);
    (action, avg_costs)
}
