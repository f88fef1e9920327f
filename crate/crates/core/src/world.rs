//! Quasi-static planar simulator of the hand-cylinder system.
//!
//! No inertia, friction, or gravity: each step moves the single unbraked
//! joint of each finger toward its motor command at a rate-limited speed,
//! then projects the cylinder out of any fingertip dome it overlaps.
//! Simultaneous two-finger contact is resolved by iterating the
//! projections to convergence, which makes the cylinder slide along one
//! dome while the other pushes. Steps are pure functions of their inputs,
//! so rollouts can run on any number of threads over shared parameters.

use crate::config::{ObjectParams, SimParams};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::hand::{fingertip_frames, HandParams, JointVector, NUM_FINGERS, NUM_JOINTS};
use serde::{Deserialize, Serialize};

/// Ground-truth system state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub joints: JointVector,
    pub joint_velocities: [f64; NUM_JOINTS],
    pub object_position: Vec2,
    pub object_velocity: Vec2,
}

impl WorldState {
    pub fn at_rest(joints: JointVector, object_position: Vec2) -> Self {
        WorldState {
            joints,
            joint_velocities: [0.0; NUM_JOINTS],
            object_position,
            object_velocity: Vec2::ZERO,
        }
    }
}

/// Brake assignment: exactly one joint per finger is unbraked, so there
/// are 9 admissible configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BrakeConfig {
    /// Unbraked joint of the left finger (0-based, 0..3).
    pub free_left: usize,
    /// Unbraked joint of the right finger (0-based, 0..3).
    pub free_right: usize,
}

pub const NUM_BRAKE_CONFIGS: usize = 9;

impl BrakeConfig {
    pub fn all() -> [BrakeConfig; NUM_BRAKE_CONFIGS] {
        let mut out = [BrakeConfig {
            free_left: 0,
            free_right: 0,
        }; NUM_BRAKE_CONFIGS];
        for l in 0..3 {
            for r in 0..3 {
                out[l * 3 + r] = BrakeConfig {
                    free_left: l,
                    free_right: r,
                };
            }
        }
        out
    }

    pub fn index(&self) -> usize {
        self.free_left * 3 + self.free_right
    }

    /// Indices into the 6-joint vector of the two free joints.
    pub fn free_joint_indices(&self) -> [usize; 2] {
        [self.free_left, 3 + self.free_right]
    }
}

/// Two motor position commands plus a brake configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridAction {
    /// Commanded position of each finger's free joint (rad).
    pub motors: [f64; 2],
    pub brakes: BrakeConfig,
}

/// Read-only simulation parameters shared across rollouts.
#[derive(Clone, Debug)]
pub struct World {
    pub hand: HandParams,
    pub object: ObjectParams,
    pub sim: SimParams,
}

impl World {
    pub fn new(hand: HandParams, object: ObjectParams, sim: SimParams) -> Self {
        World { hand, object, sim }
    }

    /// Minimum center distance at which fingertip and cylinder touch.
    fn touch_distance(&self) -> f64 {
        self.hand.surface_offset + self.object.radius
    }

    /// Gap between a fingertip dome and the cylinder surface (negative on
    /// overlap).
    pub fn surface_gap(&self, arc_center: Vec2, object_position: Vec2) -> f64 {
        arc_center.distance(object_position) - self.touch_distance()
    }

    /// Project the cylinder out of both fingertip domes.
    fn resolve_contacts(&self, mut obj: Vec2, tips: &[Vec2; NUM_FINGERS]) -> Vec2 {
        let touch = self.touch_distance();
        for _ in 0..self.sim.projection_max_iterations {
            let mut moved = false;
            for &tip in tips {
                let d = obj - tip;
                let n = d.norm();
                if n < touch - self.sim.projection_tolerance {
                    // degenerate exact-center overlap: push straight up
                    let dir = if n > 1e-9 { d / n } else { Vec2::new(0.0, 1.0) };
                    obj = tip + touch * dir;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        obj
    }

    /// Advance the system by `dt` under `action`.
    pub fn step(&self, state: &WorldState, action: &HybridAction, dt: f64) -> Result<WorldState> {
        for &m in &action.motors {
            if !(self.hand.joint_limit_low..=self.hand.joint_limit_high).contains(&m) {
                return Err(Error::RejectedAction(m));
            }
        }
        let max_travel = self.sim.joint_rate_limit * dt;
        let substeps = (max_travel / self.sim.max_joint_delta_per_substep).ceil().max(1.0) as usize;
        let per_substep = max_travel / substeps as f64;

        let mut joints = state.joints;
        let mut obj = state.object_position;
        let free = action.brakes.free_joint_indices();
        for _ in 0..substeps {
            for (f, &j) in free.iter().enumerate() {
                let delta = (action.motors[f] - joints.0[j]).clamp(-per_substep, per_substep);
                joints.0[j] = (joints.0[j] + delta)
                    .clamp(self.hand.joint_limit_low, self.hand.joint_limit_high);
            }
            let tips = fingertip_frames(&joints, &self.hand);
            obj = self.resolve_contacts(obj, &[tips[0].arc_center, tips[1].arc_center]);
        }

        // carry-over: a pushed object does not stick to the pusher. Pure
        // projection would leave the cylinder exactly kissing the fingertip
        // after every push; scale the net push displacement so the object
        // separates in proportion to how hard it was shoved, then project
        // again in case the extra travel ran it into the other fingertip.
        if self.sim.push_overshoot > 1.0 {
            let disp = obj - state.object_position;
            let n = disp.norm();
            if n > 0.0 {
                let extra = ((self.sim.push_overshoot - 1.0) * n).min(self.sim.push_overshoot_cap);
                obj += (extra / n) * disp;
                let tips = fingertip_frames(&joints, &self.hand);
                obj = self.resolve_contacts(obj, &[tips[0].arc_center, tips[1].arc_center]);
            }
        }

        let mut joint_velocities = [0.0; NUM_JOINTS];
        for (v, (now, before)) in joint_velocities
            .iter_mut()
            .zip(joints.0.iter().zip(state.joints.0.iter()))
        {
            *v = (now - before) / dt;
        }
        Ok(WorldState {
            joints,
            joint_velocities,
            object_position: obj,
            object_velocity: (obj - state.object_position) / dt,
        })
    }

    /// Per-fingertip contact flags (left, right).
    pub fn detect_contacts(&self, state: &WorldState) -> [bool; NUM_FINGERS] {
        let tips = fingertip_frames(&state.joints, &self.hand);
        [
            self.surface_gap(tips[0].arc_center, state.object_position)
                <= self.sim.contact_tolerance,
            self.surface_gap(tips[1].arc_center, state.object_position)
                <= self.sim.contact_tolerance,
        ]
    }

    /// Number of fingertips not in contact (the cost indicator).
    pub fn fingertips_out_of_contact(&self, state: &WorldState) -> usize {
        self.detect_contacts(state).iter().filter(|&&c| !c).count()
    }

    /// Smallest fingertip-to-cylinder surface gap (negative on overlap).
    pub fn min_fingertip_gap(&self, state: &WorldState) -> f64 {
        let tips = fingertip_frames(&state.joints, &self.hand);
        tips.iter()
            .map(|t| self.surface_gap(t.arc_center, state.object_position))
            .fold(f64::INFINITY, f64::min)
    }

    /// Initial state: the object at its start position with both fingertips
    /// just touching it, found by bisecting a scalar flexion parameter per
    /// finger along the configured preset joint-space ray.
    ///
    /// The left pattern is swept from zero flexion to its first contact
    /// crossing; the right pattern from full flexion back to its outermost
    /// crossing (its ray passes through the object region), which lands the
    /// fingertip on the far side of the cylinder where it can push toward
    /// the goal.
    pub fn preset_contact_pose(&self) -> Result<WorldState> {
        let start = Vec2::new(self.object.start_position[0], self.object.start_position[1]);
        let target = self.sim.preset_contact_gap;

        let gap_at = |pattern: &[f64; 3], finger: usize, t: f64| -> f64 {
            let mut q = JointVector::ZERO;
            for (k, &p) in pattern.iter().enumerate() {
                q.0[finger * 3 + k] = p * t;
            }
            let tip = fingertip_frames(&q, &self.hand)[finger].arc_center;
            self.surface_gap(tip, start)
        };

        let bisect = |pattern: &[f64; 3], finger: usize, descending: bool| -> Result<f64> {
            const GRID: usize = 200;
            let ts: Vec<f64> = (0..=GRID).map(|i| i as f64 / GRID as f64).collect();
            let order: Vec<f64> = if descending {
                ts.iter().rev().copied().collect()
            } else {
                ts
            };
            let mut prev = order[0];
            if gap_at(pattern, finger, prev) <= target {
                return Ok(prev);
            }
            let mut bracket = None;
            for &t in &order[1..] {
                if gap_at(pattern, finger, t) <= target {
                    bracket = Some((prev, t));
                    break;
                }
                prev = t;
            }
            let (mut lo, mut hi) = bracket.ok_or_else(|| {
                Error::Unreachable(format!(
                    "finger {finger}: no contact along preset pattern {pattern:?}"
                ))
            })?;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if gap_at(pattern, finger, mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(hi)
        };

        let tl = bisect(&self.sim.preset_pattern_left, 0, false)?;
        let tr = bisect(&self.sim.preset_pattern_right, 1, true)?;
        let mut joints = JointVector::ZERO;
        for k in 0..3 {
            joints.0[k] = self.sim.preset_pattern_left[k] * tl;
            joints.0[3 + k] = self.sim.preset_pattern_right[k] * tr;
        }
        if !joints.within_limits(&self.hand, 1e-12) {
            return Err(Error::Unreachable("preset joints exceed limits".into()));
        }
        let state = WorldState::at_rest(joints, start);
        let contacts = self.detect_contacts(&state);
        if !(contacts[0] && contacts[1]) {
            return Err(Error::Unreachable(format!(
                "preset bisection did not reach dual contact (flags {contacts:?})"
            )));
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::fingertip_frames;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn world() -> World {
        World::new(
            HandParams::default(),
            ObjectParams::default(),
            SimParams::default(),
        )
    }

    fn far_state(joints: JointVector) -> WorldState {
        WorldState::at_rest(joints, Vec2::new(1e6, 1e6))
    }

    #[test]
    fn holding_position_is_a_fixed_point() {
        let w = world();
        let joints = JointVector([0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
        let state = far_state(joints);
        let action = HybridAction {
            motors: [0.2, 0.5],
            brakes: BrakeConfig {
                free_left: 0,
                free_right: 0,
            },
        };
        let next = w.step(&state, &action, 0.2).unwrap();
        assert_eq!(next.joints, state.joints);
        assert_eq!(next.object_position, state.object_position);
        assert_eq!(next.joint_velocities, [0.0; 6]);
        assert_eq!(next.object_velocity, Vec2::ZERO);
    }

    #[test]
    fn braked_joints_never_move() {
        let w = world();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let joints = JointVector(std::array::from_fn(|_| rng.gen_range(0.0..1.5)));
            let state = far_state(joints);
            let action = HybridAction {
                motors: [rng.gen_range(0.0..1.5), rng.gen_range(0.0..1.5)],
                brakes: BrakeConfig {
                    free_left: rng.gen_range(0..3),
                    free_right: rng.gen_range(0..3),
                },
            };
            let next = w.step(&state, &action, 0.2).unwrap();
            for j in 0..6 {
                if !action.brakes.free_joint_indices().contains(&j) {
                    assert_eq!(next.joints.0[j], state.joints.0[j], "joint {j} moved");
                }
            }
        }
    }

    #[test]
    fn out_of_range_motor_rejected() {
        let w = world();
        let state = far_state(JointVector::ZERO);
        let action = HybridAction {
            motors: [2.0, 0.0],
            brakes: BrakeConfig {
                free_left: 0,
                free_right: 0,
            },
        };
        assert!(matches!(
            w.step(&state, &action, 0.2),
            Err(Error::RejectedAction(_))
        ));
    }

    #[test]
    fn push_matches_fine_substep_oracle() {
        let mut w = world();
        // the substep-invariance property holds for pure projection; the
        // carry-over term is deliberately applied once per control step
        w.sim.push_overshoot = 1.0;
        // left finger sweeping its proximal joint into a cylinder placed on
        // the fingertip's instantaneous path
        let joints = JointVector([0.6, 0.2, 0.1, 0.0, 0.0, 0.0]);
        let tip0 = fingertip_frames(&joints, &w.hand)[0].arc_center;
        let base = w.hand.base_positions[0];
        let rel = tip0 - base;
        // clockwise tangent of the proximal sweep
        let tangent = Vec2::new(rel.y, -rel.x).normalized();
        let obj = tip0 + (w.hand.surface_offset + w.object.radius - 0.05) * tangent;
        let state = WorldState::at_rest(joints, obj);
        let action = HybridAction {
            motors: [0.9, 0.0],
            brakes: BrakeConfig {
                free_left: 0,
                free_right: 0,
            },
        };
        let coarse = w.step(&state, &action, 0.2).unwrap();
        let mut fine = state;
        for _ in 0..100 {
            fine = w.step(&fine, &action, 0.2 / 100.0).unwrap();
        }
        let moved = coarse.object_position.distance(state.object_position);
        assert!(moved > 5.0, "cylinder should have been pushed, moved {moved}");
        assert!(
            coarse
                .object_position
                .distance(fine.object_position)
                < 0.25,
            "coarse {:?} vs fine {:?}",
            coarse.object_position,
            fine.object_position
        );
    }

    #[test]
    fn detect_contacts_trivial_cases() {
        let w = world();
        let joints = JointVector::ZERO;
        assert_eq!(w.detect_contacts(&far_state(joints)), [false, false]);
        // cylinder center exactly 55 mm from the left arc center
        let tip = fingertip_frames(&joints, &w.hand)[0].arc_center;
        let state = WorldState::at_rest(joints, tip + Vec2::new(55.0, 0.0));
        assert!(w.detect_contacts(&state)[0]);
    }

    #[test]
    fn detect_contacts_matches_surface_distance_composition() {
        let w = world();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let joints = JointVector(std::array::from_fn(|_| rng.gen_range(0.0..1.5)));
            let obj = Vec2::new(rng.gen_range(-150.0..150.0), rng.gen_range(-50.0..200.0));
            let state = WorldState::at_rest(joints, obj);
            let tips = fingertip_frames(&joints, &w.hand);
            let flags = w.detect_contacts(&state);
            for f in 0..2 {
                let gap = obj.distance(tips[f].arc_center)
                    - w.hand.surface_offset
                    - w.object.radius;
                assert_eq!(flags[f], gap <= w.sim.contact_tolerance);
            }
        }
    }

    #[test]
    fn rollouts_are_bitwise_deterministic() {
        let w = world();
        let start = w.preset_contact_pose().unwrap();
        let action = HybridAction {
            motors: [1.2, 0.9],
            brakes: BrakeConfig {
                free_left: 1,
                free_right: 0,
            },
        };
        let run = || {
            let mut s = start;
            for _ in 0..1000 {
                s = w.step(&s, &action, 0.2).unwrap();
            }
            s
        };
        let a = run();
        let b = run();
        assert_eq!(a.object_position.x.to_bits(), b.object_position.x.to_bits());
        assert_eq!(a.object_position.y.to_bits(), b.object_position.y.to_bits());
        for j in 0..6 {
            assert_eq!(a.joints.0[j].to_bits(), b.joints.0[j].to_bits());
        }
    }

    #[test]
    fn no_penetration_after_random_action_sequences() {
        let w = world();
        let mut rng = StdRng::seed_from_u64(42);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let mut state = w.preset_contact_pose().unwrap();
            for _ in 0..50 {
                let action = HybridAction {
                    motors: [rng.gen_range(0.0..1.5), rng.gen_range(0.0..1.5)],
                    brakes: BrakeConfig {
                        free_left: rng.gen_range(0..3),
                        free_right: rng.gen_range(0..3),
                    },
                };
                state = w.step(&state, &action, 0.2).unwrap();
                let tips = fingertip_frames(&state.joints, &w.hand);
                for t in tips {
                    let overlap = -w.surface_gap(t.arc_center, state.object_position);
                    worst = worst.max(overlap);
                }
            }
        }
        assert!(worst <= 0.1, "max penetration {worst} mm");
    }

    #[test]
    fn preset_pose_contacts_and_position() {
        let w = world();
        let state = w.preset_contact_pose().unwrap();
        assert_eq!(w.detect_contacts(&state), [true, true]);
        assert_eq!(state.object_position, Vec2::new(-45.0, 45.0));
        assert!(state.joints.within_limits(&w.hand, 0.0));
    }

    #[test]
    fn preset_unreachable_for_distant_object() {
        let mut w = world();
        w.object.start_position = [-400.0, 400.0];
        assert!(matches!(
            w.preset_contact_pose(),
            Err(Error::Unreachable(_))
        ));
    }

    #[test]
    fn brake_configs_enumerate_nine() {
        let all = BrakeConfig::all();
        assert_eq!(all.len(), 9);
        for (i, b) in all.iter().enumerate() {
            assert_eq!(b.index(), i);
        }
    }
}
