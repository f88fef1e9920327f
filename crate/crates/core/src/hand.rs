//! Planar forward kinematics of the two-fingered hand.
//!
//! Each finger is a serial chain of three revolute joints with joint limits
//! [0, 90°]. Flexion curls the finger toward the hand's bisecting line
//! (x = 0): the left finger rotates clockwise, the right counter-clockwise,
//! so the two fingers are exact mirror images for mirrored joint vectors.
//!
//! The fingertip carries four range sensors on a 15 mm arc at 25° spacing,
//! pointing radially outward, and a contact dome modeled as a disk of the
//! same radius about the arc center. The sensed sector sits on the inner
//! (palmar) face of the curled fingertip — opposite the distal heading —
//! which is the side that faces the object during manipulation.

use crate::geom::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

pub const NUM_FINGERS: usize = 2;
pub const JOINTS_PER_FINGER: usize = 3;
pub const NUM_JOINTS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Finger {
    Left,
    Right,
}

impl Finger {
    pub const BOTH: [Finger; 2] = [Finger::Left, Finger::Right];

    pub fn index(self) -> usize {
        match self {
            Finger::Left => 0,
            Finger::Right => 1,
        }
    }

    /// Sign of heading change per unit flexion: the left finger curls
    /// clockwise (toward +x), the right counter-clockwise (toward -x).
    pub fn flexion_sign(self) -> f64 {
        match self {
            Finger::Left => -1.0,
            Finger::Right => 1.0,
        }
    }
}

/// Geometry of the hand. All lengths in mm, angles in radians.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HandParams {
    /// Length of each of the three links, identical for both fingers.
    pub link_lengths: [f64; 3],
    /// Proximal-joint position per finger (left, right).
    pub base_positions: [Vec2; 2],
    /// Heading of the first link at zero flexion, per finger.
    pub base_orientations: [f64; 2],
    pub fingertip_arc_radius: f64,
    pub sensor_count_per_tip: usize,
    pub sensor_angular_spacing: f64,
    /// Angle from the fingertip heading to the center of the sensed sector.
    /// Must be 0 or π for exact left/right mirror symmetry; π puts the
    /// sensors on the palmar face of the tip.
    pub sensor_sector_offset: f64,
    pub sensor_range_min: f64,
    pub sensor_range_max: f64,
    /// Distance from the sensors to the fingertip contact surface; the
    /// contact dome is a disk of this radius about the arc center.
    pub surface_offset: f64,
    pub joint_limit_low: f64,
    pub joint_limit_high: f64,
}

impl Default for HandParams {
    fn default() -> Self {
        HandParams {
            link_lengths: [50.0, 50.0, 50.0],
            base_positions: [Vec2::new(-60.0, 0.0), Vec2::new(60.0, 0.0)],
            base_orientations: [FRAC_PI_2, FRAC_PI_2],
            fingertip_arc_radius: 15.0,
            sensor_count_per_tip: 4,
            sensor_angular_spacing: 25.0_f64.to_radians(),
            sensor_sector_offset: std::f64::consts::PI,
            sensor_range_min: 10.0,
            sensor_range_max: 255.0,
            surface_offset: 15.0,
            joint_limit_low: 0.0,
            joint_limit_high: FRAC_PI_2,
        }
    }
}

impl HandParams {
    pub fn total_sensors(&self) -> usize {
        NUM_FINGERS * self.sensor_count_per_tip
    }

    pub fn total_link_length(&self) -> f64 {
        self.link_lengths.iter().sum()
    }
}

/// Six joint angles, left finger joints 1-3 then right finger joints 1-3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointVector(pub [f64; NUM_JOINTS]);

impl JointVector {
    pub const ZERO: JointVector = JointVector([0.0; NUM_JOINTS]);

    pub fn finger(&self, finger: Finger) -> [f64; JOINTS_PER_FINGER] {
        let o = finger.index() * JOINTS_PER_FINGER;
        [self.0[o], self.0[o + 1], self.0[o + 2]]
    }

    /// Swap the finger blocks: the joint vector of the mirrored hand pose.
    pub fn mirrored(&self) -> JointVector {
        let a = self.0;
        JointVector([a[3], a[4], a[5], a[0], a[1], a[2]])
    }

    pub fn clamped(&self, params: &HandParams) -> JointVector {
        let mut q = *self;
        for a in q.0.iter_mut() {
            *a = a.clamp(params.joint_limit_low, params.joint_limit_high);
        }
        q
    }

    pub fn within_limits(&self, params: &HandParams, tol: f64) -> bool {
        self.0
            .iter()
            .all(|&a| a >= params.joint_limit_low - tol && a <= params.joint_limit_high + tol)
    }
}

/// Pose of one fingertip: arc center and heading of the distal link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingertipFrame {
    pub arc_center: Vec2,
    pub heading: f64,
}

/// One finger's kinematic chain: joint positions base..tip plus tip frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerChain {
    /// Base, then the endpoint of each link (4 points).
    pub points: [Vec2; JOINTS_PER_FINGER + 1],
    pub tip: FingertipFrame,
}

/// Origin and unit direction of one sensor beam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub origin: Vec2,
    pub direction: Vec2,
}

/// Forward kinematics of one finger.
pub fn finger_chain(joints: &JointVector, finger: Finger, params: &HandParams) -> FingerChain {
    let q = joints.finger(finger);
    let sign = finger.flexion_sign();
    let mut heading = params.base_orientations[finger.index()];
    let mut p = params.base_positions[finger.index()];
    let mut points = [p; JOINTS_PER_FINGER + 1];
    for (k, &len) in params.link_lengths.iter().enumerate() {
        heading += sign * q[k];
        p += len * Vec2::from_angle(heading);
        points[k + 1] = p;
    }
    FingerChain {
        points,
        tip: FingertipFrame {
            arc_center: p,
            heading,
        },
    }
}

/// Forward kinematics of both fingers.
pub fn forward_kinematics(joints: &JointVector, params: &HandParams) -> [FingerChain; NUM_FINGERS] {
    [
        finger_chain(joints, Finger::Left, params),
        finger_chain(joints, Finger::Right, params),
    ]
}

pub fn fingertip_frames(joints: &JointVector, params: &HandParams) -> [FingertipFrame; NUM_FINGERS] {
    let chains = forward_kinematics(joints, params);
    [chains[0].tip, chains[1].tip]
}

/// Sensor frames for both fingertips, left sensors 1-4 then right 1-4.
///
/// The arc is centered symmetrically on the sensed-sector axis (fingertip
/// heading plus `sensor_sector_offset`; offsets ±12.5°, ±37.5° about it),
/// origins on the arc, directions radially outward.
pub fn sensor_frames(joints: &JointVector, params: &HandParams) -> Vec<SensorFrame> {
    let tips = fingertip_frames(joints, params);
    let n = params.sensor_count_per_tip;
    let mut frames = Vec::with_capacity(NUM_FINGERS * n);
    for tip in tips {
        let axis = tip.heading + params.sensor_sector_offset;
        for k in 0..n {
            let offset = (k as f64 - (n as f64 - 1.0) / 2.0) * params.sensor_angular_spacing;
            let radial = Vec2::from_angle(axis + offset);
            frames.push(SensorFrame {
                origin: tip.arc_center + params.fingertip_arc_radius * radial,
                direction: radial,
            });
        }
    }
    frames
}

/// Signed distance from `point` to the nearest fingertip contact surface:
/// negative inside a fingertip dome, zero on it, positive outside.
pub fn fingertip_surface_distance(point: Vec2, joints: &JointVector, params: &HandParams) -> f64 {
    fingertip_frames(joints, params)
        .iter()
        .map(|tip| point.distance(tip.arc_center) - params.surface_offset)
        .fold(f64::INFINITY, f64::min)
}
