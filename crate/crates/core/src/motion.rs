//! Straight-line Cartesian timing model.
//!
//! All three linear axes and the wrist move simultaneously, so the duration
//! of a move is governed by the slowest axis. There is no acceleration
//! model; `misc_overhead` absorbs settling and approach time per attempt.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::world::Tool;

const WORKSPACE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("pose {position:?} lies outside the workspace {workspace:?}")]
    OutsideWorkspace {
        position: [f64; 3],
        workspace: [f64; 3],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionParams {
    /// Extent of the gantry workspace (metres), origin at one corner.
    pub workspace_m: [f64; 3],
    /// m/s under load.
    pub v_linear: f64,
    /// rad/s under load.
    pub v_angular: f64,
    /// Planner overhead added to every move (s).
    pub plan_time: f64,
    /// Wrist rotation performed by a tool change (rad).
    pub tool_change_angle: f64,
    /// Capture plus segmentation time per image (s).
    pub perception_time: f64,
    /// Fixed per-attempt overhead (s).
    pub misc_overhead: f64,
    /// Time spent sealing or closing on an item per grasp probe (s).
    pub grasp_dwell: f64,
    /// Time to release an item (s).
    pub place_dwell: f64,
    /// Scale settling time before a reading is trusted (s).
    pub scale_settle: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            workspace_m: [1.0, 1.0, 0.9],
            v_linear: 1.0,
            v_angular: 1.0,
            plan_time: 0.02,
            tool_change_angle: std::f64::consts::PI,
            perception_time: 3.0,
            misc_overhead: 13.5,
            grasp_dwell: 2.0,
            place_dwell: 1.5,
            scale_settle: 1.5,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.workspace_m.iter().any(|w| !(*w > 0.0)) {
            problems.push("motion.workspace_m must be positive on every axis".into());
        }
        if !(self.v_linear > 0.0) || !(self.v_angular > 0.0) {
            problems.push("motion velocities must be positive".into());
        }
        for (name, v) in [
            ("motion.plan_time", self.plan_time),
            ("motion.tool_change_angle", self.tool_change_angle),
            ("motion.perception_time", self.perception_time),
            ("motion.misc_overhead", self.misc_overhead),
            ("motion.grasp_dwell", self.grasp_dwell),
            ("motion.place_dwell", self.place_dwell),
            ("motion.scale_settle", self.scale_settle),
        ] {
            if !(v >= 0.0) {
                problems.push(format!("{name} must be non-negative"));
            }
        }
        problems
    }

    pub fn check_pose(&self, pose: &Pose) -> Result<(), MotionError> {
        let inside = pose
            .position
            .iter()
            .zip(self.workspace_m.iter())
            .all(|(p, w)| *p >= -WORKSPACE_EPS && *p <= w + WORKSPACE_EPS);
        if inside {
            Ok(())
        } else {
            Err(MotionError::OutsideWorkspace {
                position: pose.position,
                workspace: self.workspace_m,
            })
        }
    }
}

/// Duration of a straight-line move between two wrist poses.
pub fn move_time(from: &Pose, to: &Pose, params: &MotionParams) -> Result<f64, MotionError> {
    params.check_pose(from)?;
    params.check_pose(to)?;
    let linear = from
        .position
        .iter()
        .zip(to.position.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max)
        / params.v_linear;
    let angular = (from.yaw - to.yaw).abs() / params.v_angular;
    Ok(params.plan_time + linear.max(angular))
}

/// Duration of the 180-degree tool swap.
pub fn tool_change_time(params: &MotionParams) -> f64 {
    params.tool_change_angle / params.v_angular
}

/// Cost of switching from the active tool to `wanted`; zero for a no-op.
pub fn tool_switch_time(active: Tool, wanted: Tool, params: &MotionParams) -> f64 {
    if active == wanted {
        0.0
    } else {
        tool_change_time(params)
    }
}

/// One timed step inside a grasp attempt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MotionAction {
    Move { from: Pose, to: Pose },
    Perceive,
    ToolChange,
    Dwell(f64),
}

pub fn action_time(action: &MotionAction, params: &MotionParams) -> Result<f64, MotionError> {
    match action {
        MotionAction::Move { from, to } => move_time(from, to, params),
        MotionAction::Perceive => Ok(params.perception_time),
        MotionAction::ToolChange => Ok(tool_change_time(params)),
        MotionAction::Dwell(seconds) => Ok(seconds.max(0.0)),
    }
}

/// Total duration of one attempt's action sequence plus the per-attempt
/// overhead.
pub fn attempt_cycle_time(actions: &[MotionAction], params: &MotionParams) -> Result<f64, MotionError> {
    actions
        .iter()
        .try_fold(params.misc_overhead, |acc, a| Ok(acc + action_time(a, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pose(x: f64, y: f64, z: f64, yaw: f64) -> Pose {
        Pose::new([x, y, z], yaw)
    }

    #[test]
    fn half_metre_move() {
        let p = MotionParams::default();
        let t = move_time(&pose(0.0, 0.0, 0.0, 0.0), &pose(0.5, 0.0, 0.0, 0.0), &p).unwrap();
        assert!((t - 0.52).abs() < 1e-12);
    }

    #[test]
    fn zero_move_costs_planning_only() {
        let p = MotionParams::default();
        let a = pose(0.3, 0.3, 0.3, 0.1);
        assert!((move_time(&a, &a, &p).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn rotation_dominates() {
        let p = MotionParams::default();
        let t = move_time(&pose(0.0, 0.0, 0.0, 0.0), &pose(0.3, 0.4, 0.2, 0.6), &p).unwrap();
        assert!((t - 0.62).abs() < 1e-12);
    }

    #[test]
    fn outside_workspace_is_rejected() {
        let p = MotionParams::default();
        let err = move_time(&pose(0.0, 0.0, 0.0, 0.0), &pose(0.5, 1.2, 0.0, 0.0), &p);
        assert!(matches!(err, Err(MotionError::OutsideWorkspace { .. })));
        assert!(move_time(&pose(0.0, 0.0, 0.95, 0.0), &pose(0.0, 0.0, 0.0, 0.0), &p).is_err());
    }

    #[test]
    fn tool_change_durations() {
        let mut p = MotionParams::default();
        assert!((tool_change_time(&p) - 3.1416).abs() < 1e-3);
        assert_eq!(tool_switch_time(Tool::Suction, Tool::Suction, &p), 0.0);
        p.v_angular = 2.0;
        assert!((tool_change_time(&p) - 1.5708).abs() < 1e-4);
    }

    #[test]
    fn empty_cycle_is_overhead() {
        let p = MotionParams::default();
        assert_eq!(attempt_cycle_time(&[], &p).unwrap(), p.misc_overhead);
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=0.9f64, -3.2..3.2f64)
            .prop_map(|(x, y, z, yaw)| pose(x, y, z, yaw))
    }

    proptest! {
        #[test]
        fn metric_properties(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let p = MotionParams::default();
            let ab = move_time(&a, &b, &p).unwrap();
            let ba = move_time(&b, &a, &p).unwrap();
            let bc = move_time(&b, &c, &p).unwrap();
            let ac = move_time(&a, &c, &p).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= p.plan_time);
            prop_assert!(ac <= ab + bc - p.plan_time + 1e-12);
        }

        #[test]
        fn cycle_is_additive(split in 0usize..5, poses in proptest::collection::vec(arb_pose(), 6)) {
            let p = MotionParams::default();
            let mut actions: Vec<MotionAction> = poses
                .windows(2)
                .map(|w| MotionAction::Move { from: w[0], to: w[1] })
                .collect();
            actions.push(MotionAction::Perceive);
            actions.push(MotionAction::Dwell(1.25));
            let split = split.min(actions.len());
            let (a, b) = actions.split_at(split);
            let whole = attempt_cycle_time(&actions, &p).unwrap();
            let parts = attempt_cycle_time(a, &p).unwrap() + attempt_cycle_time(b, &p).unwrap() - p.misc_overhead;
            prop_assert!((whole - parts).abs() < 1e-9);
        }
    }
}
