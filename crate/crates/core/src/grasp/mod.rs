//! Grasp synthesis: three strategies of decreasing precision, tried in
//! order until one yields a valid grasp.
//!
//! * surface-normals ranks every grid point of the depth-valid cloud by
//!   boundary distance and flatness, minus rim-depth and wall-approach
//!   penalties, and keeps up to three spatially diverse candidates;
//! * centroid grasps the mean of the depth-valid points from above;
//! * rgb-centroid descends vertically over the colour segment's centre until
//!   contact is sensed, and needs no depth at all.

mod pca;
mod scoring;
mod surface;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pca::{pose_pca, PoseEstimate, ISOTROPY_RATIO};
pub use scoring::{
    base_score, height_penalty, penalised_score, rank, score_candidates, select_diverse, wall_angle_penalty,
};
pub use surface::{boundary_distance_norm, curvature_score, SurfaceAnalysis};

use crate::geometry::CELL_PITCH;
use crate::perception::SegmentPercept;
use crate::world::{Container, ItemSpec, Tool};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    SurfaceNormals,
    Centroid,
    RgbCentroid,
}

impl Strategy {
    pub const CHAIN: [Strategy; 3] = [Strategy::SurfaceNormals, Strategy::Centroid, Strategy::RgbCentroid];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SurfaceNormals => "surface-normals",
            Strategy::Centroid => "centroid",
            Strategy::RgbCentroid => "rgb-centroid",
        }
    }
}

/// Reasons a strategy cannot produce a grasp; each one hands over to the
/// next strategy in the chain.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum GraspError {
    #[error("{have} depth-valid points, need at least {need}")]
    TooFewPoints { have: usize, need: usize },
    #[error("segment has no boundary points")]
    NoBoundary,
    #[error("every point lies on the segment boundary")]
    AllBoundary,
    #[error("neighbourhood has fewer than four points")]
    DegenerateNeighborhood,
    #[error("no candidate survived scoring")]
    NoValidCandidates,
    #[error("segment has no depth-valid points")]
    NoDepth,
    #[error("point cloud centroid does not lie on the segment")]
    CentroidOffSegment,
    #[error("pose estimation needs two distinct points")]
    TooFewDistinctPoints,
    #[error("query point is not part of the segment")]
    PointNotInSegment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraspScoringParams {
    pub w_boundary: f64,
    pub w_curvature: f64,
    pub penalty_cap: f64,
    pub height_penalty_max: f64,
    pub wall_angle_penalty_max: f64,
    /// Tilt from vertical at which an approach counts as angled (degrees).
    pub wall_angle_threshold_deg: f64,
    pub diversity_min_dist_m: f64,
    pub min_valid_points: usize,
    pub neighborhood_radius_m: f64,
    /// Angular coverage below which a point is on the boundary (degrees).
    pub boundary_coverage_deg: f64,
    pub candidate_pitch_m: f64,
    pub max_candidates: usize,
}

impl Default for GraspScoringParams {
    fn default() -> Self {
        Self {
            w_boundary: 0.75,
            w_curvature: 0.25,
            penalty_cap: 0.20,
            height_penalty_max: 0.10,
            wall_angle_penalty_max: 0.10,
            wall_angle_threshold_deg: 20.0,
            diversity_min_dist_m: 0.025,
            min_valid_points: 10,
            neighborhood_radius_m: 0.010,
            boundary_coverage_deg: 270.0,
            candidate_pitch_m: 0.005,
            max_candidates: 3,
        }
    }
}

impl GraspScoringParams {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if (self.w_boundary + self.w_curvature - 1.0).abs() > 1e-9 {
            problems.push(format!(
                "grasp.w_boundary + grasp.w_curvature must equal 1 (got {})",
                self.w_boundary + self.w_curvature
            ));
        }
        if self.w_boundary < 0.0 || self.w_curvature < 0.0 {
            problems.push("grasp weights must be non-negative".into());
        }
        if self.height_penalty_max < 0.0 || self.wall_angle_penalty_max < 0.0 {
            problems.push("grasp penalties must be non-negative".into());
        }
        if self.height_penalty_max + self.wall_angle_penalty_max > self.penalty_cap + 1e-12 {
            problems.push(format!(
                "grasp.height_penalty_max + grasp.wall_angle_penalty_max = {} exceeds grasp.penalty_cap = {}",
                self.height_penalty_max + self.wall_angle_penalty_max,
                self.penalty_cap
            ));
        }
        for (name, v) in [
            ("grasp.diversity_min_dist_m", self.diversity_min_dist_m),
            ("grasp.neighborhood_radius_m", self.neighborhood_radius_m),
            ("grasp.candidate_pitch_m", self.candidate_pitch_m),
        ] {
            if !(v > 0.0) {
                problems.push(format!("{name} must be positive"));
            }
        }
        if self.max_candidates == 0 {
            problems.push("grasp.max_candidates must be at least 1".into());
        }
        problems
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub position: [f64; 3],
    /// Unit direction in which the tool travels onto the item.
    pub approach: [f64; 3],
    pub tool: Tool,
    pub score: f64,
    /// Score before penalties.
    pub base_score: f64,
    pub strategy: Strategy,
    /// Wrist yaw for antipodal gripping; `None` for suction.
    pub gripper_yaw: Option<f64>,
    /// Descend vertically until the scales or vacuum switch report contact.
    pub descend_until_contact: bool,
}

const DOWN: [f64; 3] = [0.0, 0.0, -1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct GraspPlan {
    pub strategy: Strategy,
    pub tool: Tool,
    /// At most `max_candidates`, best first.
    pub candidates: Vec<GraspCandidate>,
    pub pose: Option<PoseEstimate>,
    /// Strategies skipped on the way, with the reason.
    pub fallbacks: Vec<(Strategy, GraspError)>,
}

/// Single vertical grasp at the mean of the depth-valid points.
pub fn centroid_grasp(points: &[[f64; 3]], tool: Tool) -> Result<GraspCandidate, GraspError> {
    if points.is_empty() {
        return Err(GraspError::NoDepth);
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    Ok(GraspCandidate {
        position: mean,
        approach: DOWN,
        tool,
        score: 1.0,
        base_score: 1.0,
        strategy: Strategy::Centroid,
        gripper_yaw: None,
        descend_until_contact: false,
    })
}

/// Vertical grasp above the colour segment's centre, starting at the
/// container rim and descending until contact.
pub fn rgb_centroid_grasp(percept: &SegmentPercept, container: &Container, tool: Tool) -> GraspCandidate {
    let c = percept.centroid_rgb;
    GraspCandidate {
        position: [c[0], c[1], container.top_z()],
        approach: DOWN,
        tool,
        score: 1.0,
        base_score: 1.0,
        strategy: Strategy::RgbCentroid,
        gripper_yaw: None,
        descend_until_contact: true,
    }
}

fn run_strategy(
    strategy: Strategy,
    percept: &SegmentPercept,
    valid: &[[f64; 3]],
    container: &Container,
    tool: Tool,
    params: &GraspScoringParams,
) -> Result<Vec<GraspCandidate>, GraspError> {
    match strategy {
        Strategy::SurfaceNormals => {
            let ranked = score_candidates(valid, container, tool, params)?;
            Ok(select_diverse(&ranked, params.max_candidates, params.diversity_min_dist_m))
        }
        Strategy::Centroid => {
            let candidate = centroid_grasp(valid, tool)?;
            // A centroid that falls in a gap of the cloud would grasp
            // whatever lies there instead.
            let reach = params.candidate_pitch_m.max(CELL_PITCH) * 1.5;
            let on_segment = valid.iter().any(|p| {
                (p[0] - candidate.position[0]).hypot(p[1] - candidate.position[1]) <= reach
            });
            if on_segment {
                Ok(vec![candidate])
            } else {
                Err(GraspError::CentroidOffSegment)
            }
        }
        Strategy::RgbCentroid => Ok(vec![rgb_centroid_grasp(percept, container, tool)]),
    }
}

/// Runs the strategy chain for one percept, starting at the item's forced
/// strategy when one is set. Never fails: rgb-centroid always applies.
pub fn synthesize(
    percept: &SegmentPercept,
    container: &Container,
    item: &ItemSpec,
    params: &GraspScoringParams,
) -> GraspPlan {
    let tool = item.preferred_tool;
    let valid: Vec<[f64; 3]> = percept
        .points
        .iter()
        .filter(|p| p.depth_valid)
        .map(|p| p.position)
        .collect();
    let planar: Vec<[f64; 2]> = percept.points.iter().map(|p| [p.position[0], p.position[1]]).collect();
    let pose = pose_pca(&planar).ok();
    let start = item
        .forced_strategy
        .and_then(|s| Strategy::CHAIN.iter().position(|c| *c == s))
        .unwrap_or(0);
    let mut fallbacks = Vec::new();
    for strategy in &Strategy::CHAIN[start..] {
        match run_strategy(*strategy, percept, &valid, container, tool, params) {
            Ok(mut candidates) => {
                if tool == Tool::Gripper {
                    let yaw = pose.map_or(0.0, |p| p.yaw);
                    for c in &mut candidates {
                        c.gripper_yaw = Some(yaw);
                    }
                }
                return GraspPlan {
                    strategy: *strategy,
                    tool,
                    candidates,
                    pose,
                    fallbacks,
                };
            }
            Err(e) => fallbacks.push((*strategy, e)),
        }
    }
    unreachable!("rgb-centroid always yields a candidate")
}

#[cfg(test)]
mod tests;
