use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::surface::SurfaceAnalysis;
use super::{GraspCandidate, GraspError, GraspScoringParams, Strategy};
use crate::world::{Container, Tool};

/// Unpenalised score from the two heuristics.
pub fn base_score(boundary: f64, curvature: f64, params: &GraspScoringParams) -> f64 {
    params.w_boundary * boundary + params.w_curvature * curvature
}

/// Penalty for grasping deep inside the container: linear in the depth of
/// the point below the container rim.
pub fn height_penalty(z: f64, container: &Container, params: &GraspScoringParams) -> f64 {
    let wall = container.wall_height_m();
    if wall <= 0.0 {
        return 0.0;
    }
    let depth = (container.top_z() - z).clamp(0.0, wall);
    params.height_penalty_max * depth / wall
}

/// Penalty for an approach that tilts towards the nearest container wall by
/// at least the threshold angle.
pub fn wall_angle_penalty(position: [f64; 3], normal: [f64; 3], container: &Container, params: &GraspScoringParams) -> f64 {
    let tilt = normal[2].clamp(-1.0, 1.0).acos().to_degrees();
    if tilt < params.wall_angle_threshold_deg {
        return 0.0;
    }
    let horizontal = normal[0].hypot(normal[1]);
    if horizontal <= 1e-12 {
        return 0.0;
    }
    let wall = container.interior().nearest_edge_normal(position[0], position[1]);
    let toward = (normal[0] * wall[0] + normal[1] * wall[1]) / horizontal;
    if toward > 0.0 {
        params.wall_angle_penalty_max
    } else {
        0.0
    }
}

/// Final score: base minus penalties, clipped to [0, 1].
pub fn penalised_score(base: f64, penalty: f64) -> f64 {
    (base - penalty).clamp(0.0, 1.0)
}

/// Indices of one representative point per candidate-grid cell. The grid is
/// anchored at the segment's minimum corner so the choice is invariant to
/// translation.
pub(crate) fn candidate_indices(points: &[Vector3<f64>], pitch: f64) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let min_x = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let min_y = points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let mut cells: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let key = (
            ((p.x - min_x) / pitch + 1e-6).floor() as i64,
            ((p.y - min_y) / pitch + 1e-6).floor() as i64,
        );
        cells.entry(key).or_insert(i);
    }
    let mut picked: Vec<usize> = cells.into_values().collect();
    picked.sort_unstable();
    picked
}

/// Orders candidates by descending score, then by position.
pub fn rank(candidates: &mut [GraspCandidate]) {
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.position[0].total_cmp(&b.position[0]))
            .then_with(|| a.position[1].total_cmp(&b.position[1]))
            .then_with(|| a.position[2].total_cmp(&b.position[2]))
    });
}

/// Scores every candidate-grid point of a depth-valid segment and returns
/// them ranked best first.
pub fn score_candidates(
    segment: &[[f64; 3]],
    container: &Container,
    tool: Tool,
    params: &GraspScoringParams,
) -> Result<Vec<GraspCandidate>, GraspError> {
    let analysis = SurfaceAnalysis::new(segment, params)?;
    let mut ranked: Vec<GraspCandidate> = candidate_indices(&analysis.points, params.candidate_pitch_m)
        .into_iter()
        .filter_map(|i| {
            let curvature = analysis.curvature[i]?;
            let p = analysis.points[i];
            let n = analysis.normals[i];
            let position = [p.x, p.y, p.z];
            let normal = [n.x, n.y, n.z];
            let base = base_score(analysis.boundary_distance[i], curvature, params);
            let penalty = height_penalty(p.z, container, params) + wall_angle_penalty(position, normal, container, params);
            Some(GraspCandidate {
                position,
                approach: [-n.x, -n.y, -n.z],
                tool,
                score: penalised_score(base, penalty),
                base_score: base,
                strategy: Strategy::SurfaceNormals,
                gripper_yaw: None,
                descend_until_contact: false,
            })
        })
        .collect();
    if ranked.is_empty() {
        return Err(GraspError::NoValidCandidates);
    }
    rank(&mut ranked);
    Ok(ranked)
}

/// Greedy spatially diverse subset: take the best candidate, then each next
/// one at least `min_dist` from everything already taken, up to `k`.
pub fn select_diverse(ranked: &[GraspCandidate], k: usize, min_dist: f64) -> Vec<GraspCandidate> {
    let mut chosen: Vec<GraspCandidate> = Vec::with_capacity(k);
    for candidate in ranked {
        if chosen.len() >= k {
            break;
        }
        let far = chosen.iter().all(|c| distance(c.position, candidate.position) >= min_dist);
        if far {
            chosen.push(candidate.clone());
        }
    }
    chosen
}

pub(crate) fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
