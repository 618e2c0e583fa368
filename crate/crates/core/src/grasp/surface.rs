//! Local surface analysis of a segmented point cloud.

use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{GraspError, GraspScoringParams};

/// Per-point neighbourhoods, normals, boundary flags, normalised boundary
/// distances and curvature scores of one segment.
#[derive(Clone, Debug)]
pub struct SurfaceAnalysis {
    pub points: Vec<Vector3<f64>>,
    /// Indices of the other points within the neighbourhood radius, ascending.
    pub neighbors: Vec<Vec<usize>>,
    /// Unit normals oriented towards +z.
    pub normals: Vec<Vector3<f64>>,
    pub boundary: Vec<bool>,
    /// Distance to the nearest boundary point over the segment maximum.
    pub boundary_distance: Vec<f64>,
    /// `None` where the neighbourhood is too small to estimate curvature.
    pub curvature: Vec<Option<f64>>,
}

impl SurfaceAnalysis {
    pub fn new(points: &[[f64; 3]], params: &GraspScoringParams) -> Result<Self, GraspError> {
        if points.len() < params.min_valid_points.max(1) {
            return Err(GraspError::TooFewPoints {
                have: points.len(),
                need: params.min_valid_points,
            });
        }
        let points: Vec<Vector3<f64>> = points.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
        let radius = params.neighborhood_radius_m;
        let neighbors = radius_neighbors(&points, radius);
        let normals: Vec<Vector3<f64>> = (0..points.len())
            .map(|i| estimate_normal(&points, i, &neighbors[i]))
            .collect();
        let max_gap = std::f64::consts::TAU - params.boundary_coverage_deg.to_radians();
        let boundary: Vec<bool> = (0..points.len())
            .map(|i| largest_angular_gap(&points, &normals, i, &neighbors[i]) > max_gap)
            .collect();
        let edge: Vec<usize> = (0..points.len()).filter(|i| boundary[*i]).collect();
        if edge.is_empty() {
            return Err(GraspError::NoBoundary);
        }
        let raw: Vec<f64> = points
            .iter()
            .map(|p| {
                edge.iter()
                    .map(|j| (p - points[*j]).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let max = raw.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(GraspError::AllBoundary);
        }
        let boundary_distance = raw.iter().map(|d| d / max).collect();
        let curvature = (0..points.len())
            .map(|i| curvature_of(&normals, i, &neighbors[i]))
            .collect();
        Ok(Self {
            points,
            neighbors,
            normals,
            boundary,
            boundary_distance,
            curvature,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Relative slack on the neighbourhood radius, so that grid points lying
/// exactly on the radius are included regardless of rounding.
pub(crate) const RADIUS_SLACK: f64 = 1e-9;

fn radius_neighbors(points: &[Vector3<f64>], radius: f64) -> Vec<Vec<usize>> {
    let bucket = radius * (1.0 + 1e-6);
    let key = |p: &Vector3<f64>| {
        (
            (p.x / bucket).floor() as i64,
            (p.y / bucket).floor() as i64,
            (p.z / bucket).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let r2 = radius * radius * (1.0 + RADIUS_SLACK);
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (kx, ky, kz) = key(p);
            let mut found = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(bucket) = buckets.get(&(kx + dx, ky + dy, kz + dz)) {
                            found.extend(
                                bucket
                                    .iter()
                                    .copied()
                                    .filter(|j| *j != i && (points[*j] - p).norm_squared() <= r2),
                            );
                        }
                    }
                }
            }
            found.sort_unstable();
            found
        })
        .collect()
}

/// Smallest-eigenvalue eigenvector of the neighbourhood covariance,
/// flipped to point up. Falls back to +z below three points.
pub(crate) fn estimate_normal(points: &[Vector3<f64>], index: usize, neighbors: &[usize]) -> Vector3<f64> {
    if neighbors.len() < 2 {
        return Vector3::z();
    }
    let members = std::iter::once(index).chain(neighbors.iter().copied());
    let count = (neighbors.len() + 1) as f64;
    let mean = members.clone().map(|j| points[j]).sum::<Vector3<f64>>() / count;
    let cov = members
        .map(|j| {
            let d = points[j] - mean;
            d * d.transpose()
        })
        .sum::<Matrix3<f64>>()
        / count;
    let eig = SymmetricEigen::new(cov);
    let (mut min_i, mut min_v) = (0, f64::INFINITY);
    for (k, v) in eig.eigenvalues.iter().enumerate() {
        if *v < min_v {
            min_v = *v;
            min_i = k;
        }
    }
    let mut n: Vector3<f64> = eig.eigenvectors.column(min_i).into_owned();
    let norm = n.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Vector3::z();
    }
    n /= norm;
    if n.z < 0.0 {
        n = -n;
    }
    n
}

/// Orthonormal basis of the plane perpendicular to `n`.
pub(crate) fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() > 0.9 { Vector3::y() } else { Vector3::x() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Largest empty angular sector around a point, with neighbours projected
/// into its tangent plane. A point without neighbours has a full-turn gap.
fn largest_angular_gap(points: &[Vector3<f64>], normals: &[Vector3<f64>], index: usize, neighbors: &[usize]) -> f64 {
    let (u, v) = tangent_basis(&normals[index]);
    let mut angles: Vec<f64> = neighbors
        .iter()
        .filter_map(|j| {
            let d = points[*j] - points[index];
            let (a, b) = (d.dot(&u), d.dot(&v));
            (a.hypot(b) > 1e-12).then(|| b.atan2(a))
        })
        .collect();
    if angles.is_empty() {
        return std::f64::consts::TAU;
    }
    angles.sort_by(f64::total_cmp);
    let wrap = std::f64::consts::TAU - (angles[angles.len() - 1] - angles[0]);
    angles
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(wrap, f64::max)
}

fn curvature_of(normals: &[Vector3<f64>], index: usize, neighbors: &[usize]) -> Option<f64> {
    if neighbors.len() + 1 < 4 {
        return None;
    }
    let n = normals[index];
    let mean_deg = neighbors
        .iter()
        .map(|j| n.dot(&normals[*j]).clamp(-1.0, 1.0).acos().to_degrees())
        .sum::<f64>()
        / neighbors.len() as f64;
    Some((1.0 - mean_deg / 90.0).clamp(0.0, 1.0))
}

fn locate(points: &[[f64; 3]], p: [f64; 3]) -> Result<usize, GraspError> {
    points
        .iter()
        .position(|q| *q == p)
        .ok_or(GraspError::PointNotInSegment)
}

/// Normalised distance from `p` to the segment boundary, in [0, 1].
pub fn boundary_distance_norm(segment: &[[f64; 3]], p: [f64; 3], params: &GraspScoringParams) -> Result<f64, GraspError> {
    let index = locate(segment, p)?;
    let analysis = SurfaceAnalysis::new(segment, params)?;
    Ok(analysis.boundary_distance[index])
}

/// One minus the normalised local normal variation around `p`: 1 on a
/// plane, falling towards 0 on sharp features.
pub fn curvature_score(segment: &[[f64; 3]], p: [f64; 3], params: &GraspScoringParams) -> Result<f64, GraspError> {
    let index = locate(segment, p)?;
    let points: Vec<Vector3<f64>> = segment.iter().map(|q| Vector3::new(q[0], q[1], q[2])).collect();
    let neighbors = radius_neighbors(&points, params.neighborhood_radius_m);
    let normals: Vec<Vector3<f64>> = (0..points.len())
        .map(|i| estimate_normal(&points, i, &neighbors[i]))
        .collect();
    curvature_of(&normals, index, &neighbors[index]).ok_or(GraspError::DegenerateNeighborhood)
}
