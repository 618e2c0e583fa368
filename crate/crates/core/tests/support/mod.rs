//! Shared helpers for the integration and acceptance tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pickcell::grasp::{score_candidates, GraspScoringParams};
use pickcell::world::{default_layout, Container, Tool, TOTE};

pub fn tote() -> Container {
    default_layout()
        .into_iter()
        .find(|c| c.id.as_str() == TOTE)
        .expect("default layout has a tote")
}

fn grid(nx: usize, ny: usize, pitch: f64, origin: [f64; 3], height: impl Fn(f64, f64) -> f64) -> Vec<[f64; 3]> {
    let mut points = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let x = origin[0] + i as f64 * pitch;
            let y = origin[1] + j as f64 * pitch;
            points.push([x, y, origin[2] + height(x - origin[0], y - origin[1])]);
        }
    }
    points
}

/// Random height-field patch of at most 500 points inside the tote.
pub fn random_segment(rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let interior = tote().interior();
    let nx = rng.random_range(4..=22);
    let ny = rng.random_range(4..=(500 / nx).min(22));
    let origin = [
        interior.min[0] + rng.random_range(0.0..0.3),
        interior.min[1] + rng.random_range(0.0..0.15),
        rng.random_range(0.0..0.2),
    ];
    let (a, b, amp, freq) = (
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.3..0.3),
        rng.random_range(0.0..0.01),
        rng.random_range(10.0..80.0),
    );
    let mut points = grid(nx, ny, 0.005, origin, |x, y| a * x + b * y + amp * (freq * x).sin() * (freq * y).cos());
    let holes = rng.random_range(0..points.len() / 6 + 1);
    for _ in 0..holes {
        let k = rng.random_range(0..points.len());
        points.swap_remove(k);
    }
    points
}

/// Straightforward re-implementation of the surface-normals scorer: all
/// pairwise distances, no spatial index, boundary distances by exhaustive
/// search.
pub mod brute {
    use std::collections::BTreeMap;
    use std::f64::consts::TAU;

    use nalgebra::{Matrix3, SymmetricEigen, Vector3};
    use pickcell::grasp::GraspScoringParams;
    use pickcell::world::Container;

    pub struct Scored {
        pub position: [f64; 3],
        pub score: f64,
        pub base: f64,
    }

    fn v(p: [f64; 3]) -> Vector3<f64> {
        Vector3::new(p[0], p[1], p[2])
    }

    fn neighbours(points: &[[f64; 3]], i: usize, r: f64) -> Vec<usize> {
        (0..points.len())
            .filter(|&j| j != i && (v(points[j]) - v(points[i])).norm_squared() <= r * r * (1.0 + 1e-9))
            .collect()
    }

    fn normal(points: &[[f64; 3]], i: usize, nb: &[usize]) -> Vector3<f64> {
        if nb.len() < 2 {
            return Vector3::z();
        }
        let members: Vec<usize> = std::iter::once(i).chain(nb.iter().copied()).collect();
        let count = members.len() as f64;
        let mean = members.iter().map(|&j| v(points[j])).sum::<Vector3<f64>>() / count;
        let cov = members
            .iter()
            .map(|&j| {
                let d = v(points[j]) - mean;
                d * d.transpose()
            })
            .sum::<Matrix3<f64>>()
            / count;
        let eig = SymmetricEigen::new(cov);
        let k = (0..3).fold(0, |best, k| if eig.eigenvalues[k] < eig.eigenvalues[best] { k } else { best });
        let mut n: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
        if !(n.norm() > 0.0) {
            return Vector3::z();
        }
        n /= n.norm();
        if n.z < 0.0 {
            -n
        } else {
            n
        }
    }

    fn is_boundary(points: &[[f64; 3]], i: usize, n: Vector3<f64>, nb: &[usize], coverage_deg: f64) -> bool {
        let helper = if n.x.abs() > 0.9 { Vector3::y() } else { Vector3::x() };
        let u = n.cross(&helper).normalize();
        let w = n.cross(&u);
        let mut angles: Vec<f64> = nb
            .iter()
            .filter_map(|&j| {
                let d = v(points[j]) - v(points[i]);
                let (a, b) = (d.dot(&u), d.dot(&w));
                (a.hypot(b) > 1e-12).then(|| b.atan2(a))
            })
            .collect();
        if angles.is_empty() {
            return true;
        }
        angles.sort_by(f64::total_cmp);
        let mut gap = TAU - (angles[angles.len() - 1] - angles[0]);
        for k in 1..angles.len() {
            gap = gap.max(angles[k] - angles[k - 1]);
        }
        gap > TAU - coverage_deg.to_radians()
    }

    pub fn score(points: &[[f64; 3]], container: &Container, params: &GraspScoringParams) -> Vec<Scored> {
        let r = params.neighborhood_radius_m;
        let nbs: Vec<Vec<usize>> = (0..points.len()).map(|i| neighbours(points, i, r)).collect();
        let normals: Vec<Vector3<f64>> = (0..points.len()).map(|i| normal(points, i, &nbs[i])).collect();
        let boundary: Vec<usize> = (0..points.len())
            .filter(|&i| is_boundary(points, i, normals[i], &nbs[i], params.boundary_coverage_deg))
            .collect();
        let raw: Vec<f64> = points
            .iter()
            .map(|p| boundary.iter().map(|&b| (v(*p) - v(points[b])).norm()).fold(f64::INFINITY, f64::min))
            .collect();
        let max = raw.iter().copied().fold(0.0, f64::max);

        let min_x = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let min_y = points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let mut first_in_cell: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for (i, p) in points.iter().enumerate() {
            let key = (
                ((p[0] - min_x) / params.candidate_pitch_m + 1e-6).floor() as i64,
                ((p[1] - min_y) / params.candidate_pitch_m + 1e-6).floor() as i64,
            );
            first_in_cell.entry(key).or_insert(i);
        }

        let wall = container.wall_height_m();
        let rect = container.interior();
        let mut out = Vec::new();
        for &i in first_in_cell.values() {
            if nbs[i].len() + 1 < 4 {
                continue;
            }
            let n = normals[i];
            let mean_dev = nbs[i]
                .iter()
                .map(|&j| n.dot(&normals[j]).clamp(-1.0, 1.0).acos().to_degrees())
                .sum::<f64>()
                / nbs[i].len() as f64;
            let curvature = (1.0 - mean_dev / 90.0).clamp(0.0, 1.0);
            let base = 0.75 * (raw[i] / max) + 0.25 * curvature;
            let p = points[i];
            let depth = (container.top_z() - p[2]).clamp(0.0, wall);
            let height = params.height_penalty_max * depth / wall;
            let tilt = n.z.clamp(-1.0, 1.0).acos().to_degrees();
            let horizontal = n.x.hypot(n.y);
            let angled = if tilt >= params.wall_angle_threshold_deg && horizontal > 1e-12 {
                let edges = [
                    (p[0] - rect.min[0], [-1.0, 0.0]),
                    (rect.max[0] - p[0], [1.0, 0.0]),
                    (p[1] - rect.min[1], [0.0, -1.0]),
                    (rect.max[1] - p[1], [0.0, 1.0]),
                ];
                let nearest = edges.iter().fold(edges[0], |a, b| if b.0 < a.0 { *b } else { a });
                if n.x * nearest.1[0] + n.y * nearest.1[1] > 0.0 {
                    params.wall_angle_penalty_max
                } else {
                    0.0
                }
            } else {
                0.0
            };
            out.push(Scored {
                position: p,
                score: (base - height - angled).clamp(0.0, 1.0),
                base,
            });
        }
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.position[0].total_cmp(&b.position[0]))
                .then(a.position[1].total_cmp(&b.position[1]))
                .then(a.position[2].total_cmp(&b.position[2]))
        });
        out
    }
}

/// Scores `count` random segments with both the library and the brute-force
/// scorer. Returns how many segments were scoreable, or the first
/// disagreement.
pub fn compare_with_oracle(count: usize, seed: u64) -> Result<usize, String> {
    let container = tote();
    let params = GraspScoringParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    for n in 0..count {
        let segment = random_segment(&mut rng);
        if segment.len() > 500 {
            return Err(format!("segment {n} has {} points", segment.len()));
        }
        let oracle = brute::score(&segment, &container, &params);
        let Ok(ranked) = score_candidates(&segment, &container, Tool::Suction, &params) else {
            if oracle.iter().any(|s| s.base.is_finite()) {
                return Err(format!("segment {n}: library refused a scoreable segment"));
            }
            continue;
        };
        if ranked.len() != oracle.len() {
            return Err(format!("segment {n}: {} candidates vs {}", ranked.len(), oracle.len()));
        }
        for (rank, (got, want)) in ranked.iter().zip(&oracle).enumerate() {
            if got.position != want.position
                || (got.score - want.score).abs() > 1e-12
                || (got.base_score - want.base).abs() > 1e-12
            {
                return Err(format!("segment {n}, rank {rank}: {got:?} vs score {}", want.score));
            }
        }
        compared += 1;
    }
    Ok(compared)
}
