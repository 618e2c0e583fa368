use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};

use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest, ProptestConfig};
use proptest::strategy::Strategy as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::cell_of;
use crate::perception::{SurfacePoint, View};
use crate::world::{default_layout, ContainerId, Rigidity, VisualClass, TOTE};

fn tote() -> Container {
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

fn flat(nx: usize, ny: usize) -> Vec<[f64; 3]> {
    let c = tote().interior().center();
    grid(nx, ny, 0.005, [c[0], c[1], 0.05], |_, _| 0.0)
}

fn percept(points: &[[f64; 3]], depth_valid: bool) -> SegmentPercept {
    let pts: Vec<SurfacePoint> = points
        .iter()
        .map(|p| SurfacePoint {
            pixel: cell_of(p[0], p[1]),
            position: *p,
            depth_valid,
        })
        .collect();
    let n = pts.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    SegmentPercept {
        label: "thing".into(),
        confidence: 0.9,
        pixel_area: pts.len(),
        points: pts,
        centroid_rgb: [mx, my, 0.0],
        container: ContainerId::new(TOTE),
        view: View::TopFull,
    }
}

fn meta(tool: Tool, forced: Option<Strategy>) -> ItemSpec {
    ItemSpec {
        id: "thing".into(),
        mass_g: 100.0,
        bbox_mm: [100.0, 100.0, 50.0],
        rigidity: Rigidity::Rigid,
        visual_class: VisualClass::Opaque,
        suckable: true,
        grippable: true,
        preferred_tool: tool,
        tool_success_prob: BTreeMap::from([(tool, 0.9)]),
        forced_strategy: forced,
        drop_prob: None,
    }
}

fn candidate_at(x: f64, y: f64, score: f64) -> GraspCandidate {
    GraspCandidate {
        position: [x, y, 0.0],
        approach: [0.0, 0.0, -1.0],
        tool: Tool::Suction,
        score,
        base_score: score,
        strategy: Strategy::SurfaceNormals,
        gripper_yaw: None,
        descend_until_contact: false,
    }
}

/// Random height-field patch of at most 500 points inside the tote.
fn random_segment(rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
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

#[test]
fn boundary_distance_peaks_at_the_centre_and_vanishes_on_the_rim() {
    let params = GraspScoringParams::default();
    let points = flat(21, 21);
    let centre = points[10 * 21 + 10];
    assert_eq!(boundary_distance_norm(&points, centre, &params).unwrap(), 1.0);
    assert_eq!(boundary_distance_norm(&points, points[0], &params).unwrap(), 0.0);
    assert_eq!(boundary_distance_norm(&points, points[5], &params).unwrap(), 0.0);
}

#[test]
fn boundary_distance_equals_exhaustive_minimum_over_the_rim() {
    let params = GraspScoringParams::default();
    let points = flat(21, 21);
    let rim: Vec<usize> = (0..points.len())
        .filter(|k| {
            let (i, j) = (k / 21, k % 21);
            i == 0 || j == 0 || i == 20 || j == 20
        })
        .collect();
    let dist = |p: [f64; 3], q: [f64; 3]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    let raw: Vec<f64> = points
        .iter()
        .map(|p| rim.iter().map(|&b| dist(*p, points[b])).fold(f64::INFINITY, f64::min))
        .collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    for (k, p) in points.iter().enumerate() {
        let got = boundary_distance_norm(&points, *p, &params).unwrap();
        assert!((got - raw[k] / max).abs() < 1e-12, "point {k}: {got} vs {}", raw[k] / max);
    }
}

#[test]
fn boundary_distance_needs_enough_points_and_a_member_point() {
    let params = GraspScoringParams::default();
    let few = flat(3, 3);
    assert!(matches!(
        boundary_distance_norm(&few, few[0], &params),
        Err(GraspError::TooFewPoints { have: 9, .. })
    ));
    let points = flat(5, 5);
    assert_eq!(
        boundary_distance_norm(&points, [9.0, 9.0, 9.0], &params),
        Err(GraspError::PointNotInSegment)
    );
}

#[test]
fn plane_has_full_curvature_score() {
    let params = GraspScoringParams::default();
    let tilted = grid(12, 12, 0.005, [0.1, 0.7, 0.05], |x, y| 0.2 * x - 0.1 * y);
    for p in &tilted {
        assert!((curvature_score(&tilted, *p, &params).unwrap() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn curved_surfaces_score_below_a_flat_sheet() {
    let params = GraspScoringParams::default();
    let pitch = 0.002;
    let r = 0.012;
    let dome = grid(21, 21, pitch, [0.2, 0.8, 0.05], |x, y| {
        let (dx, dy) = (x - 0.02, y - 0.02);
        (r * r - dx * dx - dy * dy).max(0.0).sqrt()
    });
    let pole = dome[10 * 21 + 10];
    let sheet = grid(21, 21, pitch, [0.2, 0.8, 0.05], |_, _| 0.0);
    let middle = sheet[10 * 21 + 10];
    let pole_score = curvature_score(&dome, pole, &params).unwrap();
    let sheet_score = curvature_score(&sheet, middle, &params).unwrap();
    assert!(pole_score < sheet_score, "{pole_score} vs {sheet_score}");

    let cylinder = grid(21, 21, pitch, [0.2, 0.8, 0.05], |x, _| {
        let dx = x - 0.02;
        (r * r - dx * dx).max(0.0).sqrt()
    });
    let side = cylinder[14 * 21 + 10];
    let side_score = curvature_score(&cylinder, side, &params).unwrap();
    assert!(side_score < sheet_score, "{side_score} vs {sheet_score}");
}

#[test]
fn curvature_needs_a_neighbourhood() {
    let params = GraspScoringParams::default();
    let sparse = grid(4, 4, 0.05, [0.1, 0.1, 0.0], |_, _| 0.0);
    assert_eq!(curvature_score(&sparse, sparse[0], &params), Err(GraspError::DegenerateNeighborhood));
}

#[test]
fn weighted_score_and_penalty_cap() {
    let params = GraspScoringParams::default();
    assert_eq!(penalised_score(base_score(1.0, 1.0, &params), 0.0), 1.0);
    let base = base_score(0.8, 0.4, &params);
    let full = params.height_penalty_max + params.wall_angle_penalty_max;
    assert!((penalised_score(base, full) - 0.50).abs() < 1e-12);
    assert_eq!(penalised_score(0.1, full), 0.0);
}

#[test]
fn height_penalty_grows_with_depth_below_the_rim() {
    let params = GraspScoringParams::default();
    let c = tote();
    assert_eq!(height_penalty(c.top_z(), &c, &params), 0.0);
    assert!((height_penalty(c.floor_z(), &c, &params) - params.height_penalty_max).abs() < 1e-12);
    let mid = height_penalty((c.top_z() + c.floor_z()) / 2.0, &c, &params);
    assert!((mid - params.height_penalty_max / 2.0).abs() < 1e-12);
}

#[test]
fn wall_angle_penalty_applies_only_when_tilting_towards_the_nearest_wall() {
    let params = GraspScoringParams::default();
    let c = tote();
    let r = c.interior();
    let near_left = [r.min[0] + 0.01, (r.min[1] + r.max[1]) / 2.0, 0.1];
    let tilt = 40f64.to_radians();
    let towards = [-tilt.sin(), 0.0, tilt.cos()];
    let away = [tilt.sin(), 0.0, tilt.cos()];
    let upright = [0.0, 0.0, 1.0];
    assert_eq!(wall_angle_penalty(near_left, towards, &c, &params), params.wall_angle_penalty_max);
    assert_eq!(wall_angle_penalty(near_left, away, &c, &params), 0.0);
    assert_eq!(wall_angle_penalty(near_left, upright, &c, &params), 0.0);
}

#[test]
fn diverse_selection_examples() {
    let ranked = vec![candidate_at(0.0, 0.0, 0.9), candidate_at(0.1, 0.0, 0.8), candidate_at(0.0, 0.1, 0.7)];
    let picked = select_diverse(&ranked, 3, 0.025);
    assert_eq!(picked, ranked);

    let cluster = vec![candidate_at(0.0, 0.0, 0.9), candidate_at(0.01, 0.0, 0.8), candidate_at(0.0, 0.01, 0.7)];
    assert_eq!(select_diverse(&cluster, 3, 0.025), vec![cluster[0].clone()]);
    assert!(select_diverse(&[], 3, 0.025).is_empty());
}

#[test]
fn centroid_grasp_examples() {
    let c = centroid_grasp(&[[0.0, 0.0, 0.1], [0.2, 0.0, 0.1]], Tool::Suction).unwrap();
    assert!((c.position[0] - 0.1).abs() < 1e-15 && c.position[1] == 0.0 && (c.position[2] - 0.1).abs() < 1e-15);
    assert_eq!(c.approach, [0.0, 0.0, -1.0]);
    assert_eq!(c.strategy, Strategy::Centroid);
    assert_eq!(centroid_grasp(&[[0.3, 0.4, 0.5]], Tool::Gripper).unwrap().position, [0.3, 0.4, 0.5]);
    assert_eq!(centroid_grasp(&[], Tool::Suction), Err(GraspError::NoDepth));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cloud: Vec<[f64; 3]> = (0..257).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let got = centroid_grasp(&cloud, Tool::Suction).unwrap().position;
    for k in 0..3 {
        let mean = cloud.iter().map(|p| p[k]).sum::<f64>() / cloud.len() as f64;
        assert!((got[k] - mean).abs() < 1e-12);
    }
}

#[test]
fn rgb_centroid_needs_no_depth() {
    let container = tote();
    let points = flat(9, 5);
    let p = percept(&points, false);
    let plan = synthesize(&p, &container, &meta(Tool::Suction, None), &GraspScoringParams::default());
    assert_eq!(plan.strategy, Strategy::RgbCentroid);
    assert_eq!(plan.candidates.len(), 1);
    let c = &plan.candidates[0];
    assert!(c.descend_until_contact);
    assert_eq!(c.position[2], container.top_z());
    assert_eq!(c.approach, [0.0, 0.0, -1.0]);
    let axis_x = (points[0][0] + points[points.len() - 1][0]) / 2.0;
    let axis_y = (points[0][1] + points[points.len() - 1][1]) / 2.0;
    assert!((c.position[0] - axis_x).abs() < 1e-12);
    assert!((c.position[1] - axis_y).abs() < 1e-12);
}

#[test]
fn fully_valid_segment_uses_surface_normals() {
    let container = tote();
    let points = flat(20, 20);
    let params = GraspScoringParams::default();
    let plan = synthesize(&percept(&points, true), &container, &meta(Tool::Suction, None), &params);
    assert_eq!(plan.strategy, Strategy::SurfaceNormals);
    assert!((1..=3).contains(&plan.candidates.len()));
    assert!(plan.fallbacks.is_empty());
    assert_eq!(plan.tool, Tool::Suction);
}

#[test]
fn forced_strategy_skips_earlier_strategies() {
    let container = tote();
    let points = flat(20, 20);
    let plan = synthesize(
        &percept(&points, true),
        &container,
        &meta(Tool::Gripper, Some(Strategy::RgbCentroid)),
        &GraspScoringParams::default(),
    );
    assert_eq!(plan.strategy, Strategy::RgbCentroid);
    assert!(plan.fallbacks.is_empty());
    assert!(plan.candidates[0].gripper_yaw.is_some());
}

#[test]
fn all_boundary_segment_falls_through_to_centroid() {
    let container = tote();
    let strip = flat(30, 2);
    let plan = synthesize(&percept(&strip, true), &container, &meta(Tool::Suction, None), &GraspScoringParams::default());
    assert_eq!(plan.strategy, Strategy::Centroid);
    assert_eq!(plan.fallbacks.len(), 1);
    assert_eq!(plan.fallbacks[0].0, Strategy::SurfaceNormals);
}

#[test]
fn pca_examples() {
    let along_x: Vec<[f64; 2]> = (0..10).map(|i| [f64::from(i), 0.0]).collect();
    assert_eq!(pose_pca(&along_x).unwrap().yaw, 0.0);
    let diagonal: Vec<[f64; 2]> = (0..10).map(|i| [f64::from(i), f64::from(i)]).collect();
    assert!((pose_pca(&diagonal).unwrap().yaw - FRAC_PI_4).abs() < 1e-6);
    let square = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let iso = pose_pca(&square).unwrap();
    assert!(iso.low_confidence);
    assert_eq!(iso.yaw, 0.0);
    assert_eq!(pose_pca(&[[1.0, 1.0]]), Err(GraspError::TooFewDistinctPoints));
    assert_eq!(pose_pca(&[[1.0, 1.0], [1.0, 1.0]]), Err(GraspError::TooFewDistinctPoints));
}

fn arb_candidates() -> impl proptest::strategy::Strategy<Value = Vec<GraspCandidate>> {
    prop::collection::vec((0.0..0.2f64, 0.0..0.2f64, 0.0..1.0f64), 0..40).prop_map(|raw| {
        let mut c: Vec<GraspCandidate> = raw.into_iter().map(|(x, y, s)| candidate_at(x, y, s)).collect();
        rank(&mut c);
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn diverse_selection_keeps_distance_and_order(ranked in arb_candidates(), k in 1usize..5, min_dist in 0.0..0.1f64) {
        let picked = select_diverse(&ranked, k, min_dist);
        prop_assert!(picked.len() <= k);
        prop_assert!(!ranked.is_empty() == !picked.is_empty());
        for (i, a) in picked.iter().enumerate() {
            for b in &picked[i + 1..] {
                let d = ((a.position[0] - b.position[0]).powi(2) + (a.position[1] - b.position[1]).powi(2)).sqrt();
                prop_assert!(d >= min_dist);
            }
        }
        let mut cursor = 0;
        for p in &picked {
            let found = ranked[cursor..].iter().position(|r| r == p);
            prop_assert!(found.is_some());
            cursor += found.unwrap() + 1;
        }
    }

    #[test]
    fn synthesis_always_yields_a_plan(
        seed in any::<u64>(),
        n in 1usize..120,
        valid_share in 0.0..1.0f64,
        tool_is_gripper in any::<bool>(),
        forced in prop::option::of(0usize..3),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let interior = tote().interior();
        let points: Vec<SurfacePoint> = (0..n)
            .map(|_| {
                let p = [
                    rng.random_range(interior.min[0]..interior.max[0]),
                    rng.random_range(interior.min[1]..interior.max[1]),
                    rng.random_range(0.0..0.25),
                ];
                SurfacePoint { pixel: cell_of(p[0], p[1]), position: p, depth_valid: rng.random::<f64>() < valid_share }
            })
            .collect();
        let mut p = percept(&[[0.0; 3]], true);
        p.centroid_rgb = points[0].position;
        p.pixel_area = points.len();
        p.points = points;
        let tool = if tool_is_gripper { Tool::Gripper } else { Tool::Suction };
        let item = meta(tool, forced.map(|i| Strategy::CHAIN[i]));
        let params = GraspScoringParams::default();
        let plan = synthesize(&p, &tote(), &item, &params);
        prop_assert!(!plan.candidates.is_empty());
        prop_assert!(plan.candidates.len() <= params.max_candidates);
        prop_assert_eq!(plan.tool, tool);
        for c in &plan.candidates {
            prop_assert!((0.0..=1.0).contains(&c.score));
            let norm = (c.approach[0].powi(2) + c.approach[1].powi(2) + c.approach[2].powi(2)).sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn scores_stay_within_the_penalty_band(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let segment = random_segment(&mut rng);
        let params = GraspScoringParams::default();
        if let Ok(ranked) = score_candidates(&segment, &tote(), Tool::Suction, &params) {
            for c in &ranked {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&c.base_score));
                prop_assert!(c.score <= c.base_score + 1e-12);
                prop_assert!(c.score >= (c.base_score - params.penalty_cap).max(0.0) - 1e-12);
            }
        }
    }

    #[test]
    fn ranking_is_translation_invariant_away_from_walls(seed in any::<u64>(), dx in -0.05..0.05f64, dy in -0.05..0.05f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = tote().interior().center();
        let nx = rng.random_range(6..16);
        let ny = rng.random_range(6..16);
        let slope = rng.random_range(-0.2..0.2);
        let segment = grid(nx, ny, 0.005, [c[0] - 0.03, c[1] - 0.03, 0.1], |x, _| slope * x);
        let moved: Vec<[f64; 3]> = segment.iter().map(|p| [p[0] + dx, p[1] + dy, p[2]]).collect();
        let params = GraspScoringParams { wall_angle_penalty_max: 0.0, ..GraspScoringParams::default() };
        let a = score_candidates(&segment, &tote(), Tool::Suction, &params).unwrap();
        let b = score_candidates(&moved, &tote(), Tool::Suction, &params).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.score - y.score).abs() < 1e-6);
            let twin = b.iter().find(|z| {
                (x.position[0] + dx - z.position[0]).abs() < 1e-9 && (x.position[1] + dy - z.position[1]).abs() < 1e-9
            });
            prop_assert!(twin.is_some_and(|z| (z.score - x.score).abs() < 1e-6));
        }
    }

    #[test]
    fn pca_yaw_ignores_uniform_scaling(seed in any::<u64>(), scale in 0.1..10.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angle = rng.random_range(0.0..PI);
        let points: Vec<[f64; 2]> = (0..50)
            .map(|_| {
                let t: f64 = rng.random_range(-1.0..1.0);
                let s: f64 = rng.random_range(-0.2..0.2);
                [t * angle.cos() - s * angle.sin(), t * angle.sin() + s * angle.cos()]
            })
            .collect();
        let scaled: Vec<[f64; 2]> = points.iter().map(|p| [p[0] * scale, p[1] * scale]).collect();
        let a = pose_pca(&points).unwrap();
        let b = pose_pca(&scaled).unwrap();
        prop_assert!((a.yaw - b.yaw).abs() < 1e-9);
        prop_assert!((0.0..PI).contains(&a.yaw));
    }
}
