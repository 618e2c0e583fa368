use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::calibration::{corpus_mean, random_scenes, scene_world, SceneRecord};
use crate::rng::named_stream;
use crate::task::{ManifestEntry, TaskSpec};
use crate::world::{Catalog, ItemSpec, Rigidity, Tool, WorldParams, STORAGE_A, TOTE};

fn item(id: &str, bbox_mm: [f64; 3], class: VisualClass) -> ItemSpec {
    ItemSpec {
        id: id.to_owned(),
        mass_g: 100.0,
        bbox_mm,
        rigidity: Rigidity::Rigid,
        visual_class: class,
        suckable: true,
        grippable: true,
        preferred_tool: Tool::Suction,
        tool_success_prob: BTreeMap::from([(Tool::Suction, 0.9), (Tool::Gripper, 0.9)]),
        forced_strategy: None,
        drop_prob: Some(0.0),
    }
}

fn world_with(items: Vec<ItemSpec>, container: &str, seed: u64) -> WorldState {
    let mut task = TaskSpec::stow::<&str>(&[]);
    task.manifest = items
        .iter()
        .map(|s| ManifestEntry {
            item: s.id.clone(),
            container: ContainerId::new(container),
        })
        .collect();
    let catalog = Catalog { schema_version: 1, items };
    WorldState::spawn(&task, &catalog, &WorldParams::default(), seed).expect("scene fits")
}

fn top_view(world: &WorldState, container: &str) -> CameraPose {
    viewpoints_for(world.container(&ContainerId::new(container)).unwrap())
        .unwrap()
        .remove(0)
}

fn shipped_catalog() -> Catalog {
    crate::config::load(&crate::config::default_config_path())
        .expect("shipped config loads")
        .catalog
}

#[test]
fn single_opaque_item_is_segmented_exactly_without_noise() {
    let world = world_with(vec![item("block", [80.0, 60.0, 40.0], VisualClass::Opaque)], TOTE, 1);
    let pose = top_view(&world, TOTE);
    let percepts = segment_scene(&world, &pose, &PerceptionParams::noiseless(), &mut named_stream(1, "t")).unwrap();
    assert_eq!(percepts.len(), 1);
    let p = &percepts[0];
    assert_eq!(p.label, "block");
    assert!(p.points.iter().all(|pt| pt.depth_valid));
    assert_eq!(p.pixel_area, p.points.len());
    assert_eq!(scene_f_half(&world, &pose, &percepts).unwrap(), Some(1.0));
}

#[test]
fn transparent_items_have_no_valid_depth() {
    for class in [VisualClass::Transparent, VisualClass::IrAbsorbing] {
        let world = world_with(vec![item("glass", [80.0, 80.0, 60.0], class)], TOTE, 2);
        let pose = top_view(&world, TOTE);
        let percepts = segment_scene(&world, &pose, &PerceptionParams::noiseless(), &mut named_stream(2, "t")).unwrap();
        assert_eq!(percepts.len(), 1);
        assert!(!percepts[0].points.is_empty());
        assert!(percepts[0].points.iter().all(|pt| !pt.depth_valid));
    }
}

#[test]
fn reflective_dropout_is_per_point() {
    let world = world_with(vec![item("foil", [100.0, 100.0, 20.0], VisualClass::Reflective)], TOTE, 3);
    let pose = top_view(&world, TOTE);
    let count_valid = |dropout: f64| {
        let params = PerceptionParams {
            reflective_dropout: dropout,
            ..PerceptionParams::noiseless()
        };
        let percepts = segment_scene(&world, &pose, &params, &mut named_stream(3, "t")).unwrap();
        let valid = percepts[0].points.iter().filter(|p| p.depth_valid).count();
        (valid, percepts[0].points.len())
    };
    let (none, total) = count_valid(1.0);
    assert_eq!(none, 0);
    assert_eq!(count_valid(0.0).0, total);
    let (half, total) = count_valid(0.5);
    let share = half as f64 / total as f64;
    assert!((0.4..0.6).contains(&share), "share {share}");
}

#[test]
fn viewpoints_cover_storage_and_tote_only() {
    let world = world_with(vec![], TOTE, 1);
    for id in [STORAGE_A, TOTE] {
        let poses = viewpoints_for(world.container(&id.into()).unwrap()).unwrap();
        let views: Vec<View> = poses.iter().map(|p| p.view).collect();
        assert_eq!(views, [View::TopFull, View::CloseupLeft, View::CloseupRight]);
    }
    let err = viewpoints_for(world.container(&"box_2".into()).unwrap()).unwrap_err();
    assert_eq!(err, PerceptionError::NotImageable("box_2".into()));
}

#[test]
fn segmenting_rejects_unimaged_views() {
    let world = world_with(vec![], TOTE, 1);
    let mut pose = top_view(&world, TOTE);
    pose.view = View::SideReclassify;
    let mut rng = named_stream(1, "t");
    assert_eq!(
        segment_scene(&world, &pose, &PerceptionParams::default(), &mut rng).unwrap_err(),
        PerceptionError::SideViewNotSegmentable
    );
    pose.view = View::TopFull;
    pose.container = "box_1".into();
    assert_eq!(
        segment_scene(&world, &pose, &PerceptionParams::default(), &mut rng).unwrap_err(),
        PerceptionError::NotImageable("box_1".into())
    );
    pose.container = "shelf".into();
    assert!(matches!(
        segment_scene(&world, &pose, &PerceptionParams::default(), &mut rng),
        Err(PerceptionError::UnknownContainer(_))
    ));
}

#[test]
fn closeups_split_the_top_view() {
    let cat = shipped_catalog();
    let scene = &random_scenes(&cat, 12, 1, 5)[0];
    let world = scene_world(scene, &cat, &WorldParams::default()).unwrap();
    let poses = viewpoints_for(world.container(&STORAGE_A.into()).unwrap()).unwrap();
    let full = visible_masks(&world, &poses[0]).unwrap();
    let left = visible_masks(&world, &poses[1]).unwrap();
    let right = visible_masks(&world, &poses[2]).unwrap();
    for (id, mask) in &full {
        let mut joined = left.get(id).cloned().unwrap_or_default();
        let r = right.get(id).cloned().unwrap_or_default();
        assert!(joined.is_disjoint(&r));
        joined.extend(r);
        assert_eq!(&joined, mask);
    }
    let container = world.container(&STORAGE_A.into()).unwrap();
    let region = poses[1].region(container);
    let percepts = segment_scene(&world, &poses[1], &PerceptionParams::default(), &mut named_stream(5, "t")).unwrap();
    for p in &percepts {
        for pt in &p.points {
            assert!(region.contains(pt.position[0], pt.position[1]));
        }
    }
}

#[test]
fn percepts_are_sorted_by_confidence_then_label() {
    let cat = shipped_catalog();
    for scene in random_scenes(&cat, 15, 10, 9) {
        let world = scene_world(&scene, &cat, &WorldParams::default()).unwrap();
        let pose = top_view(&world, STORAGE_A);
        let percepts = segment_scene(&world, &pose, &PerceptionParams::default(), &mut named_stream(scene.seed, "t")).unwrap();
        for w in percepts.windows(2) {
            let ordered = w[0].confidence > w[1].confidence
                || (w[0].confidence == w[1].confidence && w[0].label <= w[1].label);
            assert!(ordered);
        }
        assert!(percepts.iter().all(|p| !p.points.is_empty() && (0.0..=1.0).contains(&p.confidence)));
    }
}

#[test]
fn segmentation_degrades_with_clutter() {
    let cat = shipped_catalog();
    let world = WorldParams::default();
    let params = PerceptionParams::default();
    let sparse = corpus_mean(&random_scenes(&cat, 5, 200, 1), &cat, &world, &params).unwrap();
    let dense = corpus_mean(&random_scenes(&cat, 20, 200, 1), &cat, &world, &params).unwrap();
    assert!(dense < sparse, "20 items {dense} vs 5 items {sparse}");
}

#[test]
fn empty_scene_has_no_score() {
    let world = world_with(vec![], TOTE, 1);
    let pose = top_view(&world, TOTE);
    let percepts = segment_scene(&world, &pose, &PerceptionParams::default(), &mut named_stream(1, "t")).unwrap();
    assert!(percepts.is_empty());
    assert_eq!(scene_f_half(&world, &pose, &percepts).unwrap(), None);
}

fn holding(label: &str, others: &[&str]) -> WorldState {
    let mut specs = vec![item(label, [60.0, 60.0, 60.0], VisualClass::Opaque)];
    specs.extend(others.iter().map(|o| item(o, [60.0, 60.0, 60.0], VisualClass::Opaque)));
    let mut world = world_with(specs, TOTE, 4);
    world.gripper.held = world.instance_of(label);
    world
}

fn labels(ids: &[&str]) -> Vec<String> {
    ids.iter().map(|s| (*s).to_owned()).collect()
}

#[test]
fn held_item_is_recognised_among_candidates() {
    let world = holding("cup", &["sock", "bowl"]);
    let params = PerceptionParams::noiseless();
    let mut rng = named_stream(1, "t");
    assert_eq!(
        classify_held_item(&world, &labels(&["sock", "cup"]), &params, &mut rng).unwrap(),
        Some("cup".to_owned())
    );
    assert_eq!(classify_held_item(&world, &labels(&["sock", "bowl"]), &params, &mut rng).unwrap(), None);
    assert_eq!(
        classify_held_item(&world, &[], &params, &mut rng).unwrap_err(),
        PerceptionError::NoCandidates
    );
}

#[test]
fn empty_gripper_cannot_be_classified() {
    let mut world = holding("cup", &[]);
    world.gripper.held = None;
    let err = classify_held_item(&world, &labels(&["cup"]), &PerceptionParams::noiseless(), &mut named_stream(1, "t"));
    assert_eq!(err.unwrap_err(), PerceptionError::EmptyGripper);
}

#[test]
fn certain_confusion_never_returns_the_true_label() {
    let world = holding("cup", &["sock"]);
    let params = PerceptionParams {
        confusion_prob: 1.0,
        ..PerceptionParams::noiseless()
    };
    let candidates = labels(&["cup", "sock"]);
    let mut seen = BTreeMap::new();
    for seed in 0..200 {
        let answer = classify_held_item(&world, &candidates, &params, &mut named_stream(seed, "t")).unwrap();
        assert_ne!(answer.as_deref(), Some("cup"));
        *seen.entry(answer).or_insert(0) += 1;
    }
    assert_eq!(seen.len(), 2, "both a wrong label and no answer occur");
}

#[test]
fn low_confidence_classification_returns_nothing() {
    let world = holding("cup", &[]);
    let params = PerceptionParams {
        min_classification_confidence: 1.0,
        f_half_by_clutter: vec![[1.0, 0.9]],
        ..PerceptionParams::noiseless()
    };
    let answer = classify_held_item(&world, &labels(&["cup"]), &params, &mut named_stream(1, "t")).unwrap();
    assert_eq!(answer, None);
}

#[test]
fn interpolation_clamps_at_the_ends() {
    let knots = [[1.0, 0.85], [20.0, 0.45]];
    assert_eq!(interpolate(&knots, 0.0), 0.85);
    assert_eq!(interpolate(&knots, 40.0), 0.45);
    assert!((interpolate(&knots, 10.5) - 0.65).abs() < 1e-12);
    assert_eq!(interpolate(&[[3.0, 0.5]], 9.0), 0.5);
    assert_eq!(interpolate(&[], 9.0), 0.0);
}

#[test]
fn validation_rejects_rising_quality() {
    assert!(PerceptionParams::default().validate().is_empty());
    let params = PerceptionParams {
        f_half_by_clutter: vec![[1.0, 0.5], [20.0, 0.7]],
        recall_scale: 1.5,
        ..PerceptionParams::default()
    };
    let problems = params.validate();
    assert!(problems.iter().any(|p| p.contains("non-increasing")));
    assert!(problems.iter().any(|p| p.contains("recall_scale")));
}

#[test]
fn mask_rates_realise_the_target_quality() {
    for (q, scale) in [0.2, 0.45, 0.62, 0.85, 1.0].into_iter().flat_map(|q| [(q, 0.85), (q, 1.0)]) {
        let (p, r) = mask_rates(q, 0.05, scale);
        assert!((f_beta_from_pr(p, r, 0.5) - q).abs() < 1e-9 || p == 1.0, "q {q}");
        assert!(r <= 0.95 + 1e-12 || r == 0.25 * q / (1.25 - q));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_segmentation_matches_the_visible_masks(count in 1usize..12, seed in 0u64..10_000) {
        let cat = shipped_catalog();
        let scene = SceneRecord {
            scene: "p".into(),
            seed,
            items: TaskSpec::random_stow(&cat, count, seed).manifest.into_iter().map(|e| e.item).collect(),
        };
        let world = scene_world(&scene, &cat, &WorldParams::default()).unwrap();
        let pose = top_view(&world, STORAGE_A);
        let truth = visible_masks(&world, &pose).unwrap();
        let percepts = segment_scene(&world, &pose, &PerceptionParams::noiseless(), &mut named_stream(seed, "t")).unwrap();
        prop_assert_eq!(percepts.len(), truth.len());
        for mask in truth.values() {
            let hit = percepts.iter().find(|p| &p.mask() == mask);
            prop_assert!(hit.is_some());
            prop_assert_eq!(f_beta(&hit.unwrap().mask(), mask, 0.5).unwrap(), 1.0);
        }
        prop_assert_eq!(scene_f_half(&world, &pose, &percepts).unwrap(), Some(1.0));
    }

    #[test]
    fn percept_points_stay_on_the_container_surface(count in 1usize..20, seed in 0u64..10_000) {
        let cat = shipped_catalog();
        let scene = SceneRecord {
            scene: "p".into(),
            seed,
            items: TaskSpec::random_stow(&cat, count, seed).manifest.into_iter().map(|e| e.item).collect(),
        };
        let world = scene_world(&scene, &cat, &WorldParams::default()).unwrap();
        let pose = top_view(&world, STORAGE_A);
        let heights = world.height_map(&STORAGE_A.into());
        let percepts = segment_scene(&world, &pose, &PerceptionParams::default(), &mut named_stream(seed, "t")).unwrap();
        for p in &percepts {
            prop_assert_eq!(p.pixel_area, p.points.len());
            prop_assert!(p.points.iter().any(|pt| pt.position == p.centroid_rgb));
            for pt in &p.points {
                let surface = heights.get(pt.pixel);
                prop_assert!(surface.is_some());
                prop_assert_eq!(surface.unwrap().z, pt.position[2]);
            }
        }
    }
}
