//! Perception calibration corpus: scenes of catalogue items in a storage
//! compartment, scored by the mean per-item F0.5 of the simulated top view.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{scene_f_half, segment_scene, viewpoints_for, PerceptionError, PerceptionParams};
use crate::rng::named_stream;
use crate::task::{ManifestEntry, Phase, TaskSpec};
use crate::world::{Catalog, WorldError, WorldParams, WorldState, STORAGE_A};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecord {
    pub scene: String,
    pub seed: u64,
    pub items: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("scene {scene}")]
    World {
        scene: String,
        #[source]
        source: WorldError,
    },
    #[error("scene {scene}")]
    Perception {
        scene: String,
        #[source]
        source: PerceptionError,
    },
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<SceneRecord>, CorpusError> {
    let mut scenes = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        scenes.push(serde_json::from_str(&line).map_err(|source| CorpusError::Parse { line: i + 1, source })?);
    }
    Ok(scenes)
}

/// Builds a scene's world: every item dropped into storage A.
pub fn scene_world(scene: &SceneRecord, catalog: &Catalog, world: &WorldParams) -> Result<WorldState, CorpusError> {
    let task = TaskSpec {
        phase: Phase::Stow,
        manifest: scene
            .items
            .iter()
            .map(|i| ManifestEntry {
                item: i.clone(),
                container: STORAGE_A.into(),
            })
            .collect(),
        order: Vec::new(),
        time_limit_s: 0.0,
        stow_budget_s: None,
    };
    WorldState::spawn(&task, catalog, world, scene.seed).map_err(|source| CorpusError::World {
        scene: scene.scene.clone(),
        source,
    })
}

/// F0.5 of one simulated top view of the scene; `None` when no item is
/// visible.
pub fn evaluate_scene(
    scene: &SceneRecord,
    catalog: &Catalog,
    world: &WorldParams,
    params: &PerceptionParams,
) -> Result<Option<f64>, CorpusError> {
    let w = scene_world(scene, catalog, world)?;
    let wrap = |source| CorpusError::Perception {
        scene: scene.scene.clone(),
        source,
    };
    let pose = viewpoints_for(w.container(&STORAGE_A.into()).map_err(|source| CorpusError::World {
        scene: scene.scene.clone(),
        source,
    })?)
    .map_err(wrap)?
    .remove(0);
    let mut rng = named_stream(scene.seed, "corpus");
    let percepts = segment_scene(&w, &pose, params, &mut rng).map_err(wrap)?;
    scene_f_half(&w, &pose, &percepts).map_err(wrap)
}

/// Mean F0.5 over the scenes that show at least one item.
pub fn corpus_mean(
    scenes: &[SceneRecord],
    catalog: &Catalog,
    world: &WorldParams,
    params: &PerceptionParams,
) -> Result<f64, CorpusError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in scenes {
        if let Some(f) = evaluate_scene(s, catalog, world, params)? {
            sum += f;
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Random scenes with `count` items each, for clutter sweeps.
pub fn random_scenes(catalog: &Catalog, count: usize, scenes: usize, seed: u64) -> Vec<SceneRecord> {
    (0..scenes)
        .map(|i| {
            let s = seed.wrapping_mul(7919).wrapping_add(i as u64);
            let task = TaskSpec::random_stow(catalog, count, s);
            SceneRecord {
                scene: format!("sweep_{count}_{i}"),
                seed: s,
                items: task.manifest.into_iter().map(|e| e.item).collect(),
            }
        })
        .collect()
}

/// Path of the corpus shipped with the crate.
pub fn default_corpus_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join("perception_corpus.ndjson")
}
