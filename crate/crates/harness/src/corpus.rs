use nerfstream_core::scene::{generate_scene, ScenePlan, SizeClass};
use nerfstream_core::{SceneKind, SceneRep};

/// Seeds of the evaluation scenes; each seed lays out a different world.
pub const CORPUS_SEEDS: [u64; 3] = [0, 1, 2];

pub fn corpus_plans(kind: SceneKind) -> Vec<ScenePlan> {
    CORPUS_SEEDS.iter().map(|&s| ScenePlan::new(kind, s, SizeClass::Tiny)).collect()
}

/// Three structured and three point-cloud scenes.
pub fn corpus() -> Vec<(ScenePlan, SceneRep)> {
    [SceneKind::Structured, SceneKind::Unstructured].into_iter().flat_map(corpus_plans).map(|p| (p, generate_scene(&p))).collect()
}
