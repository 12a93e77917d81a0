//! Scene generation under a [`GenConfig`].
//!
//! Each scene draws from independent streams derived from `(seed, scene_id)`:
//! a layout stream (count, shapes, sizes, body colors and materials,
//! positions) shared by all visual variants, a per-object part stream used by
//! the mid and hard variants, and a per-object texture stream used only by
//! hard. Scenes generated with the same seed under easy, mid and hard
//! therefore share their layout exactly.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{
    CoDistributionMatrix, ConceptDistribution, ConceptSampler, ConceptVocabulary, DistAxis,
};
use crate::io::to_json_string;
use crate::scene::{LayoutRules, ObjectInstance, PartInstance, Provenance, Scene};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("scene {scene_id}: could not place object {object} after {retries} tries in {attempts} layout attempts")]
    PlacementExhausted { scene_id: u64, object: usize, retries: usize, attempts: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visual {
    Easy,
    Mid,
    Hard,
}

impl Visual {
    pub const ALL: [Visual; 3] = [Visual::Easy, Visual::Mid, Visual::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Visual::Easy => "easy",
            Visual::Mid => "mid",
            Visual::Hard => "hard",
        }
    }

    pub fn parts_perturbed(self) -> usize {
        match self {
            Visual::Easy => 0,
            Visual::Mid | Visual::Hard => 3,
        }
    }

    pub fn textured(self) -> bool {
        self == Visual::Hard
    }
}

impl fmt::Display for Visual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Visual {
    type Err = SampleError;
    fn from_str(s: &str) -> Result<Self, SampleError> {
        Visual::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| SampleError::InvalidConfig(format!("unknown visual variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub rules: LayoutRules,
    /// Position draws per object before the layout attempt is abandoned.
    pub max_retries: usize,
    /// Whole-layout attempts (each with a fresh derived stream) before giving up.
    pub max_layout_attempts: usize,
}

impl Default for Placement {
    fn default() -> Self {
        Placement { rules: LayoutRules::default(), max_retries: 200, max_layout_attempts: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub visual: Visual,
    pub shape_dist: ConceptDistribution,
    pub color_dist: ConceptDistribution,
    pub material_dist: ConceptDistribution,
    /// When present, body colors are drawn from the row of the sampled shape.
    pub co_matrix: Option<CoDistributionMatrix>,
    pub parts_perturbed: usize,
    pub placement: Placement,
    pub seed: u64,
}

impl GenConfig {
    /// Balanced distributions, no co-distribution matrix.
    pub fn balanced(visual: Visual, vocab: &ConceptVocabulary, seed: u64) -> GenConfig {
        let uniform = |axis| ConceptDistribution::uniform(axis, vocab.axis_len(axis)).expect("nonempty vocabulary");
        GenConfig {
            visual,
            shape_dist: uniform(DistAxis::Shape),
            color_dist: uniform(DistAxis::Color),
            material_dist: uniform(DistAxis::Material),
            co_matrix: None,
            parts_perturbed: visual.parts_perturbed(),
            placement: Placement::default(),
            seed,
        }
    }

    pub fn validate(&self, vocab: &ConceptVocabulary) -> Result<(), SampleError> {
        let bad = |m: String| Err(SampleError::InvalidConfig(m));
        for (dist, axis) in [
            (&self.shape_dist, DistAxis::Shape),
            (&self.color_dist, DistAxis::Color),
            (&self.material_dist, DistAxis::Material),
        ] {
            if dist.axis() != axis || dist.len() != vocab.axis_len(axis) {
                return bad(format!("{axis:?} distribution does not match the vocabulary"));
            }
        }
        if let Some(m) = &self.co_matrix {
            if m.rows().len() != vocab.shapes.len() || m.rows().iter().any(|r| r.len() != vocab.colors.len()) {
                return bad("co-distribution matrix shape does not match the vocabulary".into());
            }
        }
        if self.parts_perturbed != self.visual.parts_perturbed() {
            return bad(format!(
                "visual variant {} perturbs {} parts, config says {}",
                self.visual,
                self.visual.parts_perturbed(),
                self.parts_perturbed
            ));
        }
        let rules = &self.placement.rules;
        if rules.min_objects == 0 || rules.min_objects > rules.max_objects {
            return bad("invalid object count range".into());
        }
        if !(rules.margin >= 0.0) || !(rules.plane_size > 0.0) || !(rules.min_axis_gap > 0.0) {
            return bad("invalid placement geometry".into());
        }
        for size in &vocab.sizes {
            match rules.radius_of(size) {
                Some(r) if r > 0.0 && 2.0 * r < rules.plane_size => {}
                _ => return bad(format!("no valid footprint radius for size {size:?}")),
            }
        }
        if self.placement.max_retries == 0 || self.placement.max_layout_attempts == 0 {
            return bad("retry budgets must be positive".into());
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        seed::digest_hex(to_json_string(self).as_bytes())
    }
}

/// A validated config with precomputed samplers.
pub struct SceneSampler<'a> {
    cfg: &'a GenConfig,
    vocab: &'a ConceptVocabulary,
    shape: ConceptSampler,
    color: ConceptSampler,
    material: ConceptSampler,
    color_by_shape: Option<Vec<ConceptSampler>>,
    digest: String,
}

struct Body {
    shape: usize,
    size: usize,
    color: usize,
    material: usize,
    rotation: f64,
    position: [f64; 2],
    radius: f64,
}

impl<'a> SceneSampler<'a> {
    pub fn new(cfg: &'a GenConfig, vocab: &'a ConceptVocabulary) -> Result<Self, SampleError> {
        cfg.validate(vocab)?;
        Ok(SceneSampler {
            cfg,
            vocab,
            shape: cfg.shape_dist.sampler(),
            color: cfg.color_dist.sampler(),
            material: cfg.material_dist.sampler(),
            color_by_shape: cfg
                .co_matrix
                .as_ref()
                .map(|m| (0..m.rows().len()).map(|i| m.row(i).sampler()).collect()),
            digest: cfg.digest(),
        })
    }

    pub fn config_digest(&self) -> &str {
        &self.digest
    }

    pub fn sample_scene(&self, scene_id: u64) -> Result<Scene, SampleError> {
        let attempts = self.cfg.placement.max_layout_attempts;
        let mut last_failure = 0;
        for attempt in 0..attempts {
            match self.sample_layout(scene_id, attempt as u64) {
                Ok(bodies) => return Ok(self.dress(scene_id, bodies)),
                Err(object) => last_failure = object,
            }
        }
        Err(SampleError::PlacementExhausted {
            scene_id,
            object: last_failure,
            retries: self.cfg.placement.max_retries,
            attempts,
        })
    }

    /// Returns the index of the unplaceable object on failure.
    fn sample_layout(&self, scene_id: u64, attempt: u64) -> Result<Vec<Body>, usize> {
        let rules = &self.cfg.placement.rules;
        let vocab = self.vocab;
        let mut rng = seed::stream(self.cfg.seed, "layout", &[scene_id, attempt]);
        let n = rng.random_range(rules.min_objects..=rules.max_objects);
        let mut bodies: Vec<Body> = Vec::with_capacity(n);
        for k in 0..n {
            let shape = self.shape.sample(&mut rng);
            let size = rng.random_range(0..vocab.sizes.len());
            let color = match &self.color_by_shape {
                Some(rows) => rows[shape].sample(&mut rng),
                None => self.color.sample(&mut rng),
            };
            let material = self.material.sample(&mut rng);
            let rotation = rng.random_range(0.0..360.0);
            let radius = rules.radius_of(&vocab.sizes[size]).expect("validated radii");
            let extent = rules.half_extent() - radius;
            let mut placed = None;
            for _ in 0..self.cfg.placement.max_retries {
                let p = [rng.random_range(-extent..=extent), rng.random_range(-extent..=extent)];
                let clear = bodies.iter().all(|b| {
                    let (dx, dy) = (p[0] - b.position[0], p[1] - b.position[1]);
                    (dx * dx + dy * dy).sqrt() >= radius + b.radius + rules.margin
                        && dx.abs() >= rules.min_axis_gap
                        && dy.abs() >= rules.min_axis_gap
                });
                if clear {
                    placed = Some(p);
                    break;
                }
            }
            let position = placed.ok_or(k)?;
            bodies.push(Body { shape, size, color, material, rotation, position, radius });
        }
        Ok(bodies)
    }

    fn dress(&self, scene_id: u64, bodies: Vec<Body>) -> Scene {
        let vocab = self.vocab;
        let visual = self.cfg.visual;
        let objects = bodies
            .into_iter()
            .enumerate()
            .map(|(id, b)| {
                let shape = vocab.shapes[b.shape].clone();
                let color = vocab.colors[b.color].clone();
                let material = vocab.materials[b.material].clone();
                let mut texture_rng = seed::stream(self.cfg.seed, "texture", &[scene_id, id as u64]);
                let texture = visual
                    .textured()
                    .then(|| vocab.textures[texture_rng.random_range(0..vocab.textures.len())].clone());
                let mut parts: Vec<PartInstance> = vocab
                    .parts_of(&shape)
                    .iter()
                    .map(|name| PartInstance {
                        name: name.clone(),
                        color: color.clone(),
                        material: material.clone(),
                        texture: texture.clone(),
                    })
                    .collect();
                if self.cfg.parts_perturbed > 0 {
                    let mut part_rng = seed::stream(self.cfg.seed, "parts", &[scene_id, id as u64]);
                    for name in self.choose_perturbed(&mut part_rng, &shape) {
                        let part = parts.iter_mut().find(|p| p.name == name).expect("exterior part exists");
                        part.color = vocab.colors[part_rng.random_range(0..vocab.colors.len())].clone();
                        part.material = vocab.materials[part_rng.random_range(0..vocab.materials.len())].clone();
                        if visual.textured() {
                            part.texture =
                                Some(vocab.textures[texture_rng.random_range(0..vocab.textures.len())].clone());
                        }
                    }
                }
                ObjectInstance {
                    id,
                    category: vocab.category_of(&shape).expect("validated vocabulary").to_string(),
                    shape,
                    size: vocab.sizes[b.size].clone(),
                    color,
                    material,
                    texture,
                    position: b.position,
                    rotation: b.rotation,
                    radius: b.radius,
                    parts,
                }
            })
            .collect();
        let provenance = Provenance { config_digest: self.digest.clone(), seed: self.cfg.seed };
        Scene::from_objects(scene_id, objects, provenance).expect("placement enforces a minimum axis gap")
    }

    /// Names of the parts perturbed on object `object` of scene `scene_id` (empty for easy).
    pub fn perturbed_parts(&self, scene_id: u64, object: usize, shape: &str) -> Vec<String> {
        if self.cfg.parts_perturbed == 0 {
            return Vec::new();
        }
        let mut part_rng = seed::stream(self.cfg.seed, "parts", &[scene_id, object as u64]);
        self.choose_perturbed(&mut part_rng, shape)
    }

    fn choose_perturbed<R: Rng>(&self, rng: &mut R, shape: &str) -> Vec<String> {
        let exterior = self.vocab.exterior_parts_of(shape);
        let k = self.cfg.parts_perturbed.min(exterior.len());
        let mut chosen = index::sample(rng, exterior.len(), k).into_vec();
        chosen.sort_unstable();
        chosen.into_iter().map(|e| exterior[e].clone()).collect()
    }
}

pub fn sample_scene(cfg: &GenConfig, vocab: &ConceptVocabulary, scene_id: u64) -> Result<Scene, SampleError> {
    SceneSampler::new(cfg, vocab)?.sample_scene(scene_id)
}
