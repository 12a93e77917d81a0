//! Simulated scene parser: ground-truth scenes to perceived scenes and back.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::concepts::{Attribute, ConceptVocabulary};
use crate::exec_prob::{Detection, PerceivedPart, PerceivedScene};
use crate::scene::{derive_relations_tiebreak, LayoutRules, ObjectInstance, PartInstance, Provenance, Scene};
use crate::seed::stream;

pub const DEFAULT_PIXELS_PER_UNIT: f64 = 48.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Smoothing mass mixed toward uniform in every table.
    pub epsilon: f64,
    /// Center jitter, scene units.
    pub position_sigma: f64,
    pub miss_rate: f64,
    /// Expected spurious detections per scene.
    pub spurious_rate: f64,
    pub seed: u64,
    pub pixels_per_unit: f64,
    pub plane_size: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            epsilon: 0.0,
            position_sigma: 0.0,
            miss_rate: 0.0,
            spurious_rate: 0.0,
            seed: 0,
            pixels_per_unit: DEFAULT_PIXELS_PER_UNIT,
            plane_size: LayoutRules::default().plane_size,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(format!("epsilon must lie in [0, 1), got {}", self.epsilon));
        }
        if !(self.position_sigma >= 0.0 && self.position_sigma.is_finite()) {
            return Err(format!("position sigma must be nonnegative, got {}", self.position_sigma));
        }
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(format!("miss rate must lie in [0, 1], got {}", self.miss_rate));
        }
        if !(self.spurious_rate >= 0.0 && self.spurious_rate.is_finite()) {
            return Err(format!("spurious rate must be nonnegative, got {}", self.spurious_rate));
        }
        if !(self.pixels_per_unit > 0.0 && self.plane_size > 0.0) {
            return Err("pixels_per_unit and plane_size must be positive".into());
        }
        Ok(())
    }
}

/// `(1 - eps) * onehot(truth) + eps / k`.
pub fn smoothed(k: usize, truth: usize, epsilon: f64) -> Vec<f64> {
    let mut t = vec![epsilon / k as f64; k];
    t[truth] += 1.0 - epsilon;
    t
}

fn table(vocab: &ConceptVocabulary, attr: Attribute, value: &str, epsilon: f64) -> Vec<f64> {
    let k = vocab.values(attr).len();
    smoothed(k, vocab.index_of(attr, value).expect("scene value in vocabulary"), epsilon)
}

fn uniform(vocab: &ConceptVocabulary, attr: Attribute) -> Vec<f64> {
    let k = vocab.values(attr).len();
    vec![1.0 / k as f64; k]
}

fn perceive_part(vocab: &ConceptVocabulary, part: &PartInstance, eps: f64) -> PerceivedPart {
    PerceivedPart {
        name: part.name.clone(),
        color_probs: table(vocab, Attribute::Color, &part.color, eps),
        material_probs: table(vocab, Attribute::Material, &part.material, eps),
        texture_probs: part.texture.as_deref().map(|t| table(vocab, Attribute::Texture, t, eps)),
    }
}

/// Draw order per object: miss, then two jitter normals; then the spurious count and per-spurious positions.
pub fn perceive<R: Rng + ?Sized>(
    scene: &Scene,
    noise: &NoiseConfig,
    vocab: &ConceptVocabulary,
    rng: &mut R,
) -> PerceivedScene {
    let eps = noise.epsilon;
    let ppu = noise.pixels_per_unit;
    let mut detections = Vec::with_capacity(scene.objects.len());
    for o in &scene.objects {
        let missed = rng.random::<f64>() < noise.miss_rate;
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        if missed {
            continue;
        }
        let x = o.position[0] + noise.position_sigma * dx;
        let y = o.position[1] + noise.position_sigma * dy;
        detections.push(Detection {
            center: [x * ppu, y * ppu],
            shape_probs: table(vocab, Attribute::Shape, &o.shape, eps),
            color_probs: table(vocab, Attribute::Color, &o.color, eps),
            material_probs: table(vocab, Attribute::Material, &o.material, eps),
            size_probs: table(vocab, Attribute::Size, &o.size, eps),
            texture_probs: o.texture.as_deref().map(|t| table(vocab, Attribute::Texture, t, eps)),
            parts: o.parts.iter().map(|p| perceive_part(vocab, p, eps)).collect(),
            gt_object: Some(o.id),
        });
    }
    if noise.spurious_rate > 0.0 {
        let count = Poisson::new(noise.spurious_rate).expect("positive rate").sample(rng) as usize;
        let half = noise.plane_size / 2.0;
        for _ in 0..count {
            let x = rng.random_range(-half..half);
            let y = rng.random_range(-half..half);
            detections.push(Detection {
                center: [x * ppu, y * ppu],
                shape_probs: uniform(vocab, Attribute::Shape),
                color_probs: uniform(vocab, Attribute::Color),
                material_probs: uniform(vocab, Attribute::Material),
                size_probs: uniform(vocab, Attribute::Size),
                texture_probs: scene.has_textures().then(|| uniform(vocab, Attribute::Texture)),
                parts: vec![],
                gt_object: None,
            });
        }
    }
    PerceivedScene { scene_id: scene.scene_id, pixels_per_unit: ppu, detections }
}

/// [`perceive`] on the stream derived from `(noise.seed, scene_id)`.
pub fn perceive_seeded(scene: &Scene, noise: &NoiseConfig, vocab: &ConceptVocabulary) -> PerceivedScene {
    let mut rng = stream(noise.seed, "perceive", &[scene.scene_id]);
    perceive(scene, noise, vocab, &mut rng)
}

/// Lowest index wins ties.
pub fn argmax(t: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in t.iter().enumerate() {
        if p > t[best] {
            best = i;
        }
    }
    best
}

/// Per-table argmax; positions converted back to scene units and relations re-derived.
pub fn harden(pscene: &PerceivedScene, vocab: &ConceptVocabulary, rules: &LayoutRules) -> Scene {
    let pick = |attr: Attribute, t: &[f64]| vocab.values(attr)[argmax(t)].clone();
    let objects: Vec<ObjectInstance> = pscene
        .detections
        .iter()
        .enumerate()
        .map(|(id, d)| {
            let shape = pick(Attribute::Shape, &d.shape_probs);
            let size = pick(Attribute::Size, &d.size_probs);
            ObjectInstance {
                id,
                category: vocab.category_of(&shape).unwrap_or_default().to_string(),
                color: pick(Attribute::Color, &d.color_probs),
                material: pick(Attribute::Material, &d.material_probs),
                texture: d.texture_probs.as_deref().map(|t| pick(Attribute::Texture, t)),
                position: [d.center[0] / pscene.pixels_per_unit, d.center[1] / pscene.pixels_per_unit],
                rotation: 0.0,
                radius: rules.radius_of(&size).unwrap_or(0.0),
                parts: d
                    .parts
                    .iter()
                    .map(|p| PartInstance {
                        name: p.name.clone(),
                        color: pick(Attribute::Color, &p.color_probs),
                        material: pick(Attribute::Material, &p.material_probs),
                        texture: p.texture_probs.as_deref().map(|t| pick(Attribute::Texture, t)),
                    })
                    .collect(),
                shape,
                size,
            }
        })
        .collect();
    let positions: Vec<[f64; 2]> = objects.iter().map(|o| o.position).collect();
    Scene {
        scene_id: pscene.scene_id,
        relationships: derive_relations_tiebreak(&positions),
        objects,
        provenance: Provenance::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_scene, GenConfig, Visual};

    fn scene(visual: Visual) -> Scene {
        let vocab = ConceptVocabulary::default();
        sample_scene(&GenConfig::balanced(visual, &vocab, 5), &vocab, 3).unwrap()
    }

    #[test]
    fn zero_noise_is_one_hot_and_hardens_back() {
        let vocab = ConceptVocabulary::default();
        let s = scene(Visual::Hard);
        let ps = perceive_seeded(&s, &NoiseConfig::default(), &vocab);
        ps.validate(&vocab).unwrap();
        assert_eq!(ps.detections.len(), s.len());
        for d in &ps.detections {
            assert!(d.color_probs.iter().all(|&p| p == 0.0 || p == 1.0));
        }
        let h = harden(&ps, &vocab, &LayoutRules::default());
        assert_eq!(h.relationships, s.relationships);
        for (a, b) in h.objects.iter().zip(&s.objects) {
            assert_eq!((&a.shape, &a.color, &a.material, &a.size, &a.texture), (&b.shape, &b.color, &b.material, &b.size, &b.texture));
            assert_eq!(a.parts, b.parts);
            assert!((a.position[0] - b.position[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn smoothing_values() {
        let t = smoothed(8, 2, 0.1);
        assert!((t[2] - 0.9125).abs() < 1e-12);
        assert!((t[0] - 0.0125).abs() < 1e-12);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_miss_and_spurious() {
        let vocab = ConceptVocabulary::default();
        let s = scene(Visual::Easy);
        let ps = perceive_seeded(&s, &NoiseConfig { miss_rate: 1.0, ..Default::default() }, &vocab);
        assert!(ps.detections.is_empty());
        let ps = perceive_seeded(&s, &NoiseConfig { spurious_rate: 5.0, ..Default::default() }, &vocab);
        assert!(ps.detections.len() >= s.len());
        assert!(ps.detections[s.len()..].iter().all(|d| d.gt_object.is_none() && d.parts.is_empty()));
        ps.validate(&vocab).unwrap();
    }

    #[test]
    fn harden_argmax_tie_rule() {
        assert_eq!(argmax(&[0.4, 0.35, 0.25]), 0);
        assert_eq!(argmax(&[0.3, 0.4, 0.4]), 1);
    }

    #[test]
    fn reproducible() {
        let vocab = ConceptVocabulary::default();
        let s = scene(Visual::Mid);
        let noise = NoiseConfig { epsilon: 0.2, position_sigma: 0.3, miss_rate: 0.2, spurious_rate: 1.0, seed: 9, ..Default::default() };
        assert_eq!(perceive_seeded(&s, &noise, &vocab), perceive_seeded(&s, &noise, &vocab));
    }
}
