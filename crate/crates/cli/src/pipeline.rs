//! In-memory stages behind each subcommand.

use std::collections::HashMap;

use rayon::prelude::*;
use shiftbench::concepts::{co_matrix, variant_distribution, ConceptVocabulary, DistAxis, DistVariant};
use shiftbench::evaluation::{GoldAnswer, Prediction};
use shiftbench::exec_det::execute;
use shiftbench::exec_prob::{execute_prob, PerceivedScene};
use shiftbench::perception::{harden, perceive_seeded, NoiseConfig};
use shiftbench::questions::{generate_for_scene, QuestionConfig, QuestionRecord, TemplateSet};
use shiftbench::sampler::{GenConfig, SceneSampler};
use shiftbench::scene::{validate_scene, LayoutRules, Scene};
use shiftbench::seed;

use crate::settings::{ExecMode, ExecuteSettings, GenerateSettings, PerturbSettings, Split};
use crate::CliError;

/// Seed for one split; splits never share a stream.
pub fn split_seed(master: u64, split: Split) -> u64 {
    seed::derive_seed(master, "split", &[split as u64])
}

pub fn gen_config(s: &GenerateSettings, master: u64, vocab: &ConceptVocabulary) -> Result<GenConfig, CliError> {
    if s.comp.is_some() && s.dist != DistVariant::Bal {
        return Err(CliError::Config(format!(
            "--dist {} conflicts with --comp {}: compositionality controls colors when set",
            s.dist,
            s.comp.expect("checked")
        )));
    }
    let bad = |e: shiftbench::concepts::ConceptError| CliError::Config(e.to_string());
    let mut cfg = GenConfig::balanced(s.visual, vocab, split_seed(master, s.split));
    cfg.shape_dist = variant_distribution(s.dist, DistAxis::Shape, vocab, &s.distribution).map_err(bad)?;
    cfg.color_dist = variant_distribution(s.dist, DistAxis::Color, vocab, &s.distribution).map_err(bad)?;
    cfg.material_dist = variant_distribution(s.dist, DistAxis::Material, vocab, &s.distribution).map_err(bad)?;
    cfg.co_matrix = s.comp.map(|m| co_matrix(m, vocab, s.co_peak)).transpose().map_err(bad)?;
    cfg.validate(vocab).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn question_config(s: &GenerateSettings) -> QuestionConfig {
    QuestionConfig {
        object: s.object_questions,
        part: s.part_questions,
        redundancy: s.redundancy,
        family_weights: s.family_weights.clone(),
        retry_budget: s.retry_budget,
    }
}

/// Scenes `0..num_scenes` of one split with their questions, numbered in scene order.
pub fn generate(
    s: &GenerateSettings,
    master: u64,
    vocab: &ConceptVocabulary,
    templates: &TemplateSet,
) -> Result<(GenConfig, Vec<Scene>, Vec<QuestionRecord>), CliError> {
    let cfg = gen_config(s, master, vocab)?;
    let sampler = SceneSampler::new(&cfg, vocab).map_err(|e| CliError::Config(e.to_string()))?;
    let qcfg = question_config(s);
    let rules = &cfg.placement.rules;
    let per_scene: Vec<(Scene, Vec<QuestionRecord>)> = (0..s.num_scenes)
        .into_par_iter()
        .map(|id| {
            let scene = sampler.sample_scene(id).map_err(|e| CliError::Data(e.to_string()))?;
            let violations = validate_scene(&scene, vocab, rules);
            if !violations.is_empty() {
                return Err(CliError::Data(format!("scene {id} failed validation: {violations:?}")));
            }
            let mut rng = seed::stream(cfg.seed, "questions", &[id]);
            let qs = generate_for_scene(&scene, templates, vocab, &qcfg, &mut rng)
                .map_err(|e| CliError::Data(e.to_string()))?;
            Ok((scene, qs))
        })
        .collect::<Result<_, _>>()?;
    let mut scenes = Vec::with_capacity(per_scene.len());
    let mut questions = Vec::new();
    for (scene, qs) in per_scene {
        for mut q in qs {
            q.question_index = questions.len() as u64;
            questions.push(q);
        }
        scenes.push(scene);
    }
    Ok((cfg, scenes, questions))
}

pub fn noise_config(s: &PerturbSettings, master: u64) -> Result<NoiseConfig, CliError> {
    let noise = NoiseConfig {
        epsilon: s.epsilon,
        position_sigma: s.pos_sigma,
        miss_rate: s.miss,
        spurious_rate: s.spurious,
        seed: master,
        pixels_per_unit: s.pixels_per_unit,
        ..NoiseConfig::default()
    };
    noise.validate().map_err(CliError::Config)?;
    Ok(noise)
}

pub fn perturb(scenes: &[Scene], noise: &NoiseConfig, vocab: &ConceptVocabulary) -> Vec<PerceivedScene> {
    scenes.par_iter().map(|s| perceive_seeded(s, noise, vocab)).collect()
}

/// What the executor reads.
pub enum SceneSource<'a> {
    Truth(&'a [Scene]),
    Perceived(&'a [PerceivedScene]),
}

enum Prepared<'a> {
    Truth(HashMap<u64, &'a Scene>),
    Hardened(HashMap<u64, Scene>),
    Perceived(HashMap<u64, &'a PerceivedScene>),
}

pub fn execute_questions(
    questions: &[QuestionRecord],
    source: SceneSource<'_>,
    settings: &ExecuteSettings,
    vocab: &ConceptVocabulary,
) -> Result<Vec<Prediction>, CliError> {
    let cfg = settings.prob_config();
    cfg.validate().map_err(CliError::Config)?;
    let prepared = match (settings.mode, source) {
        (ExecMode::Det, SceneSource::Truth(s)) => Prepared::Truth(s.iter().map(|x| (x.scene_id, x)).collect()),
        (ExecMode::Prob, SceneSource::Perceived(p)) => {
            for ps in p {
                ps.validate(vocab).map_err(|e| CliError::Data(format!("perceived scene {}: {e}", ps.scene_id)))?;
            }
            Prepared::Perceived(p.iter().map(|x| (x.scene_id, x)).collect())
        }
        (ExecMode::DetHardened, SceneSource::Perceived(p)) => {
            let rules = LayoutRules::default();
            Prepared::Hardened(p.par_iter().map(|x| (x.scene_id, harden(x, vocab, &rules))).collect())
        }
        (ExecMode::Det, _) => return Err(CliError::Config("det mode reads ground-truth scenes (--scenes)".into())),
        (_, _) => return Err(CliError::Config("prob and det-hardened modes read perceived scenes (--perceived)".into())),
    };
    questions
        .par_iter()
        .map(|q| {
            let missing = || CliError::Data(format!("question {}: no scene {}", q.question_index, q.scene_id));
            let result = match &prepared {
                Prepared::Truth(m) => execute(&q.program, m.get(&q.scene_id).ok_or_else(missing)?),
                Prepared::Hardened(m) => execute(&q.program, m.get(&q.scene_id).ok_or_else(missing)?),
                Prepared::Perceived(m) => execute_prob(&q.program, m.get(&q.scene_id).ok_or_else(missing)?, vocab, &cfg),
            };
            Ok(match result {
                Ok(a) => Prediction { question_index: q.question_index, answer: Some(a), error: None },
                Err(e) => Prediction { question_index: q.question_index, answer: None, error: Some(e.to_string()) },
            })
        })
        .collect()
}

pub fn gold(questions: &[QuestionRecord]) -> Vec<GoldAnswer> {
    questions
        .iter()
        .map(|q| GoldAnswer { question_index: q.question_index, family: q.family.name().to_string(), answer: q.answer.clone() })
        .collect()
}
