//! Question generation from templates with controlled redundancy.

mod realize;
mod redundancy;
mod template;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use realize::{plural, realize_text};
pub use redundancy::{redundancy_audit, referent_chains, referents_saturated, saturate_redundancy, strip_redundancy};
pub use template::{
    Family, Group, GroupKey, NodeSpec, Slot, SlotKind, Template, TemplateError, TemplateFile, TemplateNode, TemplateSet,
    TemplateSpec, DEFAULT_TEMPLATES,
};

use crate::concepts::ConceptVocabulary;
use crate::exec_det::{execute, execute_ops, object_matches, part_matches, Answer, ExecValue, PartRef};
use crate::io::FileInfo;
use crate::program::{FilterKey, Function, Node, Program};
use crate::scene::{Relation, Scene};
use redundancy::{anchor_clause, build_run, fully_identifiable, random_drop, saturate_tree, strip_tree};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Redundancy {
    #[serde(rename = "rd-")]
    Minus,
    #[default]
    #[serde(rename = "rd")]
    Random,
    #[serde(rename = "rd+")]
    Plus,
}

impl Redundancy {
    pub const ALL: [Redundancy; 3] = [Redundancy::Minus, Redundancy::Random, Redundancy::Plus];

    pub fn name(self) -> &'static str {
        match self {
            Redundancy::Minus => "rd-",
            Redundancy::Random => "rd",
            Redundancy::Plus => "rd+",
        }
    }
}

impl fmt::Display for Redundancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Redundancy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Redundancy::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| format!("unknown redundancy variant {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_index: u64,
    pub scene_id: u64,
    pub text: String,
    pub program: Program,
    pub answer: Answer,
    pub template_id: String,
    pub family: Family,
    pub redundancy_variant: Redundancy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionFile {
    pub info: FileInfo,
    pub questions: Vec<QuestionRecord>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("scene {scene_id}: no {kind} template fit after {attempts} attempts ({produced} questions produced)")]
    TemplateExhausted { scene_id: u64, kind: &'static str, attempts: usize, produced: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuestionConfig {
    pub object: usize,
    pub part: usize,
    pub redundancy: Redundancy,
    /// Relative family weights; families left out weigh 1.
    pub family_weights: BTreeMap<Family, f64>,
    /// Instantiation attempts per question before giving up.
    pub retry_budget: usize,
}

impl Default for QuestionConfig {
    fn default() -> Self {
        QuestionConfig {
            object: 10,
            part: 10,
            redundancy: Redundancy::Random,
            family_weights: BTreeMap::new(),
            retry_budget: 200,
        }
    }
}

struct Built {
    node: Node,
    value: ExecValue,
}

fn value_of(node: &Node, scene: &Scene) -> Option<ExecValue> {
    let (ops, _) = node.emit_ops();
    execute_ops(&ops, scene).ok()?.pop()
}

fn filter_ids(scene: &Scene, ids: &[usize], filters: &[(Function, String)]) -> Vec<usize> {
    ids.iter()
        .copied()
        .filter(|&i| filters.iter().all(|(f, v)| object_matches(scene, i, f.filter_key().expect("filter"), v)))
        .collect()
}

fn filter_parts(scene: &Scene, ps: &[PartRef], filters: &[(Function, String)]) -> Vec<PartRef> {
    ps.iter()
        .copied()
        .filter(|&p| filters.iter().all(|(f, v)| part_matches(scene, p, f.filter_key().expect("filter"), v)))
        .collect()
}

struct Instantiator<'a, R: Rng + ?Sized> {
    template: &'a Template,
    scene: &'a Scene,
    vocab: &'a ConceptVocabulary,
    rng: &'a mut R,
    used: HashSet<usize>,
}

impl<R: Rng + ?Sized> Instantiator<'_, R> {
    fn slots(&self, g: &Group) -> Vec<SlotKind> {
        g.slots
            .iter()
            .copied()
            .filter(|&k| !self.template.is_null(&g.key, k))
            .filter(|&k| k != SlotKind::Texture || self.scene.has_textures())
            .collect()
    }

    fn description(&self, g: &Group, id: usize) -> Vec<(Function, String)> {
        let o = &self.scene.objects[id];
        self.slots(g)
            .into_iter()
            .filter_map(|k| match k {
                SlotKind::Size => Some((Function::FilterSize, o.size.clone())),
                SlotKind::Color => Some((Function::FilterColor, o.color.clone())),
                SlotKind::Material => Some((Function::FilterMaterial, o.material.clone())),
                SlotKind::Texture => o.texture.clone().map(|t| (Function::FilterTexture, t)),
                SlotKind::Shape => Some((Function::FilterShape, o.shape.clone())),
                _ => None,
            })
            .collect()
    }

    /// Target object described by its attributes, with a relate clause when that alone is ambiguous.
    fn referent(&mut self, g: &Group, input: Built, input_is_scene: bool) -> Option<Built> {
        let ExecValue::ObjectSet(ids) = &input.value else { return None };
        let mut order: Vec<usize> = ids.iter().copied().filter(|i| !self.used.contains(i)).collect();
        order.shuffle(self.rng);
        for t in order {
            let desc = self.description(g, t);
            if filter_ids(self.scene, ids, &desc) == [t] {
                self.used.insert(t);
                return Some(Built { node: build_run(input.node, &desc), value: ExecValue::Object(t) });
            }
            if !input_is_scene {
                continue;
            }
            let mut pairs: Vec<(usize, Relation)> = fully_identifiable(self.scene)
                .into_iter()
                .filter(|&a| a != t)
                .flat_map(|a| Relation::ALL.into_iter().map(move |r| (a, r)))
                .collect();
            pairs.shuffle(self.rng);
            for (a, r) in pairs {
                let related = self.scene.relationships.related(r, a);
                if filter_ids(self.scene, related, &desc) == [t] {
                    self.used.insert(t);
                    let base = anchor_clause(self.scene, a, r);
                    return Some(Built { node: build_run(base, &desc), value: ExecValue::Object(t) });
                }
            }
        }
        None
    }

    fn part_referent(&mut self, g: &Group, input: Built) -> Option<Built> {
        let ExecValue::PartSet(ps) = &input.value else { return None };
        let mut order = ps.clone();
        order.shuffle(self.rng);
        for p in order {
            let desc = self.part_description(g, p);
            if filter_parts(self.scene, ps, &desc) == [p] {
                return Some(Built { node: build_run(input.node, &desc), value: ExecValue::Part(p) });
            }
        }
        None
    }

    fn part_description(&self, g: &Group, p: PartRef) -> Vec<(Function, String)> {
        let part = &self.scene.objects[p.object].parts[p.part];
        let mut out: Vec<(Function, String)> = g
            .slots
            .iter()
            .filter(|&&k| !self.template.is_null(&g.key, k))
            .filter_map(|k| match k {
                SlotKind::PartColor => Some((Function::FilterColor, part.color.clone())),
                SlotKind::PartMaterial => Some((Function::FilterMaterial, part.material.clone())),
                _ => None,
            })
            .collect();
        out.push((Function::FilterPartName, part.name.clone()));
        out
    }

    /// Attribute values from a random member of the input set or from the vocabulary;
    /// each slot kept with probability 1/2, at least one kept.
    fn open_group(&mut self, g: &Group, input: Built) -> Option<Built> {
        let ExecValue::ObjectSet(ids) = &input.value else { return None };
        let mut slots: Vec<SlotKind> = self.slots(g).into_iter().filter(|_| self.rng.random_bool(0.5)).collect();
        if slots.is_empty() {
            let all = self.slots(g);
            slots.push(*all.choose(self.rng)?);
        }
        let source = if !ids.is_empty() && self.rng.random_bool(0.5) { ids.choose(self.rng).copied() } else { None };
        let vocab = self.vocab;
        let mut filters = Vec::new();
        for k in slots {
            let by_category = k == SlotKind::Shape && self.rng.random_bool(0.5);
            let f = match (k, source) {
                (SlotKind::Size, Some(o)) => (Function::FilterSize, self.scene.objects[o].size.clone()),
                (SlotKind::Color, Some(o)) => (Function::FilterColor, self.scene.objects[o].color.clone()),
                (SlotKind::Material, Some(o)) => (Function::FilterMaterial, self.scene.objects[o].material.clone()),
                (SlotKind::Texture, Some(o)) => match &self.scene.objects[o].texture {
                    Some(t) => (Function::FilterTexture, t.clone()),
                    None => continue,
                },
                (SlotKind::Shape, Some(o)) if by_category => {
                    (Function::FilterCategory, self.scene.objects[o].category.clone())
                }
                (SlotKind::Shape, Some(o)) => (Function::FilterShape, self.scene.objects[o].shape.clone()),
                (SlotKind::Size, None) => (Function::FilterSize, vocab.sizes.choose(self.rng)?.clone()),
                (SlotKind::Color, None) => (Function::FilterColor, vocab.colors.choose(self.rng)?.clone()),
                (SlotKind::Material, None) => (Function::FilterMaterial, vocab.materials.choose(self.rng)?.clone()),
                (SlotKind::Texture, None) => (Function::FilterTexture, vocab.textures.choose(self.rng)?.clone()),
                (SlotKind::Shape, None) if by_category => {
                    (Function::FilterCategory, vocab.categories.choose(self.rng)?.clone())
                }
                (SlotKind::Shape, None) => (Function::FilterShape, vocab.shapes.choose(self.rng)?.clone()),
                _ => continue,
            };
            filters.push(f);
        }
        let node = build_run(input.node, &filters);
        let value = ExecValue::ObjectSet(filter_ids(self.scene, ids, &filters));
        Some(Built { node, value })
    }

    /// Part filters copied from a random part of the input set; every slot is filled.
    fn open_part_group(&mut self, g: &Group, input: Built) -> Option<Built> {
        let ExecValue::PartSet(ps) = &input.value else { return None };
        let p = *ps.choose(self.rng)?;
        let desc = self.part_description(g, p);
        let value = ExecValue::PartSet(filter_parts(self.scene, ps, &desc));
        Some(Built { node: build_run(input.node, &desc), value })
    }

    fn build(&mut self) -> Option<Node> {
        let t = self.template;
        let mut consumer: Vec<Option<Function>> = vec![None; t.nodes.len()];
        for n in &t.nodes {
            if let TemplateNode::Op { function, inputs } = n {
                for &i in inputs {
                    consumer[i] = Some(*function);
                }
            }
        }
        let mut built: Vec<Option<Built>> = (0..t.nodes.len()).map(|_| None).collect();
        for (i, n) in t.nodes.iter().enumerate() {
            let b = match n {
                TemplateNode::Scene => {
                    Built { node: Node::scene(), value: ExecValue::ObjectSet((0..self.scene.len()).collect()) }
                }
                TemplateNode::Group(g) => {
                    let input = built[g.input].take()?;
                    let input_is_scene = matches!(t.nodes[g.input], TemplateNode::Scene);
                    let referent = consumer[i] == Some(Function::Unique);
                    match (g.key.part, referent) {
                        (false, true) => self.referent(g, input, input_is_scene)?,
                        (false, false) => self.open_group(g, input)?,
                        (true, true) => self.part_referent(g, input)?,
                        (true, false) => self.open_part_group(g, input)?,
                    }
                }
                TemplateNode::Op { function, inputs } => {
                    let children: Vec<Built> = inputs.iter().map(|&j| built[j].take()).collect::<Option<_>>()?;
                    let mut values = vec![];
                    if *function == Function::Relate {
                        let ExecValue::Object(a) = children[0].value else { return None };
                        let mut rels = Relation::ALL.to_vec();
                        rels.shuffle(self.rng);
                        let r = rels.into_iter().find(|&r| !self.scene.relationships.related(r, a).is_empty())?;
                        values.push(r.name().to_string());
                    }
                    let node = Node::new(*function, values, children.into_iter().map(|c| c.node).collect())?;
                    let value = value_of(&node, self.scene)?;
                    Built { node, value }
                }
            };
            built[i] = Some(b);
        }
        built.pop().flatten().map(|b| b.node)
    }
}

/// Fills `template` on `scene`; `None` when the scene cannot ground it uniquely.
pub fn instantiate<R: Rng + ?Sized>(
    template: &Template,
    scene: &Scene,
    vocab: &ConceptVocabulary,
    redundancy: Redundancy,
    rng: &mut R,
) -> Option<QuestionRecord> {
    if template.requires_texture && !scene.has_textures() {
        return None;
    }
    let full = Instantiator { template, scene, vocab, rng: &mut *rng, used: HashSet::new() }.build()?;
    let tree = match redundancy {
        Redundancy::Plus => saturate_tree(&full, scene, rng),
        Redundancy::Minus => strip_tree(&full, scene, false),
        Redundancy::Random => random_drop(&full, scene, rng),
    };
    let program = tree.to_program().ok()?;
    let answer = execute(&program, scene).ok()?;
    let text = realize_text(&program, template)?;
    Some(QuestionRecord {
        question_index: 0,
        scene_id: scene.scene_id,
        text,
        program,
        answer,
        template_id: template.id.clone(),
        family: template.family,
        redundancy_variant: redundancy,
    })
}

/// `cfg.object` object-level then `cfg.part` part-level questions, families drawn by weight.
pub fn generate_for_scene<R: Rng + ?Sized>(
    scene: &Scene,
    templates: &TemplateSet,
    vocab: &ConceptVocabulary,
    cfg: &QuestionConfig,
    rng: &mut R,
) -> Result<Vec<QuestionRecord>, GenError> {
    let mut out = Vec::with_capacity(cfg.object + cfg.part);
    for (part, count, kind) in [(false, cfg.object, "object"), (true, cfg.part, "part")] {
        let usable: Vec<&Template> = templates
            .templates
            .iter()
            .filter(|t| t.family.is_part() == part && (scene.has_textures() || !t.requires_texture))
            .collect();
        let mut families: Vec<Family> = usable.iter().map(|t| t.family).collect();
        families.sort();
        families.dedup();
        let weights: Vec<f64> = families.iter().map(|f| cfg.family_weights.get(f).copied().unwrap_or(1.0)).collect();
        let exhausted = |produced| GenError::TemplateExhausted {
            scene_id: scene.scene_id,
            kind,
            attempts: cfg.retry_budget,
            produced,
        };
        if count > 0 && (families.is_empty() || weights.iter().all(|&w| w <= 0.0)) {
            return Err(exhausted(out.len()));
        }
        for _ in 0..count {
            let mut record = None;
            for _ in 0..cfg.retry_budget {
                let family = families
                    .iter()
                    .zip(&weights)
                    .collect::<Vec<_>>()
                    .choose_weighted(rng, |(_, w)| **w)
                    .map(|(f, _)| **f)
                    .expect("positive weights");
                let pool: Vec<&&Template> = usable.iter().filter(|t| t.family == family).collect();
                let template = pool.choose(rng).expect("family has templates");
                if let Some(r) = instantiate(template, scene, vocab, cfg.redundancy, rng) {
                    record = Some(r);
                    break;
                }
            }
            match record {
                Some(mut r) => {
                    r.question_index = out.len() as u64;
                    out.push(r);
                }
                None => return Err(exhausted(out.len())),
            }
        }
    }
    Ok(out)
}

/// Filter literal of a program operation as a (key, value) pair.
pub fn filter_literal(program: &Program, index: usize) -> Option<(FilterKey, &str)> {
    let op = program.ops().get(index)?;
    Some((op.function.filter_key()?, op.value()?))
}
