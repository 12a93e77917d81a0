//! Probabilistic executor over perceived scenes.
//!
//! Every set-valued step is a selection vector `p` with one entry per
//! detection (or per detected part). `unique` resolves to the argmax but
//! keeps the vector, so a later `query` can score values jointly over all
//! candidates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{Attribute, ConceptVocabulary};
use crate::exec_det::{Answer, ExecError};
use crate::io::FileInfo;
use crate::program::{FilterKey, Function, Program};
use crate::scene::{derive_relations_tiebreak, Relation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceivedPart {
    pub name: String,
    pub color_probs: Vec<f64>,
    pub material_probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture_probs: Option<Vec<f64>>,
}

impl PerceivedPart {
    pub fn table(&self, attr: Attribute) -> Option<&[f64]> {
        match attr {
            Attribute::Color => Some(&self.color_probs),
            Attribute::Material => Some(&self.material_probs),
            Attribute::Texture => self.texture_probs.as_deref(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Image-plane position in pixels.
    pub center: [f64; 2],
    pub shape_probs: Vec<f64>,
    pub color_probs: Vec<f64>,
    pub material_probs: Vec<f64>,
    pub size_probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture_probs: Option<Vec<f64>>,
    #[serde(default)]
    pub parts: Vec<PerceivedPart>,
    /// Ground-truth object id; evaluation only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_object: Option<usize>,
}

impl Detection {
    pub fn table(&self, attr: Attribute) -> Option<&[f64]> {
        match attr {
            Attribute::Shape => Some(&self.shape_probs),
            Attribute::Color => Some(&self.color_probs),
            Attribute::Material => Some(&self.material_probs),
            Attribute::Size => Some(&self.size_probs),
            Attribute::Texture => self.texture_probs.as_deref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceivedScene {
    pub scene_id: u64,
    /// Scale between scene units and `center` pixels.
    pub pixels_per_unit: f64,
    pub detections: Vec<Detection>,
}

/// Canonical value order of every probability table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueOrder {
    pub shapes: Vec<String>,
    pub colors: Vec<String>,
    pub materials: Vec<String>,
    pub sizes: Vec<String>,
    pub textures: Vec<String>,
}

impl ValueOrder {
    pub fn of(vocab: &ConceptVocabulary) -> Self {
        ValueOrder {
            shapes: vocab.shapes.clone(),
            colors: vocab.colors.clone(),
            materials: vocab.materials.clone(),
            sizes: vocab.sizes.clone(),
            textures: vocab.textures.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceivedSceneFile {
    pub info: FileInfo,
    pub value_order: ValueOrder,
    pub scenes: Vec<PerceivedScene>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("detection {detection}: {what}")]
pub struct TableError {
    pub detection: usize,
    pub what: String,
}

impl PerceivedScene {
    /// Checks table lengths against `vocab` and that every table is a distribution within 1e-6.
    pub fn validate(&self, vocab: &ConceptVocabulary) -> Result<(), TableError> {
        let check = |detection: usize, what: &str, t: &[f64], k: usize| -> Result<(), TableError> {
            let err = |m: String| Err(TableError { detection, what: format!("{what}: {m}") });
            if t.len() != k {
                return err(format!("expected {k} entries, found {}", t.len()));
            }
            if t.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return err("entry outside [0, 1]".into());
            }
            let s: f64 = t.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return err(format!("sums to {s}"));
            }
            Ok(())
        };
        for (i, d) in self.detections.iter().enumerate() {
            for attr in Attribute::ALL {
                if let Some(t) = d.table(attr) {
                    check(i, attr.name(), t, vocab.values(attr).len())?;
                }
            }
            for part in &d.parts {
                for attr in [Attribute::Color, Attribute::Material, Attribute::Texture] {
                    if let Some(t) = part.table(attr) {
                        check(i, &format!("{} {}", part.name, attr.name()), t, vocab.values(attr).len())?;
                    }
                }
            }
        }
        Ok(())
    }

    fn centers(&self) -> Vec<[f64; 2]> {
        self.detections.iter().map(|d| d.center).collect()
    }

    /// (detection, part) for every detected part, in detection order.
    pub fn part_index(&self) -> Vec<(usize, usize)> {
        self.detections.iter().enumerate().flat_map(|(i, d)| (0..d.parts.len()).map(move |j| (i, j))).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationMode {
    #[default]
    Soft,
    Hard,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryRule {
    #[default]
    JointArgmax,
    ExpectedSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbExecConfig {
    /// Relation offset, in pixels.
    pub a: f64,
    /// Relation sharpness, per pixel.
    pub b: f64,
    pub select_threshold: f64,
    /// Count `p == threshold` as selected.
    pub inclusive_threshold: bool,
    pub relation_mode: RelationMode,
    pub query_rule: QueryRule,
}

impl Default for ProbExecConfig {
    fn default() -> Self {
        ProbExecConfig {
            a: 20.0,
            b: 0.02,
            select_threshold: 0.7,
            inclusive_threshold: false,
            relation_mode: RelationMode::Soft,
            query_rule: QueryRule::JointArgmax,
        }
    }
}

impl ProbExecConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(format!("relation sharpness b must be positive, got {}", self.b));
        }
        if !self.a.is_finite() {
            return Err(format!("relation offset a must be finite, got {}", self.a));
        }
        if !(self.select_threshold > 0.0 && self.select_threshold < 1.0) {
            return Err(format!("select threshold must lie in (0, 1), got {}", self.select_threshold));
        }
        Ok(())
    }

    fn selected(&self, p: f64) -> bool {
        if self.inclusive_threshold {
            p >= self.select_threshold
        } else {
            p > self.select_threshold
        }
    }
}

/// Selection probability per detection.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbState(pub Vec<f64>);

impl ProbState {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpError {
    #[error("empty selection")]
    EmptySelection,
    #[error("invalid literal {0:?}")]
    InvalidLiteral(String),
    #[error("operand lengths differ")]
    LengthMismatch,
    #[error("no texture table")]
    MissingTexture,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn op_scene(pscene: &PerceivedScene) -> ProbState {
    ProbState(vec![1.0; pscene.detections.len()])
}

/// Likelihood of `value` on every detection's `key` table.
fn likelihoods(
    pscene: &PerceivedScene,
    key: FilterKey,
    value: &str,
    vocab: &ConceptVocabulary,
) -> Result<Vec<f64>, OpError> {
    let bad = || OpError::InvalidLiteral(value.to_string());
    match key {
        FilterKey::Attr(attr) => {
            let v = vocab.index_of(attr, value).ok_or_else(bad)?;
            Ok(pscene.detections.iter().map(|d| d.table(attr).map_or(0.0, |t| t[v])).collect())
        }
        FilterKey::Category => {
            vocab.category_index(value).ok_or_else(bad)?;
            let members = vocab.shapes_in_category(value);
            Ok(pscene.detections.iter().map(|d| members.iter().map(|&s| d.shape_probs[s]).sum()).collect())
        }
        FilterKey::PartName => Err(bad()),
    }
}

pub fn op_filter(
    state: &ProbState,
    pscene: &PerceivedScene,
    key: FilterKey,
    value: &str,
    vocab: &ConceptVocabulary,
) -> Result<ProbState, OpError> {
    let l = likelihoods(pscene, key, value, vocab)?;
    if l.len() != state.len() {
        return Err(OpError::LengthMismatch);
    }
    Ok(ProbState(state.0.iter().zip(&l).map(|(p, q)| p * q).collect()))
}

/// Part-level filter over the flattened part list of [`PerceivedScene::part_index`].
pub fn op_filter_part(
    state: &ProbState,
    pscene: &PerceivedScene,
    key: FilterKey,
    value: &str,
    vocab: &ConceptVocabulary,
) -> Result<ProbState, OpError> {
    let index = pscene.part_index();
    if index.len() != state.len() {
        return Err(OpError::LengthMismatch);
    }
    let bad = || OpError::InvalidLiteral(value.to_string());
    let like: Vec<f64> = match key {
        FilterKey::PartName => {
            index.iter().map(|&(d, j)| f64::from(pscene.detections[d].parts[j].name == value)).collect()
        }
        FilterKey::Attr(attr @ (Attribute::Color | Attribute::Material | Attribute::Texture)) => {
            let v = vocab.index_of(attr, value).ok_or_else(bad)?;
            index.iter().map(|&(d, j)| pscene.detections[d].parts[j].table(attr).map_or(0.0, |t| t[v])).collect()
        }
        _ => return Err(bad()),
    };
    Ok(ProbState(state.0.iter().zip(&like).map(|(p, q)| p * q).collect()))
}

pub fn op_relate(anchor: usize, pscene: &PerceivedScene, relation: Relation, cfg: &ProbExecConfig) -> ProbState {
    let centers = pscene.centers();
    let mut p = match cfg.relation_mode {
        RelationMode::Soft => {
            centers.iter().map(|&c| sigmoid(cfg.b * (relation.offset(centers[anchor], c) + cfg.a))).collect()
        }
        RelationMode::Hard => {
            let rel = derive_relations_tiebreak(&centers);
            let mut p = vec![0.0; centers.len()];
            for &k in rel.related(relation, anchor) {
                p[k] = 1.0;
            }
            p
        }
    };
    p[anchor] = 0.0;
    ProbState(p)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// Cosine similarity of raw tables against the anchor's; the anchor itself gets 0.
pub fn op_same(anchor: usize, pscene: &PerceivedScene, attr: Attribute) -> ProbState {
    let dets = &pscene.detections;
    let Some(target) = dets[anchor].table(attr) else {
        return ProbState(vec![0.0; dets.len()]);
    };
    ProbState(
        dets.iter()
            .enumerate()
            .map(|(k, d)| if k == anchor { 0.0 } else { d.table(attr).map_or(0.0, |t| cosine(t, target)) })
            .collect(),
    )
}

pub fn op_intersect(p1: &ProbState, p2: &ProbState) -> Result<ProbState, OpError> {
    if p1.len() != p2.len() {
        return Err(OpError::LengthMismatch);
    }
    Ok(ProbState(p1.0.iter().zip(&p2.0).map(|(a, b)| a * b).collect()))
}

pub fn op_union(p1: &ProbState, p2: &ProbState) -> Result<ProbState, OpError> {
    if p1.len() != p2.len() {
        return Err(OpError::LengthMismatch);
    }
    Ok(ProbState(p1.0.iter().zip(&p2.0).map(|(a, b)| 1.0 - (1.0 - a) * (1.0 - b)).collect()))
}

/// Argmax with the lowest index winning ties.
pub fn op_unique_select(state: &ProbState) -> Result<(usize, f64), OpError> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &p) in state.0.iter().enumerate() {
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((k, p));
        }
    }
    best.ok_or(OpError::EmptySelection)
}

pub fn op_count(state: &ProbState, cfg: &ProbExecConfig) -> i64 {
    state.0.iter().filter(|&&p| cfg.selected(p)).count() as i64
}

pub fn op_exist(state: &ProbState, cfg: &ProbExecConfig) -> bool {
    op_count(state, cfg) > 0
}

fn argmax_value(state: &ProbState, tables: &[Option<&[f64]>], rule: QueryRule) -> Result<usize, OpError> {
    if state.is_empty() {
        return Err(OpError::EmptySelection);
    }
    let k = tables.iter().flatten().map(|t| t.len()).next().ok_or(OpError::MissingTexture)?;
    let mut scores = vec![0.0f64; k];
    for (p, t) in state.0.iter().zip(tables) {
        let Some(t) = t else { continue };
        for (v, q) in t.iter().enumerate() {
            let s = p * q;
            match rule {
                QueryRule::JointArgmax => scores[v] = scores[v].max(s),
                QueryRule::ExpectedSum => scores[v] += s,
            }
        }
    }
    let mut best = 0;
    for v in 1..k {
        if scores[v] > scores[best] {
            best = v;
        }
    }
    Ok(best)
}

pub fn op_query(
    state: &ProbState,
    pscene: &PerceivedScene,
    attr: Attribute,
    vocab: &ConceptVocabulary,
    rule: QueryRule,
) -> Result<String, OpError> {
    let tables: Vec<Option<&[f64]>> = pscene.detections.iter().map(|d| d.table(attr)).collect();
    if tables.len() != state.len() {
        return Err(OpError::LengthMismatch);
    }
    Ok(vocab.values(attr)[argmax_value(state, &tables, rule)?].clone())
}

pub fn op_query_part(
    state: &ProbState,
    pscene: &PerceivedScene,
    attr: Attribute,
    vocab: &ConceptVocabulary,
    rule: QueryRule,
) -> Result<String, OpError> {
    let tables: Vec<Option<&[f64]>> =
        pscene.part_index().into_iter().map(|(d, j)| pscene.detections[d].parts[j].table(attr)).collect();
    if tables.len() != state.len() {
        return Err(OpError::LengthMismatch);
    }
    Ok(vocab.values(attr)[argmax_value(state, &tables, rule)?].clone())
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProbValue {
    ObjectSet(ProbState),
    /// Resolved `unique`: the selection it came from, its argmax and that entry.
    Object { state: ProbState, anchor: usize, confidence: f64 },
    PartSet(ProbState),
    Part { state: ProbState, anchor: usize, confidence: f64 },
    Integer(i64),
    Boolean(bool),
    Attribute(String),
}

pub fn execute_prob(
    program: &Program,
    pscene: &PerceivedScene,
    vocab: &ConceptVocabulary,
    cfg: &ProbExecConfig,
) -> Result<Answer, ExecError> {
    let trace = execute_prob_trace(program, pscene, vocab, cfg)?;
    let index = trace.len() - 1;
    match trace.into_iter().last().expect("nonempty program") {
        ProbValue::Integer(n) => Ok(Answer::Integer(n)),
        ProbValue::Boolean(b) => Ok(Answer::Boolean(b)),
        ProbValue::Attribute(s) => Ok(Answer::Attribute(s)),
        _ => Err(ExecError::TypeFault { index }),
    }
}

pub fn execute_prob_trace(
    program: &Program,
    pscene: &PerceivedScene,
    vocab: &ConceptVocabulary,
    cfg: &ProbExecConfig,
) -> Result<Vec<ProbValue>, ExecError> {
    let mut values: Vec<ProbValue> = Vec::with_capacity(program.len());
    let parts = pscene.part_index();
    for (index, op) in program.ops().iter().enumerate() {
        let lift = |e: OpError| match e {
            OpError::EmptySelection => ExecError::EmptySelection { index },
            OpError::InvalidLiteral(value) => ExecError::InvalidLiteral { index, value },
            OpError::LengthMismatch => ExecError::LengthMismatch { index },
            OpError::MissingTexture => ExecError::MissingTexture { index, object: 0 },
        };
        let fault = ExecError::TypeFault { index };
        let arg = |k: usize| &values[op.inputs[k]];
        let v = match op.function {
            Function::Scene => ProbValue::ObjectSet(op_scene(pscene)),
            f if f.is_filter() => {
                let key = f.filter_key().expect("filter");
                let value = op.value().unwrap_or_default();
                match arg(0) {
                    ProbValue::ObjectSet(s) => ProbValue::ObjectSet(op_filter(s, pscene, key, value, vocab).map_err(lift)?),
                    ProbValue::PartSet(s) => {
                        ProbValue::PartSet(op_filter_part(s, pscene, key, value, vocab).map_err(lift)?)
                    }
                    _ => return Err(fault),
                }
            }
            Function::Unique => match arg(0) {
                ProbValue::ObjectSet(s) => {
                    let (anchor, confidence) = op_unique_select(s).map_err(lift)?;
                    ProbValue::Object { state: s.clone(), anchor, confidence }
                }
                ProbValue::PartSet(s) => {
                    let (anchor, confidence) = op_unique_select(s).map_err(lift)?;
                    ProbValue::Part { state: s.clone(), anchor, confidence }
                }
                _ => return Err(fault),
            },
            Function::Relate => {
                let ProbValue::Object { anchor, .. } = arg(0) else { return Err(fault) };
                let rel = op.relation().ok_or_else(|| lift(OpError::InvalidLiteral(op.value_inputs[0].clone())))?;
                ProbValue::ObjectSet(op_relate(*anchor, pscene, rel, cfg))
            }
            f if f.is_same() => {
                let ProbValue::Object { anchor, .. } = arg(0) else { return Err(fault) };
                ProbValue::ObjectSet(op_same(*anchor, pscene, f.attribute().expect("same_*")))
            }
            Function::Intersect | Function::Union => {
                let (ProbValue::ObjectSet(a), ProbValue::ObjectSet(b)) = (arg(0), arg(1)) else { return Err(fault) };
                let out = if op.function == Function::Intersect { op_intersect(a, b) } else { op_union(a, b) };
                ProbValue::ObjectSet(out.map_err(lift)?)
            }
            Function::Count => {
                let ProbValue::ObjectSet(s) = arg(0) else { return Err(fault) };
                ProbValue::Integer(op_count(s, cfg))
            }
            Function::Exist => {
                let ProbValue::ObjectSet(s) = arg(0) else { return Err(fault) };
                ProbValue::Boolean(op_exist(s, cfg))
            }
            f if f.is_query() => {
                let attr = f.attribute().expect("query_*");
                let answer = match arg(0) {
                    ProbValue::Object { state, .. } => op_query(state, pscene, attr, vocab, cfg.query_rule),
                    ProbValue::Part { state, .. } => op_query_part(state, pscene, attr, vocab, cfg.query_rule),
                    _ => return Err(fault),
                };
                ProbValue::Attribute(answer.map_err(lift)?)
            }
            Function::EqualInteger | Function::LessThan | Function::GreaterThan => {
                let (ProbValue::Integer(a), ProbValue::Integer(b)) = (arg(0), arg(1)) else { return Err(fault) };
                ProbValue::Boolean(match op.function {
                    Function::EqualInteger => a == b,
                    Function::LessThan => a < b,
                    _ => a > b,
                })
            }
            Function::EqualSize | Function::EqualColor | Function::EqualMaterial | Function::EqualShape => {
                let (ProbValue::Attribute(a), ProbValue::Attribute(b)) = (arg(0), arg(1)) else { return Err(fault) };
                ProbValue::Boolean(a == b)
            }
            Function::ObjectToPart => {
                let mut p = vec![0.0; parts.len()];
                match arg(0) {
                    ProbValue::Object { anchor, confidence, .. } => {
                        for (slot, &(d, _)) in p.iter_mut().zip(&parts) {
                            if d == *anchor {
                                *slot = *confidence;
                            }
                        }
                    }
                    ProbValue::ObjectSet(s) => {
                        for (slot, &(d, _)) in p.iter_mut().zip(&parts) {
                            *slot = s.0[d];
                        }
                    }
                    _ => return Err(fault),
                }
                ProbValue::PartSet(ProbState(p))
            }
            Function::PartToObject => {
                let ProbValue::PartSet(s) = arg(0) else { return Err(fault) };
                let mut p = vec![0.0f64; pscene.detections.len()];
                for (&q, &(d, _)) in s.0.iter().zip(&parts) {
                    p[d] = p[d].max(q);
                }
                ProbValue::ObjectSet(ProbState(p))
            }
            _ => return Err(fault),
        };
        values.push(v);
    }
    Ok(values)
}
