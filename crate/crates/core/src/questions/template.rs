//! Question templates.
//!
//! A template file is JSON of the form `{"templates": [ ... ]}`. Each template has
//!
//! * `id`, `family` (`query`, `count`, `exist`, `compare_integer`,
//!   `compare_attribute`, `part_query`, `part_identify`);
//! * `text`, the surface form with slot tokens;
//! * `nodes`, the program skeleton as `{type, inputs, side_inputs}` records;
//! * optional `null` (slot tokens never filled by the instantiator) and
//!   `requires_texture` (only instantiated on textured scenes).
//!
//! Besides DSL function names, `type` may be `filter` (a run of object
//! filters whose `side_inputs` are slot tokens `<Z>` size, `<C>` color,
//! `<M>` material, `<T>` texture, `<S>` shape or category) or `filter_part`
//! (a run of part filters with `<P>` part name, `<PC>` part color, `<PM>`
//! part material). A numeric suffix (`<Z2>`) tells groups apart. `relate`
//! takes the token `<R>`.
//!
//! Text rules: the tokens of one group are replaced together by a noun
//! phrase built from the filters that survive in the final program (size,
//! color, material, texture, then the noun). A missing noun becomes
//! "object"; `<S>s` asks for the plural. A `{...}` span holds one `<R>` and
//! is dropped when its relate was removed from the program. A relate added
//! during rewriting is rendered after the noun it restricts. Spaces are
//! collapsed, "a" becomes "an" before a vowel, and the first letter is
//! capitalized.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{Function, Operation, Program};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Query,
    Count,
    Exist,
    CompareInteger,
    CompareAttribute,
    PartQuery,
    PartIdentify,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Query,
        Family::Count,
        Family::Exist,
        Family::CompareInteger,
        Family::CompareAttribute,
        Family::PartQuery,
        Family::PartIdentify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Query => "query",
            Family::Count => "count",
            Family::Exist => "exist",
            Family::CompareInteger => "compare_integer",
            Family::CompareAttribute => "compare_attribute",
            Family::PartQuery => "part_query",
            Family::PartIdentify => "part_identify",
        }
    }

    pub fn is_part(self) -> bool {
        matches!(self, Family::PartQuery | Family::PartIdentify)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Family::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| format!("unknown question family {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotKind {
    Size,
    Color,
    Material,
    Texture,
    Shape,
    PartName,
    PartColor,
    PartMaterial,
    Relation,
}

impl SlotKind {
    fn from_letters(s: &str) -> Option<SlotKind> {
        Some(match s {
            "Z" => SlotKind::Size,
            "C" => SlotKind::Color,
            "M" => SlotKind::Material,
            "T" => SlotKind::Texture,
            "S" => SlotKind::Shape,
            "P" => SlotKind::PartName,
            "PC" => SlotKind::PartColor,
            "PM" => SlotKind::PartMaterial,
            "R" => SlotKind::Relation,
            _ => return None,
        })
    }

    pub fn is_part(self) -> bool {
        matches!(self, SlotKind::PartName | SlotKind::PartColor | SlotKind::PartMaterial)
    }
}

/// A parsed `<..>` token.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub kind: SlotKind,
    pub suffix: String,
}

impl Slot {
    pub fn parse(token: &str) -> Option<Slot> {
        let inner = token.strip_prefix('<')?.strip_suffix('>')?;
        let split = inner.find(|c: char| c.is_ascii_digit()).unwrap_or(inner.len());
        let (letters, suffix) = inner.split_at(split);
        if !suffix.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        Some(Slot { kind: SlotKind::from_letters(letters)?, suffix: suffix.to_string() })
    }

    pub fn group(&self) -> GroupKey {
        GroupKey { part: self.kind.is_part(), suffix: self.suffix.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub part: bool,
    pub suffix: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub key: GroupKey,
    pub slots: Vec<SlotKind>,
    pub input: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TemplateNode {
    Scene,
    Group(Group),
    Op { function: Function, inputs: Vec<usize> },
}

impl TemplateNode {
    pub fn inputs(&self) -> Vec<usize> {
        match self {
            TemplateNode::Scene => vec![],
            TemplateNode::Group(g) => vec![g.input],
            TemplateNode::Op { inputs, .. } => inputs.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub inputs: Vec<usize>,
    #[serde(default)]
    pub side_inputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub id: String,
    pub family: Family,
    pub text: String,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub null: Vec<String>,
    #[serde(default)]
    pub requires_texture: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateFile {
    pub templates: Vec<TemplateSpec>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("template {id}: {message}")]
pub struct TemplateError {
    pub id: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub id: String,
    pub family: Family,
    pub text: String,
    pub requires_texture: bool,
    pub nodes: Vec<TemplateNode>,
    pub null: HashSet<Slot>,
    /// Node index of each `relate`, in node order; the k-th `<R>` in the text belongs to the k-th entry.
    pub relates: Vec<usize>,
}

impl Template {
    pub fn from_spec(spec: &TemplateSpec) -> Result<Template, TemplateError> {
        let err = |message: String| TemplateError { id: spec.id.clone(), message };
        let mut nodes = Vec::with_capacity(spec.nodes.len());
        let mut relates = Vec::new();
        let mut node_slots: BTreeSet<Slot> = BTreeSet::new();
        let mut groups: HashSet<GroupKey> = HashSet::new();
        for (i, n) in spec.nodes.iter().enumerate() {
            if let Some(&bad) = n.inputs.iter().find(|&&j| j >= i) {
                return Err(err(format!("node {i} reads node {bad}, which is not earlier")));
            }
            let node = match n.kind.as_str() {
                "filter" | "filter_part" => {
                    let part = n.kind == "filter_part";
                    let [input] = n.inputs[..] else { return Err(err(format!("node {i}: a filter group takes one input"))) };
                    let mut key: Option<GroupKey> = None;
                    let mut slots = Vec::new();
                    for tok in &n.side_inputs {
                        let slot = Slot::parse(tok).ok_or_else(|| err(format!("node {i}: bad slot token {tok:?}")))?;
                        if slot.kind == SlotKind::Relation || slot.kind.is_part() != part {
                            return Err(err(format!("node {i}: slot {tok} does not belong in a {} group", n.kind)));
                        }
                        if key.as_ref().is_some_and(|k| *k != slot.group()) {
                            return Err(err(format!("node {i}: slots of one group must share a suffix")));
                        }
                        key = Some(slot.group());
                        slots.push(slot.kind);
                        node_slots.insert(slot);
                    }
                    let key = key.ok_or_else(|| err(format!("node {i}: empty filter group")))?;
                    if part && !slots.contains(&SlotKind::PartName) {
                        return Err(err(format!("node {i}: part groups need a <P> slot")));
                    }
                    if !groups.insert(key.clone()) {
                        return Err(err(format!("node {i}: group suffix {:?} reused", key.suffix)));
                    }
                    TemplateNode::Group(Group { key, slots, input })
                }
                "scene" => TemplateNode::Scene,
                name => {
                    let function: Function =
                        name.parse().map_err(|_| err(format!("node {i}: unknown node type {name:?}")))?;
                    if function.is_filter() {
                        return Err(err(format!("node {i}: use filter groups instead of {name}")));
                    }
                    if function == Function::Relate {
                        if n.side_inputs != ["<R>"] {
                            return Err(err(format!("node {i}: relate takes the single side input <R>")));
                        }
                        relates.push(i);
                    } else if !n.side_inputs.is_empty() {
                        return Err(err(format!("node {i}: {name} takes no side inputs")));
                    }
                    TemplateNode::Op { function, inputs: n.inputs.clone() }
                }
            };
            nodes.push(node);
        }

        // Tree shape: every node but the last is read exactly once.
        let mut reads = vec![0usize; nodes.len()];
        for n in &nodes {
            for i in n.inputs() {
                reads[i] += 1;
            }
        }
        if let Some(i) = reads.iter().take(nodes.len().saturating_sub(1)).position(|&r| r != 1) {
            return Err(err(format!("node {i} must be read exactly once")));
        }

        let skeleton = skeleton_ops(&nodes);
        Program::new(skeleton).map_err(|e| err(format!("skeleton does not type-check: {e}")))?;

        let text_slots = text_slots(&spec.text).map_err(err)?;
        let mut node_side: BTreeSet<Slot> = node_slots.clone();
        if !relates.is_empty() {
            node_side.insert(Slot { kind: SlotKind::Relation, suffix: String::new() });
        }
        let text_set: BTreeSet<Slot> = text_slots.iter().cloned().collect();
        if text_set != node_side {
            return Err(err("slot tokens in text and nodes differ".into()));
        }
        let r_count = text_slots.iter().filter(|s| s.kind == SlotKind::Relation).count();
        if r_count != relates.len() {
            return Err(err(format!("{} <R> tokens for {} relate nodes", r_count, relates.len())));
        }
        let mut null = HashSet::new();
        for tok in &spec.null {
            let slot = Slot::parse(tok).ok_or_else(|| err(format!("bad null token {tok:?}")))?;
            if !node_slots.contains(&slot) {
                return Err(err(format!("null token {tok} is not a slot of this template")));
            }
            null.insert(slot);
        }
        Ok(Template {
            id: spec.id.clone(),
            family: spec.family,
            text: spec.text.clone(),
            requires_texture: spec.requires_texture,
            nodes,
            null,
            relates,
        })
    }

    pub fn is_null(&self, key: &GroupKey, kind: SlotKind) -> bool {
        self.null.contains(&Slot { kind, suffix: key.suffix.clone() })
    }
}

/// The skeleton with every group collapsed to a single placeholder filter.
fn skeleton_ops(nodes: &[TemplateNode]) -> Vec<Operation> {
    nodes
        .iter()
        .map(|n| match n {
            TemplateNode::Scene => Operation::new(Function::Scene, vec![], vec![]),
            TemplateNode::Group(g) => {
                let f = if g.key.part { Function::FilterPartName } else { Function::FilterShape };
                Operation::new(f, vec![g.input], vec!["?".into()])
            }
            TemplateNode::Op { function, inputs } => {
                let values = if *function == Function::Relate { vec!["left".into()] } else { vec![] };
                Operation::new(*function, inputs.clone(), values)
            }
        })
        .collect()
}

/// Slot tokens of `text` in order of appearance; checks brace structure.
fn text_slots(text: &str) -> Result<Vec<Slot>, String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut braced_r = 0;
    let mut rest = text;
    while let Some(pos) = rest.find(['<', '{', '}']) {
        let c = rest.as_bytes()[pos];
        match c {
            b'{' => {
                if depth > 0 {
                    return Err("nested braces".into());
                }
                depth = 1;
                braced_r = 0;
                rest = &rest[pos + 1..];
            }
            b'}' => {
                if depth == 0 || braced_r != 1 {
                    return Err("each {...} span must hold exactly one <R>".into());
                }
                depth = 0;
                rest = &rest[pos + 1..];
            }
            _ => {
                let end = rest[pos..].find('>').ok_or("unterminated slot token")? + pos;
                let tok = &rest[pos..=end];
                let slot = Slot::parse(tok).ok_or_else(|| format!("bad slot token {tok:?}"))?;
                if slot.kind == SlotKind::Relation {
                    if depth == 0 {
                        return Err("<R> must sit inside a {...} span".into());
                    }
                    braced_r += 1;
                }
                out.push(slot);
                rest = &rest[end + 1..];
            }
        }
    }
    if depth != 0 {
        return Err("unclosed brace".into());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateSet {
    pub templates: Vec<Template>,
}

pub const DEFAULT_TEMPLATES: &str = include_str!("../templates.json");

impl TemplateSet {
    pub fn from_json(text: &str) -> Result<TemplateSet, TemplateError> {
        let file: TemplateFile =
            serde_json::from_str(text).map_err(|e| TemplateError { id: "<file>".into(), message: e.to_string() })?;
        let templates = file.templates.iter().map(Template::from_spec).collect::<Result<Vec<_>, _>>()?;
        let mut ids = HashSet::new();
        if let Some(t) = templates.iter().find(|t| !ids.insert(t.id.clone())) {
            return Err(TemplateError { id: t.id.clone(), message: "duplicate template id".into() });
        }
        Ok(TemplateSet { templates })
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::from_json(DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }
}
