//! Ground-truth scene graphs.
//!
//! Coordinates live on a square ground plane centred at the origin. `+x` is
//! "right" and `+y` is "front" (the camera looks along `-y`), so for objects
//! `i` and `j`: `j` is left of `i` iff `x_j < x_i`, and `j` is in front of
//! `i` iff `y_j > y_i`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{Attribute, ConceptVocabulary};
use crate::io::FileInfo;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("degenerate layout: objects {0} and {1} share a coordinate on the {2} axis")]
    DegenerateLayout(usize, usize, char),
    #[error("invalid scene record: {0}")]
    InvalidRecord(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartInstance {
    pub name: String,
    pub color: String,
    pub material: String,
    pub texture: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectInstance {
    pub id: usize,
    pub shape: String,
    pub category: String,
    pub size: String,
    pub color: String,
    pub material: String,
    pub texture: Option<String>,
    pub position: [f64; 2],
    /// Yaw in degrees.
    pub rotation: f64,
    pub radius: f64,
    pub parts: Vec<PartInstance>,
}

impl ObjectInstance {
    /// Body attribute; `None` only for an absent texture.
    pub fn attribute(&self, attr: Attribute) -> Option<&str> {
        match attr {
            Attribute::Size => Some(&self.size),
            Attribute::Color => Some(&self.color),
            Attribute::Material => Some(&self.material),
            Attribute::Shape => Some(&self.shape),
            Attribute::Texture => self.texture.as_deref(),
        }
    }

    pub fn part(&self, name: &str) -> Option<&PartInstance> {
        self.parts.iter().find(|p| p.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Left,
    Right,
    Front,
    Behind,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::Left, Relation::Right, Relation::Front, Relation::Behind];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::Front => "front",
            Relation::Behind => "behind",
        }
    }

    pub fn inverse(self) -> Relation {
        match self {
            Relation::Left => Relation::Right,
            Relation::Right => Relation::Left,
            Relation::Front => Relation::Behind,
            Relation::Behind => Relation::Front,
        }
    }

    /// Signed offset of `other` relative to `anchor` along this relation; positive means "holds".
    pub fn offset(self, anchor: [f64; 2], other: [f64; 2]) -> f64 {
        match self {
            Relation::Left => anchor[0] - other[0],
            Relation::Right => other[0] - anchor[0],
            Relation::Front => other[1] - anchor[1],
            Relation::Behind => anchor[1] - other[1],
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, SceneError> {
        Relation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| SceneError::InvalidRecord(format!("unknown relation {s:?}")))
    }
}

/// `left[i]` lists the objects left of object `i`, and so on; each list is sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relationships {
    pub left: Vec<Vec<usize>>,
    pub right: Vec<Vec<usize>>,
    pub front: Vec<Vec<usize>>,
    pub behind: Vec<Vec<usize>>,
}

impl Relationships {
    pub fn get(&self, relation: Relation) -> &[Vec<usize>] {
        match relation {
            Relation::Left => &self.left,
            Relation::Right => &self.right,
            Relation::Front => &self.front,
            Relation::Behind => &self.behind,
        }
    }

    pub fn related(&self, relation: Relation, anchor: usize) -> &[usize] {
        &self.get(relation)[anchor]
    }
}

/// Builds relations from centres. Coordinates equal on an axis are an error.
pub fn derive_relations(objects: &[ObjectInstance]) -> Result<Relationships, SceneError> {
    let positions: Vec<[f64; 2]> = objects.iter().map(|o| o.position).collect();
    relations_from_positions(&positions, false)
}

/// Like [`derive_relations`], but equal coordinates are ordered by index
/// (the lower index counts as left / behind). Used for detected layouts.
pub fn derive_relations_tiebreak(positions: &[[f64; 2]]) -> Relationships {
    relations_from_positions(positions, true).expect("tie-break never fails")
}

fn relations_from_positions(positions: &[[f64; 2]], tiebreak: bool) -> Result<Relationships, SceneError> {
    let n = positions.len();
    let mut rel = Relationships {
        left: vec![Vec::new(); n],
        right: vec![Vec::new(); n],
        front: vec![Vec::new(); n],
        behind: vec![Vec::new(); n],
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (pi, pj) = (positions[i], positions[j]);
            // j left of i
            let left = match pj[0].partial_cmp(&pi[0]) {
                Some(std::cmp::Ordering::Less) => true,
                Some(std::cmp::Ordering::Greater) => false,
                _ if tiebreak => j < i,
                _ => return Err(SceneError::DegenerateLayout(i.min(j), i.max(j), 'x')),
            };
            // j in front of i
            let front = match pj[1].partial_cmp(&pi[1]) {
                Some(std::cmp::Ordering::Greater) => true,
                Some(std::cmp::Ordering::Less) => false,
                _ if tiebreak => j > i,
                _ => return Err(SceneError::DegenerateLayout(i.min(j), i.max(j), 'y')),
            };
            if left {
                rel.left[i].push(j);
            } else {
                rel.right[i].push(j);
            }
            if front {
                rel.front[i].push(j);
            } else {
                rel.behind[i].push(j);
            }
        }
    }
    Ok(rel)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_digest: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub scene_id: u64,
    pub objects: Vec<ObjectInstance>,
    pub relationships: Relationships,
    pub provenance: Provenance,
}

impl Scene {
    /// Assembles a scene, deriving relations from object positions.
    pub fn from_objects(scene_id: u64, objects: Vec<ObjectInstance>, provenance: Provenance) -> Result<Scene, SceneError> {
        let relationships = derive_relations(&objects)?;
        Ok(Scene { scene_id, objects, relationships, provenance })
    }

    pub fn has_textures(&self) -> bool {
        self.objects.iter().any(|o| o.texture.is_some())
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// Geometric rules shared by the sampler and the validator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutRules {
    pub min_objects: usize,
    pub max_objects: usize,
    /// Extra clearance between footprints, in scene units.
    pub margin: f64,
    /// Side of the square ground plane, centred at the origin.
    pub plane_size: f64,
    /// Minimum separation of centres along each axis, so relations are never ties.
    pub min_axis_gap: f64,
    pub size_radii: BTreeMap<String, f64>,
}

impl Default for LayoutRules {
    fn default() -> Self {
        LayoutRules {
            min_objects: 3,
            max_objects: 10,
            margin: 0.4,
            plane_size: 10.0,
            min_axis_gap: 0.05,
            size_radii: [("large".to_string(), 1.0), ("small".to_string(), 0.6)].into_iter().collect(),
        }
    }
}

impl LayoutRules {
    pub fn radius_of(&self, size: &str) -> Option<f64> {
        self.size_radii.get(size).copied()
    }

    pub fn half_extent(&self) -> f64 {
        self.plane_size / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    TooFewObjects(usize, usize),
    TooManyObjects(usize, usize),
    IdMismatch { index: usize, id: usize },
    UnknownValue { object: usize, attribute: &'static str, value: String },
    WrongCategory { object: usize, shape: String, category: String },
    UnknownPart { object: usize, part: String },
    NonPositiveRadius(usize),
    OutsidePlane(usize),
    Overlap(usize, usize),
    InconsistentRelations(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewObjects(n, min) => write!(f, "object count below {min} ({n})"),
            Violation::TooManyObjects(n, max) => write!(f, "object count above {max} ({n})"),
            Violation::IdMismatch { index, id } => write!(f, "object at index {index} has id {id}"),
            Violation::UnknownValue { object, attribute, value } => {
                write!(f, "object {object}: {attribute} {value:?} is not in the vocabulary")
            }
            Violation::WrongCategory { object, shape, category } => {
                write!(f, "object {object}: shape {shape:?} does not belong to category {category:?}")
            }
            Violation::UnknownPart { object, part } => write!(f, "object {object}: invalid part {part:?}"),
            Violation::NonPositiveRadius(i) => write!(f, "object {i}: radius must be positive"),
            Violation::OutsidePlane(i) => write!(f, "object {i}: footprint leaves the ground plane"),
            Violation::Overlap(i, j) => write!(f, "overlap between objects {i} and {j}"),
            Violation::InconsistentRelations(msg) => write!(f, "relationships inconsistent with positions: {msg}"),
        }
    }
}

/// Returns every violated scene invariant; empty iff the scene is valid.
pub fn validate_scene(scene: &Scene, vocab: &ConceptVocabulary, rules: &LayoutRules) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = scene.objects.len();
    if n < rules.min_objects {
        out.push(Violation::TooFewObjects(n, rules.min_objects));
    }
    if n > rules.max_objects {
        out.push(Violation::TooManyObjects(n, rules.max_objects));
    }
    let half = rules.half_extent();
    for (index, o) in scene.objects.iter().enumerate() {
        if o.id != index {
            out.push(Violation::IdMismatch { index, id: o.id });
        }
        let mut check = |attribute: Attribute, value: &str| {
            if vocab.index_of(attribute, value).is_none() {
                out.push(Violation::UnknownValue { object: index, attribute: attribute.name(), value: value.to_string() });
            }
        };
        check(Attribute::Shape, &o.shape);
        check(Attribute::Size, &o.size);
        check(Attribute::Color, &o.color);
        check(Attribute::Material, &o.material);
        if let Some(t) = &o.texture {
            check(Attribute::Texture, t);
        }
        for p in &o.parts {
            check(Attribute::Color, &p.color);
            check(Attribute::Material, &p.material);
            if let Some(t) = &p.texture {
                check(Attribute::Texture, t);
            }
        }
        if vocab.category_of(&o.shape).is_some_and(|c| c != o.category) {
            out.push(Violation::WrongCategory { object: index, shape: o.shape.clone(), category: o.category.clone() });
        }
        let valid_parts = vocab.parts_of(&o.shape);
        let mut seen = Vec::new();
        for p in &o.parts {
            if !valid_parts.contains(&p.name) || seen.contains(&&p.name) {
                out.push(Violation::UnknownPart { object: index, part: p.name.clone() });
            }
            seen.push(&p.name);
        }
        if !(o.radius > 0.0) {
            out.push(Violation::NonPositiveRadius(index));
        }
        if o.position[0].abs() + o.radius > half || o.position[1].abs() + o.radius > half {
            out.push(Violation::OutsidePlane(index));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&scene.objects[i], &scene.objects[j]);
            let d = ((a.position[0] - b.position[0]).powi(2) + (a.position[1] - b.position[1]).powi(2)).sqrt();
            if d < a.radius + b.radius + rules.margin {
                out.push(Violation::Overlap(i, j));
            }
        }
    }
    match derive_relations(&scene.objects) {
        Ok(expected) if expected == scene.relationships => {}
        Ok(_) => out.push(Violation::InconsistentRelations("adjacency lists differ from coordinates".into())),
        Err(e) => out.push(Violation::InconsistentRelations(e.to_string())),
    }
    out
}

// ---- JSON wire format ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartRecord {
    pub color: String,
    pub material: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub shape: String,
    pub category: String,
    pub size: String,
    pub color: String,
    pub material: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<String>,
    #[serde(rename = "3d_coords")]
    pub coords: [f64; 3],
    pub rotation: f64,
    pub radius: f64,
    pub parts: IndexMap<String, PartRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub image_index: u64,
    pub objects: Vec<ObjectRecord>,
    pub relationships: Relationships,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub info: FileInfo,
    pub scenes: Vec<SceneRecord>,
}

impl From<&Scene> for SceneRecord {
    fn from(scene: &Scene) -> Self {
        let objects = scene
            .objects
            .iter()
            .map(|o| ObjectRecord {
                shape: o.shape.clone(),
                category: o.category.clone(),
                size: o.size.clone(),
                color: o.color.clone(),
                material: o.material.clone(),
                texture: o.texture.clone(),
                coords: [o.position[0], o.position[1], 0.0],
                rotation: o.rotation,
                radius: o.radius,
                parts: o
                    .parts
                    .iter()
                    .map(|p| {
                        let r = PartRecord { color: p.color.clone(), material: p.material.clone(), texture: p.texture.clone() };
                        (p.name.clone(), r)
                    })
                    .collect(),
            })
            .collect();
        SceneRecord {
            image_index: scene.scene_id,
            objects,
            relationships: scene.relationships.clone(),
            provenance: scene.provenance.clone(),
        }
    }
}

impl TryFrom<&SceneRecord> for Scene {
    type Error = SceneError;

    fn try_from(record: &SceneRecord) -> Result<Self, SceneError> {
        let objects: Vec<ObjectInstance> = record
            .objects
            .iter()
            .enumerate()
            .map(|(id, o)| ObjectInstance {
                id,
                shape: o.shape.clone(),
                category: o.category.clone(),
                size: o.size.clone(),
                color: o.color.clone(),
                material: o.material.clone(),
                texture: o.texture.clone(),
                position: [o.coords[0], o.coords[1]],
                rotation: o.rotation,
                radius: o.radius,
                parts: o
                    .parts
                    .iter()
                    .map(|(name, p)| PartInstance {
                        name: name.clone(),
                        color: p.color.clone(),
                        material: p.material.clone(),
                        texture: p.texture.clone(),
                    })
                    .collect(),
            })
            .collect();
        let n = objects.len();
        let rel = &record.relationships;
        for (name, lists) in [("left", &rel.left), ("right", &rel.right), ("front", &rel.front), ("behind", &rel.behind)] {
            if lists.len() != n || lists.iter().flatten().any(|&j| j >= n) {
                return Err(SceneError::InvalidRecord(format!(
                    "scene {}: {name} relationships do not match {n} objects",
                    record.image_index
                )));
            }
        }
        Ok(Scene {
            scene_id: record.image_index,
            objects,
            relationships: record.relationships.clone(),
            provenance: record.provenance.clone(),
        })
    }
}

impl SceneFile {
    pub fn new(info: FileInfo, scenes: &[Scene]) -> Self {
        SceneFile { info, scenes: scenes.iter().map(SceneRecord::from).collect() }
    }

    pub fn to_scenes(&self) -> Result<Vec<Scene>, SceneError> {
        self.scenes.iter().map(Scene::try_from).collect()
    }
}
