//! Concept vocabulary and distribution control.
//!
//! The vocabulary fixes the closed sets of shapes, categories, colors,
//! materials, sizes, textures and per-shape part names. Canonical list order
//! matters: it defines the concept index used by the power-law distributions
//! and by the co-distribution matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConceptError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
}

pub type Result<T> = std::result::Result<T, ConceptError>;

/// An attribute axis of an object (or part).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Size,
    Color,
    Material,
    Shape,
    Texture,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Size,
        Attribute::Color,
        Attribute::Material,
        Attribute::Shape,
        Attribute::Texture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Size => "size",
            Attribute::Color => "color",
            Attribute::Material => "material",
            Attribute::Shape => "shape",
            Attribute::Texture => "texture",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The axes whose marginal distribution can be controlled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistAxis {
    Shape,
    Color,
    Material,
}

impl DistAxis {
    pub fn attribute(self) -> Attribute {
        match self {
            DistAxis::Shape => Attribute::Shape,
            DistAxis::Color => Attribute::Color,
            DistAxis::Material => Attribute::Material,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptVocabulary {
    pub shapes: Vec<String>,
    pub categories: Vec<String>,
    pub shape_to_category: BTreeMap<String, String>,
    pub colors: Vec<String>,
    pub materials: Vec<String>,
    pub sizes: Vec<String>,
    pub textures: Vec<String>,
    pub parts: BTreeMap<String, Vec<String>>,
    /// Parts eligible for attribute perturbation in the mid and hard variants.
    pub exterior_parts: BTreeMap<String, Vec<String>>,
}

pub const SHAPE_COUNT: usize = 21;
pub const CATEGORY_COUNT: usize = 5;
pub const COLOR_COUNT: usize = 8;

const CATEGORY_TABLE: [(&str, &[&str]); CATEGORY_COUNT] = [
    ("airplane", &["airliner", "biplane", "jet", "fighter"]),
    ("bicycle", &["utility bike", "tandem bike", "road bike", "mountain bike"]),
    ("bus", &["articulated bus", "double bus", "regular bus", "school bus"]),
    ("car", &["truck", "suv", "minivan", "sedan", "wagon"]),
    ("motorcycle", &["chopper", "scooter", "cruiser", "dirtbike"]),
];

const CAR_PARTS: &[&str] = &[
    "front left wheel",
    "front right wheel",
    "back left wheel",
    "back right wheel",
    "left door",
    "right door",
    "hood",
    "trunk",
];

// (shape, parts, parts excluded from perturbation)
const PART_TABLE: [(&str, &[&str], &[&str]); SHAPE_COUNT] = [
    ("airliner", &["fuselage", "left wing", "right wing", "tail", "left engine", "right engine", "wheel"], &["wheel"]),
    ("biplane", &["fuselage", "upper wing", "lower wing", "tail", "propeller", "wheel"], &["wheel"]),
    ("jet", &["fuselage", "left wing", "right wing", "tail", "engine", "wheel"], &["engine"]),
    ("fighter", &["fuselage", "left wing", "right wing", "tail", "cockpit", "engine"], &["engine"]),
    ("utility bike", &["frame", "front wheel", "back wheel", "handle", "saddle", "basket"], &[]),
    ("tandem bike", &["frame", "front wheel", "back wheel", "handle", "front saddle", "back saddle"], &[]),
    ("road bike", &["frame", "front wheel", "back wheel", "handle", "saddle"], &[]),
    ("mountain bike", &["frame", "front wheel", "back wheel", "handle", "saddle", "fork"], &["fork"]),
    ("articulated bus", &["front wheel", "middle wheel", "back wheel", "door", "roof", "bumper", "joint"], &["joint"]),
    ("double bus", &["front wheel", "back wheel", "door", "roof", "bumper", "upper deck"], &[]),
    ("regular bus", &["front wheel", "back wheel", "door", "roof", "bumper", "mirror"], &["mirror"]),
    ("school bus", &["front wheel", "back wheel", "door", "roof", "bumper", "stop sign"], &[]),
    ("truck", &["front left wheel", "front right wheel", "back left wheel", "back right wheel", "left door", "right door", "hood", "bed"], &["back right wheel"]),
    ("suv", CAR_PARTS, &["back right wheel"]),
    ("minivan", CAR_PARTS, &["back right wheel"]),
    ("sedan", CAR_PARTS, &["back right wheel"]),
    ("wagon", &["front left wheel", "front right wheel", "back left wheel", "back right wheel", "left door", "right door", "hood", "roof"], &["back right wheel"]),
    ("chopper", &["front wheel", "back wheel", "handle", "seat", "fender", "exhaust"], &["exhaust"]),
    ("scooter", &["front wheel", "back wheel", "handle", "seat", "footrest"], &[]),
    ("cruiser", &["front wheel", "back wheel", "handle", "seat", "fender", "headlight", "exhaust"], &["exhaust"]),
    ("dirtbike", &["front wheel", "back wheel", "handle", "seat", "fender"], &[]),
];

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Default for ConceptVocabulary {
    fn default() -> Self {
        let mut shapes = Vec::new();
        let mut shape_to_category = BTreeMap::new();
        for (category, members) in CATEGORY_TABLE {
            for shape in members {
                shapes.push(shape.to_string());
                shape_to_category.insert(shape.to_string(), category.to_string());
            }
        }
        let mut parts = BTreeMap::new();
        let mut exterior_parts = BTreeMap::new();
        for (shape, names, hidden) in PART_TABLE {
            parts.insert(shape.to_string(), strings(names));
            let exterior = names.iter().filter(|p| !hidden.contains(p)).copied().collect::<Vec<_>>();
            exterior_parts.insert(shape.to_string(), strings(&exterior));
        }
        ConceptVocabulary {
            shapes,
            categories: CATEGORY_TABLE.iter().map(|(c, _)| c.to_string()).collect(),
            shape_to_category,
            colors: strings(&["gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow"]),
            materials: strings(&["rubber", "metal"]),
            sizes: strings(&["large", "small"]),
            textures: strings(&[
                "checkered",
                "striped",
                "dotted",
                "marbled",
                "wooden",
                "camouflage",
                "zigzag",
                "honeycomb",
            ]),
            parts,
            exterior_parts,
        }
    }
}

fn check_unique(what: &str, xs: &[String]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for x in xs {
        if !seen.insert(x.as_str()) {
            return Err(ConceptError::InvalidVocabulary(format!("duplicate {what} name {x:?}")));
        }
    }
    if xs.is_empty() {
        return Err(ConceptError::InvalidVocabulary(format!("empty {what} list")));
    }
    Ok(())
}

impl ConceptVocabulary {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ConceptError::InvalidVocabulary(msg));
        if self.shapes.len() != SHAPE_COUNT {
            return bad(format!("expected {SHAPE_COUNT} shapes, found {}", self.shapes.len()));
        }
        if self.categories.len() != CATEGORY_COUNT {
            return bad(format!("expected {CATEGORY_COUNT} categories, found {}", self.categories.len()));
        }
        if self.colors.len() != COLOR_COUNT {
            return bad(format!("expected {COLOR_COUNT} colors, found {}", self.colors.len()));
        }
        check_unique("shape", &self.shapes)?;
        check_unique("category", &self.categories)?;
        check_unique("color", &self.colors)?;
        check_unique("material", &self.materials)?;
        check_unique("size", &self.sizes)?;
        check_unique("texture", &self.textures)?;
        if self.shape_to_category.len() != self.shapes.len() {
            return bad("shape_to_category must map every shape exactly once".into());
        }
        for shape in &self.shapes {
            match self.shape_to_category.get(shape) {
                Some(c) if self.categories.contains(c) => {}
                Some(c) => return bad(format!("shape {shape:?} maps to unknown category {c:?}")),
                None => return bad(format!("shape {shape:?} has no category")),
            }
            let parts = match self.parts.get(shape) {
                Some(p) => p,
                None => return bad(format!("shape {shape:?} has no part list")),
            };
            check_unique("part", parts)?;
            if let Some(ext) = self.exterior_parts.get(shape) {
                if let Some(p) = ext.iter().find(|p| !parts.contains(p)) {
                    return bad(format!("exterior part {p:?} is not a part of {shape:?}"));
                }
            }
        }
        for category in &self.categories {
            if !self.shape_to_category.values().any(|c| c == category) {
                return bad(format!("category {category:?} has no shapes"));
            }
        }
        Ok(())
    }

    pub fn values(&self, attr: Attribute) -> &[String] {
        match attr {
            Attribute::Size => &self.sizes,
            Attribute::Color => &self.colors,
            Attribute::Material => &self.materials,
            Attribute::Shape => &self.shapes,
            Attribute::Texture => &self.textures,
        }
    }

    pub fn axis_len(&self, axis: DistAxis) -> usize {
        self.values(axis.attribute()).len()
    }

    pub fn index_of(&self, attr: Attribute, value: &str) -> Option<usize> {
        self.values(attr).iter().position(|v| v == value)
    }

    pub fn category_index(&self, category: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == category)
    }

    pub fn category_of(&self, shape: &str) -> Option<&str> {
        self.shape_to_category.get(shape).map(String::as_str)
    }

    /// Shape indices belonging to `category`, in canonical shape order.
    pub fn shapes_in_category(&self, category: &str) -> Vec<usize> {
        self.shapes
            .iter()
            .enumerate()
            .filter(|(_, s)| self.category_of(s) == Some(category))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn parts_of(&self, shape: &str) -> &[String] {
        self.parts.get(shape).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Perturbable parts of `shape`; falls back to the full part list.
    pub fn exterior_parts_of(&self, shape: &str) -> &[String] {
        match self.exterior_parts.get(shape) {
            Some(p) => p,
            None => self.parts_of(shape),
        }
    }

    /// Every part name used by any shape, sorted and deduplicated.
    pub fn all_part_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.parts.values().flatten().cloned().collect();
        names.sort();
        names.dedup();
        names
    }
}

/// Partial vocabulary loaded from a configuration file; present fields replace defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyOverrides {
    pub colors: Option<Vec<String>>,
    pub materials: Option<Vec<String>>,
    pub sizes: Option<Vec<String>>,
    pub textures: Option<Vec<String>>,
    pub parts: Option<BTreeMap<String, Vec<String>>>,
    pub exterior_parts: Option<BTreeMap<String, Vec<String>>>,
}

impl VocabularyOverrides {
    pub fn apply(&self, base: &ConceptVocabulary) -> Result<ConceptVocabulary> {
        let mut vocab = base.clone();
        if let Some(v) = &self.colors {
            vocab.colors = v.clone();
        }
        if let Some(v) = &self.materials {
            vocab.materials = v.clone();
        }
        if let Some(v) = &self.sizes {
            vocab.sizes = v.clone();
        }
        if let Some(v) = &self.textures {
            vocab.textures = v.clone();
        }
        if let Some(parts) = &self.parts {
            for (shape, names) in parts {
                if !vocab.shapes.contains(shape) {
                    return Err(ConceptError::InvalidVocabulary(format!("part override for unknown shape {shape:?}")));
                }
                vocab.parts.insert(shape.clone(), names.clone());
                // keep exterior lists consistent with the replaced part list
                vocab.exterior_parts.remove(shape);
            }
        }
        if let Some(ext) = &self.exterior_parts {
            for (shape, names) in ext {
                vocab.exterior_parts.insert(shape.clone(), names.clone());
            }
        }
        vocab.validate()?;
        Ok(vocab)
    }
}

/// A sampling distribution over one axis of the vocabulary, in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptDistribution {
    axis: DistAxis,
    weights: Vec<f64>,
}

const SUM_TOLERANCE: f64 = 1e-9;

impl ConceptDistribution {
    pub fn new(axis: DistAxis, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(ConceptError::InvalidParameter("empty distribution".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ConceptError::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ConceptError::InvalidParameter(format!("weights sum to {sum}, expected 1")));
        }
        Ok(ConceptDistribution { axis, weights })
    }

    /// Normalizes nonnegative `weights` to a distribution.
    pub fn normalized(axis: DistAxis, weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(ConceptError::InvalidParameter("weights must be nonnegative with positive sum".into()));
        }
        Self::new(axis, weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(axis: DistAxis, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(ConceptError::InvalidParameter("concept count must be at least 1".into()));
        }
        Self::new(axis, vec![1.0 / k as f64; k])
    }

    pub fn axis(&self) -> DistAxis {
        self.axis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sampler(&self) -> ConceptSampler {
        ConceptSampler {
            index: WeightedIndex::new(&self.weights).expect("validated distribution"),
        }
    }
}

/// Inverse-CDF sampler for a [`ConceptDistribution`].
#[derive(Clone, Debug)]
pub struct ConceptSampler {
    index: WeightedIndex<f64>,
}

impl ConceptSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

pub fn sample_concept<R: Rng + ?Sized>(dist: &ConceptDistribution, rng: &mut R) -> usize {
    dist.sampler().sample(rng)
}

/// Power-law weights `a^-i` for `i = 0..k`, normalized to sum to one.
pub fn power_law_weights(a: f64, k: usize) -> Result<Vec<f64>> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(ConceptError::InvalidParameter(format!("tail parameter must be positive, got {a}")));
    }
    if k == 0 {
        return Err(ConceptError::InvalidParameter("concept count must be at least 1".into()));
    }
    let raw: Vec<f64> = (0..k).map(|i| a.powi(-(i as i32))).collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

pub fn power_law_distribution(axis: DistAxis, a: f64, k: usize) -> Result<ConceptDistribution> {
    ConceptDistribution::new(axis, power_law_weights(a, k)?)
}

/// Dataset variants of the concept-distribution factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistVariant {
    #[serde(rename = "bal")]
    Bal,
    #[serde(rename = "slt")]
    Slt,
    #[serde(rename = "long")]
    Long,
    #[serde(rename = "head")]
    Head,
    #[serde(rename = "tail")]
    Tail,
    #[serde(rename = "oppo")]
    Oppo,
}

impl DistVariant {
    pub const ALL: [DistVariant; 6] = [
        DistVariant::Bal,
        DistVariant::Slt,
        DistVariant::Long,
        DistVariant::Head,
        DistVariant::Tail,
        DistVariant::Oppo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistVariant::Bal => "bal",
            DistVariant::Slt => "slt",
            DistVariant::Long => "long",
            DistVariant::Head => "head",
            DistVariant::Tail => "tail",
            DistVariant::Oppo => "oppo",
        }
    }
}

impl fmt::Display for DistVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistVariant {
    type Err = ConceptError;
    fn from_str(s: &str) -> Result<Self> {
        DistVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ConceptError::InvalidParameter(format!("unknown distribution variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributionParams {
    pub slt_a: f64,
    pub long_a: f64,
    /// Fraction of the concept list (by index) assigned to the head split.
    pub head_cut: f64,
}

impl Default for DistributionParams {
    fn default() -> Self {
        DistributionParams { slt_a: 1.3, long_a: 2.0, head_cut: 0.5 }
    }
}

impl DistributionParams {
    /// Number of head concepts out of `k`; always leaves a nonempty tail when `k >= 2`.
    pub fn head_len(&self, k: usize) -> usize {
        let n = (k as f64 * self.head_cut).ceil() as usize;
        n.clamp(1, k.saturating_sub(1).max(1))
    }
}

pub fn variant_distribution(
    kind: DistVariant,
    axis: DistAxis,
    vocab: &ConceptVocabulary,
    params: &DistributionParams,
) -> Result<ConceptDistribution> {
    if !(params.head_cut > 0.0 && params.head_cut < 1.0) {
        return Err(ConceptError::InvalidParameter(format!("head_cut must be in (0,1), got {}", params.head_cut)));
    }
    let k = vocab.axis_len(axis);
    match kind {
        DistVariant::Bal => ConceptDistribution::uniform(axis, k),
        DistVariant::Slt => power_law_distribution(axis, params.slt_a, k),
        DistVariant::Long => power_law_distribution(axis, params.long_a, k),
        DistVariant::Oppo => {
            let mut w = power_law_weights(params.long_a, k)?;
            w.reverse();
            ConceptDistribution::new(axis, w)
        }
        DistVariant::Head | DistVariant::Tail => {
            if k < 2 {
                return Err(ConceptError::InvalidParameter(format!(
                    "{kind} split needs at least two concepts on the {axis:?} axis"
                )));
            }
            let cut = params.head_len(k);
            let long = power_law_weights(params.long_a, k)?;
            let masked = long
                .into_iter()
                .enumerate()
                .map(|(i, w)| if (i < cut) == (kind == DistVariant::Head) { w } else { 0.0 })
                .collect();
            ConceptDistribution::normalized(axis, masked)
        }
    }
}

/// Variants of the concept-compositionality factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoMode {
    #[serde(rename = "co-0")]
    Co0,
    #[serde(rename = "co-1")]
    Co1,
    #[serde(rename = "co-2")]
    Co2,
}

impl CoMode {
    pub const ALL: [CoMode; 3] = [CoMode::Co0, CoMode::Co1, CoMode::Co2];

    pub fn name(self) -> &'static str {
        match self {
            CoMode::Co0 => "co-0",
            CoMode::Co1 => "co-1",
            CoMode::Co2 => "co-2",
        }
    }
}

impl fmt::Display for CoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CoMode {
    type Err = ConceptError;
    fn from_str(s: &str) -> Result<Self> {
        CoMode::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ConceptError::InvalidParameter(format!("unknown compositionality variant {s:?}")))
    }
}

/// Conditional color distribution per shape: `rows[i][j]` is the probability
/// that shape `i` takes color `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoDistributionMatrix {
    rows: Vec<Vec<f64>>,
}

pub const DEFAULT_CO_PEAK: f64 = 0.8;

impl CoDistributionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(ConceptError::InvalidParameter(format!("row {i} has entries outside [0,1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(ConceptError::InvalidParameter(format!("row {i} sums to {sum}")));
            }
        }
        Ok(CoDistributionMatrix { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, shape: usize) -> ConceptDistribution {
        ConceptDistribution { axis: DistAxis::Color, weights: self.rows[shape].clone() }
    }
}

fn peaked_row(k: usize, assigned: usize, peak: f64) -> Vec<f64> {
    let rest = (1.0 - peak) / (k - 1) as f64;
    (0..k).map(|j| if j == assigned { peak } else { rest }).collect()
}

pub fn co_matrix(mode: CoMode, vocab: &ConceptVocabulary, peak: f64) -> Result<CoDistributionMatrix> {
    let n_colors = vocab.colors.len();
    let flat = 1.0 / n_colors as f64;
    if mode != CoMode::Co0 && !(peak > flat && peak <= 1.0) {
        return Err(ConceptError::InvalidParameter(format!("peak must be in (1/{n_colors}, 1], got {peak}")));
    }
    let rows = vocab
        .shapes
        .iter()
        .map(|shape| {
            let category = vocab.category_of(shape).expect("validated vocabulary");
            match mode {
                CoMode::Co0 => vec![flat; n_colors],
                CoMode::Co1 => {
                    let position = vocab
                        .shapes_in_category(category)
                        .iter()
                        .position(|&i| vocab.shapes[i] == *shape)
                        .expect("shape in own category");
                    peaked_row(n_colors, position % n_colors, peak)
                }
                CoMode::Co2 => {
                    let c = vocab.category_index(category).expect("validated vocabulary");
                    peaked_row(n_colors, c % n_colors, peak)
                }
            }
        })
        .collect();
    CoDistributionMatrix::new(rows)
}
