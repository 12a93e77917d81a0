//! Resolved settings for each subcommand.
//!
//! Precedence is flag, then config file, then the defaults below. A config
//! file is TOML with optional top-level `seed` and `jobs` and one table per
//! subcommand:
//!
//! ```toml
//! seed = 7
//! [generate]
//! num_scenes = 200
//! visual = "hard"
//! [generate.distribution]
//! long_a = 2.0
//! [perturb]
//! epsilon = 0.3
//! [execute]
//! relation_mode = "hard"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use shiftbench::concepts::{CoMode, DistVariant, DistributionParams, DEFAULT_CO_PEAK};
use shiftbench::exec_prob::{ProbExecConfig, QueryRule, RelationMode};
use shiftbench::perception::DEFAULT_PIXELS_PER_UNIT;
use shiftbench::questions::{Family, Redundancy};
use shiftbench::sampler::Visual;

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExecMode {
    Det,
    Prob,
    DetHardened,
}

/// `object=N,part=M`; either key may be omitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuestionsPerScene {
    pub object: Option<usize>,
    pub part: Option<usize>,
}

impl FromStr for QuestionsPerScene {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = QuestionsPerScene { object: None, part: None };
        for item in s.split(',').filter(|x| !x.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| format!("expected key=value, found {item:?}"))?;
            let n: usize = v.trim().parse().map_err(|_| format!("invalid count {v:?}"))?;
            match k.trim() {
                "object" => out.object = Some(n),
                "part" => out.part = Some(n),
                other => return Err(format!("unknown question kind {other:?}")),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for QuestionsPerScene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "object={},part={}", self.object.unwrap_or(0), self.part.unwrap_or(0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSettings {
    pub num_scenes: u64,
    pub visual: Visual,
    pub dist: DistVariant,
    /// Shape-conditioned colors; when set it owns the color axis.
    pub comp: Option<CoMode>,
    pub co_peak: f64,
    pub redundancy: Redundancy,
    pub object_questions: usize,
    pub part_questions: usize,
    pub retry_budget: usize,
    pub family_weights: BTreeMap<Family, f64>,
    pub split: Split,
    pub distribution: DistributionParams,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        GenerateSettings {
            num_scenes: 100,
            visual: Visual::Mid,
            dist: DistVariant::Bal,
            comp: None,
            co_peak: DEFAULT_CO_PEAK,
            redundancy: Redundancy::Random,
            object_questions: 10,
            part_questions: 10,
            retry_budget: 200,
            family_weights: BTreeMap::new(),
            split: Split::Train,
            distribution: DistributionParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSettings {
    pub epsilon: f64,
    pub pos_sigma: f64,
    pub miss: f64,
    pub spurious: f64,
    pub pixels_per_unit: f64,
}

impl Default for PerturbSettings {
    fn default() -> Self {
        PerturbSettings { epsilon: 0.0, pos_sigma: 0.0, miss: 0.0, spurious: 0.0, pixels_per_unit: DEFAULT_PIXELS_PER_UNIT }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecuteSettings {
    pub mode: ExecMode,
    pub threshold: f64,
    pub inclusive_threshold: bool,
    pub relate_a: f64,
    pub relate_b: f64,
    pub relation_mode: RelationMode,
    pub query_rule: QueryRule,
}

impl Default for ExecuteSettings {
    fn default() -> Self {
        let p = ProbExecConfig::default();
        ExecuteSettings {
            mode: ExecMode::Det,
            threshold: p.select_threshold,
            inclusive_threshold: p.inclusive_threshold,
            relate_a: p.a,
            relate_b: p.b,
            relation_mode: p.relation_mode,
            query_rule: p.query_rule,
        }
    }
}

impl ExecuteSettings {
    pub fn prob_config(&self) -> ProbExecConfig {
        ProbExecConfig {
            a: self.relate_a,
            b: self.relate_b,
            select_threshold: self.threshold,
            inclusive_threshold: self.inclusive_threshold,
            relation_mode: self.relation_mode,
            query_rule: self.query_rule,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub generate: GenerateSettings,
    pub perturb: PerturbSettings,
    pub execute: ExecuteSettings,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
        let Some(path) = path else { return Ok(ConfigFile::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
