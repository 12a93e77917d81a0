//! Reproducible pipelines: generate, perturb, execute, evaluate.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, bad or
//! conflicting config values), 3 for data errors (unreadable, mismatched or
//! inconsistent input files, generation that cannot be satisfied).

pub mod pipeline;
pub mod settings;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use shiftbench::concepts::{CoMode, ConceptVocabulary, DistVariant};
use shiftbench::evaluation::{relative_degrade, render_grid, score, AccuracyGrid, Factor, PredictionsFile, RD_DISCREPANCY_NOTE};
use shiftbench::exec_prob::{PerceivedSceneFile, QueryRule, RelationMode, ValueOrder};
use shiftbench::io::{self, FileInfo, IoError};
use shiftbench::questions::{QuestionFile, Redundancy, TemplateSet};
use shiftbench::sampler::Visual;
use shiftbench::scene::SceneFile;
use shiftbench::seed::digest_hex;
use thiserror::Error;

use settings::{ConfigFile, ExecMode, QuestionsPerScene, Split};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "shiftbench", version, about = "Scene-graph VQA benchmark pipelines under controlled domain shift")]
pub struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML file overriding compiled defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; results never depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample scenes and questions for one split.
    Generate(GenerateArgs),
    /// Simulate perception noise over a scene file.
    Perturb(PerturbArgs),
    /// Answer questions with one of the executors.
    Execute(ExecuteArgs),
    /// Score predictions, or fill an accuracy grid and report relative degrade.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub num_scenes: Option<u64>,
    #[arg(long)]
    pub visual: Option<Visual>,
    #[arg(long)]
    pub dist: Option<DistVariant>,
    #[arg(long)]
    pub comp: Option<CoMode>,
    #[arg(long)]
    pub co_peak: Option<f64>,
    #[arg(long)]
    pub redundancy: Option<Redundancy>,
    /// e.g. `object=10,part=10`
    #[arg(long)]
    pub questions_per_scene: Option<QuestionsPerScene>,
    #[arg(long, value_enum)]
    pub split: Option<Split>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub pos_sigma: Option<f64>,
    #[arg(long)]
    pub miss: Option<f64>,
    #[arg(long)]
    pub spurious: Option<f64>,
}

fn parse_relation_mode(s: &str) -> Result<RelationMode, String> {
    match s {
        "soft" => Ok(RelationMode::Soft),
        "hard" => Ok(RelationMode::Hard),
        _ => Err(format!("expected soft or hard, found {s:?}")),
    }
}

fn parse_query_rule(s: &str) -> Result<QueryRule, String> {
    match s {
        "joint-argmax" => Ok(QueryRule::JointArgmax),
        "expected-sum" => Ok(QueryRule::ExpectedSum),
        _ => Err(format!("expected joint-argmax or expected-sum, found {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct ExecuteArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ExecMode>,
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long, conflicts_with = "perceived")]
    pub scenes: Option<PathBuf>,
    #[arg(long)]
    pub perceived: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Count selections equal to the threshold.
    #[arg(long)]
    pub inclusive_threshold: Option<bool>,
    #[arg(long, allow_hyphen_values = true)]
    pub relate_a: Option<f64>,
    #[arg(long)]
    pub relate_b: Option<f64>,
    #[arg(long, value_parser = parse_relation_mode)]
    pub relation_mode: Option<RelationMode>,
    #[arg(long, value_parser = parse_query_rule)]
    pub query_rule: Option<QueryRule>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["grid", "pred"]))]
pub struct EvaluateArgs {
    /// Manifest mapping grid cells to prediction and gold files.
    #[arg(long, conflicts_with_all = ["pred", "gold"])]
    pub grid: Option<PathBuf>,
    #[arg(long, requires = "gold")]
    pub pred: Option<PathBuf>,
    /// Question file holding the reference answers.
    #[arg(long, requires = "pred")]
    pub gold: Option<PathBuf>,
}

/// One cell of a grid manifest; paths are relative to the manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestCell {
    pub train: String,
    pub test: String,
    pub predictions: PathBuf,
    pub gold: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridManifest {
    pub factor: Factor,
    pub cells: Vec<ManifestCell>,
}

fn overlay<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn input_record(path: &Path) -> Result<serde_json::Value, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(json!({ "path": path.display().to_string(), "sha256": digest_hex(&bytes) }))
}

fn read_checked<T: serde::de::DeserializeOwned>(path: &Path, info: impl Fn(&T) -> &FileInfo) -> Result<T, CliError> {
    let v: T = io::read_json(path)?;
    io::check_version(path, info(&v))?;
    Ok(v)
}

pub fn read_scenes(path: &Path) -> Result<Vec<shiftbench::scene::Scene>, CliError> {
    let f: SceneFile = read_checked(path, |f: &SceneFile| &f.info)?;
    f.to_scenes().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_questions(path: &Path) -> Result<QuestionFile, CliError> {
    read_checked(path, |f: &QuestionFile| &f.info)
}

pub fn read_perceived(path: &Path, vocab: &ConceptVocabulary) -> Result<PerceivedSceneFile, CliError> {
    let f: PerceivedSceneFile = read_checked(path, |f: &PerceivedSceneFile| &f.info)?;
    if f.value_order != ValueOrder::of(vocab) {
        return Err(CliError::Data(format!("{}: table value order does not match the vocabulary", path.display())));
    }
    Ok(f)
}

pub fn read_predictions(path: &Path) -> Result<PredictionsFile, CliError> {
    read_checked(path, |f: &PredictionsFile| &f.info)
}

fn accuracy(pred: &Path, gold: &Path) -> Result<shiftbench::evaluation::Score, CliError> {
    let p = read_predictions(pred)?;
    let q = read_questions(gold)?;
    score(&p.predictions, &pipeline::gold(&q.questions)).map_err(|e| CliError::Data(e.to_string()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let jobs = cli.jobs.or(file.jobs).unwrap_or(0);
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let vocab = ConceptVocabulary::default();
    let write = |name: &str, value: &dyn erased::Json| -> Result<(), CliError> {
        fs::write(out.join(name), value.to_json()).map_err(|e| CliError::Data(format!("{}: {e}", out.join(name).display())))
    };

    let (command, settings, mut inputs) = pool.install(|| -> Result<_, CliError> {
        match cli.command {
            Command::Generate(a) => {
                let mut s = file.generate.clone();
                overlay(&mut s.num_scenes, a.num_scenes);
                overlay(&mut s.visual, a.visual);
                overlay(&mut s.dist, a.dist);
                if a.comp.is_some() {
                    s.comp = a.comp;
                }
                overlay(&mut s.co_peak, a.co_peak);
                overlay(&mut s.redundancy, a.redundancy);
                if let Some(q) = a.questions_per_scene {
                    overlay(&mut s.object_questions, q.object);
                    overlay(&mut s.part_questions, q.part);
                }
                overlay(&mut s.split, a.split);
                let templates = TemplateSet::default();
                let (cfg, scenes, questions) = pipeline::generate(&s, seed, &vocab, &templates)?;
                let info = FileInfo::new(Some(s.split.name().to_string()), Some(cfg.digest()));
                write("scenes.json", &SceneFile::new(info.clone(), &scenes))?;
                write("questions.json", &QuestionFile { info, questions })?;
                println!("generated {} scenes into {}", scenes.len(), out.display());
                Ok(("generate", serde_json::to_value(&s).expect("serializable"), vec![]))
            }
            Command::Perturb(a) => {
                let mut s = file.perturb.clone();
                overlay(&mut s.epsilon, a.epsilon);
                overlay(&mut s.pos_sigma, a.pos_sigma);
                overlay(&mut s.miss, a.miss);
                overlay(&mut s.spurious, a.spurious);
                let noise = pipeline::noise_config(&s, seed)?;
                let scenes = read_scenes(&a.scenes)?;
                let perceived = pipeline::perturb(&scenes, &noise, &vocab);
                let info = FileInfo::new(None, Some(digest_hex(io::to_json_string(&noise).as_bytes())));
                write("perceived.json", &PerceivedSceneFile { info, value_order: ValueOrder::of(&vocab), scenes: perceived })?;
                println!("perturbed {} scenes into {}", scenes.len(), out.display());
                Ok(("perturb", serde_json::to_value(&s).expect("serializable"), vec![input_record(&a.scenes)?]))
            }
            Command::Execute(a) => {
                let mut s = file.execute.clone();
                overlay(&mut s.mode, a.mode);
                overlay(&mut s.threshold, a.threshold);
                overlay(&mut s.inclusive_threshold, a.inclusive_threshold);
                overlay(&mut s.relate_a, a.relate_a);
                overlay(&mut s.relate_b, a.relate_b);
                overlay(&mut s.relation_mode, a.relation_mode);
                overlay(&mut s.query_rule, a.query_rule);
                let questions = read_questions(&a.questions)?;
                let mut inputs = vec![input_record(&a.questions)?];
                let predictions = match (&a.scenes, &a.perceived) {
                    (Some(p), None) => {
                        inputs.push(input_record(p)?);
                        let scenes = read_scenes(p)?;
                        pipeline::execute_questions(&questions.questions, pipeline::SceneSource::Truth(&scenes), &s, &vocab)?
                    }
                    (None, Some(p)) => {
                        inputs.push(input_record(p)?);
                        let f = read_perceived(p, &vocab)?;
                        pipeline::execute_questions(&questions.questions, pipeline::SceneSource::Perceived(&f.scenes), &s, &vocab)?
                    }
                    _ => return Err(CliError::Config("execute needs exactly one of --scenes or --perceived".into())),
                };
                let info = FileInfo::new(questions.info.split.clone(), None);
                write("predictions.json", &PredictionsFile { info, predictions })?;
                Ok(("execute", serde_json::to_value(&s).expect("serializable"), inputs))
            }
            Command::Evaluate(a) => {
                if let Some(manifest_path) = &a.grid {
                    let text = fs::read_to_string(manifest_path)
                        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
                    let manifest: GridManifest = serde_json::from_str(&text)
                        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
                    let base = manifest_path.parent().unwrap_or(Path::new("."));
                    let mut grid = AccuracyGrid::new(manifest.factor);
                    let mut inputs = vec![input_record(manifest_path)?];
                    for c in &manifest.cells {
                        let (p, g) = (base.join(&c.predictions), base.join(&c.gold));
                        inputs.push(input_record(&p)?);
                        inputs.push(input_record(&g)?);
                        let acc = accuracy(&p, &g)?.overall.accuracy;
                        grid.set(&c.train, &c.test, acc).map_err(|e| CliError::Data(e.to_string()))?;
                    }
                    let rd = relative_degrade(&grid).map_err(|e| CliError::Data(e.to_string()))?;
                    let table = render_grid(&grid, &rd);
                    write("report.json", &json!({
                        "info": FileInfo::default(),
                        "grid": grid,
                        "rd": rd,
                        "note": RD_DISCREPANCY_NOTE,
                    }))?;
                    fs::write(out.join("report.txt"), &table)
                        .map_err(|e| CliError::Data(format!("{}: {e}", out.join("report.txt").display())))?;
                    print!("{table}");
                    Ok(("evaluate", json!({ "grid": manifest_path.display().to_string() }), inputs))
                } else {
                    let (p, g) = (a.pred.as_ref().expect("clap group"), a.gold.as_ref().expect("clap group"));
                    let sc = accuracy(p, g)?;
                    write("report.json", &json!({ "info": FileInfo::default(), "score": sc }))?;
                    println!("accuracy {:.4} ({}/{})", sc.overall.accuracy, sc.overall.correct, sc.overall.total);
                    for (family, t) in &sc.per_family {
                        println!("  {family:<20} {:.4} ({}/{})", t.accuracy, t.correct, t.total);
                    }
                    Ok(("evaluate", json!({}), vec![input_record(p)?, input_record(g)?]))
                }
            }
        }
    })?;

    if let Some(c) = &cli.config {
        inputs.insert(0, input_record(c)?);
    }
    write("provenance.json", &json!({
        "tool": io::TOOL_NAME,
        "tool_version": io::TOOL_VERSION,
        "format_version": io::FORMAT_VERSION,
        "command": command,
        "seed": seed,
        "jobs": jobs,
        "settings": settings,
        "inputs": inputs,
    }))
}

mod erased {
    pub trait Json {
        fn to_json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn to_json(&self) -> String {
            shiftbench::io::to_json_string(self)
        }
    }
}
