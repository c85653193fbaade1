//! Batch front-end: `split`, `detect`, `eval`, `simulate` and `report`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 provider error. Every command that writes an output directory also
//! writes `run_config.json`, a snapshot of its parsed arguments.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    derive_variant, load_apps, load_coco, load_split, make_split, sample_context_categories, save_split, AppCatalog,
    BoundsPolicy, Dataset, LoadOptions, SplitKind, VariantKind,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, table_csv, EvalOptions, MetricsReport, SemanticMatcher, DEFAULT_MATCH_THRESHOLD};
use crate::gateway::{
    BackendKind, CachedEmbedder, Embedder, HashEmbedder, ProviderOptions, Providers, RecordingEmbedder,
    RemoteEmbedder, ReplayEmbedder, ReplayStore, DEFAULT_CONCURRENCY,
};
use crate::pipeline::{Ablations, Pipeline, PipelineConfig, SceneDetections, SceneInput, SceneStats, DEFAULT_MAX_ITERATIONS};
use crate::sim::{comparison_csv, simulate, BoxChoice, SimulationConfig, Strategy};

#[derive(Debug, Parser)]
#[command(name = "igekit", version, about = "Detect, evaluate and exercise interactable elements in VR scenes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Write a 6:1:3 split manifest.
    Split(SplitArgs),
    /// Run the detection pipeline over a fold.
    Detect(DetectArgs),
    /// Score detections against a fold.
    Eval(EvalArgs),
    /// Simulate random and detection-guided testing.
    Simulate(SimulateArgs),
    /// Merge metrics reports into one table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DatasetArgs {
    /// COCO-format dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// App metadata sidecar (app_id -> name, genres, store text).
    #[arg(long)]
    pub apps: Option<PathBuf>,
    /// Clamp out-of-bounds annotations instead of rejecting the file.
    #[arg(long)]
    pub clamp_boxes: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FoldArgs {
    /// Split manifest; without it every scene is used.
    #[arg(long)]
    pub split_manifest: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub fold: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CategoryArgs {
    /// Context categories: a file (JSON array or one label per line) or a
    /// comma-separated list.
    #[arg(long)]
    pub context_categories: Option<String>,
    /// Sample this many context categories from the 100 most frequent ones.
    #[arg(long)]
    pub sample_categories: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProviderArgs {
    #[arg(long, default_value = "mock")]
    pub backend: String,
    #[arg(long)]
    pub replay_dir: Option<PathBuf>,
    /// Scripted chat and grounding answers for the mock backend.
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    /// Directory of prompt assets replacing the built-in ones.
    #[arg(long)]
    pub prompts_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// app, genre or context_sensitive.
    #[arg(long)]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub categories: CategoryArgs,
    /// Manifest file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub fold: FoldArgs,
    #[command(flatten)]
    pub providers: ProviderArgs,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: u32,
    /// Stages to disable: context, reflection, classify (comma-separated).
    #[arg(long, default_value = "")]
    pub ablate: String,
    /// Seeds demonstration sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
    pub jobs: usize,
    /// Recompute scenes that already have an output file.
    #[arg(long)]
    pub force: bool,
    /// Price per chat call for the cost estimate in the run ledger.
    #[arg(long, default_value_t = 0.0)]
    pub chat_call_cost: f64,
    /// Price per grounding call for the cost estimate in the run ledger.
    #[arg(long, default_value_t = 0.0)]
    pub ground_call_cost: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub fold: FoldArgs,
    /// semantics, interactability or context.
    #[arg(long, default_value = "semantics")]
    pub variant: String,
    #[command(flatten)]
    pub categories: CategoryArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory of per-scene detection files.
    #[arg(long)]
    pub detections: PathBuf,
    /// Embedding backend for label matching (mock uses hashed embeddings).
    #[arg(long, default_value = "mock")]
    pub backend: String,
    #[arg(long)]
    pub replay_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = crate::eval::DEFAULT_IOU_THRESHOLDS.to_vec())]
    pub iou_thresholds: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_MATCH_THRESHOLD)]
    pub match_threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub fold: FoldArgs,
    /// Detections steering the guided strategy.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// random, guided or both.
    #[arg(long, default_value = "both")]
    pub strategy: String,
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1.0)]
    pub interval: f64,
    #[arg(long, default_value_t = 5)]
    pub runs: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pick guidance boxes proportionally to their area instead of uniformly.
    #[arg(long)]
    pub area_weighted: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Metrics report JSON files to merge, in column order.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Split(a) => cmd_split(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse()
}

fn load_dataset(a: &DatasetArgs) -> Result<(Dataset, AppCatalog)> {
    let policy = if a.clamp_boxes { BoundsPolicy::Clamp } else { BoundsPolicy::Reject };
    let mut ds = load_coco(&a.dataset, LoadOptions { bounds: policy })?;
    let apps = match &a.apps {
        Some(p) => load_apps(p)?,
        None => AppCatalog::new(),
    };
    ds.attach_apps(&apps);
    Ok((ds, apps))
}

fn select_fold(ds: &Dataset, a: &FoldArgs) -> Result<BTreeSet<String>> {
    let Some(path) = &a.split_manifest else {
        return Ok(ds.scenes.iter().map(|s| s.scene_id.clone()).collect());
    };
    let split = load_split(path)?;
    let fold = split
        .fold_set(&a.fold)
        .ok_or_else(|| Error::Config(format!("unknown fold {:?} (train, val, test)", a.fold)))?;
    if let Some(missing) = fold.iter().find(|id| ds.scene(id).is_none()) {
        return Err(Error::Schema(format!("split manifest lists scene {missing} which is not in the dataset")));
    }
    Ok(fold)
}

fn context_categories(ds: &Dataset, a: &CategoryArgs, seed: u64) -> Result<Option<Vec<String>>> {
    if let Some(raw) = &a.context_categories {
        let path = Path::new(raw);
        let labels: Vec<String> = if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            match serde_json::from_str::<Vec<String>>(&text) {
                Ok(v) => v,
                Err(_) => text.lines().map(str::to_string).collect(),
            }
        } else {
            raw.split(',').map(str::to_string).collect()
        };
        let labels: Vec<String> =
            labels.into_iter().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
        if labels.is_empty() {
            return Err(Error::Config("empty context category list".into()));
        }
        return Ok(Some(labels));
    }
    Ok(a.sample_categories.map(|k| sample_context_categories(ds, 100, k, seed)))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn snapshot<T: Serialize>(out: &Path, command: &str, args: &T) -> Result<()> {
    write_json(
        &out.join("run_config.json"),
        &serde_json::json!({ "command": command, "version": env!("CARGO_PKG_VERSION"), "args": args }),
    )
}

pub fn cmd_split(a: &SplitArgs) -> Result<()> {
    let kind: SplitKind = parse(&a.split)?;
    let (ds, _) = load_dataset(&a.data)?;
    let cats = context_categories(&ds, &a.categories, a.seed)?;
    if kind == SplitKind::ContextSensitive && cats.is_none() {
        return Err(Error::Config(
            "the context-sensitive split needs --context-categories or --sample-categories".into(),
        ));
    }
    let split = make_split(&ds, kind, a.seed, cats.as_deref())?;
    save_split(&split, &a.out)?;
    tracing::info!(train = split.train.len(), val = split.val.len(), test = split.test.len(), "split written");
    Ok(())
}

/// Per-scene entry of the detection run ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub scene_id: String,
    /// `done`, `skipped` (output already present) or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<SceneStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub scenes: Vec<LedgerEntry>,
    pub chat_calls: u64,
    pub ground_calls: u64,
    pub estimated_cost: f64,
    pub failed: usize,
}

pub fn cmd_detect(a: &DetectArgs) -> Result<()> {
    let ablations = Ablations::parse_list(&a.ablate).map_err(Error::Config)?;
    if a.max_iterations == 0 || a.jobs == 0 {
        return Err(Error::Config("--max-iterations and --jobs must be at least 1".into()));
    }
    let provider_opts = ProviderOptions {
        backend: parse::<BackendKind>(&a.providers.backend)?,
        replay_dir: a.providers.replay_dir.clone(),
        mock_script: a.providers.mock_script.clone(),
        prompts_dir: a.providers.prompts_dir.clone(),
        concurrency: a.jobs,
    };
    provider_opts.validate()?;

    let (ds, apps) = load_dataset(&a.data)?;
    let fold = select_fold(&ds, &a.fold)?;
    let out_dir = a.out.join("detections");
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    snapshot(&a.out, "detect", a)?;

    let mut entries = vec![];
    let mut todo = vec![];
    for scene in ds.scenes.iter().filter(|s| fold.contains(&s.scene_id)) {
        if !a.force && out_dir.join(format!("{}.json", scene.scene_id)).exists() {
            entries.push(LedgerEntry { scene_id: scene.scene_id.clone(), status: "skipped".into(), stats: None, error: None });
        } else {
            todo.push(scene);
        }
    }

    let mut first_error: Option<Error> = None;
    if !todo.is_empty() {
        let providers = Providers::build(&provider_opts)?;
        let config = PipelineConfig {
            max_iterations: a.max_iterations,
            ablations,
            seed: a.seed,
            ..Default::default()
        };
        let pipeline = Pipeline::new(providers.chat.clone(), providers.ground.clone(), config);
        let mut inputs = vec![];
        for scene in todo {
            match SceneInput::load(&ds, scene, &apps) {
                Ok(i) => inputs.push(i),
                Err(e) => {
                    entries.push(LedgerEntry {
                        scene_id: scene.scene_id.clone(),
                        status: "failed".into(),
                        stats: None,
                        error: Some(e.to_string()),
                    });
                    first_error.get_or_insert(e);
                }
            }
        }
        for item in pipeline.run_batch(&inputs, a.jobs) {
            match item.result {
                Ok(det) => {
                    write(&out_dir.join(format!("{}.json", det.scene_id)), &det.to_json())?;
                    entries.push(LedgerEntry { scene_id: item.scene_id, status: "done".into(), stats: Some(det.stats), error: None });
                }
                Err(e) => {
                    entries.push(LedgerEntry {
                        scene_id: item.scene_id,
                        status: "failed".into(),
                        stats: None,
                        error: Some(e.to_string()),
                    });
                    first_error.get_or_insert(e);
                }
            }
        }
    }

    entries.sort_by(|x, y| x.scene_id.cmp(&y.scene_id));
    let chat_calls: u64 = entries.iter().filter_map(|e| e.stats).map(|s| s.chat_calls as u64).sum();
    let ground_calls: u64 = entries.iter().filter_map(|e| e.stats).map(|s| s.ground_calls as u64).sum();
    let ledger = RunLedger {
        failed: entries.iter().filter(|e| e.status == "failed").count(),
        estimated_cost: chat_calls as f64 * a.chat_call_cost + ground_calls as f64 * a.ground_call_cost,
        chat_calls,
        ground_calls,
        scenes: entries,
    };
    write_json(&a.out.join("run_ledger.json"), &ledger)?;
    match first_error {
        Some(e) => {
            tracing::error!(failed = ledger.failed, "some scenes failed");
            Err(e)
        }
        None => Ok(()),
    }
}

/// Reads every `*.json` detection file in `dir` (or in `dir/detections`).
pub fn load_detections(dir: &Path) -> Result<Vec<SceneDetections>> {
    let nested = dir.join("detections");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", p.display())))
        })
        .collect()
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let variant: VariantKind = parse(&a.variant)?;
    let backend: BackendKind = parse(&a.backend)?;
    if matches!(backend, BackendKind::Replay | BackendKind::Record) && a.replay_dir.is_none() {
        return Err(Error::Config("--replay-dir is required for replay and record backends".into()));
    }
    if a.iou_thresholds.is_empty() || a.iou_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Config("IoU thresholds must lie in [0, 1]".into()));
    }
    if !(-1.0..=1.0).contains(&a.match_threshold) {
        return Err(Error::Config("match threshold must lie in [-1, 1]".into()));
    }
    let (base, _) = load_dataset(&a.data)?;
    let cats = context_categories(&base, &a.categories, a.seed)?;
    if variant == VariantKind::Context && cats.is_none() {
        return Err(Error::Config("the context variant needs --context-categories or --sample-categories".into()));
    }
    let ds = derive_variant(&base, variant, cats.as_deref())?;
    let fold = select_fold(&ds, &a.fold)?;
    let detections = load_detections(&a.detections)?;

    snapshot(&a.out, "eval", a)?;

    let store = || Arc::new(ReplayStore::open(a.replay_dir.clone().expect("checked above")));
    let embedder: Arc<dyn Embedder> = match backend {
        BackendKind::Mock => Arc::new(HashEmbedder::default()),
        BackendKind::Replay => Arc::new(ReplayEmbedder::new(store())),
        BackendKind::Remote => Arc::new(RemoteEmbedder::from_env()?),
        BackendKind::Record => Arc::new(RecordingEmbedder::new(Arc::new(RemoteEmbedder::from_env()?), store())),
    };
    let matcher = SemanticMatcher::new(Arc::new(CachedEmbedder::new(embedder)), a.match_threshold);
    let split_label = match &a.fold.split_manifest {
        Some(_) => a.fold.fold.clone(),
        None => "all".to_string(),
    };
    let report = evaluate(
        &ds,
        &fold,
        &detections,
        &matcher,
        &EvalOptions { iou_thresholds: a.iou_thresholds.clone(), split: split_label },
    )?;
    write(&a.out.join("metrics.json"), &report.to_json())?;
    write(&a.out.join("metrics.csv"), &table_csv(std::slice::from_ref(&report))?)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let strategies: Vec<Strategy> = match a.strategy.as_str() {
        "both" => vec![Strategy::Guided, Strategy::Random],
        s => vec![parse(s)?],
    };
    let base = SimulationConfig {
        duration: a.duration,
        interval: a.interval,
        runs: a.runs,
        seed: a.seed,
        strategy: Strategy::Random,
        box_choice: if a.area_weighted { BoxChoice::AreaWeighted } else { BoxChoice::PerBox },
    };
    base.validate()?;
    let (ds, _) = load_dataset(&a.data)?;
    let fold = ds.subset(&select_fold(&ds, &a.fold)?);
    let detections = match &a.detections {
        Some(dir) => Some(load_detections(dir)?),
        None => None,
    };
    if detections.is_none() && strategies.contains(&Strategy::Guided) {
        tracing::warn!("no detections given; guided simulation degrades to random");
    }
    snapshot(&a.out, "simulate", a)?;
    let mut traces = vec![];
    for strategy in strategies {
        let config = SimulationConfig { strategy, ..base.clone() };
        let trace = simulate(&fold, detections.as_deref(), &config)?;
        for w in &trace.warnings {
            tracing::warn!("{w}");
        }
        write(&a.out.join(format!("trace_{}.json", strategy.as_str())), &trace.to_json())?;
        write(&a.out.join(format!("trace_{}.csv", strategy.as_str())), &trace.to_csv()?)?;
        traces.push(trace);
    }
    if let [guided, random] = traces.as_slice() {
        write(&a.out.join("comparison.csv"), &comparison_csv(guided, random)?)?;
    }
    Ok(())
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let reports = a
        .inputs
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<MetricsReport>(&text).map_err(|e| Error::Schema(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    snapshot(&a.out, "report", a)?;
    write_json(&a.out.join("report.json"), &reports)?;
    write(&a.out.join("table.csv"), &table_csv(&reports)?)
}
