//! Command-line front end: `simulate`, `screen`, `classify`, `cv`, `bench`
//! and `boundary`.
//!
//! Every subcommand writes its artifacts into `--out-dir` through a temporary
//! file that is renamed into place, followed by a `manifest.json` holding the
//! effective configuration. Exit status is 0 on success, 2 for usage and
//! configuration errors and 1 when a stage fails.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::boundary::{sample_curves, write_curves_csv, CurveKind};
use crate::classifier::{misclassification_rate, FittedClassifier, Predictor, VotingEnsemble};
use crate::covgraph::{build_graph, CorrelationEstimator, Depth, NeighborGraph};
use crate::dataset::{standardize_columns, ClassPair, LabeledMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{run_benchmark, screen_metrics, BenchConfig, ScreenMetrics};
use crate::screening::{ScreeningConfig, ScreeningResult, SelectionRule};
use crate::simgen::{example_design, GroundTruth, SimDesign};
use crate::tuning::{cross_validate, fit_method, lazy_graph, stability_frequencies, CvPlan, Method, TauGrid};

const DEFAULT_MEMORY_BUDGET_MB: usize = 512;

/// Everything a run can be configured with. Loaded from `--config` when
/// given; command-line flags then override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Overrides the seeds of `simulate`, `cv` and `bench` when set.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub memory_budget_mb: usize,
    pub simulate: SimulateConfig,
    pub method: Method,
    pub screening: ScreeningConfig,
    pub cv: CvPlan,
    pub bench: BenchConfig,
    pub boundary: BoundaryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            threads: None,
            out_dir: PathBuf::from("."),
            memory_budget_mb: DEFAULT_MEMORY_BUDGET_MB,
            simulate: SimulateConfig::default(),
            method: Method::Cis,
            screening: ScreeningConfig::default(),
            cv: CvPlan::default(),
            bench: BenchConfig::default(),
            boundary: BoundaryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub example: u32,
    pub p: usize,
    pub n_per_class: usize,
    /// A full design, used instead of `example` when present.
    pub design: Option<SimDesign>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            example: 1,
            p: 10_000,
            n_per_class: 100,
            design: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundaryConfig {
    pub kinds: Vec<CurveKind>,
    pub sigma: f64,
    pub pis: Vec<f64>,
    pub grid_size: usize,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            kinds: vec![CurveKind::CaiSun, CurveKind::Detection, CurveKind::CisUpper],
            sigma: 1.0,
            pis: vec![0.2, 0.5, 0.8],
            grid_size: 99,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "cislda", version, about = "Covariance-insured screening and post-screening LDA")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Upper bound on the tile buffers of a fully built correlation graph.
    #[arg(long, global = true)]
    memory_budget_mb: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw train.csv, test.csv and truth.csv from a simulation design.
    Simulate(SimulateArgs),
    /// Screen one class pair and fit its decision rule.
    Screen(ScreenArgs),
    /// Predict test rows with fitted or freshly trained rules.
    Classify(ClassifyArgs),
    /// Cross-validate tau (and alpha), optionally with bootstrap stability.
    Cv(CvArgs),
    /// Replicated Monte Carlo benchmark of CIS against marginal screening.
    Bench(BenchArgs),
    /// Sample discovery and detection boundary curves.
    Boundary(BoundaryArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Screen(_) => "screen",
            Command::Classify(_) => "classify",
            Command::Cv(_) => "cv",
            Command::Bench(_) => "bench",
            Command::Boundary(_) => "boundary",
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    example: Option<u32>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n_per_class: Option<usize>,
    /// Custom design JSON, used instead of a numbered example.
    #[arg(long, conflicts_with = "example")]
    design: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScreeningArgs {
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Subgraph depth: a count, or `unlimited`.
    #[arg(long)]
    depth: Option<Depth>,
    /// `sample-size`, `top:N` or `threshold:NU`.
    #[arg(long)]
    selection: Option<SelectionRule>,
    #[arg(long)]
    max_block: Option<usize>,
}

#[derive(Debug, Args)]
struct ScreenArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    pair: ClassPair,
    #[command(flatten)]
    screening: ScreeningArgs,
    /// truth.csv from `simulate`; adds screening metrics to the summary.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Build every edge up front and export edges.csv and components.csv.
    #[arg(long)]
    full_graph: bool,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    test: PathBuf,
    /// Training data; screening and fitting run for each class pair.
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    train: Option<PathBuf>,
    /// Saved rules from `screen`; several form a voting ensemble.
    #[arg(long, num_args = 1..)]
    model: Vec<PathBuf>,
    /// Only this pair; otherwise every pair votes.
    #[arg(long)]
    pair: Option<ClassPair>,
    /// Pick tau per pair by cross-validation before fitting.
    #[arg(long)]
    tune: bool,
    #[command(flatten)]
    screening: ScreeningArgs,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// screening.csv of a saved rule, needed for the model size with `--model`.
    #[arg(long, requires = "model")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    pair: ClassPair,
    #[command(flatten)]
    screening: ScreeningArgs,
    #[arg(long)]
    folds: Option<usize>,
    /// Explicit tau grid.
    #[arg(long, value_delimiter = ',', conflicts_with = "tau_quantiles")]
    taus: Option<Vec<f64>>,
    /// Tau grid as quantiles of the observed |differences|.
    #[arg(long, value_delimiter = ',')]
    tau_quantiles: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Also draw this many stratified bootstrap resamples and report
    /// selection frequencies.
    #[arg(long)]
    bootstrap: Option<usize>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    example: Option<u32>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    depth: Option<Depth>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long)]
    selection: Option<SelectionRule>,
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<ClassPair>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
}

#[derive(Debug, Args)]
struct BoundaryArgs {
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<CurveKind>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pis: Option<Vec<f64>>,
    #[arg(long)]
    grid_size: Option<usize>,
}

/// A failure tagged with the stage that produced it.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
struct StageError {
    stage: &'static str,
    #[source]
    source: Error,
}

trait Staged<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Staged<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

type StageResult<T> = std::result::Result<T, StageError>;

/// Entry point of the binary.
pub fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

/// Runs the command line `args` (program name first) and returns the exit
/// status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let name = cli.command.name();
    let config = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            return 2;
        }
    };
    let threads = config
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {name}: thread pool: {e}");
            return 1;
        }
    };
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match pool.install(|| dispatch(&cli.command, &config, &recorded)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            if e.stage == "config" {
                2
            } else {
                1
            }
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.common.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    let common = &cli.common;
    config.seed = common.seed.or(config.seed);
    config.threads = common.threads.map(|t| t as usize).or(config.threads);
    if let Some(dir) = &common.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(mb) = common.memory_budget_mb {
        config.memory_budget_mb = mb;
    }
    if let Some(seed) = config.seed {
        config.cv.seed = seed;
        config.bench.seed = seed;
    }
    match &cli.command {
        Command::Simulate(a) => {
            let s = &mut config.simulate;
            set(&mut s.example, a.example);
            set(&mut s.p, a.p);
            set(&mut s.n_per_class, a.n_per_class);
            if let Some(path) = &a.design {
                s.design = Some(SimDesign::from_json_file(path)?);
            }
            if a.example.is_some() {
                s.design = None;
            }
        }
        Command::Screen(a) => apply_screening(&mut config, &a.screening),
        Command::Classify(a) => apply_screening(&mut config, &a.screening),
        Command::Cv(a) => {
            apply_screening(&mut config, &a.screening);
            set(&mut config.cv.folds, a.folds);
            if let Some(taus) = &a.taus {
                config.cv.tau_grid = TauGrid::Values(taus.clone());
            }
            if let Some(qs) = &a.tau_quantiles {
                config.cv.tau_grid = TauGrid::Quantiles(qs.clone());
            }
            if let Some(alphas) = &a.alphas {
                config.cv.alpha_grid = alphas.clone();
            }
        }
        Command::Bench(a) => {
            let b = &mut config.bench;
            set(&mut b.example, a.example);
            set(&mut b.p, a.p);
            set(&mut b.n_per_class, a.n_per_class);
            set(&mut b.replicates, a.replicates);
            set(&mut b.alphas, a.alphas.clone());
            set(&mut b.depth, a.depth);
            set(&mut b.folds, a.folds);
            set(&mut b.selection, a.selection);
            set(&mut b.pairs, a.pairs.clone());
            set(&mut b.methods, a.methods.clone());
            if let Some(taus) = &a.taus {
                b.tau_grid = TauGrid::Values(taus.clone());
            }
        }
        Command::Boundary(a) => {
            let b = &mut config.boundary;
            set(&mut b.kinds, a.kinds.clone());
            set(&mut b.sigma, a.sigma);
            set(&mut b.pis, a.pis.clone());
            set(&mut b.grid_size, a.grid_size);
        }
    }
    validate(&cli.command, &config)?;
    Ok(config)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_screening(config: &mut RunConfig, a: &ScreeningArgs) {
    let s = &mut config.screening;
    set(&mut config.method, a.method);
    set(&mut s.tau, a.tau);
    set(&mut s.alpha, a.alpha);
    set(&mut s.depth, a.depth);
    set(&mut s.selection, a.selection);
    if a.max_block.is_some() {
        s.max_block = a.max_block;
    }
}

fn validate(command: &Command, config: &RunConfig) -> Result<()> {
    if config.threads == Some(0) {
        return Err(Error::InvalidParameter("threads must be at least 1".into()));
    }
    match command {
        Command::Simulate(_) => match &config.simulate.design {
            Some(design) => design.validate(),
            None => {
                let s = &config.simulate;
                example_design(s.example, s.p, s.n_per_class, config.seed.unwrap_or(0)).map(|_| ())
            }
        },
        Command::Screen(_) | Command::Classify(_) => config.screening.validate(),
        Command::Cv(_) => {
            config.screening.validate()?;
            config.cv.validate()
        }
        Command::Bench(_) => config.bench.validate(),
        Command::Boundary(_) => {
            if config.boundary.kinds.is_empty() {
                return Err(Error::InvalidParameter("no curve kinds requested".into()));
            }
            let b = &config.boundary;
            sample_curves(&b.kinds, b.sigma, &b.pis, b.grid_size).map(|_| ())
        }
    }
}

/// Writes artifacts into one directory, each through a temporary file that is
/// renamed into place once complete.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            body(&mut w)?;
            w.flush().map_err(|e| Error::io(&target, e))?;
        }
        tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
        self.written.push(name.to_string());
        Ok(target)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w).map_err(|e| Error::io(name, e))
        })
    }

    fn finish(mut self, subcommand: &str, config: &RunConfig, args: &[String]) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'static str,
            version: &'static str,
            subcommand: &'a str,
            arguments: &'a [String],
            config: &'a RunConfig,
            artifacts: &'a [String],
        }
        let artifacts = self.written.clone();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            arguments: args,
            config,
            artifacts: &artifacts,
        };
        self.write_json("manifest.json", &manifest)?;
        for name in &self.written {
            println!("wrote {}", self.dir.join(name).display());
        }
        Ok(())
    }
}

fn dispatch(command: &Command, config: &RunConfig, args: &[String]) -> StageResult<()> {
    let mut out = Outputs::new(&config.out_dir).stage("output")?;
    match command {
        Command::Simulate(_) => cmd_simulate(config, &mut out)?,
        Command::Screen(a) => cmd_screen(a, config, &mut out)?,
        Command::Classify(a) => cmd_classify(a, config, &mut out)?,
        Command::Cv(a) => cmd_cv(a, config, &mut out)?,
        Command::Bench(_) => cmd_bench(config, &mut out)?,
        Command::Boundary(_) => cmd_boundary(config, &mut out)?,
    }
    out.finish(command.name(), config, args).stage("manifest")
}

fn read_matrix(path: &Path) -> StageResult<LabeledMatrix> {
    LabeledMatrix::read_csv(path).stage("input")
}

fn cmd_simulate(config: &RunConfig, out: &mut Outputs) -> StageResult<()> {
    let s = &config.simulate;
    let design = match &s.design {
        Some(d) => {
            let mut d = d.clone();
            if let Some(seed) = config.seed {
                d.seed = seed;
            }
            d
        }
        None => example_design(s.example, s.p, s.n_per_class, config.seed.unwrap_or(0)).stage("config")?,
    };
    let sample = design.sample().stage("sampling")?;
    out.write("train.csv", |w| sample.train.write_csv(w)).stage("output")?;
    out.write("test.csv", |w| sample.test.write_csv(w)).stage("output")?;
    out.write("truth.csv", |w| write_truth_csv(&sample.truth, w)).stage("output")?;
    out.write_json("design.json", &design).stage("output")?;
    Ok(())
}

/// One row per informative feature and pair: `pair, feature, kind`, with
/// 1-based features and kind `marginal` or `muji`.
pub fn write_truth_csv(truth: &[GroundTruth], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["pair", "feature", "kind"])?;
    for t in truth {
        let muji: BTreeSet<usize> = t.muji_set.iter().copied().collect();
        for &j in &t.informative_set {
            let kind = if muji.contains(&j) { "muji" } else { "marginal" };
            wtr.write_record([t.pair.to_string(), (j + 1).to_string(), kind.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<truth>", e))?;
    Ok(())
}

/// Informative features (0-based, sorted) of `pair` in a truth CSV, in
/// either orientation of the pair.
pub fn read_truth_csv(path: impl AsRef<Path>, pair: ClassPair) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let mut set = BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let row_pair: ClassPair = record
            .get(0)
            .unwrap_or_default()
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        if row_pair != pair && row_pair != pair.swapped() {
            continue;
        }
        let feature: usize = record
            .get(1)
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad feature in row {:?}", record)))?;
        if feature == 0 {
            return Err(parse_err("features are 1-based".into()));
        }
        set.insert(feature - 1);
    }
    Ok(set.into_iter().collect())
}

/// Ranking (0-based features, best first) from a screening report CSV.
pub fn read_report_ranking(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!("missing column `{name}`"),
        })
    };
    let (fc, rc) = (column("feature")?, column("rank")?);
    let mut ranked = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let rank = record.get(rc).unwrap_or_default().trim();
        if rank.is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.trim().parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("bad number {s:?}"),
            })
        };
        ranked.push((parse(rank)?, parse(record.get(fc).unwrap_or_default())?.saturating_sub(1)));
    }
    ranked.sort_unstable();
    Ok(ranked.into_iter().map(|(_, j)| j).collect())
}

#[derive(Serialize)]
struct ScreenSummary {
    pair: ClassPair,
    method: Method,
    tau: f64,
    alpha: f64,
    marginal_set: usize,
    blocks: usize,
    largest_block: usize,
    /// `(anchor, requested depth, used depth)`, anchors 1-based.
    depth_cuts: Vec<(usize, usize, usize)>,
    /// `(component, ridge)` for blocks that needed a ridge.
    ridge_fallbacks: Vec<(usize, f64)>,
    selected: Vec<usize>,
    warnings: Vec<String>,
    metrics: Option<ScreenMetrics>,
}

impl ScreenSummary {
    fn new(s: &ScreeningResult, method: Method, config: &ScreeningConfig, metrics: Option<ScreenMetrics>) -> Self {
        ScreenSummary {
            pair: s.pair,
            method,
            tau: config.tau,
            alpha: config.alpha,
            marginal_set: s.marginal_set.len(),
            blocks: s.precision.blocks.len(),
            largest_block: s.precision.blocks.iter().map(|b| b.len()).max().unwrap_or(0),
            depth_cuts: s
                .precision
                .depth_cuts
                .iter()
                .map(|&(a, want, used)| (a + 1, want, used))
                .collect(),
            ridge_fallbacks: s.precision.ridge_fallbacks().map(|(c, r)| (c + 1, r)).collect(),
            selected: s.selected.iter().map(|j| j + 1).collect(),
            warnings: s.warnings.clone(),
            metrics,
        }
    }
}

fn cmd_screen(a: &ScreenArgs, config: &RunConfig, out: &mut Outputs) -> StageResult<()> {
    let train = read_matrix(&a.train)?;
    let cfg = &config.screening;
    let fit = if a.full_graph {
        let budget = config.memory_budget_mb.saturating_mul(1 << 20);
        let standardized = standardize_columns(&train).stage("graph")?;
        let graph =
            build_graph(&standardized, cfg.alpha, budget, CorrelationEstimator::PooledWithinClass).stage("graph")?;
        out.write("edges.csv", |w| graph.write_edges_csv(w)).stage("output")?;
        out.write("components.csv", |w| graph.write_components_csv(w)).stage("output")?;
        fit_method(config.method, &graph, &train, a.pair, cfg).stage("screening")?
    } else {
        let graph = lazy_graph(&train, cfg.alpha).stage("graph")?;
        fit_method(config.method, &graph as &dyn NeighborGraph, &train, a.pair, cfg).stage("screening")?
    };
    let metrics = match &a.truth {
        Some(path) => {
            let informative = read_truth_csv(path, a.pair).stage("input")?;
            Some(screen_metrics(
                &fit.screening.selected,
                &fit.screening.ranking(),
                &informative,
                train.p(),
            ))
        }
        None => None,
    };
    out.write("screening.csv", |w| fit.screening.write_report_csv(w)).stage("output")?;
    out.write_json("screening.json", &ScreenSummary::new(&fit.screening, config.method, cfg, metrics))
        .stage("output")?;
    match &fit.classifier {
        Some(model) => {
            out.write("model.json", |w| {
                w.write_all(model.to_json().as_bytes()).map_err(|e| Error::io("model.json", e))
            })
            .stage("output")?;
        }
        None => eprintln!("note: nothing selected for pair {}; no model written", a.pair),
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassifySummary {
    pairs: Vec<ClassPair>,
    test_rows: usize,
    misclassified: usize,
    er_percent: f64,
    tied_votes: usize,
    metrics: Vec<PairMetrics>,
}

#[derive(Serialize)]
struct PairMetrics {
    pair: ClassPair,
    tau: f64,
    #[serde(flatten)]
    metrics: ScreenMetrics,
}

fn all_pairs(ids: &[i64]) -> Vec<ClassPair> {
    let mut pairs = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            pairs.push(ClassPair::new(a, b));
        }
    }
    pairs
}

fn cmd_classify(a: &ClassifyArgs, config: &RunConfig, out: &mut Outputs) -> StageResult<()> {
    let test = read_matrix(&a.test)?;
    let mut models: Vec<FittedClassifier> = Vec::new();
    let mut metrics = Vec::new();
    if let Some(train_path) = &a.train {
        let train = read_matrix(train_path)?;
        let pairs = match a.pair {
            Some(p) => vec![p],
            None => all_pairs(train.class_ids()),
        };
        let graph = lazy_graph(&train, config.screening.alpha).stage("graph")?;
        for &pair in &pairs {
            let mut cfg = config.screening.clone();
            if a.tune {
                let plan = CvPlan {
                    alpha_grid: vec![cfg.alpha],
                    ..config.cv.clone()
                };
                cfg.tau = cross_validate(&train, pair, &plan, &cfg, config.method)
                    .stage("tuning")?
                    .tau;
            }
            let fit = fit_method(config.method, &graph as &dyn NeighborGraph, &train, pair, &cfg).stage("screening")?;
            let model = fit
                .classifier
                .ok_or(Error::EmptySelection)
                .stage("fitting")?;
            if let Some(path) = &a.truth {
                let informative = read_truth_csv(path, pair).stage("input")?;
                let mut m = screen_metrics(&fit.screening.selected, &fit.screening.ranking(), &informative, train.p());
                m.er_percent = Some(100.0 * misclassification_rate(&model, &test.restrict_to_pair(pair).stage("evaluation")?).stage("evaluation")?);
                metrics.push(PairMetrics {
                    pair,
                    tau: cfg.tau,
                    metrics: m,
                });
            }
            let name = format!("model_{}-{}.json", pair.a, pair.b);
            out.write(&name, |w| {
                w.write_all(model.to_json().as_bytes()).map_err(|e| Error::io(&name, e))
            })
            .stage("output")?;
            models.push(model);
        }
    } else {
        for path in &a.model {
            models.push(FittedClassifier::from_json_file(path).stage("input")?);
        }
        if let (Some(truth), Some(report)) = (&a.truth, &a.report) {
            let model = &models[0];
            let informative = read_truth_csv(truth, model.pair).stage("input")?;
            let ranking = read_report_ranking(report).stage("input")?;
            let mut m = screen_metrics(&model.selected, &ranking, &informative, test.p());
            m.er_percent = Some(100.0 * misclassification_rate(model, &test.restrict_to_pair(model.pair).stage("evaluation")?).stage("evaluation")?);
            metrics.push(PairMetrics {
                pair: model.pair,
                tau: f64::NAN,
                metrics: m,
            });
        }
    }
    let pairs: Vec<ClassPair> = models.iter().map(|m| m.pair).collect();
    let (rows, predictions): (LabeledMatrix, Vec<(i64, bool)>) = if models.len() == 1 {
        let model = &models[0];
        let rows = test.restrict_to_pair(model.pair).stage("evaluation")?;
        let preds = (0..rows.n()).map(|i| (model.predict(rows.row(i)), false)).collect();
        (rows, preds)
    } else {
        let ensemble = VotingEnsemble::new(models).stage("ensemble")?;
        let rows = test.restrict_to_classes(&ensemble.class_ids).stage("evaluation")?;
        let preds = (0..rows.n())
            .map(|i| {
                let vote = ensemble.predict_vote(rows.row(i));
                (vote.class, vote.tied)
            })
            .collect();
        (rows, preds)
    };
    let misclassified = predictions
        .iter()
        .enumerate()
        .filter(|(i, (p, _))| *p != rows.label_id(*i))
        .count();
    out.write("predictions.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["row", "label", "predicted", "tied"])?;
        for (i, (p, tied)) in predictions.iter().enumerate() {
            wtr.write_record([
                (i + 1).to_string(),
                rows.label_id(i).to_string(),
                p.to_string(),
                u8::from(*tied).to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("predictions.csv", e))
    })
    .stage("output")?;
    let summary = ClassifySummary {
        pairs,
        test_rows: rows.n(),
        misclassified,
        er_percent: 100.0 * misclassified as f64 / rows.n().max(1) as f64,
        tied_votes: predictions.iter().filter(|p| p.1).count(),
        metrics,
    };
    println!("ER {:.2}% ({} of {} test rows)", summary.er_percent, misclassified, rows.n());
    out.write_json("classify.json", &summary).stage("output")?;
    Ok(())
}

#[derive(Serialize)]
struct CvSummary {
    pair: ClassPair,
    method: Method,
    tau: f64,
    alpha: f64,
    folds: usize,
}

fn cmd_cv(a: &CvArgs, config: &RunConfig, out: &mut Outputs) -> StageResult<()> {
    let train = read_matrix(&a.train)?;
    let outcome = cross_validate(&train, a.pair, &config.cv, &config.screening, config.method).stage("tuning")?;
    out.write("cv.csv", |w| outcome.write_csv(w)).stage("output")?;
    out.write_json(
        "cv.json",
        &CvSummary {
            pair: a.pair,
            method: config.method,
            tau: outcome.tau,
            alpha: outcome.alpha,
            folds: config.cv.folds,
        },
    )
    .stage("output")?;
    println!("best tau {} alpha {}", outcome.tau, outcome.alpha);
    if let Some(n) = a.bootstrap {
        let report = stability_frequencies(&train, a.pair, n, &config.cv, &config.screening, config.method)
            .stage("stability")?;
        out.write("stability.csv", |w| report.write_csv(w)).stage("output")?;
    }
    Ok(())
}

fn cmd_bench(config: &RunConfig, out: &mut Outputs) -> StageResult<()> {
    let report = run_benchmark(&config.bench).stage("benchmark")?;
    out.write("bench_summary.csv", |w| report.write_summary_csv(w)).stage("output")?;
    out.write("bench_replicates.csv", |w| report.write_replicates_csv(w)).stage("output")?;
    let table = report.render_table();
    out.write("bench_table.txt", |w| {
        w.write_all(table.as_bytes()).map_err(|e| Error::io("bench_table.txt", e))
    })
    .stage("output")?;
    print!("{table}");
    Ok(())
}

fn cmd_boundary(config: &RunConfig, out: &mut Outputs) -> StageResult<()> {
    let b = &config.boundary;
    let curves = sample_curves(&b.kinds, b.sigma, &b.pis, b.grid_size).stage("boundary")?;
    out.write("boundary.csv", |w| write_curves_csv(&curves, w)).stage("output")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn run_in(dir: &Path, args: &[&str]) -> u8 {
        let mut full = vec!["cislda".to_string()];
        full.extend(args.iter().map(|s| s.to_string()));
        full.extend(["--out-dir".to_string(), dir.display().to_string()]);
        run(full)
    }

    #[test]
    fn usage_errors_exit_two() {
        let dir = tmp();
        assert_eq!(run_in(dir.path(), &["simulate", "--example", "4"]), 2);
        assert_eq!(run_in(dir.path(), &["bogus"]), 2);
        assert_eq!(run_in(dir.path(), &["screen", "--pair", "1-2"]), 2);
        assert_eq!(run_in(dir.path(), &["boundary", "--grid-size", "1"]), 2);
        assert_eq!(run_in(dir.path(), &["screen", "--train", "x.csv", "--pair", "1-2", "--alpha", "1.5"]), 2);
    }

    #[test]
    fn missing_input_is_a_runtime_error() {
        let dir = tmp();
        let missing = dir.path().join("nope.csv");
        let code = run_in(dir.path(), &["screen", "--train", missing.to_str().unwrap(), "--pair", "1-2"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tmp();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"seed": 3, "boundary": {"sigma": 2.0, "grid_size": 5}}"#).unwrap();
        let code = run_in(dir.path(), &["boundary", "--config", path.to_str().unwrap(), "--grid-size", "4"]);
        assert_eq!(code, 0);
        let csv = std::fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 4 * (2 + 3));
        assert!(csv.lines().nth(1).unwrap().starts_with("CaiSun,2,,0.2,"));
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config"]["seed"], 3);
        assert_eq!(manifest["config"]["boundary"]["grid_size"], 4);
        assert_eq!(manifest["artifacts"][0], "boundary.csv");
    }

    #[test]
    fn truth_round_trip() {
        let design = example_design(1, 30, 5, 0).unwrap();
        let truth: Vec<GroundTruth> = [ClassPair::new(1, 2), ClassPair::new(2, 3)]
            .iter()
            .map(|&p| design.ground_truth(p).unwrap())
            .collect();
        let dir = tmp();
        let path = dir.path().join("truth.csv");
        write_truth_csv(&truth, std::fs::File::create(&path).unwrap()).unwrap();
        assert_eq!(read_truth_csv(&path, ClassPair::new(2, 1)).unwrap(), truth[0].informative_set);
        assert_eq!(read_truth_csv(&path, ClassPair::new(2, 3)).unwrap(), truth[1].informative_set);
    }
}
