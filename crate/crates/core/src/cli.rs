//! Command-line front end: `train`, `eval`, `gridsearch` and `synth`.
//!
//! Every file written carries a [`RunManifest`], either embedded (JSON
//! reports, model files) or as a `<file>.manifest.json` sidecar (CSV output).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, CsvOptions, Dataset, Normalization};
use crate::eval::{self, GridSpec, TrialOptions, DEFAULT_GRID};
use crate::model::{Model, ModelMeta};
use crate::par::Parallelism;
use crate::solvers::{self, Heldout, Method, SolverConfig, SolverTrace};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "fdlsr", version, about = "Fisher discriminative least squares regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a whole dataset and write the model and its trace.
    Train(TrainArgs),
    /// Repeated random-split evaluation with mean ± std accuracy.
    Eval(EvalArgs),
    /// Evaluate every (alpha, beta, lambda) combination of a grid.
    Gridsearch(GridArgs),
    /// Write a synthetic Gaussian-blob dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// CSV file: label in the first column, features after it.
    #[arg(long)]
    pub data: PathBuf,
    /// Skip the first line of the CSV.
    #[arg(long)]
    pub skip_header: bool,
    #[arg(long, value_enum, default_value_t = Normalization::L2)]
    pub normalization: Normalization,
    /// Randomly project features to this many dimensions first.
    #[arg(long)]
    pub project_dim: Option<usize>,
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = Method::Fdlsr)]
    pub method: Method,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 30)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Run exactly this many sweeps, ignoring --tol and --max-iter.
    #[arg(long)]
    pub report_iter: Option<usize>,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda,
            max_iter: self.max_iter,
            tol: self.tol,
            report_iter: self.report_iter,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Held-out CSV scored after every sweep (adds a heldout_acc column).
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    #[arg(long, default_value = "model.fdlsr")]
    pub model: PathBuf,
    #[arg(long, default_value = "trace.csv")]
    pub trace: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Training samples per class.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Candidate values for all three parameters.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID)]
    pub grid: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

impl GridArgs {
    pub fn spec(&self) -> GridSpec {
        let pick = |v: &Option<Vec<f64>>| v.clone().unwrap_or_else(|| self.grid.clone());
        GridSpec {
            alphas: pick(&self.alphas),
            betas: pick(&self.betas),
            lambdas: pick(&self.lambdas),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 20)]
    pub per_class: usize,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    /// Standard deviation of the noise around each class center.
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {s}"))
    }
}

/// Provenance for an output file: enough to re-run the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub dataset: Option<PathBuf>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
}

impl RunManifest {
    fn new(command: &str, argv: &[String], dataset: Option<&Path>, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            argv: argv.to_vec(),
            dataset: dataset.map(Path::to_path_buf),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_unix_s: unix_now(),
            finished_unix_s: 0.0,
        }
    }

    fn finish(mut self) -> Self {
        self.finished_unix_s = unix_now();
        self
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Serialize)]
struct WithManifest<'a, T: Serialize> {
    #[serde(flatten)]
    body: &'a T,
    manifest: &'a RunManifest,
}

/// Runs a parsed command. `argv` is recorded in the manifest only.
pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&args, argv),
        Command::Eval(args) => cmd_eval(&args, argv),
        Command::Gridsearch(args) => cmd_gridsearch(&args, argv),
        Command::Synth(args) => cmd_synth(&args, argv),
    }
}

/// Loads the dataset and applies the optional random projection.
fn load_data(args: &DataArgs) -> Result<Dataset> {
    let ds = dataset::load_csv(
        &args.data,
        CsvOptions {
            skip_header: args.skip_header,
        },
    )?;
    match args.project_dim {
        Some(dim) => dataset::random_projection(&ds, dim, args.seed),
        None => Ok(ds),
    }
}

/// Maps a held-out file's label names onto the training indices.
fn align_heldout(train: &Dataset, heldout: &Dataset) -> Result<Vec<usize>> {
    heldout
        .labels()
        .iter()
        .map(|&l| {
            let name = &heldout.class_names()[l];
            train
                .class_names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidParameter(format!("held-out label {name:?} not seen in training data")))
        })
        .collect()
}

pub fn cmd_train(args: &TrainArgs, argv: &[String]) -> Result<()> {
    let cfg = args.solver.config();
    let manifest = RunManifest::new(
        "train",
        argv,
        Some(&args.data.data),
        serde_json::to_value(args)?,
        args.data.seed,
    );

    let ds = load_data(&args.data)?;
    let normalizer = args.data.normalization.fit(ds.features());
    let x = normalizer.apply(ds.features());

    let heldout = match &args.heldout {
        Some(path) => {
            let raw = dataset::load_csv(path, CsvOptions { skip_header: args.data.skip_header })?;
            let raw = match args.data.project_dim {
                Some(dim) => dataset::random_projection(&raw, dim, args.data.seed)?,
                None => raw,
            };
            let labels = align_heldout(&ds, &raw)?;
            Some((normalizer.apply(raw.features()), labels))
        }
        None => None,
    };
    let heldout_ref = heldout.as_ref().map(|(x, labels)| Heldout { x, labels });

    let fit = solvers::fit(args.solver.method, &x, ds.labels(), ds.n_classes(), &cfg, heldout_ref)?;
    let manifest = manifest.finish();

    let model = Model {
        meta: ModelMeta {
            method: args.solver.method,
            class_names: ds.class_names().to_vec(),
            normalization: args.data.normalization,
            normalizer,
            config: cfg,
            manifest: serde_json::to_value(&manifest)?,
        },
        projection: fit.projection,
    };
    model.save(&args.model)?;
    write_trace(&args.trace, &fit.trace, heldout.is_some())?;
    write_sidecar(&args.trace, &manifest)
}

/// Trace CSV with header `iter,objective,q_delta[,heldout_acc]`.
pub fn write_trace(path: &Path, trace: &SolverTrace, with_heldout: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if with_heldout {
        writeln!(w, "iter,objective,q_delta,heldout_acc").map_err(io)?;
    } else {
        writeln!(w, "iter,objective,q_delta").map_err(io)?;
    }
    for r in &trace.records {
        write!(w, "{},{},{}", r.iter, r.objective, r.q_delta).map_err(io)?;
        if with_heldout {
            write!(w, ",{}", r.heldout_accuracy.unwrap_or(f64::NAN)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_sidecar(path: &Path, manifest: &RunManifest) -> Result<()> {
    let side = sidecar_path(path);
    let file = File::create(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), manifest)?;
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, body: &T, manifest: &RunManifest) -> Result<()> {
    let doc = WithManifest { body, manifest };
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w).map_err(|e| Error::io(path, e))?;
            w.flush().map_err(|e| Error::io(path, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, &doc)?;
            writeln!(lock).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

pub fn cmd_eval(args: &EvalArgs, argv: &[String]) -> Result<()> {
    let manifest = RunManifest::new(
        "eval",
        argv,
        Some(&args.data.data),
        serde_json::to_value(args)?,
        args.data.seed,
    );
    let ds = load_data(&args.data)?;
    let opts = TrialOptions {
        normalization: args.data.normalization,
        parallelism: Parallelism::from_jobs(args.jobs),
    };
    let report = eval::run_trials(
        &ds,
        args.k,
        args.repeats,
        args.data.seed,
        args.solver.method,
        &args.solver.config(),
        opts,
    )?;
    emit_json(args.out.as_deref(), &report, &manifest.finish())
}

pub fn cmd_gridsearch(args: &GridArgs, argv: &[String]) -> Result<()> {
    let e = &args.eval;
    let manifest = RunManifest::new(
        "gridsearch",
        argv,
        Some(&e.data.data),
        serde_json::to_value(args)?,
        e.data.seed,
    );
    let ds = load_data(&e.data)?;
    let opts = TrialOptions {
        normalization: e.data.normalization,
        parallelism: Parallelism::from_jobs(e.jobs),
    };
    let result = eval::grid_search(
        &ds,
        e.k,
        e.repeats,
        e.data.seed,
        &args.spec(),
        e.solver.method,
        &e.solver.config(),
        opts,
    )?;
    emit_json(e.out.as_deref(), &result, &manifest.finish())
}

pub fn cmd_synth(args: &SynthArgs, argv: &[String]) -> Result<()> {
    let manifest = RunManifest::new("synth", argv, None, serde_json::to_value(args)?, args.seed);
    let ds = dataset::synth_blobs(args.classes, args.per_class, args.dim, args.spread, args.seed)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            dataset::write_csv(&ds, BufWriter::new(file))?;
            write_sidecar(path, &manifest.finish())
        }
        None => dataset::write_csv(&ds, std::io::stdout().lock()),
    }
}
