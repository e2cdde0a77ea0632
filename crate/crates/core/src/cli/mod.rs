//! Batch commands behind the `mpipn` binary.
//!
//! Every command reads one JSON [`RunConfig`]; a single seed drives every
//! random choice and may be overridden by `MPIPN_SEED` or `--seed`
//! (the flag wins). Exit codes: 0 success, 1 usage, 2 IO or missing
//! input, 3 numeric failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{
    ablation_run, evaluate, write_ape_csv, write_report_csv, write_report_json, AblationSetup, EvaluationError,
    PointSelection,
};
use crate::geometry::{
    build_case_geometry, sample_observations, write_cloud_csv, write_observations_csv, DomainTag, GeometryError,
};
use crate::network::{init_params, load_checkpoint, Architecture, InputNormalization, ModelParams, NetworkError};
use crate::physics::{write_manifest, ConditionManifest, PhysicsConfig, PhysicsError};
use crate::training::{
    build_dataset, checkpoint_name, latest_checkpoint, read_history, sampling_stats, train, CaseSpec, Dataset,
    RunOutput, TrainConfig, TrainingError,
};

pub const SEED_ENV: &str = "MPIPN_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Input(e.to_string())
        } else {
            CliError::Usage(format!("config: {e}"))
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Io(_) | GeometryError::Csv(_) | GeometryError::Parse { .. } => CliError::Input(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Io(_) | NetworkError::Checkpoint(_) => CliError::Input(e.to_string()),
            NetworkError::Autodiff(_) | NetworkError::NonFiniteInput(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PhysicsError> for CliError {
    fn from(e: PhysicsError) -> Self {
        match e {
            PhysicsError::Network(n) => n.into(),
            PhysicsError::Io(_) => CliError::Input(e.to_string()),
            PhysicsError::Autodiff(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::Physics(p) => p.into(),
            TrainingError::Network(n) => n.into(),
            TrainingError::Geometry(g) => g.into(),
            TrainingError::Io(_) | TrainingError::Csv(_) => CliError::Input(e.to_string()),
            TrainingError::Diverged { .. }
            | TrainingError::NonFiniteGradient { .. }
            | TrainingError::Autodiff(_)
            | TrainingError::ShapeMismatch { .. } => CliError::Numeric(e.to_string()),
            TrainingError::EmptyDataset | TrainingError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<EvaluationError> for CliError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::Training(t) => t.into(),
            EvaluationError::Network(n) => n.into(),
            EvaluationError::Physics(p) => p.into(),
            EvaluationError::MissingCheckpoint(_)
            | EvaluationError::Io(_)
            | EvaluationError::Csv(_)
            | EvaluationError::Json(_) => CliError::Input(e.to_string()),
            EvaluationError::ZeroTruth | EvaluationError::LengthMismatch { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CaseSelector {
    Case1,
    Case2,
    Case3,
    Manufactured,
}

/// Desk-case point budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeskBudget {
    pub interior: usize,
    pub observations: usize,
}

impl Default for DeskBudget {
    fn default() -> Self {
        Self {
            interior: 500,
            observations: 15,
        }
    }
}

/// Everything a run needs; serialized next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub case: CaseSelector,
    pub seed: u64,
    /// Output directory when `--out` is not given.
    pub out_dir: Option<PathBuf>,
    /// Replaces the built-in layout, sampling and reference model of `case`.
    pub spec: Option<CaseSpec>,
    pub desk: DeskBudget,
    pub train: TrainConfig,
    pub physics: PhysicsConfig,
    pub output_channels: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: CaseSelector::Manufactured,
            seed: 0,
            out_dir: None,
            spec: None,
            desk: DeskBudget::default(),
            train: TrainConfig::default(),
            physics: PhysicsConfig::default(),
            output_channels: 2,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }

    pub fn case_spec(&self) -> CaseSpec {
        if let Some(s) = &self.spec {
            return s.clone();
        }
        match self.case {
            CaseSelector::Case1 => CaseSpec::case1(),
            CaseSelector::Case2 => CaseSpec::case2(),
            CaseSelector::Case3 => CaseSpec::case3(),
            CaseSelector::Manufactured => CaseSpec::desk(self.desk.interior, self.desk.observations, &self.physics),
        }
    }

    /// The training seed always follows the run seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    /// Metrics on the unseen split, or on the held-out points of the single
    /// desk condition.
    pub fn evaluation_split(&self) -> PointSelection {
        if matches!(self.case_spec().sampling, crate::training::Sampling::Single { .. }) {
            PointSelection::HeldOut
        } else {
            PointSelection::All
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mpipn", about = "Parametric acoustic-structure solver driven by JSON run configs")]
struct Cli {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed and MPIPN_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the point cloud and observation layout; prints per-domain counts.
    Geometry {
        /// Overrides the config's case.
        #[arg(value_enum)]
        case: Option<CaseSelector>,
    },
    /// Build the train and test condition sets.
    Dataset,
    /// Train and write checkpoints plus the loss history.
    Train,
    /// Evaluate a checkpoint and write RDE/APE reports.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Physics-informed vs data-driven paired training.
    Ablate,
    /// Plot-ready CSV bundles from a training run directory.
    Export {
        /// Directory written by `train`.
        run_dir: PathBuf,
    },
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I, env_seed: Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, env_seed, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_config(cli: &Cli, env_seed: Option<String>) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut seed = cfg.seed;
    if let Some(s) = env_seed {
        seed = s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
    }
    if let Some(s) = cli.seed {
        seed = s;
    }
    cfg = cfg.with_seed(seed);
    if let Some(o) = &cli.out {
        cfg.out_dir = Some(o.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let d = cfg
        .out_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no output directory: pass --out DIR".into()))?;
    fs::create_dir_all(&d).map_err(|e| CliError::Input(format!("{}: {e}", d.display())))?;
    Ok(d)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush()?;
    Ok(())
}

fn execute(cli: Cli, env_seed: Option<String>, out: &mut dyn Write) -> Result<()> {
    let mut cfg = resolve_config(&cli, env_seed)?;
    match cli.command {
        Command::Geometry { case } => {
            if let Some(c) = case {
                cfg.case = c;
                cfg.spec = None;
            }
            cmd_geometry(&cfg, out)
        }
        Command::Dataset => cmd_dataset(&cfg, out),
        Command::Train => cmd_train(&cfg, out),
        Command::Eval { checkpoint } => cmd_eval(&cfg, &checkpoint, out),
        Command::Ablate => cmd_ablate(&cfg, out),
        Command::Export { run_dir } => cmd_export(&cfg, &run_dir, out),
    }
}

/// Datasets of the configured case.
pub fn datasets(cfg: &RunConfig) -> Result<(CaseSpec, Dataset, Dataset)> {
    let spec = cfg.case_spec();
    let (train_set, test_set) = build_dataset(&spec, &cfg.physics, cfg.seed)?;
    Ok((spec, train_set, test_set))
}

/// Freshly initialised parameters for the configured case.
pub fn initial_params(cfg: &RunConfig, spec: &CaseSpec) -> Result<ModelParams> {
    let (lo, hi) = spec.frequency_range();
    Ok(init_params(
        cfg.seed,
        Architecture {
            output_channels: cfg.output_channels,
        },
        InputNormalization::new(&spec.geometry.outer, lo, hi),
        sampling_stats(),
    )?)
}

/// Writes `cloud.csv` and `observations.csv`; prints `N1 N2 N3`.
pub fn cmd_geometry(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let spec = cfg.case_spec();
    let cloud = build_case_geometry(&spec.geometry, cfg.seed)?;
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        // same layout as the dataset: indices drawn with the first training condition's truth
        let first = sample_first_condition(&spec, cfg.seed)?;
        let truth = spec.truth.truth(&cloud, &first, &cfg.physics)?;
        let obs = sample_observations(&cloud, &spec.geometry.observations, cfg.seed, &truth.pressure)?;
        write_cloud_csv(&cloud, create(&dir.join("cloud.csv"))?)?;
        write_observations_csv(&obs, create(&dir.join("observations.csv"))?)?;
    }
    let c = cloud.counts();
    writeln!(
        out,
        "{} {} {}",
        c[DomainTag::PressureAcoustic],
        c[DomainTag::PlaneWaveRadiation],
        c[DomainTag::AcousticStructureCoupling]
    )?;
    Ok(())
}

fn sample_first_condition(spec: &CaseSpec, seed: u64) -> Result<crate::physics::ParametricCondition> {
    let (train_c, _) = crate::training::sample_conditions(&spec.sampling, seed)?;
    train_c
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Usage("case has no training conditions".into()))
}

fn manifest(cfg: &RunConfig, c: &crate::physics::ParametricCondition) -> ConditionManifest {
    let p = &cfg.physics;
    ConditionManifest::new(c, p.medium, p.wave, p.wavenumber_mode, p.coupling_mode)
}

/// Writes the cloud, one manifest per condition and the training
/// observations under `train/` and `test/`.
pub fn cmd_dataset(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dir = out_dir(cfg)?;
    let (_, train_set, test_set) = datasets(cfg)?;
    write_cloud_csv(&train_set.cloud, create(&dir.join("cloud.csv"))?)?;
    for (name, set) in [("train", &train_set), ("test", &test_set)] {
        let sub = dir.join(name);
        fs::create_dir_all(&sub)?;
        for (i, c) in set.conditions.iter().enumerate() {
            let mut w = create(&sub.join(format!("{i:04}.json")))?;
            write_manifest(&mut w, &manifest(cfg, c))?;
            w.flush()?;
            if !set.observations[i].is_empty() {
                write_observations_csv(&set.observations[i], create(&sub.join(format!("{i:04}_obs.csv")))?)?;
            }
        }
    }
    writeln!(out, "train {} test {}", train_set.len(), test_set.len())?;
    Ok(())
}

/// Trains from scratch; writes `config.json`, checkpoints and `history.csv`.
pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dir = out_dir(cfg)?;
    write_json(&dir.join("config.json"), cfg)?;
    let (spec, train_set, _) = datasets(cfg)?;
    let params = initial_params(cfg, &spec)?;
    let outcome = train(params, &train_set, &cfg.physics, &cfg.train, &RunOutput::to_dir(&dir))?;
    match outcome.history.last() {
        Some(last) => writeln!(out, "epoch {} total {:e}", last.epoch, last.losses.total)?,
        None => writeln!(out, "0 epochs; wrote {}", checkpoint_name(0))?,
    }
    Ok(())
}

fn load(path: &Path) -> Result<ModelParams> {
    if !path.exists() {
        return Err(CliError::Input(format!("missing checkpoint {}", path.display())));
    }
    Ok(load_checkpoint(path)?)
}

/// Writes `report.csv`, `report.json` and `ape.csv` for a checkpoint.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, out: &mut dyn Write) -> Result<()> {
    let params = load(checkpoint)?;
    let dir = out_dir(cfg)?;
    let (spec, train_set, test_set) = datasets(cfg)?;
    let selection = cfg.evaluation_split();
    let set = if selection == PointSelection::HeldOut { &train_set } else { &test_set };
    let report = evaluate(&params, set, &spec.truth, &cfg.physics, selection)?;
    write_report_csv(create(&dir.join("report.csv"))?, &report)?;
    write_report_json(create(&dir.join("report.json"))?, &report)?;
    write_ape_csv(create(&dir.join("ape.csv"))?, &report, &set.cloud)?;
    for tag in DomainTag::ALL {
        if let Some(s) = report.summary[tag] {
            writeln!(out, "{} average RDE {:e}", tag.as_str(), s.average)?;
        }
    }
    Ok(())
}

/// Paired physics-informed / data-driven runs; writes `ablation.csv` and
/// both arm reports.
pub fn cmd_ablate(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dir = out_dir(cfg)?;
    let (spec, train_set, test_set) = datasets(cfg)?;
    let init = initial_params(cfg, &spec)?;
    let selection = cfg.evaluation_split();
    let eval_set = if selection == PointSelection::HeldOut { &train_set } else { &test_set };
    let setup = AblationSetup {
        init: &init,
        train_set: &train_set,
        eval_set,
        truth: &spec.truth,
        physics: &cfg.physics,
        selection,
    };
    let report = ablation_run(&setup, &cfg.train)?;
    writeln!(out, "physics-informed arm dataset {}", report.dataset_hash)?;
    writeln!(out, "data-driven arm dataset {}", report.dataset_hash)?;
    report.write_csv(create(&dir.join("ablation.csv"))?)?;
    write_report_csv(create(&dir.join("physics_report.csv"))?, &report.physics)?;
    write_report_csv(create(&dir.join("data_report.csv"))?, &report.data)?;
    for tag in DomainTag::ALL {
        if let Some(r) = report.improvement[tag] {
            writeln!(out, "{} improvement ratio {:.4}", tag.as_str(), r)?;
        }
    }
    Ok(())
}

/// Long-format loss curves, predicted fields and APE maps of the latest
/// checkpoint in `run_dir`.
pub fn cmd_export(cfg: &RunConfig, run_dir: &Path, out: &mut dyn Write) -> Result<()> {
    let history_path = run_dir.join("history.csv");
    let (epoch, ckpt) = match latest_checkpoint(run_dir) {
        Ok(Some(found)) => found,
        _ => return Err(CliError::Input(format!("{}: no checkpoints", run_dir.display()))),
    };
    // the run's own config, when present, describes its data
    let run_cfg = match RunConfig::load(&run_dir.join("config.json")) {
        Ok(c) => c,
        Err(_) => cfg.clone(),
    };
    let dir = out_dir(&RunConfig {
        out_dir: cfg.out_dir.clone().or_else(|| Some(run_dir.join("export"))),
        ..run_cfg.clone()
    })?;

    if history_path.exists() {
        let history = read_history(File::open(&history_path)?)?;
        let mut w = csv::Writer::from_writer(create(&dir.join("loss_long.csv"))?);
        let csv_err = |e: csv::Error| CliError::Input(e.to_string());
        w.write_record(["epoch", "component", "value"]).map_err(csv_err)?;
        for row in &history {
            let l = &row.losses;
            for (name, v) in [
                ("L_pad", l.pad),
                ("L_pwr_r", l.pwr_r),
                ("L_pwr_i", l.pwr_i),
                ("L_asc", l.asc),
                ("L_obs", l.obs),
                ("total", l.total),
            ] {
                w.write_record([row.epoch.to_string(), name.to_string(), format!("{v:e}")])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
    }

    let params = load(&ckpt)?;
    let (spec, train_set, test_set) = datasets(&run_cfg)?;
    let selection = run_cfg.evaluation_split();
    let set = if selection == PointSelection::HeldOut { &train_set } else { &test_set };
    let report = evaluate(&params, set, &spec.truth, &run_cfg.physics, PointSelection::All)?;
    let mut fields = csv::Writer::from_writer(create(&dir.join("fields.csv"))?);
    let csv_err = |e: csv::Error| CliError::Input(e.to_string());
    fields
        .write_record(["condition", "domain", "x", "y", "pred_re", "pred_im", "true_re", "true_im"])
        .map_err(csv_err)?;
    for (ci, cond) in set.conditions.iter().enumerate() {
        let code = crate::network::encode_implicit(&cond.implicit_raw(), &params.implicit)?;
        let pred = params.predict(&set.cloud, cond.f_hz, &code)?;
        let truth = spec.truth.truth(&set.cloud, cond, &run_cfg.physics)?;
        let mut ape = csv::Writer::from_writer(create(&dir.join(format!("ape_{ci:04}.csv")))?);
        ape.write_record(["x", "y", "ape"]).map_err(csv_err)?;
        let c = &report.conditions[ci];
        for tag in DomainTag::ALL {
            let pts = set.cloud.points(tag);
            for (i, p) in pts.iter().enumerate() {
                let (pr, tr) = (pred[tag][i], truth.pressure[tag][i]);
                fields
                    .write_record([
                        ci.to_string(),
                        tag.as_str().to_string(),
                        format!("{}", p.x),
                        format!("{}", p.y),
                        format!("{:e}", pr.re),
                        format!("{:e}", pr.im),
                        format!("{:e}", tr.re),
                        format!("{:e}", tr.im),
                    ])
                    .map_err(csv_err)?;
                ape.write_record([format!("{}", p.x), format!("{}", p.y), format!("{:e}", c.ape[tag][i])])
                    .map_err(csv_err)?;
            }
        }
        ape.flush()?;
    }
    fields.flush()?;
    writeln!(out, "exported epoch {epoch} to {}", dir.display())?;
    Ok(())
}
