//! Condition sets, the RAdam + LookAhead optimizer, and the training loop.
//!
//! One optimizer step per parametric condition over its full cloud; the
//! condition order is reshuffled every epoch from the run seed.

mod dataset;
mod optim;

pub use dataset::{
    build_dataset, desk_frequency, desk_weights, sample_conditions, sampling_stats, CaseSpec, Dataset, Sampling, Split, Truth,
    TruthModel, DENSITY_RANGE, DESK_WAVENUMBER, FREQUENCY_RANGE, MODULUS_RANGE,
};
pub use optim::{
    lookahead_step, radam_step, rectification_rho, LookaheadConfig, Optimizer, OptimizerState, RadamConfig,
    RadamState,
};

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::geometry::GeometryError;
use crate::network::{save_checkpoint, ModelParams, NetworkError};
use crate::physics::{condition_losses, ConditionProblem, LossBreakdown, LossWeights, PhysicsConfig, PhysicsError};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("non-finite gradient in parameter tensor {tensor}")]
    NonFiniteGradient { tensor: usize },
    #[error("parameter tensor {tensor}: shape of gradient or optimizer state does not match")]
    ShapeMismatch { tensor: usize },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("dataset has no conditions")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub optimizer: RadamConfig,
    /// `None` disables the LookAhead wrapper.
    pub lookahead: Option<LookaheadConfig>,
    pub weights: LossWeights,
    pub seed: u64,
    /// Write a checkpoint every this many epochs; 0 disables periodic saves.
    pub checkpoint_every: usize,
    /// Epochs whose parameters are kept for error-cluster analysis.
    pub snapshot_epochs: Vec<usize>,
    /// Loss above which training aborts.
    pub divergence_limit: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            optimizer: RadamConfig::default(),
            lookahead: Some(LookaheadConfig::default()),
            weights: LossWeights::default(),
            seed: 0,
            checkpoint_every: 0,
            snapshot_epochs: vec![200, 800, 1800],
            divergence_limit: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> Optimizer {
        Optimizer {
            radam: self.optimizer,
            lookahead: self.lookahead,
        }
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        self.optimizer().validate()?;
        let w = self.weights;
        if !(w.alpha >= 0.0 && w.beta >= 0.0 && w.alpha.is_finite() && w.beta.is_finite()) {
            return Err(TrainingError::InvalidConfig(format!("loss weights {w:?}")));
        }
        if !(self.divergence_limit > 0.0) {
            return Err(TrainingError::InvalidConfig("divergence limit must be positive".into()));
        }
        Ok(())
    }
}

/// Mean loss components over one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub losses: LossBreakdown,
}

pub const HISTORY_HEADER: [&str; 7] = ["epoch", "L_pad", "L_pwr_r", "L_pwr_i", "L_asc", "L_obs", "total"];

pub fn write_history<W: Write>(writer: W, history: &[HistoryRow]) -> Result<(), TrainingError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HISTORY_HEADER)?;
    for row in history {
        let l = &row.losses;
        // `{:e}` prints the shortest round-tripping form
        w.write_record([
            row.epoch.to_string(),
            format!("{:e}", l.pad),
            format!("{:e}", l.pwr_r),
            format!("{:e}", l.pwr_i),
            format!("{:e}", l.asc),
            format!("{:e}", l.obs),
            format!("{:e}", l.total),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history<R: Read>(reader: R) -> Result<Vec<HistoryRow>, TrainingError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(HISTORY_HEADER) {
        return Err(TrainingError::InvalidConfig(format!("unexpected history header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, TrainingError> {
            rec[i]
                .parse()
                .map_err(|_| TrainingError::InvalidConfig(format!("bad number {:?}", &rec[i])))
        };
        out.push(HistoryRow {
            epoch: rec[0]
                .parse()
                .map_err(|_| TrainingError::InvalidConfig(format!("bad epoch {:?}", &rec[0])))?,
            losses: LossBreakdown {
                pad: num(1)?,
                pwr_r: num(2)?,
                pwr_i: num(3)?,
                asc: num(4)?,
                obs: num(5)?,
                total: num(6)?,
            },
        });
    }
    Ok(out)
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("ckpt_{epoch}.bin")
}

/// Trained parameters and everything recorded along the way.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<HistoryRow>,
    pub snapshots: Vec<(usize, ModelParams)>,
}

/// Where checkpoints and the history file go, if anywhere.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub dir: Option<PathBuf>,
}

impl RunOutput {
    pub fn to_dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    fn checkpoint(&self, params: &ModelParams, epoch: usize) -> Result<(), TrainingError> {
        if let Some(d) = &self.dir {
            save_checkpoint(params, &d.join(checkpoint_name(epoch)))?;
        }
        Ok(())
    }

    fn history(&self, history: &[HistoryRow]) -> Result<(), TrainingError> {
        if let Some(d) = &self.dir {
            let f = std::fs::File::create(d.join("history.csv"))?;
            write_history(std::io::BufWriter::new(f), history)?;
        }
        Ok(())
    }
}

fn current_tensors(params: &ModelParams) -> Vec<Tensor> {
    params.tensors().into_iter().cloned().collect()
}

fn store_tensors(params: &mut ModelParams, values: &[Tensor]) {
    params.for_each_tensor_mut(|i, t| t.clone_from(&values[i]));
}

/// Loss and parameter gradients of one condition.
pub fn condition_gradient(
    params: &ModelParams,
    problem: &ConditionProblem,
    physics: &PhysicsConfig,
) -> Result<(LossBreakdown, Vec<Tensor>), TrainingError> {
    let tape = Tape::new();
    let (fwd, losses) = condition_losses(&tape, params, problem, physics)?;
    let leaves: Vec<Var> = fwd.weights.leaves().into_iter().copied().collect();
    let grads = tape.gradient(losses.total, &leaves)?;
    Ok((losses.breakdown, grads))
}

pub fn condition_problem(
    dataset: &Dataset,
    index: usize,
    params: &ModelParams,
    physics: &PhysicsConfig,
) -> Result<ConditionProblem, TrainingError> {
    let u = &dataset.displacements[index];
    Ok(ConditionProblem::new(
        &dataset.cloud,
        &dataset.conditions[index],
        params,
        physics,
        dataset.observations[index].clone(),
        (!u.normal.is_empty()).then(|| u.clone()),
    )?)
}

/// Runs `config.epochs` epochs over `dataset`.
///
/// With an output directory, writes `ckpt_0.bin`, periodic and snapshot
/// checkpoints, the final checkpoint and `history.csv`. On divergence the
/// history so far is still written and the last checkpoint is left in place.
pub fn train(
    mut params: ModelParams,
    dataset: &Dataset,
    physics: &PhysicsConfig,
    config: &TrainConfig,
    output: &RunOutput,
) -> Result<TrainOutcome, TrainingError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let physics = PhysicsConfig {
        weights: config.weights,
        ..*physics
    };
    let optimizer = config.optimizer();
    let mut flat = current_tensors(&params);
    let mut state = optimizer.init(&flat);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut snapshots = Vec::new();
    if let Some(d) = &output.dir {
        std::fs::create_dir_all(d)?;
    }
    output.checkpoint(&params, 0)?;

    // Problems are cheap to rebuild; caching them only pays off for small sets.
    let cache: Option<Vec<ConditionProblem>> = if dataset.len() <= 16 {
        Some(
            (0..dataset.len())
                .map(|i| condition_problem(dataset, i, &params, &physics))
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_losses = Vec::with_capacity(order.len());
        for &i in &order {
            let built;
            let problem = match &cache {
                Some(c) => &c[i],
                None => {
                    built = condition_problem(dataset, i, &params, &physics)?;
                    &built
                }
            };
            let (losses, grads) = condition_gradient(&params, problem, &physics)?;
            if !losses.total.is_finite() || losses.total > config.divergence_limit {
                output.history(&history)?;
                return Err(TrainingError::Diverged {
                    epoch,
                    loss: losses.total,
                });
            }
            epoch_losses.push(losses);
            optimizer.step(&mut flat, &grads, &mut state)?;
            store_tensors(&mut params, &flat);
        }
        let row = HistoryRow {
            epoch,
            losses: LossBreakdown::mean(&epoch_losses),
        };
        log::debug!("epoch {epoch}: total {:e}", row.losses.total);
        history.push(row);
        if config.snapshot_epochs.contains(&epoch) {
            snapshots.push((epoch, params.clone()));
            output.checkpoint(&params, epoch)?;
        } else if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
            output.checkpoint(&params, epoch)?;
        }
    }
    if config.epochs > 0 {
        output.checkpoint(&params, config.epochs)?;
    }
    output.history(&history)?;
    Ok(TrainOutcome {
        params,
        history,
        snapshots,
    })
}

/// `path` with the highest-epoch `ckpt_*.bin` in a run directory.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<(usize, PathBuf)>, TrainingError> {
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let epoch = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("ckpt_"))
            .and_then(|n| n.strip_suffix(".bin"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(e) = epoch {
            if best.as_ref().is_none_or(|(b, _)| e > *b) {
                best = Some((e, path));
            }
        }
    }
    Ok(best)
}
