//! Error metrics, per-domain reports, the physics-vs-data ablation and
//! high-error cluster analysis.

mod clusters;
mod report;

pub use clusters::{
    cluster_snapshot, error_clusters, load_snapshots, median_spacing, percentile, Cluster, ClusterSettings, ClusterSnapshot,
};
pub use report::{
    write_ape_csv, write_report_csv, write_report_json, AblationReport, ConditionReport, DomainSummary,
    EvaluationReport,
};

use num_complex::Complex64;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{DomainTag, PerDomain};
use crate::network::{encode_implicit, ModelParams, NetworkError};
use crate::physics::{PhysicsConfig, PhysicsError};
use crate::training::{train, Dataset, RunOutput, TrainConfig, TrainingError, TruthModel};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("reference field is zero everywhere; relative error is undefined")]
    ZeroTruth,
    #[error("{what}: expected {expected} values, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("missing checkpoint {0}")]
    MissingCheckpoint(String),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, EvaluationError>;

/// `sum |pred - truth| / sum |truth|` with complex magnitudes.
pub fn rde(pred: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(EvaluationError::LengthMismatch {
            what: "prediction",
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let den: f64 = truth.iter().map(|t| t.norm()).sum();
    if den == 0.0 {
        return Err(EvaluationError::ZeroTruth);
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).norm()).sum();
    Ok(num / den)
}

/// `|Re(p - t)| + |Im(p - t)|`.
pub fn ape(pred: Complex64, truth: Complex64) -> f64 {
    let d = pred - truth;
    d.re.abs() + d.im.abs()
}

pub fn ape_map(pred: &[Complex64], truth: &[Complex64]) -> Vec<f64> {
    pred.iter().zip(truth).map(|(&p, &t)| ape(p, t)).collect()
}

/// Which points enter the metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointSelection {
    All,
    /// Excludes each condition's observation points.
    HeldOut,
}

/// Indices per domain used for one condition.
pub fn selected_indices(dataset: &Dataset, condition: usize, selection: PointSelection) -> PerDomain<Vec<usize>> {
    let obs = &dataset.observations[condition];
    dataset.cloud.counts().map(|tag, &n| match selection {
        PointSelection::All => (0..n).collect(),
        PointSelection::HeldOut => {
            let skip = obs.indices(tag);
            (0..n).filter(|i| !skip.contains(i)).collect()
        }
    })
}

/// Metrics of `params` over every condition of `dataset`.
pub fn evaluate(
    params: &ModelParams,
    dataset: &Dataset,
    truth: &TruthModel,
    physics: &PhysicsConfig,
    selection: PointSelection,
) -> Result<EvaluationReport> {
    let mut conditions = Vec::with_capacity(dataset.len());
    for (ci, cond) in dataset.conditions.iter().enumerate() {
        let code = encode_implicit(&cond.implicit_raw(), &params.implicit)?;
        let pred = params.predict(&dataset.cloud, cond.f_hz, &code)?;
        let reference = truth.truth(&dataset.cloud, cond, physics)?;
        let idx = selected_indices(dataset, ci, selection);
        conditions.push(compare_fields(ci, cond.f_hz, &pred, &reference.pressure, idx)?);
    }
    Ok(EvaluationReport::from_conditions(conditions))
}

/// Metrics of one condition at the given indices.
pub fn compare_fields(
    condition: usize,
    f_hz: f64,
    pred: &PerDomain<Vec<Complex64>>,
    truth: &PerDomain<Vec<Complex64>>,
    indices: PerDomain<Vec<usize>>,
) -> Result<ConditionReport> {
    let mut rdes = PerDomain::new(None, None, None);
    let mut apes = PerDomain::new(Vec::new(), Vec::new(), Vec::new());
    for tag in DomainTag::ALL {
        let n = truth[tag].len();
        if pred[tag].len() != n {
            return Err(EvaluationError::LengthMismatch {
                what: "prediction",
                expected: n,
                got: pred[tag].len(),
            });
        }
        if let Some(&bad) = indices[tag].iter().find(|&&i| i >= n) {
            return Err(EvaluationError::LengthMismatch {
                what: "point index",
                expected: n,
                got: bad,
            });
        }
        let p: Vec<Complex64> = indices[tag].iter().map(|&i| pred[tag][i]).collect();
        let t: Vec<Complex64> = indices[tag].iter().map(|&i| truth[tag][i]).collect();
        apes[tag] = ape_map(&p, &t);
        rdes[tag] = match rde(&p, &t) {
            Ok(v) => Some(v),
            // empty domains and zero reference fields have no relative error
            Err(EvaluationError::ZeroTruth) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(ConditionReport {
        condition,
        f_hz,
        rde: rdes,
        indices,
        ape: apes,
    })
}

/// SHA-256 over the cloud, conditions and observed values.
pub fn dataset_hash(dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    for tag in DomainTag::ALL {
        for p in dataset.cloud.points(tag) {
            h.update(p.x.to_le_bytes());
            h.update(p.y.to_le_bytes());
        }
    }
    for (c, obs) in dataset.conditions.iter().zip(&dataset.observations) {
        h.update(c.f_hz.to_le_bytes());
        for v in c.densities.iter().chain(&c.moduli) {
            h.update(v.to_le_bytes());
        }
        for o in &obs.entries {
            h.update([o.domain.index() as u8]);
            h.update((o.index as u64).to_le_bytes());
            h.update(o.value.re.to_le_bytes());
            h.update(o.value.im.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Inputs shared by both ablation arms.
pub struct AblationSetup<'a> {
    pub init: &'a ModelParams,
    pub train_set: &'a Dataset,
    pub eval_set: &'a Dataset,
    pub truth: &'a TruthModel,
    pub physics: &'a PhysicsConfig,
    pub selection: PointSelection,
}

/// Trains the full-loss arm with `physics_config` and the data-driven arm
/// with the same settings but `beta = 0`, from the same initial parameters.
pub fn ablation_run(setup: &AblationSetup, physics_config: &TrainConfig) -> Result<AblationReport> {
    let mut data_config = physics_config.clone();
    data_config.weights.beta = 0.0;
    ablation_pair(setup, physics_config, &data_config)
}

/// Same as [`ablation_run`] with both arm configurations given explicitly.
pub fn ablation_pair(setup: &AblationSetup, arm_a: &TrainConfig, arm_b: &TrainConfig) -> Result<AblationReport> {
    let hash = dataset_hash(setup.train_set);
    let run = |cfg: &TrainConfig| -> Result<EvaluationReport> {
        log::info!("ablation arm beta={} on dataset {hash}", cfg.weights.beta);
        let out = train(setup.init.clone(), setup.train_set, setup.physics, cfg, &RunOutput::default())?;
        evaluate(&out.params, setup.eval_set, setup.truth, setup.physics, setup.selection)
    };
    let physics = run(arm_a)?;
    let data = run(arm_b)?;
    Ok(AblationReport::new(physics, data, hash))
}
