use acoustic_pinn::network::{init_params, Architecture, InputNormalization, ModelParams};
use acoustic_pinn::physics::{LossWeights, PhysicsConfig};
use acoustic_pinn::training::{
    build_dataset, checkpoint_name, read_history, sampling_stats, train, CaseSpec, Dataset, RunOutput, TrainConfig,
    TrainingError,
};

fn setup(interior: usize, obs: usize) -> (ModelParams, Dataset, PhysicsConfig) {
    let physics = PhysicsConfig::default();
    let spec = CaseSpec::desk(interior, obs, &physics);
    let (train_set, _) = build_dataset(&spec, &physics, 0).unwrap();
    let (lo, hi) = spec.frequency_range();
    let params = init_params(
        0,
        Architecture::default(),
        InputNormalization::new(&spec.geometry.outer, lo, hi),
        sampling_stats(),
    )
    .unwrap();
    (params, train_set, physics)
}

fn config(epochs: usize, beta: f64) -> TrainConfig {
    TrainConfig {
        epochs,
        weights: LossWeights { alpha: 1.0, beta },
        snapshot_epochs: vec![],
        ..Default::default()
    }
}

fn files(dir: &std::path::Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn zero_epochs_leaves_parameters_alone() {
    let (params, data, physics) = setup(40, 5);
    let dir = tempfile::tempdir().unwrap();
    let out = train(params.clone(), &data, &physics, &config(0, 0.1), &RunOutput::to_dir(dir.path())).unwrap();
    assert_eq!(out.params, params);
    assert!(out.history.is_empty());
    assert_eq!(files(dir.path()), vec![checkpoint_name(0), "history.csv".to_string()]);
    let history = read_history(std::fs::File::open(dir.path().join("history.csv")).unwrap()).unwrap();
    assert!(history.is_empty());
}

#[test]
fn memorizes_a_single_condition() {
    let (params, data, physics) = setup(100, 15);
    // LookAhead syncs raise the loss once per cycle by design, so the
    // monotonicity check runs on the inner optimizer alone
    let cfg = TrainConfig {
        lookahead: None,
        ..config(200, 0.0)
    };
    let out = train(params, &data, &physics, &cfg, &RunOutput::default()).unwrap();
    let obs: Vec<f64> = out.history.iter().map(|r| r.losses.obs).collect();
    let warmup = 20;
    let decreasing = obs[warmup..].windows(2).filter(|w| w[1] < w[0]).count();
    let share = decreasing as f64 / (obs.len() - warmup - 1) as f64;
    assert!(share >= 0.9, "decreasing on {share:.3} of epochs");
    assert!(obs[obs.len() - 1] < 0.1 * obs[0]);
}

#[test]
fn lookahead_with_unit_settings_is_plain_radam() {
    let (params, data, physics) = setup(30, 5);
    let bare = TrainConfig {
        lookahead: None,
        ..config(12, 0.1)
    };
    let wrapped = TrainConfig {
        lookahead: Some(acoustic_pinn::training::LookaheadConfig { k: 1, alpha: 1.0 }),
        ..config(12, 0.1)
    };
    let a = train(params.clone(), &data, &physics, &bare, &RunOutput::default()).unwrap();
    let b = train(params, &data, &physics, &wrapped, &RunOutput::default()).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
}

#[test]
fn reruns_are_bit_identical() {
    let (params, data, physics) = setup(30, 5);
    let cfg = config(15, 0.1);
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let a = train(params.clone(), &data, &physics, &cfg, &RunOutput::to_dir(d1.path())).unwrap();
    let b = train(params, &data, &physics, &cfg, &RunOutput::to_dir(d2.path())).unwrap();
    assert_eq!(a.params, b.params);
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("history.csv")).unwrap();
    assert_eq!(read(&d1), read(&d2));
}

#[test]
fn divergence_aborts_and_keeps_the_initial_checkpoint() {
    let (params, data, physics) = setup(30, 5);
    let cfg = TrainConfig {
        divergence_limit: 1e-12,
        ..config(10, 0.1)
    };
    let dir = tempfile::tempdir().unwrap();
    let err = train(params, &data, &physics, &cfg, &RunOutput::to_dir(dir.path())).unwrap_err();
    assert!(matches!(err, TrainingError::Diverged { epoch: 1, .. }), "{err}");
    assert!(dir.path().join(checkpoint_name(0)).exists());
    assert!(dir.path().join("history.csv").exists());
}

#[test]
fn invalid_settings_are_rejected() {
    let (params, data, physics) = setup(30, 5);
    let mut cfg = config(1, 0.1);
    cfg.optimizer.learning_rate = -1.0;
    assert!(train(params.clone(), &data, &physics, &cfg, &RunOutput::default()).is_err());
    let empty = Dataset {
        conditions: vec![],
        observations: vec![],
        displacements: vec![],
        ..data
    };
    let err = train(params, &empty, &physics, &config(1, 0.1), &RunOutput::default()).unwrap_err();
    assert!(matches!(err, TrainingError::EmptyDataset));
}
