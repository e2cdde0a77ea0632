//! Physics-informed vs data-only training on the desk case, from the same
//! initial parameters and dataset.
//!
//! `cargo run --release --example ablation -- [EPOCHS]`

use std::error::Error;

use acoustic_pinn::evaluation::{ablation_run, AblationSetup, PointSelection};
use acoustic_pinn::geometry::DomainTag;
use acoustic_pinn::network::{init_params, Architecture, InputNormalization};
use acoustic_pinn::physics::PhysicsConfig;
use acoustic_pinn::training::{build_dataset, desk_weights, sampling_stats, CaseSpec, TrainConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(500), |s| s.parse())?;
    let physics = PhysicsConfig::default();
    let spec = CaseSpec::desk(500, 15, &physics);
    let (train_set, _) = build_dataset(&spec, &physics, 0)?;
    let (lo, hi) = spec.frequency_range();
    let init = init_params(
        0,
        Architecture::default(),
        InputNormalization::new(&spec.geometry.outer, lo, hi),
        sampling_stats(),
    )?;
    let setup = AblationSetup {
        init: &init,
        train_set: &train_set,
        eval_set: &train_set,
        truth: &spec.truth,
        physics: &physics,
        selection: PointSelection::HeldOut,
    };
    let cfg = TrainConfig {
        epochs,
        weights: desk_weights(),
        snapshot_epochs: vec![],
        ..Default::default()
    };
    let report = ablation_run(&setup, &cfg)?;
    let tag = DomainTag::PressureAcoustic;
    println!("dataset {}", report.dataset_hash);
    println!("physics-informed RDE {:.4}", report.physics.average_rde(tag).unwrap_or(f64::NAN));
    println!("data-only RDE        {:.4}", report.data.average_rde(tag).unwrap_or(f64::NAN));
    println!("improvement ratio    {:.3}", report.improvement[tag].unwrap_or(f64::NAN));
    report.write_csv(std::io::stdout())?;
    Ok(())
}
