//! Trains the desk-scale case (unit square, k = 6, 500 points, 15
//! observations) and reports the held-out relative error.
//!
//! `cargo run --release --example desk_training -- [EPOCHS] [OUT_DIR]`

use std::error::Error;
use std::path::PathBuf;

use acoustic_pinn::evaluation::{evaluate, PointSelection};
use acoustic_pinn::geometry::DomainTag;
use acoustic_pinn::network::{init_params, Architecture, InputNormalization};
use acoustic_pinn::physics::PhysicsConfig;
use acoustic_pinn::training::{build_dataset, desk_weights, sampling_stats, train, CaseSpec, RunOutput, TrainConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(2000), |s| s.parse())?;
    let out = std::env::args().nth(2).map(PathBuf::from);
    let physics = PhysicsConfig::default();
    let spec = CaseSpec::desk(500, 15, &physics);
    let (train_set, _) = build_dataset(&spec, &physics, 0)?;
    let (lo, hi) = spec.frequency_range();
    let params = init_params(
        0,
        Architecture::default(),
        InputNormalization::new(&spec.geometry.outer, lo, hi),
        sampling_stats(),
    )?;
    let cfg = TrainConfig {
        epochs,
        weights: desk_weights(),
        snapshot_epochs: vec![],
        ..Default::default()
    };
    let output = out.map_or_else(RunOutput::default, RunOutput::to_dir);
    let outcome = train(params, &train_set, &physics, &cfg, &output)?;
    for row in outcome.history.iter().filter(|r| r.epoch % 100 == 0 || r.epoch == 1) {
        let l = &row.losses;
        println!("epoch {:>5}  total {:.4e}  obs {:.4e}  pad {:.4e}", row.epoch, l.total, l.obs, l.pad);
    }
    let report = evaluate(&outcome.params, &train_set, &spec.truth, &physics, PointSelection::HeldOut)?;
    if let Some(rde) = report.average_rde(DomainTag::PressureAcoustic) {
        println!("held-out RDE {rde:.4}");
    }
    Ok(())
}
