//! Tracks high-error clusters of the interior APE map across training
//! snapshots of the desk case.
//!
//! `cargo run --release --example error_clusters -- [EPOCHS]`

use std::error::Error;

use acoustic_pinn::evaluation::{cluster_snapshot, ClusterSettings};
use acoustic_pinn::network::{init_params, Architecture, InputNormalization};
use acoustic_pinn::physics::PhysicsConfig;
use acoustic_pinn::training::{build_dataset, desk_weights, sampling_stats, train, CaseSpec, RunOutput, TrainConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(600), |s| s.parse())?;
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
        snapshot_epochs: [epochs / 6, epochs / 2, epochs].into_iter().filter(|&e| e > 0).collect(),
        ..Default::default()
    };
    let outcome = train(params, &train_set, &physics, &cfg, &RunOutput::default())?;
    let snaps = cluster_snapshot(
        &outcome.snapshots,
        &train_set,
        0,
        &spec.truth,
        &physics,
        spec.geometry.outer.area(),
        &ClusterSettings::default(),
    )?;
    for s in &snaps {
        let largest = s.clusters.first().map_or(0, |c| c.size());
        println!(
            "epoch {:>5}: {:>2} clusters, largest {:>2} points, total area {:.4} m^2, APE threshold {:.3e}",
            s.epoch,
            s.count(),
            largest,
            s.total_area(),
            s.threshold
        );
    }
    Ok(())
}
