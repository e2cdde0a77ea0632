//! Samples the constant- and changeable-condition layouts and writes the
//! clouds and observation layouts as CSV.
//!
//! `cargo run --release --example point_clouds -- [OUT_DIR]`

use std::error::Error;
use std::fs::File;
use std::path::PathBuf;

use acoustic_pinn::geometry::{
    build_case_geometry, sample_observations, write_cloud_csv, write_observations_csv, CaseConfig, DomainTag,
};
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    for config in [CaseConfig::case1(), CaseConfig::case3(), CaseConfig::manufactured(500, 15)] {
        let cloud = build_case_geometry(&config, 1)?;
        let c = cloud.counts();
        println!(
            "{:<13} interior {:>5}  radiation {:>4}  coupling {:>4}  observations {:>3} ({:.2}%)",
            config.case_id,
            c[DomainTag::PressureAcoustic],
            c[DomainTag::PlaneWaveRadiation],
            c[DomainTag::AcousticStructureCoupling],
            config.total_observations(),
            100.0 * config.total_observations() as f64 / cloud.total() as f64
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            // observation values are placeholders here; datasets fill in the truth
            let zeros = cloud.counts().map(|_, &n| vec![Complex64::new(0.0, 0.0); n]);
            let obs = sample_observations(&cloud, &config.observations, 1, &zeros)?;
            write_cloud_csv(&cloud, File::create(dir.join(format!("{}_cloud.csv", config.case_id)))?)?;
            write_observations_csv(&obs, File::create(dir.join(format!("{}_obs.csv", config.case_id)))?)?;
        }
    }
    Ok(())
}
