//! Train/test condition sets of the three cases and a round trip of one
//! condition manifest.
//!
//! `cargo run --release --example datasets`

use std::error::Error;

use acoustic_pinn::evaluation::dataset_hash;
use acoustic_pinn::physics::{read_manifest, write_manifest, ConditionManifest, PhysicsConfig};
use acoustic_pinn::training::{build_dataset, CaseSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let physics = PhysicsConfig::default();
    for (name, spec) in [("case1", CaseSpec::case1()), ("case2", CaseSpec::case2()), ("case3", CaseSpec::case3())] {
        let (train, test) = build_dataset(&spec, &physics, 0)?;
        let freqs = |d: &acoustic_pinn::training::Dataset| {
            let f: Vec<f64> = d.conditions.iter().map(|c| c.f_hz).collect();
            (f.iter().copied().fold(f64::INFINITY, f64::min), f.iter().copied().fold(0.0, f64::max))
        };
        let (tr_lo, tr_hi) = freqs(&train);
        let (te_lo, te_hi) = freqs(&test);
        println!(
            "{name}: train {:>4} conditions {tr_lo:.1}-{tr_hi:.1} Hz, test {:>3} conditions {te_lo:.1}-{te_hi:.1} Hz, {} observations, hash {}",
            train.len(),
            test.len(),
            train.observations[0].len(),
            &dataset_hash(&train)[..12]
        );
        let m = ConditionManifest::new(
            &test.conditions[0],
            physics.medium,
            physics.wave,
            physics.wavenumber_mode,
            physics.coupling_mode,
        );
        let mut buf = Vec::new();
        write_manifest(&mut buf, &m)?;
        assert_eq!(read_manifest(buf.as_slice())?, m);
    }
    Ok(())
}
