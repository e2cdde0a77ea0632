//! One forward pass over the case-1 cloud: feature widths, per-domain
//! predictions and a checkpoint round trip.
//!
//! `cargo run --release --example forward_pass`

use std::error::Error;

use acoustic_pinn::autodiff::Tape;
use acoustic_pinn::geometry::{build_case_geometry, CaseConfig};
use acoustic_pinn::network::{
    decode_checkpoint, encode_checkpoint, encode_implicit, forward, init_params, Architecture, InputNormalization,
    StackedPointCloud,
};
use acoustic_pinn::physics::{ParametricCondition, WATER_DENSITY, WATER_MODULUS};
use acoustic_pinn::training::{sampling_stats, FREQUENCY_RANGE};

fn main() -> Result<(), Box<dyn Error>> {
    let config = CaseConfig::case1();
    let cloud = build_case_geometry(&config, 1)?;
    let (lo, hi) = FREQUENCY_RANGE;
    let params = init_params(
        0,
        Architecture::default(),
        InputNormalization::new(&config.outer, lo, hi),
        sampling_stats(),
    )?;
    println!("parameters: {}", params.parameter_count());

    let condition = ParametricCondition::uniform(300.0, WATER_DENSITY, WATER_MODULUS);
    let code = encode_implicit(&condition.implicit_raw(), &params.implicit)?;
    let (stacked, counts) = StackedPointCloud::from_cloud(&cloud, condition.f_hz);
    let tape = Tape::new();
    let fwd = forward(&tape, &params, &stacked.to_tensor()?, &counts, &code)?;
    println!("local features: {:?}", fwd.local.shape());
    for (tag, c) in fwd.criteria.iter() {
        if let Some(c) = c {
            println!("{:<30} criteria {:?}", tag.as_str(), c.shape());
        }
    }
    println!("tape nodes: {}", tape.len());

    let bytes = encode_checkpoint(&params);
    assert_eq!(decode_checkpoint(&bytes)?, params);
    println!("checkpoint: {} bytes, round trip exact", bytes.len());
    Ok(())
}
