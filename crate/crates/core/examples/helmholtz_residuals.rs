//! Residuals of manufactured fields: the exact plane wave, the two
//! degenerate fields, and the coupling residual with derived displacement.
//!
//! `cargo run --release --example helmholtz_residuals`

use std::error::Error;

use acoustic_pinn::geometry::{build_case_geometry, CaseConfig, DomainTag};
use acoustic_pinn::physics::{
    angular_frequency, background_pressure, derived_displacement, l1_mean, manufactured_solution, residual_asc,
    residual_pad, residual_pwr, sample_field, wavenumber, ComplexField, CouplingMode, Medium, WaveSpec,
    WavenumberMode,
};
use num_complex::Complex64;

fn background(points: &[acoustic_pinn::geometry::Point2], k: f64) -> ComplexField {
    let s: Vec<_> = points.iter().map(|&p| background_pressure(p, &WaveSpec::default(), k)).collect();
    ComplexField::from_samples(&s)
}

fn main() -> Result<(), Box<dyn Error>> {
    let cloud = build_case_geometry(&CaseConfig::case1(), 1)?;
    let medium = Medium::default();
    let f_hz = 300.0;
    let k = wavenumber(f_hz, &medium, WavenumberMode::Standard);
    let omega = angular_frequency(f_hz);
    println!("f = {f_hz} Hz, k = {k:.4} rad/m");

    let interior = cloud.points(DomainTag::PressureAcoustic);
    let wave = manufactured_solution(k, Complex64::new(0.5, 0.2), [0.6, 0.8])?;
    let ps = sample_field(&wave, &interior);
    let pb = background(&interior, k);
    println!("L_pad, exact plane wave: {:.3e}", l1_mean(&residual_pad(&ps, &pb, k)?));
    let minus = pb.scale(Complex64::new(-1.0, 0.0));
    println!("L_pad, p_s = -p_b:       {:.3e}", l1_mean(&residual_pad(&minus, &pb, k)?));

    let rad = cloud.points(DomainTag::PlaneWaveRadiation);
    let normals: Vec<_> = cloud.radiation.iter().map(|b| b.normal).collect();
    let tangents: Vec<_> = cloud.radiation.iter().map(|b| b.tangent).collect();
    let pb_rad = background(&rad, k);
    for (name, ps) in [("p_s = 0", ComplexField::zeros(rad.len())), ("p_s = -p_b", pb_rad.scale(Complex64::new(-1.0, 0.0)))] {
        let (re, im) = residual_pwr(&ps, &pb_rad, k, &normals, &tangents)?;
        println!("radiation, {name:<10}: L_pwr_r {:.3e}  L_pwr_i {:.3e}", l1_mean(&re), l1_mean(&im));
    }

    let cpl = cloud.points(DomainTag::AcousticStructureCoupling);
    let normals: Vec<_> = cloud.coupling.iter().map(|b| b.normal).collect();
    let ps = sample_field(&wave, &cpl);
    let pb = background(&cpl, k);
    let u = derived_displacement(&ps.add(&pb)?, &medium, omega, &normals)?;
    for mode in [CouplingMode::ContinuumConsistent, CouplingMode::Literal] {
        let r = residual_asc(&ps, &pb, Some(&u), omega, &normals, mode, &medium)?;
        println!("L_asc ({mode:?}): {:.3e}", l1_mean(&r));
    }
    Ok(())
}
