//! Background wave, per-domain PDE residuals and the loss combination.
//!
//! Complex pressures are carried as two real channels `(Re, Im)`. Residuals
//! are available in closed form over analytic fields (for oracles and
//! manufactured truth) and on the tape over network predictions (for
//! training).

mod field;
mod manifest;
mod residual;
mod tape_loss;

pub use field::{
    background_pressure, derived_displacement, manufactured_solution, sample_field, AnalyticField,
    ComplexField, DisplacementField, FieldSample, PlaneWave, Superposition,
};
pub use manifest::{read_manifest, write_manifest, ConditionManifest};
pub use residual::{
    l1_mean, loss_obs, residual_asc, residual_pad, residual_pwr, total_loss, LossBreakdown,
    LossWeights, ObservationLoss,
};
pub use tape_loss::{condition_losses, ConditionProblem, TapeLosses};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::network::NetworkError;

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("wavenumber is zero; the radiation condition divides by k")]
    ZeroWavenumber,
    #[error("angular frequency is zero; displacement is undefined")]
    ZeroOmega,
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("{what}: expected {expected} values, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("direction must have unit length, got |e| = {0}")]
    NotUnit(f64),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Water at 20 degrees C by default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    /// Fluid density (kg/m^3).
    pub rho: f64,
    /// Sound speed (m/s).
    pub c: f64,
}

impl Default for Medium {
    fn default() -> Self {
        Self {
            rho: 1000.0,
            c: 1481.0,
        }
    }
}

/// Incident plane wave.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    /// Excitation amplitude (Pa).
    pub p0: f64,
    /// Unit propagation direction.
    pub ek: [f64; 2],
}

impl Default for WaveSpec {
    fn default() -> Self {
        Self {
            p0: 1.0,
            ek: [0.0, -1.0],
        }
    }
}

impl WaveSpec {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let n = self.ek[0].hypot(self.ek[1]);
        if (n - 1.0).abs() > 1e-12 {
            return Err(PhysicsError::NotUnit(n));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavenumberMode {
    /// `2 pi f / c`.
    #[default]
    Standard,
    /// `(2 pi f)^2 / c`, as printed with the incident wave definition.
    PaperLiteral,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// `n . (p_xx, p_yy)` of the total field minus `omega^2 (n . u)`.
    #[default]
    Literal,
    /// `(n . grad p_t) / rho - omega^2 (n . u)`.
    ContinuumConsistent,
}

pub fn wavenumber(f_hz: f64, medium: &Medium, mode: WavenumberMode) -> f64 {
    let omega = 2.0 * std::f64::consts::PI * f_hz;
    match mode {
        WavenumberMode::Standard => omega / medium.c,
        WavenumberMode::PaperLiteral => omega * omega / medium.c,
    }
}

pub fn angular_frequency(f_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_hz
}

/// Frequency plus the 25 subunit densities and 25 moduli.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricCondition {
    pub f_hz: f64,
    /// Subunit densities (kg/m^3), left to right.
    pub densities: Vec<f64>,
    /// Subunit Young's moduli (Pa), left to right.
    pub moduli: Vec<f64>,
}

/// Water density and modulus used to scale metasurface parameters.
pub const WATER_DENSITY: f64 = 1000.0;
pub const WATER_MODULUS: f64 = 2.25e6;
pub const SUBUNITS: usize = 25;

impl ParametricCondition {
    pub fn uniform(f_hz: f64, density: f64, modulus: f64) -> Self {
        Self {
            f_hz,
            densities: vec![density; SUBUNITS],
            moduli: vec![modulus; SUBUNITS],
        }
    }

    /// Densities then moduli, the order of the implicit code.
    pub fn implicit_raw(&self) -> Vec<f64> {
        self.densities.iter().chain(&self.moduli).copied().collect()
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.f_hz > 0.0 && self.f_hz.is_finite()) {
            return Err(PhysicsError::Invalid(format!("frequency {} Hz", self.f_hz)));
        }
        for (what, v) in [("densities", &self.densities), ("moduli", &self.moduli)] {
            if v.len() != SUBUNITS {
                return Err(PhysicsError::LengthMismatch {
                    what,
                    expected: SUBUNITS,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(PhysicsError::Invalid(format!("non-positive {what}")));
            }
        }
        Ok(())
    }
}

/// Everything that fixes the governing equations of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub medium: Medium,
    pub wave: WaveSpec,
    pub wavenumber_mode: WavenumberMode,
    pub coupling_mode: CouplingMode,
    pub weights: LossWeights,
    /// Which PDE terms enter the physics part of the loss.
    pub terms: TermMask,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            medium: Medium::default(),
            wave: WaveSpec::default(),
            wavenumber_mode: WavenumberMode::Standard,
            coupling_mode: CouplingMode::Literal,
            weights: LossWeights::default(),
            terms: TermMask::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermMask {
    pub pad: bool,
    pub pwr_r: bool,
    pub pwr_i: bool,
    pub asc: bool,
}

impl Default for TermMask {
    fn default() -> Self {
        Self {
            pad: true,
            pwr_r: true,
            pwr_i: true,
            asc: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wavenumber_examples() {
        let m = Medium::default();
        let k = wavenumber(m.c / (2.0 * PI), &m, WavenumberMode::Standard);
        assert!((k - 1.0).abs() < 1e-15);
        let unit = Medium { rho: 1.0, c: 1.0 };
        let k = wavenumber(1.0, &unit, WavenumberMode::PaperLiteral);
        assert!((k - 4.0 * PI * PI).abs() < 1e-12);
        assert!((k - 39.478).abs() < 1e-3);
        let k = wavenumber(300.0, &m, WavenumberMode::Standard);
        assert!((k - 600.0 * PI / 1481.0).abs() < 1e-15);
        assert!((k - 1.2727).abs() < 1e-4);
    }

    #[test]
    fn condition_validation() {
        let c = ParametricCondition::uniform(300.0, 1000.0, 2.25e6);
        c.validate().unwrap();
        assert_eq!(c.implicit_raw().len(), 50);
        let mut bad = c.clone();
        bad.densities.pop();
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.f_hz = 0.0;
        assert!(bad.validate().is_err());
    }
}
