//! JSON description of one parametric condition.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{CouplingMode, Medium, ParametricCondition, PhysicsError, WaveSpec, WavenumberMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionManifest {
    pub f_hz: f64,
    pub densities: Vec<f64>,
    pub moduli: Vec<f64>,
    pub medium: Medium,
    pub wave: WaveSpec,
    #[serde(default)]
    pub wavenumber_mode: WavenumberMode,
    #[serde(default)]
    pub coupling_mode: CouplingMode,
}

impl ConditionManifest {
    pub fn new(
        condition: &ParametricCondition,
        medium: Medium,
        wave: WaveSpec,
        wavenumber_mode: WavenumberMode,
        coupling_mode: CouplingMode,
    ) -> Self {
        Self {
            f_hz: condition.f_hz,
            densities: condition.densities.clone(),
            moduli: condition.moduli.clone(),
            medium,
            wave,
            wavenumber_mode,
            coupling_mode,
        }
    }

    pub fn condition(&self) -> ParametricCondition {
        ParametricCondition {
            f_hz: self.f_hz,
            densities: self.densities.clone(),
            moduli: self.moduli.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        self.condition().validate()?;
        self.wave.validate()?;
        if !(self.medium.rho > 0.0 && self.medium.c > 0.0) {
            return Err(PhysicsError::Invalid("medium must have positive rho and c".into()));
        }
        Ok(())
    }
}

pub fn write_manifest<W: Write>(writer: W, manifest: &ConditionManifest) -> Result<(), PhysicsError> {
    serde_json::to_writer_pretty(writer, manifest)?;
    Ok(())
}

/// Parses and validates a manifest.
pub fn read_manifest<R: Read>(reader: R) -> Result<ConditionManifest, PhysicsError> {
    let m: ConditionManifest = serde_json::from_reader(reader)?;
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = ParametricCondition::uniform(412.5, 1200.0, 3.1e6);
        c.densities[3] = 700.0;
        // needs exact decimal parsing, not the fast default
        c.densities[7] = 1778.5201413554867;
        c.moduli[2] = 9209417.090017507;
        let m = ConditionManifest::new(
            &c,
            Medium::default(),
            WaveSpec::default(),
            WavenumberMode::PaperLiteral,
            CouplingMode::ContinuumConsistent,
        );
        let mut buf = Vec::new();
        write_manifest(&mut buf, &m).unwrap();
        let back = read_manifest(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.condition(), c);
    }

    #[test]
    fn rejects_bad_direction() {
        let mut m = ConditionManifest::new(
            &ParametricCondition::uniform(300.0, 1000.0, 1e6),
            Medium::default(),
            WaveSpec::default(),
            WavenumberMode::Standard,
            CouplingMode::Literal,
        );
        m.wave.ek = [1.0, 1.0];
        let mut buf = Vec::new();
        write_manifest(&mut buf, &m).unwrap();
        assert!(matches!(read_manifest(buf.as_slice()), Err(PhysicsError::NotUnit(_))));
    }
}
