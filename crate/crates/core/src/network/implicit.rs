//! Z-score encoding of the implicit quantities.

use serde::{Deserialize, Serialize};

use super::NetworkError;

/// Number of implicit quantities: 25 subunit densities then 25 moduli.
pub const IMPLICIT_WIDTH: usize = 50;

/// Standardized implicit quantities, densities first.
#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitCode(Vec<f64>);

impl ImplicitCode {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-quantity mean and standard deviation, frozen after the training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicitStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ImplicitStats {
    /// Population statistics over the raw vectors of a training set.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self, NetworkError> {
        let width = samples.first().map_or(0, Vec::len);
        if width == 0 {
            return Err(NetworkError::EmptyTrainingSet);
        }
        if let Some(bad) = samples.iter().find(|s| s.len() != width) {
            return Err(NetworkError::LengthMismatch {
                what: "implicit sample",
                expected: width,
                got: bad.len(),
            });
        }
        let n = samples.len() as f64;
        let mut mean = vec![0.0; width];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for s in samples {
            for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.into_iter().map(|v| (v / n).sqrt()).collect();
        if let Some(index) = std.iter().position(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(NetworkError::DegenerateStats { index });
        }
        Ok(Self { mean, std })
    }

    /// Statistics of uniform distributions over the given intervals.
    ///
    /// Used when a run holds a single condition, where sample statistics
    /// would have zero spread.
    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self, NetworkError> {
        let mut mean = Vec::with_capacity(intervals.len());
        let mut std = Vec::with_capacity(intervals.len());
        for (index, &(lo, hi)) in intervals.iter().enumerate() {
            if !(hi > lo) {
                return Err(NetworkError::DegenerateStats { index });
            }
            mean.push(0.5 * (lo + hi));
            std.push((hi - lo) / 12f64.sqrt());
        }
        Ok(Self { mean, std })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }
}

/// `(q - mean) / std` elementwise. No clamping outside the training range.
pub fn encode_implicit(raw: &[f64], stats: &ImplicitStats) -> Result<ImplicitCode, NetworkError> {
    if raw.len() != stats.width() {
        return Err(NetworkError::LengthMismatch {
            what: "implicit quantities",
            expected: stats.width(),
            got: raw.len(),
        });
    }
    if let Some(index) = stats.std.iter().position(|&s| s <= 0.0) {
        return Err(NetworkError::DegenerateStats { index });
    }
    let code: Vec<f64> = raw
        .iter()
        .zip(stats.mean.iter().zip(&stats.std))
        .map(|(q, (m, s))| (q - m) / s)
        .collect();
    if code.iter().any(|v| !v.is_finite()) {
        return Err(NetworkError::NonFiniteInput("implicit quantities"));
    }
    Ok(ImplicitCode(code))
}
