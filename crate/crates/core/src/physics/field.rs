//! Analytic complex fields with closed-form derivatives.

use num_complex::Complex64;

use crate::geometry::Point2;

use super::{Medium, PhysicsError, WaveSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Value, gradient and diagonal second derivatives at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldSample {
    pub value: Complex64,
    pub dx: Complex64,
    pub dy: Complex64,
    pub dxx: Complex64,
    pub dyy: Complex64,
}

impl FieldSample {
    pub fn add(&self, o: &FieldSample) -> FieldSample {
        FieldSample {
            value: self.value + o.value,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dyy: self.dyy + o.dyy,
        }
    }

    pub fn scale(&self, s: Complex64) -> FieldSample {
        FieldSample {
            value: s * self.value,
            dx: s * self.dx,
            dy: s * self.dy,
            dxx: s * self.dxx,
            dyy: s * self.dyy,
        }
    }

    pub fn laplacian(&self) -> Complex64 {
        self.dxx + self.dyy
    }
}

/// A field known in closed form.
pub trait AnalyticField {
    fn sample(&self, p: Point2) -> FieldSample;
}

/// `A exp(-i k (x . d))` with unit `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWave {
    pub amplitude: Complex64,
    pub k: f64,
    pub direction: [f64; 2],
}

impl PlaneWave {
    pub fn new(amplitude: Complex64, k: f64, direction: [f64; 2]) -> Result<Self, PhysicsError> {
        let n = direction[0].hypot(direction[1]);
        if (n - 1.0).abs() > 1e-12 {
            return Err(PhysicsError::NotUnit(n));
        }
        Ok(Self {
            amplitude,
            k,
            direction,
        })
    }
}

impl AnalyticField for PlaneWave {
    fn sample(&self, p: Point2) -> FieldSample {
        let [dx, dy] = self.direction;
        let v = self.amplitude * Complex64::from_polar(1.0, -self.k * p.dot(self.direction));
        let k2 = self.k * self.k;
        FieldSample {
            value: v,
            dx: -I * self.k * dx * v,
            dy: -I * self.k * dy * v,
            dxx: -k2 * dx * dx * v,
            dyy: -k2 * dy * dy * v,
        }
    }
}

/// Sum of plane waves.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Superposition(pub Vec<PlaneWave>);

impl AnalyticField for Superposition {
    fn sample(&self, p: Point2) -> FieldSample {
        self.0
            .iter()
            .fold(FieldSample::default(), |acc, w| acc.add(&w.sample(p)))
    }
}

/// Per-point samples of a field, struct-of-arrays.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexField {
    pub value: Vec<Complex64>,
    pub dx: Vec<Complex64>,
    pub dy: Vec<Complex64>,
    pub dxx: Vec<Complex64>,
    pub dyy: Vec<Complex64>,
}

impl ComplexField {
    pub fn from_samples(samples: &[FieldSample]) -> Self {
        Self {
            value: samples.iter().map(|s| s.value).collect(),
            dx: samples.iter().map(|s| s.dx).collect(),
            dy: samples.iter().map(|s| s.dy).collect(),
            dxx: samples.iter().map(|s| s.dxx).collect(),
            dyy: samples.iter().map(|s| s.dyy).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_samples(&vec![FieldSample::default(); n])
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn get(&self, i: usize) -> FieldSample {
        FieldSample {
            value: self.value[i],
            dx: self.dx[i],
            dy: self.dy[i],
            dxx: self.dxx[i],
            dyy: self.dyy[i],
        }
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField, PhysicsError> {
        if self.len() != other.len() {
            return Err(PhysicsError::LengthMismatch {
                what: "field",
                expected: self.len(),
                got: other.len(),
            });
        }
        let s: Vec<FieldSample> = (0..self.len()).map(|i| self.get(i).add(&other.get(i))).collect();
        Ok(Self::from_samples(&s))
    }

    pub fn scale(&self, s: Complex64) -> ComplexField {
        let v: Vec<FieldSample> = (0..self.len()).map(|i| self.get(i).scale(s)).collect();
        Self::from_samples(&v)
    }
}

pub fn sample_field(field: &dyn AnalyticField, points: &[Point2]) -> ComplexField {
    let samples: Vec<FieldSample> = points.iter().map(|&p| field.sample(p)).collect();
    ComplexField::from_samples(&samples)
}

/// Incident wave `p0 exp(-i k (x . e_k))` with its derivatives.
pub fn background_pressure(x: Point2, wave: &WaveSpec, k: f64) -> FieldSample {
    PlaneWave {
        amplitude: Complex64::new(wave.p0, 0.0),
        k,
        direction: wave.ek,
    }
    .sample(x)
}

/// Plane-wave scattered field; satisfies the Helmholtz equation exactly.
pub fn manufactured_solution(
    k: f64,
    amplitude: Complex64,
    direction: [f64; 2],
) -> Result<PlaneWave, PhysicsError> {
    PlaneWave::new(amplitude, k, direction)
}

/// Normal displacement `n . u` (m) at coupling points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DisplacementField {
    pub normal: Vec<Complex64>,
}

/// `n . u = (n . grad p_t) / (rho omega^2)` from a total-pressure field.
pub fn derived_displacement(
    total: &ComplexField,
    medium: &Medium,
    omega: f64,
    normals: &[[f64; 2]],
) -> Result<DisplacementField, PhysicsError> {
    if omega == 0.0 {
        return Err(PhysicsError::ZeroOmega);
    }
    if normals.len() != total.len() {
        return Err(PhysicsError::LengthMismatch {
            what: "normals",
            expected: total.len(),
            got: normals.len(),
        });
    }
    let denom = medium.rho * omega * omega;
    Ok(DisplacementField {
        normal: normals
            .iter()
            .enumerate()
            .map(|(i, n)| (n[0] * total.dx[i] + n[1] * total.dy[i]) / denom)
            .collect(),
    })
}
