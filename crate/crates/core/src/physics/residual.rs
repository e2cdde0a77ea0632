//! Closed-form residuals over sampled fields, and the loss combination.
//!
//! Every L1 loss is the mean over points of `|Re r| + |Im r|`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{ObservationSet, PerDomain};

use super::field::{ComplexField, DisplacementField};
use super::{CouplingMode, Medium, PhysicsError};

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), PhysicsError> {
    if expected != got {
        return Err(PhysicsError::LengthMismatch { what, expected, got });
    }
    Ok(())
}

/// `(lap p_s + lap p_b) + k^2 (p_s + p_b)` per interior point.
pub fn residual_pad(
    ps: &ComplexField,
    pb: &ComplexField,
    k: f64,
) -> Result<Vec<Complex64>, PhysicsError> {
    check_len("background field", ps.len(), pb.len())?;
    let k2 = k * k;
    Ok((0..ps.len())
        .map(|i| {
            (ps.dxx[i] + ps.dyy[i]) + (pb.dxx[i] + pb.dyy[i]) + k2 * (ps.value[i] + pb.value[i])
        })
        .collect())
}

/// Radiation residuals `(real part, imaginary part)` per boundary point.
///
/// Real part: `-n . (grad p_s + grad p_b)`. Imaginary part:
/// `k p_s + (1/2k) (t . grad)^2 p_s` with the tangent `t` axis-aligned, so
/// the tangential operator is `tx^2 p_xx + ty^2 p_yy`.
pub fn residual_pwr(
    ps: &ComplexField,
    pb: &ComplexField,
    k: f64,
    normals: &[[f64; 2]],
    tangents: &[[f64; 2]],
) -> Result<(Vec<Complex64>, Vec<Complex64>), PhysicsError> {
    if k == 0.0 {
        return Err(PhysicsError::ZeroWavenumber);
    }
    check_len("background field", ps.len(), pb.len())?;
    check_len("normals", ps.len(), normals.len())?;
    check_len("tangents", ps.len(), tangents.len())?;
    let mut re = Vec::with_capacity(ps.len());
    let mut im = Vec::with_capacity(ps.len());
    for i in 0..ps.len() {
        let [nx, ny] = normals[i];
        let [tx, ty] = tangents[i];
        re.push(-(nx * (ps.dx[i] + pb.dx[i]) + ny * (ps.dy[i] + pb.dy[i])));
        let tangential = tx * tx * ps.dxx[i] + ty * ty * ps.dyy[i];
        im.push(k * ps.value[i] + tangential / (2.0 * k));
    }
    Ok((re, im))
}

/// Coupling residual per boundary point.
///
/// Literal mode: `nx (p_xx) + ny (p_yy)` of the total field minus
/// `omega^2 (n . u)`. Continuum-consistent mode: `(n . grad p_t) / rho` minus
/// the same structural term.
pub fn residual_asc(
    ps: &ComplexField,
    pb: &ComplexField,
    displacement: Option<&DisplacementField>,
    omega: f64,
    normals: &[[f64; 2]],
    mode: CouplingMode,
    medium: &Medium,
) -> Result<Vec<Complex64>, PhysicsError> {
    let u = displacement.ok_or(PhysicsError::Missing("boundary displacement"))?;
    check_len("background field", ps.len(), pb.len())?;
    check_len("normals", ps.len(), normals.len())?;
    check_len("displacement", ps.len(), u.normal.len())?;
    let w2 = omega * omega;
    Ok((0..ps.len())
        .map(|i| {
            let [nx, ny] = normals[i];
            let fluid = match mode {
                CouplingMode::Literal => nx * (ps.dxx[i] + pb.dxx[i]) + ny * (ps.dyy[i] + pb.dyy[i]),
                CouplingMode::ContinuumConsistent => {
                    (nx * (ps.dx[i] + pb.dx[i]) + ny * (ps.dy[i] + pb.dy[i])) / medium.rho
                }
            };
            fluid - w2 * u.normal[i]
        })
        .collect())
}

/// Mean of `|Re| + |Im|`; zero for an empty set.
pub fn l1_mean(r: &[Complex64]) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    r.iter().map(|z| z.re.abs() + z.im.abs()).sum::<f64>() / r.len() as f64
}

/// Observation loss with a flag for an empty observation set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationLoss {
    pub value: f64,
    pub empty: bool,
}

/// Mean squared complex magnitude of the prediction error.
pub fn loss_obs(
    pred: &PerDomain<Vec<Complex64>>,
    obs: &ObservationSet,
) -> Result<ObservationLoss, PhysicsError> {
    if obs.is_empty() {
        log::warn!("observation set is empty; observation loss is zero");
        return Ok(ObservationLoss {
            value: 0.0,
            empty: true,
        });
    }
    let mut sum = 0.0;
    for o in &obs.entries {
        let p = pred[o.domain].get(o.index).ok_or(PhysicsError::LengthMismatch {
            what: "observation index",
            expected: pred[o.domain].len(),
            got: o.index,
        })?;
        sum += (p - o.value).norm_sqr();
    }
    Ok(ObservationLoss {
        value: sum / obs.len() as f64,
        empty: false,
    })
}

/// `alpha` scales the observation loss, `beta` the sum of PDE terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub pad: f64,
    pub pwr_r: f64,
    pub pwr_i: f64,
    pub asc: f64,
    pub obs: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn pde_sum(&self) -> f64 {
        self.pad + self.pwr_r + self.pwr_i + self.asc
    }

    /// Componentwise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        if items.is_empty() {
            return LossBreakdown::default();
        }
        let n = items.len() as f64;
        let s = |f: fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / n;
        LossBreakdown {
            pad: s(|b| b.pad),
            pwr_r: s(|b| b.pwr_r),
            pwr_i: s(|b| b.pwr_i),
            asc: s(|b| b.asc),
            obs: s(|b| b.obs),
            total: s(|b| b.total),
        }
    }
}

/// `alpha * L_obs + beta * (L_pad + L_pwr_r + L_pwr_i + L_asc)`.
pub fn total_loss(b: &LossBreakdown, w: &LossWeights) -> f64 {
    w.alpha * b.obs + w.beta * b.pde_sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainTag, Observation, Point2};
    use crate::physics::field::{sample_field, AnalyticField, PlaneWave, Superposition};
    use crate::physics::{background_pressure, derived_displacement, WaveSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid() -> Vec<Point2> {
        (0..25)
            .map(|i| Point2::new(-2.0 + 0.37 * (i % 5) as f64, 1.0 - 0.61 * (i / 5) as f64))
            .collect()
    }

    fn background(points: &[Point2], wave: &WaveSpec, k: f64) -> ComplexField {
        let s: Vec<_> = points.iter().map(|&p| background_pressure(p, wave, k)).collect();
        ComplexField::from_samples(&s)
    }

    #[test]
    fn manufactured_field_has_zero_interior_residual() {
        let pts = grid();
        let k = 4.2;
        let pb = background(&pts, &WaveSpec::default(), k);
        let ps = sample_field(&PlaneWave::new(c(0.3, 0.9), k, [0.6, 0.8]).unwrap(), &pts);
        assert!(l1_mean(&residual_pad(&ps, &pb, k).unwrap()) <= 1e-10);
        let sup = Superposition(vec![
            PlaneWave::new(c(1.0, 0.0), k, [1.0, 0.0]).unwrap(),
            PlaneWave::new(c(0.0, -2.0), k, [0.0, -1.0]).unwrap(),
        ]);
        let ps = sample_field(&sup, &pts);
        assert!(l1_mean(&residual_pad(&ps, &pb, k).unwrap()) <= 1e-10);
    }

    #[test]
    fn zero_and_constant_scattered_fields() {
        let pts = grid();
        let k = 2.0;
        let pb = background(&pts, &WaveSpec::default(), k);
        let zero = ComplexField::zeros(pts.len());
        assert!(l1_mean(&residual_pad(&zero, &pb, k).unwrap()) <= 1e-12);
        let mut constant = ComplexField::zeros(pts.len());
        constant.value = vec![c(0.5, -0.25); pts.len()];
        let r = residual_pad(&constant, &pb, k).unwrap();
        for z in r {
            assert!((z - c(2.0, -1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn radiation_examples() {
        let pts = vec![Point2::new(1.0, 0.2), Point2::new(1.0, 0.7)];
        let normals = vec![[1.0, 0.0]; 2];
        let tangents = vec![[0.0, 1.0]; 2];
        let k = 3.0;
        // incident wave travelling along the face: n . grad p_b = 0
        let pb = background(&pts, &WaveSpec { p0: 1.0, ek: [0.0, 1.0] }, k);
        let zero = ComplexField::zeros(2);
        let (re, im) = residual_pwr(&zero, &pb, k, &normals, &tangents).unwrap();
        assert!(l1_mean(&re) < 1e-15);
        assert_eq!(l1_mean(&im), 0.0);

        // outgoing plane wave along +n, no background: by substitution
        // -n . grad p_s = i k p_s and the tangential term vanishes.
        let a = c(0.4, -0.3);
        let ps = sample_field(&PlaneWave::new(a, k, [1.0, 0.0]).unwrap(), &pts);
        let (re, im) = residual_pwr(&ps, &ComplexField::zeros(2), k, &normals, &tangents).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let v = a * Complex64::from_polar(1.0, -k * p.x);
            assert!((re[i] - c(0.0, k) * v).norm() < 1e-14);
            assert!((im[i] - k * v).norm() < 1e-14);
        }
        assert!(matches!(
            residual_pwr(&ps, &pb, 0.0, &normals, &tangents),
            Err(PhysicsError::ZeroWavenumber)
        ));
    }

    #[test]
    fn degenerate_fields_tie_on_radiation_but_not_with_observations() {
        // Right face with the incident wave leaving through it.
        let pts: Vec<Point2> = (0..6).map(|i| Point2::new(2.0, 0.3 * i as f64)).collect();
        let normals = vec![[1.0, 0.0]; pts.len()];
        let tangents = vec![[0.0, 1.0]; pts.len()];
        let k = 1.9;
        let pb = background(&pts, &WaveSpec { p0: 1.0, ek: [1.0, 0.0] }, k);
        let pwr = |ps: &ComplexField| {
            let (re, im) = residual_pwr(ps, &pb, k, &normals, &tangents).unwrap();
            l1_mean(&re) + l1_mean(&im)
        };
        let zero = ComplexField::zeros(pts.len());
        let minus_pb = pb.scale(c(-1.0, 0.0));
        assert!((pwr(&zero) - pwr(&minus_pb)).abs() < 1e-12);

        let truth = PlaneWave::new(c(0.5, 0.5), k, [0.0, 1.0]).unwrap();
        let obs = ObservationSet {
            entries: vec![Observation {
                domain: DomainTag::PlaneWaveRadiation,
                index: 2,
                value: truth.sample(pts[2]).value,
            }],
        };
        for field in [&zero, &minus_pb] {
            let pred = PerDomain::new(vec![], field.value.clone(), vec![]);
            assert!(loss_obs(&pred, &obs).unwrap().value > 0.1);
        }
    }

    #[test]
    fn coupling_oracle_and_scaling() {
        let pts = vec![Point2::new(-1.0, 0.08), Point2::new(0.5, 0.08), Point2::new(5.0, -1.0)];
        let normals = vec![[0.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let medium = Medium::default();
        let k = 1.3;
        let omega = 2.0 * std::f64::consts::PI * 300.0;
        let pb = background(&pts, &WaveSpec::default(), k);
        let ps = sample_field(&PlaneWave::new(c(0.2, 0.1), k, [0.6, 0.8]).unwrap(), &pts);
        let total = ps.add(&pb).unwrap();
        let u = derived_displacement(&total, &medium, omega, &normals).unwrap();
        let r = residual_asc(&ps, &pb, Some(&u), omega, &normals, CouplingMode::ContinuumConsistent, &medium)
            .unwrap();
        assert!(l1_mean(&r) <= 1e-10);
        assert!(matches!(
            residual_asc(&ps, &pb, None, omega, &normals, CouplingMode::Literal, &medium),
            Err(PhysicsError::Missing(_))
        ));

        // structural term alone: doubling omega quadruples it
        let zero = ComplexField::zeros(3);
        let r1 = residual_asc(&zero, &zero, Some(&u), omega, &normals, CouplingMode::Literal, &medium).unwrap();
        let r2 = residual_asc(&zero, &zero, Some(&u), 2.0 * omega, &normals, CouplingMode::Literal, &medium)
            .unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            assert!((4.0 * a - b).norm() <= 1e-12 * b.norm());
        }
        let none = DisplacementField { normal: vec![c(0.0, 0.0); 3] };
        let r = residual_asc(&zero, &zero, Some(&none), omega, &normals, CouplingMode::Literal, &medium).unwrap();
        assert_eq!(l1_mean(&r), 0.0);
    }

    #[test]
    fn observation_loss_examples() {
        let truth = vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 2.0)];
        let obs = ObservationSet {
            entries: (0..3)
                .map(|i| Observation {
                    domain: DomainTag::PressureAcoustic,
                    index: i,
                    value: truth[i],
                })
                .collect(),
        };
        let exact = PerDomain::new(truth.clone(), vec![], vec![]);
        assert_eq!(loss_obs(&exact, &obs).unwrap().value, 0.0);
        let shifted = PerDomain::new(truth.iter().map(|z| z + 0.1).collect(), vec![], vec![]);
        assert!((loss_obs(&shifted, &obs).unwrap().value - 0.01).abs() < 1e-12);
        let single = ObservationSet { entries: vec![obs.entries[0]] };
        let off = PerDomain::new(vec![c(3.0, 0.0)], vec![], vec![]);
        assert_eq!(loss_obs(&off, &single).unwrap().value, 4.0);
        let empty = loss_obs(&off, &ObservationSet::default()).unwrap();
        assert!(empty.empty && empty.value == 0.0);
    }

    #[test]
    fn total_loss_examples() {
        let w = LossWeights::default();
        let b = LossBreakdown { obs: 0.5, ..Default::default() };
        assert_eq!(total_loss(&b, &w), 0.5);
        let b = LossBreakdown { pad: 0.25, pwr_r: 0.25, pwr_i: 0.25, asc: 0.25, ..Default::default() };
        assert!((total_loss(&b, &w) - 0.1).abs() < 1e-15);
        assert_eq!(total_loss(&b, &LossWeights { alpha: 0.0, beta: 0.0 }), 0.0);
    }
}
