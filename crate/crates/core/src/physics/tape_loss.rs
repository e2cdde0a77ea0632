//! Residual losses recorded on the tape over network predictions.
//!
//! Spatial derivatives of the predictions come from two second-order
//! forward sweeps (one per axis) seeded at the stacked input; the resulting
//! residuals stay on the tape, so a single reverse sweep from the total loss
//! yields parameter gradients.

use num_complex::Complex64;

use crate::autodiff::{Jet, Tape, Tensor, Var};
use crate::geometry::{DomainTag, ObservationSet, PerDomain, PointCloudSet};
use crate::network::{encode_implicit, forward, Forward, ImplicitCode, ModelParams, StackedPointCloud};

use super::field::{background_pressure, ComplexField, DisplacementField};
use super::residual::LossBreakdown;
use super::{angular_frequency, wavenumber, CouplingMode, ParametricCondition, PhysicsConfig, PhysicsError};

type Result<T> = std::result::Result<T, PhysicsError>;

/// Inputs of one parametric condition, precomputed once per dataset.
#[derive(Clone, Debug)]
pub struct ConditionProblem {
    pub f_hz: f64,
    pub k: f64,
    pub omega: f64,
    pub stacked: Tensor,
    pub counts: PerDomain<usize>,
    pub code: ImplicitCode,
    pub background: PerDomain<ComplexField>,
    pub normals: PerDomain<Vec<[f64; 2]>>,
    pub tangents: PerDomain<Vec<[f64; 2]>>,
    /// Normal displacement at coupling points, if known.
    pub displacement: Option<DisplacementField>,
    pub observations: ObservationSet,
}

impl ConditionProblem {
    pub fn new(
        cloud: &PointCloudSet,
        condition: &ParametricCondition,
        params: &ModelParams,
        cfg: &PhysicsConfig,
        observations: ObservationSet,
        displacement: Option<DisplacementField>,
    ) -> Result<Self> {
        condition.validate()?;
        cfg.wave.validate()?;
        let k = wavenumber(condition.f_hz, &cfg.medium, cfg.wavenumber_mode);
        let (stacked, counts) = StackedPointCloud::from_cloud(cloud, condition.f_hz);
        let code = encode_implicit(&condition.implicit_raw(), &params.implicit)?;
        let background = PerDomain(DomainTag::ALL.map(|tag| {
            let samples: Vec<_> = cloud
                .points(tag)
                .iter()
                .map(|&p| background_pressure(p, &cfg.wave, k))
                .collect();
            ComplexField::from_samples(&samples)
        }));
        let normals = PerDomain(DomainTag::ALL.map(|t| cloud.boundary(t).iter().map(|b| b.normal).collect()));
        let tangents = PerDomain(DomainTag::ALL.map(|t| cloud.boundary(t).iter().map(|b| b.tangent).collect()));
        if let Some(u) = &displacement {
            let n = counts[DomainTag::AcousticStructureCoupling];
            if u.normal.len() != n {
                return Err(PhysicsError::LengthMismatch {
                    what: "displacement",
                    expected: n,
                    got: u.normal.len(),
                });
            }
        }
        for o in &observations.entries {
            if o.index >= counts[o.domain] {
                return Err(PhysicsError::LengthMismatch {
                    what: "observation index",
                    expected: counts[o.domain],
                    got: o.index,
                });
            }
        }
        Ok(Self {
            f_hz: condition.f_hz,
            k,
            omega: angular_frequency(condition.f_hz),
            stacked: stacked.to_tensor()?,
            counts,
            code,
            background,
            normals,
            tangents,
            displacement,
            observations,
        })
    }
}

/// Loss nodes of one condition; absent terms are `None`.
pub struct TapeLosses<'t> {
    pub pad: Option<Var<'t>>,
    pub pwr_r: Option<Var<'t>>,
    pub pwr_i: Option<Var<'t>>,
    pub asc: Option<Var<'t>>,
    pub obs: Option<Var<'t>>,
    pub total: Var<'t>,
    pub breakdown: LossBreakdown,
    /// Set when no observation points exist.
    pub obs_empty: bool,
}

fn complex_tensor(z: &[Complex64]) -> Tensor {
    Tensor::from_fn(z.len(), 2, |i, j| if j == 0 { z[i].re } else { z[i].im })
}

/// Per-point real coefficient duplicated over both channels.
fn coef(values: impl Iterator<Item = f64>) -> Tensor {
    let v: Vec<f64> = values.collect();
    Tensor::from_fn(v.len(), 2, |i, _| v[i])
}

/// `sum_j c_j * x_j + constant`, skipping zero derivatives.
fn linear<'t>(tape: &'t Tape, terms: &[(Option<Var<'t>>, Tensor)], constant: Tensor) -> Result<Var<'t>> {
    let mut acc = tape.constant(constant);
    for (x, c) in terms {
        if let Some(x) = x {
            acc = acc.add(x.mul(tape.constant(c.clone()))?)?;
        }
    }
    Ok(acc)
}

fn l1<'t>(r: Var<'t>) -> Result<Var<'t>> {
    let n = r.shape()[0] as f64;
    Ok(r.abs()?.sum()?.scale(1.0 / n)?)
}

struct Derivs<'t> {
    value: Var<'t>,
    dx: Option<Var<'t>>,
    dy: Option<Var<'t>>,
    dxx: Option<Var<'t>>,
    dyy: Option<Var<'t>>,
}

/// Forward pass plus every loss term of one condition.
pub fn condition_losses<'t>(
    tape: &'t Tape,
    params: &ModelParams,
    problem: &ConditionProblem,
    cfg: &PhysicsConfig,
) -> Result<(Forward<'t>, TapeLosses<'t>)> {
    let fwd = forward(tape, params, &problem.stacked, &problem.counts, &problem.code)?;
    // Two channels (Re, Im); a real-only head gets a zero imaginary part.
    let mut preds: PerDomain<Option<Var<'t>>> = PerDomain::new(None, None, None);
    for tag in DomainTag::ALL {
        if let Some(p) = fwd.predictions[tag] {
            let shape = p.shape();
            preds[tag] = Some(if shape[1] == 2 {
                p
            } else {
                Var::concat_cols(&[p, tape.constant(Tensor::zeros(shape[0], 1))])?
            });
        }
    }

    let w = cfg.weights;
    let mask = cfg.terms;
    let wants = |tag: DomainTag| match tag {
        DomainTag::PressureAcoustic => mask.pad,
        DomainTag::PlaneWaveRadiation => mask.pwr_r || mask.pwr_i,
        DomainTag::AcousticStructureCoupling => mask.asc,
    };
    let pde_tags: Vec<DomainTag> = DomainTag::ALL
        .into_iter()
        .filter(|&t| preds[t].is_some() && wants(t))
        .collect();
    let need_pde = w.beta != 0.0 && !pde_tags.is_empty();

    let mut derivs: PerDomain<Option<Derivs<'t>>> = PerDomain::new(None, None, None);
    if need_pde {
        let outputs: Vec<Var<'t>> = pde_tags.iter().map(|&t| preds[t].expect("filtered")).collect();
        let n = problem.stacked.rows();
        let sweep = |axis: usize| -> Result<Vec<Jet<'t>>> {
            let tangent = Tensor::from_fn(n, 3, |_, j| if j == axis { 1.0 } else { 0.0 });
            Ok(tape.push_forward(fwd.stacked, tangent, &outputs)?)
        };
        let jx = sweep(0)?;
        let jy = sweep(1)?;
        for (i, &tag) in pde_tags.iter().enumerate() {
            derivs[tag] = Some(Derivs {
                value: outputs[i],
                dx: jx[i].first,
                dy: jy[i].first,
                dxx: jx[i].second,
                dyy: jy[i].second,
            });
        }
    }

    let mut pad = None;
    let mut pwr_r = None;
    let mut pwr_i = None;
    let mut asc = None;
    let k = problem.k;

    if let Some(d) = &derivs[DomainTag::PressureAcoustic] {
        let pb = &problem.background[DomainTag::PressureAcoustic];
        let n = pb.len();
        let k2 = k * k;
        let constant: Vec<Complex64> = (0..n)
            .map(|i| pb.dxx[i] + pb.dyy[i] + k2 * pb.value[i])
            .collect();
        let r = linear(
            tape,
            &[
                (d.dxx, coef((0..n).map(|_| 1.0))),
                (d.dyy, coef((0..n).map(|_| 1.0))),
                (Some(d.value), coef((0..n).map(|_| k2))),
            ],
            complex_tensor(&constant),
        )?;
        pad = Some(l1(r)?);
    }

    if let Some(d) = &derivs[DomainTag::PlaneWaveRadiation] {
        if k == 0.0 {
            return Err(PhysicsError::ZeroWavenumber);
        }
        let tag = DomainTag::PlaneWaveRadiation;
        let pb = &problem.background[tag];
        let nrm = &problem.normals[tag];
        let tan = &problem.tangents[tag];
        if mask.pwr_r {
            let constant: Vec<Complex64> = (0..pb.len())
                .map(|i| -(nrm[i][0] * pb.dx[i] + nrm[i][1] * pb.dy[i]))
                .collect();
            let r = linear(
                tape,
                &[
                    (d.dx, coef(nrm.iter().map(|n| -n[0]))),
                    (d.dy, coef(nrm.iter().map(|n| -n[1]))),
                ],
                complex_tensor(&constant),
            )?;
            pwr_r = Some(l1(r)?);
        }
        if mask.pwr_i {
            let r = linear(
                tape,
                &[
                    (Some(d.value), coef(tan.iter().map(|_| k))),
                    (d.dxx, coef(tan.iter().map(|t| t[0] * t[0] / (2.0 * k)))),
                    (d.dyy, coef(tan.iter().map(|t| t[1] * t[1] / (2.0 * k)))),
                ],
                Tensor::zeros(pb.len(), 2),
            )?;
            pwr_i = Some(l1(r)?);
        }
    }

    if let Some(d) = &derivs[DomainTag::AcousticStructureCoupling] {
        let tag = DomainTag::AcousticStructureCoupling;
        let u = problem
            .displacement
            .as_ref()
            .ok_or(PhysicsError::Missing("boundary displacement"))?;
        let pb = &problem.background[tag];
        let nrm = &problem.normals[tag];
        let w2 = problem.omega * problem.omega;
        let rho = cfg.medium.rho;
        let r = match cfg.coupling_mode {
            CouplingMode::Literal => {
                let constant: Vec<Complex64> = (0..pb.len())
                    .map(|i| nrm[i][0] * pb.dxx[i] + nrm[i][1] * pb.dyy[i] - w2 * u.normal[i])
                    .collect();
                linear(
                    tape,
                    &[
                        (d.dxx, coef(nrm.iter().map(|n| n[0]))),
                        (d.dyy, coef(nrm.iter().map(|n| n[1]))),
                    ],
                    complex_tensor(&constant),
                )?
            }
            CouplingMode::ContinuumConsistent => {
                let constant: Vec<Complex64> = (0..pb.len())
                    .map(|i| (nrm[i][0] * pb.dx[i] + nrm[i][1] * pb.dy[i]) / rho - w2 * u.normal[i])
                    .collect();
                linear(
                    tape,
                    &[
                        (d.dx, coef(nrm.iter().map(|n| n[0] / rho))),
                        (d.dy, coef(nrm.iter().map(|n| n[1] / rho))),
                    ],
                    complex_tensor(&constant),
                )?
            }
        };
        asc = Some(l1(r)?);
    }

    // Mean squared complex error at the observation points.
    let obs_set = &problem.observations;
    let obs_empty = obs_set.is_empty();
    let mut obs = None;
    if !obs_empty {
        let mut parts = Vec::new();
        for tag in DomainTag::ALL {
            let idx = obs_set.indices(tag);
            if idx.is_empty() {
                continue;
            }
            let p = preds[tag].ok_or(PhysicsError::Missing("predictions for observed domain"))?;
            let n = problem.counts[tag];
            let select = Tensor::from_fn(idx.len(), n, |r, c| if idx[r] == c { 1.0 } else { 0.0 });
            let truth: Vec<Complex64> = obs_set
                .entries
                .iter()
                .filter(|o| o.domain == tag)
                .map(|o| o.value)
                .collect();
            let picked = tape.constant(select).matmul(p)?;
            let diff = picked.sub(tape.constant(complex_tensor(&truth)))?;
            parts.push(diff.square()?.sum()?);
        }
        let mut sum = parts[0];
        for p in &parts[1..] {
            sum = sum.add(*p)?;
        }
        obs = Some(sum.scale(1.0 / obs_set.len() as f64)?);
    } else {
        log::debug!("no observation points; observation loss is zero");
    }

    let mut total: Option<Var<'t>> = None;
    let mut push = |v: Option<Var<'t>>, weight: f64| -> Result<()> {
        if let Some(v) = v {
            if weight != 0.0 {
                let term = v.scale(weight)?;
                total = Some(match total {
                    Some(t) => t.add(term)?,
                    None => term,
                });
            }
        }
        Ok(())
    };
    push(obs, w.alpha)?;
    push(pad, w.beta)?;
    push(pwr_r, w.beta)?;
    push(pwr_i, w.beta)?;
    push(asc, w.beta)?;
    let total = total.unwrap_or_else(|| tape.constant(Tensor::scalar(0.0)));

    let val = |v: Option<Var<'t>>| v.map_or(0.0, |v| v.value().item());
    let breakdown = LossBreakdown {
        pad: val(pad),
        pwr_r: val(pwr_r),
        pwr_i: val(pwr_i),
        asc: val(asc),
        obs: val(obs),
        total: total.value().item(),
    };
    Ok((
        fwd,
        TapeLosses {
            pad,
            pwr_r,
            pwr_i,
            asc,
            obs,
            total,
            breakdown,
            obs_empty,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_case_geometry, CaseConfig, Observation, Rect};
    use crate::network::{init_params, Architecture, ImplicitStats, InputNormalization, IMPLICIT_WIDTH};
    use crate::physics::{residual_pad, residual_pwr, l1_mean, LossWeights, WaveSpec};

    fn setup(channels: usize) -> (PointCloudSet, ModelParams, ParametricCondition) {
        let cfg = CaseConfig {
            case_id: "small".into(),
            outer: Rect::new(0.0, 1.0, 0.0, 1.0),
            solid: Some(Rect::new(0.3, 0.7, 0.2, 0.4)),
            metasurface_thickness: 0.02,
            subunits: 25,
            counts: PerDomain::new(30, 12, 12),
            observations: PerDomain::new(3, 1, 2),
            refine_band: 0.1,
            refine_fraction: 0.25,
        };
        let cloud = build_case_geometry(&cfg, 5).unwrap();
        let stats = ImplicitStats::from_intervals(&[(300.0, 2000.0); IMPLICIT_WIDTH]).unwrap();
        let params = init_params(
            1,
            Architecture { output_channels: channels },
            InputNormalization::new(&cfg.outer, 300.0, 500.0),
            stats,
        )
        .unwrap();
        (cloud, params, ParametricCondition::uniform(400.0, 1000.0, 1000.0))
    }

    #[test]
    fn tape_residuals_match_closed_forms_on_network_output() {
        // Compare on-tape L_pad / L_pwr with the closed-form routines fed by
        // finite-difference derivatives of the same network.
        let (cloud, params, cond) = setup(2);
        let cfg = PhysicsConfig {
            wave: WaveSpec { p0: 1.0, ek: [0.6, -0.8] },
            ..Default::default()
        };
        let problem = ConditionProblem::new(&cloud, &cond, &params, &cfg, ObservationSet::default(), None).unwrap();
        let tape = Tape::new();
        let mut cfg_no_asc = cfg;
        cfg_no_asc.terms.asc = false;
        let (_, losses) = condition_losses(&tape, &params, &problem, &cfg_no_asc).unwrap();

        let h = 1e-4;
        let predict_shift = |dx: f64, dy: f64| {
            let mut shifted = cloud.clone();
            shifted.interior.iter_mut().for_each(|p| {
                p.x += dx;
                p.y += dy;
            });
            shifted.radiation.iter_mut().for_each(|b| {
                b.point.x += dx;
                b.point.y += dy;
            });
            shifted.coupling.iter_mut().for_each(|b| {
                b.point.x += dx;
                b.point.y += dy;
            });
            params.predict(&shifted, cond.f_hz, &problem.code).unwrap()
        };
        let base = predict_shift(0.0, 0.0);
        let (xp, xm) = (predict_shift(h, 0.0), predict_shift(-h, 0.0));
        let (yp, ym) = (predict_shift(0.0, h), predict_shift(0.0, -h));
        let fd_field = |tag: DomainTag| {
            let n = base[tag].len();
            let mut f = ComplexField::zeros(n);
            for i in 0..n {
                f.value[i] = base[tag][i];
                f.dx[i] = (xp[tag][i] - xm[tag][i]) / (2.0 * h);
                f.dy[i] = (yp[tag][i] - ym[tag][i]) / (2.0 * h);
                f.dxx[i] = (xp[tag][i] - 2.0 * base[tag][i] + xm[tag][i]) / (h * h);
                f.dyy[i] = (yp[tag][i] - 2.0 * base[tag][i] + ym[tag][i]) / (h * h);
            }
            f
        };
        let tag = DomainTag::PressureAcoustic;
        let pad = l1_mean(&residual_pad(&fd_field(tag), &problem.background[tag], problem.k).unwrap());
        assert!((losses.breakdown.pad - pad).abs() <= 1e-4 * pad.max(1.0), "{} vs {pad}", losses.breakdown.pad);
        let tag = DomainTag::PlaneWaveRadiation;
        let (re, im) = residual_pwr(
            &fd_field(tag),
            &problem.background[tag],
            problem.k,
            &problem.normals[tag],
            &problem.tangents[tag],
        )
        .unwrap();
        assert!((losses.breakdown.pwr_r - l1_mean(&re)).abs() <= 1e-5);
        assert!((losses.breakdown.pwr_i - l1_mean(&im)).abs() <= 1e-4);
        assert!(losses.obs.is_none() && losses.obs_empty);
    }

    #[test]
    fn beta_zero_skips_derivatives() {
        let (cloud, params, cond) = setup(2);
        let cfg = PhysicsConfig {
            weights: LossWeights { alpha: 1.0, beta: 0.0 },
            ..Default::default()
        };
        let obs = ObservationSet {
            entries: vec![Observation {
                domain: DomainTag::PressureAcoustic,
                index: 4,
                value: Complex64::new(1.0, -1.0),
            }],
        };
        let problem = ConditionProblem::new(&cloud, &cond, &params, &cfg, obs, None).unwrap();
        let tape = Tape::new();
        let (fwd, losses) = condition_losses(&tape, &params, &problem, &cfg).unwrap();
        assert!(losses.pad.is_none() && losses.asc.is_none());
        let p = fwd.predictions[DomainTag::PressureAcoustic].unwrap().value();
        let want = (p.get(4, 0) - 1.0).powi(2) + (p.get(4, 1) + 1.0).powi(2);
        assert!((losses.breakdown.obs - want).abs() < 1e-12);
        assert_eq!(losses.breakdown.total, losses.breakdown.obs);
    }

    #[test]
    fn coupling_requires_displacement_and_real_head_works() {
        let (cloud, params, cond) = setup(1);
        let cfg = PhysicsConfig::default();
        let problem = ConditionProblem::new(&cloud, &cond, &params, &cfg, ObservationSet::default(), None).unwrap();
        let tape = Tape::new();
        assert!(matches!(
            condition_losses(&tape, &params, &problem, &cfg),
            Err(PhysicsError::Missing(_))
        ));
        let n = cloud.coupling.len();
        let u = DisplacementField { normal: vec![Complex64::new(1e-9, 0.0); n] };
        let problem = ConditionProblem::new(&cloud, &cond, &params, &cfg, ObservationSet::default(), Some(u)).unwrap();
        let tape = Tape::new();
        let (fwd, losses) = condition_losses(&tape, &params, &problem, &cfg).unwrap();
        assert!(losses.breakdown.total.is_finite() && losses.breakdown.asc > 0.0);
        let leaves: Vec<Var> = fwd.weights.leaves().into_iter().copied().collect();
        let grads = tape.gradient(losses.total, &leaves).unwrap();
        assert_eq!(grads.len(), params.tensors().len());
        assert!(grads.iter().all(|g| g.is_finite()));
    }
}
