use std::f64::consts::PI;

use acoustic_pinn::autodiff::{second_directional, AutodiffError, Tape, Tensor, Var};
use acoustic_pinn::geometry::{build_case_geometry, CaseConfig, DomainTag, Observation, ObservationSet, PerDomain, Point2};
use acoustic_pinn::physics::{
    background_pressure, l1_mean, loss_obs, manufactured_solution, residual_pad, residual_pwr, sample_field,
    total_loss, ComplexField, LossBreakdown, LossWeights, PlaneWave, Superposition, WaveSpec,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn conj(f: &ComplexField) -> ComplexField {
    let c = |v: &Vec<Complex64>| v.iter().map(|z| z.conj()).collect();
    ComplexField {
        value: c(&f.value),
        dx: c(&f.dx),
        dy: c(&f.dy),
        dxx: c(&f.dxx),
        dyy: c(&f.dyy),
    }
}

fn points(seed: u64, n: usize) -> Vec<Point2> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-4.0..11.0)))
        .collect()
}

fn unit(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

fn background(pts: &[Point2], k: f64) -> ComplexField {
    let s: Vec<_> = pts.iter().map(|&p| background_pressure(p, &WaveSpec::default(), k)).collect();
    ComplexField::from_samples(&s)
}

fn breakdown() -> impl Strategy<Value = LossBreakdown> {
    (0.0..10.0f64, 0.0..10.0f64, 0.0..10.0f64, 0.0..10.0f64, 0.0..10.0f64).prop_map(|(pad, pwr_r, pwr_i, asc, obs)| {
        LossBreakdown {
            pad,
            pwr_r,
            pwr_i,
            asc,
            obs,
            total: 0.0,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plane_waves_satisfy_helmholtz(
        k in 0.1f64..20.0,
        theta in 0.0..2.0 * PI,
        re in -3.0f64..3.0,
        im in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let pts = points(seed, 16);
        let ps = sample_field(&manufactured_solution(k, Complex64::new(re, im), unit(theta)).unwrap(), &pts);
        let r = residual_pad(&ps, &background(&pts, k), k).unwrap();
        let scale = (1.0 + re.abs() + im.abs()) * k * k;
        prop_assert!(l1_mean(&r) <= 1e-12 * scale);
    }

    #[test]
    fn superpositions_satisfy_helmholtz(k in 0.1f64..20.0, a in 0.0..2.0 * PI, b in 0.0..2.0 * PI, seed in any::<u64>()) {
        let pts = points(seed, 16);
        let waves = Superposition(vec![
            PlaneWave::new(Complex64::new(1.0, 0.5), k, unit(a)).unwrap(),
            PlaneWave::new(Complex64::new(-0.3, 2.0), k, unit(b)).unwrap(),
        ]);
        let r = residual_pad(&sample_field(&waves, &pts), &ComplexField::zeros(16), k).unwrap();
        prop_assert!(l1_mean(&r) <= 1e-11 * k * k);
    }

    #[test]
    fn reversing_the_incident_direction_conjugates_it(k in 0.1f64..20.0, theta in 0.0..2.0 * PI, seed in any::<u64>()) {
        let d = unit(theta);
        let fwd = WaveSpec { p0: 1.0, ek: d };
        let back = WaveSpec { p0: 1.0, ek: [-d[0], -d[1]] };
        for p in points(seed, 8) {
            let a = background_pressure(p, &fwd, k).value;
            let b = background_pressure(p, &back, k).value;
            prop_assert!((a.conj() - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn residuals_commute_with_conjugation(k in 0.1f64..20.0, theta in 0.0..2.0 * PI, seed in any::<u64>()) {
        let pts = points(seed, 8);
        let ps = sample_field(&PlaneWave::new(Complex64::new(0.7, -0.2), k, unit(theta)).unwrap(), &pts);
        let pb = background(&pts, k);
        let normals = vec![[0.0, 1.0]; 8];
        let tangents = vec![[-1.0, 0.0]; 8];
        let (re, im) = residual_pwr(&ps, &pb, k, &normals, &tangents).unwrap();
        let (re_c, im_c) = residual_pwr(&conj(&ps), &conj(&pb), k, &normals, &tangents).unwrap();
        for i in 0..8 {
            prop_assert!((re[i].conj() - re_c[i]).norm() <= 1e-12 * (1.0 + re[i].norm()));
            prop_assert!((im[i].conj() - im_c[i]).norm() <= 1e-12 * (1.0 + im[i].norm()));
        }
    }

    #[test]
    fn losses_are_nonnegative(values in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20)) {
        let r: Vec<Complex64> = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        prop_assert!(l1_mean(&r) >= 0.0);
        let pred = PerDomain::new(r.clone(), vec![], vec![]);
        let obs = ObservationSet {
            entries: (0..r.len())
                .map(|i| Observation { domain: DomainTag::PressureAcoustic, index: i, value: Complex64::new(0.0, 0.0) })
                .collect(),
        };
        prop_assert!(loss_obs(&pred, &obs).unwrap().value >= 0.0);
    }

    #[test]
    fn total_loss_is_monotone_in_each_term(
        b in breakdown(),
        bump in 0.0f64..5.0,
        which in 0usize..5,
        alpha in 0.0f64..2.0,
        beta in 0.0f64..2.0,
    ) {
        let w = LossWeights { alpha, beta };
        let mut c = b;
        match which {
            0 => c.pad += bump,
            1 => c.pwr_r += bump,
            2 => c.pwr_i += bump,
            3 => c.asc += bump,
            _ => c.obs += bump,
        }
        prop_assert!(total_loss(&b, &w) >= 0.0);
        prop_assert!(total_loss(&c, &w) >= total_loss(&b, &w));
    }
}

/// Exact plane wave written as a tape function: columns `(Re, Im)` of
/// `exp(-i k (x . d))`.
fn tape_plane_wave<'t>(tape: &'t Tape, x: Var<'t>, k: f64, d: [f64; 2]) -> Result<Var<'t>, AutodiffError> {
    let proj = tape.constant(Tensor::matrix(2, 1, vec![k * d[0], k * d[1]])?);
    let phase = x.matmul(proj)?;
    Var::concat_cols(&[phase.cos()?, phase.sin()?.neg()?])
}

#[test]
fn helmholtz_identity_through_autodiff() {
    let (k, d) = (6.0, [0.6, 0.8]);
    let pts = points(9, 32);
    let x = Tensor::from_fn(pts.len(), 2, |i, j| if j == 0 { pts[i].x } else { pts[i].y });
    let dxx = second_directional(|t, v| tape_plane_wave(t, v, k, d), &x, 0).unwrap();
    let dyy = second_directional(|t, v| tape_plane_wave(t, v, k, d), &x, 1).unwrap();
    let tape = Tape::new();
    let value = tape_plane_wave(&tape, tape.constant(x.clone()), k, d).unwrap().value();
    for i in 0..pts.len() {
        for c in 0..2 {
            let r = dxx.get(i, c) + dyy.get(i, c) + k * k * value.get(i, c);
            assert!(r.abs() <= 1e-6, "point {i} channel {c}: {r}");
        }
    }
}

/// The two constant degenerate fields each zero a different half of the
/// radiation loss, both zero the interior loss, and only observations
/// separate them from the true field.
#[test]
fn degenerate_fields_need_observations() {
    let config = CaseConfig::case1();
    let cloud = build_case_geometry(&config, 1).unwrap();
    let k = 2.0 * PI * 300.0 / 1481.0;
    let interior = cloud.points(DomainTag::PressureAcoustic);
    let radiation = cloud.points(DomainTag::PlaneWaveRadiation);
    let normals: Vec<_> = cloud.radiation.iter().map(|b| b.normal).collect();
    let tangents: Vec<_> = cloud.radiation.iter().map(|b| b.tangent).collect();

    let pb_in = background(&interior, k);
    let pb_rad = background(&radiation, k);
    let minus = |f: &ComplexField| f.scale(Complex64::new(-1.0, 0.0));

    let zero = |n: usize| ComplexField::zeros(n);
    for ps in [zero(interior.len()), minus(&pb_in)] {
        assert!(l1_mean(&residual_pad(&ps, &pb_in, k).unwrap()) < 1e-12);
    }

    let (re0, im0) = residual_pwr(&zero(radiation.len()), &pb_rad, k, &normals, &tangents).unwrap();
    let (re1, im1) = residual_pwr(&minus(&pb_rad), &pb_rad, k, &normals, &tangents).unwrap();
    assert_eq!(l1_mean(&im0), 0.0);
    assert!(l1_mean(&re0) > 1e-3);
    assert!(l1_mean(&re1) < 1e-12);
    assert!(l1_mean(&im1) > 1e-3);

    // a reflected wave as reference: both degenerate fields miss it
    let truth_wave = PlaneWave::new(Complex64::new(0.8, 0.1), k, [0.0, 1.0]).unwrap();
    let truth = sample_field(&truth_wave, &interior).value;
    let obs = ObservationSet {
        entries: (0..interior.len())
            .step_by(50)
            .map(|i| Observation {
                domain: DomainTag::PressureAcoustic,
                index: i,
                value: truth[i],
            })
            .collect(),
    };
    let as_pred = |f: &ComplexField| PerDomain::new(f.value.clone(), vec![], vec![]);
    for ps in [zero(interior.len()), minus(&pb_in)] {
        assert!(loss_obs(&as_pred(&ps), &obs).unwrap().value > 0.1);
    }
    assert_eq!(loss_obs(&PerDomain::new(truth, vec![], vec![]), &obs).unwrap().value, 0.0);
}
