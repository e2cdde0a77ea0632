use acoustic_pinn::evaluation::{
    ablation_pair, ape_map, compare_fields, dataset_hash, evaluate, rde, write_report_csv, AblationSetup,
    PointSelection,
};
use acoustic_pinn::geometry::{DomainTag, PerDomain};
use acoustic_pinn::network::{init_params, Architecture, InputNormalization};
use acoustic_pinn::physics::{LossWeights, PhysicsConfig};
use acoustic_pinn::training::{build_dataset, sampling_stats, CaseSpec, TrainConfig};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_vec(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn paired(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<Complex64>, Vec<Complex64>)> {
    complex_vec(n).prop_flat_map(|t| {
        let len = t.len();
        (Just(t), complex_vec(len..len + 1))
    })
}

proptest! {
    #[test]
    fn rde_scales_with_the_error((truth, err) in paired(1..30), s in 0.1f64..10.0) {
        prop_assume!(truth.iter().any(|z| z.norm() > 1e-3));
        let pred = |c: f64| -> Vec<Complex64> { truth.iter().zip(&err).map(|(t, e)| t + c * e).collect() };
        let one = rde(&pred(1.0), &truth).unwrap();
        let scaled = rde(&pred(s), &truth).unwrap();
        prop_assert!((scaled - s * one).abs() <= 1e-12 * (1.0 + scaled));
        // and is invariant to a common rescaling of both fields
        let sp: Vec<_> = pred(1.0).iter().map(|z| s * z).collect();
        let st: Vec<_> = truth.iter().map(|z| s * z).collect();
        prop_assert!((rde(&sp, &st).unwrap() - one).abs() <= 1e-12 * (1.0 + one));
    }

    #[test]
    fn rde_ignores_point_order((truth, pred) in paired(1..30), rot in 0usize..30) {
        prop_assume!(truth.iter().any(|z| z.norm() > 1e-3));
        let r = rot % truth.len();
        let mut t2 = truth.clone();
        let mut p2 = pred.clone();
        t2.rotate_left(r);
        p2.rotate_left(r);
        let a = rde(&pred, &truth).unwrap();
        prop_assert!((rde(&p2, &t2).unwrap() - a).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn ape_grows_with_a_uniform_offset(truth in complex_vec(1..20), a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let shift = |d: f64| -> Vec<Complex64> { truth.iter().map(|t| t + Complex64::new(d, -d)).collect() };
        for (x, y) in ape_map(&shift(lo), &truth).iter().zip(ape_map(&shift(hi), &truth)) {
            prop_assert!(*x <= y + 1e-12);
        }
    }
}

#[test]
fn identical_fields_report_zero_error() {
    let truth = PerDomain::new(
        vec![Complex64::new(1.0, -0.5), Complex64::new(0.2, 0.3)],
        vec![Complex64::new(-1.0, 0.0)],
        vec![Complex64::new(0.0, 2.0)],
    );
    let idx = truth.map(|_, v| (0..v.len()).collect());
    let report = compare_fields(0, 300.0, &truth, &truth, idx).unwrap();
    for tag in DomainTag::ALL {
        assert_eq!(report.rde[tag], Some(0.0));
        assert!(report.ape[tag].iter().all(|&e| e == 0.0));
    }
    let mut buf = Vec::new();
    write_report_csv(&mut buf, &acoustic_pinn::evaluation::EvaluationReport::from_conditions(vec![report])).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "0,300,0e0,0e0,0e0,0e0");
}

#[test]
fn ablation_arms_match_when_both_are_data_only() {
    let physics = PhysicsConfig::default();
    let spec = CaseSpec::desk(40, 6, &physics);
    let (train_set, _) = build_dataset(&spec, &physics, 0).unwrap();
    let (lo, hi) = spec.frequency_range();
    let init = init_params(
        0,
        Architecture::default(),
        InputNormalization::new(&spec.geometry.outer, lo, hi),
        sampling_stats(),
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        weights: LossWeights { alpha: 1.0, beta: 0.0 },
        snapshot_epochs: vec![],
        ..Default::default()
    };
    let setup = AblationSetup {
        init: &init,
        train_set: &train_set,
        eval_set: &train_set,
        truth: &spec.truth,
        physics: &physics,
        selection: PointSelection::HeldOut,
    };
    let report = ablation_pair(&setup, &cfg, &cfg).unwrap();
    assert_eq!(report.physics, report.data);
    assert_eq!(report.improvement[DomainTag::PressureAcoustic], Some(1.0));
    assert_eq!(report.dataset_hash, dataset_hash(&train_set));

    // held-out evaluation skips exactly the observation points
    let direct = evaluate(&init, &train_set, &spec.truth, &physics, PointSelection::HeldOut).unwrap();
    assert_eq!(direct.conditions[0].indices[DomainTag::PressureAcoustic].len(), 40 - 6);
}
