use acoustic_pinn::autodiff::{fd_check, AutodiffError, gradient, mish, second_directional, Tape, Tensor, Var, FD_STEP};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Layers = Vec<(Tensor, Tensor)>;

fn random_mlp(seed: u64, widths: &[usize]) -> Layers {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    widths
        .windows(2)
        .map(|w| {
            let bound = 1.5 / (w[0] as f64).sqrt();
            let weight = Tensor::from_fn(w[0], w[1], |_, _| rng.gen_range(-bound..bound));
            let bias = Tensor::from_fn(1, w[1], |_, _| rng.gen_range(-0.5..0.5));
            (weight, bias)
        })
        .collect()
}

fn mlp<'t>(tape: &'t Tape, x: Var<'t>, layers: &Layers) -> Result<Var<'t>, AutodiffError> {
    let mut h = x;
    for (i, (w, b)) in layers.iter().enumerate() {
        h = h.matmul(tape.constant(w.clone()))?.add_row(tape.constant(b.clone()))?;
        if i + 1 < layers.len() {
            h = h.mish()?;
        }
    }
    Ok(h)
}

fn random_points(seed: u64, n: usize, d: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    Tensor::from_fn(n, d, |_, _| rng.gen_range(-1.5..1.5))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mish_networks_agree_with_finite_differences(seed in any::<u64>(), n in 1usize..6) {
        let layers = random_mlp(seed, &[2, 8, 8, 1]);
        let x = random_points(seed, n, 2);
        let report = fd_check(|t, v| mlp(t, v, &layers), &x, FD_STEP).unwrap();
        prop_assert!(report.worst() < 1e-5, "{report:?}");
    }

    #[test]
    fn three_input_networks_agree_with_finite_differences(seed in any::<u64>()) {
        let layers = random_mlp(seed, &[3, 16, 2]);
        let x = random_points(seed, 4, 3);
        let report = fd_check(|t, v| mlp(t, v, &layers), &x, FD_STEP).unwrap();
        prop_assert!(report.worst() < 1e-5, "{report:?}");
    }

    #[test]
    fn pointwise_second_derivative_of_mish(x0 in -6.0f64..6.0) {
        // independent oracle: second central difference of the scalar mish
        let h = 1e-4;
        let fd = (mish(x0 + h) - 2.0 * mish(x0) + mish(x0 - h)) / (h * h);
        let input = Tensor::matrix(1, 1, vec![x0]).unwrap();
        let d2 = second_directional(|_, v| v.mish(), &input, 0).unwrap();
        prop_assert!((d2.item() - fd).abs() < 1e-5);
    }
}

#[test]
fn gradient_of_quadratic_form() {
    let a = Tensor::matrix(2, 2, vec![2.0, 1.0, 1.0, 3.0]).unwrap();
    let x = Tensor::matrix(1, 2, vec![0.5, -1.0]).unwrap();
    // d/dx (x A x^T) = x (A + A^T)
    let g = gradient(
        |t, v| {
            let ax = v[0].matmul(t.constant(a.clone()))?;
            ax.mul(v[0])?.sum()
        },
        std::slice::from_ref(&x),
    )
    .unwrap();
    assert!((g[0].get(0, 0) - (2.0 * 0.5 * 2.0 + -2.0)).abs() < 1e-14);
    assert!((g[0].get(0, 1) - (2.0 * 0.5 + -6.0)).abs() < 1e-14);
}

#[test]
fn second_derivatives_are_rowwise() {
    // per-point outputs must not leak into each other's derivatives
    let layers = random_mlp(3, &[2, 8, 1]);
    let x = random_points(3, 5, 2);
    let all = second_directional(|t, v| mlp(t, v, &layers), &x, 0).unwrap();
    for r in 0..5 {
        let row = Tensor::matrix(1, 2, vec![x.get(r, 0), x.get(r, 1)]).unwrap();
        let one = second_directional(|t, v| mlp(t, v, &layers), &row, 0).unwrap();
        assert!((one.item() - all.get(r, 0)).abs() < 1e-12);
    }
}
