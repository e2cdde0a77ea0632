//! RAdam with and without LookAhead on the Rosenbrock function, plus the
//! rectification term over the first steps.
//!
//! `cargo run --release --example optimizer`

use acoustic_pinn::autodiff::Tensor;
use acoustic_pinn::training::{rectification_rho, LookaheadConfig, Optimizer, RadamConfig, TrainingError};

fn rosenbrock(p: &Tensor) -> (f64, Tensor) {
    let (x, y) = (p.get(0, 0), p.get(0, 1));
    let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
    let gx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
    let gy = 200.0 * (y - x * x);
    (f, Tensor::from_fn(1, 2, |_, j| if j == 0 { gx } else { gy }))
}

fn run(opt: &Optimizer, steps: usize) -> Result<(f64, Tensor), TrainingError> {
    let mut params = vec![Tensor::from_fn(1, 2, |_, j| if j == 0 { -1.2 } else { 1.0 })];
    let mut state = opt.init(&params);
    for _ in 0..steps {
        let (_, g) = rosenbrock(&params[0]);
        opt.step(&mut params, &[g], &mut state)?;
    }
    Ok((rosenbrock(&params[0]).0, params.remove(0)))
}

fn main() -> Result<(), TrainingError> {
    for t in [1, 4, 5, 6, 10, 100, 1000] {
        println!("step {t:>4}: rho_t = {:.3}", rectification_rho(0.999, t));
    }
    let radam = RadamConfig {
        learning_rate: 2e-3,
        ..Default::default()
    };
    let variants = [
        ("RAdam", None),
        ("RAdam + LookAhead(5, 0.5)", Some(LookaheadConfig::default())),
    ];
    for (name, lookahead) in variants {
        let opt = Optimizer { radam, lookahead };
        let (f, p) = run(&opt, 20000)?;
        println!("{name:<26} f = {f:.3e} at ({:.4}, {:.4})", p.get(0, 0), p.get(0, 1));
    }
    Ok(())
}
