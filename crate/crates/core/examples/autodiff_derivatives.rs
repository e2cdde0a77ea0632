//! Second spatial derivatives of a small Mish network, checked against
//! central differences.
//!
//! `cargo run --release --example autodiff_derivatives`

use acoustic_pinn::autodiff::{fd_check, second_directional, AutodiffError, Tape, Tensor, Var, FD_STEP};

fn net<'t>(tape: &'t Tape, x: Var<'t>) -> Result<Var<'t>, AutodiffError> {
    let w1 = tape.constant(Tensor::from_fn(2, 8, |i, j| ((i * 8 + j) as f64 * 0.37).sin()));
    let b1 = tape.constant(Tensor::from_fn(1, 8, |_, j| 0.1 * j as f64));
    let w2 = tape.constant(Tensor::from_fn(8, 1, |i, _| (i as f64 * 0.91).cos()));
    x.matmul(w1)?.add_row(b1)?.mish()?.matmul(w2)
}

fn main() -> Result<(), AutodiffError> {
    let x = Tensor::matrix(3, 2, vec![0.1, 0.2, -0.5, 0.7, 1.2, -0.3])?;
    let dxx = second_directional(net, &x, 0)?;
    let dyy = second_directional(net, &x, 1)?;
    for r in 0..3 {
        println!(
            "point ({:+.2}, {:+.2}): u_xx {:+.6}  u_yy {:+.6}  laplacian {:+.6}",
            x.get(r, 0),
            x.get(r, 1),
            dxx.get(r, 0),
            dyy.get(r, 0),
            dxx.get(r, 0) + dyy.get(r, 0)
        );
    }
    let report = fd_check(net, &x, FD_STEP)?;
    println!(
        "finite-difference check: gradient {:.2e}, second derivatives {:.2e}",
        report.gradient, report.second
    );
    Ok(())
}
