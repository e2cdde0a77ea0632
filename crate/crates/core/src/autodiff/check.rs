//! Convenience entry points and the central-difference oracle.

use super::{AutodiffError, Tape, Tensor, Var};

type Result<T> = std::result::Result<T, AutodiffError>;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-4;

/// Forward value of `f` at `inputs`.
pub fn evaluate<F>(f: F, inputs: &[Tensor]) -> Result<Tensor>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    Ok(f(&tape, &vars)?.value())
}

/// Reverse-mode gradient of a scalar-valued `f` with respect to every input.
pub fn gradient<F>(f: F, inputs: &[Tensor]) -> Result<Vec<Tensor>>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let out = f(&tape, &vars)?;
    tape.gradient(out, &vars)
}

fn axis_tangent(input: &Tensor, axis: usize) -> Result<Tensor> {
    let (rows, cols) = input.dims2().ok_or_else(|| AutodiffError::InvalidShape {
        shape: input.shape().to_vec(),
    })?;
    if axis >= cols {
        return Err(AutodiffError::InvalidAxis { axis, dims: cols });
    }
    Ok(Tensor::from_fn(rows, cols, |_, c| if c == axis { 1.0 } else { 0.0 }))
}

/// Second derivative of every output entry along coordinate `axis`.
///
/// `input` is `N x d` (one point per row); the tangent moves column `axis`
/// of every row together.
pub fn second_directional<F>(f: F, input: &Tensor, axis: usize) -> Result<Tensor>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let tangent = axis_tangent(input, axis)?;
    let tape = Tape::new();
    let x = tape.variable(input.clone());
    let out = f(&tape, x)?;
    let jet = tape.push_forward(x, tangent, &[out])?[0];
    Ok(match jet.second {
        Some(v) => v.value(),
        None => {
            let s = out.shape();
            Tensor::zeros(s[0], s[1])
        }
    })
}

/// Worst relative discrepancies found by [`fd_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdReport {
    /// Reverse-mode gradient of the summed outputs against central differences.
    pub gradient: f64,
    /// Forward-over-tape second derivatives against second central differences.
    pub second: f64,
}

impl FdReport {
    pub fn worst(&self) -> f64 {
        self.gradient.max(self.second)
    }
}

/// `|a - b| / max(|b|, 1)`: relative for large values, absolute below one.
fn discrepancy(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Compares [`gradient`] and [`second_directional`] with central differences.
///
/// `f` maps an `N x d` point set to per-point outputs. Perturbations are
/// evaluated by replaying one recorded tape with shifted leaf values.
pub fn fd_check<F>(f: F, input: &Tensor, step: f64) -> Result<FdReport>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let (rows, cols) = input.dims2().ok_or_else(|| AutodiffError::InvalidShape {
        shape: input.shape().to_vec(),
    })?;

    let grad = gradient(|tape, v| f(tape, v[0])?.sum(), std::slice::from_ref(input))?.remove(0);

    let tape = Tape::new();
    let x = tape.variable(input.clone());
    let out = f(&tape, x)?;
    let base = out.value();
    let eval_at = |shifted: Tensor| -> Result<Tensor> {
        tape.set_value(x, shifted)?;
        tape.replay()?;
        Ok(out.value())
    };

    let mut worst_grad = 0.0_f64;
    for idx in 0..rows * cols {
        let mut plus = input.clone();
        plus.data_mut()[idx] += step;
        let mut minus = input.clone();
        minus.data_mut()[idx] -= step;
        let fp: f64 = eval_at(plus)?.data().iter().sum();
        let fm: f64 = eval_at(minus)?.data().iter().sum();
        let fd = (fp - fm) / (2.0 * step);
        worst_grad = worst_grad.max(discrepancy(grad.data()[idx], fd));
    }

    let mut worst_second = 0.0_f64;
    for axis in 0..cols {
        let analytic = second_directional(&f, input, axis)?;
        let shift = |sign: f64| {
            let mut t = input.clone();
            for r in 0..rows {
                let v = t.get(r, axis) + sign * step;
                t.set(r, axis, v);
            }
            t
        };
        let fp = eval_at(shift(1.0))?;
        let fm = eval_at(shift(-1.0))?;
        for i in 0..base.len() {
            let fd = (fp.data()[i] - 2.0 * base.data()[i] + fm.data()[i]) / (step * step);
            worst_second = worst_second.max(discrepancy(analytic.data()[i], fd));
        }
    }
    eval_at(input.clone())?;

    Ok(FdReport {
        gradient: worst_grad,
        second: worst_second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_examples() {
        let sq = evaluate(|_, v| v[0].square(), &[Tensor::scalar(3.0)]).unwrap();
        assert_eq!(sq.item(), 9.0);
        let m = evaluate(|_, v| v[0].mish(), &[Tensor::scalar(0.0)]).unwrap();
        assert_eq!(m.item(), 0.0);
        let s = evaluate(|_, v| v[0].add(v[1]), &[Tensor::scalar(1.0), Tensor::scalar(2.0)]).unwrap();
        assert_eq!(s.item(), 3.0);
    }

    #[test]
    fn second_directional_examples() {
        let cube = second_directional(|_, x| x.mul(x)?.mul(x), &Tensor::scalar(2.0), 0).unwrap();
        assert_eq!(cube.item(), 12.0);
        let sin = second_directional(|_, x| x.sin(), &Tensor::scalar(0.0), 0).unwrap();
        assert_eq!(sin.item(), 0.0);
    }

    #[test]
    fn mish_second_derivative_matches_fd() {
        let h = FD_STEP;
        let want = (crate::autodiff::mish(h) - 2.0 * crate::autodiff::mish(0.0_f64)
            + crate::autodiff::mish(-h))
            / (h * h);
        let got = second_directional(|_, x| x.mish(), &Tensor::scalar(0.0), 0)
            .unwrap()
            .item();
        assert!(((got - want) / want).abs() < 1e-5, "{got} vs {want}");
    }

    #[test]
    fn invalid_axis() {
        let r = second_directional(|_, x| x.sin(), &Tensor::zeros(3, 2), 2);
        assert!(matches!(r, Err(AutodiffError::InvalidAxis { axis: 2, dims: 2 })));
    }

    fn affine<'t>(tape: &'t Tape, v: Var<'t>) -> Result<Var<'t>> {
        let w = tape.constant(Tensor::matrix(2, 1, vec![0.7, -1.3]).unwrap());
        v.matmul(w)?.offset(0.25)
    }

    fn cubic<'t>(tape: &'t Tape, v: Var<'t>) -> Result<Var<'t>> {
        let w = tape.constant(Tensor::matrix(2, 1, vec![1.5, -0.5]).unwrap());
        let lin = v.matmul(w)?;
        lin.mul(lin)?.mul(lin)?.add(lin.scale(2.0)?)
    }

    #[test]
    fn affine_has_zero_second_derivative() {
        let x = Tensor::from_fn(5, 2, |i, j| i as f64 * 0.3 - j as f64);
        for axis in 0..2 {
            let s = second_directional(affine, &x, axis).unwrap();
            assert!(s.data().iter().all(|&v| v == 0.0));
        }
        let report = fd_check(affine, &x, FD_STEP).unwrap();
        // FD noise only; analytic side is exactly zero.
        assert!(report.second <= 1e-6, "{report:?}");
    }

    #[test]
    fn polynomial_fd_check() {
        let x = Tensor::from_fn(4, 2, |i, j| 0.5 * i as f64 - 0.8 + 0.3 * j as f64);
        let report = fd_check(cubic, &x, FD_STEP).unwrap();
        assert!(report.worst() < 1e-6, "{report:?}");
    }
}
