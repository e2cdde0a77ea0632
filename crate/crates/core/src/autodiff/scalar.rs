//! Scalar forward-mode numbers and the elementwise functions the tape knows.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed by the elementwise primitives.
///
/// Implemented for `f64` and recursively for [`Dual`], so `Dual<Dual<f64>>`
/// carries second derivatives.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// Innermost real value.
    fn real(&self) -> f64;
    fn exp(self) -> Self;
    fn ln1p(self) -> Self;
    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn real(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln1p(self) -> Self {
        f64::ln_1p(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

/// Primal value plus a directional derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub primal: T,
    pub tangent: T,
}

/// First-order dual over reals.
pub type DualValue = Dual<f64>;

impl<T: Scalar> Dual<T> {
    pub fn new(primal: T, tangent: T) -> Self {
        Self { primal, tangent }
    }

    /// Independent variable (unit tangent).
    pub fn variable(primal: T) -> Self {
        Self {
            primal,
            tangent: T::from_f64(1.0),
        }
    }

    pub fn constant(primal: T) -> Self {
        Self {
            primal,
            tangent: T::from_f64(0.0),
        }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.primal + rhs.primal, self.tangent + rhs.tangent)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.primal - rhs.primal, self.tangent - rhs.tangent)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.primal * rhs.primal,
            self.tangent * rhs.primal + self.primal * rhs.tangent,
        )
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.primal / rhs.primal;
        Self::new(q, (self.tangent - q * rhs.tangent) / rhs.primal)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.primal, -self.tangent)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v))
    }
    fn real(&self) -> f64 {
        self.primal.real()
    }
    fn exp(self) -> Self {
        let e = self.primal.exp();
        Self::new(e, e * self.tangent)
    }
    fn ln1p(self) -> Self {
        let one = T::from_f64(1.0);
        Self::new(self.primal.ln1p(), self.tangent / (one + self.primal))
    }
    fn tanh(self) -> Self {
        let t = self.primal.tanh();
        let one = T::from_f64(1.0);
        Self::new(t, (one - t * t) * self.tangent)
    }
    fn sin(self) -> Self {
        Self::new(self.primal.sin(), self.primal.cos() * self.tangent)
    }
    fn cos(self) -> Self {
        Self::new(self.primal.cos(), -(self.primal.sin() * self.tangent))
    }
}

/// `ln(1 + e^x)` with the thresholded form for large `|x|`.
pub fn softplus<T: Scalar>(x: T) -> T {
    let r = x.real();
    if r > 20.0 {
        x
    } else if r < -20.0 {
        x.exp()
    } else {
        x.exp().ln1p()
    }
}

/// `x * tanh(softplus(x))`.
pub fn mish<T: Scalar>(x: T) -> T {
    x * softplus(x).tanh()
}

/// Highest derivative order [`UnaryFn::derivative`] can evaluate.
pub const MAX_DERIVATIVE_ORDER: u8 = 3;

/// Smooth elementwise functions recorded on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryFn {
    Exp,
    Ln1p,
    Tanh,
    Sin,
    Cos,
    Mish,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Exp => "exp",
            UnaryFn::Ln1p => "ln1p",
            UnaryFn::Tanh => "tanh",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Mish => "mish",
        }
    }

    /// `order`-th derivative at `x`, or `None` above [`MAX_DERIVATIVE_ORDER`].
    pub fn derivative(self, order: u8, x: f64) -> Option<f64> {
        if order > MAX_DERIVATIVE_ORDER {
            return None;
        }
        Some(match self {
            UnaryFn::Exp => x.exp(),
            UnaryFn::Ln1p => {
                let u = 1.0 / (1.0 + x);
                match order {
                    0 => x.ln_1p(),
                    1 => u,
                    2 => -u * u,
                    _ => 2.0 * u * u * u,
                }
            }
            UnaryFn::Tanh => {
                let t = x.tanh();
                let u = 1.0 - t * t;
                match order {
                    0 => t,
                    1 => u,
                    2 => -2.0 * t * u,
                    _ => u * (4.0 * t * t - 2.0 * u),
                }
            }
            UnaryFn::Sin => match order {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            UnaryFn::Cos => match order {
                0 => x.cos(),
                1 => -x.sin(),
                2 => -x.cos(),
                _ => x.sin(),
            },
            UnaryFn::Mish => mish_derivative(order, x),
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Closed-form Mish derivatives up to third order.
///
/// With `g = tanh(softplus(x))`, `s = sigmoid(x)`, `u = 1 - g^2`:
/// `g' = u s`, `g'' = A B`, `g''' = A (B^2 + B')` where `A = u s` and
/// `B = 1 - s - 2 g s`.
fn mish_derivative(order: u8, x: f64) -> f64 {
    let sp = softplus(x);
    let g = sp.tanh();
    if order == 0 {
        return x * g;
    }
    // Beyond the softplus thresholds the derivative of softplus is taken
    // from the branch actually evaluated.
    let s = if x > 20.0 {
        1.0
    } else if x < -20.0 {
        x.exp()
    } else {
        sigmoid(x)
    };
    let u = 1.0 - g * g;
    let a = u * s;
    let g1 = a;
    if order == 1 {
        return g + x * g1;
    }
    // B = s'/s - 2 g s, and s' = s on the exponential tail.
    let b = if x < -20.0 {
        1.0 - 2.0 * g * s
    } else {
        1.0 - s - 2.0 * g * s
    };
    let g2 = a * b;
    if order == 2 {
        return 2.0 * g1 + x * g2;
    }
    let db = if x > 20.0 {
        -2.0 * g1 * s
    } else if x < -20.0 {
        -2.0 * (g1 * s + g * s)
    } else {
        -s * (1.0 - s) - 2.0 * (g1 * s + g * s * (1.0 - s))
    };
    let g3 = a * (b * b + db);
    3.0 * g2 + x * g3
}
