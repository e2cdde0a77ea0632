//! Parameter containers and the shared-kernel building blocks.
//!
//! Every container is generic over its leaf type so the same layout holds
//! plain tensors (stored parameters) and tape variables (a bound forward
//! pass). Leaves are always visited in declaration order.

use rand::Rng;

use crate::autodiff::{Tensor, Var};

use super::NetworkError;

type Result<T> = std::result::Result<T, NetworkError>;

/// Affine map `x W + b` with `W: in x out` and `b: 1 x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: T,
    pub bias: T,
}

/// Chain of shared-kernel layers; Mish after every layer except a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
    pub linear_output: bool,
}

/// T-Net producing a cloud-level `m x m` matrix.
///
/// Per-point MLP `m -> 32 -> 64`, max-pool over points, then dense
/// `64 -> 32 -> m^2` with a linear last layer, plus the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTransform<T> {
    pub width: usize,
    pub point_mlp: Mlp<T>,
    pub dense: Mlp<T>,
}

/// Transform(3) -> MLP 3->64->64 -> Transform(64) -> MLP 64->32.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalExtractor<T> {
    pub input_transform: FeatureTransform<T>,
    pub mlp1: Mlp<T>,
    pub feature_transform: FeatureTransform<T>,
    pub mlp2: Mlp<T>,
}

/// All trainable tensors of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub local: LocalExtractor<T>,
    pub global: Mlp<T>,
    /// One criteria-solver head per domain tag.
    pub heads: [Mlp<T>; 3],
}

impl<T> Dense<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Dense<U> {
        Dense {
            weight: f(&self.weight),
            bias: f(&self.bias),
        }
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

impl<T> Mlp<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Mlp<U> {
        Mlp {
            layers: self.layers.iter().map(|l| l.map(f)).collect(),
            linear_output: self.linear_output,
        }
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        self.layers.iter().for_each(|l| l.visit(f));
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        self.layers.iter_mut().for_each(|l| l.visit_mut(f));
    }
}

impl<T> FeatureTransform<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> FeatureTransform<U> {
        FeatureTransform {
            width: self.width,
            point_mlp: self.point_mlp.map(f),
            dense: self.dense.map(f),
        }
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        self.point_mlp.visit(f);
        self.dense.visit(f);
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        self.point_mlp.visit_mut(f);
        self.dense.visit_mut(f);
    }
}

impl<T> LocalExtractor<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> LocalExtractor<U> {
        LocalExtractor {
            input_transform: self.input_transform.map(f),
            mlp1: self.mlp1.map(f),
            feature_transform: self.feature_transform.map(f),
            mlp2: self.mlp2.map(f),
        }
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        self.input_transform.visit(f);
        self.mlp1.visit(f);
        self.feature_transform.visit(f);
        self.mlp2.visit(f);
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        self.input_transform.visit_mut(f);
        self.mlp1.visit_mut(f);
        self.feature_transform.visit_mut(f);
        self.mlp2.visit_mut(f);
    }
}

impl<T> Network<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Network<U> {
        Network {
            local: self.local.map(&mut f),
            global: self.global.map(&mut f),
            heads: [
                self.heads[0].map(&mut f),
                self.heads[1].map(&mut f),
                self.heads[2].map(&mut f),
            ],
        }
    }

    /// Leaves in declaration order.
    pub fn leaves(&self) -> Vec<&T> {
        let mut out = Vec::new();
        let mut push = |t| out.push(t);
        self.local.visit(&mut push);
        self.global.visit(&mut push);
        self.heads.iter().for_each(|h| h.visit(&mut push));
        out
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut T)) {
        self.local.visit_mut(&mut f);
        self.global.visit_mut(&mut f);
        self.heads.iter_mut().for_each(|h| h.visit_mut(&mut f));
    }
}

/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases.
pub(crate) fn init_dense(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Dense<Tensor> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let weight = Tensor::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-bound..bound));
    let bias = Tensor::from_fn(1, fan_out, |_, _| rng.gen_range(-bound..bound));
    Dense { weight, bias }
}

pub(crate) fn init_mlp(rng: &mut impl Rng, widths: &[usize], linear_output: bool) -> Mlp<Tensor> {
    Mlp {
        layers: widths
            .windows(2)
            .map(|w| init_dense(rng, w[0], w[1]))
            .collect(),
        linear_output,
    }
}

/// T-Net whose last layer starts at zero, so the transform starts as identity.
pub(crate) fn init_transform(rng: &mut impl Rng, m: usize) -> FeatureTransform<Tensor> {
    let point_mlp = init_mlp(rng, &[m, 32, 64], false);
    let mut dense = init_mlp(rng, &[64, 32, m * m], true);
    let last = dense.layers.last_mut().expect("two layers");
    last.weight = Tensor::zeros(32, m * m);
    last.bias = Tensor::zeros(1, m * m);
    FeatureTransform {
        width: m,
        point_mlp,
        dense,
    }
}

impl Mlp<Tensor> {
    /// Layer widths, input first.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.layers.len() + 1);
        if let Some(first) = self.layers.first() {
            w.push(first.weight.rows());
        }
        w.extend(self.layers.iter().map(|l| l.weight.cols()));
        w
    }
}

fn width_of(x: Var<'_>) -> usize {
    x.shape()[1]
}

/// Shared-kernel MLP applied to every row of `input`.
pub fn matrix_mlp<'t>(input: Var<'t>, params: &Mlp<Var<'t>>) -> Result<Var<'t>> {
    let mut x = input;
    let n = params.layers.len();
    for (i, layer) in params.layers.iter().enumerate() {
        let expected = layer.weight.shape()[0];
        if width_of(x) != expected {
            return Err(NetworkError::DimensionMismatch {
                op: "matrix_mlp",
                expected,
                got: width_of(x),
            });
        }
        x = x.matmul(layer.weight)?.add_row(layer.bias)?;
        if !(params.linear_output && i + 1 == n) {
            x = x.mish()?;
        }
    }
    Ok(x)
}

/// Cloud-level `m x m` matrix of a T-Net.
pub fn transform_matrix<'t>(input: Var<'t>, params: &FeatureTransform<Var<'t>>) -> Result<Var<'t>> {
    let m = params.width;
    if width_of(input) != m {
        return Err(NetworkError::DimensionMismatch {
            op: "feature_transform",
            expected: m,
            got: width_of(input),
        });
    }
    let pooled = matrix_mlp(input, &params.point_mlp)?.max_pool_rows()?;
    let flat = matrix_mlp(pooled, &params.dense)?;
    let eye = input.tape().constant(Tensor::identity(m));
    Ok(flat.reshape(m, m)?.add(eye)?)
}

/// Every point row right-multiplied by the cloud's transform matrix.
pub fn feature_transform<'t>(input: Var<'t>, params: &FeatureTransform<Var<'t>>) -> Result<Var<'t>> {
    let t = transform_matrix(input, params)?;
    Ok(input.matmul(t)?)
}

/// `S_L`: per-point local features of width 32.
pub fn local_extractor<'t>(stacked: Var<'t>, params: &LocalExtractor<Var<'t>>) -> Result<Var<'t>> {
    let x = feature_transform(stacked, &params.input_transform)?;
    let x = matrix_mlp(x, &params.mlp1)?;
    let x = feature_transform(x, &params.feature_transform)?;
    matrix_mlp(x, &params.mlp2)
}

/// `S_G` of one domain cloud: shared MLP, feature-wise max, broadcast back.
pub fn global_extractor<'t>(local: Var<'t>, params: &Mlp<Var<'t>>) -> Result<Var<'t>> {
    let n = local.shape()[0];
    let pooled = matrix_mlp(local, params)?.max_pool_rows()?;
    Ok(pooled.broadcast_rows(n)?)
}
