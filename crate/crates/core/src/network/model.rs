//! Full model: parameters, initialization and the forward pass.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::geometry::{DomainTag, PerDomain, Point2, PointCloudSet, Rect};

use super::implicit::{ImplicitCode, ImplicitStats, IMPLICIT_WIDTH};
use super::layers::{
    global_extractor, init_mlp, init_transform, local_extractor, matrix_mlp, LocalExtractor, Mlp,
    Network,
};
use super::NetworkError;

type Result<T> = std::result::Result<T, NetworkError>;

pub const LOCAL_WIDTH: usize = 32;
pub const GLOBAL_WIDTH: usize = 128;
pub const CRITERIA_WIDTH: usize = IMPLICIT_WIDTH + LOCAL_WIDTH + GLOBAL_WIDTH;
pub const HEAD_WIDTHS: [usize; 3] = [128, 64, 32];

/// Architecture switches that change parameter shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// 2 for (Re, Im) predictions, 1 for real-only output.
    pub output_channels: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { output_channels: 2 }
    }
}

impl Architecture {
    /// Widths list written into checkpoints.
    pub fn descriptor(&self) -> Vec<u64> {
        let mut d = vec![3, 64, 64, 32, 64, 128, CRITERIA_WIDTH as u64];
        d.extend(HEAD_WIDTHS.iter().map(|&w| w as u64));
        d.push(self.output_channels as u64);
        d
    }
}

/// Affine map of the stacked `(x, y, f)` columns into order-one inputs.
///
/// Coordinates share one scale so the geometry is not distorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputNormalization {
    pub center: [f64; 3],
    pub scale: [f64; 3],
}

impl InputNormalization {
    pub fn new(outer: &Rect, f_min: f64, f_max: f64) -> Self {
        let half = 0.5 * outer.width().max(outer.height());
        let f_half = 0.5 * (f_max - f_min);
        Self {
            center: [
                0.5 * (outer.x0 + outer.x1),
                0.5 * (outer.y0 + outer.y1),
                0.5 * (f_min + f_max),
            ],
            scale: [half, half, if f_half > 0.0 { f_half } else { 1.0 }],
        }
    }

    pub fn identity() -> Self {
        Self {
            center: [0.0; 3],
            scale: [1.0; 3],
        }
    }
}

/// Everything a checkpoint stores.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub input: InputNormalization,
    pub implicit: ImplicitStats,
    pub weights: Network<Tensor>,
}

/// Deterministic initialization: fan-in uniform weights, identity T-Nets.
pub fn init_params(
    seed: u64,
    arch: Architecture,
    input: InputNormalization,
    implicit: ImplicitStats,
) -> Result<ModelParams> {
    if !(arch.output_channels == 1 || arch.output_channels == 2) {
        return Err(NetworkError::InvalidArchitecture(format!(
            "output_channels must be 1 or 2, got {}",
            arch.output_channels
        )));
    }
    if implicit.width() != IMPLICIT_WIDTH {
        return Err(NetworkError::LengthMismatch {
            what: "implicit statistics",
            expected: IMPLICIT_WIDTH,
            got: implicit.width(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let local = LocalExtractor {
        input_transform: init_transform(&mut rng, 3),
        mlp1: init_mlp(&mut rng, &[3, 64, 64], false),
        feature_transform: init_transform(&mut rng, 64),
        mlp2: init_mlp(&mut rng, &[64, LOCAL_WIDTH], false),
    };
    let global = init_mlp(&mut rng, &[LOCAL_WIDTH, 64, GLOBAL_WIDTH], false);
    let head_widths = [
        CRITERIA_WIDTH,
        HEAD_WIDTHS[0],
        HEAD_WIDTHS[1],
        HEAD_WIDTHS[2],
        arch.output_channels,
    ];
    let heads = [
        init_mlp(&mut rng, &head_widths, true),
        init_mlp(&mut rng, &head_widths, true),
        init_mlp(&mut rng, &head_widths, true),
    ];
    Ok(ModelParams {
        arch,
        input,
        implicit,
        weights: Network {
            local,
            global,
            heads,
        },
    })
}

impl ModelParams {
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.weights.leaves()
    }

    /// Visits every parameter tensor mutably, with its declaration index.
    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(usize, &mut Tensor)) {
        let mut i = 0;
        self.weights.for_each_mut(|t| {
            f(i, t);
            i += 1;
        });
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Registers every parameter as a differentiable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Network<Var<'t>> {
        self.weights.map(|t| tape.variable(t.clone()))
    }

    /// Predicted scattered pressure per domain for one condition.
    pub fn predict(
        &self,
        cloud: &PointCloudSet,
        f_hz: f64,
        code: &ImplicitCode,
    ) -> Result<PerDomain<Vec<Complex64>>> {
        let (stacked, counts) = StackedPointCloud::from_cloud(cloud, f_hz);
        let tape = Tape::new();
        let fwd = forward(&tape, self, &stacked.to_tensor()?, &counts, code)?;
        Ok(fwd.predictions.map(|_, p| match p {
            Some(v) => channels_to_complex(&v.value()),
            None => vec![],
        }))
    }
}

/// `N x 1` (real only) or `N x 2` (Re, Im) rows as complex numbers.
pub fn channels_to_complex(t: &Tensor) -> Vec<Complex64> {
    let c = t.cols();
    (0..t.rows())
        .map(|i| Complex64::new(t.get(i, 0), if c > 1 { t.get(i, 1) } else { 0.0 }))
        .collect()
}

/// Rows `(x, y, f)`: coordinates in meters, frequency in Hz.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StackedPointCloud {
    pub rows: Vec<[f64; 3]>,
}

/// Columnwise concatenation of coordinates and the explicit quantity.
pub fn stack_quantities(coords: &[Point2], q: &[f64]) -> Result<StackedPointCloud> {
    if coords.len() != q.len() {
        return Err(NetworkError::LengthMismatch {
            what: "explicit quantity",
            expected: coords.len(),
            got: q.len(),
        });
    }
    Ok(StackedPointCloud {
        rows: coords.iter().zip(q).map(|(p, &f)| [p.x, p.y, f]).collect(),
    })
}

impl StackedPointCloud {
    /// Union of the three domain clouds (interior, radiation, coupling)
    /// with `f` broadcast to every point.
    pub fn from_cloud(cloud: &PointCloudSet, f_hz: f64) -> (Self, PerDomain<usize>) {
        let mut rows = Vec::with_capacity(cloud.total());
        for tag in DomainTag::ALL {
            rows.extend(cloud.points(tag).iter().map(|p| [p.x, p.y, f_hz]));
        }
        (Self { rows }, cloud.counts())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        if self.rows.is_empty() {
            return Err(NetworkError::EmptyCloud);
        }
        Ok(Tensor::matrix(
            self.rows.len(),
            3,
            self.rows.iter().flatten().copied().collect(),
        )?)
    }
}

/// Handles into one recorded forward pass.
pub struct Forward<'t> {
    /// Stacked `(x, y, f)` leaf; seed second-derivative sweeps here.
    pub stacked: Var<'t>,
    pub local: Var<'t>,
    pub criteria: PerDomain<Option<Var<'t>>>,
    pub predictions: PerDomain<Option<Var<'t>>>,
    pub weights: Network<Var<'t>>,
}

/// Per-domain head: `210 -> 128 -> 64 -> 32 -> out`, Mish hidden, linear output.
pub fn criteria_solver<'t>(
    criteria: Var<'t>,
    tag: DomainTag,
    heads: &[Mlp<Var<'t>>; 3],
) -> Result<Var<'t>> {
    let w = criteria.shape()[1];
    if w != CRITERIA_WIDTH {
        return Err(NetworkError::DimensionMismatch {
            op: "criteria_solver",
            expected: CRITERIA_WIDTH,
            got: w,
        });
    }
    matrix_mlp(criteria, &heads[tag.index()])
}

/// Stack -> local -> per-domain global -> concat(S_p, S_L, S_G) -> heads.
///
/// `stacked` holds the union of domain clouds in tag order with
/// `counts[tag]` rows each. Empty domains produce no prediction.
pub fn forward<'t>(
    tape: &'t Tape,
    params: &ModelParams,
    stacked: &Tensor,
    counts: &PerDomain<usize>,
    code: &ImplicitCode,
) -> Result<Forward<'t>> {
    let n: usize = counts.0.iter().sum();
    if stacked.shape() != [n, 3] {
        return Err(NetworkError::DimensionMismatch {
            op: "forward",
            expected: n,
            got: stacked.rows(),
        });
    }
    if code.as_slice().len() != IMPLICIT_WIDTH {
        return Err(NetworkError::LengthMismatch {
            what: "implicit code",
            expected: IMPLICIT_WIDTH,
            got: code.as_slice().len(),
        });
    }
    let weights = params.bind(tape);
    let x = tape.constant(stacked.clone());
    let norm = &params.input;
    let inv = Tensor::from_fn(3, 3, |i, j| if i == j { 1.0 / norm.scale[i] } else { 0.0 });
    let shift = Tensor::from_fn(1, 3, |_, j| -norm.center[j] / norm.scale[j]);
    let normalized = x.matmul(tape.constant(inv))?.add_row(tape.constant(shift))?;
    let local = local_extractor(normalized, &weights.local)?;

    let mut criteria = PerDomain::new(None, None, None);
    let mut predictions = PerDomain::new(None, None, None);
    let mut start = 0;
    for tag in DomainTag::ALL {
        let len = counts[tag];
        if len == 0 {
            continue;
        }
        let s_l = local.slice_rows(start, start + len)?;
        start += len;
        let s_g = global_extractor(s_l, &weights.global)?;
        let s_p = tape.constant(Tensor::from_fn(len, IMPLICIT_WIDTH, |_, j| code.as_slice()[j]));
        let c = Var::concat_cols(&[s_p, s_l, s_g])?;
        predictions[tag] = Some(criteria_solver(c, tag, &weights.heads)?);
        criteria[tag] = Some(c);
    }
    Ok(Forward {
        stacked: x,
        local,
        criteria,
        predictions,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_case_geometry, CaseConfig};
    use crate::network::encode_implicit;

    fn stats() -> ImplicitStats {
        ImplicitStats::from_intervals(&[(0.0, 1.0); IMPLICIT_WIDTH]).unwrap()
    }

    fn model(seed: u64) -> ModelParams {
        let outer = Rect::new(0.0, 1.0, 0.0, 1.0);
        init_params(seed, Architecture::default(), InputNormalization::new(&outer, 300.0, 500.0), stats())
            .unwrap()
    }

    fn code() -> ImplicitCode {
        encode_implicit(&[0.25; IMPLICIT_WIDTH], &stats()).unwrap()
    }

    #[test]
    fn stacking() {
        let s = stack_quantities(&[Point2::new(1.0, 2.0)], &[300.0]).unwrap();
        assert_eq!(s.rows, vec![[1.0, 2.0, 300.0]]);
        assert!(stack_quantities(&[], &[]).unwrap().is_empty());
        assert!(stack_quantities(&[Point2::new(0.0, 0.0)], &[]).is_err());
        let cloud = build_case_geometry(&CaseConfig::case1(), 0).unwrap();
        let (s, _) = StackedPointCloud::from_cloud(&cloud, 300.0);
        let t = s.to_tensor().unwrap();
        assert_eq!(t.shape(), &[1623, 3]);
        assert!((0..t.rows()).all(|i| t.get(i, 2) == 300.0));
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(model(3), model(3));
        assert_ne!(model(3), model(4));
    }

    #[test]
    fn criteria_width_and_single_point() {
        let params = model(1);
        let tape = Tape::new();
        let stacked = Tensor::matrix(1, 3, vec![0.5, 0.5, 400.0]).unwrap();
        let fwd = forward(&tape, &params, &stacked, &PerDomain::new(1, 0, 0), &code()).unwrap();
        let c = fwd.criteria[DomainTag::PressureAcoustic].unwrap();
        assert_eq!(c.shape(), vec![1, CRITERIA_WIDTH]);
        let p = fwd.predictions[DomainTag::PressureAcoustic].unwrap().value();
        assert_eq!(p.shape(), &[1, 2]);
        assert!(p.is_finite());
        assert!(fwd.predictions[DomainTag::PlaneWaveRadiation].is_none());
    }

    #[test]
    fn zero_final_layer_predicts_zero() {
        let mut params = model(2);
        for head in &mut params.weights.heads {
            let last = head.layers.last_mut().unwrap();
            last.weight = last.weight.map(|_| 0.0);
            last.bias = last.bias.map(|_| 0.0);
        }
        let tape = Tape::new();
        let stacked = Tensor::from_fn(4, 3, |i, j| if j == 2 { 350.0 } else { 0.2 * i as f64 });
        let fwd = forward(&tape, &params, &stacked, &PerDomain::new(2, 1, 1), &code()).unwrap();
        for tag in DomainTag::ALL {
            let p = fwd.predictions[tag].unwrap().value();
            assert!(p.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn heads_are_independent() {
        let base = model(5);
        let mut changed = base.clone();
        changed.weights.heads[2].layers[0].bias = changed.weights.heads[2].layers[0].bias.map(|v| v + 1.0);
        let stacked = Tensor::from_fn(6, 3, |i, j| if j == 2 { 350.0 } else { 0.1 * (i + j) as f64 });
        let counts = PerDomain::new(2, 2, 2);
        let run = |p: &ModelParams| {
            let tape = Tape::new();
            let fwd = forward(&tape, p, &stacked, &counts, &code()).unwrap();
            fwd.predictions.map(|_, v| v.unwrap().value())
        };
        let (a, b) = (run(&base), run(&changed));
        assert_eq!(a[DomainTag::PressureAcoustic], b[DomainTag::PressureAcoustic]);
        assert_eq!(a[DomainTag::PlaneWaveRadiation], b[DomainTag::PlaneWaveRadiation]);
        assert_ne!(a[DomainTag::AcousticStructureCoupling], b[DomainTag::AcousticStructureCoupling]);
    }

    #[test]
    fn frequency_sensitivity_is_nonzero() {
        let params = model(6);
        let tape = Tape::new();
        let stacked = Tensor::from_fn(5, 3, |i, j| if j == 2 { 420.0 } else { 0.15 * (i + 2 * j) as f64 });
        let fwd = forward(&tape, &params, &stacked, &PerDomain::new(5, 0, 0), &code()).unwrap();
        let out = fwd.predictions[DomainTag::PressureAcoustic].unwrap();
        let tangent = Tensor::from_fn(5, 3, |_, j| if j == 2 { 1.0 } else { 0.0 });
        let jet = tape.push_forward(fwd.stacked, tangent, &[out]).unwrap()[0];
        assert!(jet.first.unwrap().value().max_abs() > 0.0);
    }

    #[test]
    fn repeated_forward_is_bit_identical() {
        let params = model(7);
        let cloud = build_case_geometry(&CaseConfig::manufactured(40, 0), 1).unwrap();
        let a = params.predict(&cloud, 400.0, &code()).unwrap();
        let b = params.predict(&cloud, 400.0, &code()).unwrap();
        assert_eq!(a, b);
    }
}
