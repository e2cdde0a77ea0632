//! Wengert tape over rank-2 tensors.
//!
//! Values are computed eagerly when a node is recorded. The tape supports a
//! single reverse sweep ([`Tape::gradient`]), deterministic replay from the
//! leaves ([`Tape::replay`]), and a second-order forward sweep
//! ([`Tape::push_forward`]) that records the tangent computations as new
//! nodes, so that quantities built from second derivatives can themselves be
//! differentiated in reverse.

use std::cell::RefCell;
use std::collections::HashMap;

use super::scalar::{UnaryFn, MAX_DERIVATIVE_ORDER};
use super::tensor::{gemm, Tensor};
use super::AutodiffError;

type Result<T> = std::result::Result<T, AutodiffError>;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Offset(usize, f64),
    MatMul(usize, usize),
    Unary { input: usize, f: UnaryFn, order: u8 },
    MaxPoolRows(usize),
    GatherRows { src: usize, index: usize },
    BroadcastRows { input: usize, rows: usize },
    ConcatCols(Vec<usize>),
    SliceCols { input: usize, start: usize, end: usize },
    SliceRows { input: usize, start: usize, end: usize },
    ConcatRows(Vec<usize>),
    Reshape { input: usize, rows: usize, cols: usize },
    Transpose(usize),
    Sum(usize),
    Abs(usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::MatMul(..) => "matmul",
            Op::Unary { f, .. } => f.name(),
            Op::MaxPoolRows(..) => "max_pool",
            Op::GatherRows { .. } => "gather_rows",
            Op::BroadcastRows { .. } => "broadcast_rows",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols { .. } => "slice_cols",
            Op::SliceRows { .. } => "slice_rows",
            Op::ConcatRows(..) => "concat_rows",
            Op::Reshape { .. } => "reshape",
            Op::Transpose(..) => "transpose",
            Op::Sum(..) => "sum",
            Op::Abs(..) => "abs",
        }
    }

    fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::MatMul(a, b) => {
                vec![*a, *b]
            }
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::Offset(a, _)
            | Op::MaxPoolRows(a)
            | Op::Transpose(a)
            | Op::Sum(a)
            | Op::Abs(a) => vec![*a],
            Op::Unary { input, .. }
            | Op::BroadcastRows { input, .. }
            | Op::SliceCols { input, .. }
            | Op::SliceRows { input, .. }
            | Op::Reshape { input, .. } => vec![*input],
            Op::GatherRows { src, index } => vec![*src, *index],
            Op::ConcatCols(list) | Op::ConcatRows(list) => list.clone(),
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    /// Winning row per column for max-pool nodes.
    argmax: Option<Vec<usize>>,
    requires_grad: bool,
}

#[derive(Debug, Default)]
struct Inner {
    nodes: Vec<Node>,
    unary_cache: HashMap<(usize, UnaryFn, u8), usize>,
}

/// Recording of primitive tensor operations.
///
/// A tape is single-threaded. Build a fresh tape per evaluation; distinct
/// tapes share nothing.
#[derive(Debug, Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

/// First and second directional derivatives of a node; `None` means zero.
#[derive(Clone, Copy, Debug)]
pub struct Jet<'t> {
    pub first: Option<Var<'t>>,
    pub second: Option<Var<'t>>,
}

fn mismatch(op: &'static str, lhs: &Tensor, rhs: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        lhs: lhs.shape().to_vec(),
        rhs: rhs.shape().to_vec(),
    }
}

fn require_rank2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    t.dims2().ok_or_else(|| AutodiffError::ShapeMismatch {
        op,
        lhs: t.shape().to_vec(),
        rhs: vec![],
    })
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(mismatch(op, a, b));
    }
    Ok(())
}

fn max_rows(t: &Tensor) -> (Tensor, Vec<usize>) {
    let (r, c) = (t.rows(), t.cols());
    let d = t.data();
    let mut best = d[..c].to_vec();
    let mut idx = vec![0usize; c];
    for i in 1..r {
        let row = &d[i * c..(i + 1) * c];
        for j in 0..c {
            // strict comparison keeps the lowest index on ties
            if row[j] > best[j] {
                best[j] = row[j];
                idx[j] = i;
            }
        }
    }
    (Tensor::matrix(1, c, best).expect("non-empty"), idx)
}

fn gather_rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let c = t.cols();
    let data = idx.iter().enumerate().map(|(j, &i)| t.get(i, j)).collect();
    Tensor::matrix(1, c, data).expect("non-empty")
}

fn scatter_rows(g: &Tensor, idx: &[usize], rows: usize) -> Tensor {
    let c = g.cols();
    let mut out = Tensor::zeros(rows, c);
    for (j, &i) in idx.iter().enumerate() {
        let v = out.get(i, j) + g.get(0, j);
        out.set(i, j, v);
    }
    out
}

fn compute(op: &Op, nodes: &[Node]) -> Result<(Tensor, Option<Vec<usize>>)> {
    let v = |i: usize| &nodes[i].value;
    let out = match op {
        Op::Leaf => unreachable!("leaves carry their own value"),
        Op::Add(a, b) => {
            same_shape("add", v(*a), v(*b))?;
            v(*a).zip_map(v(*b), |x, y| x + y)
        }
        Op::Sub(a, b) => {
            same_shape("sub", v(*a), v(*b))?;
            v(*a).zip_map(v(*b), |x, y| x - y)
        }
        Op::Mul(a, b) => {
            same_shape("mul", v(*a), v(*b))?;
            v(*a).zip_map(v(*b), |x, y| x * y)
        }
        Op::Div(a, b) => {
            same_shape("div", v(*a), v(*b))?;
            v(*a).zip_map(v(*b), |x, y| x / y)
        }
        Op::Neg(a) => v(*a).map(|x| -x),
        Op::Scale(a, c) => {
            let c = *c;
            v(*a).map(|x| c * x)
        }
        Op::Offset(a, c) => {
            let c = *c;
            v(*a).map(|x| x + c)
        }
        Op::MatMul(a, b) => {
            let (_, k) = require_rank2("matmul", v(*a))?;
            let (k2, _) = require_rank2("matmul", v(*b))?;
            if k != k2 {
                return Err(mismatch("matmul", v(*a), v(*b)));
            }
            gemm(v(*a), false, v(*b), false)
        }
        Op::Unary { input, f, order } => {
            let (f, order) = (*f, *order);
            if order > MAX_DERIVATIVE_ORDER {
                return Err(AutodiffError::UnsupportedPrimitive {
                    primitive: f.name(),
                    detail: format!("derivative order {order}"),
                });
            }
            v(*input).map(|x| f.derivative(order, x).expect("order checked"))
        }
        Op::MaxPoolRows(a) => {
            require_rank2("max_pool", v(*a))?;
            let (t, idx) = max_rows(v(*a));
            return Ok((t, Some(idx)));
        }
        Op::GatherRows { src, index } => {
            let idx = nodes[*index].argmax.as_ref().ok_or_else(|| {
                AutodiffError::UnsupportedPrimitive {
                    primitive: "gather_rows",
                    detail: "index node is not a max-pool".into(),
                }
            })?;
            if idx.len() != v(*src).cols() {
                return Err(mismatch("gather_rows", v(*src), v(*index)));
            }
            gather_rows(v(*src), idx)
        }
        Op::BroadcastRows { input, rows } => {
            let (r, c) = require_rank2("broadcast_rows", v(*input))?;
            if r != 1 {
                return Err(mismatch("broadcast_rows", v(*input), &Tensor::zeros(1, c)));
            }
            let row = v(*input).data();
            let mut data = Vec::with_capacity(rows * c);
            for _ in 0..*rows {
                data.extend_from_slice(row);
            }
            Tensor::matrix(*rows, c, data)?
        }
        Op::ConcatCols(list) => {
            let rows = v(list[0]).rows();
            let mut widths = Vec::with_capacity(list.len());
            for &i in list {
                let (r, c) = require_rank2("concat_cols", v(i))?;
                if r != rows {
                    return Err(mismatch("concat_cols", v(list[0]), v(i)));
                }
                widths.push(c);
            }
            let total: usize = widths.iter().sum();
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for (&i, &c) in list.iter().zip(&widths) {
                    data.extend_from_slice(&v(i).data()[r * c..(r + 1) * c]);
                }
            }
            Tensor::matrix(rows, total, data)?
        }
        Op::SliceCols { input, start, end } => {
            let (r, c) = require_rank2("slice_cols", v(*input))?;
            if start >= end || *end > c {
                return Err(AutodiffError::ShapeMismatch {
                    op: "slice_cols",
                    lhs: vec![r, c],
                    rhs: vec![*start, *end],
                });
            }
            let d = v(*input).data();
            let w = end - start;
            let mut data = Vec::with_capacity(r * w);
            for i in 0..r {
                data.extend_from_slice(&d[i * c + start..i * c + end]);
            }
            Tensor::matrix(r, w, data)?
        }
        Op::SliceRows { input, start, end } => {
            let (r, c) = require_rank2("slice_rows", v(*input))?;
            if start >= end || *end > r {
                return Err(AutodiffError::ShapeMismatch {
                    op: "slice_rows",
                    lhs: vec![r, c],
                    rhs: vec![*start, *end],
                });
            }
            Tensor::matrix(end - start, c, v(*input).data()[start * c..end * c].to_vec())?
        }
        Op::ConcatRows(list) => {
            let cols = v(list[0]).cols();
            let mut rows = 0;
            for &i in list {
                let (r, c) = require_rank2("concat_rows", v(i))?;
                if c != cols {
                    return Err(mismatch("concat_rows", v(list[0]), v(i)));
                }
                rows += r;
            }
            let mut data = Vec::with_capacity(rows * cols);
            for &i in list {
                data.extend_from_slice(v(i).data());
            }
            Tensor::matrix(rows, cols, data)?
        }
        Op::Reshape { input, rows, cols } => {
            if v(*input).len() != rows * cols {
                return Err(AutodiffError::ShapeMismatch {
                    op: "reshape",
                    lhs: v(*input).shape().to_vec(),
                    rhs: vec![*rows, *cols],
                });
            }
            v(*input).reshaped(*rows, *cols)?
        }
        Op::Transpose(a) => {
            require_rank2("transpose", v(*a))?;
            v(*a).transpose()
        }
        Op::Sum(a) => Tensor::scalar(v(*a).data().iter().sum()),
        Op::Abs(a) => v(*a).map(f64::abs),
    };
    Ok((out, None))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push_leaf(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op: Op::Leaf,
            value,
            argmax: None,
            requires_grad,
        });
        Var { tape: self, id }
    }

    /// Differentiable input.
    pub fn variable(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(value, true)
    }

    /// Input treated as a constant by [`Tape::gradient`].
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(value, false)
    }

    fn push(&self, op: Op) -> Result<Var<'_>> {
        let (value, argmax, requires_grad) = {
            let inner = self.inner.borrow();
            let (value, argmax) = compute(&op, &inner.nodes)?;
            let rg = op.inputs().iter().any(|&i| inner.nodes[i].requires_grad);
            (value, argmax, rg)
        };
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op,
            value,
            argmax,
            requires_grad,
        });
        Ok(Var { tape: self, id })
    }

    fn unary(&self, input: usize, f: UnaryFn, order: u8) -> Result<Var<'_>> {
        if let Some(&id) = self.inner.borrow().unary_cache.get(&(input, f, order)) {
            return Ok(Var { tape: self, id });
        }
        let var = self.push(Op::Unary { input, f, order })?;
        self.inner
            .borrow_mut()
            .unary_cache
            .insert((input, f, order), var.id);
        Ok(var)
    }

    /// Overwrites the value of a leaf. Call [`Tape::replay`] afterwards.
    pub fn set_value(&self, var: Var<'_>, value: Tensor) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        let node = &mut inner.nodes[var.id];
        if !matches!(node.op, Op::Leaf) {
            return Err(AutodiffError::NotALeaf { node: var.id });
        }
        if node.value.shape() != value.shape() {
            return Err(mismatch("set_value", &node.value, &value));
        }
        node.value = value;
        Ok(())
    }

    /// Recomputes every non-leaf node from the current leaf values.
    pub fn replay(&self) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        for i in 0..inner.nodes.len() {
            if matches!(inner.nodes[i].op, Op::Leaf) {
                continue;
            }
            let (value, argmax) = compute(&inner.nodes[i].op, &inner.nodes)?;
            let node = &mut inner.nodes[i];
            node.value = value;
            node.argmax = argmax;
        }
        Ok(())
    }

    /// Reverse sweep from a `1 x 1` output.
    ///
    /// Returns one gradient per entry of `wrt`, zero-filled where the output
    /// does not depend on it.
    pub fn gradient(&self, output: Var<'_>, wrt: &[Var<'_>]) -> Result<Vec<Tensor>> {
        let inner = self.inner.borrow();
        let nodes = &inner.nodes;
        let out = output.id;
        if nodes[out].value.shape() != [1, 1] {
            return Err(AutodiffError::NonScalarOutput {
                shape: nodes[out].value.shape().to_vec(),
            });
        }
        for (i, n) in nodes[..=out].iter().enumerate() {
            if !n.value.is_finite() {
                return Err(AutodiffError::NonFinite {
                    node: i,
                    op: n.op.name(),
                });
            }
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; out + 1];
        grads[out] = Some(Tensor::scalar(1.0));
        let mut keep = vec![false; out + 1];
        for w in wrt {
            if w.id <= out {
                keep[w.id] = true;
            }
        }
        for i in (0..=out).rev() {
            let g = match if keep[i] { grads[i].clone() } else { grads[i].take() } {
                Some(g) => g,
                None => continue,
            };
            let node = &nodes[i];
            let mut acc = |j: usize, contrib: Tensor| {
                if !nodes[j].requires_grad && !keep[j] {
                    return;
                }
                match &mut grads[j] {
                    Some(existing) => existing.add_assign(&contrib),
                    slot => *slot = Some(contrib),
                }
            };
            let val = |j: usize| &nodes[j].value;
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    acc(*a, g.zip_map(val(*b), |x, y| x * y));
                    acc(*b, g.zip_map(val(*a), |x, y| x * y));
                }
                Op::Div(a, b) => {
                    acc(*a, g.zip_map(val(*b), |x, y| x / y));
                    let gy = g.zip_map(&node.value, |x, y| x * y);
                    acc(*b, gy.zip_map(val(*b), |x, y| -x / y));
                }
                Op::Neg(a) => acc(*a, g.map(|x| -x)),
                Op::Scale(a, c) => {
                    let c = *c;
                    acc(*a, g.map(|x| c * x));
                }
                Op::Offset(a, _) => acc(*a, g),
                Op::MatMul(a, b) => {
                    if nodes[*a].requires_grad || keep[*a] {
                        acc(*a, gemm(&g, false, val(*b), true));
                    }
                    if nodes[*b].requires_grad || keep[*b] {
                        acc(*b, gemm(val(*a), true, &g, false));
                    }
                }
                Op::Unary { input, f, order } => {
                    let (f, next) = (*f, order + 1);
                    if next > MAX_DERIVATIVE_ORDER {
                        return Err(AutodiffError::UnsupportedPrimitive {
                            primitive: f.name(),
                            detail: format!("derivative order {next}"),
                        });
                    }
                    let d = val(*input).map(|x| f.derivative(next, x).expect("order checked"));
                    acc(*input, g.zip_map(&d, |x, y| x * y));
                }
                Op::MaxPoolRows(a) => {
                    let idx = node.argmax.as_ref().expect("max-pool records argmax");
                    acc(*a, scatter_rows(&g, idx, val(*a).rows()));
                }
                Op::GatherRows { src, index } => {
                    let idx = nodes[*index].argmax.as_ref().expect("checked at record");
                    acc(*src, scatter_rows(&g, idx, val(*src).rows()));
                }
                Op::BroadcastRows { input, .. } => {
                    let c = g.cols();
                    let mut sums = vec![0.0; c];
                    for r in 0..g.rows() {
                        for (j, s) in sums.iter_mut().enumerate() {
                            *s += g.get(r, j);
                        }
                    }
                    acc(*input, Tensor::matrix(1, c, sums)?);
                }
                Op::ConcatCols(list) => {
                    let mut start = 0;
                    let rows = g.rows();
                    let total = g.cols();
                    for &j in list {
                        let w = val(j).cols();
                        let mut data = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            data.extend_from_slice(&g.data()[r * total + start..r * total + start + w]);
                        }
                        acc(j, Tensor::matrix(rows, w, data)?);
                        start += w;
                    }
                }
                Op::SliceCols { input, start, end } => {
                    let (r, c) = (val(*input).rows(), val(*input).cols());
                    let mut out = Tensor::zeros(r, c);
                    let w = end - start;
                    for i in 0..r {
                        for k in 0..w {
                            out.set(i, start + k, g.get(i, k));
                        }
                    }
                    acc(*input, out);
                }
                Op::SliceRows { input, start, .. } => {
                    let (r, c) = (val(*input).rows(), val(*input).cols());
                    let mut out = Tensor::zeros(r, c);
                    out.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                    acc(*input, out);
                }
                Op::ConcatRows(list) => {
                    let c = g.cols();
                    let mut start = 0;
                    for &j in list {
                        let r = val(j).rows();
                        acc(j, Tensor::matrix(r, c, g.data()[start * c..(start + r) * c].to_vec())?);
                        start += r;
                    }
                }
                Op::Reshape { input, .. } => {
                    let s = val(*input).shape().to_vec();
                    acc(*input, Tensor::new(s, g.into_data())?);
                }
                Op::Transpose(a) => acc(*a, g.transpose()),
                Op::Sum(a) => {
                    let s = val(*a);
                    acc(*a, Tensor::full(s.rows(), s.cols(), g.item()));
                }
                Op::Abs(a) => {
                    acc(*a, g.zip_map(val(*a), |x, y| x * sign(y)));
                }
            }
        }
        Ok(wrt
            .iter()
            .map(|w| {
                grads
                    .get(w.id)
                    .and_then(|g| g.clone())
                    .unwrap_or_else(|| {
                        let s = &nodes[w.id].value;
                        Tensor::zeros(s.rows(), s.cols())
                    })
            })
            .collect())
    }

    /// Second-order forward sweep along `tangent` at `seed`.
    ///
    /// For every node between `seed` and the last of `outputs`, records the
    /// first and second directional derivatives as new nodes on this tape.
    /// `seed` is assumed to move linearly, so its second tangent is zero.
    pub fn push_forward<'t>(
        &'t self,
        seed: Var<'t>,
        tangent: Tensor,
        outputs: &[Var<'t>],
    ) -> Result<Vec<Jet<'t>>> {
        {
            let inner = self.inner.borrow();
            if inner.nodes[seed.id].value.shape() != tangent.shape() {
                return Err(mismatch("push_forward", &inner.nodes[seed.id].value, &tangent));
            }
        }
        let last = outputs.iter().map(|v| v.id).max().unwrap_or(seed.id);
        let seed_t = self.constant(tangent);
        let mut jets: Vec<Option<(Option<Var<'t>>, Option<Var<'t>>)>> = vec![None; last + 1];
        jets[seed.id] = Some((Some(seed_t), None));
        for i in seed.id + 1..=last {
            let op = self.inner.borrow().nodes[i].op.clone();
            let inputs = op.inputs();
            if !inputs.iter().any(|&j| jets[j].is_some()) {
                continue;
            }
            let t = |j: usize| jets[j].and_then(|x| x.0);
            let s = |j: usize| jets[j].and_then(|x| x.1);
            let var = |j: usize| Var { tape: self, id: j };
            let node = var(i);
            let jet = match &op {
                Op::Leaf => continue,
                Op::Add(a, b) => (add_o(t(*a), t(*b))?, add_o(s(*a), s(*b))?),
                Op::Sub(a, b) => (sub_o(t(*a), t(*b))?, sub_o(s(*a), s(*b))?),
                Op::Neg(a) => (map_o(t(*a), |x| x.neg())?, map_o(s(*a), |x| x.neg())?),
                Op::Scale(a, c) => {
                    let c = *c;
                    (map_o(t(*a), |x| x.scale(c))?, map_o(s(*a), |x| x.scale(c))?)
                }
                Op::Offset(a, _) => (t(*a), s(*a)),
                Op::Mul(a, b) => {
                    let (a, b) = (var(*a), var(*b));
                    let ta = t(a.id);
                    let tb = t(b.id);
                    let first = add_o(
                        map_o(ta, |x| x.mul(b))?,
                        map_o(tb, |x| a.mul(x))?,
                    )?;
                    let cross = match (ta, tb) {
                        (Some(x), Some(y)) => Some(x.mul(y)?.scale(2.0)?),
                        _ => None,
                    };
                    let second = add_o(
                        add_o(map_o(s(a.id), |x| x.mul(b))?, cross)?,
                        map_o(s(b.id), |x| a.mul(x))?,
                    )?;
                    (first, second)
                }
                Op::Div(a, b) => {
                    let b = var(*b);
                    let tb = t(b.id);
                    let first = map_o(
                        sub_o(t(*a), map_o(tb, |x| node.mul(x))?)?,
                        |x| x.div(b),
                    )?;
                    let cross = match (first, tb) {
                        (Some(x), Some(y)) => Some(x.mul(y)?.scale(2.0)?),
                        _ => None,
                    };
                    let second = map_o(
                        sub_o(sub_o(s(*a), cross)?, map_o(s(b.id), |x| node.mul(x))?)?,
                        |x| x.div(b),
                    )?;
                    (first, second)
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (var(*a), var(*b));
                    let ta = t(a.id);
                    let tb = t(b.id);
                    let first = add_o(
                        map_o(ta, |x| x.matmul(b))?,
                        map_o(tb, |x| a.matmul(x))?,
                    )?;
                    let cross = match (ta, tb) {
                        (Some(x), Some(y)) => Some(x.matmul(y)?.scale(2.0)?),
                        _ => None,
                    };
                    let second = add_o(
                        add_o(map_o(s(a.id), |x| x.matmul(b))?, cross)?,
                        map_o(s(b.id), |x| a.matmul(x))?,
                    )?;
                    (first, second)
                }
                Op::Unary { input, f, order } => {
                    let (f, order) = (*f, *order);
                    if order + 2 > MAX_DERIVATIVE_ORDER {
                        return Err(AutodiffError::UnsupportedPrimitive {
                            primitive: f.name(),
                            detail: format!("forward sweep needs derivative order {}", order + 2),
                        });
                    }
                    let d1 = self.unary(*input, f, order + 1)?;
                    let ti = t(*input);
                    let first = map_o(ti, |x| d1.mul(x))?;
                    let curv = match ti {
                        Some(x) => {
                            let d2 = self.unary(*input, f, order + 2)?;
                            Some(d2.mul(x.mul(x)?)?)
                        }
                        None => None,
                    };
                    let second = add_o(map_o(s(*input), |x| d1.mul(x))?, curv)?;
                    (first, second)
                }
                Op::MaxPoolRows(a) => (
                    map_o(t(*a), |x| x.gather_rows(node))?,
                    map_o(s(*a), |x| x.gather_rows(node))?,
                ),
                Op::GatherRows { src, index } => {
                    let index = var(*index);
                    (
                        map_o(t(*src), |x| x.gather_rows(index))?,
                        map_o(s(*src), |x| x.gather_rows(index))?,
                    )
                }
                Op::BroadcastRows { input, rows } => {
                    let rows = *rows;
                    (
                        map_o(t(*input), |x| x.broadcast_rows(rows))?,
                        map_o(s(*input), |x| x.broadcast_rows(rows))?,
                    )
                }
                Op::ConcatCols(list) => {
                    let cat = |pick: &dyn Fn(usize) -> Option<Var<'t>>| -> Result<Option<Var<'t>>> {
                        if list.iter().all(|&j| pick(j).is_none()) {
                            return Ok(None);
                        }
                        let parts = list
                            .iter()
                            .map(|&j| match pick(j) {
                                Some(v) => v,
                                None => {
                                    let shape = var(j).shape();
                                    self.constant(Tensor::zeros(shape[0], shape[1]))
                                }
                            })
                            .collect::<Vec<_>>();
                        Var::concat_cols(&parts).map(Some)
                    };
                    (cat(&t)?, cat(&s)?)
                }
                Op::SliceCols { input, start, end } => {
                    let (st, en) = (*start, *end);
                    (
                        map_o(t(*input), |x| x.slice_cols(st, en))?,
                        map_o(s(*input), |x| x.slice_cols(st, en))?,
                    )
                }
                Op::SliceRows { input, start, end } => {
                    let (st, en) = (*start, *end);
                    (
                        map_o(t(*input), |x| x.slice_rows(st, en))?,
                        map_o(s(*input), |x| x.slice_rows(st, en))?,
                    )
                }
                Op::ConcatRows(list) => {
                    let cat = |pick: &dyn Fn(usize) -> Option<Var<'t>>| -> Result<Option<Var<'t>>> {
                        if list.iter().all(|&j| pick(j).is_none()) {
                            return Ok(None);
                        }
                        let parts = list
                            .iter()
                            .map(|&j| match pick(j) {
                                Some(v) => v,
                                None => {
                                    let shape = var(j).shape();
                                    self.constant(Tensor::zeros(shape[0], shape[1]))
                                }
                            })
                            .collect::<Vec<_>>();
                        Var::concat_rows(&parts).map(Some)
                    };
                    (cat(&t)?, cat(&s)?)
                }
                Op::Reshape { input, rows, cols } => {
                    let (r, c) = (*rows, *cols);
                    (
                        map_o(t(*input), |x| x.reshape(r, c))?,
                        map_o(s(*input), |x| x.reshape(r, c))?,
                    )
                }
                Op::Transpose(a) => (
                    map_o(t(*a), |x| x.transpose())?,
                    map_o(s(*a), |x| x.transpose())?,
                ),
                Op::Sum(a) => (map_o(t(*a), |x| x.sum())?, map_o(s(*a), |x| x.sum())?),
                Op::Abs(_) => {
                    return Err(AutodiffError::UnsupportedPrimitive {
                        primitive: "abs",
                        detail: "no second-order tangent rule".into(),
                    })
                }
            };
            jets[i] = Some(jet);
        }
        Ok(outputs
            .iter()
            .map(|o| {
                let (first, second) = jets[o.id].unwrap_or((None, None));
                Jet { first, second }
            })
            .collect())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn add_o<'t>(a: Option<Var<'t>>, b: Option<Var<'t>>) -> Result<Option<Var<'t>>> {
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(a.add(b)?),
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b),
        (None, None) => None,
    })
}

fn sub_o<'t>(a: Option<Var<'t>>, b: Option<Var<'t>>) -> Result<Option<Var<'t>>> {
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(a.sub(b)?),
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b.neg()?),
        (None, None) => None,
    })
}

fn map_o<'t>(
    a: Option<Var<'t>>,
    f: impl FnOnce(Var<'t>) -> Result<Var<'t>>,
) -> Result<Option<Var<'t>>> {
    a.map(f).transpose()
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.inner.borrow().nodes[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.id].value.shape().to_vec()
    }

    /// Runs `f` against the stored value without cloning it.
    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.inner.borrow().nodes[self.id].value)
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.push(Op::Add(self.id, rhs.id))
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.push(Op::Sub(self.id, rhs.id))
    }

    /// Elementwise product.
    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.push(Op::Mul(self.id, rhs.id))
    }

    /// Elementwise quotient.
    pub fn div(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.push(Op::Div(self.id, rhs.id))
    }

    pub fn neg(self) -> Result<Var<'t>> {
        self.tape.push(Op::Neg(self.id))
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        self.tape.push(Op::Scale(self.id, c))
    }

    pub fn offset(self, c: f64) -> Result<Var<'t>> {
        self.tape.push(Op::Offset(self.id, c))
    }

    pub fn square(self) -> Result<Var<'t>> {
        self.mul(self)
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.push(Op::MatMul(self.id, rhs.id))
    }

    pub fn apply(self, f: UnaryFn) -> Result<Var<'t>> {
        self.tape.unary(self.id, f, 0)
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.apply(UnaryFn::Exp)
    }

    pub fn ln1p(self) -> Result<Var<'t>> {
        self.apply(UnaryFn::Ln1p)
    }

    pub fn tanh(self) -> Result<Var<'t>> {
        self.apply(UnaryFn::Tanh)
    }

    pub fn sin(self) -> Result<Var<'t>> {
        self.apply(UnaryFn::Sin)
    }

    pub fn cos(self) -> Result<Var<'t>> {
        self.apply(UnaryFn::Cos)
    }

    pub fn mish(self) -> Result<Var<'t>> {
        self.apply(UnaryFn::Mish)
    }

    /// Feature-wise maximum over rows (`N x m -> 1 x m`), lowest row wins ties.
    pub fn max_pool_rows(self) -> Result<Var<'t>> {
        self.tape.push(Op::MaxPoolRows(self.id))
    }

    /// Picks, per column, the row that won the max-pool `index`.
    pub fn gather_rows(self, index: Var<'t>) -> Result<Var<'t>> {
        self.tape.push(Op::GatherRows {
            src: self.id,
            index: index.id,
        })
    }

    /// Repeats a `1 x m` row `rows` times.
    pub fn broadcast_rows(self, rows: usize) -> Result<Var<'t>> {
        self.tape.push(Op::BroadcastRows {
            input: self.id,
            rows,
        })
    }

    /// Adds a `1 x m` row to every row of `self`.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let n = self.shape()[0];
        self.add(row.broadcast_rows(n)?)
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts.first().ok_or(AutodiffError::ShapeMismatch {
            op: "concat_cols",
            lhs: vec![],
            rhs: vec![],
        })?;
        first
            .tape
            .push(Op::ConcatCols(parts.iter().map(|p| p.id).collect()))
    }

    pub fn slice_cols(self, start: usize, end: usize) -> Result<Var<'t>> {
        self.tape.push(Op::SliceCols {
            input: self.id,
            start,
            end,
        })
    }

    pub fn slice_rows(self, start: usize, end: usize) -> Result<Var<'t>> {
        self.tape.push(Op::SliceRows {
            input: self.id,
            start,
            end,
        })
    }

    pub fn concat_rows(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts.first().ok_or(AutodiffError::ShapeMismatch {
            op: "concat_rows",
            lhs: vec![],
            rhs: vec![],
        })?;
        first
            .tape
            .push(Op::ConcatRows(parts.iter().map(|p| p.id).collect()))
    }

    pub fn reshape(self, rows: usize, cols: usize) -> Result<Var<'t>> {
        self.tape.push(Op::Reshape {
            input: self.id,
            rows,
            cols,
        })
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        self.tape.push(Op::Transpose(self.id))
    }

    /// Sum of all elements, as `1 x 1`.
    pub fn sum(self) -> Result<Var<'t>> {
        self.tape.push(Op::Sum(self.id))
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let n = self.with_value(|t| t.len()) as f64;
        self.sum()?.scale(1.0 / n)
    }

    pub fn abs(self) -> Result<Var<'t>> {
        self.tape.push(Op::Abs(self.id))
    }
}
