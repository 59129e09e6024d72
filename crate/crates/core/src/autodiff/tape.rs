use std::cell::RefCell;
use std::f64::consts::TAU;
use std::rc::Rc;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{AutodiffError, Tensor};

type Result<T> = std::result::Result<T, AutodiffError>;

pub(crate) type NodeId = usize;

/// Primitive operations recorded on a [`Tape`]. Each variant carries what
/// its adjoint needs beyond the parent and output values.
#[derive(Clone)]
pub(crate) enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Sum,
    Mean,
    Concat { axis: usize },
    Slice { axis: usize, start: usize },
    Reshape,
    Broadcast,
    Sin,
    Exp,
    Log,
    Pow(f64),
    Abs,
    Sigmoid,
    Tanh,
    Softmax,
    Cumsum,
    Scale(f64),
    AddScalar,
    LeakyRelu(f64),
    LayerNorm { inv_std: Rc<Vec<f64>> },
    WrapPhase,
    Frame { hop: usize },
    Rfft { n: usize, inverse: Arc<dyn Fft<f64>> },
    ComplexAbs,
    Upsample { hop: usize },
    HarmonicBank { active: Rc<Vec<u16>> },
    FrameConvolve(Rc<ConvolveSpec>),
}

/// Constant side of the per-frame convolution: one excitation segment per
/// frame, overlap-added at `hop` spacing.
pub(crate) struct ConvolveSpec {
    pub segments: Vec<f64>,
    pub segment_len: usize,
    pub hop: usize,
    pub out_len: usize,
}

impl ConvolveSpec {
    /// Output index of excitation sample `j` convolved with tap `t` in frame
    /// `f`, before bounds checks. Segments are centered on `f * hop` and the
    /// filter delay `(taps - 1) / 2` is removed.
    #[inline]
    fn offset(&self, f: usize, taps: usize) -> isize {
        (f * self.hop) as isize - (self.segment_len / 2) as isize - ((taps - 1) / 2) as isize
    }
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    parents: Vec<NodeId>,
    requires_grad: bool,
}

/// Append-only record of eagerly evaluated operations.
///
/// Values are computed when an operation is recorded; [`Tape::backward`]
/// walks the nodes in reverse insertion order, which is a valid reverse
/// topological order because parents are always recorded first.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: NodeId,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a differentiable leaf.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, Vec::new(), true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, Vec::new(), false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    fn push(&self, value: Tensor, op: Op, parents: Vec<NodeId>, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        debug_assert!(parents.iter().all(|&p| p < id));
        nodes.push(Node {
            value: Rc::new(value),
            op,
            parents,
            requires_grad,
        });
        Var { tape: self, id }
    }

    fn record(&self, value: Tensor, op: Op, parents: &[Var<'_>]) -> Var<'_> {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.id].requires_grad)
        };
        self.push(value, op, parents.iter().map(|p| p.id).collect(), requires_grad)
    }

    fn value_of(&self, id: NodeId) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Reverse-mode sweep from a scalar output.
    pub fn backward(&self, output: &Var<'_>) -> Result<Gradients> {
        if !std::ptr::eq(output.tape, self) {
            return Err(AutodiffError::NotOnTape);
        }
        let nodes = self.nodes.borrow();
        let out_node = &nodes[output.id];
        if out_node.value.len() != 1 {
            return Err(AutodiffError::NotScalar(out_node.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.id + 1];
        grads[output.id] = Some(vec![1.0]);
        for id in (0..=output.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if node.requires_grad && !node.parents.is_empty() {
                let needs: Vec<bool> = node.parents.iter().map(|&p| nodes[p].requires_grad).collect();
                let parents: Vec<&Tensor> = node.parents.iter().map(|&p| nodes[p].value.as_ref()).collect();
                let contributions = adjoint(&node.op, &g, &node.value, &parents, &needs);
                for ((&pid, contrib), need) in node.parents.iter().zip(contributions).zip(needs) {
                    if !need {
                        continue;
                    }
                    if let Some(c) = contrib {
                        match &mut grads[pid] {
                            Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                            slot => *slot = Some(c),
                        }
                    }
                }
            }
            grads[id] = Some(g);
        }
        let shapes = nodes[..=output.id].iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

/// Gradients of a scalar output with respect to every recorded node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `var`; zero when the output does not depend on it.
    pub fn wrt(&self, var: &Var<'_>) -> Tensor {
        let shape = var.value().shape().to_vec();
        match self.grads.get(var.id).and_then(|g| g.as_ref()) {
            Some(g) => Tensor::new(self.shapes[var.id].clone(), g.clone()).expect("gradient shape"),
            None => Tensor::zeros(&shape),
        }
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
    }
}

/// Output shape for a binary elementwise op. Shapes must match, or one side
/// must be a scalar or a trailing suffix of the other (leading-dimension
/// broadcast).
fn broadcast_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Vec<usize>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa == sb {
        return Ok(sa.to_vec());
    }
    if b.len() == 1 && sb.len() <= sa.len() {
        return Ok(sa.to_vec());
    }
    if a.len() == 1 && sa.len() <= sb.len() {
        return Ok(sb.to_vec());
    }
    if sb.len() < sa.len() && sa.ends_with(sb) {
        return Ok(sa.to_vec());
    }
    if sa.len() < sb.len() && sb.ends_with(sa) {
        return Ok(sb.to_vec());
    }
    Err(shape_err(op, a, b))
}

fn zip_broadcast(a: &Tensor, b: &Tensor, len: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let (ad, bd) = (a.data(), b.data());
    let (ma, mb) = (ad.len(), bd.len());
    if ma == len && mb == len {
        return ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect();
    }
    (0..len).map(|i| f(ad[i % ma], bd[i % mb])).collect()
}

/// Sums a broadcast gradient back onto an operand of `m` elements.
fn reduce_to(g: &[f64], m: usize) -> Vec<f64> {
    if g.len() == m {
        return g.to_vec();
    }
    let mut r = vec![0.0; m];
    for (i, v) in g.iter().enumerate() {
        r[i % m] += v;
    }
    r
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn wrap_phase(x: f64) -> f64 {
    let w = x - TAU * (x / TAU).floor();
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    fn same_tape(&self, other: &Var<'_>) -> Result<()> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(AutodiffError::NotOnTape)
        }
    }

    fn binary(&self, other: Var<'t>, op: Op, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        let (a, b) = (self.value(), other.value());
        let shape = broadcast_shape(name, &a, &b)?;
        let len = shape.iter().product();
        let data = zip_broadcast(&a, &b, len, f);
        Ok(self.tape.record(Tensor::new(shape, data)?, op, &[*self, other]))
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        let v = self.value().map(f);
        self.tape.record(v, op, &[*self])
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Add, "add", |x, y| x + y)
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Sub, "sub", |x, y| x - y)
    }

    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Mul, "mul", |x, y| x * y)
    }

    pub fn div(&self, other: Var<'t>) -> Result<Var<'t>> {
        if other.value().data().iter().any(|&y| y == 0.0) {
            return Err(AutodiffError::Domain { op: "div", detail: "division by zero".into() });
        }
        self.binary(other, Op::Div, "div", |x, y| x / y)
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        let (a, b) = (self.value(), other.value());
        if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(shape_err("matmul", &a, &b));
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let data = matmul_raw(a.data(), b.data(), m, k, n);
        Ok(self.tape.record(Tensor::new(vec![m, n], data)?, Op::MatMul, &[*self, other]))
    }

    pub fn sum(&self) -> Var<'t> {
        let s = self.value().data().iter().sum();
        self.tape.record(Tensor::scalar(s), Op::Sum, &[*self])
    }

    pub fn mean(&self) -> Var<'t> {
        let v = self.value();
        let s = v.data().iter().sum::<f64>() / v.len().max(1) as f64;
        self.tape.record(Tensor::scalar(s), Op::Mean, &[*self])
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let first = parts.first().ok_or_else(|| AutodiffError::ShapeMismatch {
            op: "concat",
            detail: "no inputs".into(),
        })?;
        let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let base = values[0].shape().to_vec();
        if axis >= base.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "concat",
                detail: format!("axis {axis} out of range for {base:?}"),
            });
        }
        let mut total = 0;
        for (p, v) in parts.iter().zip(&values) {
            first.same_tape(p)?;
            let s = v.shape();
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(shape_err("concat", &values[0], v));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_split(&base, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for v in &values {
                let chunk = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        Ok(first.tape.record(Tensor::new(shape, data)?, Op::Concat { axis }, parts))
    }

    /// Takes `len` entries starting at `start` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        let v = self.value();
        let s = v.shape();
        if axis >= s.len() || start + len > s[axis] {
            return Err(AutodiffError::ShapeMismatch {
                op: "slice",
                detail: format!("axis {axis} range {start}..{} of {s:?}", start + len),
            });
        }
        let (outer, n, inner) = axis_split(s, axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * n * inner;
            data.extend_from_slice(&v.data()[base + start * inner..base + (start + len) * inner]);
        }
        let mut shape = s.to_vec();
        shape[axis] = len;
        Ok(self.tape.record(Tensor::new(shape, data)?, Op::Slice { axis, start }, &[*self]))
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Var<'t>> {
        let v = (*self.value()).clone().reshaped(shape)?;
        Ok(self.tape.record(v, Op::Reshape, &[*self]))
    }

    /// Repeats the value over new leading dimensions (or a scalar everywhere).
    pub fn broadcast(&self, shape: &[usize]) -> Result<Var<'t>> {
        let v = self.value();
        if !(v.len() == 1 || shape.ends_with(v.shape())) {
            return Err(AutodiffError::ShapeMismatch {
                op: "broadcast",
                detail: format!("{:?} -> {shape:?}", v.shape()),
            });
        }
        let len: usize = shape.iter().product();
        let m = v.len();
        let data = (0..len).map(|i| v.data()[i % m]).collect();
        Ok(self.tape.record(Tensor::new(shape.to_vec(), data)?, Op::Broadcast, &[*self]))
    }

    pub fn sin(&self) -> Var<'t> {
        self.unary(Op::Sin, f64::sin)
    }

    pub fn exp(&self) -> Var<'t> {
        self.unary(Op::Exp, f64::exp)
    }

    pub fn log(&self) -> Result<Var<'t>> {
        if self.value().data().iter().any(|&x| x <= 0.0 || x.is_nan()) {
            return Err(AutodiffError::Domain { op: "log", detail: "non-positive argument".into() });
        }
        Ok(self.unary(Op::Log, f64::ln))
    }

    pub fn pow(&self, exponent: f64) -> Result<Var<'t>> {
        let v = self.value();
        if exponent.fract() != 0.0 && v.data().iter().any(|&x| x < 0.0) {
            return Err(AutodiffError::Domain {
                op: "pow",
                detail: format!("negative base with exponent {exponent}"),
            });
        }
        if exponent < 1.0 && v.data().iter().any(|&x| x == 0.0) {
            return Err(AutodiffError::Domain {
                op: "pow",
                detail: format!("zero base with exponent {exponent}"),
            });
        }
        Ok(self.unary(Op::Pow(exponent), |x| x.powf(exponent)))
    }

    pub fn abs(&self) -> Var<'t> {
        self.unary(Op::Abs, f64::abs)
    }

    pub fn sigmoid(&self) -> Var<'t> {
        self.unary(Op::Sigmoid, sigmoid)
    }

    pub fn tanh(&self) -> Var<'t> {
        self.unary(Op::Tanh, f64::tanh)
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        self.unary(Op::Scale(c), |x| x * c)
    }

    pub fn add_scalar(&self, c: f64) -> Var<'t> {
        self.unary(Op::AddScalar, |x| x + c)
    }

    pub fn leaky_relu(&self, slope: f64) -> Var<'t> {
        self.unary(Op::LeakyRelu(slope), |x| if x > 0.0 { x } else { slope * x })
    }

    /// Softmax over the last axis.
    pub fn softmax(&self) -> Var<'t> {
        let v = self.value();
        let (rows, cols) = v.dims2();
        let mut out = vec![0.0; v.len()];
        for r in 0..rows {
            let x = &v.data()[r * cols..(r + 1) * cols];
            let o = &mut out[r * cols..(r + 1) * cols];
            let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for (oi, &xi) in o.iter_mut().zip(x) {
                *oi = (xi - m).exp();
                s += *oi;
            }
            o.iter_mut().for_each(|oi| *oi /= s);
        }
        let t = Tensor::new(v.shape().to_vec(), out).expect("same shape");
        self.tape.record(t, Op::Softmax, &[*self])
    }

    /// Inclusive prefix sum over the last axis.
    pub fn cumsum(&self) -> Var<'t> {
        let v = self.value();
        let (rows, cols) = v.dims2();
        let mut out = v.data().to_vec();
        for r in 0..rows {
            let row = &mut out[r * cols..(r + 1) * cols];
            let mut acc = 0.0;
            for x in row.iter_mut() {
                acc += *x;
                *x = acc;
            }
        }
        let t = Tensor::new(v.shape().to_vec(), out).expect("same shape");
        self.tape.record(t, Op::Cumsum, &[*self])
    }

    /// Normalizes each row (last axis) to zero mean and unit variance.
    pub fn layer_norm(&self, eps: f64) -> Var<'t> {
        let v = self.value();
        let (rows, cols) = v.dims2();
        let mut out = vec![0.0; v.len()];
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let x = &v.data()[r * cols..(r + 1) * cols];
            let mean = x.iter().sum::<f64>() / cols as f64;
            let var = x.iter().map(|xi| (xi - mean).powi(2)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (o, xi) in out[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                *o = (xi - mean) * is;
            }
        }
        let t = Tensor::new(v.shape().to_vec(), out).expect("same shape");
        self.tape.record(t, Op::LayerNorm { inv_std: Rc::new(inv_std) }, &[*self])
    }

    /// `x mod 2π` in `[0, 2π)`; the derivative is one almost everywhere.
    pub fn wrap_phase(&self) -> Var<'t> {
        self.unary(Op::WrapPhase, wrap_phase)
    }

    /// Slices a rank-1 signal into `frames` rows of `n` samples spaced by
    /// `hop`, zero-padding past the end.
    pub fn frame(&self, n: usize, hop: usize, frames: usize) -> Result<Var<'t>> {
        let v = self.value();
        if v.rank() != 1 || n == 0 || hop == 0 {
            return Err(AutodiffError::ShapeMismatch {
                op: "frame",
                detail: format!("{:?} n={n} hop={hop}", v.shape()),
            });
        }
        let x = v.data();
        let mut data = vec![0.0; frames * n];
        for f in 0..frames {
            let start = f * hop;
            if start >= x.len() {
                break;
            }
            let end = (start + n).min(x.len());
            data[f * n..f * n + (end - start)].copy_from_slice(&x[start..end]);
        }
        Ok(self.tape.record(Tensor::new(vec![frames, n], data)?, Op::Frame { hop }, &[*self]))
    }

    /// Real FFT of each row: `[rows, n] -> [rows, n/2 + 1, 2]` holding
    /// (re, im) pairs.
    pub fn rfft(&self, planner: &mut FftPlanner<f64>) -> Result<Var<'t>> {
        let v = self.value();
        if v.rank() != 2 {
            return Err(AutodiffError::ShapeMismatch {
                op: "rfft",
                detail: format!("{:?}", v.shape()),
            });
        }
        let (rows, n) = (v.shape()[0], v.shape()[1]);
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let bins = n / 2 + 1;
        let mut data = Vec::with_capacity(rows * bins * 2);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); forward.get_inplace_scratch_len()];
        for r in 0..rows {
            for (b, &x) in buf.iter_mut().zip(v.row(r)) {
                *b = Complex::new(x, 0.0);
            }
            forward.process_with_scratch(&mut buf, &mut scratch);
            for c in &buf[..bins] {
                data.push(c.re);
                data.push(c.im);
            }
        }
        Ok(self.tape.record(
            Tensor::new(vec![rows, bins, 2], data)?,
            Op::Rfft { n, inverse },
            &[*self],
        ))
    }

    /// Modulus of trailing (re, im) pairs.
    pub fn complex_abs(&self) -> Result<Var<'t>> {
        let v = self.value();
        let s = v.shape();
        if s.last() != Some(&2) {
            return Err(AutodiffError::ShapeMismatch {
                op: "complex_abs",
                detail: format!("{s:?}"),
            });
        }
        let data = v.data().chunks_exact(2).map(|c| c[0].hypot(c[1])).collect();
        let shape = s[..s.len() - 1].to_vec();
        Ok(self.tape.record(Tensor::new(shape, data)?, Op::ComplexAbs, &[*self]))
    }

    /// Linear interpolation of frame-rate rows to sample rate. Frame `i` sits
    /// at sample `i * hop`; samples past the last frame hold its value.
    pub fn upsample(&self, hop: usize) -> Result<Var<'t>> {
        let v = self.value();
        if hop == 0 || v.is_empty() {
            return Err(AutodiffError::ShapeMismatch {
                op: "upsample",
                detail: format!("{:?} hop={hop}", v.shape()),
            });
        }
        let (frames, dims) = match v.shape() {
            [f] => (*f, 1),
            [f, d] => (*f, *d),
            s => {
                return Err(AutodiffError::ShapeMismatch {
                    op: "upsample",
                    detail: format!("{s:?}"),
                })
            }
        };
        let data = upsample_linear(v.data(), frames, dims, hop);
        let mut shape = v.shape().to_vec();
        shape[0] = frames * hop;
        Ok(self.tape.record(Tensor::new(shape, data)?, Op::Upsample { hop }, &[*self]))
    }

    /// Oscillator bank: `out[n] = Σ_k amps[n, k] · sin((k + 1) · phase[n])`
    /// over the first `active[n]` harmonics.
    pub fn harmonic_bank(&self, phase: Var<'t>, active: Rc<Vec<u16>>) -> Result<Var<'t>> {
        self.same_tape(&phase)?;
        let (a, ph) = (self.value(), phase.value());
        let (n, k) = a.dims2();
        if a.rank() != 2 || ph.len() != n || active.len() != n {
            return Err(shape_err("harmonic_bank", &a, &ph));
        }
        let mut out = vec![0.0; n];
        let mut sines = vec![0.0; k];
        for i in 0..n {
            let m = (active[i] as usize).min(k);
            harmonic_sines(ph.data()[i], &mut sines[..m]);
            out[i] = a.row(i)[..m].iter().zip(&sines[..m]).map(|(x, s)| x * s).sum();
        }
        Ok(self.tape.record(
            Tensor::vector(out),
            Op::HarmonicBank { active },
            &[*self, phase],
        ))
    }

    /// Per-frame FIR filtering of constant excitation segments, overlap-added.
    /// `self` holds one impulse response per row.
    pub(crate) fn frame_convolve(&self, spec: Rc<ConvolveSpec>) -> Result<Var<'t>> {
        let ir = self.value();
        let (frames, taps) = ir.dims2();
        if ir.rank() != 2 || spec.segments.len() != frames * spec.segment_len {
            return Err(AutodiffError::ShapeMismatch {
                op: "frame_convolve",
                detail: format!("{:?} vs {} segments", ir.shape(), spec.segments.len()),
            });
        }
        let mut out = vec![0.0; spec.out_len];
        let len = spec.out_len as isize;
        for f in 0..frames {
            let h = ir.row(f);
            let seg = &spec.segments[f * spec.segment_len..(f + 1) * spec.segment_len];
            let base = spec.offset(f, taps);
            for (j, &s) in seg.iter().enumerate() {
                if s == 0.0 {
                    continue;
                }
                let start = base + j as isize;
                let t0 = (-start).max(0) as usize;
                let t1 = ((len - start).max(0) as usize).min(taps);
                for t in t0..t1 {
                    out[(start + t as isize) as usize] += s * h[t];
                }
            }
        }
        Ok(self.tape.record(Tensor::vector(out), Op::FrameConvolve(spec), &[*self]))
    }
}

/// Fills `out[k] = sin((k + 1) · phase)` using the Chebyshev recurrence.
#[inline]
pub(crate) fn harmonic_sines(phase: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let (s1, c1) = phase.sin_cos();
    let two_c = 2.0 * c1;
    let (mut prev, mut cur) = (0.0, s1);
    for o in out.iter_mut() {
        *o = cur;
        let next = two_c * cur - prev;
        prev = cur;
        cur = next;
    }
}

/// Fills `out[k] = cos((k + 1) · phase)` using the Chebyshev recurrence.
#[inline]
pub(crate) fn harmonic_cosines(phase: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let c1 = phase.cos();
    let two_c = 2.0 * c1;
    let (mut prev, mut cur) = (1.0, c1);
    for o in out.iter_mut() {
        *o = cur;
        let next = two_c * cur - prev;
        prev = cur;
        cur = next;
    }
}

pub(crate) fn upsample_linear(v: &[f64], frames: usize, dims: usize, hop: usize) -> Vec<f64> {
    let mut out = vec![0.0; frames * hop * dims];
    for i in 0..frames {
        let a = &v[i * dims..(i + 1) * dims];
        let b = if i + 1 < frames { &v[(i + 1) * dims..(i + 2) * dims] } else { a };
        for j in 0..hop {
            let frac = j as f64 / hop as f64;
            let o = &mut out[(i * hop + j) * dims..(i * hop + j + 1) * dims];
            for ((oi, &x), &y) in o.iter_mut().zip(a).zip(b) {
                *oi = x + frac * (y - x);
            }
        }
    }
    out
}

/// Gradient contributions for each parent. `None` means "no contribution".
fn adjoint(op: &Op, g: &[f64], out: &Tensor, parents: &[&Tensor], needs: &[bool]) -> Vec<Option<Vec<f64>>> {
    let unary = |f: &dyn Fn(usize) -> f64| vec![Some((0..g.len()).map(f).collect::<Vec<f64>>())];
    match op {
        Op::Leaf => Vec::new(),
        Op::Add => vec![
            needs[0].then(|| reduce_to(g, parents[0].len())),
            needs[1].then(|| reduce_to(g, parents[1].len())),
        ],
        Op::Sub => vec![
            needs[0].then(|| reduce_to(g, parents[0].len())),
            needs[1].then(|| reduce_to(g, parents[1].len()).into_iter().map(|x| -x).collect()),
        ],
        Op::Mul => {
            let (a, b) = (parents[0].data(), parents[1].data());
            let ga = needs[0].then(|| {
                let full: Vec<f64> = g.iter().enumerate().map(|(i, gi)| gi * b[i % b.len()]).collect();
                reduce_to(&full, a.len())
            });
            let gb = needs[1].then(|| {
                let full: Vec<f64> = g.iter().enumerate().map(|(i, gi)| gi * a[i % a.len()]).collect();
                reduce_to(&full, b.len())
            });
            vec![ga, gb]
        }
        Op::Div => {
            let (a, b) = (parents[0].data(), parents[1].data());
            let ga = needs[0].then(|| {
                let full: Vec<f64> = g.iter().enumerate().map(|(i, gi)| gi / b[i % b.len()]).collect();
                reduce_to(&full, a.len())
            });
            let gb = needs[1].then(|| {
                let full: Vec<f64> = g
                    .iter()
                    .enumerate()
                    .map(|(i, gi)| {
                        let bv = b[i % b.len()];
                        -gi * a[i % a.len()] / (bv * bv)
                    })
                    .collect();
                reduce_to(&full, b.len())
            });
            vec![ga, gb]
        }
        Op::MatMul => {
            let (a, b) = (parents[0], parents[1]);
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let ga = needs[0].then(|| {
                // g [m, n] · bᵀ [n, k]
                let mut r = vec![0.0; m * k];
                for i in 0..m {
                    let gi = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let bp = &b.data()[p * n..(p + 1) * n];
                        r[i * k + p] = gi.iter().zip(bp).map(|(x, y)| x * y).sum();
                    }
                }
                r
            });
            let gb = needs[1].then(|| {
                // aᵀ [k, m] · g [m, n]
                let mut r = vec![0.0; k * n];
                for i in 0..m {
                    let gi = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let av = a.data()[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        for (o, &x) in r[p * n..(p + 1) * n].iter_mut().zip(gi) {
                            *o += av * x;
                        }
                    }
                }
                r
            });
            vec![ga, gb]
        }
        Op::Sum => vec![Some(vec![g[0]; parents[0].len()])],
        Op::Mean => {
            let n = parents[0].len().max(1) as f64;
            vec![Some(vec![g[0] / n; parents[0].len()])]
        }
        Op::Concat { axis } => {
            let (outer, _, inner) = axis_split(out.shape(), *axis);
            let total = out.shape()[*axis];
            let mut offset = 0;
            parents
                .iter()
                .zip(needs)
                .map(|(p, &need)| {
                    let w = p.shape()[*axis];
                    let r = need.then(|| {
                        let mut r = Vec::with_capacity(p.len());
                        for o in 0..outer {
                            let base = (o * total + offset) * inner;
                            r.extend_from_slice(&g[base..base + w * inner]);
                        }
                        r
                    });
                    offset += w;
                    r
                })
                .collect()
        }
        Op::Slice { axis, start } => {
            let p = parents[0];
            let (outer, n, inner) = axis_split(p.shape(), *axis);
            let len = out.shape()[*axis];
            let mut r = vec![0.0; p.len()];
            for o in 0..outer {
                let dst = o * n * inner + start * inner;
                let src = o * len * inner;
                r[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
            }
            vec![Some(r)]
        }
        Op::Reshape => vec![Some(g.to_vec())],
        Op::Broadcast => vec![Some(reduce_to(g, parents[0].len()))],
        Op::Sin => {
            let x = parents[0].data();
            unary(&|i| g[i] * x[i].cos())
        }
        Op::Exp => {
            let y = out.data();
            unary(&|i| g[i] * y[i])
        }
        Op::Log => {
            let x = parents[0].data();
            unary(&|i| g[i] / x[i])
        }
        Op::Pow(p) => {
            let x = parents[0].data();
            unary(&|i| g[i] * p * x[i].powf(p - 1.0))
        }
        Op::Abs => {
            let x = parents[0].data();
            unary(&|i| {
                if x[i] > 0.0 {
                    g[i]
                } else if x[i] < 0.0 {
                    -g[i]
                } else {
                    0.0
                }
            })
        }
        Op::Sigmoid => {
            let y = out.data();
            unary(&|i| g[i] * y[i] * (1.0 - y[i]))
        }
        Op::Tanh => {
            let y = out.data();
            unary(&|i| g[i] * (1.0 - y[i] * y[i]))
        }
        Op::Softmax => {
            let y = out.data();
            let (rows, cols) = out.dims2();
            let mut r = vec![0.0; g.len()];
            for row in 0..rows {
                let s = row * cols..(row + 1) * cols;
                let dot: f64 = g[s.clone()].iter().zip(&y[s.clone()]).map(|(a, b)| a * b).sum();
                for i in s {
                    r[i] = y[i] * (g[i] - dot);
                }
            }
            vec![Some(r)]
        }
        Op::Cumsum => {
            let (rows, cols) = out.dims2();
            let mut r = g.to_vec();
            for row in 0..rows {
                let mut acc = 0.0;
                for x in r[row * cols..(row + 1) * cols].iter_mut().rev() {
                    acc += *x;
                    *x = acc;
                }
            }
            vec![Some(r)]
        }
        Op::Scale(c) => unary(&|i| g[i] * c),
        Op::AddScalar | Op::WrapPhase => vec![Some(g.to_vec())],
        Op::LeakyRelu(slope) => {
            let x = parents[0].data();
            unary(&|i| if x[i] > 0.0 { g[i] } else { slope * g[i] })
        }
        Op::LayerNorm { inv_std } => {
            let y = out.data();
            let (rows, cols) = out.dims2();
            let mut r = vec![0.0; g.len()];
            for row in 0..rows {
                let s = row * cols..(row + 1) * cols;
                let gm = g[s.clone()].iter().sum::<f64>() / cols as f64;
                let gy = g[s.clone()].iter().zip(&y[s.clone()]).map(|(a, b)| a * b).sum::<f64>() / cols as f64;
                for i in s {
                    r[i] = inv_std[row] * (g[i] - gm - y[i] * gy);
                }
            }
            vec![Some(r)]
        }
        Op::Frame { hop } => {
            let len = parents[0].len();
            let (frames, n) = out.dims2();
            let mut r = vec![0.0; len];
            for f in 0..frames {
                let start = f * hop;
                if start >= len {
                    break;
                }
                let end = (start + n).min(len);
                for (ri, gi) in r[start..end].iter_mut().zip(&g[f * n..]) {
                    *ri += gi;
                }
            }
            vec![Some(r)]
        }
        Op::Rfft { n, inverse } => {
            // Adjoint of the one-sided DFT: x̄[t] = Re Σ_k ḡ_k e^{+2πikt/n}.
            let n = *n;
            let bins = n / 2 + 1;
            let rows = out.shape()[0];
            let mut r = Vec::with_capacity(rows * n);
            let mut buf = vec![Complex::new(0.0, 0.0); n];
            let mut scratch = vec![Complex::new(0.0, 0.0); inverse.get_inplace_scratch_len()];
            for row in 0..rows {
                buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
                let gr = &g[row * bins * 2..(row + 1) * bins * 2];
                for k in 0..bins {
                    buf[k] = Complex::new(gr[2 * k], gr[2 * k + 1]);
                }
                inverse.process_with_scratch(&mut buf, &mut scratch);
                r.extend(buf.iter().map(|c| c.re));
            }
            vec![Some(r)]
        }
        Op::ComplexAbs => {
            let z = parents[0].data();
            let y = out.data();
            let mut r = vec![0.0; z.len()];
            for i in 0..y.len() {
                if y[i] > 0.0 {
                    r[2 * i] = g[i] * z[2 * i] / y[i];
                    r[2 * i + 1] = g[i] * z[2 * i + 1] / y[i];
                }
            }
            vec![Some(r)]
        }
        Op::Upsample { hop } => {
            let p = parents[0];
            let frames = p.shape()[0];
            let dims = p.len() / frames;
            let mut r = vec![0.0; p.len()];
            for i in 0..frames {
                let next = if i + 1 < frames { i + 1 } else { i };
                for j in 0..*hop {
                    let frac = j as f64 / *hop as f64;
                    let gi = &g[(i * hop + j) * dims..(i * hop + j + 1) * dims];
                    for d in 0..dims {
                        r[i * dims + d] += (1.0 - frac) * gi[d];
                        r[next * dims + d] += frac * gi[d];
                    }
                }
            }
            vec![Some(r)]
        }
        Op::HarmonicBank { active } => {
            let (amps, phase) = (parents[0], parents[1]);
            let (n, k) = amps.dims2();
            let mut ga = needs[0].then(|| vec![0.0; n * k]);
            let mut gp = needs[1].then(|| vec![0.0; n]);
            let mut buf = vec![0.0; k];
            for i in 0..n {
                let m = (active[i] as usize).min(k);
                if g[i] == 0.0 || m == 0 {
                    continue;
                }
                let ph = phase.data()[i];
                if let Some(ga) = ga.as_mut() {
                    harmonic_sines(ph, &mut buf[..m]);
                    for (o, s) in ga[i * k..i * k + m].iter_mut().zip(&buf[..m]) {
                        *o = g[i] * s;
                    }
                }
                if let Some(gp) = gp.as_mut() {
                    harmonic_cosines(ph, &mut buf[..m]);
                    let row = &amps.row(i)[..m];
                    let d: f64 = row
                        .iter()
                        .zip(&buf[..m])
                        .enumerate()
                        .map(|(h, (a, c))| (h + 1) as f64 * a * c)
                        .sum();
                    gp[i] = g[i] * d;
                }
            }
            vec![ga, gp]
        }
        Op::FrameConvolve(spec) => {
            let (frames, taps) = parents[0].dims2();
            let mut r = vec![0.0; frames * taps];
            let len = spec.out_len as isize;
            for f in 0..frames {
                let seg = &spec.segments[f * spec.segment_len..(f + 1) * spec.segment_len];
                let base = spec.offset(f, taps);
                let rf = &mut r[f * taps..(f + 1) * taps];
                for (j, &s) in seg.iter().enumerate() {
                    if s == 0.0 {
                        continue;
                    }
                    let start = base + j as isize;
                    let t0 = (-start).max(0) as usize;
                    let t1 = ((len - start).max(0) as usize).min(taps);
                    for t in t0..t1 {
                        rf[t] += s * g[(start + t as isize) as usize];
                    }
                }
            }
            vec![Some(r)]
        }
    }
}
