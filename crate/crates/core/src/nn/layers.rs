//! Layer parameter containers and their tape forward passes.
//!
//! Every container is generic over its storage: `Tensor` for owned
//! parameters, `Var<'t>` once bound to a tape. `visit` walks the leaves in
//! a fixed order with dotted names and rebuilds the container over new
//! storage; serialization, binding and gradient collection all go through
//! it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{AutodiffError, Tensor, Var};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const LAYER_NORM_EPS: f64 = 1e-5;

type Result<T> = std::result::Result<T, AutodiffError>;

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// `y = x W + b` with `W: [in, out]`, `b: [out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: T,
    pub bias: T,
}

impl<T> Dense<T> {
    pub fn visit<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> Dense<U> {
        Dense {
            weight: f(&join(prefix, "weight"), &self.weight),
            bias: f(&join(prefix, "bias"), &self.bias),
        }
    }
}

impl Dense<Tensor> {
    /// Glorot-uniform weights, zero bias.
    pub fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let w = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Self {
            weight: Tensor::matrix(inputs, outputs, w).expect("dense shape"),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }
}

impl<'t> Dense<Var<'t>> {
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>> {
        x.matmul(self.weight)?.add(self.bias)
    }
}

/// Dense → layer norm (with gain and shift) → leaky ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct NormDense<T> {
    pub dense: Dense<T>,
    pub gain: T,
    pub shift: T,
}

impl<T> NormDense<T> {
    pub fn visit<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> NormDense<U> {
        NormDense {
            dense: self.dense.visit(prefix, f),
            gain: f(&join(prefix, "norm.gain"), &self.gain),
            shift: f(&join(prefix, "norm.shift"), &self.shift),
        }
    }
}

impl NormDense<Tensor> {
    pub fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            dense: Dense::init(inputs, outputs, rng),
            gain: Tensor::filled(&[outputs], 1.0),
            shift: Tensor::zeros(&[outputs]),
        }
    }
}

impl<'t> NormDense<Var<'t>> {
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.dense.forward(x)?.layer_norm(LAYER_NORM_EPS);
        Ok(h.mul(self.gain)?.add(self.shift)?.leaky_relu(LEAKY_SLOPE))
    }
}

/// A stack of [`NormDense`] layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<NormDense<T>>,
}

impl<T> Mlp<T> {
    pub fn visit<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| l.visit(&join(prefix, &i.to_string()), f))
                .collect(),
        }
    }
}

impl Mlp<Tensor> {
    pub fn init(inputs: usize, width: usize, depth: usize, rng: &mut ChaCha8Rng) -> Self {
        let layers = (0..depth)
            .map(|i| NormDense::init(if i == 0 { inputs } else { width }, width, rng))
            .collect();
        Self { layers }
    }
}

impl<'t> Mlp<Var<'t>> {
    pub fn forward(&self, mut x: Var<'t>) -> Result<Var<'t>> {
        for l in &self.layers {
            x = l.forward(x)?;
        }
        Ok(x)
    }
}

/// Gated recurrent unit. Gate blocks are laid out `[reset | update | candidate]`:
///
/// ```text
/// r  = σ(x W_r + b_ir + h U_r + b_hr)
/// u  = σ(x W_u + b_iu + h U_u + b_hu)
/// c  = tanh(x W_c + b_ic + r ⊙ (h U_c + b_hc))
/// h' = (1 − u) ⊙ c + u ⊙ h
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Gru<T> {
    /// `[in, 3H]`
    pub input_weight: T,
    /// `[H, 3H]`
    pub hidden_weight: T,
    /// `[3H]`
    pub input_bias: T,
    /// `[3H]`
    pub hidden_bias: T,
}

impl<T> Gru<T> {
    pub fn visit<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> Gru<U> {
        Gru {
            input_weight: f(&join(prefix, "input_weight"), &self.input_weight),
            hidden_weight: f(&join(prefix, "hidden_weight"), &self.hidden_weight),
            input_bias: f(&join(prefix, "input_bias"), &self.input_bias),
            hidden_bias: f(&join(prefix, "hidden_bias"), &self.hidden_bias),
        }
    }
}

/// Random orthogonal `n × n` matrix: Gram–Schmidt on Gaussian columns.
pub fn orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let mut ok = true;
        for j in 0..n {
            for i in 0..j {
                let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = cols.split_at_mut(j);
                tail[0].iter_mut().zip(&head[i]).for_each(|(c, q)| *c -= dot * q);
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            let mut m = vec![0.0; n * n];
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    m[i * n + j] = *v;
                }
            }
            return m;
        }
    }
}

impl Gru<Tensor> {
    /// Glorot-uniform input weights, orthogonal recurrent blocks, zero biases.
    pub fn init(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let input_weight = Dense::init(inputs, 3 * hidden, rng).weight;
        let blocks: Vec<Vec<f64>> = (0..3).map(|_| orthogonal(hidden, rng)).collect();
        let mut hw = vec![0.0; hidden * 3 * hidden];
        for r in 0..hidden {
            for (g, block) in blocks.iter().enumerate() {
                hw[r * 3 * hidden + g * hidden..r * 3 * hidden + (g + 1) * hidden]
                    .copy_from_slice(&block[r * hidden..(r + 1) * hidden]);
            }
        }
        Self {
            input_weight,
            hidden_weight: Tensor::matrix(hidden, 3 * hidden, hw).expect("gru shape"),
            input_bias: Tensor::zeros(&[3 * hidden]),
            hidden_bias: Tensor::zeros(&[3 * hidden]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_weight.shape()[0]
    }

    pub fn input_size(&self) -> usize {
        self.input_weight.shape()[0]
    }
}

impl<'t> Gru<Var<'t>> {
    pub fn hidden_size(&self) -> usize {
        self.hidden_weight.value().shape()[0]
    }

    /// Runs the sequence `x: [T, in]` from a zero state; returns `[T, H]`.
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>> {
        let tape = x.tape();
        let h_size = self.hidden_size();
        let steps = x.value().shape()[0];
        let gates_x = x.matmul(self.input_weight)?.add(self.input_bias)?;
        let mut h = tape.constant(Tensor::zeros(&[1, h_size]));
        let mut outputs = Vec::with_capacity(steps);
        for t in 0..steps {
            let gx = gates_x.slice(0, t, 1)?;
            let gh = h.matmul(self.hidden_weight)?.add(self.hidden_bias)?;
            let reset = gx.slice(1, 0, h_size)?.add(gh.slice(1, 0, h_size)?)?.sigmoid();
            let update = gx.slice(1, h_size, h_size)?.add(gh.slice(1, h_size, h_size)?)?.sigmoid();
            let candidate = gx
                .slice(1, 2 * h_size, h_size)?
                .add(reset.mul(gh.slice(1, 2 * h_size, h_size)?)?)?
                .tanh();
            // (1 − u) ⊙ c + u ⊙ h = c + u ⊙ (h − c)
            h = candidate.add(update.mul(h.sub(candidate)?)?)?;
            outputs.push(h);
        }
        Var::concat(&outputs, 0)
    }
}

/// `2 · sigmoid(x)^ln(10) + 1e-7`: strictly positive, bounded by `2 + 1e-7`.
pub fn exp_sigmoid(x: Var<'_>) -> Result<Var<'_>> {
    Ok(x.sigmoid().pow(std::f64::consts::LN_10)?.scale(2.0).add_scalar(1e-7))
}

/// Tape-free evaluation of the same layers. Inference over long inputs would
/// otherwise keep every recurrent step alive on a tape.
pub(crate) mod plain {
    use super::{Dense, Gru, Mlp, LAYER_NORM_EPS, LEAKY_SLOPE};
    use crate::autodiff::Tensor;

    /// `x [T, in] · W [in, out] + b`.
    pub fn dense(layer: &Dense<Tensor>, x: &[f64], rows: usize) -> Vec<f64> {
        let (inputs, outputs) = layer.weight.dims2();
        let w = layer.weight.data();
        let mut out = Vec::with_capacity(rows * outputs);
        for r in 0..rows {
            let mut acc = layer.bias.data().to_vec();
            for (i, &xv) in x[r * inputs..(r + 1) * inputs].iter().enumerate() {
                if xv != 0.0 {
                    acc.iter_mut().zip(&w[i * outputs..(i + 1) * outputs]).for_each(|(a, wv)| *a += xv * wv);
                }
            }
            out.extend(acc);
        }
        out
    }

    pub fn mlp(stack: &Mlp<Tensor>, x: &[f64], rows: usize) -> Vec<f64> {
        let mut h = x.to_vec();
        for layer in &stack.layers {
            h = dense(&layer.dense, &h, rows);
            let width = layer.gain.len();
            for row in h.chunks_mut(width) {
                let mean = row.iter().sum::<f64>() / width as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / width as f64;
                let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                for ((v, g), s) in row.iter_mut().zip(layer.gain.data()).zip(layer.shift.data()) {
                    let y = (*v - mean) * inv * g + s;
                    *v = if y > 0.0 { y } else { LEAKY_SLOPE * y };
                }
            }
        }
        h
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    pub fn gru(cell: &Gru<Tensor>, x: &[f64], rows: usize) -> Vec<f64> {
        let h_size = cell.hidden_size();
        let gates_x = dense(
            &Dense {
                weight: cell.input_weight.clone(),
                bias: cell.input_bias.clone(),
            },
            x,
            rows,
        );
        let recurrent = Dense {
            weight: cell.hidden_weight.clone(),
            bias: cell.hidden_bias.clone(),
        };
        let mut h = vec![0.0; h_size];
        let mut out = Vec::with_capacity(rows * h_size);
        for t in 0..rows {
            let gx = &gates_x[t * 3 * h_size..(t + 1) * 3 * h_size];
            let gh = dense(&recurrent, &h, 1);
            for j in 0..h_size {
                let r = sigmoid(gx[j] + gh[j]);
                let u = sigmoid(gx[h_size + j] + gh[h_size + j]);
                let c = (gx[2 * h_size + j] + r * gh[2 * h_size + j]).tanh();
                h[j] = c + u * (h[j] - c);
            }
            out.extend_from_slice(&h);
        }
        out
    }

    pub fn exp_sigmoid(x: f64) -> f64 {
        2.0 * sigmoid(x).powf(std::f64::consts::LN_10) + 1e-7
    }

    pub fn softmax_rows(x: &mut [f64], width: usize) {
        for row in x.chunks_mut(width) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|v| *v = (*v - m).exp());
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}
