//! Dense-network engine: layers, forward/backward passes, Adam updates, and
//! a finite-difference gradient checker.
//!
//! The stack is a plain list of fully connected layers; the loss-specific
//! head wiring (two encoder heads, frozen decoder tails) is composed by the
//! caller. Everything is double precision and single-threaded.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Elementwise activation applied after the affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation value.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One fully connected layer: `y = act(W x + b)`, weights stored `[out × in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Mat,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Zero-initialized layer (used in tests and as an assembly placeholder).
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Mat::zeros(output, input),
            biases: vec![0.0; output],
            activation,
        }
    }

    /// Glorot-uniform weights in ±sqrt(6/(fan_in+fan_out)), zero biases.
    pub fn glorot(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let bound = (6.0 / (input + output) as f64).sqrt();
        let mut weights = Mat::zeros(output, input);
        for v in weights.data_mut() {
            *v = rng.random_range(-bound..bound);
        }
        DenseLayer {
            weights,
            biases: vec![0.0; output],
            activation,
        }
    }

    pub fn input_width(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_width(&self) -> usize {
        self.weights.rows()
    }

    /// Returns (post-activation, pre-activation) for a batch `[B × in]`.
    pub fn forward(&self, x: &Mat) -> Result<(Mat, Mat)> {
        if x.cols() != self.input_width() {
            return Err(Error::Dimension(format!(
                "layer expects input width {}, got {}",
                self.input_width(),
                x.cols()
            )));
        }
        let mut pre = x.matmul_nt(&self.weights);
        for r in 0..pre.rows() {
            for (v, b) in pre.row_mut(r).iter_mut().zip(self.biases.iter()) {
                *v += b;
            }
        }
        let act = self.activation;
        let post = pre.map(|z| act.apply(z));
        Ok((post, pre))
    }

    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.biases.len()
    }
}

/// Intermediates saved by [`forward`] for the matching [`backward`] call.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (`inputs[0]` is the stack input).
    pub inputs: Vec<Mat>,
    /// Pre-activation of each layer.
    pub pre: Vec<Mat>,
}

/// Run a batch through a layer stack, keeping intermediates for backward.
pub fn forward(stack: &[DenseLayer], input: &Mat) -> Result<(Mat, ForwardCache)> {
    let mut inputs = Vec::with_capacity(stack.len());
    let mut pre = Vec::with_capacity(stack.len());
    let mut x = input.clone();
    for layer in stack {
        let (post, z) = layer.forward(&x)?;
        inputs.push(x);
        pre.push(z);
        x = post;
    }
    Ok((x, ForwardCache { inputs, pre }))
}

/// Parameter gradients for one layer, shape-matching its weights and biases.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Mat,
    pub biases: Vec<f64>,
}

/// Backpropagate `output_gradient` (dLoss/dOutput, `[B × out]`) through the
/// stack. Returns per-layer parameter gradients and the gradient with
/// respect to the stack input.
pub fn backward(
    stack: &[DenseLayer],
    cache: &ForwardCache,
    output_gradient: &Mat,
) -> Result<(Vec<LayerGrads>, Mat)> {
    if cache.inputs.len() != stack.len() || cache.pre.len() != stack.len() {
        return Err(Error::Usage(format!(
            "forward cache covers {} layers, stack has {}",
            cache.inputs.len(),
            stack.len()
        )));
    }
    let mut grads: Vec<LayerGrads> = Vec::with_capacity(stack.len());
    let mut delta = output_gradient.clone();
    for (idx, layer) in stack.iter().enumerate().rev() {
        let z = &cache.pre[idx];
        let input = &cache.inputs[idx];
        if delta.rows() != z.rows() || delta.cols() != z.cols() {
            return Err(Error::Usage(format!(
                "gradient shape [{}×{}] does not match cached pre-activation [{}×{}] at layer {}",
                delta.rows(),
                delta.cols(),
                z.rows(),
                z.cols(),
                idx
            )));
        }
        // dL/dz = dL/dy ⊙ act'(z)
        let mut dz = delta;
        for (d, &p) in dz.data_mut().iter_mut().zip(z.data().iter()) {
            *d *= layer.activation.derivative(p);
        }
        // dW = dzᵀ · input, db = column sums of dz, dInput = dz · W
        let d_weights = dz.matmul_tn(input);
        let mut d_biases = vec![0.0; layer.output_width()];
        for r in 0..dz.rows() {
            for (b, &d) in d_biases.iter_mut().zip(dz.row(r)) {
                *b += d;
            }
        }
        delta = dz.matmul(&layer.weights);
        grads.push(LayerGrads {
            weights: d_weights,
            biases: d_biases,
        });
    }
    grads.reverse();
    Ok((grads, delta))
}

/// Adam optimizer state for one layer stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<MomentPair>,
    v: Vec<MomentPair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MomentPair {
    weights: Mat,
    biases: Vec<f64>,
}

impl AdamState {
    pub fn new(stack: &[DenseLayer], learning_rate: f64) -> Self {
        let zero = |l: &DenseLayer| MomentPair {
            weights: Mat::zeros(l.output_width(), l.input_width()),
            biases: vec![0.0; l.output_width()],
        };
        AdamState {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: stack.iter().map(zero).collect(),
            v: stack.iter().map(zero).collect(),
        }
    }
}

/// One Adam update with bias correction. `frozen` layer indices are skipped,
/// keeping both their parameters and their moments untouched.
pub fn adam_step(
    stack: &mut [DenseLayer],
    grads: &[LayerGrads],
    state: &mut AdamState,
    frozen: &[usize],
) -> Result<()> {
    if grads.len() != stack.len() || state.m.len() != stack.len() {
        return Err(Error::Usage(format!(
            "adam_step: {} gradient sets for {} layers",
            grads.len(),
            stack.len()
        )));
    }
    for (idx, g) in grads.iter().enumerate() {
        if !g.weights.is_finite() || g.biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient at layer {idx}"
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let corr1 = 1.0 - state.beta1.powi(t);
    let corr2 = 1.0 - state.beta2.powi(t);
    for (idx, layer) in stack.iter_mut().enumerate() {
        if frozen.contains(&idx) {
            continue;
        }
        let g = &grads[idx];
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        for ((p, &grad), (mw, vw)) in layer
            .weights
            .data_mut()
            .iter_mut()
            .zip(g.weights.data().iter())
            .zip(
                m.weights
                    .data_mut()
                    .iter_mut()
                    .zip(v.weights.data_mut().iter_mut()),
            )
        {
            *mw = state.beta1 * *mw + (1.0 - state.beta1) * grad;
            *vw = state.beta2 * *vw + (1.0 - state.beta2) * grad * grad;
            let m_hat = *mw / corr1;
            let v_hat = *vw / corr2;
            *p -= state.learning_rate * m_hat / (v_hat.sqrt() + state.eps);
        }
        for ((p, &grad), (mb, vb)) in layer
            .biases
            .iter_mut()
            .zip(g.biases.iter())
            .zip(m.biases.iter_mut().zip(v.biases.iter_mut()))
        {
            *mb = state.beta1 * *mb + (1.0 - state.beta1) * grad;
            *vb = state.beta2 * *vb + (1.0 - state.beta2) * grad * grad;
            let m_hat = *mb / corr1;
            let v_hat = *vb / corr2;
            *p -= state.learning_rate * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// A scalar loss over a network output batch, with its analytic gradient.
pub trait ScalarLoss {
    fn value(&self, output: &Mat) -> f64;
    fn grad(&self, output: &Mat) -> Mat;
}

/// Mean squared error against a fixed target batch.
pub struct MseLoss {
    pub target: Mat,
}

impl ScalarLoss for MseLoss {
    fn value(&self, output: &Mat) -> f64 {
        let n = output.data().len() as f64;
        output
            .data()
            .iter()
            .zip(self.target.data().iter())
            .map(|(&y, &t)| (y - t) * (y - t))
            .sum::<f64>()
            / n
    }

    fn grad(&self, output: &Mat) -> Mat {
        let n = output.data().len() as f64;
        let mut g = output.clone();
        for (v, &t) in g.data_mut().iter_mut().zip(self.target.data().iter()) {
            *v = 2.0 * (*v - t) / n;
        }
        g
    }
}

/// Sum of all output entries; the simplest loss for hand checks.
pub struct SumLoss;

impl ScalarLoss for SumLoss {
    fn value(&self, output: &Mat) -> f64 {
        output.data().iter().sum()
    }

    fn grad(&self, output: &Mat) -> Mat {
        output.map(|_| 1.0)
    }
}

/// Outcome of a finite-difference gradient verification.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked_params: usize,
    pub passed: bool,
}

/// Central-difference step used by the gradient checkers.
pub const FD_STEP: f64 = 1e-5;

/// Relative error with a floor so zero-gradient parameters do not divide by
/// zero: |a−n| / max(|a|, |n|, 1e-8).
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare analytic gradients of `loss ∘ stack` against central finite
/// differences over every parameter. Failures are reported, not thrown.
pub fn grad_check(
    stack: &[DenseLayer],
    loss: &dyn ScalarLoss,
    input: &Mat,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (output, cache) = forward(stack, input)?;
    let (analytic, _) = backward(stack, &cache, &loss.grad(&output))?;

    let mut work: Vec<DenseLayer> = stack.to_vec();
    let eval = |stack: &[DenseLayer]| -> Result<f64> {
        let (out, _) = forward(stack, input)?;
        Ok(loss.value(&out))
    };

    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    for l in 0..work.len() {
        for i in 0..work[l].weights.data().len() {
            let orig = work[l].weights.data()[i];
            work[l].weights.data_mut()[i] = orig + FD_STEP;
            let plus = eval(&work)?;
            work[l].weights.data_mut()[i] = orig - FD_STEP;
            let minus = eval(&work)?;
            work[l].weights.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            max_rel = max_rel.max(rel_error(analytic[l].weights.data()[i], numeric));
            checked += 1;
        }
        for i in 0..work[l].biases.len() {
            let orig = work[l].biases[i];
            work[l].biases[i] = orig + FD_STEP;
            let plus = eval(&work)?;
            work[l].biases[i] = orig - FD_STEP;
            let minus = eval(&work)?;
            work[l].biases[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            max_rel = max_rel.max(rel_error(analytic[l].biases[i], numeric));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        checked_params: checked,
        passed: max_rel < tolerance,
    })
}
