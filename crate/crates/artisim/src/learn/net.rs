//! Small dense networks with hand-written backprop.
//!
//! Everything is f64 and single-threaded by construction: a forward or
//! backward pass over a batch is a fixed sequence of matrix products, so two
//! runs with the same inputs are bit-identical. Batches are stored with one
//! *column* per sample (nalgebra is column-major, so samples stay
//! contiguous).
//!
//! Hidden layers use tanh — bounded activations keep early policy outputs
//! tame — and heads are linear. Weights start orthogonal (Gram-Schmidt on
//! Gaussian rows) with gain √2 on hidden layers; heads take an explicit
//! scale so a policy mean head can start near zero.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// One affine layer, `y = W x + b`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Gradients of a loss with respect to one layer's parameters.
#[derive(Clone, Debug)]
pub struct DenseGrad {
    pub dw: DMatrix<f64>,
    pub db: DVector<f64>,
}

/// Feedforward net: tanh after every layer except the last.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer inputs captured by a cached forward pass, for backprop.
pub struct MlpCache {
    /// `inputs[l]` is the batch fed to layer `l`; the final entry is the
    /// pre-activation output of the last layer (returned unsquashed).
    inputs: Vec<DMatrix<f64>>,
}

/// Rows of `m` orthonormalized in place by modified Gram-Schmidt.
///
/// With more rows than columns only the first `cols` rows can be mutually
/// orthogonal; later rows keep their (normalized) residual direction, which
/// is as close to orthogonal as the shape allows.
fn orthonormalize_rows(m: &mut DMatrix<f64>) {
    let (rows, cols) = m.shape();
    for r in 0..rows {
        for p in 0..r.min(cols) {
            let dot = m.row(r).dot(&m.row(p));
            let prev = m.row(p).into_owned();
            let mut row = m.row_mut(r);
            row -= prev * dot;
        }
        let norm = m.row(r).norm();
        if norm > 1e-12 {
            m.row_mut(r).unscale_mut(norm);
        }
    }
}

impl Mlp {
    /// Build with the given layer sizes (`sizes[0]` inputs … last outputs).
    /// Hidden weights are orthogonal with gain √2; the final layer uses
    /// `head_scale` instead. Biases start at zero.
    pub fn new(sizes: &[usize], head_scale: f64, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (nin, nout) = (sizes[l], sizes[l + 1]);
            let mut w = DMatrix::from_fn(nout, nin, |_, _| rng.sample::<f64, _>(StandardNormal));
            orthonormalize_rows(&mut w);
            let gain = if l + 2 == sizes.len() { head_scale } else { std::f64::consts::SQRT_2 };
            w *= gain;
            layers.push(Dense { w, b: DVector::zeros(nout) });
        }
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].w.nrows()
    }

    /// Layer sizes, inputs first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.iter().map(|l| l.w.ncols()).collect();
        s.push(self.output_dim());
        s
    }

    /// Forward pass over a batch (columns = samples).
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            h = &layer.w * h;
            for c in 0..h.ncols() {
                let mut col = h.column_mut(c);
                col += &layer.b;
            }
            if l + 1 < self.layers.len() {
                h.apply(|v| *v = v.tanh());
            }
        }
        h
    }

    /// Forward pass that keeps what backprop needs.
    pub fn forward_cached(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            inputs.push(h.clone());
            h = &layer.w * h;
            for c in 0..h.ncols() {
                let mut col = h.column_mut(c);
                col += &layer.b;
            }
            if l + 1 < self.layers.len() {
                h.apply(|v| *v = v.tanh());
            }
        }
        inputs.push(h.clone());
        (h, MlpCache { inputs })
    }

    /// Backpropagate `dout` (∂L/∂output, same shape as the forward output)
    /// through the cached pass; returns per-layer parameter gradients.
    pub fn backward(&self, cache: &MlpCache, dout: &DMatrix<f64>) -> Vec<DenseGrad> {
        let n = self.layers.len();
        let mut grads: Vec<DenseGrad> = Vec::with_capacity(n);
        let mut delta = dout.clone();
        for l in (0..n).rev() {
            // Post-activation input that fed layer l.
            let x = &cache.inputs[l];
            if l + 1 < n {
                // Undo the tanh applied to this layer's output: that output
                // is exactly layer l+1's input.
                let y = &cache.inputs[l + 1];
                delta.zip_apply(y, |d, yv| *d *= 1.0 - yv * yv);
            }
            let dw = &delta * x.transpose();
            let db = DVector::from_fn(delta.nrows(), |r, _| delta.row(r).sum());
            if l > 0 {
                delta = self.layers[l].w.transpose() * delta;
            }
            grads.push(DenseGrad { dw, db });
        }
        grads.reverse();
        grads
    }

    /// Total trainable scalar count.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Append all parameters (per layer: W row-major, then b) to `out`.
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            for r in 0..l.w.nrows() {
                for c in 0..l.w.ncols() {
                    out.push(l.w[(r, c)]);
                }
            }
            out.extend(l.b.iter());
        }
    }

    /// Inverse of [`Mlp::write_flat`]; returns how many scalars were read.
    pub fn read_flat(&mut self, flat: &[f64]) -> usize {
        let mut k = 0;
        for l in &mut self.layers {
            for r in 0..l.w.nrows() {
                for c in 0..l.w.ncols() {
                    l.w[(r, c)] = flat[k];
                    k += 1;
                }
            }
            for r in 0..l.b.nrows() {
                l.b[r] = flat[k];
                k += 1;
            }
        }
        k
    }
}

// ---------------------------------------------------------------------------

/// Adaptive-moment optimizer over one flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; dim], v: vec![0.0; dim] }
    }

    /// One descent step in place: `theta -= lr * m̂ / (√v̂ + eps)`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            theta[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Scale `grad` in place so its Euclidean norm is at most `max_norm`;
/// returns the pre-clip norm.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

/// Compare an analytic gradient against central finite differences of the
/// loss; returns the worst relative error over all coordinates.
///
/// `loss_and_grad` evaluates the differentiable objective at a flat
/// parameter vector. Only the loss value is used at the probe points, so the
/// closure's gradient path is exercised once, at `theta` itself.
pub fn gradient_check<F>(theta: &[f64], loss_and_grad: F, eps: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss_and_grad(theta);
    assert_eq!(analytic.len(), theta.len());
    let mut probe = theta.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let (lp, _) = loss_and_grad(&probe);
        probe[i] = theta[i] - eps;
        let (lm, _) = loss_and_grad(&probe);
        probe[i] = theta[i];
        let numeric = (lp - lm) / (2.0 * eps);
        let denom = (analytic[i].abs() + numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

// ---------------------------------------------------------------------------
