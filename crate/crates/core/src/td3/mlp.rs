use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Tanh,
    Linear,
}

/// Fully connected ReLU network. All weights and biases live in one flat
/// vector; layer `l` stores its `in x out` weight matrix row-major followed
/// by `out` biases.
#[derive(Debug, Clone)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputActivation,
    params: Vec<f64>,
    offsets: Vec<usize>,
    version: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.output == other.output && self.params == other.params
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    version: u64,
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Network output, `batch x out` row-major.
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// `c = op(a) * op(b) + beta * c` over row-major buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the strides above address exactly the m*k, k*n and m*n
    // elements whose presence the debug assertion checks.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

impl Mlp {
    /// Zero-initialized network with the given layer sizes.
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut total = 0;
        for w in sizes.windows(2) {
            offsets.push(total);
            total += w[0] * w[1] + w[1];
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            output,
            params: vec![0.0; total],
            offsets,
            version: next_version(),
        })
    }

    /// Uniform fan-in initialization `U(-1/sqrt(in), 1/sqrt(in))`; the last
    /// layer is additionally scaled by `final_scale`.
    pub fn init<R: Rng>(sizes: &[usize], output: OutputActivation, final_scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        let layers = net.layers();
        for l in 0..layers {
            let (fan_in, out) = (sizes[l], sizes[l + 1]);
            let mut bound = 1.0 / (fan_in as f64).sqrt();
            if l + 1 == layers {
                bound *= final_scale;
            }
            let off = net.offsets[l];
            for p in &mut net.params[off..off + fan_in * out + out] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version = next_version();
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                actual: params.len(),
            });
        }
        self.params_mut().copy_from_slice(params);
        Ok(())
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        let keep = 1.0 - tau;
        for (t, o) in self.params_mut().iter_mut().zip(&online.params) {
            *t = tau * o + keep * *t;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn weights(&self, l: usize) -> &[f64] {
        let off = self.offsets[l];
        &self.params[off..off + self.sizes[l] * self.sizes[l + 1]]
    }

    fn biases(&self, l: usize) -> &[f64] {
        let off = self.offsets[l] + self.sizes[l] * self.sizes[l + 1];
        &self.params[off..off + self.sizes[l + 1]]
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward(&self, input: &[f64], batch: usize) -> Result<ForwardCache> {
        let expected = batch * self.input_dim();
        if input.len() != expected || batch == 0 {
            return Err(Error::DimensionMismatch {
                expected,
                actual: input.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        for l in 0..self.layers() {
            let (k, n) = (self.sizes[l], self.sizes[l + 1]);
            let b = self.biases(l);
            let mut z = Vec::with_capacity(batch * n);
            for _ in 0..batch {
                z.extend_from_slice(b);
            }
            gemm(batch, k, n, &acts[l], false, self.weights(l), false, 1.0, &mut z);
            if l + 1 < self.layers() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.output == OutputActivation::Tanh {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        Ok(ForwardCache {
            batch,
            version: self.version,
            acts,
        })
    }

    /// Output for a single input.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward(input, 1)?;
        Ok(cache.acts.pop().unwrap_or_default())
    }

    /// Reverse pass. Adds parameter gradients of `sum(upstream * output)`
    /// into `grads` and returns the input gradient when `want_input` is set.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut [f64], want_input: bool) -> Result<Option<Vec<f64>>> {
        if cache.version != self.version {
            return Err(Error::StaleCache);
        }
        let batch = cache.batch;
        if upstream.len() != batch * self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: batch * self.output_dim(),
                actual: upstream.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                actual: grads.len(),
            });
        }
        let layers = self.layers();
        let mut delta = upstream.to_vec();
        if self.output == OutputActivation::Tanh {
            for (d, y) in delta.iter_mut().zip(&cache.acts[layers]) {
                *d *= 1.0 - y * y;
            }
        }
        for l in (0..layers).rev() {
            let (k, n) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offsets[l];
            let (gw, gb) = grads[off..off + k * n + n].split_at_mut(k * n);
            gemm(k, batch, n, &cache.acts[l], true, &delta, false, 1.0, gw);
            for row in delta.chunks_exact(n) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 && !want_input {
                return Ok(None);
            }
            let mut prev = vec![0.0; batch * k];
            gemm(batch, n, k, &delta, false, self.weights(l), true, 0.0, &mut prev);
            if l > 0 {
                for (p, a) in prev.iter_mut().zip(&cache.acts[l]) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok(Some(delta))
    }
}

/// Adam optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Descend along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = self.lr * bc2.sqrt() / bc1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, g), m), v) in net.params_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / (v.sqrt() + eps * bc2.sqrt());
        }
    }
}
