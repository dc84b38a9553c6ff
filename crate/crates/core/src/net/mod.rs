//! Fully connected correction network.
//!
//! A stack of dense layers: the trunk widths, then the head widths, the last
//! of which must be 1. Hidden layers use a leaky rectifier; the output layer
//! is linear. Parameters live in one flat buffer so the optimizer and the
//! bundle writer can treat them uniformly.

mod loss;
mod optim;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use loss::{msle_loss, msle_term, msle_term_grad, DEFAULT_ALPHA_DB};
pub use optim::AdamW;
pub use train::{fit, Dataset, EpochStats, FitOutcome, TrainConfig};

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub trunk: Vec<usize>,
    pub head: Vec<usize>,
    pub negative_slope: f64,
}

impl Architecture {
    pub fn new(trunk: Vec<usize>, head: Vec<usize>) -> Result<Self> {
        let arch = Self {
            trunk,
            head,
            negative_slope: LEAKY_SLOPE,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.head.last() != Some(&1) {
            return Err(Error::InvalidInput("architecture head must end in width 1".into()));
        }
        if self.trunk.iter().chain(&self.head).any(|&w| w == 0) {
            return Err(Error::InvalidInput("layer widths must be >= 1".into()));
        }
        Ok(())
    }

    pub fn widths(&self) -> impl Iterator<Item = usize> + '_ {
        self.trunk.iter().chain(&self.head).copied()
    }

    pub fn layer_count(&self) -> usize {
        self.trunk.len() + self.head.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Offset of the `fan_out x fan_in` row-major weight matrix.
    pub weight_offset: usize,
    /// Offset of the `fan_out` bias vector.
    pub bias_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    architecture: Architecture,
    input_dim: usize,
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
}

fn layer_shapes(arch: &Architecture, input_dim: usize) -> (Vec<LayerShape>, usize) {
    let mut shapes = Vec::with_capacity(arch.layer_count());
    let mut offset = 0;
    let mut fan_in = input_dim;
    for fan_out in arch.widths() {
        let weight_offset = offset;
        let bias_offset = offset + fan_in * fan_out;
        offset = bias_offset + fan_out;
        shapes.push(LayerShape {
            fan_in,
            fan_out,
            weight_offset,
            bias_offset,
        });
        fan_in = fan_out;
    }
    (shapes, offset)
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl Network {
    /// Seeded init: weights `N(0, 1) / sqrt(fan_in)`, biases zero.
    pub fn init(architecture: Architecture, input_dim: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(architecture, input_dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in net.shapes.clone() {
            let scale = 1.0 / (s.fan_in as f64).sqrt();
            for w in &mut net.params[s.weight_offset..s.bias_offset] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = z * scale;
            }
        }
        Ok(net)
    }

    pub fn zeros(architecture: Architecture, input_dim: usize) -> Result<Self> {
        architecture.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidInput("network input dimension must be >= 1".into()));
        }
        let (shapes, n) = layer_shapes(&architecture, input_dim);
        Ok(Self {
            architecture,
            input_dim,
            shapes,
            params: vec![0.0; n],
        })
    }

    pub fn from_params(architecture: Architecture, input_dim: usize, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(architecture, input_dim)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer_count(&self) -> usize {
        self.shapes.len()
    }

    pub fn output_dim(&self) -> usize {
        self.shapes.last().map_or(0, |s| s.fan_out)
    }

    /// Correction for one standardized feature vector with the standardized
    /// estimate appended as the last input.
    pub fn forward(&self, x: &[f64], beta: f64) -> Result<f64> {
        let mut input = Vec::with_capacity(x.len() + 1);
        input.extend_from_slice(x);
        input.push(beta);
        Ok(self.forward_batch(&input)?[0])
    }

    /// Outputs for row-major `rows x input_dim` inputs.
    pub fn forward_batch(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let rows = self.check_inputs(inputs)?;
        let acts = self.forward_all(inputs, rows);
        Ok(acts.into_iter().last().unwrap_or_default())
    }

    fn check_inputs(&self, inputs: &[f64]) -> Result<usize> {
        if inputs.len() % self.input_dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: inputs.len() % self.input_dim,
            });
        }
        Ok(inputs.len() / self.input_dim)
    }

    /// Post-activation outputs of every layer (the last is linear).
    fn forward_all(&self, inputs: &[f64], rows: usize) -> Vec<Vec<f64>> {
        let slope = self.architecture.negative_slope;
        let last = self.shapes.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.shapes.len());
        for (li, s) in self.shapes.iter().enumerate() {
            let prev: &[f64] = if li == 0 { inputs } else { &acts[li - 1] };
            let w = &self.params[s.weight_offset..s.bias_offset];
            let b = &self.params[s.bias_offset..s.bias_offset + s.fan_out];
            let mut out = vec![0.0; rows * s.fan_out];
            for r in 0..rows {
                let a = &prev[r * s.fan_in..(r + 1) * s.fan_in];
                let o = &mut out[r * s.fan_out..(r + 1) * s.fan_out];
                for (j, oj) in o.iter_mut().enumerate() {
                    let z = b[j] + dot(&w[j * s.fan_in..(j + 1) * s.fan_in], a);
                    *oj = if li == last || z >= 0.0 { z } else { slope * z };
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Loss and exact parameter gradients for a batch.
    ///
    /// Each row's prediction is `output + offsets[r]` (the estimate for
    /// residual composition, zero for direct); errors are taken against
    /// `targets` under the log-scaled loss with the given `alpha`.
    pub fn loss_and_gradients(
        &self,
        inputs: &[f64],
        offsets: &[f64],
        targets: &[f64],
        alpha: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let rows = self.check_inputs(inputs)?;
        if offsets.len() != rows || targets.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: offsets.len().min(targets.len()),
            });
        }
        if rows == 0 {
            return Err(Error::Empty("gradient over an empty batch"));
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidInput(format!("loss alpha must be > 0, got {alpha}")));
        }
        let acts = self.forward_all(inputs, rows);
        let out = acts.last().expect("at least one layer");
        let inv_n = 1.0 / rows as f64;

        let mut loss = 0.0;
        let mut delta: Vec<f64> = (0..rows)
            .map(|r| {
                let e = out[r] + offsets[r] - targets[r];
                loss += msle_term(e, alpha);
                msle_term_grad(e, alpha) * inv_n
            })
            .collect();
        loss *= inv_n;

        let slope = self.architecture.negative_slope;
        let mut grads = vec![0.0; self.params.len()];
        for li in (0..self.shapes.len()).rev() {
            let s = self.shapes[li];
            let prev: &[f64] = if li == 0 { inputs } else { &acts[li - 1] };
            let w = &self.params[s.weight_offset..s.bias_offset];
            let (gw, gb) = grads[s.weight_offset..s.bias_offset + s.fan_out].split_at_mut(s.fan_out * s.fan_in);
            let mut next_delta = if li > 0 { vec![0.0; rows * s.fan_in] } else { Vec::new() };
            for r in 0..rows {
                let a = &prev[r * s.fan_in..(r + 1) * s.fan_in];
                let d = &delta[r * s.fan_out..(r + 1) * s.fan_out];
                for (j, &dj) in d.iter().enumerate() {
                    if dj == 0.0 {
                        continue;
                    }
                    gb[j] += dj;
                    axpy(dj, a, &mut gw[j * s.fan_in..(j + 1) * s.fan_in]);
                    if li > 0 {
                        axpy(dj, &w[j * s.fan_in..(j + 1) * s.fan_in], &mut next_delta[r * s.fan_in..(r + 1) * s.fan_in]);
                    }
                }
            }
            if li > 0 {
                // back through the previous layer's leaky rectifier; its output
                // is negative exactly when its pre-activation was
                for (nd, &a) in next_delta.iter_mut().zip(prev) {
                    if a < 0.0 {
                        *nd *= slope;
                    }
                }
                delta = next_delta;
            }
        }
        Ok((loss, grads))
    }
}
