//! Dense ReLU classifier with a flat parameter vector.
//!
//! Parameters of layer `l` (mapping `sizes[l]` inputs to `sizes[l + 1]`
//! outputs) are stored contiguously: the row-major `(out, in)` weight matrix
//! followed by the `out` biases. The same layout is used by [`Gradient`], so
//! FedAvg, SGD and the proximal term are plain elementwise operations on
//! `values()`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::rng;
use crate::{Error, Result};

fn validate_sizes(layer_sizes: &[usize]) -> Result<usize> {
    if layer_sizes.len() < 2 {
        return Err(Error::config("an MLP needs at least input and output layers"));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::config("layer sizes must be positive"));
    }
    Ok(layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum())
}

/// MLP parameters: weights and biases of every layer in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

/// Gradient with respect to a [`ModelParams`]; same shape and layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters for `layer_sizes = [d, hidden.., C]`.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        let len = validate_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            values: vec![0.0; len],
        })
    }

    /// He-normal weights (`N(0, 2 / fan_in)`), zero biases.
    pub fn init_he(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes)?;
        let mut rng = rng::stream(seed, rng::tag::INIT, &[]);
        for l in 0..params.num_layers() {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let scale = libm::sqrt(2.0 / fan_in as f64);
            let (w, _) = params.layer_mut(l);
            for v in w.iter_mut().take(fan_in * fan_out) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = scale * z;
            }
        }
        Ok(params)
    }

    /// Rebuilds parameters from a flat vector in the documented layout.
    pub fn from_values(layer_sizes: &[usize], values: Vec<f64>) -> Result<Self> {
        let len = validate_sizes(layer_sizes)?;
        if values.len() != len {
            return Err(Error::config(format!(
                "expected {len} parameters for layers {layer_sizes:?}, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite parameter value"));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            values,
        })
    }

    /// `[d, hidden.., C]`.
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of weight layers.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Input dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Number of classes `C`.
    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated nonempty")
    }

    /// Flat parameter values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable flat parameter values.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Number of scalar parameters.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Never true for validated parameters.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when every value is finite.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// True when `other` has the same layer sizes.
    pub fn same_shape(&self, other: &[usize]) -> bool {
        self.layer_sizes == other
    }

    fn offset(&self, layer: usize) -> usize {
        self.layer_sizes[..=layer]
            .windows(2)
            .take(layer)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// `(weights, biases)` of layer `l`; weights are row-major `(out, in)`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let start = self.offset(l);
        let w = &self.values[start..start + fan_in * fan_out];
        let b = &self.values[start + fan_in * fan_out..start + fan_in * fan_out + fan_out];
        (w, b)
    }

    /// Mutable `(weights, biases)` of layer `l`.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let start = self.offset(l);
        let slice = &mut self.values[start..start + fan_in * fan_out + fan_out];
        slice.split_at_mut(fan_in * fan_out)
    }

    /// Pre-softmax outputs for one input. Hidden layers use ReLU.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut ws = Workspace::new(self);
        Ok(self.forward_with(x, &mut ws)?.to_vec())
    }

    /// [`forward`](Self::forward) into a reusable workspace; the returned
    /// slice lives in `ws` and the hidden activations stay available to
    /// [`backward_accumulate`](Self::backward_accumulate).
    pub fn forward_with<'w>(&self, x: &[f64], ws: &'w mut Workspace) -> Result<&'w [f64]> {
        if x.len() != self.input_dim() {
            return Err(Error::config(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        ws.ensure(self);
        ws.acts[0].copy_from_slice(x);
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let fan_in = self.layer_sizes[l];
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            for (j, o) in out.iter_mut().enumerate() {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let mut z = b[j];
                for (wi, xi) in row.iter().zip(input.iter()) {
                    z += wi * xi;
                }
                *o = if l < last && z < 0.0 { 0.0 } else { z };
            }
        }
        Ok(&ws.acts[self.num_layers()])
    }

    /// Adds `d loss / d params` to `grad`, given `d loss / d logits` for the
    /// input most recently run through [`forward_with`](Self::forward_with).
    pub fn backward_accumulate(&self, ws: &mut Workspace, d_logits: &[f64], grad: &mut Gradient) {
        debug_assert_eq!(d_logits.len(), self.output_dim());
        debug_assert!(grad.layer_sizes == self.layer_sizes);
        let Workspace { acts, delta, next } = ws;
        delta.clear();
        delta.extend_from_slice(d_logits);
        for l in (0..self.num_layers()).rev() {
            let fan_in = self.layer_sizes[l];
            let input = &acts[l];
            {
                let (gw, gb) = grad.layer_mut(l);
                for (j, dj) in delta.iter().enumerate() {
                    if *dj == 0.0 {
                        continue;
                    }
                    let row = &mut gw[j * fan_in..(j + 1) * fan_in];
                    for (g, xi) in row.iter_mut().zip(input.iter()) {
                        *g += dj * xi;
                    }
                    gb[j] += dj;
                }
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            next.clear();
            next.resize(fan_in, 0.0);
            for (j, dj) in delta.iter().enumerate() {
                if *dj == 0.0 {
                    continue;
                }
                let row = &w[j * fan_in..(j + 1) * fan_in];
                for (n, wi) in next.iter_mut().zip(row) {
                    *n += dj * wi;
                }
            }
            // ReLU derivative: zero where the activation was clipped.
            for (n, a) in next.iter_mut().zip(input.iter()) {
                if *a <= 0.0 {
                    *n = 0.0;
                }
            }
            core::mem::swap(delta, next);
        }
    }
}

impl Gradient {
    /// A zero gradient shaped like `params`.
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layer_sizes: params.layer_sizes.clone(),
            values: vec![0.0; params.values.len()],
        }
    }

    /// Builds a gradient from a flat vector in the parameter layout.
    pub fn from_values(layer_sizes: &[usize], values: Vec<f64>) -> Result<Self> {
        let p = ModelParams::zeros(layer_sizes)?;
        if values.len() != p.len() {
            return Err(Error::config("gradient length does not match layer sizes"));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            values,
        })
    }

    /// Layer sizes of the model this differentiates.
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Flat values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable flat values.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let start: usize = self.layer_sizes[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let slice = &mut self.values[start..start + fan_in * fan_out + fan_out];
        slice.split_at_mut(fan_in * fan_out)
    }
}

/// Activation buffers reused across forward/backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl Workspace {
    /// Buffers sized for `params`.
    pub fn new(params: &ModelParams) -> Self {
        let mut ws = Self::default();
        ws.ensure(params);
        ws
    }

    fn ensure(&mut self, params: &ModelParams) {
        let sizes = params.layer_sizes();
        if self.acts.len() != sizes.len()
            || self.acts.iter().zip(sizes).any(|(a, s)| a.len() != *s)
        {
            self.acts = sizes.iter().map(|&s| vec![0.0; s]).collect();
        }
    }
}
