//! Affine layers and the encoder stack (affine -> ReLU -> inverted dropout
//! per layer) with cached activations for backprop.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;

/// Weight is `input_dim x output_dim` row-major, so row `i` holds the fan-out
/// of input `i`; zero inputs skip their row entirely in both passes.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl AffineLayer {
    pub fn glorot(input_dim: usize, output_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        AffineLayer {
            weight: Matrix::glorot(input_dim, output_dim, rng),
            bias: vec![0.0; output_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = self.weight.row(i);
            for (o, &w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "affine expects input of dim {}, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(input, &mut out);
        Ok(out)
    }

    /// Accumulates `scale * (input ⊗ out_grad)` into `grad` and returns the
    /// input gradient.
    pub fn backward_acc(&self, input: &[f64], out_grad: &[f64], scale: f64, grad: &mut AffineGrad) -> Vec<f64> {
        for (gb, &g) in grad.bias.iter_mut().zip(out_grad) {
            *gb += scale * g;
        }
        let mut input_grad = vec![0.0; input.len()];
        for (i, &x) in input.iter().enumerate() {
            let w_row = self.weight.row(i);
            let mut dx = 0.0;
            for (j, &g) in out_grad.iter().enumerate() {
                dx += w_row[j] * g;
            }
            input_grad[i] = dx;
            if x != 0.0 {
                let g_row = grad.weight.row_mut(i);
                for (gj, &g) in g_row.iter_mut().zip(out_grad) {
                    *gj += scale * x * g;
                }
            }
        }
        input_grad
    }
}

/// Gradient tensors for one affine layer, shape-congruent with it.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl AffineGrad {
    pub fn zeros_like(layer: &AffineLayer) -> Self {
        AffineGrad {
            weight: Matrix::zeros(layer.input_dim(), layer.output_dim()),
            bias: vec![0.0; layer.output_dim()],
        }
    }

    pub fn zero(&mut self) {
        self.weight.fill(0.0);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn is_zero(&self) -> bool {
        self.weight.as_slice().iter().all(|&v| v == 0.0) && self.bias.iter().all(|&v| v == 0.0)
    }
}

struct LayerCache {
    input: Vec<f64>,
    /// Pre-activation values, used for the ReLU derivative.
    pre: Vec<f64>,
    /// Per-unit dropout multiplier: 0.0 (dropped) or 1/(1-p); empty when
    /// dropout was not applied in this pass.
    keep_scale: Vec<f64>,
}

/// Encoder: a stack of affine layers, each followed by ReLU and (in train
/// mode) inverted dropout. Dims `[in]` alone yield an identity encoder.
pub struct LayerStack {
    layers: Vec<AffineLayer>,
    dropout: f64,
    input_dim: usize,
    cache: Option<Vec<LayerCache>>,
}

impl Clone for LayerStack {
    fn clone(&self) -> Self {
        // Cache is scratch state; clones start fresh.
        LayerStack {
            layers: self.layers.clone(),
            dropout: self.dropout,
            input_dim: self.input_dim,
            cache: None,
        }
    }
}

impl std::fmt::Debug for LayerStack {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LayerStack")
            .field("dims", &self.dims())
            .field("dropout", &self.dropout)
            .finish()
    }
}

impl LayerStack {
    /// `dims[0]` is the input dimension; each later entry adds a layer.
    pub fn new(dims: &[usize], dropout: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidInput("encoder dims must be nonempty".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput("encoder dims must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidInput(format!(
                "dropout rate must be in [0, 1), got {dropout}"
            )));
        }
        let layers = dims
            .windows(2)
            .map(|w| AffineLayer::glorot(w[0], w[1], rng))
            .collect();
        Ok(LayerStack {
            layers,
            dropout,
            input_dim: dims[0],
            cache: None,
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(self.layers.iter().map(|l| l.output_dim()));
        dims
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.output_dim())
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    /// Spec-level forward: caches activations and applies dropout in train
    /// mode, plain eval pass otherwise.
    pub fn forward(&mut self, input: &[f64], train_mode: bool, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        if train_mode {
            self.forward_cached(input, Some(rng))
        } else {
            self.forward_eval(input)
        }
    }

    /// Eval pass: no dropout, no cache.
    pub fn forward_eval(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut h = input.to_vec();
        for layer in &self.layers {
            let mut out = vec![0.0; layer.output_dim()];
            layer.forward_into(&h, &mut out);
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            h = out;
        }
        Ok(h)
    }

    /// Caching pass used for backprop. Dropout is applied only when a
    /// generator is supplied (inverted scaling, so eval needs no correction).
    pub(crate) fn forward_cached(
        &mut self,
        input: &[f64],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = input.to_vec();
        for layer in &self.layers {
            let mut pre = vec![0.0; layer.output_dim()];
            layer.forward_into(&h, &mut pre);
            let mut out: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
            let mut keep_scale = Vec::new();
            if self.dropout > 0.0 {
                if let Some(rng) = dropout_rng.as_deref_mut() {
                    let keep = 1.0 - self.dropout;
                    keep_scale = out
                        .iter()
                        .map(|_| {
                            if rng.random::<f64>() < self.dropout {
                                0.0
                            } else {
                                1.0 / keep
                            }
                        })
                        .collect();
                    for (v, &s) in out.iter_mut().zip(&keep_scale) {
                        *v *= s;
                    }
                }
            }
            caches.push(LayerCache {
                input: h,
                pre,
                keep_scale,
            });
            h = out;
        }
        self.cache = Some(caches);
        Ok(h)
    }

    /// Backprop through the cached forward pass. Returns per-layer gradients
    /// and the gradient w.r.t. the stack input.
    pub fn backward(&self, upstream: &[f64]) -> Result<(StackGradients, Vec<f64>)> {
        let mut grads = StackGradients::zeros_like(self);
        let input_grad = self.backward_acc(upstream, 1.0, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Accumulating variant: adds `scale` times this example's gradients.
    pub fn backward_acc(
        &self,
        upstream: &[f64],
        scale: f64,
        grads: &mut StackGradients,
    ) -> Result<Vec<f64>> {
        let caches = self.cache.as_ref().ok_or_else(|| {
            Error::State("backward called without a cached train-mode forward".into())
        })?;
        if upstream.len() != self.output_dim() {
            return Err(Error::InvalidInput(format!(
                "upstream gradient dim {} does not match encoder output dim {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut g = upstream.to_vec();
        for (layer_idx, layer) in self.layers.iter().enumerate().rev() {
            let cache = &caches[layer_idx];
            if !cache.keep_scale.is_empty() {
                for (gj, &s) in g.iter_mut().zip(&cache.keep_scale) {
                    *gj *= s;
                }
            }
            for (gj, &z) in g.iter_mut().zip(&cache.pre) {
                if z <= 0.0 {
                    *gj = 0.0;
                }
            }
            g = layer.backward_acc(&cache.input, &g, scale, &mut grads.layers[layer_idx]);
        }
        Ok(g)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::InvalidInput(format!(
                "encoder expects input dim {}, got {}",
                self.input_dim,
                input.len()
            )));
        }
        Ok(())
    }
}

/// One gradient tensor pair per encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct StackGradients {
    pub layers: Vec<AffineGrad>,
}

impl StackGradients {
    pub fn zeros_like(stack: &LayerStack) -> Self {
        StackGradients {
            layers: stack.layers.iter().map(AffineGrad::zeros_like).collect(),
        }
    }

    pub fn zero(&mut self) {
        self.layers.iter_mut().for_each(AffineGrad::zero);
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(AffineGrad::is_zero)
    }
}
