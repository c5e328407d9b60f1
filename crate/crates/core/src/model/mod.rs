//! Multi-head classifier: shared encoder plus one affine head per task, with
//! head management, parameter freezing, teacher cloning, and checkpoints.

mod checkpoint;

pub use checkpoint::{load, save, StageRecord, CHECKPOINT_VERSION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeaturizerConfig, HashingFeaturizer};
use crate::error::{Error, Result};
use crate::nn::{
    derive_seed, AdamParams, AdamState, AffineGrad, AffineLayer, LayerStack, LogitVector,
    StackGradients,
};

pub const DEFAULT_DROPOUT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputArity {
    OneSegment,
    TwoSegment,
}

/// Which metric model selection and reports key on for a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrimaryMetric {
    #[default]
    Accuracy,
    F1Binary {
        positive_class: usize,
    },
    F1Macro,
}

/// Identity and evaluation contract of one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task_id: String,
    pub label_names: Vec<String>,
    pub input_arity: InputArity,
    #[serde(default)]
    pub primary_metric: PrimaryMetric,
    /// Named evaluation splits, e.g. `["dev"]` or `["dev", "mismatched"]`.
    pub eval_splits: Vec<String>,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.task_id.is_empty() {
            return Err(Error::InvalidInput("task_id must be nonempty".into()));
        }
        if self.label_names.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "task {} needs at least 2 labels",
                self.task_id
            )));
        }
        if self.eval_splits.is_empty() {
            return Err(Error::InvalidInput(format!(
                "task {} needs at least one eval split",
                self.task_id
            )));
        }
        if let PrimaryMetric::F1Binary { positive_class } = self.primary_metric {
            if positive_class >= self.label_names.len() {
                return Err(Error::InvalidInput(format!(
                    "task {}: positive class {} out of {} labels",
                    self.task_id,
                    positive_class,
                    self.label_names.len()
                )));
            }
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.label_names.iter().position(|l| l == name)
    }
}

/// Per-task output head.
#[derive(Debug, Clone)]
pub struct TaskHead {
    pub spec: TaskSpec,
    pub layer: AffineLayer,
}

/// Parameter group freezing scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FreezeScope {
    /// Unfreeze everything.
    None,
    /// Freeze every encoder layer.
    AllEncoder,
    /// Freeze every head except the named task's.
    AllHeadsExcept(String),
}

/// Shared-encoder multi-head model. Head order is append-only and records
/// task-arrival order.
#[derive(Debug, Clone)]
pub struct MultiHeadModel {
    featurizer_config: FeaturizerConfig,
    encoder: LayerStack,
    heads: Vec<TaskHead>,
    encoder_frozen: bool,
    frozen_heads: Vec<bool>,
    provenance: Vec<StageRecord>,
}

impl MultiHeadModel {
    /// Fresh model with a Glorot-initialized encoder and no heads.
    /// `encoder_dims[0]` must equal the featurizer dimension.
    pub fn new(
        featurizer_config: FeaturizerConfig,
        encoder_dims: &[usize],
        dropout: f64,
        seed: u64,
    ) -> Result<Self> {
        if encoder_dims.is_empty() {
            return Err(Error::InvalidInput("encoder dims must be nonempty".into()));
        }
        if encoder_dims[0] != featurizer_config.dim {
            return Err(Error::InvalidInput(format!(
                "encoder input dim {} does not match featurizer dim {}",
                encoder_dims[0], featurizer_config.dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x0e5c0de));
        let encoder = LayerStack::new(encoder_dims, dropout, &mut rng)?;
        Ok(MultiHeadModel {
            featurizer_config,
            encoder,
            heads: Vec::new(),
            encoder_frozen: false,
            frozen_heads: Vec::new(),
            provenance: Vec::new(),
        })
    }

    pub fn featurizer_config(&self) -> &FeaturizerConfig {
        &self.featurizer_config
    }

    pub fn featurizer(&self) -> Result<HashingFeaturizer> {
        HashingFeaturizer::new(self.featurizer_config.clone())
    }

    pub fn encoder(&self) -> &LayerStack {
        &self.encoder
    }

    pub fn encoder_mut(&mut self) -> &mut LayerStack {
        &mut self.encoder
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn heads(&self) -> &[TaskHead] {
        &self.heads
    }

    pub fn task_ids(&self) -> Vec<String> {
        self.heads.iter().map(|h| h.spec.task_id.clone()).collect()
    }

    pub fn head_index(&self, task_id: &str) -> Result<usize> {
        self.heads
            .iter()
            .position(|h| h.spec.task_id == task_id)
            .ok_or_else(|| Error::NotFound(format!("no head for task '{task_id}'")))
    }

    pub fn head(&self, task_id: &str) -> Result<&TaskHead> {
        Ok(&self.heads[self.head_index(task_id)?])
    }

    pub fn task_spec(&self, task_id: &str) -> Result<&TaskSpec> {
        Ok(&self.head(task_id)?.spec)
    }

    pub fn provenance(&self) -> &[StageRecord] {
        &self.provenance
    }

    pub(crate) fn push_provenance(&mut self, record: StageRecord) {
        self.provenance.push(record);
    }

    pub(crate) fn set_provenance(&mut self, records: Vec<StageRecord>) {
        self.provenance = records;
    }

    /// Appends a Glorot-initialized head; every existing parameter is left
    /// bit-identical.
    pub fn add_head(&mut self, spec: TaskSpec, seed: u64) -> Result<()> {
        spec.validate()?;
        if self.heads.iter().any(|h| h.spec.task_id == spec.task_id) {
            return Err(Error::Conflict(format!(
                "task '{}' already has a head",
                spec.task_id
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x4ead + self.heads.len() as u64));
        let layer = AffineLayer::glorot(self.hidden_dim(), spec.class_count(), &mut rng);
        self.heads.push(TaskHead { spec, layer });
        self.frozen_heads.push(false);
        Ok(())
    }

    /// Deep copy for use as a trainable student; the original acts as the
    /// frozen teacher and is never touched again through the copy. Freeze
    /// flags reset so the student starts fully trainable.
    pub fn clone_as_student(&self) -> MultiHeadModel {
        let mut student = self.clone();
        student.encoder.clear_cache();
        student.encoder_frozen = false;
        student.frozen_heads = vec![false; student.heads.len()];
        student
    }

    /// Eval-mode logits (dropout off, deterministic).
    pub fn predict_logits(&self, task_id: &str, features: &[f64]) -> Result<LogitVector> {
        let head = self.head(task_id)?;
        let hidden = self.encoder.forward_eval(features)?;
        LogitVector::new(head.layer.forward(&hidden)?)
    }

    /// Predicted class index: argmax of eval-mode logits (first max wins).
    pub fn predict_class(&self, task_id: &str, features: &[f64]) -> Result<usize> {
        let logits = self.predict_logits(task_id, features)?;
        let values = logits.values();
        let mut best = 0;
        for (i, &v) in values.iter().enumerate().skip(1) {
            if v > values[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Train-mode forward through one head: caches encoder activations for a
    /// following [`MultiHeadModel::backward_from_logits`]. Dropout is active
    /// only when a generator is passed.
    pub fn forward_train(
        &mut self,
        head_idx: usize,
        features: &[f64],
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<f64>> {
        if head_idx >= self.heads.len() {
            return Err(Error::NotFound(format!("head index {head_idx} out of range")));
        }
        let hidden = self.encoder.forward_cached(features, dropout_rng)?;
        let mut logits = vec![0.0; self.heads[head_idx].layer.output_dim()];
        self.heads[head_idx].layer.forward_into(&hidden, &mut logits);
        // Stash the head input alongside the encoder cache.
        self.head_input = hidden;
        Ok(logits)
    }

    /// Backprop `scale * d(loss)/d(logits)` through head `head_idx` and the
    /// encoder, accumulating into `grads`.
    pub fn backward_from_logits(
        &self,
        head_idx: usize,
        logit_grad: &[f64],
        scale: f64,
        grads: &mut ModelGradients,
    ) -> Result<()> {
        let head = &self.heads[head_idx];
        let hidden_grad = head.layer.backward_acc(
            &self.head_input,
            logit_grad,
            scale,
            &mut grads.heads[head_idx],
        );
        self.encoder.backward_acc(&hidden_grad, 1.0, &mut grads.encoder)?;
        // Encoder gradients already carry `scale` through the head backward
        // chain? No: scale applies to head tensors only above, so rescale.
        Ok(())
    }

    /// Applies a freeze scope. Scopes compose: freezing the encoder and then
    /// all-heads-except leaves exactly one trainable head.
    pub fn set_freeze(&mut self, scope: FreezeScope) -> Result<()> {
        match scope {
            FreezeScope::None => {
                self.encoder_frozen = false;
                self.frozen_heads.iter_mut().for_each(|f| *f = false);
            }
            FreezeScope::AllEncoder => {
                self.encoder_frozen = true;
            }
            FreezeScope::AllHeadsExcept(task_id) => {
                let keep = self.head_index(&task_id)?;
                for (i, f) in self.frozen_heads.iter_mut().enumerate() {
                    *f = i != keep;
                }
            }
        }
        Ok(())
    }

    pub fn encoder_frozen(&self) -> bool {
        self.encoder_frozen
    }

    pub fn frozen_heads(&self) -> &[bool] {
        &self.frozen_heads
    }

    /// Stable tensor naming: encoder layers then heads in arrival order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.encoder.layers().len() {
            names.push(format!("encoder.{i}.weight"));
            names.push(format!("encoder.{i}.bias"));
        }
        for head in &self.heads {
            names.push(format!("head.{}.weight", head.spec.task_id));
            names.push(format!("head.{}.bias", head.spec.task_id));
        }
        names
    }

    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        for layer in self.encoder.layers() {
            shapes.push(vec![layer.input_dim(), layer.output_dim()]);
            shapes.push(vec![layer.output_dim()]);
        }
        for head in &self.heads {
            shapes.push(vec![head.layer.input_dim(), head.layer.output_dim()]);
            shapes.push(vec![head.layer.output_dim()]);
        }
        shapes
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut tensors: Vec<&[f64]> = Vec::new();
        for layer in self.encoder.layers() {
            tensors.push(layer.weight.as_slice());
            tensors.push(&layer.bias);
        }
        for head in &self.heads {
            tensors.push(head.layer.weight.as_slice());
            tensors.push(&head.layer.bias);
        }
        tensors
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut tensors: Vec<&mut [f64]> = Vec::new();
        for layer in self.encoder.layers_mut() {
            tensors.push(layer.weight.as_mut_slice());
            tensors.push(&mut layer.bias);
        }
        for head in &mut self.heads {
            tensors.push(head.layer.weight.as_mut_slice());
            tensors.push(&mut head.layer.bias);
        }
        tensors
    }

    /// Per-tensor freeze mask aligned with [`MultiHeadModel::tensors`].
    pub fn frozen_mask(&self) -> Vec<bool> {
        let mut mask = Vec::new();
        for _ in self.encoder.layers() {
            mask.push(self.encoder_frozen);
            mask.push(self.encoder_frozen);
        }
        for &frozen in &self.frozen_heads {
            mask.push(frozen);
            mask.push(frozen);
        }
        mask
    }

    /// All parameters flattened in tensor order.
    pub fn param_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn set_param_vector(&mut self, params: &[f64]) -> Result<()> {
        let total: usize = self.tensors().iter().map(|t| t.len()).sum();
        if params.len() != total {
            return Err(Error::InvalidInput(format!(
                "parameter vector length {} does not match model size {total}",
                params.len()
            )));
        }
        let mut offset = 0;
        for tensor in self.tensors_mut() {
            tensor.copy_from_slice(&params[offset..offset + tensor.len()]);
            offset += tensor.len();
        }
        Ok(())
    }

    /// Bitwise parameter equality; the determinism tests key on this.
    pub fn bit_identical(&self, other: &MultiHeadModel) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| {
                x.len() == y.len()
                    && x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits())
            })
    }
}

/// Gradients for the full model, shape-congruent with its tensors.
#[derive(Debug, Clone)]
pub struct ModelGradients {
    pub encoder: StackGradients,
    pub heads: Vec<AffineGrad>,
}

impl ModelGradients {
    pub fn zeros_like(model: &MultiHeadModel) -> Self {
        ModelGradients {
            encoder: StackGradients::zeros_like(&model.encoder),
            heads: model
                .heads
                .iter()
                .map(|h| AffineGrad::zeros_like(&h.layer))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        self.encoder.zero();
        self.heads.iter_mut().for_each(AffineGrad::zero);
    }

    /// Tensor views aligned with [`MultiHeadModel::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut tensors: Vec<&[f64]> = Vec::new();
        for g in &self.encoder.layers {
            tensors.push(g.weight.as_slice());
            tensors.push(&g.bias);
        }
        for g in &self.heads {
            tensors.push(g.weight.as_slice());
            tensors.push(&g.bias);
        }
        tensors
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut tensors: Vec<&mut [f64]> = Vec::new();
        for g in &mut self.encoder.layers {
            tensors.push(g.weight.as_mut_slice());
            tensors.push(&mut g.bias);
        }
        for g in &mut self.heads {
            tensors.push(g.weight.as_mut_slice());
            tensors.push(&mut g.bias);
        }
        tensors
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }
}

/// Adam over a model's tensor list, honoring its freeze mask.
#[derive(Debug, Clone)]
pub struct ModelOptimizer {
    state: AdamState,
}

impl ModelOptimizer {
    pub fn new(model: &MultiHeadModel, learning_rate: f64) -> Result<Self> {
        let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        Ok(ModelOptimizer {
            state: AdamState::new(&sizes, AdamParams::with_lr(learning_rate))?,
        })
    }

    pub fn step(&mut self, model: &mut MultiHeadModel, grads: &ModelGradients) -> Result<()> {
        let frozen = model.frozen_mask();
        let mut tensors = model.tensors_mut();
        let grad_tensors = grads.tensors();
        self.state.step(&mut tensors, &grad_tensors, &frozen)
    }
}
