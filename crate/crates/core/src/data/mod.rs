//! Dataset ingestion, featurization, synthetic benchmark generation,
//! disjoint slicing, and batch iteration.

mod featurizer;
mod loader;
mod synthetic;

pub use featurizer::{FeaturizerConfig, HashingFeaturizer, SparseVec};
pub use loader::{load_dataset, write_dataset, DatasetFormat};
pub use synthetic::{preset_specs, BayesRule, SyntheticTaskSpec, PRESET_ASSISTANT_LIKE, PRESET_GLUE_LIKE};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TaskSpec;

pub const TRAIN_SPLIT: &str = "train";
pub const DEV_SPLIT: &str = "dev";

/// One text example. `label` is an index into the task's label names; `None`
/// marks unlabeled data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: u64,
    pub text_a: String,
    pub text_b: Option<String>,
    pub label: Option<usize>,
    pub split: String,
}

/// A task's examples plus the spec that interprets them.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub task_id: String,
    pub spec: TaskSpec,
    pub examples: Vec<Example>,
    pub provenance: String,
}

impl TaskDataset {
    pub fn new(
        spec: TaskSpec,
        examples: Vec<Example>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let ds = TaskDataset {
            task_id: spec.task_id.clone(),
            spec,
            examples,
            provenance: provenance.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let class_count = self.spec.class_count();
        for ex in &self.examples {
            if ex.text_a.trim().is_empty() {
                return Err(Error::InvalidInput(format!(
                    "example {} of task {} has empty text_a",
                    ex.id, self.task_id
                )));
            }
            if ex.split != TRAIN_SPLIT
                && ex.split != DEV_SPLIT
                && !self.spec.eval_splits.iter().any(|s| s == &ex.split)
            {
                return Err(Error::InvalidInput(format!(
                    "example {} of task {} has unknown split tag '{}'",
                    ex.id, self.task_id, ex.split
                )));
            }
            if let Some(label) = ex.label {
                if label >= class_count {
                    return Err(Error::InvalidInput(format!(
                        "example {} of task {} has label index {} out of {} classes",
                        ex.id, self.task_id, label, class_count
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn split(&self, name: &str) -> Vec<&Example> {
        self.examples.iter().filter(|e| e.split == name).collect()
    }

    pub fn train(&self) -> Vec<&Example> {
        self.split(TRAIN_SPLIT)
    }

    pub fn train_len(&self) -> usize {
        self.examples.iter().filter(|e| e.split == TRAIN_SPLIT).count()
    }

    pub fn has_split(&self, name: &str) -> bool {
        self.examples.iter().any(|e| e.split == name)
    }

    /// Unlabeled view of this dataset's `split`, capped at `limit` examples,
    /// retagged as training data for stream consumption.
    pub fn as_unlabeled_stream(&self, split: &str, limit: Option<usize>) -> TaskDataset {
        let mut examples: Vec<Example> = self
            .examples
            .iter()
            .filter(|e| e.split == split)
            .cloned()
            .collect();
        if let Some(limit) = limit {
            examples.truncate(limit);
        }
        for ex in &mut examples {
            ex.label = None;
            ex.split = TRAIN_SPLIT.to_string();
        }
        TaskDataset {
            task_id: self.task_id.clone(),
            spec: self.spec.clone(),
            examples,
            provenance: format!("{} (unlabeled {split} stream)", self.provenance),
        }
    }

    /// Replaces the training split with the given examples, keeping all
    /// evaluation splits. Used to train on one slice at a time.
    pub fn with_train_examples(&self, train: Vec<Example>) -> TaskDataset {
        let mut examples: Vec<Example> = self
            .examples
            .iter()
            .filter(|e| e.split != TRAIN_SPLIT)
            .cloned()
            .collect();
        examples.extend(train.into_iter().map(|mut e| {
            e.split = TRAIN_SPLIT.to_string();
            e
        }));
        TaskDataset {
            task_id: self.task_id.clone(),
            spec: self.spec.clone(),
            examples,
            provenance: self.provenance.clone(),
        }
    }
}

/// Ordered, pairwise-disjoint slices of a training set.
#[derive(Debug, Clone)]
pub struct SliceSet {
    pub task_id: String,
    pub slices: Vec<Vec<Example>>,
}

impl SliceSet {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

/// Seeded shuffle of the training split followed by a contiguous partition
/// into `k` slices of equal size; the last slice absorbs the remainder.
pub fn slice(dataset: &TaskDataset, k: usize, seed: u64) -> Result<SliceSet> {
    let mut train: Vec<Example> = dataset.train().into_iter().cloned().collect();
    if k == 0 {
        return Err(Error::InvalidInput("slice count must be at least 1".into()));
    }
    if k > train.len() {
        return Err(Error::InvalidInput(format!(
            "cannot cut {} training examples into {k} slices",
            train.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    train.shuffle(&mut rng);

    let base = train.len() / k;
    let mut slices = Vec::with_capacity(k);
    let mut rest = train;
    for _ in 0..k - 1 {
        let tail = rest.split_off(base);
        slices.push(rest);
        rest = tail;
    }
    slices.push(rest);
    Ok(SliceSet {
        task_id: dataset.task_id.clone(),
        slices,
    })
}

/// Repeats every training example `factor` times; dev and eval splits are
/// untouched.
pub fn upsample(dataset: &TaskDataset, factor: usize) -> Result<TaskDataset> {
    if factor == 0 {
        return Err(Error::InvalidInput("upsample factor must be at least 1".into()));
    }
    let mut examples = Vec::with_capacity(dataset.examples.len());
    for ex in &dataset.examples {
        if ex.split == TRAIN_SPLIT {
            for _ in 0..factor {
                examples.push(ex.clone());
            }
        } else {
            examples.push(ex.clone());
        }
    }
    Ok(TaskDataset {
        task_id: dataset.task_id.clone(),
        spec: dataset.spec.clone(),
        examples,
        provenance: if factor == 1 {
            dataset.provenance.clone()
        } else {
            format!("{} (train x{factor})", dataset.provenance)
        },
    })
}

/// Per-epoch batch order: a seeded shuffle of `0..n` keyed by `seed ^ epoch`,
/// chunked into `batch_size` groups with the final partial batch emitted.
pub fn batch_indices(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// A split featurized once, ready for batched training or evaluation.
#[derive(Debug, Clone)]
pub struct FeaturizedSplit {
    pub task_id: String,
    pub features: Vec<SparseVec>,
    pub labels: Vec<Option<usize>>,
    pub ids: Vec<u64>,
}

impl FeaturizedSplit {
    pub fn build(
        featurizer: &HashingFeaturizer,
        task_id: &str,
        examples: &[&Example],
    ) -> Result<Self> {
        let mut features = Vec::with_capacity(examples.len());
        let mut labels = Vec::with_capacity(examples.len());
        let mut ids = Vec::with_capacity(examples.len());
        for ex in examples {
            features.push(featurizer.featurize_sparse(ex)?);
            labels.push(ex.label);
            ids.push(ex.id);
        }
        Ok(FeaturizedSplit {
            task_id: task_id.to_string(),
            features,
            labels,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Seeded feature/label batches for one epoch.
    pub fn batches(&self, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
        batch_indices(self.len(), batch_size, seed, epoch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InputArity, PrimaryMetric};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn tiny_spec(task_id: &str) -> TaskSpec {
        TaskSpec {
            task_id: task_id.to_string(),
            label_names: vec!["no".into(), "yes".into()],
            input_arity: InputArity::OneSegment,
            primary_metric: PrimaryMetric::Accuracy,
            eval_splits: vec![DEV_SPLIT.to_string()],
        }
    }

    fn dataset_with_train(n: usize) -> TaskDataset {
        let examples = (0..n)
            .map(|i| Example {
                id: i as u64,
                text_a: format!("w{i} w{}", i + 1),
                text_b: None,
                label: Some(i % 2),
                split: TRAIN_SPLIT.to_string(),
            })
            .collect();
        TaskDataset::new(tiny_spec("t"), examples, "test").unwrap()
    }

    #[test]
    fn slice_even_partition() {
        let ds = dataset_with_train(100);
        let set = slice(&ds, 5, 7).unwrap();
        assert_eq!(set.len(), 5);
        assert!(set.slices.iter().all(|s| s.len() == 20));
        let mut seen = BTreeSet::new();
        for s in &set.slices {
            for ex in s {
                assert!(seen.insert(ex.id), "example {} in two slices", ex.id);
            }
        }
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn slice_remainder_goes_to_last() {
        let ds = dataset_with_train(103);
        let set = slice(&ds, 5, 7).unwrap();
        let sizes: Vec<usize> = set.slices.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![20, 20, 20, 20, 23]);
    }

    #[test]
    fn slice_k1_is_whole_set() {
        let ds = dataset_with_train(10);
        let set = slice(&ds, 1, 7).unwrap();
        assert_eq!(set.slices[0].len(), 10);
    }

    #[test]
    fn slice_too_many_is_invalid() {
        let ds = dataset_with_train(4);
        assert!(slice(&ds, 5, 7).is_err());
    }

    #[test]
    fn upsample_multiplies_train_only() {
        let mut ds = dataset_with_train(50);
        ds.examples.push(Example {
            id: 1000,
            text_a: "dev example".into(),
            text_b: None,
            label: Some(0),
            split: DEV_SPLIT.to_string(),
        });
        let up = upsample(&ds, 4).unwrap();
        assert_eq!(up.train_len(), 200);
        assert_eq!(up.split(DEV_SPLIT).len(), 1);
    }

    #[test]
    fn upsample_identity() {
        let ds = dataset_with_train(10);
        let up = upsample(&ds, 1).unwrap();
        assert_eq!(up, ds);
    }

    #[test]
    fn upsample_zero_rejected() {
        let ds = dataset_with_train(10);
        assert!(upsample(&ds, 0).is_err());
    }

    #[test]
    fn batch_sizes_with_partial_tail() {
        let batches = batch_indices(130, 64, 3, 1);
        let sizes: Vec<usize> = batches.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![64, 64, 2]);
    }

    #[test]
    fn batches_deterministic_per_seed_epoch() {
        assert_eq!(batch_indices(100, 16, 9, 4), batch_indices(100, 16, 9, 4));
    }

    #[test]
    fn different_epochs_shuffle_differently() {
        let a: Vec<usize> = batch_indices(1000, 1000, 5, 1).remove(0);
        let b: Vec<usize> = batch_indices(1000, 1000, 5, 2).remove(0);
        assert_ne!(a, b);
    }

    #[test]
    fn unknown_split_tag_rejected() {
        let spec = tiny_spec("t");
        let examples = vec![Example {
            id: 0,
            text_a: "x".into(),
            text_b: None,
            label: Some(0),
            split: "mystery".into(),
        }];
        assert!(TaskDataset::new(spec, examples, "test").is_err());
    }

    #[test]
    fn unlabeled_stream_strips_labels() {
        let ds = dataset_with_train(8);
        let stream = ds.as_unlabeled_stream(TRAIN_SPLIT, Some(5));
        assert_eq!(stream.train_len(), 5);
        assert!(stream.examples.iter().all(|e| e.label.is_none()));
    }

    proptest! {
        #[test]
        fn slices_are_disjoint_and_cover(n in 1usize..200, k_raw in 1usize..20, seed in 0u64..1000) {
            let k = k_raw.min(n);
            let ds = dataset_with_train(n);
            let set = slice(&ds, k, seed).unwrap();
            let mut seen = BTreeSet::new();
            let mut total = 0;
            for s in &set.slices {
                total += s.len();
                for ex in s {
                    prop_assert!(seen.insert(ex.id));
                }
            }
            prop_assert_eq!(total, n);
            prop_assert_eq!(set.len(), k);
        }

        #[test]
        fn batches_partition_indices(n in 1usize..300, bs in 1usize..70, seed in 0u64..50, epoch in 0u64..5) {
            let batches = batch_indices(n, bs, seed, epoch);
            let mut seen = BTreeSet::new();
            for b in &batches {
                prop_assert!(b.len() <= bs);
                for &i in b {
                    prop_assert!(seen.insert(i));
                }
            }
            prop_assert_eq!(seen.len(), n);
        }
    }
}
