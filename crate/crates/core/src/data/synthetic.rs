//! Synthetic multi-task benchmark generator with a closed-form Bayes oracle.
//!
//! Each task owns a disjoint integer token range; classes are
//! class-conditional unigram distributions over that range, so the
//! Bayes-optimal classifier is computable directly from the spec and serves
//! as a calibration oracle for trained models. Tasks with disjoint
//! vocabularies have strongly different input distributions, which is what
//! makes naive fine-tuning forget.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Example, TaskDataset, TRAIN_SPLIT};
use crate::error::{Error, Result};
use crate::model::{InputArity, PrimaryMetric, TaskSpec};
use crate::nn::mix64;

pub const PRESET_GLUE_LIKE: &str = "glue-like";
pub const PRESET_ASSISTANT_LIKE: &str = "assistant-like";

/// Generative spec for one synthetic task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTaskSpec {
    pub task_id: String,
    pub class_count: usize,
    /// First token id of this task's vocabulary block.
    pub vocab_start: u64,
    /// Block size; token ids cover `vocab_start..vocab_start + vocab_size`.
    pub vocab_size: usize,
    /// `class_count` rows, each a distribution over the vocabulary block.
    pub class_token_dists: Vec<Vec<f64>>,
    /// Inclusive sentence length range.
    pub length_range: (usize, usize),
    /// Class prior; supports skewed distributions.
    pub class_prior: Vec<f64>,
    /// Generate `(text_a, text_b)` pairs rather than single sentences.
    #[serde(default)]
    pub two_segment: bool,
    pub seed: u64,
    /// Examples per split; must contain `train` and at least one eval split.
    pub split_sizes: BTreeMap<String, usize>,
    /// Per-split mixing weight toward a uniform distribution over the block,
    /// used to model distribution-shifted eval splits such as `mismatched`.
    #[serde(default)]
    pub split_noise: BTreeMap<String, f64>,
    #[serde(default)]
    pub primary_metric: PrimaryMetric,
    /// Label names; defaults to `class_0..class_{n-1}`.
    #[serde(default)]
    pub label_names: Option<Vec<String>>,
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(Error::InvalidInput(format!(
                "task {}: vocabulary block is empty",
                self.task_id
            )));
        }
        if self.class_count < 2 {
            return Err(Error::InvalidInput(format!(
                "task {}: need at least 2 classes",
                self.task_id
            )));
        }
        if self.class_token_dists.len() != self.class_count {
            return Err(Error::InvalidInput(format!(
                "task {}: {} class distributions for {} classes",
                self.task_id,
                self.class_token_dists.len(),
                self.class_count
            )));
        }
        for (c, dist) in self.class_token_dists.iter().enumerate() {
            if dist.len() != self.vocab_size {
                return Err(Error::InvalidInput(format!(
                    "task {}: class {c} distribution has {} entries for vocab {}",
                    self.task_id,
                    dist.len(),
                    self.vocab_size
                )));
            }
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || dist.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidInput(format!(
                    "task {}: class {c} distribution does not sum to 1 (sum {sum})",
                    self.task_id
                )));
            }
        }
        if self.class_prior.len() != self.class_count {
            return Err(Error::InvalidInput(format!(
                "task {}: prior length {} for {} classes",
                self.task_id,
                self.class_prior.len(),
                self.class_count
            )));
        }
        let prior_sum: f64 = self.class_prior.iter().sum();
        if (prior_sum - 1.0).abs() > 1e-9 || self.class_prior.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidInput(format!(
                "task {}: class prior does not sum to 1 (sum {prior_sum})",
                self.task_id
            )));
        }
        if self.length_range.0 == 0 || self.length_range.0 > self.length_range.1 {
            return Err(Error::InvalidInput(format!(
                "task {}: bad sentence length range {:?}",
                self.task_id, self.length_range
            )));
        }
        if !self.split_sizes.contains_key(TRAIN_SPLIT) {
            return Err(Error::InvalidInput(format!(
                "task {}: split sizes must include '{TRAIN_SPLIT}'",
                self.task_id
            )));
        }
        if !self.split_sizes.keys().any(|k| k != TRAIN_SPLIT) {
            return Err(Error::InvalidInput(format!(
                "task {}: need at least one evaluation split",
                self.task_id
            )));
        }
        if let Some(names) = &self.label_names {
            if names.len() != self.class_count {
                return Err(Error::InvalidInput(format!(
                    "task {}: {} label names for {} classes",
                    self.task_id,
                    names.len(),
                    self.class_count
                )));
            }
        }
        Ok(())
    }

    /// The task spec implied by this generator.
    pub fn task_spec(&self) -> TaskSpec {
        let label_names = self.label_names.clone().unwrap_or_else(|| {
            (0..self.class_count).map(|c| format!("class_{c}")).collect()
        });
        let eval_splits: Vec<String> = self
            .split_sizes
            .keys()
            .filter(|k| k.as_str() != TRAIN_SPLIT)
            .cloned()
            .collect();
        TaskSpec {
            task_id: self.task_id.clone(),
            label_names,
            input_arity: if self.two_segment {
                InputArity::TwoSegment
            } else {
                InputArity::OneSegment
            },
            primary_metric: self.primary_metric.clone(),
            eval_splits,
        }
    }

    fn token_string(&self, offset: usize) -> String {
        format!("w{}", self.vocab_start + offset as u64)
    }
}

/// Closed-form Bayes-optimal classifier implied by a [`SyntheticTaskSpec`].
#[derive(Debug, Clone)]
pub struct BayesRule {
    pub task_id: String,
    vocab_start: u64,
    vocab_size: usize,
    ln_prior: Vec<f64>,
    ln_token: Vec<Vec<f64>>,
}

impl BayesRule {
    fn from_spec(spec: &SyntheticTaskSpec) -> Self {
        let ln = |p: f64| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
        BayesRule {
            task_id: spec.task_id.clone(),
            vocab_start: spec.vocab_start,
            vocab_size: spec.vocab_size,
            ln_prior: spec.class_prior.iter().map(|&p| ln(p)).collect(),
            ln_token: spec
                .class_token_dists
                .iter()
                .map(|dist| dist.iter().map(|&p| ln(p)).collect())
                .collect(),
        }
    }

    /// Argmax over ln prior_c + sum_tokens ln p(token | c); tokens outside
    /// the task's vocabulary block are ignored.
    pub fn classify(&self, example: &Example) -> usize {
        let mut scores = self.ln_prior.clone();
        let mut score_tokens = |text: &str| {
            for token in text.split_whitespace() {
                let Some(id) = token.strip_prefix('w').and_then(|s| s.parse::<u64>().ok()) else {
                    continue;
                };
                if id < self.vocab_start || id >= self.vocab_start + self.vocab_size as u64 {
                    continue;
                }
                let offset = (id - self.vocab_start) as usize;
                for (c, score) in scores.iter_mut().enumerate() {
                    *score += self.ln_token[c][offset];
                }
            }
        };
        score_tokens(&example.text_a);
        if let Some(text_b) = &example.text_b {
            score_tokens(text_b);
        }
        argmax(&scores)
    }

    /// Accuracy of the Bayes rule on labeled examples.
    pub fn accuracy(&self, examples: &[&Example]) -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let correct = examples
            .iter()
            .filter(|ex| ex.label == Some(self.classify(ex)))
            .count();
        correct as f64 / examples.len() as f64
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn sample_index(cumulative: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    match cumulative.iter().position(|&c| u < c) {
        Some(i) => i,
        None => cumulative.len() - 1,
    }
}

fn cumsum(dist: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    dist.iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect()
}

/// Samples a dataset from the spec and returns it with the Bayes oracle.
/// Deterministic per seed; each split draws from its own derived stream so
/// split sizes can change without disturbing one another.
pub fn gen_synthetic(spec: &SyntheticTaskSpec) -> Result<(TaskDataset, BayesRule)> {
    spec.validate()?;
    let prior_cum = cumsum(&spec.class_prior);
    let clean_cums: Vec<Vec<f64>> = spec.class_token_dists.iter().map(|d| cumsum(d)).collect();

    let mut examples = Vec::new();
    let mut next_id = 0u64;
    for (split, &size) in &spec.split_sizes {
        let noise = spec.split_noise.get(split).copied().unwrap_or(0.0);
        let cums: Vec<Vec<f64>> = if noise > 0.0 {
            let uniform = 1.0 / spec.vocab_size as f64;
            spec.class_token_dists
                .iter()
                .map(|dist| {
                    let mixed: Vec<f64> = dist
                        .iter()
                        .map(|&p| (1.0 - noise) * p + noise * uniform)
                        .collect();
                    cumsum(&mixed)
                })
                .collect()
        } else {
            clean_cums.clone()
        };

        let mut split_hash = 0xcbf29ce484222325u64;
        for b in split.bytes() {
            split_hash ^= b as u64;
            split_hash = split_hash.wrapping_mul(0x100000001b3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(spec.seed ^ split_hash));

        for _ in 0..size {
            let class = sample_index(&prior_cum, &mut rng);
            let mut gen_text = |rng: &mut ChaCha8Rng| {
                let len = rng.random_range(spec.length_range.0..=spec.length_range.1);
                let mut tokens = Vec::with_capacity(len);
                for _ in 0..len {
                    tokens.push(spec.token_string(sample_index(&cums[class], rng)));
                }
                tokens.join(" ")
            };
            let text_a = gen_text(&mut rng);
            let text_b = if spec.two_segment {
                Some(gen_text(&mut rng))
            } else {
                None
            };
            examples.push(Example {
                id: next_id,
                text_a,
                text_b,
                label: Some(class),
                split: split.clone(),
            });
            next_id += 1;
        }
    }

    let dataset = TaskDataset::new(
        spec.task_spec(),
        examples,
        format!("synthetic seed {}", spec.seed),
    )?;
    Ok((dataset, BayesRule::from_spec(spec)))
}

/// Class-conditional rows for a block of `class_count * chunk` tokens: class
/// `c` puts `weight_own` of its mass uniformly on chunk `c` and spreads the
/// rest over the whole block. `weight_own` of 1 gives disjoint keyword sets.
fn chunked_dists(class_count: usize, chunk: usize, weight_own: f64) -> Vec<Vec<f64>> {
    let vocab = class_count * chunk;
    let shared = (1.0 - weight_own) / vocab as f64;
    (0..class_count)
        .map(|c| {
            let mut row = vec![shared; vocab];
            for t in c * chunk..(c + 1) * chunk {
                row[t] += weight_own / chunk as f64;
            }
            // Exact renormalization against accumulated rounding.
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
            row
        })
        .collect()
}

/// Geometric-decay class prior with skew `s`: p_c proportional to exp(-s c).
fn skewed_prior(class_count: usize, s: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..class_count).map(|c| (-s * c as f64).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / sum).collect()
}

struct PresetTask {
    name: &'static str,
    classes: usize,
    chunk: usize,
    weight_own: f64,
    train: usize,
    dev: usize,
    extra_eval: Option<(&'static str, usize, f64)>,
    length: (usize, usize),
    skew: f64,
    two_segment: bool,
    metric: PrimaryMetric,
}

fn build_preset(tasks: &[PresetTask], vocab_stride: u64, base_seed: u64) -> Vec<SyntheticTaskSpec> {
    tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut split_sizes = BTreeMap::new();
            split_sizes.insert(TRAIN_SPLIT.to_string(), t.train);
            split_sizes.insert("dev".to_string(), t.dev);
            let mut split_noise = BTreeMap::new();
            if let Some((name, size, noise)) = t.extra_eval {
                split_sizes.insert(name.to_string(), size);
                split_noise.insert(name.to_string(), noise);
            }
            SyntheticTaskSpec {
                task_id: t.name.to_string(),
                class_count: t.classes,
                vocab_start: 1 + i as u64 * vocab_stride,
                vocab_size: t.classes * t.chunk,
                class_token_dists: chunked_dists(t.classes, t.chunk, t.weight_own),
                length_range: t.length,
                class_prior: skewed_prior(t.classes, t.skew),
                two_segment: t.two_segment,
                seed: mix64(base_seed ^ (0xbe5e7 + i as u64)),
                split_sizes,
                split_noise,
                primary_metric: t.metric.clone(),
                label_names: None,
            }
        })
        .collect()
}

/// Shipped benchmark presets.
///
/// `glue-like`: five sentence-pair tasks with disjoint vocabulary blocks and
/// descending training sizes; the first task carries an extra
/// distribution-shifted `mismatched` eval split.
///
/// `assistant-like`: five single-sentence intent domains with 5-13 classes
/// each and increasingly skewed label priors.
pub fn preset_specs(name: &str, base_seed: u64) -> Result<Vec<SyntheticTaskSpec>> {
    match name {
        PRESET_GLUE_LIKE => Ok(build_preset(
            &[
                PresetTask {
                    name: "synth-nli",
                    classes: 3,
                    chunk: 20,
                    weight_own: 0.55,
                    train: 3000,
                    dev: 500,
                    extra_eval: Some(("mismatched", 400, 0.3)),
                    length: (8, 16),
                    skew: 0.0,
                    two_segment: true,
                    metric: PrimaryMetric::Accuracy,
                },
                PresetTask {
                    name: "synth-qqp",
                    classes: 2,
                    chunk: 30,
                    weight_own: 0.55,
                    train: 2400,
                    dev: 500,
                    extra_eval: None,
                    length: (8, 16),
                    skew: 0.0,
                    two_segment: true,
                    metric: PrimaryMetric::F1Binary { positive_class: 1 },
                },
                PresetTask {
                    name: "synth-qnli",
                    classes: 2,
                    chunk: 30,
                    weight_own: 0.55,
                    train: 1800,
                    dev: 400,
                    extra_eval: None,
                    length: (8, 16),
                    skew: 0.0,
                    two_segment: true,
                    metric: PrimaryMetric::Accuracy,
                },
                PresetTask {
                    name: "synth-mrpc",
                    classes: 2,
                    chunk: 30,
                    weight_own: 0.55,
                    train: 1200,
                    dev: 300,
                    extra_eval: None,
                    length: (8, 16),
                    skew: 0.0,
                    two_segment: true,
                    metric: PrimaryMetric::F1Binary { positive_class: 1 },
                },
                PresetTask {
                    name: "synth-rte",
                    classes: 2,
                    chunk: 30,
                    weight_own: 0.55,
                    train: 600,
                    dev: 200,
                    extra_eval: None,
                    length: (8, 16),
                    skew: 0.0,
                    two_segment: true,
                    metric: PrimaryMetric::Accuracy,
                },
            ],
            1000,
            base_seed,
        )),
        PRESET_ASSISTANT_LIKE => Ok(build_preset(
            &[
                PresetTask {
                    name: "domain-1",
                    classes: 12,
                    chunk: 6,
                    weight_own: 0.7,
                    train: 1900,
                    dev: 400,
                    extra_eval: None,
                    length: (4, 10),
                    skew: 0.01,
                    two_segment: false,
                    metric: PrimaryMetric::F1Macro,
                },
                PresetTask {
                    name: "domain-2",
                    classes: 11,
                    chunk: 6,
                    weight_own: 0.7,
                    train: 1310,
                    dev: 280,
                    extra_eval: None,
                    length: (4, 10),
                    skew: 0.3,
                    two_segment: false,
                    metric: PrimaryMetric::F1Macro,
                },
                PresetTask {
                    name: "domain-3",
                    classes: 5,
                    chunk: 6,
                    weight_own: 0.7,
                    train: 995,
                    dev: 215,
                    extra_eval: None,
                    length: (4, 10),
                    skew: 0.45,
                    two_segment: false,
                    metric: PrimaryMetric::F1Macro,
                },
                PresetTask {
                    name: "domain-4",
                    classes: 11,
                    chunk: 6,
                    weight_own: 0.7,
                    train: 610,
                    dev: 180,
                    extra_eval: None,
                    length: (4, 10),
                    skew: 0.35,
                    two_segment: false,
                    metric: PrimaryMetric::F1Macro,
                },
                PresetTask {
                    name: "domain-5",
                    classes: 13,
                    chunk: 6,
                    weight_own: 0.7,
                    train: 400,
                    dev: 160,
                    extra_eval: None,
                    length: (4, 10),
                    skew: 0.3,
                    two_segment: false,
                    metric: PrimaryMetric::F1Macro,
                },
            ],
            10_000,
            mix64(base_seed ^ 0xa551),
        )),
        other => Err(Error::Config(format!(
            "unknown preset '{other}'; available: {PRESET_GLUE_LIKE}, {PRESET_ASSISTANT_LIKE}"
        ))),
    }
}
