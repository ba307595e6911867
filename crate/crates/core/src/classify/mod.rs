//! Neural type classifiers over fused entity features.
//!
//! Three regimes share one network shape (two ReLU hidden layers and a linear
//! output layer): flat multi-class with a softmax head, flat multi-label with
//! independent sigmoids, and a per-level hierarchy of flat classifiers whose
//! predictions are repaired into a consistent root-anchored path.

mod checkpoint;
mod hierarchy;
mod loss;
mod lpl;
mod mlp;

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval;
use crate::util::seeded_rng;
use crate::vectors::KeyedVectors;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader, ModelHeader};
pub use hierarchy::{repair_path, repair_sets, ClassId, TypeHierarchy};
pub use loss::{sigmoid, sigmoid_bce, softmax, softmax_ce};
pub use lpl::{
    predict_hierarchical, predict_hierarchical_sets, project_level, train_lpl, LevelModel, LplModel,
};
pub use mlp::{argmax, decide, Adam, AdamConfig, Dense, Gradients, Head, Mlp, Prediction, Targets};

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("expected input dimension {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("targets do not match the output head")]
    HeadMismatch,
    #[error("no feature vector for {0}")]
    MissingFeature(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("inconsistent hierarchy: {0}")]
    InconsistentHierarchy(String),
    #[error("{iri}: unknown class {class}")]
    UnknownClass { iri: String, class: String },
    #[error("{0}: multi-class mode needs exactly one label")]
    MultiLabelRow(String),
    #[error("hierarchy contains a cycle through {0}")]
    CyclicHierarchy(String),
    #[error("class {0} has more than one parent")]
    MultipleParents(String),
    #[error("non-finite parameters after epoch {0}")]
    NonFinite(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One labeled entity. Labels are class names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub entity: String,
    pub labels: Vec<String>,
}

impl Example {
    pub fn new(entity: impl Into<String>, labels: &[&str]) -> Self {
        Example {
            entity: entity.into(),
            labels: labels.iter().map(|l| l.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Disjoint train / validation / test partitions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
}

impl LabeledDataset {
    pub fn split(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &Example> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    /// Sorted set of every label used anywhere in the dataset.
    pub fn class_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.all().flat_map(|e| e.labels.iter().cloned()).collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn is_single_label(&self) -> bool {
        self.all().all(|e| e.labels.len() == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub early_stop: Option<usize>,
    pub hidden: Vec<usize>,
    /// Multiplier on the output layer's initial weights.
    pub output_scale: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            batch_size: 64,
            epochs: 100,
            adam: AdamConfig::default(),
            seed: 42,
            early_stop: None,
            hidden: vec![512, 256],
            output_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_micro_f1: Option<f64>,
}

/// A trained flat classifier and the names of its output classes.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub model: Mlp,
    pub classes: Vec<String>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainedClassifier {
    /// Class names predicted for `x`.
    pub fn predict_labels(&self, x: &[f64]) -> Result<Vec<String>, ClassifyError> {
        Ok(self
            .model
            .predict(x)?
            .classes()
            .into_iter()
            .map(|c| self.classes[c].clone())
            .collect())
    }
}

/// Feature rows for `examples`, in order.
pub fn feature_matrix(
    examples: &[Example],
    features: &KeyedVectors<f64>,
) -> Result<Array2<f64>, ClassifyError> {
    let dim = features.dim();
    let mut x = Array2::zeros((examples.len(), dim));
    for (r, ex) in examples.iter().enumerate() {
        let v = features
            .get(&ex.entity)
            .ok_or_else(|| ClassifyError::MissingFeature(ex.entity.clone()))?;
        x.row_mut(r).assign(&ndarray::ArrayView1::from(v));
    }
    Ok(x)
}

fn encode_targets(
    examples: &[Example],
    classes: &HashMap<&str, usize>,
    head: Head,
) -> Result<Targets, ClassifyError> {
    let lookup = |ex: &Example, l: &String| {
        classes.get(l.as_str()).copied().ok_or_else(|| ClassifyError::UnknownClass {
            iri: ex.entity.clone(),
            class: l.clone(),
        })
    };
    match head {
        Head::Softmax => examples
            .iter()
            .map(|ex| match ex.labels.as_slice() {
                [l] => lookup(ex, l),
                _ => Err(ClassifyError::MultiLabelRow(ex.entity.clone())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Targets::Classes),
        Head::Sigmoid => {
            let mut bits = Array2::from_elem((examples.len(), classes.len()), false);
            for (r, ex) in examples.iter().enumerate() {
                for l in &ex.labels {
                    bits[[r, lookup(ex, l)?]] = true;
                }
            }
            Ok(Targets::Bits(bits))
        }
    }
}

fn target_sets(targets: &Targets) -> Vec<Vec<usize>> {
    match targets {
        Targets::Classes(c) => c.iter().map(|&c| vec![c]).collect(),
        Targets::Bits(b) => b
            .rows()
            .into_iter()
            .map(|r| r.iter().enumerate().filter(|(_, &on)| on).map(|(i, _)| i).collect())
            .collect(),
    }
}

/// Predicted class sets for every row of `x`.
pub fn predict_batch(model: &Mlp, x: ArrayView2<'_, f64>) -> Result<Vec<Vec<usize>>, ClassifyError> {
    let logits = model.forward_batch(x)?;
    Ok(logits
        .rows()
        .into_iter()
        .map(|r| decide(model.head, &r.to_vec()).classes())
        .collect())
}

/// Mini-batch Adam training of one flat classifier over `classes`.
///
/// Training data is reshuffled every epoch from a stream derived from the
/// seed and the epoch number. With a non-empty validation set the parameters
/// of the epoch with the best validation micro-F1 are returned (earliest on
/// ties); otherwise those of the last epoch. `observe` sees the live model
/// after every epoch.
pub fn train_classifier(
    train: &[Example],
    validation: &[Example],
    features: &KeyedVectors<f64>,
    classes: &[String],
    head: Head,
    spec: &TrainSpec,
    observe: &mut dyn FnMut(usize, &Mlp),
) -> Result<TrainedClassifier, ClassifyError> {
    if train.is_empty() {
        return Err(ClassifyError::EmptyTrainSet);
    }
    let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let x = feature_matrix(train, features)?;
    let y = encode_targets(train, &index, head)?;
    let val = if validation.is_empty() {
        None
    } else {
        let vx = feature_matrix(validation, features)?;
        let vy = target_sets(&encode_targets(validation, &index, head)?);
        Some((vx, vy))
    };

    let mut model = Mlp::new(
        features.dim(),
        &spec.hidden,
        classes.len(),
        head,
        spec.seed,
        spec.output_scale,
    );
    let mut opt = Adam::new(spec.adam, &model);
    let batch = spec.batch_size.max(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, Mlp)> = None;
    let mut history = Vec::with_capacity(spec.epochs);
    let mut stale = 0usize;

    for epoch in 1..=spec.epochs {
        let mut rng: ChaCha8Rng = seeded_rng(spec.seed, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for rows in order.chunks(batch) {
            let bx = x.select(ndarray::Axis(0), rows);
            let by = y.select(rows);
            let (loss, grads) = model.loss_and_gradients(bx.view(), &by)?;
            opt.step(&mut model, &grads);
            loss_sum += loss * rows.len() as f64;
        }
        if !model.all_finite() {
            return Err(ClassifyError::NonFinite(epoch));
        }
        observe(epoch, &model);

        let val_f1 = match &val {
            Some((vx, vy)) => {
                let pred = predict_batch(&model, vx.view())?;
                Some(eval::micro_f1(&pred, vy, classes.len()))
            }
            None => None,
        };
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            validation_micro_f1: val_f1,
        });
        if let Some(f1) = val_f1 {
            if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
                best = Some((f1, epoch, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if spec.early_stop.is_some_and(|p| stale >= p) {
                    break;
                }
            }
        }
    }

    let last = history.last().map_or(0, |r| r.epoch);
    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model, last),
    };
    Ok(TrainedClassifier {
        model,
        classes: classes.to_vec(),
        best_epoch,
        history,
    })
}
