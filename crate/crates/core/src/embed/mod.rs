//! Word2vec-style embeddings over walk corpora.
//!
//! Skip-gram and CBOW are trained with negative sampling. The order-aware
//! variant keeps one output matrix per signed context offset (structured
//! skip-gram), so `x r y` and `y r x` produce different training signals.
//!
//! Unlike the reference word2vec tool the context window is never shrunk at
//! random: classic and order-aware runs over the same corpus consume exactly
//! the same positive pairs.

mod sampler;
mod train;
mod vocab;

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vectors::{KeyedVectors, VectorsError};

pub use sampler::NegativeSampler;
pub use train::{
    dot, log_sigmoid, sigmoid, train, train_observed, train_with_report, LearningRate, MicroBatch,
    OutputSlots, SgnsParams, TrainReport, TrainingPair,
};
pub use vocab::{build_vocab, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("corpus has no tokens above the frequency floor")]
    EmptyCorpus,
    #[error("a parameter became NaN or infinite during training")]
    NonFiniteUpdate,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown architecture {0:?} (expected sg or cbow)")]
    UnknownArchitecture(String),
    #[error(transparent)]
    Vectors(#[from] VectorsError),
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    SkipGram,
    Cbow,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::SkipGram => "sg",
            Architecture::Cbow => "cbow",
        })
    }
}

impl FromStr for Architecture {
    type Err = EmbedError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sg" | "skipgram" | "skip_gram" => Ok(Architecture::SkipGram),
            "cbow" => Ok(Architecture::Cbow),
            other => Err(EmbedError::UnknownArchitecture(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    /// Maximum context offset on either side of the center token.
    pub window: usize,
    pub negatives: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub order_aware: bool,
    pub architecture: Architecture,
    pub seed: u64,
    pub min_count: u64,
    /// Frequent-token subsampling threshold; disabled when `None`.
    pub subsample: Option<f64>,
    /// Hogwild workers. One worker gives bit-reproducible output.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 200,
            epochs: 5,
            window: 5,
            negatives: 5,
            lr_initial: 0.025,
            lr_final: 0.0001,
            order_aware: false,
            architecture: Architecture::SkipGram,
            seed: 42,
            min_count: 1,
            subsample: None,
            threads: 1,
        }
    }
}

/// A trained model: vocabulary, input vectors and output matrices.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    pub vocab: Vocabulary,
    pub config: TrainConfig,
    pub params: SgnsParams<f32>,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn output_matrix_count(&self) -> usize {
        self.params.outputs.len()
    }

    /// Input vector of `token`, the representation used downstream.
    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.vocab.id(token).map(|id| self.params.input_row(id))
    }

    pub fn to_keyed_vectors(&self) -> KeyedVectors<f32> {
        let mut kv = KeyedVectors::new(self.dim());
        for (id, token) in self.vocab.tokens().iter().enumerate() {
            kv.insert(token, self.params.input_row(id as u32))
                .expect("rows have the table dimension");
        }
        kv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub config: TrainConfig,
    pub tokens: usize,
    pub dim: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Write input vectors in text format to `path` and the training
/// configuration to `<path>.json`.
pub fn save_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<(), EmbedError> {
    let mut out = BufWriter::new(File::create(path)?);
    m.to_keyed_vectors().write_text(&mut out)?;
    out.flush()?;
    let sidecar = EmbeddingSidecar {
        config: m.config.clone(),
        tokens: m.vocab.len(),
        dim: m.dim(),
    };
    crate::util::write_sorted_json(&sidecar_path(path), &sidecar)?;
    Ok(())
}

/// Load the vectors written by [`save_embeddings`]. Output matrices are not
/// persisted, so the result is a plain keyed table.
pub fn load_embeddings(path: &Path) -> Result<KeyedVectors<f32>, EmbedError> {
    Ok(KeyedVectors::load(path)?)
}

pub fn load_sidecar(path: &Path) -> Result<EmbeddingSidecar, EmbedError> {
    let text = std::fs::read_to_string(sidecar_path(path))?;
    Ok(serde_json::from_str(&text)?)
}
