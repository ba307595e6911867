//! Per-entity feature assembly.
//!
//! Embedding variants and optional description vectors are concatenated in a
//! fixed part order. The concatenation can be reduced with PCA fitted either
//! on the dataset entities only (local) or on every graph entity (global).
//! Missing vectors are zero-filled and counted.

mod pca;

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vectors::{KeyedVectors, VectorsError};
use crate::walks::Strategy;

pub use pca::{fit_pca, PcaModel};

#[derive(Debug, Error)]
pub enum RepresentError {
    #[error("need at least two distinct vectors to fit PCA")]
    DegenerateInput,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("line {line}: expected {expected} values, found {found}")]
    LineDimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("pca_dim {pca_dim} must be in 1..={input_dim}")]
    InvalidPcaDim { pca_dim: usize, input_dim: usize },
    #[error("unknown vector source {0:?}")]
    UnknownSource(String),
    #[error("unknown fusion mode {0:?} (expected concat, lpca or gpca)")]
    UnknownMode(String),
    #[error("fusion needs at least one part")]
    NoParts,
    #[error("no vectors supplied for part {0}")]
    MissingPart(VectorSource),
    #[error(transparent)]
    Vectors(#[from] VectorsError),
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One of the six walk/training variants, or the description vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VectorSource {
    Embedding { strategy: Strategy, order_aware: bool },
    Description,
}

impl VectorSource {
    pub fn embedding_variants() -> impl Iterator<Item = VectorSource> {
        [false, true].into_iter().flat_map(|order_aware| {
            Strategy::ALL
                .into_iter()
                .map(move |strategy| VectorSource::Embedding { strategy, order_aware })
        })
    }
}

impl fmt::Display for VectorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorSource::Embedding { strategy, order_aware } => {
                write!(f, "{}{}", strategy.name(), if *order_aware { "_oa" } else { "" })
            }
            VectorSource::Description => f.write_str("description"),
        }
    }
}

impl FromStr for VectorSource {
    type Err = RepresentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "description" {
            return Ok(VectorSource::Description);
        }
        let (base, order_aware) = match s.strip_suffix("_oa") {
            Some(base) => (base, true),
            None => (s, false),
        };
        let strategy = base
            .parse::<Strategy>()
            .map_err(|_| RepresentError::UnknownSource(s.to_string()))?;
        Ok(VectorSource::Embedding { strategy, order_aware })
    }
}

impl Serialize for VectorSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VectorSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Concat,
    LocalPca,
    GlobalPca,
}

impl FromStr for FusionMode {
    type Err = RepresentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concat" => Ok(FusionMode::Concat),
            "lpca" | "local_pca" => Ok(FusionMode::LocalPca),
            "gpca" | "global_pca" => Ok(FusionMode::GlobalPca),
            other => Err(RepresentError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSpec {
    pub parts: Vec<VectorSource>,
    pub mode: FusionMode,
    pub pca_dim: usize,
    /// Scale each part to unit length before concatenation.
    #[serde(default)]
    pub l2_normalize: bool,
}

impl FusionSpec {
    pub fn concat(parts: Vec<VectorSource>) -> Self {
        FusionSpec {
            parts,
            mode: FusionMode::Concat,
            pca_dim: 200,
            l2_normalize: false,
        }
    }
}

/// Location of one part inside the concatenated (pre-PCA) vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Named vector table taking part in a concatenation.
#[derive(Debug, Clone, Copy)]
pub struct Part<'a> {
    pub name: &'a str,
    pub vectors: &'a KeyedVectors<f32>,
}

pub fn segment_map(parts: &[Part<'_>]) -> Vec<Segment> {
    let mut offset = 0;
    parts
        .iter()
        .map(|p| {
            let s = Segment {
                name: p.name.to_string(),
                offset,
                len: p.vectors.dim(),
            };
            offset += s.len;
            s
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concatenated {
    pub values: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Parts with no vector for the entity (zero-filled).
    pub missing: usize,
}

fn append_part(out: &mut Vec<f64>, part: &Part<'_>, entity: &str, l2: bool) -> bool {
    match part.vectors.get(entity) {
        Some(v) => {
            let scale = if l2 {
                let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
                if norm > 0.0 {
                    1.0 / norm
                } else {
                    1.0
                }
            } else {
                1.0
            };
            out.extend(v.iter().map(|&x| x as f64 * scale));
            false
        }
        None => {
            out.extend(std::iter::repeat_n(0.0, part.vectors.dim()));
            true
        }
    }
}

/// Concatenate `entity`'s vectors across `parts`, in order.
pub fn concat_features(entity: &str, parts: &[Part<'_>], l2_normalize: bool) -> Concatenated {
    let segments = segment_map(parts);
    let width = segments.last().map_or(0, |s| s.offset + s.len);
    let mut values = Vec::with_capacity(width);
    let missing = parts
        .iter()
        .filter(|p| append_part(&mut values, p, entity, l2_normalize))
        .count();
    Concatenated {
        values,
        segments,
        missing,
    }
}

/// Externally produced description embeddings keyed by entity IRI.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionStore {
    pub vectors: KeyedVectors<f32>,
    /// Lines whose IRI had already been seen (the later line wins).
    pub duplicates: usize,
}

impl DescriptionStore {
    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Read `iri<TAB>f1,f2,...,fd` lines. The first line fixes the dimension.
pub fn load_description_vectors<R: BufRead>(reader: R) -> Result<DescriptionStore, RepresentError> {
    let mut vectors: Option<KeyedVectors<f32>> = None;
    let mut duplicates = 0;
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (iri, rest) = line.split_once('\t').ok_or_else(|| RepresentError::Format {
            line: line_no,
            message: "expected `iri<TAB>values`".into(),
        })?;
        values.clear();
        for f in rest.split(',') {
            let f = f.trim();
            let x: f32 = f.parse().map_err(|_| RepresentError::Format {
                line: line_no,
                message: format!("cannot parse {f:?} as a number"),
            })?;
            if !x.is_finite() {
                return Err(RepresentError::Format {
                    line: line_no,
                    message: "non-finite value".into(),
                });
            }
            values.push(x);
        }
        let table = vectors.get_or_insert_with(|| KeyedVectors::new(values.len()));
        if values.len() != table.dim() {
            return Err(RepresentError::LineDimMismatch {
                line: line_no,
                expected: table.dim(),
                found: values.len(),
            });
        }
        if table.insert(iri.trim(), &values)? {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("{duplicates} duplicate description lines; the last occurrence was kept");
    }
    Ok(DescriptionStore {
        vectors: vectors.unwrap_or_else(|| KeyedVectors::new(0)),
        duplicates,
    })
}

pub fn load_description_file(path: &Path) -> Result<DescriptionStore, RepresentError> {
    load_description_vectors(io::BufReader::new(std::fs::File::open(path)?))
}

/// Fused features for the dataset entities.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedStore {
    pub vectors: KeyedVectors<f64>,
    /// Layout of the concatenation before any PCA projection.
    pub segments: Vec<Segment>,
    pub spec: FusionSpec,
    pub pca: Option<PcaModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedSidecar {
    pub spec: FusionSpec,
    pub segments: Vec<Segment>,
    pub pca: Option<PcaModel>,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub store: FusedStore,
    /// `(entity, part)` misses over the stored entities.
    pub missing: usize,
    /// Misses over the global PCA population, when one was used.
    pub population_missing: usize,
}

/// Which entities the PCA is fitted on.
#[derive(Debug, Clone, Copy)]
pub enum PcaPopulation<'a> {
    DatasetOnly,
    AllGraphEntities(&'a [String]),
}

/// Build features for `entities` according to `spec`.
///
/// `population` is only consulted in [`FusionMode::GlobalPca`], where it must
/// list every graph entity.
pub fn build_fused_store(
    entities: &[String],
    spec: &FusionSpec,
    parts: &[Part<'_>],
    population: PcaPopulation<'_>,
) -> Result<FusionOutput, RepresentError> {
    if parts.is_empty() {
        return Err(RepresentError::NoParts);
    }
    let segments = segment_map(parts);
    let width: usize = segments.iter().map(|s| s.len).sum();

    let concat_all = |ids: &[String]| -> (Vec<Vec<f64>>, usize) {
        let mut missing = 0;
        let rows = ids
            .iter()
            .map(|e| {
                let c = concat_features(e, parts, spec.l2_normalize);
                missing += c.missing;
                c.values
            })
            .collect();
        (rows, missing)
    };

    let (rows, missing) = concat_all(entities);
    let mut population_missing = 0;
    let (rows, pca, dim) = match spec.mode {
        FusionMode::Concat => (rows, None, width),
        FusionMode::LocalPca | FusionMode::GlobalPca => {
            let model = match (spec.mode, population) {
                (FusionMode::GlobalPca, PcaPopulation::AllGraphEntities(all)) => {
                    let (pop, pop_missing) = concat_all(all);
                    population_missing = pop_missing;
                    fit_pca(&pop, spec.pca_dim)?
                }
                _ => fit_pca(&rows, spec.pca_dim)?,
            };
            let projected = rows
                .iter()
                .map(|r| model.apply(r))
                .collect::<Result<Vec<_>, _>>()?;
            (projected, Some(model), spec.pca_dim)
        }
    };

    let mut vectors = KeyedVectors::new(dim);
    let mut seen = HashSet::new();
    for (e, row) in entities.iter().zip(&rows) {
        if seen.insert(e.as_str()) {
            vectors.insert(e, row)?;
        }
    }
    Ok(FusionOutput {
        store: FusedStore {
            vectors,
            segments,
            spec: spec.clone(),
            pca,
        },
        missing,
        population_missing,
    })
}

pub fn fused_sidecar_path(path: &Path) -> PathBuf {
    crate::embed::sidecar_path(path)
}

pub fn save_fused_store(out: &FusionOutput, path: &Path) -> Result<(), RepresentError> {
    out.store.vectors.save(path)?;
    let sidecar = FusedSidecar {
        spec: out.store.spec.clone(),
        segments: out.store.segments.clone(),
        pca: out.store.pca.clone(),
        missing: out.missing,
    };
    crate::util::write_sorted_json(&fused_sidecar_path(path), &sidecar)?;
    Ok(())
}

pub fn load_fused_store(path: &Path) -> Result<FusedStore, RepresentError> {
    let vectors = KeyedVectors::<f64>::load(path)?;
    let sidecar: FusedSidecar =
        serde_json::from_str(&std::fs::read_to_string(fused_sidecar_path(path))?)?;
    Ok(FusedStore {
        vectors,
        segments: sidecar.segments,
        spec: sidecar.spec,
        pca: sidecar.pca,
    })
}
