use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::classify::{ClassifyError, Example, LabeledDataset, TypeHierarchy};
use crate::util::seeded_rng;

use super::config::{Regime, SplitFiles};

/// Stream id for the split shuffle.
const SPLIT_STREAM: u64 = 0x73706c6974;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{iri}: class {class} is not in the hierarchy")]
    UnknownClass { iri: String, class: String },
    #[error("hierarchy contains a cycle through {0}")]
    CyclicHierarchy(String),
    #[error("class {0} has more than one parent")]
    MultipleParents(String),
    #[error("{0} appears in more than one split")]
    OverlapSplit(String),
    #[error("{0} is listed in a split file but has no labels")]
    Unlabeled(String),
    #[error("{0}: multi-class mode needs exactly one label")]
    MultiLabelRow(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ClassifyError> for DatasetError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::CyclicHierarchy(c) => DatasetError::CyclicHierarchy(c),
            ClassifyError::MultipleParents(c) => DatasetError::MultipleParents(c),
            ClassifyError::UnknownClass { iri, class } => DatasetError::UnknownClass { iri, class },
            ClassifyError::Io(e) => DatasetError::Io(e),
            other => DatasetError::Io(std::io::Error::other(other.to_string())),
        }
    }
}

/// `iri<TAB>class[,class...]` rows. Repeated IRIs merge their labels.
/// Output is sorted by IRI.
pub fn read_labels<R: BufRead>(reader: R, path: &str) -> Result<Vec<Example>, DatasetError> {
    let mut rows: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: &str| DatasetError::Format {
            path: path.to_string(),
            line: i + 1,
            message: message.to_string(),
        };
        let (iri, classes) = line.split_once('\t').ok_or_else(|| bad("expected iri<TAB>classes"))?;
        let labels = rows.entry(iri.trim().to_string()).or_default();
        for c in classes.split(',').map(str::trim).filter(|c| !c.is_empty()) {
            if !labels.iter().any(|l| l == c) {
                labels.push(c.to_string());
            }
        }
        if labels.is_empty() {
            return Err(bad("row has no classes"));
        }
    }
    Ok(rows
        .into_iter()
        .map(|(entity, labels)| Example { entity, labels })
        .collect())
}

pub fn read_labels_file(path: &Path) -> Result<Vec<Example>, DatasetError> {
    let file = std::fs::File::open(path)?;
    read_labels(std::io::BufReader::new(file), &path.display().to_string())
}

fn read_iri_list(path: &Path) -> Result<Vec<String>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Seeded 50 / 30 / 20 split into train / test / validation. Shares are
/// floored for train and test; validation takes the remainder.
pub fn auto_split(mut examples: Vec<Example>, seed: u64) -> LabeledDataset {
    examples.sort_by(|a, b| a.entity.cmp(&b.entity));
    let mut rng: ChaCha8Rng = seeded_rng(seed, SPLIT_STREAM);
    examples.shuffle(&mut rng);
    let n = examples.len();
    let n_train = n * 5 / 10;
    let n_test = n * 3 / 10;
    let validation = examples.split_off(n_train + n_test);
    let test = examples.split_off(n_train);
    LabeledDataset {
        train: examples,
        validation,
        test,
    }
}

fn explicit_split(examples: Vec<Example>, files: &SplitFiles) -> Result<LabeledDataset, DatasetError> {
    let by_iri: BTreeMap<String, Example> = examples.into_iter().map(|e| (e.entity.clone(), e)).collect();
    let mut seen = HashSet::new();
    let mut take = |path: &Path| -> Result<Vec<Example>, DatasetError> {
        read_iri_list(path)?
            .into_iter()
            .map(|iri| {
                if !seen.insert(iri.clone()) {
                    return Err(DatasetError::OverlapSplit(iri));
                }
                by_iri.get(&iri).cloned().ok_or(DatasetError::Unlabeled(iri))
            })
            .collect()
    };
    Ok(LabeledDataset {
        train: take(&files.train)?,
        validation: take(&files.validation)?,
        test: take(&files.test)?,
    })
}

pub fn validate_dataset(
    data: &LabeledDataset,
    hierarchy: Option<&TypeHierarchy>,
    regime: Regime,
) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for ex in data.all() {
        if !seen.insert(ex.entity.as_str()) {
            return Err(DatasetError::OverlapSplit(ex.entity.clone()));
        }
        if regime == Regime::MultiClass && ex.labels.len() != 1 {
            return Err(DatasetError::MultiLabelRow(ex.entity.clone()));
        }
        if let (Regime::Hierarchical, Some(h)) = (regime, hierarchy) {
            if let Some(c) = ex.labels.iter().find(|c| h.id(c).is_none()) {
                return Err(DatasetError::UnknownClass {
                    iri: ex.entity.clone(),
                    class: c.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Labels, optional hierarchy and the train / validation / test partition.
pub fn load_dataset(
    labels: &Path,
    hierarchy: Option<&Path>,
    splits: Option<&SplitFiles>,
    regime: Regime,
    seed: u64,
) -> Result<(LabeledDataset, Option<TypeHierarchy>), DatasetError> {
    let examples = read_labels_file(labels)?;
    let hierarchy = match hierarchy {
        Some(p) => Some(TypeHierarchy::read_tsv(std::io::BufReader::new(std::fs::File::open(p)?))?),
        None => None,
    };
    let data = match splits {
        Some(files) => explicit_split(examples, files)?,
        None => auto_split(examples, seed),
    };
    validate_dataset(&data, hierarchy.as_ref(), regime)?;
    Ok((data, hierarchy))
}
