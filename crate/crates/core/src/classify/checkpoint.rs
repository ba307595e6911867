//! Model files: one JSON header line, then every parameter as little-endian f64.
//!
//! Parameters are laid out model by model, layer by layer, weights row-major
//! followed by the bias, so a round trip is bit exact.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{Dense, Head, Mlp};
use super::ClassifyError;

const FORMAT: &str = "f64le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub dims: Vec<usize>,
    pub head: Head,
    pub classes: Vec<String>,
    /// Hierarchy level this model predicts, for per-level stacks.
    pub level: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub hierarchy_hash: Option<String>,
    pub models: Vec<ModelHeader>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub models: Vec<Mlp>,
}

impl Checkpoint {
    pub fn new(hierarchy_hash: Option<String>, models: Vec<(Mlp, Vec<String>, Option<usize>)>) -> Self {
        let headers = models
            .iter()
            .map(|(m, classes, level)| ModelHeader {
                dims: m.dims(),
                head: m.head,
                classes: classes.clone(),
                level: *level,
            })
            .collect();
        Checkpoint {
            header: CheckpointHeader {
                format: FORMAT.to_string(),
                hierarchy_hash,
                models: headers,
            },
            models: models.into_iter().map(|(m, _, _)| m).collect(),
        }
    }
}

pub fn write_checkpoint<W: Write>(ck: &Checkpoint, out: &mut W) -> Result<(), ClassifyError> {
    let header = serde_json::to_value(&ck.header).map_err(|e| ClassifyError::Checkpoint(e.to_string()))?;
    writeln!(out, "{header}")?;
    for m in &ck.models {
        for layer in &m.layers {
            for v in layer.weights.iter().chain(layer.bias.iter()) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut reader: R) -> Result<Checkpoint, ClassifyError> {
    let bad = |m: String| ClassifyError::Checkpoint(m);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end()).map_err(|e| bad(e.to_string()))?;
    if header.format != FORMAT {
        return Err(bad(format!("unsupported format {}", header.format)));
    }
    let mut next = || -> Result<f64, ClassifyError> {
        let mut buf = [0u8; 8];
        reader
            .read_exact(&mut buf)
            .map_err(|_| ClassifyError::Checkpoint("truncated parameter blob".into()))?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut models = Vec::with_capacity(header.models.len());
    for mh in &header.models {
        if mh.dims.len() < 2 {
            return Err(bad("model needs at least one layer".into()));
        }
        if mh.classes.len() != *mh.dims.last().unwrap() {
            return Err(bad("class list does not match output width".into()));
        }
        let mut layers = Vec::with_capacity(mh.dims.len() - 1);
        for w in mh.dims.windows(2) {
            let weights = (0..w[0] * w[1]).map(|_| next()).collect::<Result<Vec<_>, _>>()?;
            let bias = (0..w[1]).map(|_| next()).collect::<Result<Vec<_>, _>>()?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((w[0], w[1]), weights).expect("sized above"),
                bias: Array1::from(bias),
            });
        }
        models.push(Mlp { layers, head: mh.head });
    }
    let mut rest = [0u8; 1];
    if reader.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after parameters".into()));
    }
    Ok(Checkpoint { header, models })
}
