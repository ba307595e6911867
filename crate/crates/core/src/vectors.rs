//! Keyed dense vectors and their text format.
//!
//! The format is the word2vec text layout: a `<count> <dim>` header, then one
//! `<key> <v1> ... <vdim>` line per vector. Floats are written in their
//! shortest round-trip representation, so save/load is lossless.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VectorsError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: expected {expected} values, found {found}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("vector for {key:?} has {found} values, table dimension is {expected}")]
    WrongLength {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyedVectors<T> {
    dim: usize,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<T>,
}

impl<T: Copy> KeyedVectors<T> {
    pub fn new(dim: usize) -> Self {
        KeyedVectors {
            dim,
            keys: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&[T]> {
        self.index.get(key).map(|&i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> + '_ {
        self.keys.iter().enumerate().map(move |(i, k)| (k.as_str(), self.row(i)))
    }

    /// Insert or overwrite. Returns `true` when an existing key was replaced.
    pub fn insert(&mut self, key: &str, values: &[T]) -> Result<bool, VectorsError> {
        if values.len() != self.dim {
            return Err(VectorsError::WrongLength {
                key: key.to_string(),
                expected: self.dim,
                found: values.len(),
            });
        }
        if let Some(&i) = self.index.get(key) {
            self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(values);
            return Ok(true);
        }
        self.index.insert(key.to_string(), self.keys.len());
        self.keys.push(key.to_string());
        self.data.extend_from_slice(values);
        Ok(false)
    }
}

impl<T: Copy + Display> KeyedVectors<T> {
    pub fn write_text<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (key, row) in self.iter() {
            out.write_all(key.as_bytes())?;
            for v in row {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_text(&mut out)?;
        out.flush()
    }
}

impl<T: Copy + FromStr> KeyedVectors<T> {
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, VectorsError> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(VectorsError::Format {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        };
        let mut fields = header.split_whitespace();
        let parse_usize = |f: Option<&str>| f.and_then(|x| x.parse::<usize>().ok());
        let (count, dim) = match (parse_usize(fields.next()), parse_usize(fields.next()), fields.next()) {
            (Some(c), Some(d), None) => (c, d),
            _ => {
                return Err(VectorsError::Format {
                    line: 1,
                    message: format!("header must be `<count> <dim>`, got {header:?}"),
                })
            }
        };
        let mut table = KeyedVectors::new(dim);
        let mut values = Vec::with_capacity(dim);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let key = fields.next().expect("non-empty line");
            values.clear();
            for f in fields {
                values.push(f.parse::<T>().map_err(|_| VectorsError::Format {
                    line: line_no,
                    message: format!("cannot parse {f:?} as a number"),
                })?);
            }
            if values.len() != dim {
                return Err(VectorsError::DimMismatch {
                    line: line_no,
                    expected: dim,
                    found: values.len(),
                });
            }
            if table.insert(key, &values)? {
                return Err(VectorsError::Format {
                    line: line_no,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        if table.len() != count {
            return Err(VectorsError::Format {
                line: 1,
                message: format!("header declares {count} vectors, file has {}", table.len()),
            });
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, VectorsError> {
        Self::read_text(BufReader::new(File::open(path)?))
    }
}
