//! Generator for a small typed knowledge graph with a two-level class tree.
//!
//! Every subtype owns a few characteristic predicates; their objects come
//! from a subtype-specific pool only part of the time and otherwise from a
//! pool shared by the whole coarse type. Coarse types have their own
//! predicates and pools, all entities share some generic predicates, and a
//! `related` edge to another typed entity, mostly of a similar type, lets
//! walks go deep. Predicates are therefore cleaner type evidence than
//! neighbouring entities.

use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{write_triple, Triple};
use crate::util::seeded_rng;

use super::config::RDF_TYPE;

const BASE: &str = "http://example.org/synthetic/";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub coarse_types: usize,
    pub subtypes: usize,
    pub entities_per_subtype: usize,
    /// Predicates owned by each coarse type, and how many each entity uses.
    pub coarse_predicates: usize,
    pub coarse_edges: usize,
    /// Predicates owned by each subtype, and how many each entity uses.
    pub subtype_predicates: usize,
    pub subtype_edges: usize,
    /// Generic predicates every entity carries once.
    pub shared_predicates: usize,
    pub coarse_pool: usize,
    pub subtype_pool: usize,
    pub shared_pool: usize,
    /// Chance that a subtype predicate points into the subtype's own pool.
    pub subtype_object_rate: f64,
    /// `related` edges per entity to other typed entities.
    pub related: usize,
    /// Chance that a `related` edge stays within the subtype; otherwise it
    /// stays within the coarse type with `related_same_coarse`, else it is
    /// uniformly random.
    pub related_same_subtype: f64,
    pub related_same_coarse: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            coarse_types: 3,
            subtypes: 2,
            entities_per_subtype: 150,
            coarse_predicates: 4,
            coarse_edges: 2,
            subtype_predicates: 8,
            subtype_edges: 4,
            shared_predicates: 1,
            coarse_pool: 12,
            subtype_pool: 12,
            shared_pool: 40,
            subtype_object_rate: 0.4,
            related: 1,
            related_same_subtype: 0.5,
            related_same_coarse: 0.3,
            seed: 7,
        }
    }
}

pub struct SyntheticKg {
    pub triples: Vec<Triple>,
    /// `(entity, coarse class, fine class)`.
    pub entities: Vec<(String, String, String)>,
    /// `(class, parent)`; roots have no parent.
    pub hierarchy: Vec<(String, Option<String>)>,
}

pub fn coarse_name(c: usize) -> String {
    format!("C{}", c + 1)
}

pub fn fine_name(c: usize, s: usize) -> String {
    format!("C{}.{}", c + 1, s + 1)
}

fn sample(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut picked = rand::seq::index::sample(rng, n, k.min(n)).into_vec();
    picked.sort_unstable();
    picked
}

fn iri(kind: &str, name: &str) -> String {
    format!("{BASE}{kind}/{name}")
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticKg {
    let mut rng: ChaCha8Rng = seeded_rng(spec.seed, 0);
    let n_sub = spec.coarse_types * spec.subtypes;
    let total = n_sub * spec.entities_per_subtype;

    // Entity ids are interleaved across subtypes so the id carries no type order.
    let entities: Vec<(String, usize, usize)> = (0..total)
        .map(|i| {
            let k = i % n_sub;
            (iri("entity", &format!("E{i:05}")), k / spec.subtypes, k % spec.subtypes)
        })
        .collect();

    let t = |s: &str, p: &str, o: &str| Triple::new(s, p, o).expect("generated IRIs are valid");
    let pick = |rng: &mut ChaCha8Rng, n: usize| rng.random_range(0..n.max(1));
    let mut triples = Vec::new();
    for (e, c, s) in &entities {
        let (c, s) = (*c, *s);
        triples.push(t(e, RDF_TYPE, &iri("class", &fine_name(c, s))));
        for p in sample(&mut rng, spec.coarse_predicates, spec.coarse_edges) {
            let o = iri("object", &format!("coarse{c}_{}", pick(&mut rng, spec.coarse_pool)));
            triples.push(t(e, &iri("property", &format!("c{c}_{p}")), &o));
        }
        for p in sample(&mut rng, spec.subtype_predicates, spec.subtype_edges) {
            let o = if rng.random::<f64>() < spec.subtype_object_rate {
                iri("object", &format!("sub{c}_{s}_{}", pick(&mut rng, spec.subtype_pool)))
            } else {
                iri("object", &format!("coarse{c}_{}", pick(&mut rng, spec.coarse_pool)))
            };
            triples.push(t(e, &iri("property", &format!("s{c}_{s}_{p}")), &o));
        }
        for p in 0..spec.shared_predicates {
            let o = iri("object", &format!("shared_{}", pick(&mut rng, spec.shared_pool)));
            triples.push(t(e, &iri("property", &format!("g{p}")), &o));
        }
        for _ in 0..spec.related {
            let r: f64 = rng.random();
            let k = if r < spec.related_same_subtype {
                c * spec.subtypes + s
            } else if r < spec.related_same_subtype + spec.related_same_coarse {
                c * spec.subtypes + pick(&mut rng, spec.subtypes)
            } else {
                pick(&mut rng, n_sub)
            };
            // Entities of subtype k sit at indices k, k + n_sub, ...
            let other = k + n_sub * pick(&mut rng, spec.entities_per_subtype);
            triples.push(t(e, &iri("property", "related"), &entities[other].0));
        }
    }

    let mut hierarchy = Vec::new();
    for c in 0..spec.coarse_types {
        hierarchy.push((coarse_name(c), None));
        for s in 0..spec.subtypes {
            hierarchy.push((fine_name(c, s), Some(coarse_name(c))));
        }
    }
    SyntheticKg {
        triples,
        entities: entities
            .into_iter()
            .map(|(e, c, s)| (e, coarse_name(c), fine_name(c, s)))
            .collect(),
        hierarchy,
    }
}

/// Paths written by [`write_synthetic`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticFiles {
    pub graph: PathBuf,
    pub labels_coarse: PathBuf,
    pub labels_fine: PathBuf,
    pub hierarchy: PathBuf,
}

/// Write `graph.nt`, `labels_coarse.tsv`, `labels_fine.tsv` and
/// `hierarchy.tsv` into `dir`.
pub fn write_synthetic(kg: &SyntheticKg, dir: &Path) -> io::Result<SyntheticFiles> {
    std::fs::create_dir_all(dir)?;
    let files = SyntheticFiles {
        graph: dir.join("graph.nt"),
        labels_coarse: dir.join("labels_coarse.tsv"),
        labels_fine: dir.join("labels_fine.tsv"),
        hierarchy: dir.join("hierarchy.tsv"),
    };
    let mut g = BufWriter::new(std::fs::File::create(&files.graph)?);
    for t in &kg.triples {
        write_triple(&mut g, t)?;
    }
    g.flush()?;
    let mut coarse = BufWriter::new(std::fs::File::create(&files.labels_coarse)?);
    let mut fine = BufWriter::new(std::fs::File::create(&files.labels_fine)?);
    for (e, c, f) in &kg.entities {
        writeln!(coarse, "{e}\t{c}")?;
        writeln!(fine, "{e}\t{f}")?;
    }
    coarse.flush()?;
    fine.flush()?;
    let mut h = BufWriter::new(std::fs::File::create(&files.hierarchy)?);
    for (c, p) in &kg.hierarchy {
        match p {
            Some(p) => writeln!(h, "{c}\t{p}")?,
            None => writeln!(h, "{c}")?,
        }
    }
    h.flush()?;
    Ok(files)
}
