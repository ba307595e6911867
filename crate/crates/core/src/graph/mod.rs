//! Interned, index-addressed knowledge graph.
//!
//! Entities and relations live in separate id spaces. Outgoing edges are
//! stored contiguously per entity (CSR layout) and sorted by
//! `(RelationId, EntityId)`.

mod ntriples;

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ntriples::{
    open_maybe_gzip, parse_ntriples, read_ntriples_file, write_triple, ParseOptions, ParseReport,
};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed N-Triples statement at line {0}")]
    MalformedLine(u64),
    #[error("blank node at line {0} (blank nodes are not supported in strict mode)")]
    BlankNode(u64),
    #[error("invalid IRI {0:?}")]
    InvalidIri(String),
    #[error("unknown entity id {0}")]
    UnknownEntity(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Absolute IRI without the surrounding angle brackets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

impl Iri {
    pub fn new(text: impl Into<String>) -> Result<Self, GraphError> {
        let text = text.into();
        if text.is_empty() || text.contains(char::is_whitespace) {
            return Err(GraphError::InvalidIri(text));
        }
        Ok(Iri(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for Iri {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Iri {
    type Error = GraphError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::new(value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> Self {
        iri.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Iri,
}

impl Triple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Result<Self, GraphError> {
        Ok(Triple {
            subject: Iri::new(subject)?,
            predicate: Iri::new(predicate)?,
            object: Iri::new(object)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bidirectional IRI interner with dense ids.
#[derive(Debug, Clone, Default)]
struct Interner {
    iris: Vec<Iri>,
    ids: HashMap<Iri, u32>,
}

impl Interner {
    fn intern(&mut self, iri: &Iri) -> u32 {
        if let Some(&id) = self.ids.get(iri) {
            return id;
        }
        let id = self.iris.len() as u32;
        self.iris.push(iri.clone());
        self.ids.insert(iri.clone(), id);
        id
    }
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: Interner,
    relations: Interner,
    offsets: Vec<usize>,
    edges: Vec<(RelationId, EntityId)>,
}

impl KnowledgeGraph {
    /// Build a graph from triples. Ids follow first appearance; duplicate
    /// triples collapse into one edge.
    pub fn from_triples<'a, I>(triples: I) -> Self
    where
        I: IntoIterator<Item = &'a Triple>,
    {
        let mut entities = Interner::default();
        let mut relations = Interner::default();
        let mut raw: Vec<(u32, RelationId, EntityId)> = Vec::new();
        for t in triples {
            let s = entities.intern(&t.subject);
            let p = relations.intern(&t.predicate);
            let o = entities.intern(&t.object);
            raw.push((s, RelationId(p), EntityId(o)));
        }
        raw.sort_unstable();
        raw.dedup();

        let n = entities.iris.len();
        let mut offsets = vec![0usize; n + 1];
        for &(s, _, _) in &raw {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let edges = raw.into_iter().map(|(_, p, o)| (p, o)).collect();
        KnowledgeGraph {
            entities,
            relations,
            offsets,
            edges,
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entities.iris.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.iris.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entity_count() as u32).map(EntityId)
    }

    pub fn entity_id(&self, iri: &str) -> Option<EntityId> {
        self.entities.ids.get(iri).copied().map(EntityId)
    }

    pub fn relation_id(&self, iri: &str) -> Option<RelationId> {
        self.relations.ids.get(iri).copied().map(RelationId)
    }

    /// Panics on an id that did not come from this graph.
    pub fn entity_iri(&self, id: EntityId) -> &Iri {
        &self.entities.iris[id.index()]
    }

    pub fn relation_iri(&self, id: RelationId) -> &Iri {
        &self.relations.iris[id.index()]
    }

    /// Sorted outgoing `(relation, target)` pairs; empty for sinks.
    pub fn out_neighbors(&self, e: EntityId) -> Result<&[(RelationId, EntityId)], GraphError> {
        let i = e.index();
        if i >= self.entity_count() {
            return Err(GraphError::UnknownEntity(e.0));
        }
        Ok(&self.edges[self.offsets[i]..self.offsets[i + 1]])
    }

    pub fn out_degree(&self, e: EntityId) -> Result<usize, GraphError> {
        self.out_neighbors(e).map(<[_]>::len)
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.entity_ids().flat_map(move |s| {
            let range = self.offsets[s.index()]..self.offsets[s.index() + 1];
            self.edges[range].iter().map(move |&(p, o)| Triple {
                subject: self.entity_iri(s).clone(),
                predicate: self.relation_iri(p).clone(),
                object: self.entity_iri(o).clone(),
            })
        })
    }

    pub fn write_ntriples<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for t in self.triples() {
            write_triple(out, &t)?;
        }
        Ok(())
    }
}

/// Build a graph, dropping every edge whose predicate is listed in `excluded`.
pub fn build_graph(triples: &[Triple], excluded: &[Iri]) -> KnowledgeGraph {
    if excluded.is_empty() {
        return KnowledgeGraph::from_triples(triples);
    }
    KnowledgeGraph::from_triples(triples.iter().filter(|t| !excluded.contains(&t.predicate)))
}
