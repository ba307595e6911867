//! Random-walk corpus generation.
//!
//! Classic walks are generated once per entity and the entity-only and
//! predicate-only corpora are derived from those same walks, so every
//! embedding variant trains on the same underlying traversals.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EntityId, GraphError, KnowledgeGraph, RelationId};
use crate::util::seeded_rng;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("walk does not alternate entity and relation tokens")]
    NotClassicWalk,
    #[error("unknown walk strategy {0:?} (expected classic, entity or predicate)")]
    UnknownStrategy(String),
    #[error("token {0:?} is not in the graph")]
    TokenNotInGraph(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WalkToken {
    Entity(EntityId),
    Relation(RelationId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Walk {
    pub tokens: Vec<WalkToken>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Entity, Relation, Entity, ... starting and ending with an entity.
    pub fn is_classic(&self) -> bool {
        self.tokens.len() % 2 == 1
            && self.tokens.iter().enumerate().all(|(i, t)| match t {
                WalkToken::Entity(_) => i % 2 == 0,
                WalkToken::Relation(_) => i % 2 == 1,
            })
    }

    pub fn hops(&self) -> usize {
        self.tokens.len() / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Classic,
    EntityOnly,
    PredicateOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Classic, Strategy::EntityOnly, Strategy::PredicateOnly];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Classic => "classic",
            Strategy::EntityOnly => "entity",
            Strategy::PredicateOnly => "predicate",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = WalkError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(Strategy::Classic),
            "entity" | "e" => Ok(Strategy::EntityOnly),
            "predicate" | "p" => Ok(Strategy::PredicateOnly),
            other => Err(WalkError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Maximum number of hops per walk.
    pub depth: usize,
    pub walks_per_entity: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub dedup: bool,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            depth: 8,
            walks_per_entity: 500,
            strategy: Strategy::Classic,
            seed: 42,
            dedup: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Walk>,
    pub source_config: WalkConfig,
}

fn random_walk<R: Rng>(
    g: &KnowledgeGraph,
    start: EntityId,
    depth: usize,
    rng: &mut R,
) -> Result<Walk, GraphError> {
    let mut tokens = Vec::with_capacity(2 * depth + 1);
    tokens.push(WalkToken::Entity(start));
    let mut current = start;
    for _ in 0..depth {
        let neighbors = g.out_neighbors(current)?;
        if neighbors.is_empty() {
            break;
        }
        let (p, o) = neighbors[rng.random_range(0..neighbors.len())];
        tokens.push(WalkToken::Relation(p));
        tokens.push(WalkToken::Entity(o));
        current = o;
    }
    Ok(Walk { tokens })
}

/// Forward random walks from `start`, at most `walks_per_entity` of them.
///
/// With `dedup`, distinct walks are collected from at most three times as
/// many attempts, so entities with few reachable paths yield fewer walks.
pub fn generate_classic_walks<R: Rng>(
    g: &KnowledgeGraph,
    start: EntityId,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<Vec<Walk>, WalkError> {
    g.out_neighbors(start)?;
    let target = cfg.walks_per_entity;
    let mut walks = Vec::with_capacity(target.min(4096));
    if !cfg.dedup {
        for _ in 0..target {
            walks.push(random_walk(g, start, cfg.depth, rng)?);
        }
        return Ok(walks);
    }
    let mut seen = HashSet::with_capacity(target.min(4096));
    let attempts = target.saturating_mul(3);
    for _ in 0..attempts {
        if walks.len() >= target {
            break;
        }
        let walk = random_walk(g, start, cfg.depth, rng)?;
        if seen.insert(walk.clone()) {
            walks.push(walk);
        }
    }
    Ok(walks)
}

/// Drop every relation token.
pub fn derive_entity_walk(w: &Walk) -> Result<Walk, WalkError> {
    if !w.is_classic() {
        return Err(WalkError::NotClassicWalk);
    }
    Ok(Walk {
        tokens: w.tokens.iter().copied().step_by(2).collect(),
    })
}

/// Keep the source entity followed by the relations in hop order.
pub fn derive_predicate_walk(w: &Walk) -> Result<Walk, WalkError> {
    if !w.is_classic() {
        return Err(WalkError::NotClassicWalk);
    }
    let mut tokens = Vec::with_capacity(w.hops() + 1);
    tokens.push(w.tokens[0]);
    tokens.extend(w.tokens.iter().copied().skip(1).step_by(2));
    Ok(Walk { tokens })
}

fn apply_strategy(w: &Walk, strategy: Strategy) -> Walk {
    // Walks handed in here come from `random_walk`, which only builds
    // classic walks.
    match strategy {
        Strategy::Classic => w.clone(),
        Strategy::EntityOnly => derive_entity_walk(w).expect("generated walks are classic"),
        Strategy::PredicateOnly => derive_predicate_walk(w).expect("generated walks are classic"),
    }
}

fn dedup_in_order(walks: Vec<Walk>) -> Vec<Walk> {
    let mut seen = HashSet::with_capacity(walks.len());
    walks.into_iter().filter(|w| seen.insert(w.clone())).collect()
}

/// Generate corpora for several strategies from a single pass of classic walks.
///
/// Each entity's generator is seeded from `(cfg.seed, entity id)` and blocks
/// are merged in entity order, so output does not depend on the thread pool.
/// `cfg.strategy` is ignored in favour of `strategies`.
pub fn generate_corpora(
    g: &KnowledgeGraph,
    cfg: &WalkConfig,
    strategies: &[Strategy],
) -> Result<Vec<WalkCorpus>, WalkError> {
    let per_entity: Vec<Vec<Vec<Walk>>> = g
        .entity_ids()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|e| {
            let mut rng: ChaCha8Rng = seeded_rng(cfg.seed, e.0 as u64);
            let classic = generate_classic_walks(g, e, cfg, &mut rng)?;
            Ok(strategies
                .iter()
                .map(|&s| {
                    let derived: Vec<Walk> = classic.iter().map(|w| apply_strategy(w, s)).collect();
                    if cfg.dedup {
                        dedup_in_order(derived)
                    } else {
                        derived
                    }
                })
                .collect())
        })
        .collect::<Result<_, WalkError>>()?;

    let mut corpora: Vec<WalkCorpus> = strategies
        .iter()
        .map(|&strategy| WalkCorpus {
            walks: Vec::new(),
            source_config: WalkConfig { strategy, ..*cfg },
        })
        .collect();
    for blocks in per_entity {
        for (corpus, block) in corpora.iter_mut().zip(blocks) {
            corpus.walks.extend(block);
        }
    }
    Ok(corpora)
}

pub fn generate_corpus(g: &KnowledgeGraph, cfg: &WalkConfig) -> Result<WalkCorpus, WalkError> {
    let mut corpora = generate_corpora(g, cfg, &[cfg.strategy])?;
    Ok(corpora.remove(0))
}

/// One walk per line, IRIs separated by single spaces.
pub fn write_corpus<W: Write>(c: &WalkCorpus, g: &KnowledgeGraph, out: &mut W) -> io::Result<()> {
    for walk in &c.walks {
        for (i, tok) in walk.tokens.iter().enumerate() {
            if i > 0 {
                out.write_all(b" ")?;
            }
            let iri = match *tok {
                WalkToken::Entity(e) => g.entity_iri(e),
                WalkToken::Relation(r) => g.relation_iri(r),
            };
            out.write_all(iri.as_str().as_bytes())?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// A corpus read back from text with tokens interned to dense ids.
///
/// Token kinds are not recorded in the file; they are recovered with
/// [`TokenCorpus::resolve`] when a graph is available.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenCorpus {
    pub tokens: Vec<String>,
    /// Sentence boundaries into `ids`; sentence `i` spans `offsets[i]..offsets[i + 1]`.
    pub offsets: Vec<usize>,
    pub ids: Vec<u32>,
}

impl TokenCorpus {
    pub fn sentence_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn sentence(&self, i: usize) -> &[u32] {
        &self.ids[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.sentence_count()).map(move |i| self.sentence(i))
    }

    pub fn token_count(&self) -> usize {
        self.ids.len()
    }

    pub fn from_sentences<S: AsRef<str>>(sentences: &[Vec<S>]) -> Self {
        let mut builder = CorpusBuilder::default();
        for s in sentences {
            builder.push(s.iter().map(AsRef::as_ref));
        }
        builder.finish()
    }

    /// Map tokens back onto graph ids. Token kind is inferred from position
    /// according to `strategy`.
    pub fn resolve(&self, g: &KnowledgeGraph, strategy: Strategy) -> Result<WalkCorpus, WalkError> {
        let mut walks = Vec::with_capacity(self.sentence_count());
        for sentence in self.sentences() {
            let mut tokens = Vec::with_capacity(sentence.len());
            for (pos, &id) in sentence.iter().enumerate() {
                let text = &self.tokens[id as usize];
                let is_entity = match strategy {
                    Strategy::Classic => pos % 2 == 0,
                    Strategy::EntityOnly => true,
                    Strategy::PredicateOnly => pos == 0,
                };
                let tok = if is_entity {
                    g.entity_id(text).map(WalkToken::Entity)
                } else {
                    g.relation_id(text).map(WalkToken::Relation)
                };
                tokens.push(tok.ok_or_else(|| WalkError::TokenNotInGraph(text.clone()))?);
            }
            walks.push(Walk { tokens });
        }
        Ok(WalkCorpus {
            walks,
            source_config: WalkConfig {
                strategy,
                ..WalkConfig::default()
            },
        })
    }
}

#[derive(Default)]
struct CorpusBuilder {
    corpus: TokenCorpus,
    index: std::collections::HashMap<String, u32>,
}

impl CorpusBuilder {
    fn push<'a>(&mut self, tokens: impl Iterator<Item = &'a str>) {
        if self.corpus.offsets.is_empty() {
            self.corpus.offsets.push(0);
        }
        for tok in tokens {
            let id = match self.index.get(tok) {
                Some(&id) => id,
                None => {
                    let id = self.corpus.tokens.len() as u32;
                    self.corpus.tokens.push(tok.to_string());
                    self.index.insert(tok.to_string(), id);
                    id
                }
            };
            self.corpus.ids.push(id);
        }
        self.corpus.offsets.push(self.corpus.ids.len());
    }

    fn finish(mut self) -> TokenCorpus {
        if self.corpus.offsets.is_empty() {
            self.corpus.offsets.push(0);
        }
        self.corpus
    }
}

/// Read a corpus file. Empty lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<TokenCorpus, WalkError> {
    let mut builder = CorpusBuilder::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        builder.push(line.split(' ').filter(|t| !t.is_empty()));
    }
    Ok(builder.finish())
}
