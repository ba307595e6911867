use std::collections::HashMap;

use crate::walks::TokenCorpus;

use super::EmbedError;

/// Frequency-ordered vocabulary. Ids are assigned by descending count, ties
/// broken by the token's lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn from_counts<S: Into<String>>(counts: impl IntoIterator<Item = (S, u64)>) -> Self {
        let mut entries: Vec<(String, u64)> = counts
            .into_iter()
            .map(|(t, c)| (t.into(), c))
            .filter(|(_, c)| *c > 0)
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i as u32))
            .collect();
        let (tokens, counts) = entries.into_iter().unzip();
        Vocabulary {
            tokens,
            counts,
            index,
        }
    }

    /// Translate a corpus into vocabulary ids, dropping tokens that did not
    /// make the frequency cut. Sentences that end up empty are dropped.
    pub fn encode(&self, corpus: &TokenCorpus) -> Vec<Vec<u32>> {
        let remap: Vec<Option<u32>> = corpus.tokens.iter().map(|t| self.id(t)).collect();
        corpus
            .sentences()
            .map(|s| s.iter().filter_map(|&t| remap[t as usize]).collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect()
    }
}

pub fn build_vocab(corpus: &TokenCorpus, min_count: u64) -> Result<Vocabulary, EmbedError> {
    let mut counts = vec![0u64; corpus.tokens.len()];
    for &id in &corpus.ids {
        counts[id as usize] += 1;
    }
    let vocab = Vocabulary::from_counts(
        corpus
            .tokens
            .iter()
            .zip(counts)
            .filter(|(_, c)| *c >= min_count.max(1))
            .map(|(t, c)| (t.clone(), c)),
    );
    if vocab.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    Ok(vocab)
}
