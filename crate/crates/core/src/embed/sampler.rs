use rand::Rng;

use super::Vocabulary;

/// Draws negatives from the unigram distribution raised to the 3/4 power.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    pub const POWER: f64 = 0.75;

    pub fn new(vocab: &Vocabulary) -> Self {
        Self::from_counts(vocab.counts())
    }

    pub fn from_counts(counts: &[u64]) -> Self {
        assert!(!counts.is_empty(), "negative sampling needs a non-empty vocabulary");
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(Self::POWER);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    pub fn probability(&self, id: u32) -> f64 {
        let i = id as usize;
        let lo = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - lo) / self.total()
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = rng.random::<f64>() * self.total();
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1) as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_counts() {
        let s = NegativeSampler::from_counts(&[1, 1]);
        assert!((s.probability(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn skewed_counts_match_formula_and_draws() {
        let s = NegativeSampler::from_counts(&[4, 1]);
        let expected = 4f64.powf(0.75) / (4f64.powf(0.75) + 1.0);
        assert!((expected - 0.7388).abs() < 1e-4);
        assert!((s.probability(0) - expected).abs() < 1e-12);

        let mut rng: ChaCha8Rng = seeded_rng(3, 0);
        let n = 200_000;
        let hits = (0..n).filter(|_| s.sample(&mut rng) == 0).count();
        assert!((hits as f64 / n as f64 - expected).abs() < 0.01);
    }

    #[test]
    fn single_token() {
        let s = NegativeSampler::from_counts(&[9]);
        let mut rng: ChaCha8Rng = seeded_rng(3, 0);
        assert!((0..1000).all(|_| s.sample(&mut rng) == 0));
    }
}
