//! Negative-sampling trainer for skip-gram, structured (order-aware)
//! skip-gram and CBOW.
//!
//! Parameters are shared between workers without locks (hogwild). With one
//! worker the run is bit-for-bit reproducible.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::util::seeded_rng;
use crate::walks::TokenCorpus;

use super::{build_vocab, Architecture, EmbedError, EmbeddingMatrix, NegativeSampler, TrainConfig};

pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let (tail_a, tail_b) = (chunks_a.remainder(), chunks_b.remainder());
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for k in 0..8 {
            acc[k] = acc[k] + ca[k] * cb[k];
        }
    }
    let mut sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in tail_a.iter().zip(tail_b) {
        sum = sum + *x * *y;
    }
    sum
}

fn axpy<F: Float>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln σ(x)` without overflow for large `|x|`.
pub fn log_sigmoid<F: Float>(x: F) -> F {
    let zero = F::zero();
    -((-x).max(zero) + (-x.abs()).exp().ln_1p())
}

/// Maps a signed context offset to its output matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputSlots {
    pub window: usize,
    pub order_aware: bool,
}

impl OutputSlots {
    pub fn count(&self) -> usize {
        if self.order_aware {
            2 * self.window
        } else {
            1
        }
    }

    /// Offsets `-window..=-1` map to `0..window`, `1..=window` to
    /// `window..2*window`. Classic mode always uses slot 0.
    pub fn slot(&self, offset: isize) -> usize {
        debug_assert!(offset != 0 && offset.unsigned_abs() <= self.window);
        if !self.order_aware {
            return 0;
        }
        let w = self.window as isize;
        if offset < 0 {
            (offset + w) as usize
        } else {
            (offset + w - 1) as usize
        }
    }

    pub fn offset(&self, slot: usize) -> isize {
        let w = self.window as isize;
        let s = slot as isize;
        if s < w {
            s - w
        } else {
            s - w + 1
        }
    }
}

/// Input vectors plus one or more output matrices, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsParams<F> {
    pub dim: usize,
    pub vocab_len: usize,
    pub input: Vec<F>,
    pub outputs: Vec<Vec<F>>,
}

/// One positive pair with its negatives, the unit of a single update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroBatch {
    pub center: u32,
    pub context: u32,
    pub slot: usize,
    pub negatives: Vec<u32>,
}

impl<F: Float> SgnsParams<F> {
    pub fn zeros(vocab_len: usize, dim: usize, slots: usize) -> Self {
        SgnsParams {
            dim,
            vocab_len,
            input: vec![F::zero(); vocab_len * dim],
            outputs: vec![vec![F::zero(); vocab_len * dim]; slots],
        }
    }

    pub fn input_row(&self, id: u32) -> &[F] {
        let i = id as usize * self.dim;
        &self.input[i..i + self.dim]
    }

    pub fn output_row(&self, slot: usize, id: u32) -> &[F] {
        let i = id as usize * self.dim;
        &self.outputs[slot][i..i + self.dim]
    }

    /// Negative-sampling loss of one micro-batch:
    /// `-ln σ(u·v) - Σ ln σ(-u·v_neg)`.
    pub fn loss(&self, batch: &MicroBatch) -> F {
        let u = self.input_row(batch.center);
        let mut loss = -log_sigmoid(dot(u, self.output_row(batch.slot, batch.context)));
        for &n in &batch.negatives {
            loss = loss - log_sigmoid(-dot(u, self.output_row(batch.slot, n)));
        }
        loss
    }

    /// The training update for one micro-batch, exactly as the trainer
    /// applies it. Returns the loss before the update.
    pub fn step(&mut self, batch: &MicroBatch, lr: F) -> F {
        let mut neu1e = vec![F::zero(); self.dim];
        let tables = RawTables::new(self);
        // SAFETY: `tables` points into `self`, which is exclusively borrowed
        // for the duration of the call.
        unsafe { sg_update(&tables, batch.center, batch.slot, batch.context, &batch.negatives, lr, &mut neu1e) }
    }

    pub fn all_finite(&self) -> bool {
        self.input.iter().chain(self.outputs.iter().flatten()).all(|v| v.is_finite())
    }
}

/// Raw views into [`SgnsParams`] shared by hogwild workers.
struct RawTables<F> {
    dim: usize,
    input: *mut F,
    outputs: Vec<*mut F>,
}

// Hogwild contract: workers race on rows without synchronization.
unsafe impl<F: Send> Send for RawTables<F> {}
unsafe impl<F: Send> Sync for RawTables<F> {}

impl<F> RawTables<F> {
    fn new(params: &mut SgnsParams<F>) -> Self {
        RawTables {
            dim: params.dim,
            input: params.input.as_mut_ptr(),
            outputs: params.outputs.iter_mut().map(|m| m.as_mut_ptr()).collect(),
        }
    }

    unsafe fn input(&self, id: u32) -> &mut [F] {
        std::slice::from_raw_parts_mut(self.input.add(id as usize * self.dim), self.dim)
    }

    unsafe fn output(&self, slot: usize, id: u32) -> &mut [F] {
        std::slice::from_raw_parts_mut(self.outputs[slot].add(id as usize * self.dim), self.dim)
    }
}

/// Skip-gram update: input[center] against output_slot[context] and negatives.
unsafe fn sg_update<F: Float>(
    t: &RawTables<F>,
    center: u32,
    slot: usize,
    context: u32,
    negatives: &[u32],
    lr: F,
    neu1e: &mut [F],
) -> F {
    let u = t.input(center);
    neu1e.fill(F::zero());
    let mut loss = F::zero();
    let targets = std::iter::once((context, true)).chain(negatives.iter().map(|&n| (n, false)));
    for (target, positive) in targets {
        let v = t.output(slot, target);
        let score = dot(u, v);
        let (g, l) = if positive {
            (F::one() - sigmoid(score), -log_sigmoid(score))
        } else {
            (-sigmoid(score), -log_sigmoid(-score))
        };
        loss = loss + l;
        let g = g * lr;
        axpy(g, v, neu1e);
        axpy(g, u, v);
    }
    axpy(F::one(), neu1e, u);
    loss
}

/// CBOW update: the mean of the context input vectors predicts `center`.
unsafe fn cbow_update<F: Float>(
    t: &RawTables<F>,
    contexts: &[u32],
    center: u32,
    negatives: &[u32],
    lr: F,
    hidden: &mut [F],
    neu1e: &mut [F],
) -> F {
    let scale = F::one() / F::from(contexts.len()).expect("small count");
    hidden.fill(F::zero());
    for &c in contexts {
        axpy(scale, t.input(c), hidden);
    }
    neu1e.fill(F::zero());
    let mut loss = F::zero();
    let targets = std::iter::once((center, true)).chain(negatives.iter().map(|&n| (n, false)));
    for (target, positive) in targets {
        let v = t.output(0, target);
        let score = dot(hidden, v);
        let (g, l) = if positive {
            (F::one() - sigmoid(score), -log_sigmoid(score))
        } else {
            (-sigmoid(score), -log_sigmoid(-score))
        };
        loss = loss + l;
        let g = g * lr;
        axpy(g, v, neu1e);
        axpy(g, hidden, v);
    }
    for &c in contexts {
        axpy(scale, neu1e, t.input(c));
    }
    loss
}

/// Linear decay from `initial` to `last` over `total` updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    pub initial: f64,
    pub last: f64,
    pub total: u64,
}

impl LearningRate {
    pub fn at(&self, done: u64) -> f64 {
        if self.total == 0 {
            return self.initial;
        }
        let frac = done.min(self.total) as f64 / self.total as f64;
        self.initial + (self.last - self.initial) * frac
    }
}

/// A positive training pair as seen by the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrainingPair {
    pub center: u32,
    pub context: u32,
    /// Output matrix used; always 0 outside order-aware mode.
    pub slot: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean micro-batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub pairs: u64,
    pub final_lr: f64,
}

struct Shared<'a> {
    sentences: &'a [Vec<u32>],
    cfg: &'a TrainConfig,
    slots: OutputSlots,
    sampler: &'a NegativeSampler,
    counts: &'a [u64],
    total_tokens: u64,
    schedule: LearningRate,
    progress: AtomicU64,
    failed: AtomicBool,
}

struct WorkerResult {
    epoch_loss: Vec<f64>,
    epoch_pairs: Vec<u64>,
    last_lr: f64,
}

const FLUSH_EVERY: u64 = 1024;

fn run_worker(
    shared: &Shared<'_>,
    tables: &RawTables<f32>,
    range: std::ops::Range<usize>,
    worker: u64,
    mut observer: Option<&mut dyn FnMut(TrainingPair)>,
) -> Result<WorkerResult, EmbedError> {
    let cfg = shared.cfg;
    let dim = cfg.dim;
    let window = cfg.window as isize;
    let mut rng: ChaCha8Rng = seeded_rng(cfg.seed, worker);
    let mut neu1e = vec![0f32; dim];
    let mut hidden = vec![0f32; dim];
    let mut negatives = Vec::with_capacity(cfg.negatives);
    let mut contexts = Vec::with_capacity(2 * cfg.window);
    let mut kept = Vec::new();
    let mut result = WorkerResult {
        epoch_loss: vec![0.0; cfg.epochs],
        epoch_pairs: vec![0; cfg.epochs],
        last_lr: cfg.lr_initial,
    };
    let mut local: u64 = 0;
    let mut base = 0u64;

    let subsample_threshold = cfg.subsample.map(|t| t * shared.total_tokens as f64);

    for epoch in 0..cfg.epochs {
        for sentence in &shared.sentences[range.clone()] {
            if shared.failed.load(Ordering::Relaxed) {
                return Err(EmbedError::NonFiniteUpdate);
            }
            let sentence: &[u32] = match subsample_threshold {
                Some(t) => {
                    kept.clear();
                    kept.extend(sentence.iter().copied().filter(|&w| {
                        let f = shared.counts[w as usize] as f64;
                        let keep = ((f / t).sqrt() + 1.0) * t / f;
                        keep >= 1.0 || rng.random::<f64>() < keep
                    }));
                    // Skipped tokens still advance the schedule.
                    local += (sentence.len() - kept.len()) as u64;
                    &kept
                }
                None => sentence,
            };
            for i in 0..sentence.len() {
                if local >= FLUSH_EVERY {
                    base = shared.progress.fetch_add(local, Ordering::Relaxed) + local;
                    local = 0;
                }
                let lr = shared.schedule.at(base + local) as f32;
                result.last_lr = lr as f64;
                local += 1;
                let center = sentence[i];
                match cfg.architecture {
                    Architecture::SkipGram => {
                        for r in -window..=window {
                            let j = i as isize + r;
                            if r == 0 || j < 0 || j >= sentence.len() as isize {
                                continue;
                            }
                            let context = sentence[j as usize];
                            let slot = shared.slots.slot(r);
                            negatives.clear();
                            for _ in 0..cfg.negatives {
                                let n = shared.sampler.sample(&mut rng);
                                if n != context {
                                    negatives.push(n);
                                }
                            }
                            if let Some(obs) = observer.as_deref_mut() {
                                obs(TrainingPair { center, context, slot });
                            }
                            // SAFETY: rows stay within the tables; concurrent
                            // writers are tolerated by the hogwild contract.
                            let loss = unsafe {
                                sg_update(tables, center, slot, context, &negatives, lr, &mut neu1e)
                            };
                            if !loss.is_finite() {
                                shared.failed.store(true, Ordering::Relaxed);
                                return Err(EmbedError::NonFiniteUpdate);
                            }
                            result.epoch_loss[epoch] += loss as f64;
                            result.epoch_pairs[epoch] += 1;
                        }
                    }
                    Architecture::Cbow => {
                        contexts.clear();
                        for r in -window..=window {
                            let j = i as isize + r;
                            if r != 0 && j >= 0 && j < sentence.len() as isize {
                                contexts.push(sentence[j as usize]);
                            }
                        }
                        if contexts.is_empty() {
                            continue;
                        }
                        negatives.clear();
                        for _ in 0..cfg.negatives {
                            let n = shared.sampler.sample(&mut rng);
                            if n != center {
                                negatives.push(n);
                            }
                        }
                        if let Some(obs) = observer.as_deref_mut() {
                            for &context in &contexts {
                                obs(TrainingPair { center, context, slot: 0 });
                            }
                        }
                        // SAFETY: as above.
                        let loss = unsafe {
                            cbow_update(tables, &contexts, center, &negatives, lr, &mut hidden, &mut neu1e)
                        };
                        if !loss.is_finite() {
                            shared.failed.store(true, Ordering::Relaxed);
                            return Err(EmbedError::NonFiniteUpdate);
                        }
                        result.epoch_loss[epoch] += loss as f64;
                        result.epoch_pairs[epoch] += 1;
                    }
                }
            }
        }
    }
    shared.progress.fetch_add(local, Ordering::Relaxed);
    Ok(result)
}

/// Split `sentences` into `parts` contiguous ranges of roughly equal token count.
fn partition(sentences: &[Vec<u32>], parts: usize) -> Vec<std::ops::Range<usize>> {
    let total: usize = sentences.iter().map(Vec::len).sum();
    let per = total.div_ceil(parts.max(1)).max(1);
    let mut ranges = Vec::with_capacity(parts);
    let mut start = 0;
    let mut acc = 0;
    for (i, s) in sentences.iter().enumerate() {
        acc += s.len();
        if acc >= per && ranges.len() + 1 < parts {
            ranges.push(start..i + 1);
            start = i + 1;
            acc = 0;
        }
    }
    if start < sentences.len() || ranges.is_empty() {
        ranges.push(start..sentences.len());
    }
    ranges
}

fn validate(cfg: &TrainConfig) -> Result<(), EmbedError> {
    let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_string()));
    if cfg.dim == 0 {
        return bad("dim must be positive");
    }
    if cfg.window == 0 {
        return bad("window must be positive");
    }
    if cfg.epochs == 0 {
        return bad("epochs must be positive");
    }
    if !(cfg.lr_initial.is_finite() && cfg.lr_final.is_finite()) || cfg.lr_initial <= 0.0 || cfg.lr_final < 0.0 {
        return bad("learning rates must be finite, initial > 0, final >= 0");
    }
    if cfg.order_aware && cfg.architecture == Architecture::Cbow {
        return bad("order-aware training is only defined for skip-gram");
    }
    if let Some(t) = cfg.subsample {
        if !(t > 0.0 && t.is_finite()) {
            return bad("subsample threshold must be positive");
        }
    }
    Ok(())
}

fn train_impl(
    corpus: &TokenCorpus,
    cfg: &TrainConfig,
    observer: Option<&mut dyn FnMut(TrainingPair)>,
) -> Result<(EmbeddingMatrix, TrainReport), EmbedError> {
    validate(cfg)?;
    let vocab = build_vocab(corpus, cfg.min_count)?;
    let sentences = vocab.encode(corpus);
    let sampler = NegativeSampler::new(&vocab);
    let slots = OutputSlots {
        window: cfg.window,
        order_aware: cfg.order_aware,
    };
    let total_tokens: u64 = sentences.iter().map(|s| s.len() as u64).sum();

    let mut params = SgnsParams::<f32>::zeros(vocab.len(), cfg.dim, slots.count());
    let mut init_rng: ChaCha8Rng = seeded_rng(cfg.seed, u64::MAX);
    let half_width = 0.5 / cfg.dim as f32;
    for v in params.input.iter_mut() {
        *v = (init_rng.random::<f32>() * 2.0 - 1.0) * half_width;
    }

    let shared = Shared {
        sentences: &sentences,
        cfg,
        slots,
        sampler: &sampler,
        counts: vocab.counts(),
        total_tokens,
        schedule: LearningRate {
            initial: cfg.lr_initial,
            last: cfg.lr_final,
            total: total_tokens * cfg.epochs as u64,
        },
        progress: AtomicU64::new(0),
        failed: AtomicBool::new(false),
    };
    let tables = RawTables::new(&mut params);

    let threads = if observer.is_some() { 1 } else { cfg.threads.max(1) };
    let results: Vec<WorkerResult> = if threads == 1 {
        vec![run_worker(&shared, &tables, 0..sentences.len(), 0, observer)?]
    } else {
        let ranges = partition(&sentences, threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .into_iter()
                .enumerate()
                .map(|(w, range)| {
                    let shared = &shared;
                    let tables = &tables;
                    scope.spawn(move || run_worker(shared, tables, range, w as u64, None))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("embedding worker panicked"))
                .collect::<Result<Vec<_>, _>>()
        })?
    };
    drop(tables);

    if !params.all_finite() {
        return Err(EmbedError::NonFiniteUpdate);
    }

    let mut report = TrainReport {
        epoch_losses: vec![0.0; cfg.epochs],
        pairs: 0,
        final_lr: results.iter().map(|r| r.last_lr).fold(f64::INFINITY, f64::min),
    };
    for epoch in 0..cfg.epochs {
        let loss: f64 = results.iter().map(|r| r.epoch_loss[epoch]).sum();
        let pairs: u64 = results.iter().map(|r| r.epoch_pairs[epoch]).sum();
        report.epoch_losses[epoch] = if pairs > 0 { loss / pairs as f64 } else { 0.0 };
        report.pairs += pairs;
    }

    Ok((
        EmbeddingMatrix {
            vocab,
            config: cfg.clone(),
            params,
        },
        report,
    ))
}

pub fn train(corpus: &TokenCorpus, cfg: &TrainConfig) -> Result<EmbeddingMatrix, EmbedError> {
    train_impl(corpus, cfg, None).map(|(m, _)| m)
}

pub fn train_with_report(
    corpus: &TokenCorpus,
    cfg: &TrainConfig,
) -> Result<(EmbeddingMatrix, TrainReport), EmbedError> {
    train_impl(corpus, cfg, None)
}

/// Single-worker training that reports every positive pair to `observer`
/// before its update is applied.
pub fn train_observed(
    corpus: &TokenCorpus,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(TrainingPair),
) -> Result<(EmbeddingMatrix, TrainReport), EmbedError> {
    train_impl(corpus, cfg, Some(observer))
}
