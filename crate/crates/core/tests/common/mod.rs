//! Checks shared by the topic test files and the acceptance report. Each
//! returns a one-line summary on success and the first violation otherwise.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use grand_core::classify::{repair_path, ClassId, Dense, Head, LevelModel, Mlp, Targets, TypeHierarchy};
use grand_core::classify::predict_hierarchical;
use grand_core::embed::{train_observed, MicroBatch, SgnsParams, TrainConfig};
use grand_core::eval::{accuracy, macro_f1, micro_f1};
use grand_core::graph::{build_graph, KnowledgeGraph, Triple};
use grand_core::pipeline::synthetic::{generate, write_synthetic, SyntheticFiles, SyntheticSpec};
use grand_core::pipeline::config::RDF_TYPE;
use grand_core::pipeline::{self, ExperimentConfig, Regime, RunOutcome};
use grand_core::represent::{fit_pca, VectorSource};
use grand_core::util::seeded_rng;
use grand_core::walks::{
    derive_entity_walk, derive_predicate_walk, generate_classic_walks, generate_corpora, Strategy, TokenCorpus,
    WalkConfig, WalkToken,
};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// `|a - b| / max(|a|, |b|)`, with the denominator floored at `floor` so
/// coordinates whose gradient is essentially zero compare absolutely.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

// ---------------------------------------------------------------- walks

pub fn random_graph(rng: &mut ChaCha8Rng) -> KnowledgeGraph {
    let n = rng.random_range(1..=50usize);
    let r = rng.random_range(1..=6usize);
    let m = rng.random_range(0..=3 * n);
    let triples: Vec<Triple> = (0..m)
        .map(|_| {
            let s = rng.random_range(0..n);
            let p = rng.random_range(0..r);
            let o = rng.random_range(0..n);
            Triple::new(&format!("x:e{s}"), &format!("x:p{p}"), &format!("x:e{o}")).unwrap()
        })
        .collect();
    build_graph(&triples, &[])
}

fn check_walks_on(g: &KnowledgeGraph, cfg: &WalkConfig, rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut checked = 0;
    for e in g.entity_ids() {
        let walks = generate_classic_walks(g, e, cfg, rng).map_err(|e| e.to_string())?;
        ensure!(walks.len() <= cfg.walks_per_entity, "too many walks from {e:?}");
        if cfg.dedup {
            let distinct: HashSet<_> = walks.iter().collect();
            ensure!(distinct.len() == walks.len(), "duplicate walk from {e:?}");
        }
        for w in &walks {
            ensure!(w.is_classic(), "walk is not entity/relation alternating");
            ensure!(w.tokens[0] == WalkToken::Entity(e), "walk does not start at its source");
            ensure!(w.len() <= 2 * cfg.depth + 1, "walk of length {} exceeds depth {}", w.len(), cfg.depth);
            for hop in w.tokens[..].windows(3).step_by(2) {
                let (WalkToken::Entity(s), WalkToken::Relation(p), WalkToken::Entity(o)) = (hop[0], hop[1], hop[2])
                else {
                    return Err("malformed hop".into());
                };
                let out = g.out_neighbors(s).map_err(|e| e.to_string())?;
                ensure!(out.contains(&(p, o)), "hop {s:?} {p:?} {o:?} is not an edge");
            }
            // A walk shorter than the limit must end at a dead end.
            if w.hops() < cfg.depth {
                let WalkToken::Entity(last) = *w.tokens.last().unwrap() else {
                    return Err("walk ends on a relation".into());
                };
                ensure!(g.out_degree(last).unwrap() == 0, "walk stopped early at {last:?}");
            }
            let ew = derive_entity_walk(w).map_err(|e| e.to_string())?;
            let pw = derive_predicate_walk(w).map_err(|e| e.to_string())?;
            ensure!(ew.len() + pw.len() == w.len() + 1, "entity/predicate walk lengths do not add up");
            ensure!(pw.tokens[0] == w.tokens[0], "predicate walk lost its source entity");
            checked += 1;
        }
    }
    Ok(checked)
}

/// Criterion 1: every walk on 500 random graphs is a forward graph path
/// within the length limit, and the derived walks split its tokens.
pub fn walk_correctness() -> Check {
    let start = Instant::now();
    let mut rng: ChaCha8Rng = seeded_rng(2024, 1);
    let mut walks = 0;
    for i in 0..500u64 {
        let g = random_graph(&mut rng);
        let cfg = WalkConfig {
            depth: rng.random_range(1..=6),
            walks_per_entity: rng.random_range(1..=30),
            strategy: Strategy::Classic,
            seed: i,
            dedup: rng.random_bool(0.5),
        };
        walks += check_walks_on(&g, &cfg, &mut rng).map_err(|e| format!("graph {i}: {e}"))?;
        // The corpus path derives the three strategies from the same walks.
        let corpora = generate_corpora(&g, &cfg, &Strategy::ALL).map_err(|e| e.to_string())?;
        for w in &corpora[0].walks {
            ensure!(w.is_classic() && w.len() <= 2 * cfg.depth + 1, "graph {i}: bad corpus walk");
        }
        if !cfg.dedup {
            for ((c, e), p) in corpora[0].walks.iter().zip(&corpora[1].walks).zip(&corpora[2].walks) {
                ensure!(e.len() + p.len() == c.len() + 1, "graph {i}: corpus lengths do not add up");
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:.1?}");
    Ok(format!("{walks} walks on 500 graphs in {elapsed:.2?}"))
}

// ------------------------------------------------------------ embedding

fn random_params(rng: &mut ChaCha8Rng, vocab: usize, dim: usize, slots: usize) -> SgnsParams<f64> {
    let mut p = SgnsParams::<f64>::zeros(vocab, dim, slots);
    for v in p.input.iter_mut().chain(p.outputs.iter_mut().flatten()) {
        *v = rng.random_range(-0.8..0.8);
    }
    p
}

/// A micro-batch whose context and negatives are distinct rows, so the
/// sequential update equals one exact gradient step.
fn random_batch(rng: &mut ChaCha8Rng, vocab: usize, slots: usize) -> MicroBatch {
    let k = rng.random_range(1..=5usize);
    let rows = rand::seq::index::sample(rng, vocab, k + 1).into_vec();
    MicroBatch {
        center: rng.random_range(0..vocab as u32),
        context: rows[0] as u32,
        slot: rng.random_range(0..slots),
        negatives: rows[1..].iter().map(|&r| r as u32).collect(),
    }
}

/// Largest per-coordinate relative error between the trainer's update and
/// a central finite difference of the loss.
pub fn sgns_gradient_error(rng: &mut ChaCha8Rng, slots: usize) -> f64 {
    let (vocab, dim) = (12, 6);
    let params = random_params(rng, vocab, dim, slots);
    let batch = random_batch(rng, vocab, slots);
    // With lr = 1 the update is exactly `-grad`.
    let mut stepped = params.clone();
    stepped.step(&batch, 1.0);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut probe = |get: &dyn Fn(&SgnsParams<f64>) -> f64, set: &dyn Fn(&mut SgnsParams<f64>, f64)| {
        let analytic = get(&params) - get(&stepped);
        let mut p = params.clone();
        let x = get(&p);
        set(&mut p, x + h);
        let up = p.loss(&batch);
        set(&mut p, x - h);
        let down = p.loss(&batch);
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(rel_err(analytic, numeric, 1e-6));
    };
    for i in 0..vocab * dim {
        probe(&|p| p.input[i], &|p, v| p.input[i] = v);
        for s in 0..slots {
            probe(&|p| p.outputs[s][i], &|p, v| p.outputs[s][i] = v);
        }
    }
    worst
}

/// Criterion 2: skip-gram updates agree with finite differences, for the
/// classic single output matrix and the order-aware position matrices.
pub fn embedding_gradient_check() -> Check {
    let start = Instant::now();
    let mut rng: ChaCha8Rng = seeded_rng(2024, 2);
    let mut worst: f64 = 0.0;
    for (label, slots) in [("classic", 1usize), ("order-aware", 2 * 3)] {
        for b in 0..20 {
            let err = sgns_gradient_error(&mut rng, slots);
            ensure!(err <= 1e-4, "{label} batch {b}: relative error {err:.2e}");
            worst = worst.max(err);
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:.1?}");
    Ok(format!("max relative error {worst:.2e} over 40 micro-batches in {elapsed:.2?}"))
}

// -------------------------------------------------------- order awareness

type PairLog = BTreeMap<(String, String, isize), usize>;

/// Train one epoch and log `(center, context, offset)` pairs. Without order
/// awareness the offset is reported as 0.
pub fn logged_pairs(sentences: &[Vec<&str>], order_aware: bool) -> PairLog {
    let corpus = TokenCorpus::from_sentences(sentences);
    let cfg = TrainConfig {
        dim: 4,
        epochs: 1,
        window: 2,
        negatives: 2,
        order_aware,
        seed: 3,
        threads: 1,
        ..TrainConfig::default()
    };
    let mut raw = Vec::new();
    let (m, _) = train_observed(&corpus, &cfg, &mut |p| raw.push(p)).expect("tiny corpus trains");
    let window = cfg.window as isize;
    let offset = |slot: usize| -> isize {
        if !order_aware {
            0
        } else if (slot as isize) < window {
            slot as isize - window
        } else {
            slot as isize - window + 1
        }
    };
    let mut log = PairLog::new();
    for p in raw {
        let key = (
            m.vocab.token(p.center).to_string(),
            m.vocab.token(p.context).to_string(),
            offset(p.slot),
        );
        *log.entry(key).or_default() += 1;
    }
    log
}

pub fn asymmetric_corpus() -> Vec<Vec<&'static str>> {
    vec![vec!["x", "r", "y"], vec!["x", "r", "y", "s", "z"], vec!["u", "r", "x"]]
}

fn reversed(c: &[Vec<&'static str>]) -> Vec<Vec<&'static str>> {
    c.iter().map(|s| s.iter().rev().copied().collect()).collect()
}

/// Expected order-aware log, counted straight from the sentences.
fn expected_pairs(sentences: &[Vec<&str>], window: isize) -> PairLog {
    let mut log = PairLog::new();
    for s in sentences {
        for i in 0..s.len() as isize {
            for r in -window..=window {
                let j = i + r;
                if r != 0 && j >= 0 && j < s.len() as isize {
                    *log.entry((s[i as usize].into(), s[j as usize].into(), r)).or_default() += 1;
                }
            }
        }
    }
    log
}

/// Criterion 3: order-aware pair logs separate `x r y` from `y r x`; the
/// classic log does not.
pub fn order_awareness() -> Check {
    let fwd = asymmetric_corpus();
    let back = reversed(&fwd);
    let oa_fwd = logged_pairs(&fwd, true);
    let oa_back = logged_pairs(&back, true);
    ensure!(oa_fwd == expected_pairs(&fwd, 2), "order-aware log differs from the hand count");
    ensure!(oa_back == expected_pairs(&back, 2), "order-aware log of the reversed corpus differs");
    ensure!(oa_fwd != oa_back, "order-aware log does not see sentence direction");
    let mirrored: PairLog = oa_fwd.iter().map(|((c, x, r), n)| ((c.clone(), x.clone(), -r), *n)).collect();
    ensure!(mirrored == oa_back, "reversal should exactly negate every offset");
    ensure!(
        oa_fwd.get(&("x".into(), "y".into(), 2)) == Some(&2) && !oa_back.contains_key(&("x".into(), "y".into(), 2)),
        "(x, y, +2) should appear twice forward and never backward"
    );
    let classic_fwd = logged_pairs(&fwd, false);
    let classic_back = logged_pairs(&back, false);
    ensure!(classic_fwd == classic_back, "classic pair multiset changes under reversal");
    let flattened = oa_fwd.iter().fold(PairLog::new(), |mut acc, ((c, x, _), n)| {
        *acc.entry((c.clone(), x.clone(), 0)).or_default() += n;
        acc
    });
    ensure!(flattened == classic_fwd, "classic pairs are not the order-aware pairs without offsets");
    let total: usize = oa_fwd.values().sum();
    Ok(format!("{total} pairs; order-aware logs mirror under reversal, classic logs are equal"))
}

// ----------------------------------------------------------- classifier

pub fn random_mlp(rng: &mut ChaCha8Rng, head: Head) -> Mlp {
    let input = rng.random_range(1..=8);
    let hidden: Vec<usize> = (0..rng.random_range(0..=2)).map(|_| rng.random_range(1..=8)).collect();
    let classes = rng.random_range(2..=8);
    let mut m = Mlp::new(input, &hidden, classes, head, rng.random(), 1.0);
    for l in &mut m.layers {
        l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    m
}

/// Smallest |pre-activation| of any hidden unit; finite differences are
/// only meaningful away from the ReLU kink.
fn min_preactivation(m: &Mlp, x: &Array2<f64>) -> f64 {
    let mut a = x.clone();
    let mut min = f64::INFINITY;
    for layer in &m.layers[..m.layers.len() - 1] {
        let z = a.dot(&layer.weights) + &layer.bias;
        min = z.iter().fold(min, |acc, v| acc.min(v.abs()));
        a = z.mapv(|v| v.max(0.0));
    }
    min
}

fn params_mut(m: &mut Mlp) -> Vec<&mut f64> {
    m.layers
        .iter_mut()
        .flat_map(|l: &mut Dense| l.weights.iter_mut().chain(l.bias.iter_mut()))
        .collect()
}

/// Largest relative error over every weight and bias of a random network,
/// or `None` when the draw sits too close to a ReLU kink.
pub fn mlp_gradient_error(rng: &mut ChaCha8Rng, head: Head) -> Option<f64> {
    let m = random_mlp(rng, head);
    let n = rng.random_range(1..=5);
    let x = Array2::from_shape_fn((n, m.input_dim()), |_| rng.random_range(-1.0..1.0));
    let k = m.output_dim();
    let targets = match head {
        Head::Softmax => Targets::Classes((0..n).map(|_| rng.random_range(0..k)).collect()),
        Head::Sigmoid => Targets::Bits(Array2::from_shape_fn((n, k), |_| rng.random_bool(0.4))),
    };
    let h = 1e-6;
    if min_preactivation(&m, &x) < 1e-3 {
        return None;
    }
    let (_, grads) = m.loss_and_gradients(x.view(), &targets).unwrap();
    let analytic: Vec<f64> = grads
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
        .collect();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut up = m.clone();
        *params_mut(&mut up)[i] += h;
        let mut down = m.clone();
        *params_mut(&mut down)[i] -= h;
        let numeric = (up.loss(x.view(), &targets).unwrap() - down.loss(x.view(), &targets).unwrap()) / (2.0 * h);
        worst = worst.max(rel_err(a, numeric, 1e-6));
    }
    Some(worst)
}

/// Criterion 4: full-network gradients for both output heads.
pub fn classifier_gradient_check() -> Check {
    let mut rng: ChaCha8Rng = seeded_rng(2024, 4);
    let mut worst: f64 = 0.0;
    for head in [Head::Softmax, Head::Sigmoid] {
        let mut done = 0;
        while done < 25 {
            let Some(err) = mlp_gradient_error(&mut rng, head) else {
                continue;
            };
            ensure!(err <= 1e-4, "{head:?} network {done}: relative error {err:.2e}");
            worst = worst.max(err);
            done += 1;
        }
    }
    Ok(format!("max relative error {worst:.2e} over 50 networks"))
}

// -------------------------------------------------------------- metrics

pub fn random_predictions(rng: &mut ChaCha8Rng) -> (Vec<Vec<usize>>, Vec<Vec<usize>>, usize) {
    let k = rng.random_range(1..=10);
    let n = rng.random_range(0..=200);
    let single = rng.random_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        if single {
            vec![rng.random_range(0..k)]
        } else {
            (0..k).filter(|_| rng.random_bool(0.3)).collect()
        }
    };
    let pred = (0..n).map(|_| draw(rng)).collect();
    let gold = (0..n).map(|_| draw(rng)).collect();
    (pred, gold, k)
}

/// `(accuracy, micro, macro)` by counting each class against each example.
pub fn oracle_metrics(pred: &[Vec<usize>], gold: &[Vec<usize>], k: usize) -> (f64, f64, f64) {
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        if tp + fp + fn_ == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let (mut all_tp, mut all_fp, mut all_fn) = (0, 0, 0);
    let mut macro_sum = 0.0;
    for c in 0..k {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (p, g) in pred.iter().zip(gold) {
            match (p.contains(&c), g.contains(&c)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        all_tp += tp;
        all_fp += fp;
        all_fn += fn_;
        macro_sum += f1(tp, fp, fn_);
    }
    let exact = pred
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.iter().collect::<BTreeSet<_>>() == g.iter().collect::<BTreeSet<_>>())
        .count();
    let acc = if pred.is_empty() { 1.0 } else { exact as f64 / pred.len() as f64 };
    (acc, f1(all_tp, all_fp, all_fn), macro_sum / k as f64)
}

/// Criterion 5: metrics equal the counting oracle bit for bit.
pub fn metric_oracle() -> Check {
    let mut rng: ChaCha8Rng = seeded_rng(2024, 5);
    for i in 0..1000 {
        let (pred, gold, k) = random_predictions(&mut rng);
        let got = (accuracy(&pred, &gold), micro_f1(&pred, &gold, k), macro_f1(&pred, &gold, k));
        let want = oracle_metrics(&pred, &gold, k);
        ensure!(got == want, "set {i}: got {got:?}, oracle {want:?}");
    }
    Ok("1000 prediction sets match exactly".into())
}

// ------------------------------------------------------------------ PCA

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * (1.0 + j as f64)).collect())
        .collect()
}

pub fn orthonormality_error(components: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in components.iter().enumerate() {
        for (j, b) in components.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

/// Criterion 6: orthonormal components, exact full-rank round trip and two
/// eigenproblems solved by hand.
pub fn pca_checks() -> Check {
    let mut rng: ChaCha8Rng = seeded_rng(2024, 6);
    let (mut ortho, mut trip): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let d = rng.random_range(1..=8);
        let n = rng.random_range(d + 1..=40);
        let cloud = random_cloud(&mut rng, n, d);
        let model = fit_pca(&cloud, d).map_err(|e| e.to_string())?;
        ortho = ortho.max(orthonormality_error(&model.components));
        for v in &cloud {
            let back = model.reconstruct(&model.apply(v).unwrap()).unwrap();
            trip = back.iter().zip(v).fold(trip, |acc, (a, b)| acc.max((a - b).abs()));
        }
        ensure!(
            model.explained_variance.windows(2).all(|w| w[0] >= w[1] - 1e-12),
            "explained variance is not sorted"
        );
    }
    ensure!(ortho <= 1e-6, "orthonormality deviation {ortho:.2e}");
    ensure!(trip <= 1e-6, "round-trip error {trip:.2e}");

    // Points (±1, ±1) along the diagonal only: covariance [[1, 1], [1, 1]],
    // eigenvalues 2 and 0, first axis (1, 1)/√2.
    let diag = vec![vec![1.0, 1.0], vec![-1.0, -1.0]];
    let m = fit_pca(&diag, 2).map_err(|e| e.to_string())?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ensure!((m.explained_variance[0] - 2.0).abs() < 1e-9, "diagonal case: variance {:?}", m.explained_variance);
    ensure!(m.explained_variance[1].abs() < 1e-9, "diagonal case: second variance {}", m.explained_variance[1]);
    let c = &m.components[0];
    ensure!((c[0].abs() - s).abs() < 1e-9 && (c[1] - c[0]).abs() < 1e-9, "diagonal case: axis {c:?}");
    let z = m.apply(&[1.0, 1.0]).unwrap();
    ensure!((z[0].abs() - 2f64.sqrt()).abs() < 1e-9, "diagonal case: projection {z:?}");

    // Axis-aligned spread: x ∈ {±2}, y ∈ {±1}, covariance diag(4, 1).
    let rect = vec![vec![2.0, 1.0], vec![2.0, -1.0], vec![-2.0, 1.0], vec![-2.0, -1.0]];
    let m = fit_pca(&rect, 2).map_err(|e| e.to_string())?;
    ensure!(
        (m.explained_variance[0] - 4.0).abs() < 1e-9 && (m.explained_variance[1] - 1.0).abs() < 1e-9,
        "rectangle case: variances {:?}",
        m.explained_variance
    );
    ensure!((m.components[0][0].abs() - 1.0).abs() < 1e-9, "rectangle case: first axis {:?}", m.components[0]);
    ensure!((m.components[1][1].abs() - 1.0).abs() < 1e-9, "rectangle case: second axis {:?}", m.components[1]);
    Ok(format!("orthonormality {ortho:.1e}, round trip {trip:.1e}, 2-D cases match"))
}

// ---------------------------------------------------- hierarchical repair

/// A random forest of classes with up to `max_depth` levels.
pub fn random_hierarchy(rng: &mut ChaCha8Rng, max_depth: usize) -> TypeHierarchy {
    let n = rng.random_range(1..=14);
    let mut edges: Vec<(String, Option<String>)> = Vec::new();
    let mut levels: Vec<usize> = Vec::new();
    for i in 0..n {
        let candidates: Vec<usize> = (0..i).filter(|&j| levels[j] < max_depth).collect();
        if i == 0 || candidates.is_empty() || rng.random_bool(0.3) {
            edges.push((format!("K{i}"), None));
            levels.push(1);
        } else {
            let p = candidates[rng.random_range(0..candidates.len())];
            edges.push((format!("K{i}"), Some(format!("K{p}"))));
            levels.push(levels[p] + 1);
        }
    }
    TypeHierarchy::from_edges(edges.iter().map(|(c, p)| (c.as_str(), p.as_deref()))).unwrap()
}

fn random_level_models(rng: &mut ChaCha8Rng, h: &TypeHierarchy, dim: usize) -> Vec<LevelModel> {
    (1..=h.depth())
        .map(|level| {
            let classes = h.classes_at_level(level);
            let hidden: Vec<usize> = if rng.random_bool(0.5) { vec![3] } else { vec![] };
            let mut model = Mlp::new(dim, &hidden, classes.len(), Head::Softmax, rng.random(), 1.0);
            for l in &mut model.layers {
                l.bias.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            }
            LevelModel { level, classes, model }
        })
        .collect()
}

/// Longest prefix of the per-level choices that forms a parent chain.
fn oracle_chain(h: &TypeHierarchy, choices: &[ClassId]) -> Vec<ClassId> {
    let mut out = Vec::new();
    for (i, &c) in choices.iter().enumerate() {
        let ok = if i == 0 { h.parent(c).is_none() } else { h.parent(c) == out.last().copied() };
        if !ok {
            break;
        }
        out.push(c);
    }
    out
}

/// The hierarchy `1 → {1.1, 1.2}`, `2 → {2.1}` with level models forced to
/// answer class 1 and class 2.1.
pub fn repair_example() -> Result<Vec<String>, String> {
    let h = TypeHierarchy::from_edges([
        ("1", None),
        ("2", None),
        ("1.1", Some("1")),
        ("1.2", Some("1")),
        ("2.1", Some("2")),
    ])
    .map_err(|e| e.to_string())?;
    let forced = |level: usize, winner: &str| {
        let classes = h.classes_at_level(level);
        let mut model = Mlp::zeros(2, &[], classes.len(), Head::Softmax);
        let i = classes.iter().position(|&c| h.label(c) == winner).unwrap();
        model.layers[0].bias = Array1::from_shape_fn(classes.len(), |j| if j == i { 1.0 } else { 0.0 });
        LevelModel { level, classes, model }
    };
    let levels = [forced(1, "1"), forced(2, "2.1")];
    let path = predict_hierarchical(&levels, &h, &[0.3, -0.2]).map_err(|e| e.to_string())?;
    Ok(path.iter().map(|&c| h.label(c).to_string()).collect())
}

/// Criterion 7: level-wise predictions always come back as a root-anchored
/// parent chain, and the worked example repairs to `[1]`.
pub fn hierarchical_repair() -> Check {
    let mut rng: ChaCha8Rng = seeded_rng(2024, 7);
    let dim = 3;
    let mut cut = 0;
    for i in 0..10_000 {
        let h = random_hierarchy(&mut rng, 4);
        let levels = random_level_models(&mut rng, &h, dim);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let path = predict_hierarchical(&levels, &h, &x).map_err(|e| e.to_string())?;
        ensure!(!path.is_empty(), "draw {i}: empty path");
        ensure!(h.parent(path[0]).is_none(), "draw {i}: path does not start at a root");
        for (d, w) in path.windows(2).enumerate() {
            ensure!(h.parent(w[1]) == Some(w[0]), "draw {i}: step {d} is not parent to child");
        }
        for (d, &c) in path.iter().enumerate() {
            ensure!(h.level(c) == d + 1, "draw {i}: class at position {d} has level {}", h.level(c));
        }
        let choices: Vec<ClassId> = levels
            .iter()
            .map(|lm| {
                let s = lm.model.forward(&x).unwrap();
                lm.classes[grand_core::classify::argmax(&s)]
            })
            .collect();
        let expected = oracle_chain(&h, &choices);
        ensure!(path == expected, "draw {i}: {path:?} is not the consistent prefix {expected:?}");
        ensure!(repair_path(&h, &choices) == expected, "draw {i}: repair_path disagrees");
        if path.len() < choices.len() {
            cut += 1;
        }
    }
    let example = repair_example()?;
    ensure!(example == ["1"], "worked example gave {example:?}");
    Ok(format!("10000 draws valid ({cut} repaired); class 1 + class 2.1 gives [1]"))
}

// ------------------------------------------------------- synthetic runs

/// Embedding epochs for the synthetic experiment. The corpus is tiny (a few
/// dozen distinct walks per entity), so five passes leave the vectors
/// under-trained.
pub const SYNTHETIC_EMBED_EPOCHS: usize = 20;

pub fn oa(strategy: Strategy) -> VectorSource {
    VectorSource::Embedding {
        strategy,
        order_aware: true,
    }
}

pub fn synthetic_data(dir: &Path) -> SyntheticFiles {
    write_synthetic(&generate(&SyntheticSpec::default()), dir).expect("write synthetic graph")
}

pub fn synthetic_config(
    files: &SyntheticFiles,
    out: &Path,
    name: &str,
    fine: bool,
    regime: Regime,
    parts: Vec<VectorSource>,
) -> ExperimentConfig {
    let labels = if fine { &files.labels_fine } else { &files.labels_coarse };
    let mut cfg = ExperimentConfig::new(&files.graph, labels, out);
    cfg.name = name.to_string();
    cfg.regime = regime;
    if regime == Regime::Hierarchical {
        cfg.hierarchy = Some(files.hierarchy.clone());
    }
    cfg.deterministic = true;
    cfg.walk.depth = 8;
    cfg.walk.walks_per_entity = 500;
    // The generator asserts every entity's type; walking those edges would
    // hand the label to the classifier.
    cfg.walk.exclude_predicates = vec![RDF_TYPE.to_string()];
    cfg.embed.dim = 64;
    cfg.embed.epochs = SYNTHETIC_EMBED_EPOCHS;
    cfg.fusion.parts = parts;
    cfg.weight_epochs = vec![1, 10];
    cfg
}

pub fn concat_parts() -> Vec<VectorSource> {
    Strategy::ALL.into_iter().map(oa).collect()
}

pub struct SyntheticRuns {
    pub coarse: RunOutcome,
    pub fine: RunOutcome,
    pub hierarchical: RunOutcome,
    pub entity_only: RunOutcome,
    pub elapsed: Duration,
}

/// Run every configuration of the synthetic experiment into `out` on a
/// single thread.
pub fn synthetic_runs(files: &SyntheticFiles, out: &Path) -> Result<SyntheticRuns, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    pool.install(|| {
        let start = Instant::now();
        let go = |name: &str, fine: bool, regime: Regime, parts: Vec<VectorSource>| {
            pipeline::run(&synthetic_config(files, out, name, fine, regime, parts))
                .map_err(|e| format!("{name}: {e}"))
        };
        let coarse = go("coarse", false, Regime::MultiClass, concat_parts())?;
        let fine = go("fine", true, Regime::MultiClass, concat_parts())?;
        let hierarchical = go("hierarchical", true, Regime::Hierarchical, concat_parts())?;
        let entity_only = go("fine_entity", true, Regime::MultiClass, vec![oa(Strategy::EntityOnly)])?;
        Ok(SyntheticRuns {
            coarse,
            fine,
            hierarchical,
            entity_only,
            elapsed: start.elapsed(),
        })
    })
}

/// Criterion 8: accuracy thresholds in both regimes, the entity-only
/// ablation below the concatenation, and the time budget.
pub fn synthetic_end_to_end(runs: &SyntheticRuns) -> Check {
    let coarse = runs.coarse.metrics.overall.micro_f1;
    let fine = runs.fine.metrics.overall.micro_f1;
    let h = &runs.hierarchical.metrics;
    let h1 = h.level(1).ok_or("hierarchical run has no level 1 scores")?.micro_f1;
    let h2 = h.level(2).ok_or("hierarchical run has no level 2 scores")?.micro_f1;
    let e = runs.entity_only.metrics.overall.micro_f1;
    let summary = format!(
        "multi-class coarse {coarse:.3} fine {fine:.3}; hierarchical coarse {h1:.3} fine {h2:.3}; \
         e-only fine {e:.3}; {:.1?}",
        runs.elapsed
    );
    ensure!(coarse >= 0.90 && h1 >= 0.90, "coarse Mi-F1 below 0.90: {summary}");
    ensure!(fine >= 0.80 && h2 >= 0.80, "fine Mi-F1 below 0.80: {summary}");
    ensure!(e < fine, "entity-only not below the concatenation: {summary}");
    ensure!(runs.elapsed < Duration::from_secs(300), "over five minutes: {summary}");
    Ok(summary)
}

/// Criterion 9: weight shares are a distribution at the recorded epochs,
/// and predicate walks carry more first-layer weight than entity walks in
/// the coarse run.
pub fn weight_analysis(runs: &SyntheticRuns) -> Check {
    let mut lines = Vec::new();
    for run in [&runs.coarse, &runs.fine, &runs.hierarchical] {
        for epoch in [1, 10] {
            let records: Vec<_> = run.weights.iter().filter(|w| w.report.epoch == epoch).collect();
            ensure!(!records.is_empty(), "{}: no weights recorded at epoch {epoch}", run.metrics.name);
            for r in records {
                let sum: f64 = r.report.fractions.values().sum();
                ensure!((sum - 1.0).abs() <= 1e-9, "{}: epoch {epoch} fractions sum to {sum}", run.metrics.name);
            }
        }
    }
    let (p, e) = (oa(Strategy::PredicateOnly).to_string(), oa(Strategy::EntityOnly).to_string());
    let mut ordered = true;
    for epoch in [1, 10] {
        let r = runs
            .coarse
            .weights
            .iter()
            .find(|w| w.report.epoch == epoch)
            .ok_or("coarse run lacks a weight record")?;
        let (fp, fe) = (r.report.fraction(&p).unwrap_or(0.0), r.report.fraction(&e).unwrap_or(0.0));
        let fc = r.report.fraction(&oa(Strategy::Classic).to_string()).unwrap_or(0.0);
        lines.push(format!("epoch {epoch}: classic {fc:.4} entity {fe:.4} predicate {fp:.4}"));
        ordered &= fp > fe;
    }
    let summary = format!("sums within 1e-9; coarse {}", lines.join(", "));
    ensure!(ordered, "predicate share does not exceed entity share: {summary}");
    Ok(summary)
}

pub fn artifacts_of(run: &RunOutcome) -> Vec<String> {
    let mut rels: Vec<String> = Strategy::ALL.into_iter().map(pipeline::corpus_path).collect();
    rels.extend(concat_parts().into_iter().map(pipeline::embedding_path));
    rels.push(pipeline::metrics_path(&run.metrics.name));
    rels
}

/// Criterion 10: a repeat of the fine run in a fresh directory produces the
/// same bytes for every corpus, embedding and metrics file.
pub fn determinism(files: &SyntheticFiles, first: &RunOutcome, fresh: &Path) -> Check {
    let cfg = synthetic_config(files, fresh, &first.metrics.name, true, Regime::MultiClass, concat_parts());
    let second = pipeline::run(&cfg).map_err(|e| e.to_string())?;
    let rels = artifacts_of(first);
    for rel in &rels {
        let a = std::fs::read(first.artifact(rel)).map_err(|e| format!("{rel}: {e}"))?;
        let b = std::fs::read(second.artifact(rel)).map_err(|e| format!("{rel}: {e}"))?;
        ensure!(a == b, "{rel} differs between runs");
    }
    Ok(format!("{} artifacts byte-identical", rels.len()))
}
