//! End-to-end orchestration: walk, embed, fuse, train, evaluate.
//!
//! Artifacts live under the configured output directory:
//!
//! ```text
//! corpus/<strategy>.txt          walk corpora
//! embed/<variant>.vec(.json)     entity and relation vectors
//! fused/<parts>.<mode>.vec       per-entity features
//! models/<name>.ckpt             classifier checkpoint
//! metrics/<name>.json            test metrics
//! runs/<name>.*.json             weight shares, training history, manifest
//! stages.json                    memoization records
//! ```
//!
//! Corpora, embeddings and fused stores are shared between runs with
//! different names, so several experiments over one graph reuse the
//! expensive stages.

pub mod config;
pub mod dataset;
pub mod memo;
pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{
    self, predict_batch, predict_hierarchical, predict_hierarchical_sets, read_checkpoint,
    train_classifier, train_lpl, write_checkpoint, Checkpoint, ClassId, ClassifyError, EpochRecord,
    Example, Head, LabeledDataset, LevelModel, Mlp, TrainSpec, TypeHierarchy,
};
use crate::embed::{self, EmbedError};
use crate::eval::{self, Metrics, WeightReport};
use crate::graph::{self, GraphError, Iri, KnowledgeGraph, ParseOptions};
use crate::represent::{
    self, build_fused_store, FusedStore, Part, PcaPopulation, RepresentError, Segment, VectorSource,
};
use crate::util::{sha256_bytes, sha256_file, write_sorted_json};
use crate::vectors::KeyedVectors;
use crate::walks::{self, Strategy, WalkError};

pub use config::{ExperimentConfig, FusionSection, Regime, SplitFiles, WalkSection};
pub use dataset::{auto_split, load_dataset, read_labels, read_labels_file, DatasetError};
pub use memo::{RunManifest, StageReport, StageStatus, StageStore};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Represent(#[from] RepresentError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One first-layer weight report, tagged with the hierarchy level for
/// per-level models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub level: Option<usize>,
    #[serde(flatten)]
    pub report: WeightReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub level: Option<usize>,
    pub best_epoch: usize,
    pub epochs: Vec<EpochRecord>,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub weights: Vec<WeightRecord>,
    pub history: Vec<TrainHistory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub level: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// Test-set scores. For the hierarchical regime the top-level numbers pool
/// every level's classes; per-level scores are listed under `levels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub regime: Regime,
    #[serde(flatten)]
    pub overall: Metrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<LevelMetrics>>,
}

impl MetricsReport {
    pub fn level(&self, level: usize) -> Option<&Metrics> {
        self.levels
            .as_ref()?
            .iter()
            .find(|l| l.level == level)
            .map(|l| &l.metrics)
    }
}

pub fn read_graph(path: &Path, exclude: &[String]) -> Result<KnowledgeGraph, PipelineError> {
    let (triples, report) = graph::read_ntriples_file(path, ParseOptions { strict: false })?;
    log::info!(
        "{}: {} triples, {} literals and {} blank nodes skipped, {} malformed lines",
        path.display(),
        report.triples,
        report.literals_skipped,
        report.blank_nodes_skipped,
        report.malformed
    );
    let excluded = exclude
        .iter()
        .map(|p| Iri::new(p.as_str()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(graph::build_graph(&triples, &excluded))
}

fn head_for(regime: Regime, data: &LabeledDataset) -> Head {
    match regime {
        Regime::MultiClass => Head::Softmax,
        Regime::MultiLabel => Head::Sigmoid,
        Regime::Hierarchical if data.is_single_label() => Head::Softmax,
        Regime::Hierarchical => Head::Sigmoid,
    }
}

fn weight_observer<'a>(
    segments: &'a [Segment],
    epochs: &'a [usize],
    out: &'a mut Vec<WeightRecord>,
) -> impl FnMut(Option<usize>, usize, &Mlp) + 'a {
    move |level, epoch, m| {
        if !epochs.contains(&epoch) {
            return;
        }
        match eval::weight_group_analysis(m, segments, epoch) {
            Ok(report) => out.push(WeightRecord { level, report }),
            // PCA-reduced inputs no longer map onto the parts.
            Err(e) => log::debug!("weight analysis skipped: {e}"),
        }
    }
}

/// Train the classifier(s) for `regime` on the training split, selecting by
/// validation micro-F1.
pub fn train_models(
    data: &LabeledDataset,
    hierarchy: Option<&TypeHierarchy>,
    features: &FusedStore,
    regime: Regime,
    spec: &TrainSpec,
    weight_epochs: &[usize],
) -> Result<TrainOutcome, PipelineError> {
    let head = head_for(regime, data);
    let mut weights = Vec::new();
    let mut observe = weight_observer(&features.segments, weight_epochs, &mut weights);
    let (checkpoint, history) = match regime {
        Regime::MultiClass | Regime::MultiLabel => {
            let classes = data.class_names();
            let t = train_classifier(
                &data.train,
                &data.validation,
                &features.vectors,
                &classes,
                head,
                spec,
                &mut |e, m| observe(None, e, m),
            )?;
            let history = vec![TrainHistory {
                level: None,
                best_epoch: t.best_epoch,
                epochs: t.history,
            }];
            (Checkpoint::new(None, vec![(t.model, t.classes, None)]), history)
        }
        Regime::Hierarchical => {
            let h = hierarchy
                .ok_or_else(|| PipelineError::Config("hierarchical regime needs a hierarchy".into()))?;
            let lpl = train_lpl(
                &data.train,
                &data.validation,
                &features.vectors,
                h,
                head,
                spec,
                &mut |l, e, m| observe(Some(l), e, m),
            )?;
            let history = lpl
                .histories
                .into_iter()
                .zip(&lpl.best_epochs)
                .enumerate()
                .map(|(i, (epochs, &best_epoch))| TrainHistory {
                    level: Some(i + 1),
                    best_epoch,
                    epochs,
                })
                .collect();
            let models = lpl
                .levels
                .into_iter()
                .map(|lm| {
                    let names = lm.classes.iter().map(|&c| h.label(c).to_string()).collect();
                    (lm.model, names, Some(lm.level))
                })
                .collect();
            (Checkpoint::new(Some(h.digest()), models), history)
        }
    };
    drop(observe);
    Ok(TrainOutcome {
        checkpoint,
        weights,
        history,
    })
}

fn class_sets(
    examples: &[Example],
    index: &BTreeMap<&str, usize>,
) -> Result<Vec<Vec<usize>>, ClassifyError> {
    examples
        .iter()
        .map(|ex| {
            ex.labels
                .iter()
                .map(|l| {
                    index.get(l.as_str()).copied().ok_or_else(|| ClassifyError::UnknownClass {
                        iri: ex.entity.clone(),
                        class: l.clone(),
                    })
                })
                .collect()
        })
        .collect()
}

/// Score `examples` with the models in `ck`.
pub fn evaluate_models(
    name: &str,
    ck: &Checkpoint,
    hierarchy: Option<&TypeHierarchy>,
    examples: &[Example],
    features: &KeyedVectors<f64>,
    regime: Regime,
) -> Result<MetricsReport, PipelineError> {
    let x = classify::feature_matrix(examples, features)?;
    match regime {
        Regime::MultiClass | Regime::MultiLabel => {
            let (model, header) = match (ck.models.as_slice(), ck.header.models.as_slice()) {
                ([m], [h]) => (m, h),
                _ => return Err(ClassifyError::Checkpoint("expected a single model".into()).into()),
            };
            let index: BTreeMap<&str, usize> =
                header.classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
            let gold = class_sets(examples, &index)?;
            let pred = predict_batch(model, x.view())?;
            Ok(MetricsReport {
                name: name.to_string(),
                regime,
                overall: eval::evaluate(&pred, &gold, &header.classes),
                levels: None,
            })
        }
        Regime::Hierarchical => {
            let h = hierarchy
                .ok_or_else(|| PipelineError::Config("hierarchical regime needs a hierarchy".into()))?;
            if ck.header.hierarchy_hash.as_deref() != Some(h.digest().as_str()) {
                return Err(ClassifyError::InconsistentHierarchy(
                    "checkpoint was trained on a different hierarchy".into(),
                )
                .into());
            }
            let levels = ck
                .models
                .iter()
                .zip(&ck.header.models)
                .enumerate()
                .map(|(i, (m, mh))| {
                    let classes = mh
                        .classes
                        .iter()
                        .map(|c| h.id(c).ok_or_else(|| ClassifyError::InconsistentHierarchy(c.clone())))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(LevelModel {
                        level: mh.level.unwrap_or(i + 1),
                        classes,
                        model: m.clone(),
                    })
                })
                .collect::<Result<Vec<_>, ClassifyError>>()?;
            Ok(evaluate_hierarchical(name, &levels, h, examples, &x)?)
        }
    }
}

fn evaluate_hierarchical(
    name: &str,
    levels: &[LevelModel],
    h: &TypeHierarchy,
    examples: &[Example],
    x: &ndarray::Array2<f64>,
) -> Result<MetricsReport, ClassifyError> {
    let multi = levels.first().is_some_and(|l| l.model.head == Head::Sigmoid);
    let mut paths: Vec<BTreeSet<ClassId>> = Vec::with_capacity(examples.len());
    for row in x.rows() {
        let row = row.to_vec();
        let set = if multi {
            predict_hierarchical_sets(levels, h, &row)?.into_iter().flatten().collect()
        } else {
            predict_hierarchical(levels, h, &row)?.into_iter().collect()
        };
        paths.push(set);
    }
    let gold: Vec<BTreeSet<ClassId>> = examples
        .iter()
        .map(|ex| {
            ex.labels
                .iter()
                .map(|l| {
                    h.id(l).map(|c| h.path_to(c)).ok_or_else(|| ClassifyError::UnknownClass {
                        iri: ex.entity.clone(),
                        class: l.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(|paths| paths.into_iter().flatten().collect())
        })
        .collect::<Result<_, _>>()?;

    let to_idx = |s: &BTreeSet<ClassId>| s.iter().map(|c| c.index()).collect::<Vec<_>>();
    let all_names: Vec<String> = h.labels().to_vec();
    let overall = eval::evaluate(
        &paths.iter().map(to_idx).collect::<Vec<_>>(),
        &gold.iter().map(to_idx).collect::<Vec<_>>(),
        &all_names,
    );

    let mut per_level = Vec::new();
    for level in 1..=h.depth() {
        let classes = h.classes_at_level(level);
        let pos: BTreeMap<ClassId, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut p = Vec::new();
        let mut g = Vec::new();
        for (pred, gold) in paths.iter().zip(&gold) {
            let gl: Vec<usize> = gold.iter().filter_map(|c| pos.get(c).copied()).collect();
            if gl.is_empty() {
                continue;
            }
            // A path cut above this level contributes an empty prediction.
            p.push(pred.iter().filter_map(|c| pos.get(c).copied()).collect());
            g.push(gl);
        }
        let names: Vec<String> = classes.iter().map(|&c| h.label(c).to_string()).collect();
        per_level.push(LevelMetrics {
            level,
            metrics: eval::evaluate(&p, &g, &names),
        });
    }
    Ok(MetricsReport {
        name: name.to_string(),
        regime: Regime::Hierarchical,
        overall,
        levels: Some(per_level),
    })
}

/// Everything a finished [`run`] produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub metrics: MetricsReport,
    pub weights: Vec<WeightRecord>,
    pub history: Vec<TrainHistory>,
    pub output: PathBuf,
}

impl RunOutcome {
    pub fn artifact(&self, rel: &str) -> PathBuf {
        self.output.join(rel)
    }
}

pub fn corpus_path(strategy: Strategy) -> String {
    format!("corpus/{}.txt", strategy.name())
}

pub fn embedding_path(source: VectorSource) -> String {
    format!("embed/{source}.vec")
}

pub fn fused_path(fusion: &FusionSection) -> String {
    format!("fused/{}.vec", fusion.stem())
}

pub fn metrics_path(name: &str) -> String {
    format!("metrics/{name}.json")
}

fn sidecar(rel: &str) -> String {
    format!("{rel}.json")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Execute every stage of `cfg`, skipping those whose recorded inputs,
/// parameters and outputs are unchanged.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let root = cfg.output.clone();
    std::fs::create_dir_all(&root)?;
    let mut store = StageStore::open(&root)?;

    let (data, hierarchy) = load_dataset(
        &cfg.labels,
        cfg.hierarchy.as_deref(),
        cfg.splits.as_ref(),
        cfg.regime,
        cfg.seed,
    )?;
    let mut entities: Vec<String> = data.all().map(|e| e.entity.clone()).collect();
    entities.sort();
    let entities_digest = sha256_bytes(entities.join("\n").as_bytes());
    let data_digest = sha256_bytes(crate::util::to_sorted_json(&data)?.as_bytes());
    let graph_digest = sha256_file(&cfg.graph)?;

    let mut graph: Option<KnowledgeGraph> = None;
    let mut load_graph = |graph: &mut Option<KnowledgeGraph>| -> Result<(), PipelineError> {
        if graph.is_none() {
            *graph = Some(read_graph(&cfg.graph, &cfg.walk.exclude_predicates)?);
        }
        Ok(())
    };

    // Walk corpora for every strategy a fused part needs.
    let embedded: Vec<(Strategy, bool)> = cfg
        .fusion
        .parts
        .iter()
        .filter_map(|p| match *p {
            VectorSource::Embedding { strategy, order_aware } => Some((strategy, order_aware)),
            VectorSource::Description => None,
        })
        .collect();
    let strategies: BTreeSet<Strategy> = embedded.iter().map(|&(s, _)| s).collect();
    for &strategy in &strategies {
        let rel = corpus_path(strategy);
        let walk_cfg = cfg.walk.walk_config(strategy, cfg.seed);
        let params = (&cfg.walk, walk_cfg);
        let inputs = BTreeMap::from([("graph".to_string(), graph_digest.clone())]);
        let graph_slot = &mut graph;
        let load = &mut load_graph;
        store.stage(&format!("walk:{}", strategy.name()), &[], inputs, &params, &[rel.clone()], |root| {
            load(graph_slot)?;
            let g = graph_slot.as_ref().expect("loaded above");
            let corpus = walks::generate_corpus(g, &walk_cfg)?;
            let mut out = BufWriter::new(std::fs::File::create(root.join(&rel))?);
            walks::write_corpus(&corpus, g, &mut out)?;
            out.flush()?;
            Ok(())
        })?;
    }

    // One embedding per (strategy, order-awareness) variant.
    let mut fuse_deps = Vec::new();
    let mut fuse_inputs = BTreeMap::from([("entities".to_string(), entities_digest.clone())]);
    for &(strategy, order_aware) in &embedded {
        let source = VectorSource::Embedding { strategy, order_aware };
        let rel = embedding_path(source);
        let corpus_rel = corpus_path(strategy);
        let inputs = BTreeMap::from([(corpus_rel.clone(), store.digest(&corpus_rel)?)]);
        let train_cfg = cfg.effective_embed(order_aware);
        let stage = format!("embed:{source}");
        let outputs = [rel.clone(), sidecar(&rel)];
        store.stage(&stage, &[format!("walk:{}", strategy.name())], inputs, &train_cfg, &outputs, |root| {
            let file = std::fs::File::open(root.join(&corpus_rel))?;
            let corpus = walks::read_corpus(BufReader::new(file))?;
            let m = embed::train(&corpus, &train_cfg)?;
            embed::save_embeddings(&m, &root.join(&rel))?;
            Ok(())
        })?;
        fuse_inputs.insert(rel.clone(), store.digest(&rel)?);
        fuse_deps.push(stage);
    }
    if let (Some(path), true) = (&cfg.descriptions, cfg.fusion.parts.contains(&VectorSource::Description)) {
        fuse_inputs.insert("descriptions".to_string(), sha256_file(path)?);
    }
    let fusion = cfg.fusion.spec();
    if fusion.mode == represent::FusionMode::GlobalPca {
        fuse_inputs.insert("graph".to_string(), graph_digest.clone());
    }

    let fused_rel = fused_path(&cfg.fusion);
    let fuse_stage = format!("fuse:{}", cfg.fusion.stem());
    {
        let graph_slot = &mut graph;
        let load = &mut load_graph;
        let outputs = [fused_rel.clone(), sidecar(&fused_rel)];
        store.stage(&fuse_stage, &fuse_deps, fuse_inputs, &fusion, &outputs, |root| {
            let mut tables: Vec<(String, KeyedVectors<f32>)> = Vec::new();
            for &source in &fusion.parts {
                let kv = match source {
                    VectorSource::Embedding { .. } => embed::load_embeddings(&root.join(embedding_path(source)))?,
                    VectorSource::Description => {
                        let path = cfg.descriptions.as_ref().expect("validated");
                        let store = represent::load_description_file(path)?;
                        if store.duplicates > 0 {
                            log::warn!("{} repeated IRIs in {}", store.duplicates, path.display());
                        }
                        store.vectors
                    }
                };
                tables.push((source.to_string(), kv));
            }
            let parts: Vec<Part<'_>> = tables
                .iter()
                .map(|(name, vectors)| Part { name, vectors })
                .collect();
            let all: Vec<String>;
            let population = if fusion.mode == represent::FusionMode::GlobalPca {
                load(graph_slot)?;
                let g = graph_slot.as_ref().expect("loaded above");
                all = g.entity_ids().map(|e| g.entity_iri(e).to_string()).collect();
                PcaPopulation::AllGraphEntities(&all)
            } else {
                PcaPopulation::DatasetOnly
            };
            let out = build_fused_store(&entities, &fusion, &parts, population)?;
            if out.missing > 0 {
                log::warn!("{} (entity, part) vectors missing, zero-filled", out.missing);
            }
            represent::save_fused_store(&out, &root.join(&fused_rel))?;
            Ok(())
        })?;
    }

    // Classifier training.
    let name = &cfg.name;
    let ckpt_rel = format!("models/{name}.ckpt");
    let weights_rel = format!("runs/{name}.weights.json");
    let history_rel = format!("runs/{name}.history.json");
    let spec = cfg.effective_train();
    let mut train_inputs = BTreeMap::from([
        (fused_rel.clone(), store.digest(&fused_rel)?),
        ("dataset".to_string(), data_digest.clone()),
    ]);
    if let Some(h) = &hierarchy {
        train_inputs.insert("hierarchy".to_string(), h.digest());
    }
    let train_params = (cfg.regime, &spec, &cfg.weight_epochs);
    let train_stage = format!("train:{name}");
    store.stage(
        &train_stage,
        std::slice::from_ref(&fuse_stage),
        train_inputs,
        &train_params,
        &[ckpt_rel.clone(), weights_rel.clone(), history_rel.clone()],
        |root| {
            let features = represent::load_fused_store(&root.join(&fused_rel))?;
            let out = train_models(&data, hierarchy.as_ref(), &features, cfg.regime, &spec, &cfg.weight_epochs)?;
            let mut f = BufWriter::new(std::fs::File::create(root.join(&ckpt_rel))?);
            write_checkpoint(&out.checkpoint, &mut f)?;
            f.flush()?;
            write_sorted_json(&root.join(&weights_rel), &out.weights)?;
            write_sorted_json(&root.join(&history_rel), &out.history)?;
            Ok(())
        },
    )?;

    // Evaluation on the test split.
    let metrics_rel = metrics_path(name);
    let eval_inputs = BTreeMap::from([
        (ckpt_rel.clone(), store.digest(&ckpt_rel)?),
        (fused_rel.clone(), store.digest(&fused_rel)?),
        ("dataset".to_string(), data_digest.clone()),
    ]);
    store.stage(
        &format!("eval:{name}"),
        std::slice::from_ref(&train_stage),
        eval_inputs,
        &cfg.regime,
        &[metrics_rel.clone()],
        |root| {
            let features = represent::load_fused_store(&root.join(&fused_rel))?;
            let ck = read_checkpoint(BufReader::new(std::fs::File::open(root.join(&ckpt_rel))?))?;
            let report = evaluate_models(name, &ck, hierarchy.as_ref(), &data.test, &features.vectors, cfg.regime)?;
            write_sorted_json(&root.join(&metrics_rel), &report)?;
            Ok(())
        },
    )?;

    let manifest = RunManifest {
        name: name.clone(),
        tool_version: TOOL_VERSION.to_string(),
        config_hash: cfg.digest(),
        stages: store.into_reports(),
    };
    write_sorted_json(&root.join(format!("runs/{name}.manifest.json")), &manifest)?;

    Ok(RunOutcome {
        metrics: read_json(&root.join(&metrics_rel))?,
        weights: read_json(&root.join(&weights_rel))?,
        history: read_json(&root.join(&history_rel))?,
        manifest,
        output: root,
    })
}
