use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use grand_core::classify::{read_checkpoint, write_checkpoint, TrainSpec};
use grand_core::embed::{self, Architecture, TrainConfig};
use grand_core::pipeline::{
    self, config::RDF_TYPE, synthetic, ExperimentConfig, PipelineError, Regime, SplitFiles,
};
use grand_core::represent::{self, FusionMode, FusionSpec, Part, PcaPopulation, VectorSource};
use grand_core::util::write_sorted_json;
use grand_core::walks::{self, Strategy, WalkConfig};

#[derive(Parser)]
#[command(name = "grand", version, about = "Entity typing with random-walk graph embeddings")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, env = "GRAND_SEED")]
    seed: Option<u64>,
    /// Worker threads for walk generation and embedding training.
    #[arg(long, global = true, env = "GRAND_THREADS")]
    threads: Option<usize>,
    /// Single-worker training so reruns are byte-identical.
    #[arg(long, global = true, env = "GRAND_DETERMINISTIC")]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a walk corpus from an N-Triples graph.
    Walk(WalkArgs),
    /// Train skip-gram or CBOW vectors on a corpus.
    Embed(EmbedArgs),
    /// Concatenate (and optionally PCA-reduce) vector tables per entity.
    Fuse(FuseArgs),
    /// Train a classifier on fused features.
    Train(TrainArgs),
    /// Score a trained classifier.
    Eval(EvalArgs),
    /// Run a whole experiment from a TOML config.
    Run(RunArgs),
    /// Write the synthetic typed graph, labels and an experiment config.
    GenSynthetic(SynthArgs),
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "classic")]
    strategy: Strategy,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long, default_value_t = 500)]
    walks: usize,
    #[arg(long)]
    no_dedup: bool,
    /// Predicate to drop before walking; repeatable. Use `--exclude-type`
    /// for rdf:type.
    #[arg(long = "exclude-predicates", value_name = "IRI")]
    exclude: Vec<String>,
    /// Drop rdf:type statements so type labels cannot leak into the walks.
    #[arg(long)]
    exclude_type: bool,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    order_aware: bool,
    #[arg(long, default_value = "sg")]
    arch: Architecture,
}

#[derive(Args)]
struct FuseArgs {
    /// Labels TSV whose entities get features.
    #[arg(long)]
    labels: PathBuf,
    /// `source=path`, e.g. `classic_oa=embed/classic_oa.vec` or `description=desc.tsv`.
    #[arg(long = "part", required = true)]
    parts: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "concat")]
    mode: FusionMode,
    #[arg(long, default_value_t = 200)]
    pca_dim: usize,
    #[arg(long)]
    l2_normalize: bool,
    /// Graph whose entities form the global PCA population.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    #[arg(long, default_value = "multi_class")]
    regime: Regime,
    /// Directory with `train.txt`, `validation.txt` and `test.txt`;
    /// otherwise a seeded 50/30/20 split.
    #[arg(long)]
    splits: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, value_delimiter = ',', default_value = "512,256")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    early_stop: Option<usize>,
    /// Write first-layer weight shares at these epochs to this JSON file.
    #[arg(long)]
    weights_out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,10")]
    weight_epochs: Vec<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    /// Metrics JSON destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the run name from the config.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 150)]
    per_subtype: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRAND_LOG", "info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or(42)
}

fn embed_threads(cli: &Cli) -> usize {
    if cli.deterministic {
        1
    } else {
        cli.threads.unwrap_or(1).max(1)
    }
}

fn dispatch(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Walk(a) => walk(cli, a),
        Command::Embed(a) => embed_cmd(cli, a),
        Command::Fuse(a) => fuse(a),
        Command::Train(a) => train(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Run(a) => run(cli, a),
        Command::GenSynthetic(a) => gen_synthetic(cli, a),
    }
}

fn walk(cli: &Cli, a: &WalkArgs) -> Result<(), PipelineError> {
    let mut exclude = a.exclude.clone();
    if a.exclude_type {
        exclude.push(RDF_TYPE.to_string());
    }
    let g = pipeline::read_graph(&a.graph, &exclude)?;
    let cfg = WalkConfig {
        depth: a.depth,
        walks_per_entity: a.walks,
        strategy: a.strategy,
        seed: seed(cli),
        dedup: !a.no_dedup,
    };
    let corpus = walks::generate_corpus(&g, &cfg)?;
    let mut out = BufWriter::new(std::fs::File::create(&a.out)?);
    walks::write_corpus(&corpus, &g, &mut out)?;
    out.flush()?;
    log::info!("{} walks written to {}", corpus.walks.len(), a.out.display());
    Ok(())
}

fn embed_cmd(cli: &Cli, a: &EmbedArgs) -> Result<(), PipelineError> {
    let corpus = walks::read_corpus(BufReader::new(std::fs::File::open(&a.corpus)?))?;
    let cfg = TrainConfig {
        dim: a.dim,
        epochs: a.epochs,
        window: a.window,
        negatives: a.negatives,
        lr_initial: a.lr,
        order_aware: a.order_aware,
        architecture: a.arch,
        seed: seed(cli),
        min_count: a.min_count,
        subsample: a.subsample,
        threads: embed_threads(cli),
        ..TrainConfig::default()
    };
    let (m, report) = embed::train_with_report(&corpus, &cfg)?;
    embed::save_embeddings(&m, &a.out)?;
    log::info!(
        "{} vectors of dim {}; epoch losses {:?}",
        m.vocab.len(),
        m.dim(),
        report.epoch_losses
    );
    Ok(())
}

fn fuse(a: &FuseArgs) -> Result<(), PipelineError> {
    let mut entities: Vec<String> = pipeline::read_labels_file(&a.labels)?
        .into_iter()
        .map(|e| e.entity)
        .collect();
    entities.sort();
    let mut sources = Vec::new();
    let mut tables = Vec::new();
    for spec in &a.parts {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| PipelineError::Config(format!("--part expects source=path, got {spec:?}")))?;
        let source: VectorSource = name.parse()?;
        let kv = match source {
            VectorSource::Description => represent::load_description_file(Path::new(path))?.vectors,
            VectorSource::Embedding { .. } => embed::load_embeddings(Path::new(path))?,
        };
        sources.push(source);
        tables.push((source.to_string(), kv));
    }
    let spec = FusionSpec {
        parts: sources,
        mode: a.mode,
        pca_dim: a.pca_dim,
        l2_normalize: a.l2_normalize,
    };
    let parts: Vec<Part<'_>> = tables.iter().map(|(name, vectors)| Part { name, vectors }).collect();
    let all: Vec<String>;
    let population = match (a.mode, &a.graph) {
        (FusionMode::GlobalPca, Some(path)) => {
            let g = pipeline::read_graph(path, &[])?;
            all = g.entity_ids().map(|e| g.entity_iri(e).to_string()).collect();
            PcaPopulation::AllGraphEntities(&all)
        }
        (FusionMode::GlobalPca, None) => {
            return Err(PipelineError::Config("gpca needs --graph".into()));
        }
        _ => PcaPopulation::DatasetOnly,
    };
    let out = represent::build_fused_store(&entities, &spec, &parts, population)?;
    represent::save_fused_store(&out, &a.out)?;
    log::info!(
        "{} entities, dim {}, {} missing part vectors",
        out.store.vectors.len(),
        out.store.vectors.dim(),
        out.missing
    );
    Ok(())
}

fn load_data(
    cli: &Cli,
    d: &DataArgs,
) -> Result<(grand_core::classify::LabeledDataset, Option<grand_core::classify::TypeHierarchy>), PipelineError> {
    let splits = d.splits.as_ref().map(|dir| SplitFiles {
        train: dir.join("train.txt"),
        validation: dir.join("validation.txt"),
        test: dir.join("test.txt"),
    });
    Ok(pipeline::load_dataset(
        &d.labels,
        d.hierarchy.as_deref(),
        splits.as_ref(),
        d.regime,
        seed(cli),
    )?)
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<(), PipelineError> {
    let (data, hierarchy) = load_data(cli, &a.data)?;
    let features = represent::load_fused_store(&a.data.features)?;
    let spec = TrainSpec {
        batch_size: a.batch_size,
        epochs: a.epochs,
        adam: grand_core::classify::AdamConfig {
            lr: a.lr,
            ..Default::default()
        },
        seed: seed(cli),
        early_stop: a.early_stop,
        hidden: a.hidden.clone(),
        ..TrainSpec::default()
    };
    let out = pipeline::train_models(&data, hierarchy.as_ref(), &features, a.data.regime, &spec, &a.weight_epochs)?;
    let mut f = BufWriter::new(std::fs::File::create(&a.out)?);
    write_checkpoint(&out.checkpoint, &mut f)?;
    f.flush()?;
    for h in &out.history {
        log::info!("level {:?}: kept epoch {}", h.level, h.best_epoch);
    }
    if let Some(path) = &a.weights_out {
        write_sorted_json(path, &out.weights)?;
    }
    Ok(())
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<(), PipelineError> {
    let (data, hierarchy) = load_data(cli, &a.data)?;
    let features = represent::load_fused_store(&a.data.features)?;
    let ck = read_checkpoint(BufReader::new(std::fs::File::open(&a.model)?))?;
    let name = a.model.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
    let report = pipeline::evaluate_models(&name, &ck, hierarchy.as_ref(), &data.test, &features.vectors, a.data.regime)?;
    match &a.out {
        Some(path) => write_sorted_json(path, &report)?,
        None => print!("{}", grand_core::util::to_sorted_json(&report)?),
    }
    Ok(())
}

fn run(cli: &Cli, a: &RunArgs) -> Result<(), PipelineError> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(name) = &a.name {
        cfg.name = name.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.embed.threads = t;
    }
    cfg.deterministic |= cli.deterministic;
    let out = pipeline::run(&cfg)?;
    for s in &out.manifest.stages {
        log::info!("{:<40} {:?} {:.2}s", s.name, s.status, s.seconds);
    }
    println!(
        "{}: accuracy {:.4}, micro-F1 {:.4}, macro-F1 {:.4} ({})",
        cfg.name,
        out.metrics.overall.accuracy,
        out.metrics.overall.micro_f1,
        out.metrics.overall.macro_f1,
        out.artifact(&pipeline::metrics_path(&cfg.name)).display()
    );
    Ok(())
}

fn gen_synthetic(cli: &Cli, a: &SynthArgs) -> Result<(), PipelineError> {
    let spec = synthetic::SyntheticSpec {
        entities_per_subtype: a.per_subtype,
        seed: cli.seed.unwrap_or(synthetic::SyntheticSpec::default().seed),
        ..Default::default()
    };
    let kg = synthetic::generate(&spec);
    let files = synthetic::write_synthetic(&kg, &a.out)?;
    let mut cfg = ExperimentConfig::new("graph.nt", "labels_fine.tsv", "out");
    cfg.name = "fine".into();
    cfg.hierarchy = Some("hierarchy.tsv".into());
    cfg.embed.dim = 64;
    cfg.walk.exclude_predicates = vec![RDF_TYPE.to_string()];
    // Few distinct walks per entity; five passes under-train the vectors.
    cfg.embed.epochs = 20;
    std::fs::write(a.out.join("experiment.toml"), cfg.to_toml()?)?;
    log::info!(
        "{} triples, {} typed entities in {}",
        kg.triples.len(),
        kg.entities.len(),
        files.graph.parent().unwrap_or(Path::new(".")).display()
    );
    Ok(())
}
