use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::TrainSpec;
use crate::embed::TrainConfig;
use crate::represent::{FusionMode, FusionSpec, VectorSource};
use crate::walks::{Strategy, WalkConfig};

use super::PipelineError;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    MultiClass,
    MultiLabel,
    Hierarchical,
}

impl std::str::FromStr for Regime {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multi_class" | "multiclass" => Ok(Regime::MultiClass),
            "multi_label" | "multilabel" => Ok(Regime::MultiLabel),
            "hierarchical" | "lpl" => Ok(Regime::Hierarchical),
            other => Err(PipelineError::Config(format!("unknown regime {other:?}"))),
        }
    }
}

/// Explicit split membership: one IRI per line in each file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFiles {
    pub train: PathBuf,
    pub validation: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSection {
    pub depth: usize,
    pub walks_per_entity: usize,
    pub dedup: bool,
    /// Predicates dropped from the graph before walking. Listing rdf:type
    /// keeps type assertions out of the features; nothing is dropped by
    /// default.
    pub exclude_predicates: Vec<String>,
}

impl Default for WalkSection {
    fn default() -> Self {
        let w = WalkConfig::default();
        WalkSection {
            depth: w.depth,
            walks_per_entity: w.walks_per_entity,
            dedup: w.dedup,
            exclude_predicates: Vec::new(),
        }
    }
}

impl WalkSection {
    pub fn walk_config(&self, strategy: Strategy, seed: u64) -> WalkConfig {
        WalkConfig {
            depth: self.depth,
            walks_per_entity: self.walks_per_entity,
            strategy,
            seed,
            dedup: self.dedup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub parts: Vec<VectorSource>,
    pub mode: FusionMode,
    pub pca_dim: usize,
    pub l2_normalize: bool,
}

impl Default for FusionSection {
    fn default() -> Self {
        let parts = Strategy::ALL
            .into_iter()
            .map(|strategy| VectorSource::Embedding {
                strategy,
                order_aware: true,
            })
            .collect();
        let s = FusionSpec::concat(parts);
        FusionSection {
            parts: s.parts,
            mode: s.mode,
            pca_dim: s.pca_dim,
            l2_normalize: s.l2_normalize,
        }
    }
}

impl FusionSection {
    pub fn spec(&self) -> FusionSpec {
        FusionSpec {
            parts: self.parts.clone(),
            mode: self.mode,
            pca_dim: self.pca_dim,
            l2_normalize: self.l2_normalize,
        }
    }

    /// File stem shared by every run with the same fusion settings.
    pub fn stem(&self) -> String {
        let parts: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        let mode = match self.mode {
            FusionMode::Concat => "concat".to_string(),
            FusionMode::LocalPca => format!("lpca{}", self.pca_dim),
            FusionMode::GlobalPca => format!("gpca{}", self.pca_dim),
        };
        let l2 = if self.l2_normalize { ".l2" } else { "" };
        format!("{}.{mode}{l2}", parts.join("+"))
    }
}

/// One experiment: data files, hyperparameters for every stage and the output
/// directory. Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub graph: PathBuf,
    pub labels: PathBuf,
    #[serde(default)]
    pub hierarchy: Option<PathBuf>,
    #[serde(default)]
    pub descriptions: Option<PathBuf>,
    #[serde(default)]
    pub splits: Option<SplitFiles>,
    pub output: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub regime: Regime,
    /// Epochs after which first-layer weight shares are recorded.
    #[serde(default = "default_weight_epochs")]
    pub weight_epochs: Vec<usize>,
    /// Forces single-worker embedding training.
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub embed: TrainConfig,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default)]
    pub train: TrainSpec,
}

fn default_name() -> String {
    "run".to_string()
}

fn default_seed() -> u64 {
    42
}

fn default_weight_epochs() -> Vec<usize> {
    vec![1, 10]
}

impl ExperimentConfig {
    pub fn new(graph: impl Into<PathBuf>, labels: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            name: default_name(),
            graph: graph.into(),
            labels: labels.into(),
            hierarchy: None,
            descriptions: None,
            splits: None,
            output: output.into(),
            seed: default_seed(),
            regime: Regime::default(),
            weight_epochs: default_weight_epochs(),
            deterministic: false,
            walk: WalkSection::default(),
            embed: TrainConfig::default(),
            fusion: FusionSection::default(),
            train: TrainSpec::default(),
        }
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.graph);
        fix(&mut self.labels);
        fix(&mut self.output);
        if let Some(p) = &mut self.hierarchy {
            fix(p);
        }
        if let Some(p) = &mut self.descriptions {
            fix(p);
        }
        if let Some(s) = &mut self.splits {
            fix(&mut s.train);
            fix(&mut s.validation);
            fix(&mut s.test);
        }
    }

    /// Check that referenced files exist and the settings fit together.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut files = vec![&self.graph, &self.labels];
        files.extend(&self.hierarchy);
        files.extend(&self.descriptions);
        if let Some(s) = &self.splits {
            files.extend([&s.train, &s.validation, &s.test]);
        }
        for f in files {
            if !f.is_file() {
                return Err(PipelineError::Config(format!("missing file {}", f.display())));
            }
        }
        if self.regime == Regime::Hierarchical && self.hierarchy.is_none() {
            return Err(PipelineError::Config("hierarchical regime needs a hierarchy file".into()));
        }
        if self.fusion.parts.is_empty() {
            return Err(PipelineError::Config("fusion.parts is empty".into()));
        }
        if self.fusion.parts.contains(&VectorSource::Description) && self.descriptions.is_none() {
            return Err(PipelineError::Config(
                "fusion uses description vectors but no descriptions file is set".into(),
            ));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(PipelineError::Config(format!("invalid run name {:?}", self.name)));
        }
        Ok(())
    }

    /// Digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        let text = crate::util::to_sorted_json(self).expect("config serializes");
        crate::util::sha256_bytes(text.as_bytes())
    }

    /// Embedding settings after applying the global seed and determinism flag.
    pub fn effective_embed(&self, order_aware: bool) -> TrainConfig {
        TrainConfig {
            order_aware,
            seed: self.seed,
            threads: if self.deterministic { 1 } else { self.embed.threads.max(1) },
            ..self.embed.clone()
        }
    }

    pub fn effective_train(&self) -> TrainSpec {
        TrainSpec {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}
