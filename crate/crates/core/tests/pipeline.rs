use grand_core::pipeline::synthetic::{generate, write_synthetic, SyntheticSpec};
use grand_core::pipeline::{self, ExperimentConfig, Regime, StageStatus};

fn small(dir: &std::path::Path, regime: Regime) -> ExperimentConfig {
    let spec = SyntheticSpec { entities_per_subtype: 12, ..SyntheticSpec::default() };
    let files = write_synthetic(&generate(&spec), &dir.join("data")).unwrap();
    let mut cfg = ExperimentConfig::new(&files.graph, &files.labels_fine, dir.join("out"));
    cfg.name = "small".into();
    cfg.regime = regime;
    if regime == Regime::Hierarchical {
        cfg.hierarchy = Some(files.hierarchy);
    }
    cfg.deterministic = true;
    cfg.walk.depth = 3;
    cfg.walk.walks_per_entity = 10;
    cfg.embed.dim = 8;
    cfg.embed.epochs = 1;
    cfg.train.epochs = 3;
    cfg.train.hidden = vec![8];
    cfg
}

#[test]
fn second_run_skips_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), Regime::MultiClass);
    let first = pipeline::run(&cfg).unwrap();
    assert!(first.manifest.stages.iter().all(|s| s.status == StageStatus::Ran));
    let second = pipeline::run(&cfg).unwrap();
    assert!(second.manifest.ran().is_empty(), "{:?}", second.manifest.ran());
    assert_eq!(first.metrics, second.metrics);
}

#[test]
fn changed_training_settings_rerun_only_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), Regime::MultiClass);
    pipeline::run(&cfg).unwrap();
    cfg.train.epochs = 4;
    let again = pipeline::run(&cfg).unwrap();
    assert_eq!(again.manifest.ran(), vec!["train:small", "eval:small"]);
}

#[test]
fn tampered_corpus_reruns_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), Regime::MultiClass);
    let first = pipeline::run(&cfg).unwrap();
    let corpus = first.artifact("corpus/entity.txt");
    std::fs::write(&corpus, "garbage\n").unwrap();
    let again = pipeline::run(&cfg).unwrap();
    let ran = again.manifest.ran();
    assert!(ran.contains(&"walk:entity"));
    assert!(ran.contains(&"embed:entity_oa"));
    assert!(ran.contains(&"train:small"));
    assert!(!ran.contains(&"embed:classic_oa"));
}

#[test]
fn hierarchical_run_reports_each_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = pipeline::run(&small(dir.path(), Regime::Hierarchical)).unwrap();
    assert!(out.metrics.level(1).is_some() && out.metrics.level(2).is_some());
    let levels: Vec<_> = out.weights.iter().map(|w| w.level).collect();
    assert!(levels.contains(&Some(1)) && levels.contains(&Some(2)));
}

#[test]
fn config_survives_a_toml_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), Regime::MultiClass);
    let text = cfg.to_toml().unwrap();
    let back = ExperimentConfig::from_toml(&text, dir.path()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.digest(), cfg.digest());
}

#[test]
fn missing_inputs_fail_before_any_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), Regime::MultiClass);
    cfg.labels = dir.path().join("nope.tsv");
    assert!(pipeline::run(&cfg).is_err());
    assert!(!dir.path().join("out").exists());
}
