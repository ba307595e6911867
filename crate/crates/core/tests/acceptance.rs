//! Acceptance checks, one test per criterion. Each test prints a single
//! `PASS`/`FAIL` line. The synthetic experiment behind 8 to 10 runs once
//! and is shared.

mod common;

use std::sync::OnceLock;

use common::{Check, SyntheticRuns};
use grand_core::pipeline::synthetic::SyntheticFiles;

fn verdict(n: usize, name: &str, result: Check) {
    match result {
        Ok(detail) => println!("criterion {n:>2} PASS {name}: {detail}"),
        Err(detail) => {
            println!("criterion {n:>2} FAIL {name}: {detail}");
            panic!("criterion {n} ({name}) failed: {detail}");
        }
    }
}

struct Experiment {
    dir: tempfile::TempDir,
    files: SyntheticFiles,
    runs: Result<SyntheticRuns, String>,
}

fn experiment() -> &'static Experiment {
    static CELL: OnceLock<Experiment> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let files = common::synthetic_data(&dir.path().join("data"));
        let runs = common::synthetic_runs(&files, &dir.path().join("run"));
        Experiment { dir, files, runs }
    })
}

fn with_runs(f: impl FnOnce(&Experiment, &SyntheticRuns) -> Check) -> Check {
    let e = experiment();
    match &e.runs {
        Ok(runs) => f(e, runs),
        Err(msg) => Err(format!("synthetic experiment failed: {msg}")),
    }
}

#[test]
fn acceptance_01_walk_correctness() {
    verdict(1, "walk correctness", common::walk_correctness());
}

#[test]
fn acceptance_02_embedding_gradients() {
    verdict(2, "embedding gradient check", common::embedding_gradient_check());
}

#[test]
fn acceptance_03_order_awareness() {
    verdict(3, "order awareness", common::order_awareness());
}

#[test]
fn acceptance_04_classifier_gradients() {
    verdict(4, "classifier gradient check", common::classifier_gradient_check());
}

#[test]
fn acceptance_05_metric_oracle() {
    verdict(5, "metric oracle", common::metric_oracle());
}

#[test]
fn acceptance_06_pca() {
    verdict(6, "pca", common::pca_checks());
}

#[test]
fn acceptance_07_hierarchical_repair() {
    verdict(7, "hierarchical repair", common::hierarchical_repair());
}

#[test]
fn acceptance_08_synthetic_end_to_end() {
    verdict(8, "synthetic end-to-end", with_runs(|_, r| common::synthetic_end_to_end(r)));
}

#[test]
fn acceptance_09_weight_analysis() {
    verdict(9, "weight analysis", with_runs(|_, r| common::weight_analysis(r)));
}

#[test]
fn acceptance_10_determinism() {
    verdict(
        10,
        "determinism",
        with_runs(|e, r| common::determinism(&e.files, &r.fine, &e.dir.path().join("repeat"))),
    );
}
