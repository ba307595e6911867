//! Digest-based stage memoization.
//!
//! Each stage is recorded with the digests of its inputs, a digest of its
//! parameters and the digests of the files it wrote. A stage is skipped when
//! all three still match and no stage it depends on ran in this invocation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::util::{sha256_bytes, sha256_file, to_sorted_json, write_sorted_json};

use super::PipelineError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub params: String,
    pub inputs: BTreeMap<String, String>,
    /// Output paths relative to the output directory.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub status: StageStatus,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub seconds: f64,
}

/// Provenance of one `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub tool_version: String,
    pub config_hash: String,
    pub stages: Vec<StageReport>,
}

impl RunManifest {
    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn ran(&self) -> Vec<&str> {
        self.stages
            .iter()
            .filter(|s| s.status == StageStatus::Ran)
            .map(|s| s.name.as_str())
            .collect()
    }
}

pub fn params_digest<T: Serialize>(params: &T) -> String {
    sha256_bytes(to_sorted_json(params).expect("parameters serialize").as_bytes())
}

/// Stage records persisted in `<output>/stages.json`.
pub struct StageStore {
    root: PathBuf,
    records: BTreeMap<String, StageRecord>,
    ran: BTreeSet<String>,
    reports: Vec<StageReport>,
}

impl StageStore {
    pub fn open(root: &Path) -> Result<Self, PipelineError> {
        let path = root.join("stages.json");
        let records = if path.is_file() {
            // An unreadable record file only costs a rerun.
            serde_json::from_str(&std::fs::read_to_string(&path)?).unwrap_or_else(|e| {
                log::warn!("ignoring {}: {e}", path.display());
                BTreeMap::new()
            })
        } else {
            BTreeMap::new()
        };
        Ok(StageStore {
            root: root.to_path_buf(),
            records,
            ran: BTreeSet::new(),
            reports: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Digest of an output file of an earlier stage.
    pub fn digest(&self, rel: &str) -> Result<String, PipelineError> {
        Ok(sha256_file(&self.path(rel))?)
    }

    fn up_to_date(&self, name: &str, params: &str, inputs: &BTreeMap<String, String>, deps: &[String]) -> bool {
        let Some(rec) = self.records.get(name) else {
            return false;
        };
        if rec.params != params || &rec.inputs != inputs || deps.iter().any(|d| self.ran.contains(d)) {
            return false;
        }
        rec.outputs
            .iter()
            .all(|(rel, digest)| sha256_file(&self.path(rel)).is_ok_and(|d| &d == digest))
    }

    /// Run `body` unless the stage is up to date. `outputs` are paths
    /// relative to the root that `body` must create.
    pub fn stage<P, F>(
        &mut self,
        name: &str,
        deps: &[String],
        inputs: BTreeMap<String, String>,
        params: &P,
        outputs: &[String],
        body: F,
    ) -> Result<StageStatus, PipelineError>
    where
        P: Serialize,
        F: FnOnce(&Path) -> Result<(), PipelineError>,
    {
        let params = params_digest(params);
        let start = Instant::now();
        if self.up_to_date(name, &params, &inputs, deps) {
            log::info!("{name}: up to date");
            let outputs = self.records[name].outputs.clone();
            self.reports.push(StageReport {
                name: name.to_string(),
                status: StageStatus::Skipped,
                inputs,
                outputs,
                seconds: start.elapsed().as_secs_f64(),
            });
            return Ok(StageStatus::Skipped);
        }
        log::info!("{name}: running");
        // Drop the record first so an interrupted stage is never trusted.
        self.records.remove(name);
        self.save()?;
        for rel in outputs {
            if let Some(parent) = self.path(rel).parent() {
                std::fs::create_dir_all(parent)?;
            }
        }
        body(&self.root).map_err(|e| match e {
            PipelineError::Stage { .. } => e,
            other => PipelineError::Stage {
                stage: name.to_string(),
                source: Box::new(other),
            },
        })?;
        let mut digests = BTreeMap::new();
        for rel in outputs {
            digests.insert(rel.clone(), self.digest(rel)?);
        }
        self.records.insert(
            name.to_string(),
            StageRecord {
                params,
                inputs: inputs.clone(),
                outputs: digests.clone(),
            },
        );
        self.save()?;
        self.ran.insert(name.to_string());
        self.reports.push(StageReport {
            name: name.to_string(),
            status: StageStatus::Ran,
            inputs,
            outputs: digests,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(StageStatus::Ran)
    }

    pub fn record(&self, name: &str) -> Option<&StageRecord> {
        self.records.get(name)
    }

    pub fn save(&self) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&self.root)?;
        write_sorted_json(&self.root.join("stages.json"), &self.records)?;
        Ok(())
    }

    pub fn into_reports(self) -> Vec<StageReport> {
        self.reports
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(root: &Path, rel: &str, text: &str) -> Result<(), PipelineError> {
        std::fs::write(root.join(rel), text)?;
        Ok(())
    }

    #[test]
    fn skip_rerun_and_propagation() {
        let dir = tempfile::tempdir().unwrap();
        let outs = |s: &str| vec![s.to_string()];
        let go = |store: &mut StageStore, p: u32| -> Vec<StageStatus> {
            let a = store
                .stage("a", &[], BTreeMap::new(), &p, &outs("a.txt"), |r| write(r, "a.txt", "A"))
                .unwrap();
            let inputs: BTreeMap<String, String> = [("a.txt".to_string(), store.digest("a.txt").unwrap())].into();
            let b = store
                .stage("b", &["a".to_string()], inputs, &0, &outs("b.txt"), |r| write(r, "b.txt", "B"))
                .unwrap();
            vec![a, b]
        };
        let mut s = StageStore::open(dir.path()).unwrap();
        assert_eq!(go(&mut s, 1), vec![StageStatus::Ran, StageStatus::Ran]);
        let mut s = StageStore::open(dir.path()).unwrap();
        assert_eq!(go(&mut s, 1), vec![StageStatus::Skipped, StageStatus::Skipped]);

        // Tampering with an output reruns that stage and everything after it.
        std::fs::write(dir.path().join("a.txt"), "tampered").unwrap();
        let mut s = StageStore::open(dir.path()).unwrap();
        assert_eq!(go(&mut s, 1), vec![StageStatus::Ran, StageStatus::Ran]);

        std::fs::remove_file(dir.path().join("b.txt")).unwrap();
        let mut s = StageStore::open(dir.path()).unwrap();
        assert_eq!(go(&mut s, 1), vec![StageStatus::Skipped, StageStatus::Ran]);

        let mut s = StageStore::open(dir.path()).unwrap();
        assert_eq!(go(&mut s, 2), vec![StageStatus::Ran, StageStatus::Ran]);
    }

    #[test]
    fn failures_carry_the_stage_name() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = StageStore::open(dir.path()).unwrap();
        let err = s
            .stage("boom", &[], BTreeMap::new(), &0, &[], |_| {
                Err(PipelineError::Config("bad".into()))
            })
            .unwrap_err();
        assert!(err.to_string().contains("boom"));
        assert!(s.record("boom").is_none());
    }
}
