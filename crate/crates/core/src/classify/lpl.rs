//! Local classifier per level.

use crate::vectors::KeyedVectors;

use super::hierarchy::{repair_path, repair_sets, ClassId, TypeHierarchy};
use super::mlp::{decide, Head, Mlp};
use super::{train_classifier, ClassifyError, EpochRecord, Example, TrainSpec};

/// Flat classifier for one hierarchy level. `classes[i]` is the class behind
/// output `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelModel {
    pub level: usize,
    pub classes: Vec<ClassId>,
    pub model: Mlp,
}

#[derive(Debug, Clone)]
pub struct LplModel {
    pub levels: Vec<LevelModel>,
    pub histories: Vec<Vec<EpochRecord>>,
    pub best_epochs: Vec<usize>,
}

/// Re-label `examples` with their ancestors at `level`, dropping examples
/// that have no label that deep.
pub fn project_level(
    h: &TypeHierarchy,
    examples: &[Example],
    level: usize,
) -> Result<Vec<Example>, ClassifyError> {
    let mut out = Vec::new();
    for ex in examples {
        let mut labels: Vec<String> = Vec::new();
        for l in &ex.labels {
            let c = h.id(l).ok_or_else(|| ClassifyError::UnknownClass {
                iri: ex.entity.clone(),
                class: l.clone(),
            })?;
            if let Some(a) = h.ancestor_at(c, level) {
                let name = h.label(a).to_string();
                if !labels.contains(&name) {
                    labels.push(name);
                }
            }
        }
        if !labels.is_empty() {
            out.push(Example {
                entity: ex.entity.clone(),
                labels,
            });
        }
    }
    Ok(out)
}

/// Train one independent flat classifier per level `1..=depth`.
///
/// `observe` receives `(level, epoch, model)` after every epoch.
pub fn train_lpl(
    train: &[Example],
    validation: &[Example],
    features: &KeyedVectors<f64>,
    h: &TypeHierarchy,
    head: Head,
    spec: &TrainSpec,
    observe: &mut dyn FnMut(usize, usize, &Mlp),
) -> Result<LplModel, ClassifyError> {
    let mut levels = Vec::new();
    let mut histories = Vec::new();
    let mut best_epochs = Vec::new();
    for level in 1..=h.depth() {
        let classes = h.classes_at_level(level);
        let names: Vec<String> = classes.iter().map(|&c| h.label(c).to_string()).collect();
        let tr = project_level(h, train, level)?;
        let va = project_level(h, validation, level)?;
        if tr.is_empty() {
            return Err(ClassifyError::InconsistentHierarchy(format!(
                "no training examples reach level {level}"
            )));
        }
        let level_spec = TrainSpec {
            seed: spec.seed.wrapping_add(level as u64),
            ..spec.clone()
        };
        let trained = train_classifier(&tr, &va, features, &names, head, &level_spec, &mut |e, m| {
            observe(level, e, m)
        })?;
        levels.push(LevelModel {
            level,
            classes,
            model: trained.model,
        });
        histories.push(trained.history);
        best_epochs.push(trained.best_epoch);
    }
    Ok(LplModel {
        levels,
        histories,
        best_epochs,
    })
}

/// Predict level by level and cut the path at the first class whose parent
/// is not the class accepted one level up.
pub fn predict_hierarchical(
    levels: &[LevelModel],
    h: &TypeHierarchy,
    x: &[f64],
) -> Result<Vec<ClassId>, ClassifyError> {
    let mut per_level = Vec::with_capacity(levels.len());
    for lm in levels {
        let logits = lm.model.forward(x)?;
        let i = super::argmax(&logits);
        per_level.push(lm.classes[i]);
    }
    Ok(repair_path(h, &per_level))
}

/// Multi-label variant: every class over threshold at a level survives when
/// its parent was accepted at the level above.
pub fn predict_hierarchical_sets(
    levels: &[LevelModel],
    h: &TypeHierarchy,
    x: &[f64],
) -> Result<Vec<Vec<ClassId>>, ClassifyError> {
    let mut per_level = Vec::with_capacity(levels.len());
    for lm in levels {
        let logits = lm.model.forward(x)?;
        let picked = decide(lm.model.head, &logits)
            .classes()
            .into_iter()
            .map(|i| lm.classes[i])
            .collect();
        per_level.push(picked);
    }
    Ok(repair_sets(h, &per_level))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hierarchy() -> TypeHierarchy {
        TypeHierarchy::read_tsv("1\n2\n1.1\t1\n1.2\t1\n2.1\t2\n".as_bytes()).unwrap()
    }

    #[test]
    fn ancestor_projection() {
        let h = hierarchy();
        let ex = vec![Example::new("a", &["1.1"]), Example::new("b", &["2"])];
        let l1 = project_level(&h, &ex, 1).unwrap();
        assert_eq!(l1, vec![Example::new("a", &["1"]), Example::new("b", &["2"])]);
        let l2 = project_level(&h, &ex, 2).unwrap();
        assert_eq!(l2, vec![Example::new("a", &["1.1"])]);
        let bad = vec![Example::new("c", &["9"])];
        assert!(matches!(project_level(&h, &bad, 1), Err(ClassifyError::UnknownClass { .. })));
    }

    fn fixed_level(h: &TypeHierarchy, level: usize, pick: &str) -> LevelModel {
        // Zero weights; the bias alone selects `pick`.
        let classes = h.classes_at_level(level);
        let mut model = Mlp::zeros(1, &[2], classes.len(), Head::Softmax);
        let i = classes.iter().position(|&c| h.label(c) == pick).unwrap();
        model.layers[1].bias[i] = 1.0;
        LevelModel { level, classes, model }
    }

    #[test]
    fn repair_through_models() {
        let h = hierarchy();
        let id = |l| h.id(l).unwrap();
        let m = [fixed_level(&h, 1, "1"), fixed_level(&h, 2, "2.1")];
        assert_eq!(predict_hierarchical(&m, &h, &[0.0]).unwrap(), vec![id("1")]);
        let m = [fixed_level(&h, 1, "1"), fixed_level(&h, 2, "1.2")];
        assert_eq!(predict_hierarchical(&m, &h, &[0.0]).unwrap(), vec![id("1"), id("1.2")]);
        let m = [fixed_level(&h, 1, "2"), fixed_level(&h, 2, "1.1")];
        assert_eq!(predict_hierarchical(&m, &h, &[0.0]).unwrap(), vec![id("2")]);
    }

    #[test]
    fn per_level_models() {
        let h = hierarchy();
        let mut kv = KeyedVectors::new(2);
        let mut ex = Vec::new();
        let labels = ["1.1", "1.2", "2.1", "2"];
        for i in 0..40 {
            let l = labels[i % 4];
            let v = match l {
                "1.1" => [1.0, 1.0],
                "1.2" => [1.0, -1.0],
                "2.1" => [-1.0, 1.0],
                _ => [-1.0, -1.0],
            };
            let name = format!("e{i}");
            kv.insert(&name, &v).unwrap();
            ex.push(Example::new(name, &[l]));
        }
        let spec = TrainSpec {
            hidden: vec![8, 8],
            epochs: 60,
            adam: super::super::AdamConfig { lr: 0.01, ..Default::default() },
            ..TrainSpec::default()
        };
        let mut calls = 0;
        let m = train_lpl(&ex, &[], &kv, &h, Head::Softmax, &spec, &mut |_, _, _| calls += 1).unwrap();
        assert_eq!(calls, 120);
        assert_eq!(m.levels.len(), 2);
        assert_eq!(m.levels[0].classes.len(), 2);
        assert_eq!(m.levels[1].classes.len(), 3);
        let path = predict_hierarchical(&m.levels, &h, &[1.0, -1.0]).unwrap();
        assert_eq!(path, vec![h.id("1").unwrap(), h.id("1.2").unwrap()]);
    }
}
