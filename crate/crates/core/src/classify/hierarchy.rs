use std::collections::HashMap;
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};

use super::ClassifyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub u32);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Single-parent class taxonomy. Roots sit at level 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeHierarchy {
    labels: Vec<String>,
    index: HashMap<String, ClassId>,
    parent: Vec<Option<ClassId>>,
    level: Vec<usize>,
}

impl TypeHierarchy {
    /// Build from `(class, parent)` pairs. Parents that never appear as a
    /// class of their own become roots.
    pub fn from_edges<'a, I>(edges: I) -> Result<Self, ClassifyError>
    where
        I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
    {
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, ClassId> = HashMap::new();
        let mut parent: Vec<Option<ClassId>> = Vec::new();
        let mut declared: Vec<bool> = Vec::new();
        let mut intern = |name: &str, labels: &mut Vec<String>, parent: &mut Vec<Option<ClassId>>, declared: &mut Vec<bool>| {
            *index.entry(name.to_string()).or_insert_with(|| {
                labels.push(name.to_string());
                parent.push(None);
                declared.push(false);
                ClassId(labels.len() as u32 - 1)
            })
        };
        for (class, par) in edges {
            let c = intern(class, &mut labels, &mut parent, &mut declared);
            let p = par.map(|p| intern(p, &mut labels, &mut parent, &mut declared));
            if declared[c.index()] && parent[c.index()] != p {
                return Err(ClassifyError::MultipleParents(class.to_string()));
            }
            declared[c.index()] = true;
            parent[c.index()] = p;
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), ClassId(i as u32)))
            .collect();

        let n = labels.len();
        let mut level = vec![0usize; n];
        for start in 0..n {
            let mut chain = Vec::new();
            let mut cur = start;
            while level[cur] == 0 {
                if chain.contains(&cur) {
                    return Err(ClassifyError::CyclicHierarchy(labels[start].clone()));
                }
                chain.push(cur);
                match parent[cur] {
                    Some(p) => cur = p.index(),
                    None => break,
                }
            }
            let mut base = if level[cur] == 0 { 0 } else { level[cur] };
            if level[cur] != 0 {
                chain.retain(|&c| c != cur);
            }
            for &c in chain.iter().rev() {
                base += 1;
                level[c] = base;
            }
        }
        Ok(TypeHierarchy {
            labels,
            index,
            parent,
            level,
        })
    }

    /// `class<TAB>parent` lines; a line with only a class declares a root.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, ClassifyError> {
        let mut rows: Vec<(String, Option<String>)> = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t').map(str::trim).filter(|f| !f.is_empty());
            let class = fields.next().expect("non-empty line").to_string();
            let parent = fields.next().map(str::to_string);
            rows.push((class, parent));
        }
        Self::from_edges(rows.iter().map(|(c, p)| (c.as_str(), p.as_deref())))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<ClassId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, c: ClassId) -> &str {
        &self.labels[c.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn parent(&self, c: ClassId) -> Option<ClassId> {
        self.parent[c.index()]
    }

    pub fn level(&self, c: ClassId) -> usize {
        self.level[c.index()]
    }

    pub fn depth(&self) -> usize {
        self.level.iter().copied().max().unwrap_or(0)
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> {
        (0..self.labels.len() as u32).map(ClassId)
    }

    /// Classes at `level`, in id order.
    pub fn classes_at_level(&self, level: usize) -> Vec<ClassId> {
        self.classes().filter(|&c| self.level(c) == level).collect()
    }

    pub fn children(&self, c: ClassId) -> Vec<ClassId> {
        self.classes().filter(|&k| self.parent(k) == Some(c)).collect()
    }

    /// The ancestor of `c` at `level` (`c` itself at its own level), or
    /// `None` when `c` is shallower than `level`.
    pub fn ancestor_at(&self, c: ClassId, level: usize) -> Option<ClassId> {
        let mut cur = c;
        if self.level(cur) < level {
            return None;
        }
        while self.level(cur) > level {
            cur = self.parent(cur)?;
        }
        Some(cur)
    }

    /// Root-first chain ending at `c`.
    pub fn path_to(&self, c: ClassId) -> Vec<ClassId> {
        let mut path = vec![c];
        let mut cur = c;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Whether `path` starts at a root and each element is the parent of the next.
    pub fn is_root_path(&self, path: &[ClassId]) -> bool {
        match path.first() {
            None => true,
            Some(&first) => {
                self.parent(first).is_none()
                    && path.windows(2).all(|w| self.parent(w[1]) == Some(w[0]))
            }
        }
    }

    /// Canonical text used for the checkpoint hash.
    pub fn canonical_text(&self) -> String {
        let mut lines: Vec<String> = self
            .classes()
            .map(|c| match self.parent(c) {
                Some(p) => format!("{}\t{}", self.label(c), self.label(p)),
                None => self.label(c).to_string(),
            })
            .collect();
        lines.sort();
        lines.join("\n")
    }

    pub fn digest(&self) -> String {
        crate::util::sha256_bytes(self.canonical_text().as_bytes())
    }

    pub fn write_tsv<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        for c in self.classes() {
            match self.parent(c) {
                Some(p) => writeln!(out, "{}\t{}", self.label(c), self.label(p))?,
                None => writeln!(out, "{}", self.label(c))?,
            }
        }
        Ok(())
    }
}

/// Level-by-level consistency repair for single-label predictions.
///
/// `per_level[l]` is the class predicted at level `l + 1`. The level-1
/// prediction is accepted; each later prediction is kept only while it is a
/// child of the previously accepted class. The first inconsistent level ends
/// the path.
pub fn repair_path(h: &TypeHierarchy, per_level: &[ClassId]) -> Vec<ClassId> {
    let mut path: Vec<ClassId> = Vec::with_capacity(per_level.len());
    for &c in per_level {
        let consistent = match path.last() {
            None => h.parent(c).is_none(),
            Some(&prev) => h.parent(c) == Some(prev),
        };
        if !consistent {
            break;
        }
        path.push(c);
    }
    path
}

/// Multi-label counterpart of [`repair_path`]: at each level only classes
/// whose parent was accepted one level up survive; an empty level stops the
/// descent.
pub fn repair_sets(h: &TypeHierarchy, per_level: &[Vec<ClassId>]) -> Vec<Vec<ClassId>> {
    let mut accepted: Vec<Vec<ClassId>> = Vec::new();
    for classes in per_level {
        let keep: Vec<ClassId> = classes
            .iter()
            .copied()
            .filter(|&c| match accepted.last() {
                None => h.parent(c).is_none(),
                Some(prev) => h.parent(c).is_some_and(|p| prev.contains(&p)),
            })
            .collect();
        if keep.is_empty() {
            break;
        }
        accepted.push(keep);
    }
    accepted
}
