use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::RepresentError;

/// Principal components fitted by exact eigendecomposition of the
/// population covariance (divisor `n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `pca_dim` orthonormal rows of length `input_dim`.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    /// `components · (v − mean)`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, RepresentError> {
        if v.len() != self.input_dim() {
            return Err(RepresentError::DimMismatch {
                expected: self.input_dim(),
                found: v.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(v).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    /// `mean + componentsᵀ · z`; exact inverse of [`apply`](Self::apply)
    /// when all components are kept.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>, RepresentError> {
        if z.len() != self.output_dim() {
            return Err(RepresentError::DimMismatch {
                expected: self.output_dim(),
                found: z.len(),
            });
        }
        let mut out = self.mean.clone();
        for (c, &zk) in self.components.iter().zip(z) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += zk * ci;
            }
        }
        Ok(out)
    }
}

fn distinct_count_at_least_two(vectors: &[Vec<f64>]) -> bool {
    let first = &vectors[0];
    vectors.iter().any(|v| v != first)
}

pub fn fit_pca(vectors: &[Vec<f64>], pca_dim: usize) -> Result<PcaModel, RepresentError> {
    if vectors.len() < 2 || !distinct_count_at_least_two(vectors) {
        return Err(RepresentError::DegenerateInput);
    }
    let dim = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(RepresentError::DimMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    if pca_dim == 0 || pca_dim > dim {
        return Err(RepresentError::InvalidPcaDim { pca_dim, input_dim: dim });
    }
    let n = vectors.len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, dim, |i, j| vectors[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / n as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(pca_dim);
    let mut explained_variance = Vec::with_capacity(pca_dim);
    for &k in order.iter().take(pca_dim) {
        let mut row: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        // Sign convention: the largest-magnitude coordinate is positive.
        let pivot = row
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > row[best].abs() { i } else { best });
        if row[pivot] < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(row);
        explained_variance.push(eig.eigenvalues[k].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}
