//! Dimensionality reduction of trajectory embeddings, with out-of-sample
//! transform so inferred trajectories can be placed in an already-fitted
//! low-dimensional space.

mod pca;
mod umap;

pub use pca::{pca_fit_transform, PcaReducer};
pub use umap::{umap_fit, FuzzyEdge, UmapParams, UmapReducer};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major f64 point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    pub rows: usize,
    pub dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Points {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Data("points have mixed widths".into()));
        }
        Ok(Points {
            rows: rows.len(),
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_f32_rows(rows: &[Vec<f32>]) -> Result<Self> {
        Self::from_rows(
            &rows
                .iter()
                .map(|r| r.iter().map(|x| f64::from(*x)).collect())
                .collect::<Vec<_>>(),
        )
    }

    pub fn from_data(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Corrupt(format!(
                "point payload holds {} values, expected {}x{}",
                data.len(),
                rows,
                dim
            )));
        }
        Ok(Points { rows, dim, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }
}

/// Which reduction backs a fitted reducer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReducerKind {
    Pca,
    Umap,
}

/// A fitted reducer. Transform is only available after fitting, which the
/// constructors guarantee by owning the fitted state.
#[derive(Debug, Clone, PartialEq)]
pub enum Reducer {
    Pca(PcaReducer),
    Umap(UmapReducer),
}

impl Reducer {
    pub fn kind(&self) -> ReducerKind {
        match self {
            Reducer::Pca(_) => ReducerKind::Pca,
            Reducer::Umap(_) => ReducerKind::Umap,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Reducer::Pca(p) => p.components.len(),
            Reducer::Umap(u) => u.out_dim(),
        }
    }

    pub fn transform(&self, points: &Points) -> Result<Points> {
        match self {
            Reducer::Pca(p) => p.transform(points),
            Reducer::Umap(u) => u.transform(points),
        }
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact k-nearest neighbors by Euclidean distance, excluding self-matches by
/// index. Returns per-row `(neighbor index, distance)` sorted ascending, ties
/// broken by index so the result is unambiguous.
pub(crate) fn knn(points: &Points, k: usize) -> Vec<Vec<(usize, f64)>> {
    use rayon::prelude::*;
    (0..points.rows)
        .into_par_iter()
        .map(|i| {
            let mut dists: Vec<(usize, f64)> = (0..points.rows)
                .filter(|j| *j != i)
                .map(|j| (j, squared_distance(points.row(i), points.row(j))))
                .collect();
            dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            dists.truncate(k);
            dists.iter().map(|(j, d2)| (*j, d2.sqrt())).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knn_orders_by_distance() {
        let pts = Points::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![3.0, 0.0],
            vec![0.0, 0.5],
        ])
        .unwrap();
        let result = knn(&pts, 2);
        assert_eq!(result[0][0].0, 3);
        assert_eq!(result[0][1].0, 1);
        assert!((result[0][0].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn points_reject_ragged_rows() {
        assert!(Points::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
