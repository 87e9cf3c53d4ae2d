//! Principal component analysis over a dense symmetric eigendecomposition
//! (cyclic Jacobi). Adequate and fully deterministic at the few-hundred
//! dimension scale this pipeline works at.

use serde::{Deserialize, Serialize};

use super::Points;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReducer {
    pub mean: Vec<f64>,
    /// Orthonormal rows, ordered by decreasing explained variance.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaReducer {
    pub fn transform(&self, points: &Points) -> Result<Points> {
        let d = self.mean.len();
        if points.dim != d {
            return Err(Error::Data(format!(
                "cannot project width-{} points with a width-{d} reducer",
                points.dim
            )));
        }
        let out_dim = self.components.len();
        let mut out = Points::zeros(points.rows, out_dim);
        let mut centered = vec![0.0; d];
        for i in 0..points.rows {
            for (c, (x, m)) in centered.iter_mut().zip(points.row(i).iter().zip(&self.mean)) {
                *c = x - m;
            }
            let row = out.row_mut(i);
            for (j, comp) in self.components.iter().enumerate() {
                row[j] = comp.iter().zip(&centered).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }
}

/// Centers the data, projects onto the top `out_dim` principal directions.
pub fn pca_fit_transform(points: &Points, out_dim: usize) -> Result<(PcaReducer, Points)> {
    if out_dim == 0 {
        return Err(Error::Config("pca output width must be >= 1".into()));
    }
    if points.rows < out_dim {
        return Err(Error::Data(format!(
            "pca needs at least {out_dim} points, got {}",
            points.rows
        )));
    }
    if points.dim < out_dim {
        return Err(Error::Data(format!(
            "cannot extract {out_dim} components from width-{} data",
            points.dim
        )));
    }
    let n = points.rows;
    let d = points.dim;

    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(points.row(i)) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    // Covariance; denominator n-1 when possible.
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for (c, (x, m)) in centered.iter_mut().zip(points.row(i).iter().zip(&mean)) {
            *c = x - m;
        }
        for a in 0..d {
            let ca = centered[a];
            for b in a..d {
                cov[a * d + b] += ca * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / denom;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }

    let (eigenvalues, eigenvectors) = jacobi_eigen(&mut cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());

    let mut components = Vec::with_capacity(out_dim);
    let mut explained = Vec::with_capacity(out_dim);
    for &idx in order.iter().take(out_dim) {
        let mut comp: Vec<f64> = (0..d).map(|r| eigenvectors[r * d + idx]).collect();
        // Stable sign: the largest-magnitude entry is positive.
        let lead = comp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if comp[lead] < 0.0 {
            for x in comp.iter_mut() {
                *x = -*x;
            }
        }
        components.push(comp);
        explained.push(eigenvalues[idx].max(0.0));
    }

    let reducer = PcaReducer {
        mean,
        components,
        explained_variance: explained,
    };
    let projected = reducer.transform(points)?;
    Ok((reducer, projected))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix stored row-major in
/// `a`. Returns eigenvalues and the column-eigenvector matrix.
fn jacobi_eigen(a: &mut [f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p * d + q] * a[p * d + q];
            }
        }
        if off.sqrt() <= 1e-13 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let eigenvalues: Vec<f64> = (0..d).map(|i| a[i * d + i]).collect();
    (eigenvalues, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planar_data_reconstructs_exactly() {
        // Points on a 2D plane embedded in 16 dimensions.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 0.5 } else { -0.25 }).collect();
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let a: f64 = rng.gen_range(-2.0..2.0);
                let b: f64 = rng.gen_range(-2.0..2.0);
                (0..16).map(|i| a * u[i] + b * w[i]).collect()
            })
            .collect();
        let points = Points::from_rows(&rows).unwrap();
        let (reducer, projected) = pca_fit_transform(&points, 2).unwrap();

        // Reconstruct from the 2D projection and compare.
        for i in 0..points.rows {
            let proj = projected.row(i);
            for j in 0..16 {
                let rebuilt = reducer.mean[j]
                    + proj[0] * reducer.components[0][j]
                    + proj[1] * reducer.components[1][j];
                assert!((rebuilt - rows[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn components_are_orthonormal_and_variance_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let points = Points::from_rows(&rows).unwrap();
        let (reducer, projected) = pca_fit_transform(&points, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = reducer.components[i]
                    .iter()
                    .zip(&reducer.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8, "gram[{i}][{j}] = {dot}");
            }
        }
        // Per-axis projected variance is non-increasing.
        let mut vars = vec![0.0; 4];
        for i in 0..points.rows {
            for (v, x) in vars.iter_mut().zip(projected.row(i)) {
                *v += x * x;
            }
        }
        for w in vars.windows(2) {
            assert!(w[0] >= w[1] - 1e-9);
        }
    }

    #[test]
    fn duplicate_points_share_images() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0]];
        let points = Points::from_rows(&rows).unwrap();
        let (_, projected) = pca_fit_transform(&points, 2).unwrap();
        assert_eq!(projected.row(0), projected.row(1));
    }

    #[test]
    fn too_few_points_is_an_error() {
        let points = Points::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(pca_fit_transform(&points, 2).is_err());
    }
}
