//! UMAP: fuzzy topological representation of the kNN graph, optimized into a
//! low-dimensional layout by negative-sampling SGD, plus an out-of-sample
//! transform against the frozen layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{knn, squared_distance, Points};
use crate::error::{Error, Result};
use crate::util::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UmapParams {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub epochs: usize,
    pub out_dim: usize,
    pub negative_sample_rate: usize,
    pub repulsion_strength: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for UmapParams {
    fn default() -> Self {
        UmapParams {
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            epochs: 200,
            out_dim: 2,
            negative_sample_rate: 5,
            repulsion_strength: 1.0,
            learning_rate: 1.0,
            seed: 42,
        }
    }
}

/// Weighted edge of the symmetrized fuzzy graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyEdge {
    pub from: u32,
    pub to: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UmapReducer {
    pub params: UmapParams,
    /// Curve parameters of the low-dimensional membership 1/(1 + a d^(2b)).
    pub a: f64,
    pub b: f64,
    pub training: Points,
    pub layout: Points,
    pub sigmas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub edges: Vec<FuzzyEdge>,
}

/// Fits the curve 1/(1 + a x^(2b)) to the offset-exponential target used for
/// the low-dimensional membership, via damped Gauss-Newton.
pub(crate) fn find_ab_params(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (1..=300).map(|i| i as f64 * (3.0 * spread) / 300.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();

    let mut a = 1.5f64;
    let mut b = 0.9f64;
    for _ in 0..200 {
        let mut jtj = [0.0f64; 4];
        let mut jtr = [0.0f64; 2];
        for (&x, &y) in xs.iter().zip(&ys) {
            let xp = x.powf(2.0 * b);
            let denom = 1.0 + a * xp;
            let f = 1.0 / denom;
            let r = f - y;
            let dfda = -xp / (denom * denom);
            let dfdb = -2.0 * a * xp * x.ln() / (denom * denom);
            jtj[0] += dfda * dfda;
            jtj[1] += dfda * dfdb;
            jtj[2] += dfda * dfdb;
            jtj[3] += dfdb * dfdb;
            jtr[0] += dfda * r;
            jtr[1] += dfdb * r;
        }
        // Levenberg damping keeps the 2x2 solve stable.
        let lambda = 1e-6 * (jtj[0] + jtj[3]);
        let det = (jtj[0] + lambda) * (jtj[3] + lambda) - jtj[1] * jtj[2];
        if det.abs() < 1e-30 {
            break;
        }
        let da = -((jtj[3] + lambda) * jtr[0] - jtj[1] * jtr[1]) / det;
        let db = -(-jtj[2] * jtr[0] + (jtj[0] + lambda) * jtr[1]) / det;
        a += da;
        b += db;
        if da.abs() < 1e-12 && db.abs() < 1e-12 {
            break;
        }
    }
    (a, b)
}

const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const MIN_K_DIST_SCALE: f64 = 1e-3;

/// Per-point bandwidth calibration: finds rho (distance to the nearest
/// neighbor) and sigma such that the membership weights sum to log2(k).
pub(crate) fn smooth_knn_dist(dists: &[f64], k: f64) -> (f64, f64) {
    let rho = dists.first().copied().unwrap_or(0.0);
    let target = k.log2();
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut mid = 1.0f64;
    for _ in 0..64 {
        let psum: f64 = dists
            .iter()
            .map(|&d| {
                let gap = d - rho;
                if gap > 0.0 {
                    (-gap / mid).exp()
                } else {
                    1.0
                }
            })
            .sum();
        if (psum - target).abs() < SMOOTH_K_TOLERANCE {
            break;
        }
        if psum > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    let mean_dist = if dists.is_empty() {
        0.0
    } else {
        dists.iter().sum::<f64>() / dists.len() as f64
    };
    let sigma = mid.max(MIN_K_DIST_SCALE * mean_dist).max(1e-12);
    (rho, sigma)
}

fn membership(dist: f64, rho: f64, sigma: f64) -> f64 {
    let gap = dist - rho;
    if gap <= 0.0 {
        1.0
    } else {
        (-gap / sigma).exp()
    }
}

/// Builds the symmetrized fuzzy graph: directed memberships combined with the
/// probabilistic t-conorm `a + b - a*b`.
fn fuzzy_graph(
    neighbors: &[Vec<(usize, f64)>],
    sigmas: &[f64],
    rhos: &[f64],
) -> Vec<FuzzyEdge> {
    use std::collections::BTreeMap;
    let mut directed: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (i, nbrs) in neighbors.iter().enumerate() {
        for &(j, d) in nbrs {
            let w = membership(d, rhos[i], sigmas[i]);
            directed.insert((i as u32, j as u32), w);
        }
    }
    let mut edges: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (&(i, j), &w_ij) in &directed {
        let key = if i < j { (i, j) } else { (j, i) };
        if edges.contains_key(&key) {
            continue;
        }
        let w_ji = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let w = w_ij + w_ji - w_ij * w_ji;
        if w > 0.0 {
            edges.insert(key, w);
        }
    }
    edges
        .into_iter()
        .map(|((from, to), weight)| FuzzyEdge { from, to, weight })
        .collect()
}

fn clip(x: f64) -> f64 {
    x.clamp(-4.0, 4.0)
}

/// Negative-sampling SGD over the fuzzy edges. Updates run serially in edge
/// order, so a fixed seed gives a fixed layout.
#[allow(clippy::too_many_arguments)]
fn optimize_layout(
    layout: &mut Points,
    edges: &[FuzzyEdge],
    a: f64,
    b: f64,
    params: &UmapParams,
    rng: &mut ChaCha8Rng,
    move_other: bool,
    frozen: Option<&Points>,
) {
    let epochs = params.epochs.max(1);
    let max_weight = edges
        .iter()
        .map(|e| e.weight)
        .fold(f64::MIN, f64::max)
        .max(1e-12);
    let eps: Vec<f64> = edges.iter().map(|e| max_weight / e.weight).collect();
    let mut next_sample: Vec<f64> = eps.clone();
    let eps_neg: Vec<f64> = eps
        .iter()
        .map(|e| e * params.negative_sample_rate as f64)
        .collect();
    let mut next_neg: Vec<f64> = eps_neg.clone();
    let dim = layout.dim;
    // Repulsion pool: the frozen reference layout when transforming, else the
    // layout being optimized.
    let pool_rows = frozen.map_or(layout.rows, |f| f.rows);

    for epoch in 0..epochs {
        let alpha = params.learning_rate * (1.0 - epoch as f64 / epochs as f64);
        let n = (epoch + 1) as f64;
        for (e_idx, edge) in edges.iter().enumerate() {
            if next_sample[e_idx] > n {
                continue;
            }
            next_sample[e_idx] += eps[e_idx];
            let (i, j) = (edge.from as usize, edge.to as usize);

            // Attraction along the edge.
            {
                let other = frozen.map_or_else(|| layout.row(j).to_vec(), |f| f.row(j).to_vec());
                let yi = layout.row_mut(i);
                let d2 = squared_distance(yi, &other);
                if d2 > 0.0 {
                    let coeff = (-2.0 * a * b * d2.powf(b - 1.0)) / (1.0 + a * d2.powf(b));
                    for k in 0..dim {
                        let g = clip(coeff * (yi[k] - other[k]));
                        yi[k] += alpha * g;
                    }
                }
            }
            if move_other {
                let yi = layout.row(i).to_vec();
                let yj = layout.row_mut(j);
                let d2 = squared_distance(&yi, yj);
                if d2 > 0.0 {
                    let coeff = (-2.0 * a * b * d2.powf(b - 1.0)) / (1.0 + a * d2.powf(b));
                    for k in 0..dim {
                        let g = clip(coeff * (yj[k] - yi[k]));
                        yj[k] += alpha * g;
                    }
                }
            }

            // Repulsion from random points.
            let n_neg = ((n - next_neg[e_idx] + eps_neg[e_idx]) / eps_neg[e_idx]).floor() as usize;
            let n_neg = n_neg.min(2 * params.negative_sample_rate + 1);
            for _ in 0..n_neg {
                let target = rng.gen_range(0..pool_rows);
                if frozen.is_none() && target == i {
                    continue;
                }
                let other =
                    frozen.map_or_else(|| layout.row(target).to_vec(), |f| f.row(target).to_vec());
                let yi = layout.row_mut(i);
                let d2 = squared_distance(yi, &other);
                let coeff = if d2 > 0.0 {
                    (2.0 * params.repulsion_strength * b) / ((0.001 + d2) * (1.0 + a * d2.powf(b)))
                } else {
                    0.0
                };
                for k in 0..dim {
                    let g = if coeff > 0.0 {
                        clip(coeff * (yi[k] - other[k]))
                    } else {
                        4.0
                    };
                    yi[k] += alpha * g;
                }
            }
            next_neg[e_idx] += n_neg as f64 * eps_neg[e_idx];
        }
    }
}

fn pca_init(points: &Points, out_dim: usize, rng: &mut ChaCha8Rng) -> Points {
    let mut layout = match super::pca_fit_transform(points, out_dim.min(points.dim)) {
        Ok((_, projected)) => projected,
        // Degenerate data (constant rows and the like): start at the origin.
        Err(_) => Points::zeros(points.rows, out_dim),
    };
    if layout.dim < out_dim {
        let mut padded = Points::zeros(layout.rows, out_dim);
        for i in 0..layout.rows {
            padded.row_mut(i)[..layout.dim].copy_from_slice(layout.row(i));
        }
        layout = padded;
    }
    let scale = layout
        .data()
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-12);
    for i in 0..layout.rows {
        for x in layout.row_mut(i) {
            *x = *x / scale * 10.0 + rng.gen_range(-1e-4..1e-4);
        }
    }
    layout
}

/// Fits a UMAP layout. Requires `n_neighbors < points.rows`.
pub fn umap_fit(points: &Points, params: &UmapParams) -> Result<(UmapReducer, Points)> {
    if params.n_neighbors < 2 {
        return Err(Error::Config("n_neighbors must be >= 2".into()));
    }
    if params.out_dim == 0 {
        return Err(Error::Config("umap output width must be >= 1".into()));
    }
    if params.n_neighbors >= points.rows {
        return Err(Error::Data(format!(
            "n_neighbors {} must be below the point count {}",
            params.n_neighbors, points.rows
        )));
    }

    let neighbors = knn(points, params.n_neighbors);
    let mut sigmas = vec![0.0; points.rows];
    let mut rhos = vec![0.0; points.rows];
    for i in 0..points.rows {
        let dists: Vec<f64> = neighbors[i].iter().map(|(_, d)| *d).collect();
        let (rho, sigma) = smooth_knn_dist(&dists, params.n_neighbors as f64);
        rhos[i] = rho;
        sigmas[i] = sigma;
    }
    let edges = fuzzy_graph(&neighbors, &sigmas, &rhos);
    let (a, b) = find_ab_params(params.spread, params.min_dist);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, "umap-fit", 0));
    // Principal-component initialization scaled to the usual layout extent.
    // A random start leaves the global arrangement of well-separated groups
    // to chance; starting from the linear projection anchors it, and the SGD
    // then shapes the local structure. Tiny jitter separates duplicates.
    let mut layout = pca_init(points, params.out_dim, &mut rng);
    optimize_layout(&mut layout, &edges, a, b, params, &mut rng, true, None);

    let reducer = UmapReducer {
        params: *params,
        a,
        b,
        training: points.clone(),
        layout: layout.clone(),
        sigmas,
        rhos,
        edges,
    };
    Ok((reducer, layout))
}

impl UmapReducer {
    pub fn out_dim(&self) -> usize {
        self.params.out_dim
    }

    /// Largest pairwise distance in the fitted layout.
    pub fn layout_diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.layout.rows {
            for j in (i + 1)..self.layout.rows {
                best = best.max(squared_distance(self.layout.row(i), self.layout.row(j)));
            }
        }
        best.sqrt()
    }

    /// Places new points into the fitted layout: each point starts at the
    /// membership-weighted average of its nearest training points' images and
    /// is refined by a short SGD against the frozen layout.
    pub fn transform(&self, new_points: &Points) -> Result<Points> {
        if new_points.dim != self.training.dim {
            return Err(Error::Data(format!(
                "cannot transform width-{} points with a width-{} reducer",
                new_points.dim, self.training.dim
            )));
        }
        let k = self.params.n_neighbors;
        let rows: Vec<Vec<f64>> = (0..new_points.rows)
            .into_par_iter()
            .map(|p| self.transform_one(new_points.row(p), k, p as u64))
            .collect();
        Points::from_rows(&rows)
    }

    fn transform_one(&self, point: &[f64], k: usize, index: u64) -> Vec<f64> {
        let mut dists: Vec<(usize, f64)> = (0..self.training.rows)
            .map(|j| (j, squared_distance(point, self.training.row(j))))
            .collect();
        dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        dists.truncate(k);
        let neighbor_dists: Vec<f64> = dists.iter().map(|(_, d2)| d2.sqrt()).collect();
        let (rho, sigma) = smooth_knn_dist(&neighbor_dists, k as f64);

        let weights: Vec<f64> = neighbor_dists
            .iter()
            .map(|&d| membership(d, rho, sigma))
            .collect();
        let total: f64 = weights.iter().sum::<f64>().max(1e-12);

        let mut layout = Points::zeros(1, self.params.out_dim);
        for ((j, _), w) in dists.iter().zip(&weights) {
            let img = self.layout.row(*j);
            for (y, x) in layout.row_mut(0).iter_mut().zip(img) {
                *y += w / total * x;
            }
        }

        let edges: Vec<FuzzyEdge> = dists
            .iter()
            .zip(&weights)
            .map(|((j, _), w)| FuzzyEdge {
                from: 0,
                to: *j as u32,
                weight: *w,
            })
            .collect();
        let mut params = self.params;
        params.epochs = (self.params.epochs / 3).max(30);
        params.learning_rate = self.params.learning_rate / 4.0;
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.params.seed, "umap-transform", index));
        optimize_layout(
            &mut layout,
            &edges,
            self.a,
            self.b,
            &params,
            &mut rng,
            false,
            Some(&self.layout),
        );
        layout.row(0).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_points(seed: u64, centers: &[Vec<f64>], per_blob: usize, std: f64) -> (Points, Vec<usize>) {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std).unwrap();
        let dim = centers[0].len();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, c) in centers.iter().enumerate() {
            for _ in 0..per_blob {
                let row: Vec<f64> = (0..dim).map(|i| c[i] + normal.sample(&mut rng)).collect();
                rows.push(row);
                labels.push(label);
            }
        }
        (Points::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn ab_params_match_reference_values() {
        // Known fit for spread 1.0, min_dist 0.1.
        let (a, b) = find_ab_params(1.0, 0.1);
        assert!((a - 1.577).abs() < 0.05, "a = {a}");
        assert!((b - 0.8951).abs() < 0.02, "b = {b}");
    }

    #[test]
    fn smooth_knn_handles_duplicates() {
        let (rho, sigma) = smooth_knn_dist(&[0.0, 0.0, 0.0], 3.0);
        assert_eq!(rho, 0.0);
        assert!(sigma.is_finite() && sigma > 0.0);
    }

    #[test]
    fn fit_is_deterministic_and_finite() {
        let centers = vec![vec![0.0; 8], vec![6.0; 8]];
        let (points, _) = blob_points(9, &centers, 20, 0.3);
        let params = UmapParams {
            n_neighbors: 5,
            epochs: 50,
            ..UmapParams::default()
        };
        let (_, l1) = umap_fit(&points, &params).unwrap();
        let (_, l2) = umap_fit(&points, &params).unwrap();
        assert_eq!(l1, l2);
        assert!(l1.data().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn single_blob_stays_finite() {
        let (points, _) = blob_points(10, &[vec![0.0; 6]], 30, 0.5);
        let params = UmapParams {
            n_neighbors: 5,
            epochs: 40,
            ..UmapParams::default()
        };
        let (_, layout) = umap_fit(&points, &params).unwrap();
        assert!(layout.data().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn separated_blobs_keep_label_purity() {
        let centers = vec![vec![0.0; 16], vec![8.0; 16], {
            let mut c = vec![0.0; 16];
            for (i, x) in c.iter_mut().enumerate() {
                if i % 2 == 0 {
                    *x = -8.0;
                }
            }
            c
        }];
        let (points, labels) = blob_points(11, &centers, 30, 0.5);
        let params = UmapParams {
            n_neighbors: 10,
            epochs: 100,
            ..UmapParams::default()
        };
        let (_, layout) = umap_fit(&points, &params).unwrap();
        let neighbors = knn(&layout, 5);
        let mut pure = 0usize;
        let mut total = 0usize;
        for (i, nbrs) in neighbors.iter().enumerate() {
            for (j, _) in nbrs {
                total += 1;
                if labels[*j] == labels[i] {
                    pure += 1;
                }
            }
        }
        let purity = pure as f64 / total as f64;
        assert!(purity >= 0.9, "purity {purity} too low");
    }

    #[test]
    fn transform_of_training_point_lands_near_its_image() {
        let centers = vec![vec![0.0; 8], vec![6.0; 8]];
        let (points, _) = blob_points(12, &centers, 25, 0.4);
        let params = UmapParams {
            n_neighbors: 6,
            epochs: 80,
            ..UmapParams::default()
        };
        let (reducer, layout) = umap_fit(&points, &params).unwrap();
        let diameter = reducer.layout_diameter();
        let sample = Points::from_rows(&[points.row(3).to_vec(), points.row(30).to_vec()]).unwrap();
        let placed = reducer.transform(&sample).unwrap();
        for (row, original) in [(0usize, 3usize), (1, 30)] {
            let d = squared_distance(placed.row(row), layout.row(original)).sqrt();
            assert!(
                d <= 0.1 * diameter,
                "self-transform drifted {d} with diameter {diameter}"
            );
        }
        // Determinism of the transform path.
        let placed2 = reducer.transform(&sample).unwrap();
        assert_eq!(placed, placed2);
    }

    #[test]
    fn transform_between_close_training_points_stays_local() {
        let centers = vec![vec![0.0; 8], vec![10.0; 8]];
        let (points, _) = blob_points(13, &centers, 25, 0.4);
        let params = UmapParams {
            n_neighbors: 6,
            epochs: 80,
            ..UmapParams::default()
        };
        let (reducer, layout) = umap_fit(&points, &params).unwrap();
        // Midpoint of two nearby same-blob points.
        let mid: Vec<f64> = points
            .row(0)
            .iter()
            .zip(points.row(1))
            .map(|(x, y)| (x + y) / 2.0)
            .collect();
        let placed = reducer.transform(&Points::from_rows(&[mid]).unwrap()).unwrap();
        let d0 = squared_distance(placed.row(0), layout.row(0)).sqrt();
        let d1 = squared_distance(placed.row(0), layout.row(1)).sqrt();
        let diameter = reducer.layout_diameter();
        assert!(d0.min(d1) <= 0.15 * diameter, "midpoint strayed from its neighborhood");
    }

    #[test]
    fn too_many_neighbors_is_an_error() {
        let (points, _) = blob_points(14, &[vec![0.0; 4]], 5, 0.3);
        let params = UmapParams {
            n_neighbors: 5,
            ..UmapParams::default()
        };
        assert!(umap_fit(&points, &params).is_err());
    }
}
