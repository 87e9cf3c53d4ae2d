//! The negative-sampling binary logistic objective, in a form small enough to
//! verify against finite differences.
//!
//! For a context vector `v` and output vectors `u_i` with labels `y_i` (1 for
//! the observed token, 0 for noise tokens):
//!
//!   L = -sum_i [ y_i * ln(sigma(v.u_i)) + (1 - y_i) * ln(1 - sigma(v.u_i)) ]
//!
//! The trainers apply the same gradients in f32; tests tie the two paths
//! together on random instances.

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss value for one context vector against a set of labeled output vectors.
pub fn ns_loss(v: &[f64], outputs: &[Vec<f64>], labels: &[f64]) -> f64 {
    assert_eq!(outputs.len(), labels.len());
    let mut loss = 0.0;
    for (u, &y) in outputs.iter().zip(labels) {
        let p = sigmoid(dot(v, u));
        // Clamp away from 0 so the loss stays finite on saturated instances.
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    loss
}

/// Analytic gradients of [`ns_loss`] with respect to the context vector and
/// every output vector.
pub fn ns_loss_grad(
    v: &[f64],
    outputs: &[Vec<f64>],
    labels: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(outputs.len(), labels.len());
    let mut grad_v = vec![0.0; v.len()];
    let mut grad_outputs = Vec::with_capacity(outputs.len());
    for (u, &y) in outputs.iter().zip(labels) {
        let p = sigmoid(dot(v, u));
        let coeff = p - y; // dL/d(v.u)
        for (gv, ui) in grad_v.iter_mut().zip(u) {
            *gv += coeff * ui;
        }
        grad_outputs.push(v.iter().map(|vi| coeff * vi).collect());
    }
    (grad_v, grad_outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn finite_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
        let mut grad = vec![0.0; x.len()];
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            grad[i] = (up - down) / (2.0 * h);
        }
        grad
    }

    fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt()
            + b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let dim = rng.gen_range(2..=8);
            let n = rng.gen_range(1..=6);
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let outputs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let labels: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();

            let (grad_v, grad_u) = ns_loss_grad(&v, &outputs, &labels);
            let fd_v = finite_difference(|x| ns_loss(x, &outputs, &labels), &v, 1e-6);
            assert!(relative_gap(&grad_v, &fd_v) < 1e-6);

            for (j, gu) in grad_u.iter().enumerate() {
                let fd_u = finite_difference(
                    |x| {
                        let mut o = outputs.clone();
                        o[j] = x.to_vec();
                        ns_loss(&v, &o, &labels)
                    },
                    &outputs[j],
                    1e-6,
                );
                assert!(relative_gap(gu, &fd_u) < 1e-6);
            }
        }
    }
}
