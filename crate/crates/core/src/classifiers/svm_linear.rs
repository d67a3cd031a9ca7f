//! Linear SVM trained by dual coordinate descent on the hinge loss.
//!
//! The bias is handled liblinear-style, as an appended constant feature,
//! so the internal weight vector has `n_features + 1` coordinates. Each
//! epoch visits the active coordinates in a seeded random permutation and
//! stops when the largest projected-gradient violation drops below `tol`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ClassifierSpec, LinearParams, ModelParams, TrainingMeta};
use crate::vectorizer::SparseVector;

/// Trains one binary machine; `labels` are +1/-1. Returns the weight
/// vector, the bias, epochs used, and the final violation.
pub fn train_binary(
    x: &[SparseVector],
    labels: &[f64],
    n_features: usize,
    spec: &ClassifierSpec,
    seed: u64,
) -> (Vec<f64>, f64, usize, f64) {
    let n = x.len();
    let c = spec.c;
    // Augmented weight vector: the last coordinate is the bias feature.
    let mut w = vec![0.0; n_features + 1];
    let mut alpha = vec![0.0; n];
    let q_diag: Vec<f64> = x.iter().map(|v| v.norm_sq() + 1.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active: Vec<usize> = (0..n).collect();
    // Shrinking threshold from the previous epoch's largest violation.
    let mut last_max_pg = f64::INFINITY;
    let mut epochs = 0;
    let mut final_pg = f64::INFINITY;
    while epochs < spec.max_iter {
        active.shuffle(&mut rng);
        let mut max_pg: f64 = 0.0;
        let mut keep: Vec<usize> = Vec::with_capacity(active.len());
        for &i in &active {
            let margin = x[i].dot_dense(&w) + w[n_features];
            let g = labels[i] * margin - 1.0;
            let pg = if alpha[i] <= 0.0 {
                if spec.shrinking && g > last_max_pg {
                    continue; // strongly satisfied at the lower bound
                }
                g.min(0.0)
            } else if alpha[i] >= c {
                if spec.shrinking && g < -last_max_pg {
                    continue;
                }
                g.max(0.0)
            } else {
                g
            };
            keep.push(i);
            max_pg = max_pg.max(pg.abs());
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * labels[i];
                if delta != 0.0 {
                    for &(col, v) in x[i].entries() {
                        w[col] += delta * v;
                    }
                    w[n_features] += delta;
                }
            }
        }
        epochs += 1;
        final_pg = max_pg;
        if max_pg < spec.tol {
            if spec.shrinking && keep.len() < n {
                // Converged on the shrunken set: restore everything and
                // confirm on the full problem.
                active = (0..n).collect();
                last_max_pg = f64::INFINITY;
                continue;
            }
            break;
        }
        if spec.shrinking {
            active = keep;
            last_max_pg = max_pg;
            if active.is_empty() {
                active = (0..n).collect();
                last_max_pg = f64::INFINITY;
            }
        }
    }
    let bias = w[n_features];
    w.truncate(n_features);
    (w, bias, epochs, final_pg)
}

fn primal_objective(x: &[SparseVector], labels: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    let reg: f64 = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let hinge: f64 = x
        .iter()
        .zip(labels)
        .map(|(xi, &yi)| (1.0 - yi * (xi.dot_dense(w) + b)).max(0.0))
        .sum();
    reg + c * hinge
}

/// One-vs-rest training over all classes. Every binary subproblem uses
/// the same seed, so a global label flip mirrors the solve exactly and
/// two-class one-vs-rest agrees with a single binary machine.
pub fn train_ovr(
    x: &[SparseVector],
    y: &[usize],
    n_features: usize,
    n_classes: usize,
    spec: &ClassifierSpec,
    seed: u64,
) -> (ModelParams, TrainingMeta) {
    let results: Vec<(Vec<f64>, f64, usize, f64)> = (0..n_classes)
        .into_par_iter()
        .map(|class| {
            let labels: Vec<f64> = y
                .iter()
                .map(|&c| if c == class { 1.0 } else { -1.0 })
                .collect();
            train_binary(x, &labels, n_features, spec, seed)
        })
        .collect();
    let mut weights = Vec::with_capacity(n_classes);
    let mut biases = Vec::with_capacity(n_classes);
    let mut iterations = 0;
    let mut objective = 0.0;
    for (class, (w, b, iters, _)) in results.into_iter().enumerate() {
        let labels: Vec<f64> = y
            .iter()
            .map(|&c| if c == class { 1.0 } else { -1.0 })
            .collect();
        objective += primal_objective(x, &labels, &w, b, spec.c);
        iterations = iterations.max(iters);
        weights.push(w);
        biases.push(b);
    }
    (
        ModelParams::Linear(LinearParams { weights, biases }),
        TrainingMeta {
            iterations,
            final_objective: objective,
            ..TrainingMeta::default()
        },
    )
}
