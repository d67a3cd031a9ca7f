//! L2-regularized logistic regression trained by L-BFGS.
//!
//! Objective per binary one-vs-rest problem, with theta = [w, b] and the
//! intercept unregularized:
//!
//!   f(theta) = 0.5 * ||w||^2 + C * sum_i ln(1 + exp(-y_i (w.x_i + b)))
//!
//! The quasi-Newton direction comes from the standard two-loop recursion
//! with a memory of 10 pairs and Armijo backtracking line search.

use rayon::prelude::*;

use super::{ClassifierSpec, LinearParams, ModelParams, TrainingMeta};
use crate::vectorizer::SparseVector;

const LBFGS_MEMORY: usize = 10;

/// ln(1 + exp(z)) without overflow.
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularized negative log-likelihood and its gradient at `theta`.
///
/// `theta` has `n_features + 1` coordinates, the last being the
/// intercept; `labels` are +1/-1. Set `l2` to false to drop the penalty.
pub fn logreg_objective_and_grad(
    x: &[SparseVector],
    labels: &[f64],
    c: f64,
    l2: bool,
    theta: &[f64],
) -> (f64, Vec<f64>) {
    let dim = theta.len() - 1;
    let (w, b) = (&theta[..dim], theta[dim]);
    let mut obj = 0.0;
    let mut grad = vec![0.0; theta.len()];
    if l2 {
        obj += 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        grad[..dim].copy_from_slice(w);
    }
    for (xi, &yi) in x.iter().zip(labels) {
        let margin = xi.dot_dense(w) + b;
        obj += c * log1p_exp(-yi * margin);
        // d/dm of ln(1+exp(-y m)) = -y * sigma(-y m)
        let coef = c * -yi * super::sigmoid(-yi * margin);
        for &(col, v) in xi.entries() {
            grad[col] += coef * v;
        }
        grad[dim] += coef;
    }
    (obj, grad)
}

/// Two-loop recursion producing the quasi-Newton descent direction.
fn lbfgs_direction(grad: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let m = s_hist.len();
    let mut alphas = vec![0.0; m];
    let rho: Vec<f64> = s_hist
        .iter()
        .zip(y_hist)
        .map(|(s, y)| 1.0 / dot(y, s))
        .collect();
    for k in (0..m).rev() {
        alphas[k] = rho[k] * dot(&s_hist[k], &q);
        axpy(-alphas[k], &y_hist[k], &mut q);
    }
    if m > 0 {
        let last = m - 1;
        let gamma = dot(&s_hist[last], &y_hist[last]) / dot(&y_hist[last], &y_hist[last]);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for k in 0..m {
        let beta = rho[k] * dot(&y_hist[k], &q);
        axpy(alphas[k] - beta, &s_hist[k], &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Trains one binary problem; returns weights, bias, iterations, and the
/// final objective.
pub fn train_binary(
    x: &[SparseVector],
    labels: &[f64],
    n_features: usize,
    spec: &ClassifierSpec,
) -> (Vec<f64>, f64, usize, f64) {
    let mut theta = vec![0.0; n_features + 1];
    let (mut obj, mut grad) =
        logreg_objective_and_grad(x, labels, spec.c, spec.l2_penalty, &theta);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iters = 0;
    while iters < spec.max_iter && inf_norm(&grad) >= spec.tol {
        let mut dir = lbfgs_direction(&grad, &s_hist, &y_hist);
        let mut slope = dot(&dir, &grad);
        if slope >= 0.0 {
            // Fall back to steepest descent if curvature info is stale.
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&dir, &grad);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(&dir)
                .map(|(t, d)| t + step * d)
                .collect();
            let (cand_obj, cand_grad) =
                logreg_objective_and_grad(x, labels, spec.c, spec.l2_penalty, &cand);
            if cand_obj <= obj + 1e-4 * step * slope {
                accepted = Some((cand, cand_obj, cand_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((new_theta, new_obj, new_grad)) = accepted else {
            break; // no decrease found at machine precision
        };
        let s: Vec<f64> = new_theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        if dot(&s, &yv) > 1e-12 {
            s_hist.push(s);
            y_hist.push(yv);
            if s_hist.len() > LBFGS_MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        let improvement = obj - new_obj;
        theta = new_theta;
        obj = new_obj;
        grad = new_grad;
        iters += 1;
        if improvement <= 1e-14 * obj.abs().max(1.0) {
            break;
        }
    }
    let bias = theta[n_features];
    theta.truncate(n_features);
    (theta, bias, iters, obj)
}

/// One-vs-rest logistic regression over all classes.
pub fn train_ovr(
    x: &[SparseVector],
    y: &[usize],
    n_features: usize,
    n_classes: usize,
    spec: &ClassifierSpec,
) -> (ModelParams, TrainingMeta) {
    let results: Vec<(Vec<f64>, f64, usize, f64)> = (0..n_classes)
        .into_par_iter()
        .map(|class| {
            let labels: Vec<f64> = y
                .iter()
                .map(|&c| if c == class { 1.0 } else { -1.0 })
                .collect();
            train_binary(x, &labels, n_features, spec)
        })
        .collect();
    let mut weights = Vec::with_capacity(n_classes);
    let mut biases = Vec::with_capacity(n_classes);
    let mut iterations = 0;
    let mut objective = 0.0;
    for (w, b, iters, obj) in results {
        iterations = iterations.max(iters);
        objective += obj;
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
