//! RBF-kernel SVM trained by SMO with maximal-violating-pair selection.
//!
//! The kernel matrix is precomputed once and shared by every one-vs-rest
//! subproblem; this targets desk-scale corpora, not millions of rows. One
//! iteration is one analytic two-variable update. The optimizer stops
//! when the KKT gap drops below `tol` or the iteration cap is reached.

use rayon::prelude::*;

use super::{kernel_rbf, ClassifierSpec, ModelParams, RbfBinary, RbfParams, TrainingMeta};
use crate::vectorizer::SparseVector;

const BOUND_EPS: f64 = 1e-12;

struct SmoResult {
    alpha: Vec<f64>,
    bias: f64,
    iterations: usize,
    kkt_gap: f64,
}

/// Dual decision value f_i = sum_j alpha_j y_j K_ij, recovered from the
/// maintained gradient of the dual objective.
fn decision_from_grad(grad: f64, y: f64) -> f64 {
    y * (grad + 1.0)
}

fn smo(kernel: &[Vec<f64>], labels: &[f64], c: f64, tol: f64, max_iter: usize) -> SmoResult {
    let n = labels.len();
    let mut alpha = vec![0.0; n];
    // grad_i = sum_j y_i y_j K_ij alpha_j - 1; all-zero alpha gives -1.
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut kkt_gap = f64::INFINITY;
    loop {
        // Maximal violating pair over the index sets that can still move.
        let mut up: Option<(f64, usize)> = None;
        let mut low: Option<(f64, usize)> = None;
        for t in 0..n {
            let v = -labels[t] * grad[t];
            let can_up = (labels[t] > 0.0 && alpha[t] < c - BOUND_EPS)
                || (labels[t] < 0.0 && alpha[t] > BOUND_EPS);
            let can_low = (labels[t] > 0.0 && alpha[t] > BOUND_EPS)
                || (labels[t] < 0.0 && alpha[t] < c - BOUND_EPS);
            if can_up && up.map_or(true, |(best, _)| v > best) {
                up = Some((v, t));
            }
            if can_low && low.map_or(true, |(best, _)| v < best) {
                low = Some((v, t));
            }
        }
        let (Some((m_up, i)), Some((m_low, j))) = (up, low) else {
            break;
        };
        kkt_gap = m_up - m_low;
        if kkt_gap < tol || iterations >= max_iter {
            break;
        }
        let (yi, yj) = (labels[i], labels[j]);
        let e_i = decision_from_grad(grad[i], yi) - yi;
        let e_j = decision_from_grad(grad[j], yj) - yj;
        let eta = (kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j]).max(1e-12);
        let (lo, hi) = if yi != yj {
            ((alpha[j] - alpha[i]).max(0.0), (c + alpha[j] - alpha[i]).min(c))
        } else {
            ((alpha[i] + alpha[j] - c).max(0.0), (alpha[i] + alpha[j]).min(c))
        };
        if hi - lo < BOUND_EPS {
            break;
        }
        let aj_new = (alpha[j] + yj * (e_i - e_j) / eta).clamp(lo, hi);
        let dj = aj_new - alpha[j];
        if dj.abs() < 1e-15 {
            break;
        }
        let ai_new = alpha[i] + yi * yj * (alpha[j] - aj_new);
        let di = ai_new - alpha[i];
        for t in 0..n {
            grad[t] += labels[t] * (yi * kernel[t][i] * di + yj * kernel[t][j] * dj);
        }
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        iterations += 1;
    }
    // Bias from the KKT conditions: free vectors give equalities, bounded
    // ones give one-sided inequalities.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for t in 0..n {
        let f_t = decision_from_grad(grad[t], labels[t]);
        let gap = labels[t] - f_t;
        if alpha[t] > BOUND_EPS && alpha[t] < c - BOUND_EPS {
            free_sum += gap;
            free_count += 1;
        } else if (alpha[t] <= BOUND_EPS && labels[t] > 0.0)
            || (alpha[t] >= c - BOUND_EPS && labels[t] < 0.0)
        {
            lower = lower.max(gap);
        } else {
            upper = upper.min(gap);
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else if upper.is_finite() {
        upper
    } else {
        0.0
    };
    SmoResult {
        alpha,
        bias,
        iterations,
        kkt_gap,
    }
}

/// One-vs-rest RBF SVM; the kernel width defaults to 1 / n_features.
pub fn train_ovr(
    x: &[SparseVector],
    y: &[usize],
    n_features: usize,
    n_classes: usize,
    spec: &ClassifierSpec,
) -> (ModelParams, TrainingMeta) {
    let gamma = spec.gamma.unwrap_or(1.0 / n_features.max(1) as f64);
    let n = x.len();
    let mut kernel = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let k = kernel_rbf(&x[i], &x[j], gamma);
            kernel[i][j] = k;
            kernel[j][i] = k;
        }
    }
    let results: Vec<(RbfBinary, usize, f64)> = (0..n_classes)
        .into_par_iter()
        .map(|class| {
            let labels: Vec<f64> = y
                .iter()
                .map(|&c| if c == class { 1.0 } else { -1.0 })
                .collect();
            let result = smo(&kernel, &labels, spec.c, spec.tol, spec.max_iter);
            let mut coeffs = Vec::new();
            let mut support_vectors = Vec::new();
            for (t, &a) in result.alpha.iter().enumerate() {
                if a > BOUND_EPS {
                    coeffs.push(a * labels[t]);
                    support_vectors.push(x[t].clone());
                }
            }
            (
                RbfBinary {
                    coeffs,
                    support_vectors,
                    bias: result.bias,
                },
                result.iterations,
                result.kkt_gap,
            )
        })
        .collect();
    let mut machines = Vec::with_capacity(n_classes);
    let mut iterations = 0;
    let mut worst_gap = 0.0f64;
    for (machine, iters, gap) in results {
        iterations = iterations.max(iters);
        worst_gap = worst_gap.max(gap);
        machines.push(machine);
    }
    (
        ModelParams::Rbf(RbfParams { gamma, machines }),
        TrainingMeta {
            iterations,
            final_objective: worst_gap,
            ..TrainingMeta::default()
        },
    )
}
