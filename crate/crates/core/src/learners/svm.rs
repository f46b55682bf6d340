//! Soft-margin SVM with an RBF kernel, trained by SMO.
//!
//! The dual problem
//!
//! ```text
//! min_a  1/2 a'Qa - e'a   s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! is solved two multipliers at a time. The working pair is the maximal
//! violating index `i` together with the `j` that gives the largest
//! second-order decrease of the objective. Iteration stops when the
//! maximal KKT violation `m(a) - M(a)` drops below the tolerance.

use serde::{Deserialize, Serialize};

use super::{sigmoid, Classifier, TrainSet};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// Above this many training rows the kernel matrix is not cached.
const FULL_KERNEL_LIMIT: usize = 6000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// `None` uses `1 / (d * mean per-feature variance)`.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tolerance: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::Argument(format!("SVM C must be positive, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::Argument(format!("SVM gamma must be positive, got {g}")));
            }
        }
        if !(self.tolerance > 0.0) || self.max_iter == 0 {
            return Err(Error::Argument("SVM tolerance and max_iter must be positive".to_owned()));
        }
        Ok(())
    }
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// `1 / (d * mean per-feature variance)`, or `1 / d` when every feature is constant.
pub fn default_gamma(train: &TrainSet) -> f64 {
    let n = train.len() as f64;
    let d = train.n_features();
    let mut mean = vec![0.0; d];
    for row in train.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for row in train.rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let mean_var = var.iter().sum::<f64>() / n / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    }
}

/// Kernel rows, either precomputed or evaluated on demand.
enum KernelRows<'a> {
    Full { n: usize, values: Vec<f64> },
    OnDemand { train: &'a TrainSet, gamma: f64, buf: [Vec<f64>; 2] },
}

impl<'a> KernelRows<'a> {
    fn new(train: &'a TrainSet, gamma: f64) -> Self {
        let n = train.len();
        if n > FULL_KERNEL_LIMIT {
            return KernelRows::OnDemand {
                train,
                gamma,
                buf: [vec![0.0; n], vec![0.0; n]],
            };
        }
        let norms: Vec<f64> = train.rows().map(|r| r.iter().map(|v| v * v).sum()).collect();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            let xi = train.row(i);
            values[i * n + i] = 1.0;
            for j in 0..i {
                let dot: f64 = xi.iter().zip(train.row(j)).map(|(a, b)| a * b).sum();
                let d2 = (norms[i] + norms[j] - 2.0 * dot).max(0.0);
                let k = (-gamma * d2).exp();
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        KernelRows::Full { n, values }
    }

    /// Rows `i` and `j` of the kernel matrix.
    fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        match self {
            KernelRows::Full { n, values } => (&values[i * *n..(i + 1) * *n], &values[j * *n..(j + 1) * *n]),
            KernelRows::OnDemand { train, gamma, buf } => {
                let [bi, bj] = buf;
                for (k, row) in train.rows().enumerate() {
                    bi[k] = rbf_kernel(train.row(i), row, *gamma);
                    bj[k] = rbf_kernel(train.row(j), row, *gamma);
                }
                (bi.as_slice(), bj.as_slice())
            }
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        self.pair(i, i).0
    }
}

/// Dual solution of the SVM problem.
#[derive(Clone, Debug)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Offset: the decision value is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    /// True if the KKT tolerance was reached before `max_iter`.
    pub converged: bool,
}

fn solve(kernel: &mut KernelRows<'_>, y: &[f64], c: f64, eps: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // Gradient of 1/2 a'Qa - e'a.
    let mut grad = vec![-1.0; n];
    let diag = 1.0; // K(x, x) for the RBF kernel
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // Maximal violating index.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let eligible = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if eligible && v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let k_i = kernel.row(i).to_vec();
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let eligible = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !eligible {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let quad = diag + diag - 2.0 * k_i[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel.filter(|_| gmax + gmax2 >= eps) else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = k_i[j];
        let quad = (diag + diag - 2.0 * kij).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (row_i, row_j) = kernel.pair(i, j);
        let (yi, yj) = (y[i], y[j]);
        for t in 0..n {
            grad[t] += y[t] * (yi * row_i[t] * di + yj * row_j[t] * dj);
        }
    }

    // Offset from free multipliers, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    DualSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmRbf {
    gamma: f64,
    rho: f64,
    /// `alpha_i * y_i` for each support vector.
    coef: Vec<f64>,
    /// Support vectors, row-major.
    support: Vec<f64>,
    feature_dim: usize,
}

impl SvmRbf {
    pub fn fit(train: &TrainSet, params: &SvmParams) -> Result<Self> {
        Self::fit_with_solution(train, params).map(|(m, _)| m)
    }

    /// Fits and also returns the full dual solution over the training rows.
    pub fn fit_with_solution(train: &TrainSet, params: &SvmParams) -> Result<(Self, DualSolution)> {
        params.validate()?;
        let gamma = params.gamma.unwrap_or_else(|| default_gamma(train));
        let y: Vec<f64> = train.targets().iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
        let mut kernel = KernelRows::new(train, gamma);
        let sol = solve(&mut kernel, &y, params.c, params.tolerance, params.max_iter);
        let d = train.n_features();
        let mut coef = Vec::new();
        let mut support = Vec::new();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                coef.push(a * y[i]);
                support.extend_from_slice(train.row(i));
            }
        }
        let model = Self {
            gamma,
            rho: sol.rho,
            coef,
            support,
            feature_dim: d,
        };
        Ok((model, sol))
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    /// Signed distance-like margin `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        let sum: f64 = self
            .support
            .chunks_exact(self.feature_dim)
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf_kernel(sv, x, self.gamma))
            .sum();
        sum - self.rho
    }
}

impl Classifier for SvmRbf {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision_value(x))
    }
}
