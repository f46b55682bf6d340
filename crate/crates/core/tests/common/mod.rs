//! Reference implementations shared by the test targets. Each one is coded
//! independently of the library it checks.
#![allow(dead_code)]

use helpfusion_core::learners::rbf_kernel;
use helpfusion_core::{seed, CurveKind, TrainSet};
use rand::Rng;

/// Precision, recall and F1 by expanding the counts into instances.
pub fn prf_brute_force(tp: u64, fp: u64, fn_: u64, tn: u64) -> (f64, f64, f64) {
    let mut hits = 0u64;
    let mut predicted = 0u64;
    let mut actual = 0u64;
    for (n, p, t) in [(tp, true, true), (fp, true, false), (fn_, false, true), (tn, false, false)] {
        for _ in 0..n {
            hits += u64::from(p && t);
            predicted += u64::from(p);
            actual += u64::from(t);
        }
    }
    let precision = if predicted == 0 { 0.0 } else { hits as f64 / predicted as f64 };
    let recall = if actual == 0 { 0.0 } else { hits as f64 / actual as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 / (1.0 / precision + 1.0 / recall) };
    (precision, recall, f1)
}

/// Gaussian NB posterior of the positive class on the 1-D example with
/// negatives {0, 0.2} and positives {0.8, 1.0}: means 0.1 and 0.9, both
/// variances 0.01, equal priors.
pub fn nb_example_posterior(x: f64) -> f64 {
    let dens = |m: f64| (-(x - m) * (x - m) / 0.02).exp();
    dens(0.9) / (dens(0.9) + dens(0.1))
}

/// Plug-in mutual information (nats) between consecutive labels.
pub fn lag_one_mutual_information(labels: &[Vec<bool>]) -> f64 {
    let mut joint = [[0.0f64; 2]; 2];
    for s in labels {
        for w in s.windows(2) {
            joint[usize::from(w[0])][usize::from(w[1])] += 1.0;
        }
    }
    let n: f64 = joint.iter().flatten().sum();
    let row = |a: usize| (joint[a][0] + joint[a][1]) / n;
    let col = |b: usize| (joint[0][b] + joint[1][b]) / n;
    let mut mi = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let p = joint[a][b] / n;
            if p > 0.0 {
                mi += p * (p / (row(a) * col(b))).ln();
            }
        }
    }
    mi
}

/// Area under the anchored curve as the area of the polygon closed along
/// the x axis, by the shoelace formula.
pub fn shoelace_oracle(pts: &[(f64, f64)], kind: CurveKind) -> f64 {
    let mut sorted = pts.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut poly = vec![(0.0, 0.0)];
    match kind {
        CurveKind::Roc => poly.push((0.0, 0.0)),
        CurveKind::Pr => poly.push((0.0, sorted[0].1)),
    }
    poly.extend(&sorted);
    match kind {
        CurveKind::Roc => poly.push((1.0, 1.0)),
        CurveKind::Pr => poly.push((1.0, sorted[sorted.len() - 1].1)),
    }
    poly.push((1.0, 0.0));
    let twice: f64 = (0..poly.len())
        .map(|i| {
            let (x0, y0) = poly[i];
            let (x1, y1) = poly[(i + 1) % poly.len()];
            x0 * y1 - x1 * y0
        })
        .sum();
    (twice / 2.0).abs()
}

pub fn random_set(n: usize, d: usize, s: u64) -> TrainSet {
    let mut rng = seed::rng(s);
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for i in 0..n {
        rows.push((0..d).map(|_| [0.0, 0.5, 1.0][rng.random_range(0..3)]).collect::<Vec<f64>>());
        targets.push(i % 2 == 0 || rng.random_bool(0.2));
    }
    TrainSet::from_rows(&rows, targets).unwrap()
}

pub fn distinct_set(n: usize, d: usize, s: u64) -> TrainSet {
    let mut rng = seed::rng(s);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let targets = (0..n).map(|i| i % 2 == 0).collect();
    TrainSet::from_rows(&rows, targets).unwrap()
}

pub fn signs(ts: &TrainSet) -> Vec<f64> {
    ts.targets().iter().map(|&t| if t { 1.0 } else { -1.0 }).collect()
}

pub fn q_matrix(ts: &TrainSet, y: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    (0..ts.len())
        .map(|i| (0..ts.len()).map(|j| y[i] * y[j] * rbf_kernel(ts.row(i), ts.row(j), gamma)).collect())
        .collect()
}

/// `e'a - a'Qa / 2`, to be maximized.
pub fn dual_objective(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let quad: f64 = (0..a.len()).map(|i| (0..a.len()).map(|j| a[i] * q[i][j] * a[j]).sum::<f64>()).sum();
    a.iter().sum::<f64>() - quad / 2.0
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let p = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, p);
        r.swap(col, p);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

/// Enumerates every assignment of multipliers to {0, free, C}, solves the
/// KKT equalities for the free ones and keeps the best feasible point.
pub fn brute_force_dual(q: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let eps = 1e-7;
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 2 { c } else { 0.0 }).collect();
        // Unknowns: free multipliers then the offset b, with y_i f(x_i) = 1
        // on the free set and the equality constraint.
        let k = free.len();
        let mut m = vec![vec![0.0; k + 1]; k + 1];
        let mut r = vec![0.0; k + 1];
        for (row, &i) in free.iter().enumerate() {
            for (col, &j) in free.iter().enumerate() {
                m[row][col] = q[i][j];
            }
            m[row][k] = y[i];
            r[row] = 1.0 - (0..n).filter(|&j| state[j] == 2).map(|j| q[i][j] * c).sum::<f64>();
        }
        for (col, &j) in free.iter().enumerate() {
            m[k][col] = y[j];
        }
        r[k] = -(0..n).filter(|&j| state[j] == 2).map(|j| y[j] * c).sum::<f64>();
        let b_range = if k > 0 {
            let Some(x) = solve_linear(m, r) else { continue };
            for (col, &j) in free.iter().enumerate() {
                alpha[j] = x[col];
            }
            (x[k], x[k])
        } else {
            if r[k].abs() > eps {
                continue;
            }
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        if alpha.iter().any(|&a| a < -eps || a > c + eps) {
            continue;
        }
        // Margin conditions: y_i (g_i + b) >= 1 at zero, <= 1 at C, where
        // g_i = sum_j a_j y_j K_ij, so each bounds b from one side.
        let (mut lo, mut hi) = b_range;
        for i in 0..n {
            if state[i] == 1 {
                continue;
            }
            let g: f64 = (0..n).map(|j| q[i][j] * alpha[j]).sum::<f64>() * y[i];
            let bound = y[i] * (1.0 - y[i] * g) / (y[i] * y[i]);
            let lower_side = (state[i] == 0) == (y[i] > 0.0);
            if lower_side {
                lo = lo.max(bound - eps);
            } else {
                hi = hi.min(bound + eps);
            }
        }
        if lo <= hi + 2.0 * eps {
            best = best.max(dual_objective(q, &alpha));
        }
    }
    best
}
