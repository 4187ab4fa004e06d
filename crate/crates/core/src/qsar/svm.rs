//! RBF-kernel support vector machines trained by SMO with maximal-violating
//! pair selection. Classification and epsilon-regression share one solver
//! over the dual `min ½ aᵀQa + pᵀa, yᵀa = 0, 0 ≤ a ≤ C`.

use log::warn;
use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::QsarError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    /// Regression tube half-width.
    pub epsilon: f64,
    /// `None` picks `1 / (d · Var(X))`.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    /// Iteration cap as a multiple of the number of training points.
    pub max_iter_factor: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 5.0,
            epsilon: 0.1,
            gamma: None,
            tolerance: 1e-3,
            max_iter_factor: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMachine {
    pub kind: SvmKind,
    pub support_vectors: Array2<f64>,
    /// Expansion weight of each support vector (`y·a`, or `a − a*`).
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: Option<f64>,
    /// Full dual solution with the sign of each variable.
    pub duals: Vec<f64>,
    pub signs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `1 / (d · Var(X))` over all entries; 1 for constant input.
pub fn scale_gamma(x: ArrayView2<f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

pub fn rbf(a: ArrayView1<f64>, b: ArrayView1<f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

fn kernel_matrix(x: ArrayView2<f64>, gamma: f64) -> Array2<f64> {
    let n = x.nrows();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in 0..i {
            let v = rbf(x.row(i), x.row(j), gamma);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    converged: bool,
}

/// Variable `t` maps to kernel row `t % n`.
fn smo(k: &Array2<f64>, y: &[f64], p: &[f64], c: f64, tol: f64, max_iter: usize) -> Solution {
    let n = k.nrows();
    let l = y.len();
    let mut alpha = vec![0.0; l];
    let mut g = p.to_vec();
    let up = |a: f64, y: f64| if y > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, y: f64| if y > 0.0 { a > 0.0 } else { a < c };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let (mut i, mut m) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut big_m) = (usize::MAX, f64::INFINITY);
        for t in 0..l {
            let v = -y[t] * g[t];
            if up(alpha[t], y[t]) && v > m {
                i = t;
                m = v;
            }
            if low(alpha[t], y[t]) && v < big_m {
                j = t;
                big_m = v;
            }
        }
        if i == usize::MAX || j == usize::MAX || m - big_m < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (ki, kj) = (i % n, j % n);
        let curv = (k[[ki, ki]] + k[[kj, kj]] - 2.0 * k[[ki, kj]]).max(1e-12);
        let mut step = (m - big_m) / curv;
        // a_i moves by y_i·step, a_j by −y_j·step
        step = step.min(if y[i] > 0.0 { c - alpha[i] } else { alpha[i] });
        step = step.min(if y[j] > 0.0 { alpha[j] } else { c - alpha[j] });
        alpha[i] = (alpha[i] + y[i] * step).clamp(0.0, c);
        alpha[j] = (alpha[j] - y[j] * step).clamp(0.0, c);
        for t in 0..l {
            let kt = t % n;
            g[t] += y[t] * step * (k[[kt, ki]] - k[[kt, kj]]);
        }
    }
    // bias from free variables, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..l {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum += yg;
            free += 1;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    Solution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

fn check_input(x: ArrayView2<f64>, n: usize) -> Result<(), QsarError> {
    if x.nrows() != n || n == 0 {
        return Err(QsarError::Shape(format!("{} rows, {} targets", x.nrows(), n)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(QsarError::NonFinite("feature matrix".into()));
    }
    Ok(())
}

fn finish(
    kind: SvmKind,
    x: ArrayView2<f64>,
    sol: Solution,
    signs: Vec<f64>,
    gamma: f64,
    cfg: &SvmConfig,
) -> KernelMachine {
    let n = x.nrows();
    let mut coef = vec![0.0; n];
    for (t, (&a, &s)) in sol.alpha.iter().zip(&signs).enumerate() {
        coef[t % n] += s * a;
    }
    let sv: Vec<usize> = (0..n).filter(|&i| coef[i] != 0.0).collect();
    if !sol.converged {
        warn!("SMO stopped after {} iterations without reaching tolerance", sol.iterations);
    }
    KernelMachine {
        kind,
        support_vectors: x.select(ndarray::Axis(0), &sv),
        coefficients: sv.iter().map(|&i| coef[i]).collect(),
        bias: -sol.rho,
        gamma,
        c: cfg.c,
        epsilon: (kind == SvmKind::Regression).then_some(cfg.epsilon),
        duals: sol.alpha,
        signs,
        iterations: sol.iterations,
        converged: sol.converged,
    }
}

/// Soft-margin classifier on labels in {0, 1}.
pub fn svm_fit_classify(x: ArrayView2<f64>, y: &[u8], cfg: &SvmConfig) -> Result<KernelMachine, QsarError> {
    check_input(x, y.len())?;
    if y.iter().all(|&v| v == y[0]) {
        return Err(QsarError::SingleClass);
    }
    let signs: Vec<f64> = y.iter().map(|&v| if v != 0 { 1.0 } else { -1.0 }).collect();
    let gamma = cfg.gamma.unwrap_or_else(|| scale_gamma(x));
    let k = kernel_matrix(x, gamma);
    let p = vec![-1.0; y.len()];
    let sol = smo(&k, &signs, &p, cfg.c, cfg.tolerance, cfg.max_iter_factor * y.len());
    Ok(finish(SvmKind::Classification, x, sol, signs, gamma, cfg))
}

/// Epsilon-insensitive regression.
pub fn svm_fit_regress(x: ArrayView2<f64>, y: &[f64], cfg: &SvmConfig) -> Result<KernelMachine, QsarError> {
    check_input(x, y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(QsarError::NonFinite("regression targets".into()));
    }
    let n = y.len();
    let gamma = cfg.gamma.unwrap_or_else(|| scale_gamma(x));
    let k = kernel_matrix(x, gamma);
    let mut signs = vec![1.0; n];
    signs.extend(std::iter::repeat(-1.0).take(n));
    let mut p: Vec<f64> = y.iter().map(|v| cfg.epsilon - v).collect();
    p.extend(y.iter().map(|v| cfg.epsilon + v));
    let sol = smo(&k, &signs, &p, cfg.c, cfg.tolerance, cfg.max_iter_factor * n);
    Ok(finish(SvmKind::Regression, x, sol, signs, gamma, cfg))
}

impl KernelMachine {
    /// Raw decision values (regression predictions).
    pub fn decision_function(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                self.support_vectors
                    .rows()
                    .into_iter()
                    .zip(&self.coefficients)
                    .map(|(sv, &c)| c * rbf(sv, row, self.gamma))
                    .sum::<f64>()
                    + self.bias
            })
            .collect()
    }

    /// Class labels for classification, values for regression.
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let d = self.decision_function(x);
        match self.kind {
            SvmKind::Classification => d.into_iter().map(|v| if v > 0.0 { 1.0 } else { 0.0 }).collect(),
            SvmKind::Regression => d,
        }
    }

    /// `Σ sign·a` over all dual variables; zero at any feasible point.
    pub fn dual_balance(&self) -> f64 {
        self.duals.iter().zip(&self.signs).map(|(a, s)| a * s).sum()
    }
}
