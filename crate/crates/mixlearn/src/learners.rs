//! Learners: empirical risk minimization over a finite candidate set,
//! kernel least-squares regression, and kernel quantile regression.
//!
//! Every trainer returns a report carrying the fitted predictor together
//! with a certified optimization accuracy delta_achieved, an upper bound on
//! the gap between the returned regularized objective and its infimum. The
//! least-squares solver certifies through the residual of its linear system;
//! the quantile solver certifies through a feasible point of the Fenchel
//! dual of the pinball objective.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, cholesky_solve, SymBanded};
use crate::losses::{empirical_risk, LossKind, LossSpec};
use crate::processes::SamplePath;
use serde::{Deserialize, Serialize};

/// Kernel functions on R^d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    /// k(x, x') = exp(-|x - x'|^2 / sigma^2)
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::config("kernel width must be positive and finite"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let mut d2 = 0.0;
                for (u, v) in a.iter().zip(b) {
                    d2 += (u - v) * (u - v);
                }
                (-d2 / (sigma * sigma)).exp()
            }
        }
    }
}

/// Members of a finite hypothesis class on scalar inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Hypothesis {
    Zero,
    Constant { value: f64 },
    Line { slope: f64, intercept: f64 },
    /// amplitude * sin(pi x)
    Sine { amplitude: f64 },
}

impl Hypothesis {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Hypothesis::Zero => 0.0,
            Hypothesis::Constant { value } => value,
            Hypothesis::Line { slope, intercept } => slope * x[0] + intercept,
            Hypothesis::Sine { amplitude } => amplitude * (std::f64::consts::PI * x[0]).sin(),
        }
    }
}

/// A fitted predictor: either a finite-class member or a kernel expansion
/// over stored support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predictor {
    Finite {
        hypothesis: Hypothesis,
        m_bound: f64,
    },
    Kernel {
        kernel: KernelSpec,
        dim: usize,
        support: Vec<f64>,
        coefficients: Vec<f64>,
        m_bound: f64,
    },
}

impl Predictor {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Predictor::Finite { hypothesis, .. } => hypothesis.eval(x),
            Predictor::Kernel {
                kernel,
                dim,
                support,
                coefficients,
                ..
            } => {
                let mut s = 0.0;
                for (j, c) in coefficients.iter().enumerate() {
                    s += c * kernel.eval(x, &support[j * dim..(j + 1) * dim]);
                }
                s
            }
        }
    }

    pub fn eval_clipped(&self, x: &[f64]) -> f64 {
        let m = self.m_bound();
        self.eval(x).clamp(-m, m)
    }

    pub fn m_bound(&self) -> f64 {
        match self {
            Predictor::Finite { m_bound, .. } | Predictor::Kernel { m_bound, .. } => *m_bound,
        }
    }
}

/// Windowed evaluator for one-dimensional Gaussian kernel expansions with
/// sorted support. Terms beyond the distance where the kernel falls under
/// 1e-20 are dropped, which turns each evaluation from O(n) into a binary
/// search plus a short window scan.
pub struct FastKernelEval {
    support: Vec<f64>,
    coefficients: Vec<f64>,
    inv_sigma2: f64,
    cutoff: f64,
    m_bound: f64,
}

impl FastKernelEval {
    /// Returns None for predictors that are not sorted one-dimensional
    /// Gaussian expansions; callers fall back to Predictor::eval.
    pub fn new(predictor: &Predictor) -> Option<Self> {
        match predictor {
            Predictor::Kernel {
                kernel: KernelSpec::Gaussian { sigma },
                dim: 1,
                support,
                coefficients,
                m_bound,
            } => {
                if support.windows(2).any(|w| w[0] > w[1]) {
                    return None;
                }
                Some(FastKernelEval {
                    support: support.clone(),
                    coefficients: coefficients.clone(),
                    inv_sigma2: 1.0 / (sigma * sigma),
                    cutoff: sigma * (-(1e-20f64.ln())).sqrt(),
                    m_bound: *m_bound,
                })
            }
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let lo = self.support.partition_point(|&s| s < x - self.cutoff);
        let mut total = 0.0;
        for j in lo..self.support.len() {
            let d = self.support[j] - x;
            if d > self.cutoff {
                break;
            }
            total += self.coefficients[j] * (-d * d * self.inv_sigma2).exp();
        }
        total
    }

    pub fn eval_clipped(&self, x: f64) -> f64 {
        self.eval(x).clamp(-self.m_bound, self.m_bound)
    }
}

/// Training outcome: the predictor, the certified optimization gap of the
/// regularized objective, and solver diagnostics. residual_inf is the
/// sup-norm residual of the linear system for the least-squares path and
/// absent for the quantile path. A solver that stops at its iteration cap
/// reports converged = false and leaves judgment to the caller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub predictor: Predictor,
    pub lambda: f64,
    pub objective: f64,
    pub delta_achieved: f64,
    pub residual_inf: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Full Gaussian kernel matrix, row-major, both triangles filled.
pub fn gram(kernel: &KernelSpec, x: &[f64], dim: usize) -> Vec<f64> {
    let n = x.len() / dim;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&x[i * dim..(i + 1) * dim], &x[j * dim..(j + 1) * dim]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// The squared RKHS norm of a kernel expansion, alpha^T K alpha.
pub fn rkhs_norm2(kernel: &KernelSpec, x: &[f64], dim: usize, alpha: &[f64]) -> f64 {
    let n = alpha.len();
    assert_eq!(x.len(), n * dim);
    let mut total = 0.0;
    for i in 0..n {
        let xi = &x[i * dim..(i + 1) * dim];
        let mut s = alpha[i] * kernel.eval(xi, xi);
        for j in 0..i {
            s += 2.0 * alpha[j] * kernel.eval(xi, &x[j * dim..(j + 1) * dim]);
        }
        total += alpha[i] * s;
    }
    total
}

/// (K + ridge I) alpha against the exact kernel, evaluated entry by entry so
/// it stays valid regardless of how the system was factored.
fn kernel_matvec(kernel: &KernelSpec, x: &[f64], dim: usize, alpha: &[f64], ridge: f64) -> Vec<f64> {
    let n = alpha.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let xi = &x[i * dim..(i + 1) * dim];
        let mut s = (kernel.eval(xi, xi) + ridge) * alpha[i];
        for j in 0..i {
            let v = kernel.eval(xi, &x[j * dim..(j + 1) * dim]);
            s += v * alpha[j];
            out[j] += v * alpha[i];
        }
        out[i] += s;
    }
    out
}

/// Kernel values this small are treated as structural zeros when deciding
/// whether a sorted one-dimensional problem is effectively banded.
const BAND_DROP: f64 = 1e-20;
/// Banded factorization is worthwhile only while the band stays narrow
/// relative to the matrix.
const BAND_MAX_FRACTION: f64 = 1.0 / 3.0;

enum Factored {
    Dense(Vec<f64>),
    Banded(SymBanded),
}

impl Factored {
    fn solve(&self, b: &mut [f64]) {
        match self {
            Factored::Dense(l) => {
                let n = b.len();
                cholesky_solve(l, n, b);
            }
            Factored::Banded(m) => m.solve(b),
        }
    }
}

/// Kernel least-squares regression: solves (K + (n lambda / scale) I) a = y
/// and returns f = sum a_j k(., x_j). For one-dimensional Gaussian problems
/// whose kernel matrix is numerically banded after sorting, the
/// factorization runs on the band; the reported residual is always measured
/// against the exact kernel matrix.
pub fn lssvm_train(
    loss: &LossSpec,
    path: &SamplePath,
    kernel: &KernelSpec,
    lambda: f64,
) -> Result<SolveReport> {
    if loss.kind != LossKind::LeastSquares {
        return Err(Error::config("kernel least-squares needs the least-squares loss"));
    }
    kernel.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::config("regularization parameter must be positive"));
    }
    let n = path.len();
    if n == 0 {
        return Err(Error::config("cannot train on an empty path"));
    }
    let dim = path.dim;
    let ridge = n as f64 * lambda / loss.scale;

    // sort one-dimensional inputs so that a narrow kernel produces a band
    let (x, y) = if dim == 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&i, &j| path.x[i].total_cmp(&path.x[j]));
        let x: Vec<f64> = order.iter().map(|&i| path.x[i]).collect();
        let y: Vec<f64> = order.iter().map(|&i| path.y[i]).collect();
        (x, y)
    } else {
        (path.x.clone(), path.y.clone())
    };

    let halfband = if dim == 1 {
        let KernelSpec::Gaussian { sigma } = *kernel;
        let cutoff = sigma * (-BAND_DROP.ln()).sqrt();
        let mut w = 0usize;
        let mut j = 0usize;
        for i in 0..n {
            while x[i] - x[j] > cutoff {
                j += 1;
            }
            w = w.max(i - j);
        }
        Some(w)
    } else {
        None
    };

    let factored = match halfband {
        Some(w) if (w + 1) as f64 <= BAND_MAX_FRACTION * n as f64 => {
            let mut m = SymBanded::zeros(n, w);
            for i in 0..n {
                for j in i.saturating_sub(w)..=i {
                    let v = kernel.eval(&x[i..=i], &x[j..=j]);
                    m.set(i, j, if i == j { v + ridge } else { v });
                }
            }
            m.cholesky_factor()?;
            Factored::Banded(m)
        }
        _ => {
            let mut a = gram(kernel, &x, dim);
            for i in 0..n {
                a[i * n + i] += ridge;
            }
            cholesky_factor(&mut a, n)?;
            Factored::Dense(a)
        }
    };

    let mut alpha = y.clone();
    factored.solve(&mut alpha);

    // iterative refinement against the exact operator
    let y_inf = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut residual_inf = f64::INFINITY;
    let mut iterations = 0usize;
    for _ in 0..4 {
        let ka = kernel_matvec(kernel, &x, dim, &alpha, ridge);
        let r: Vec<f64> = y.iter().zip(&ka).map(|(a, b)| a - b).collect();
        residual_inf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        iterations += 1;
        if residual_inf <= 1e-12 * y_inf.max(1e-300) {
            break;
        }
        let mut d = r;
        factored.solve(&mut d);
        for (a, di) in alpha.iter_mut().zip(&d) {
            *a += di;
        }
    }

    // optimization gap from the system residual rho: the functional gradient
    // at alpha is (2 scale / n) rho, so J(alpha) - J* <= scale^2/(lambda n^2)
    // * rho^T K rho <= scale^2/(lambda n^2) * n * |rho|_inf^2 (K entries <= 1
    // give |K rho|_inf <= n |rho|_inf)
    let delta_achieved =
        loss.scale * loss.scale / (lambda * n as f64) * residual_inf * residual_inf * n as f64;

    let predictor = Predictor::Kernel {
        kernel: *kernel,
        dim,
        support: x.clone(),
        coefficients: alpha.clone(),
        m_bound: loss.m_bound,
    };
    let norm2 = {
        let ka = kernel_matvec(kernel, &x, dim, &alpha, 0.0);
        alpha.iter().zip(&ka).map(|(a, b)| a * b).sum::<f64>()
    };
    let objective = lambda * norm2 + empirical_risk(loss, path, |p| predictor.eval(p), false);

    Ok(SolveReport {
        predictor,
        lambda,
        objective,
        delta_achieved,
        residual_inf: Some(residual_inf),
        iterations,
        converged: true,
    })
}

/// Kernel quantile regression by averaged subgradient descent on
/// J(a) = lambda a^T K a + mean of the scaled pinball loss, step c/sqrt(t)
/// with c = 1/(lambda tr(K)/n + 1).
///
/// The certificate comes from the Fenchel dual
/// D(s) = (scale/n) s^T y - scale^2/(4 lambda n^2) s^T K s over the box
/// s_i in [tau - 1, tau]: a few exact coordinate-ascent passes produce a
/// feasible s, weak duality gives J* >= D(s), and the reported gap is
/// J(best candidate) - D(s). The dual reconstruction scale s/(2 lambda n)
/// competes with the subgradient iterates for the returned predictor.
pub fn quantile_svm_train(
    loss: &LossSpec,
    path: &SamplePath,
    kernel: &KernelSpec,
    lambda: f64,
    max_iters: usize,
    target_delta: f64,
) -> Result<SolveReport> {
    let level = match loss.kind {
        LossKind::Pinball { level } => level,
        _ => return Err(Error::config("quantile regression needs the pinball loss")),
    };
    kernel.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::config("regularization parameter must be positive"));
    }
    if !(target_delta > 0.0) {
        return Err(Error::config("target optimization gap must be positive"));
    }
    let n = path.len();
    if n == 0 {
        return Err(Error::config("cannot train on an empty path"));
    }
    let nf = n as f64;
    let dim = path.dim;
    let x = path.x.clone();
    let y = &path.y;
    let k = gram(kernel, &x, dim);
    let scale = loss.scale;

    let matvec = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += k[i * n + j] * v[j];
            }
            out[i] = s;
        }
        out
    };
    let primal = |alpha: &[f64], kalpha: &[f64]| -> f64 {
        let norm2: f64 = alpha.iter().zip(kalpha).map(|(a, b)| a * b).sum();
        let mut risk = 0.0;
        for i in 0..n {
            risk += loss.loss_value(y[i], kalpha[i]);
        }
        lambda * norm2 + risk / nf
    };

    let trace: f64 = (0..n).map(|i| k[i * n + i]).sum();
    let step_c = 1.0 / (lambda * trace / nf + 1.0);

    let mut alpha = vec![0.0; n];
    let mut kalpha = vec![0.0; n];
    let mut alpha_sum = vec![0.0; n];
    let mut iterations = 0usize;
    let mut best_alpha = alpha.clone();
    let mut best_j = primal(&alpha, &kalpha);

    // dual feasible point, improved by coordinate ascent whenever the
    // certificate is requested
    let mut s = vec![0.0; n];
    let mut ks = vec![0.0; n];
    let mut dual_best = f64::NEG_INFINITY;
    let ascend_dual = |s: &mut Vec<f64>, ks: &mut Vec<f64>| -> f64 {
        let mut d = f64::NEG_INFINITY;
        for _ in 0..50 {
            for i in 0..n {
                let kii = k[i * n + i];
                if kii <= 0.0 {
                    continue;
                }
                // maximize over s_i alone: (Ks)_i = 2 lambda n y_i / scale
                let target = 2.0 * lambda * nf * y[i] / scale;
                let rest = ks[i] - kii * s[i];
                let new = ((target - rest) / kii).clamp(level - 1.0, level);
                let delta = new - s[i];
                if delta != 0.0 {
                    s[i] = new;
                    for j in 0..n {
                        ks[j] += delta * k[j * n + i];
                    }
                }
            }
            let sy: f64 = s.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let sks: f64 = s.iter().zip(ks.iter()).map(|(a, b)| a * b).sum();
            let val = scale / nf * sy - scale * scale / (4.0 * lambda * nf * nf) * sks;
            if val <= d + 1e-16 * (1.0 + d.abs()) {
                return val;
            }
            d = val;
        }
        d
    };

    let check_every = 200usize;
    let mut delta_achieved = f64::INFINITY;
    let mut converged = false;
    for t in 1..=max_iters {
        iterations = t;
        // subgradient w = 2 lambda alpha - (scale/n) v, v_i in the pinball
        // subdifferential at y_i - (K alpha)_i
        let mut w = vec![0.0; n];
        for i in 0..n {
            let u = y[i] - kalpha[i];
            let v = if u > 0.0 {
                level
            } else if u < 0.0 {
                level - 1.0
            } else {
                (2.0 * lambda * nf * alpha[i] / scale).clamp(level - 1.0, level)
            };
            w[i] = 2.0 * lambda * alpha[i] - scale / nf * v;
        }
        let kw = matvec(&w);
        let step = step_c / (t as f64).sqrt();
        for i in 0..n {
            alpha[i] -= step * w[i];
            kalpha[i] -= step * kw[i];
            alpha_sum[i] += alpha[i];
        }

        if t % check_every == 0 || t == max_iters {
            let avg: Vec<f64> = alpha_sum.iter().map(|v| v / t as f64).collect();
            let kavg = matvec(&avg);
            for (cand, kcand) in [(&alpha, &kalpha), (&avg, &kavg)] {
                let j = primal(cand, kcand);
                if j < best_j {
                    best_j = j;
                    best_alpha = cand.clone();
                }
            }
            dual_best = dual_best.max(ascend_dual(&mut s, &mut ks));
            // the dual solution reconstructs a primal candidate
            let recon: Vec<f64> = s.iter().map(|v| scale * v / (2.0 * lambda * nf)).collect();
            let krecon = matvec(&recon);
            let jr = primal(&recon, &krecon);
            if jr < best_j {
                best_j = jr;
                best_alpha = recon;
            }
            delta_achieved = (best_j - dual_best).max(0.0);
            if delta_achieved <= target_delta {
                converged = true;
                break;
            }
        }
    }

    let predictor = Predictor::Kernel {
        kernel: *kernel,
        dim,
        support: x,
        coefficients: best_alpha,
        m_bound: loss.m_bound,
    };
    Ok(SolveReport {
        predictor,
        lambda,
        objective: best_j,
        delta_achieved,
        residual_inf: None,
        iterations,
        converged,
    })
}

/// Empirical risk minimization over a finite candidate set: returns the
/// index of the first hypothesis attaining the minimal clipped empirical
/// risk, with that risk.
pub fn erm_finite(
    loss: &LossSpec,
    path: &SamplePath,
    hypotheses: &[Hypothesis],
) -> Result<(usize, f64)> {
    if hypotheses.is_empty() {
        return Err(Error::config("the hypothesis set is empty"));
    }
    if path.is_empty() {
        return Err(Error::config("cannot train on an empty path"));
    }
    let mut best = (0usize, f64::INFINITY);
    for (idx, hyp) in hypotheses.iter().enumerate() {
        let risk = empirical_risk(loss, path, |x| hyp.eval(x), true);
        if risk < best.1 {
            best = (idx, risk);
        }
    }
    Ok(best)
}

/// Regularizer value and unclipped training predictions of one candidate
/// entering the approximate-minimizer certificate.
#[derive(Debug, Clone)]
pub struct ProbeEval {
    pub regularizer: f64,
    pub predictions: Vec<f64>,
}

/// Certified defect of a fitted candidate as an approximate clipped
/// regularized empirical risk minimizer: max(0, reg + clipped risk of the
/// candidate minus the best unclipped objective among the probes). A result
/// of zero means no probe beats the candidate.
pub fn certify_crerm(
    loss: &LossSpec,
    path: &SamplePath,
    chosen: &ProbeEval,
    probes: &[ProbeEval],
) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::config("the certificate needs at least one probe"));
    }
    let n = path.len();
    if chosen.predictions.len() != n || probes.iter().any(|p| p.predictions.len() != n) {
        return Err(Error::config(
            "prediction vectors must match the path length",
        ));
    }
    let risk_of = |preds: &[f64], clipped: bool| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            let t = if clipped { loss.clip(preds[i]) } else { preds[i] };
            acc += loss.loss_value(path.y[i], t);
        }
        acc / n as f64
    };
    let lhs = chosen.regularizer + risk_of(&chosen.predictions, true);
    let rhs = probes
        .iter()
        .map(|p| p.regularizer + risk_of(&p.predictions, false))
        .fold(f64::INFINITY, f64::min);
    Ok((lhs - rhs).max(0.0))
}
