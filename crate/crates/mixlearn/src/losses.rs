//! Clipped, rescaled loss functions and their risk functionals.
//!
//! Losses are rescaled so that on the clipped range [-M, M] the loss is
//! bounded by 1 and Lipschitz in the prediction with constant at most 1:
//! least squares uses scale = min(1/(2M)^2, 1/(4M)), the pinball loss at
//! level tau uses scale = min(1, 1/(2M max(tau, 1-tau))). All risk values
//! returned here are in the scaled loss.

use crate::error::{Error, Result};
use crate::processes::{stationary_x_sample, MixingSpec, RegressionModel, SamplePath};
use crate::stats::{mean_stderr, mix64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LossKind {
    LeastSquares,
    /// Pinball loss for the quantile at the given level in (0, 1).
    Pinball { level: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub m_bound: f64,
    pub scale: f64,
}

impl LossSpec {
    pub fn least_squares(m_bound: f64) -> Result<Self> {
        if !(m_bound > 0.0) {
            return Err(Error::config("clipping bound M must be positive"));
        }
        let scale = (1.0 / (4.0 * m_bound * m_bound)).min(1.0 / (4.0 * m_bound));
        Ok(LossSpec {
            kind: LossKind::LeastSquares,
            m_bound,
            scale,
        })
    }

    pub fn pinball(m_bound: f64, level: f64) -> Result<Self> {
        if !(m_bound > 0.0) {
            return Err(Error::config("clipping bound M must be positive"));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::config("quantile level must lie in (0, 1)"));
        }
        let scale = (1.0 / (2.0 * m_bound * level.max(1.0 - level))).min(1.0);
        Ok(LossSpec {
            kind: LossKind::Pinball { level },
            m_bound,
            scale,
        })
    }

    /// Projects a prediction onto [-M, M].
    pub fn clip(&self, t: f64) -> f64 {
        t.clamp(-self.m_bound, self.m_bound)
    }

    /// Scaled loss of predicting t against observation y. The prediction is
    /// used as given; clip separately when the clipped loss is wanted.
    pub fn loss_value(&self, y: f64, t: f64) -> f64 {
        let raw = match self.kind {
            LossKind::LeastSquares => (y - t) * (y - t),
            LossKind::Pinball { level } => {
                let u = y - t;
                if u >= 0.0 {
                    level * u
                } else {
                    (level - 1.0) * u
                }
            }
        };
        self.scale * raw
    }

    /// Upper bound on the scaled loss over |y| <= M, |t| <= M.
    pub fn sup_value(&self) -> f64 {
        let m = self.m_bound;
        match self.kind {
            LossKind::LeastSquares => self.scale * 4.0 * m * m,
            LossKind::Pinball { level } => self.scale * 2.0 * m * level.max(1.0 - level),
        }
    }

    /// Lipschitz constant of the scaled loss in the prediction, over the
    /// clipped range.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            LossKind::LeastSquares => self.scale * 4.0 * self.m_bound,
            LossKind::Pinball { level } => self.scale * level.max(1.0 - level),
        }
    }

    /// Conditional risk E[L(Y, t) | X = x] in closed form, using that the
    /// noise is uniform on [-s, s] around the target and never clamped for a
    /// valid model.
    pub fn conditional_risk(&self, model: &RegressionModel, x: f64, t: f64) -> f64 {
        let f = model.target.eval(&[x]);
        let s = model.s_noise;
        let raw = match self.kind {
            LossKind::LeastSquares => (f - t) * (f - t) + s * s / 3.0,
            LossKind::Pinball { level } => {
                let d = t - f;
                // E[(U - d)^+] and E[(d - U)^+] for U uniform on [-s, s]
                let plus = if d >= s {
                    0.0
                } else if d <= -s {
                    -d
                } else {
                    (s - d) * (s - d) / (4.0 * s)
                };
                let minus = if d <= -s {
                    0.0
                } else if d >= s {
                    d
                } else {
                    (s + d) * (s + d) / (4.0 * s)
                };
                level * plus + (1.0 - level) * minus
            }
        };
        self.scale * raw
    }

    /// The predictor minimizing the conditional risk pointwise: the target
    /// itself for least squares, the target shifted by s(2 tau - 1) for the
    /// pinball loss.
    pub fn bayes_predictor(&self, model: &RegressionModel, x: f64) -> f64 {
        let f = model.target.eval(&[x]);
        match self.kind {
            LossKind::LeastSquares => f,
            LossKind::Pinball { level } => f + model.s_noise * (2.0 * level - 1.0),
        }
    }

    /// Scaled Bayes risk: s^2/3 for least squares, s tau (1 - tau) for the
    /// pinball loss, times the scale.
    pub fn bayes_risk(&self, model: &RegressionModel) -> Result<f64> {
        model.validate()?;
        let s = model.s_noise;
        let raw = match self.kind {
            LossKind::LeastSquares => s * s / 3.0,
            LossKind::Pinball { level } => s * level * (1.0 - level),
        };
        Ok(self.scale * raw)
    }
}

/// Mean scaled loss of a predictor along a sample path, optionally after
/// clipping the predictions.
pub fn empirical_risk<F: Fn(&[f64]) -> f64>(
    loss: &LossSpec,
    path: &SamplePath,
    f: F,
    clipped: bool,
) -> f64 {
    let n = path.len();
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let mut t = f(path.row(i));
        if clipped {
            t = loss.clip(t);
        }
        acc += loss.loss_value(path.y[i], t);
    }
    acc / n as f64
}

/// Monte-Carlo estimate of the excess risk of the clipped predictor over the
/// Bayes predictor: draws m independent points from the stationary marginal
/// and averages the closed-form conditional excess, which removes all label
/// noise from the estimate. Returns (estimate, standard error).
pub fn excess_risk_mc<F: Fn(&[f64]) -> f64>(
    loss: &LossSpec,
    spec: &MixingSpec,
    model: &RegressionModel,
    f: &F,
    m: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    model.validate()?;
    if m == 0 {
        return Err(Error::config("excess risk estimate needs at least one draw"));
    }
    let (xs, dim) = stationary_x_sample(spec, m, seed)?;
    if dim != 1 {
        return Err(Error::config("excess risk estimation supports dim = 1"));
    }
    let excesses: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let t = loss.clip(f(&[x]));
            let best = loss.conditional_risk(model, x, loss.bayes_predictor(model, x));
            (loss.conditional_risk(model, x, t) - best).max(0.0)
        })
        .collect();
    Ok(mean_stderr(&excesses))
}

/// Outcome of the variance-bound verification
/// E[(L(f) - L(f_bayes))^2] <= V * E[L(f) - L(f_bayes)]^theta.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_stderr: f64,
    pub satisfied: bool,
}

/// Checks the variance bound by Monte Carlo over (X, Y) pairs. The check
/// passes when the left side is below the right side up to three standard
/// errors of the left-side estimate.
pub fn variance_bound_check<F: Fn(&[f64]) -> f64>(
    loss: &LossSpec,
    spec: &MixingSpec,
    model: &RegressionModel,
    f: &F,
    v: f64,
    theta: f64,
    m: usize,
    seed: u64,
) -> Result<VarianceCheck> {
    model.validate()?;
    if !(v > 0.0) {
        return Err(Error::config("variance constant V must be positive"));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::config("variance exponent theta must lie in [0, 1]"));
    }
    if m < 2 {
        return Err(Error::config("variance check needs at least two draws"));
    }
    let (xs, dim) = stationary_x_sample(spec, m, mix64(seed, 0))?;
    if dim != 1 {
        return Err(Error::config("variance check supports dim = 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed, 1));
    let mut diffs = Vec::with_capacity(m);
    let mut squares = Vec::with_capacity(m);
    for &x in &xs {
        let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let y = (model.target.eval(&[x]) + model.s_noise * u)
            .clamp(-model.m_bound, model.m_bound);
        let t = loss.clip(f(&[x]));
        let d = loss.loss_value(y, t) - loss.loss_value(y, loss.bayes_predictor(model, x));
        diffs.push(d);
        squares.push(d * d);
    }
    let (mean_diff, _) = mean_stderr(&diffs);
    let (lhs, lhs_stderr) = mean_stderr(&squares);
    let rhs = v * mean_diff.max(0.0).powf(theta);
    Ok(VarianceCheck {
        lhs,
        rhs,
        lhs_stderr,
        satisfied: lhs <= rhs + 3.0 * lhs_stderr + 1e-12,
    })
}
