//! Stationary sample-path generators for each supported dependence class.
//!
//! Every sampler starts the chain exactly in its stationary law (closed form
//! or linear solve, never burn-in), emits covariates in [-1, 1]^d and labels
//! in [-M, M], and is a pure function of (spec, model, n, seed). The Bayes
//! function and Bayes risk are known in closed form because the noise is
//! uniform on [-s, s]:
//!
//!   least squares:  f*(x) = target(x),            R* = s^2 / 3
//!   tau-pinball:    f*(x) = target(x) + s(2t-1),  R* = s t (1 - t)
//!
//! both stated for the unscaled losses.

use crate::error::{Error, Result};
use crate::stats::{integrate, mix64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Dependence classes distinguished by the tail-probability machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixingClass {
    Iid,
    GeoAlpha,
    RestrictedGeoAlpha,
    GeoAlphaMarkov,
    Phi,
    GeoC,
    PolyC,
}

/// Iterated interval maps with known invariant density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChaoticMap {
    /// u' = 4u(1-u); invariant density 1/(pi sqrt(u(1-u))) (arcsine).
    Logistic4,
    /// u' = 2 min(u, 1-u); invariant density uniform on [0, 1].
    Tent,
}

/// Class-specific process configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProcessParams {
    Iid {
        dim: usize,
    },
    Ar1 {
        a: f64,
    },
    Markov {
        matrix: Vec<Vec<f64>>,
        /// Explicit phi-mixing coefficients phi(1), phi(2), ... for the Phi
        /// class. When absent, the geometric majorant c * exp(-b k) built
        /// from the spec's decay constants is used instead.
        phi_sequence: Option<Vec<f64>>,
    },
    Map {
        map: ChaoticMap,
    },
}

/// A dependence class together with its decay constants and the concrete
/// process that realizes it. The decay alpha(n) <= c exp(-b n^gamma) for the
/// exponential classes; for PolyC the coefficients decay like c n^{-gamma}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub class: MixingClass,
    pub b: f64,
    pub c: f64,
    pub gamma: f64,
    pub params: ProcessParams,
}

/// Synthetic regression targets. All are bounded by their amplitude on
/// [-1, 1] and evaluate on the first coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    /// amplitude * sin(pi x): analytic, the default rate-experiment target.
    Sine { amplitude: f64 },
    /// amplitude * (1 - 2|x|): Lipschitz but not differentiable at 0.
    PiecewiseLinear { amplitude: f64 },
    /// amplitude * exp(1 - 1/(1 - x^2)) on |x| < 1, else 0: a compactly
    /// supported bump with very flat tails.
    Bump { amplitude: f64 },
}

impl Target {
    pub fn amplitude(&self) -> f64 {
        match *self {
            Target::Sine { amplitude }
            | Target::PiecewiseLinear { amplitude }
            | Target::Bump { amplitude } => amplitude,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x0 = x[0];
        match *self {
            Target::Sine { amplitude } => amplitude * (std::f64::consts::PI * x0).sin(),
            Target::PiecewiseLinear { amplitude } => amplitude * (1.0 - 2.0 * x0.abs()),
            Target::Bump { amplitude } => {
                if x0.abs() < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - x0 * x0)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Target, noise level, label bound, and the quantile level used by
/// pinball experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub target: Target,
    pub s_noise: f64,
    pub m_bound: f64,
    pub quantile_level: f64,
}

impl RegressionModel {
    pub fn validate(&self) -> Result<()> {
        if self.m_bound <= 0.0 {
            return Err(Error::config("label bound M must be positive"));
        }
        if self.s_noise < 0.0 {
            return Err(Error::config("noise halfwidth must be nonnegative"));
        }
        if !(0.0 < self.quantile_level && self.quantile_level < 1.0) {
            return Err(Error::config("quantile level must lie in (0, 1)"));
        }
        if self.target.amplitude() < 0.0 {
            return Err(Error::config("target amplitude must be nonnegative"));
        }
        if self.target.amplitude() + self.s_noise > self.m_bound + 1e-15 {
            return Err(Error::config(format!(
                "amplitude {} + noise {} exceeds label bound {}",
                self.target.amplitude(),
                self.s_noise,
                self.m_bound
            )));
        }
        Ok(())
    }

    /// Bayes predictor for least squares: the conditional mean.
    pub fn bayes_lsq(&self, x: &[f64]) -> f64 {
        self.target.eval(x)
    }

    /// Bayes predictor for the tau-pinball loss: the conditional quantile.
    pub fn bayes_pinball(&self, x: &[f64]) -> f64 {
        self.target.eval(x) + self.s_noise * (2.0 * self.quantile_level - 1.0)
    }

    /// Bayes risk of the unscaled least-squares loss.
    pub fn bayes_risk_lsq(&self) -> f64 {
        self.s_noise * self.s_noise / 3.0
    }

    /// Bayes risk of the unscaled tau-pinball loss.
    pub fn bayes_risk_pinball(&self) -> f64 {
        self.s_noise * self.quantile_level * (1.0 - self.quantile_level)
    }
}

/// A generated path: covariates (row-major n x dim), labels, and enough
/// metadata to recompute Bayes quantities and regenerate the path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePath {
    pub x: Vec<f64>,
    pub dim: usize,
    pub y: Vec<f64>,
    pub m_bound: f64,
    pub seed: u64,
    pub model: RegressionModel,
}

impl SamplePath {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

impl MixingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) {
            return Err(Error::config("decay rate b must be positive"));
        }
        if !(self.c >= 0.0) {
            return Err(Error::config("decay prefactor c must be nonnegative"));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::config("decay exponent gamma must be positive"));
        }
        if self.class == MixingClass::PolyC && self.gamma <= 2.0 {
            return Err(Error::config(
                "polynomial C-mixing requires decay exponent gamma > 2",
            ));
        }
        match (&self.class, &self.params) {
            (MixingClass::Iid, ProcessParams::Iid { dim }) => {
                if *dim == 0 {
                    return Err(Error::config("covariate dimension must be at least 1"));
                }
            }
            (MixingClass::GeoAlpha, ProcessParams::Ar1 { a }) => {
                if !(a.abs() < 1.0) {
                    return Err(Error::config("AR(1) coefficient must satisfy |a| < 1"));
                }
            }
            (
                MixingClass::GeoAlphaMarkov | MixingClass::Phi | MixingClass::RestrictedGeoAlpha,
                ProcessParams::Markov { matrix, .. },
            ) => {
                validate_stochastic_matrix(matrix)?;
            }
            (MixingClass::GeoC | MixingClass::PolyC, ProcessParams::Map { .. }) => {}
            _ => {
                return Err(Error::config(format!(
                    "process parameters do not match class {:?}",
                    self.class
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.params {
            ProcessParams::Iid { dim } => *dim,
            _ => 1,
        }
    }
}

fn validate_stochastic_matrix(p: &[Vec<f64>]) -> Result<()> {
    let k = p.len();
    if k < 2 {
        return Err(Error::config("transition matrix needs at least 2 states"));
    }
    for row in p {
        if row.len() != k {
            return Err(Error::config("transition matrix must be square"));
        }
        if row.iter().any(|&v| v < 0.0) {
            return Err(Error::config("transition probabilities must be nonnegative"));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "transition matrix row sums to {s}, not 1"
            )));
        }
    }
    // irreducible + aperiodic <=> the second-largest eigenvalue modulus is
    // strictly below 1
    if second_eigenvalue_modulus(p)? >= 1.0 - 1e-9 {
        return Err(Error::config(
            "transition matrix is reducible or periodic (second eigenvalue modulus is 1)",
        ));
    }
    Ok(())
}

/// Second-largest eigenvalue modulus of a stochastic matrix.
pub fn second_eigenvalue_modulus(p: &[Vec<f64>]) -> Result<f64> {
    let k = p.len();
    let m = nalgebra::DMatrix::from_fn(k, k, |i, j| p[i][j]);
    let eigs = m.complex_eigenvalues();
    let mut mods: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    mods.sort_by(|a, b| b.total_cmp(a));
    if (mods[0] - 1.0).abs() > 1e-8 {
        return Err(Error::numerical(
            "leading eigenvalue of a stochastic matrix should be 1",
        ));
    }
    Ok(mods[1])
}

/// Stationary distribution of an irreducible aperiodic chain, computed by
/// power iteration to an l1 residual below 1e-12.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    validate_stochastic_matrix(p)?;
    let k = p.len();
    let mut pi = vec![1.0 / k as f64; k];
    let mut next = vec![0.0; k];
    for _ in 0..1_000_000 {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        for i in 0..k {
            let w = pi[i];
            for j in 0..k {
                next[j] += w * p[i][j];
            }
        }
        let norm: f64 = next.iter().sum();
        for v in next.iter_mut() {
            *v /= norm;
        }
        let resid: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if resid < 1e-12 {
            return Ok(pi);
        }
    }
    Err(Error::numerical(
        "stationary distribution power iteration did not converge",
    ))
}

fn labels_from_x(
    model: &RegressionModel,
    x: &[f64],
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = x.len() / dim;
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let fx = model.target.eval(&x[i * dim..(i + 1) * dim]);
        let u = model.s_noise * (2.0 * rng.random::<f64>() - 1.0);
        // clamp guards the exact |y| <= M contract against rounding at the
        // extreme fx = amplitude, u = s corner
        y.push((fx + u).clamp(-model.m_bound, model.m_bound));
    }
    y
}

fn finish_path(
    model: &RegressionModel,
    x: Vec<f64>,
    dim: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> SamplePath {
    let y = labels_from_x(model, &x, dim, rng);
    SamplePath {
        x,
        dim,
        y,
        m_bound: model.m_bound,
        seed,
        model: *model,
    }
}

fn check_sampler_inputs(spec: &MixingSpec, model: &RegressionModel, n: usize) -> Result<()> {
    spec.validate()?;
    model.validate()?;
    if n == 0 {
        return Err(Error::config("path length must be at least 1"));
    }
    Ok(())
}

/// Independent covariates uniform on [-1, 1]^dim.
pub fn sample_iid(
    spec: &MixingSpec,
    model: &RegressionModel,
    n: usize,
    seed: u64,
) -> Result<SamplePath> {
    check_sampler_inputs(spec, model, n)?;
    let dim = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * dim);
    for _ in 0..n * dim {
        x.push(2.0 * rng.random::<f64>() - 1.0);
    }
    Ok(finish_path(model, x, dim, seed, &mut rng))
}

/// Gaussian AR(1) latent state squashed through tanh.
///
/// W_1 is drawn from the stationary law N(0, 1/(1-a^2)) so the whole path is
/// stationary; X_i = tanh(W_i) stays in (-1, 1).
pub fn sample_ar1(
    spec: &MixingSpec,
    model: &RegressionModel,
    n: usize,
    seed: u64,
) -> Result<SamplePath> {
    check_sampler_inputs(spec, model, n)?;
    let a = match spec.params {
        ProcessParams::Ar1 { a } => a,
        _ => return Err(Error::config("AR(1) sampler needs Ar1 parameters")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd0 = (1.0 / (1.0 - a * a)).sqrt();
    let mut w: f64 = sd0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
    let mut x = Vec::with_capacity(n);
    x.push(w.tanh());
    for _ in 1..n {
        let xi: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        w = a * w + xi;
        x.push(w.tanh());
    }
    Ok(finish_path(model, x, 1, seed, &mut rng))
}

/// Finite-state chain started from its stationary distribution; state j of k
/// is embedded as (2j - k + 1)/(k - 1) in [-1, 1].
pub fn sample_markov(
    spec: &MixingSpec,
    model: &RegressionModel,
    n: usize,
    seed: u64,
) -> Result<SamplePath> {
    check_sampler_inputs(spec, model, n)?;
    let matrix = match &spec.params {
        ProcessParams::Markov { matrix, .. } => matrix,
        _ => return Err(Error::config("Markov sampler needs a transition matrix")),
    };
    let pi = stationary_distribution(matrix)?;
    let k = matrix.len();
    let embed = |j: usize| (2.0 * j as f64 - k as f64 + 1.0) / (k as f64 - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = draw_categorical(&pi, &mut rng);
    let mut x = Vec::with_capacity(n);
    x.push(embed(state));
    for _ in 1..n {
        state = draw_categorical(&matrix[state], &mut rng);
        x.push(embed(state));
    }
    Ok(finish_path(model, x, 1, seed, &mut rng))
}

fn draw_categorical(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    weights.len() - 1
}

/// Advance a chaotic map one step without dithering.
pub fn map_step(map: ChaoticMap, u: f64) -> f64 {
    match map {
        ChaoticMap::Logistic4 => 4.0 * u * (1.0 - u),
        ChaoticMap::Tent => 2.0 * u.min(1.0 - u),
    }
}

/// Iterated interval map started from its invariant density.
///
/// Each step adds dither uniform on [0, 1e-12] (mod 1): in binary floating
/// point the exact orbits collapse onto short cycles, and the dither breaks
/// the cycles while perturbing each step far below statistical resolution.
/// The dither stream comes from the same seeded generator, so paths remain
/// reproducible.
pub fn sample_cmixing_map(
    spec: &MixingSpec,
    model: &RegressionModel,
    n: usize,
    seed: u64,
) -> Result<SamplePath> {
    check_sampler_inputs(spec, model, n)?;
    let map = match &spec.params {
        ProcessParams::Map { map } => *map,
        _ => return Err(Error::config("map sampler needs map parameters")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: f64 = match map {
        // invariant arcsine density via u = sin^2(pi v / 2), v uniform
        ChaoticMap::Logistic4 => {
            let v: f64 = rng.random();
            let s = (std::f64::consts::PI * v / 2.0).sin();
            s * s
        }
        ChaoticMap::Tent => rng.random(),
    };
    let mut x = Vec::with_capacity(n);
    x.push(2.0 * u - 1.0);
    for _ in 1..n {
        u = map_step(map, u) + 1e-12 * rng.random::<f64>();
        if u >= 1.0 {
            u -= 1.0;
        }
        x.push(2.0 * u - 1.0);
    }
    Ok(finish_path(model, x, 1, seed, &mut rng))
}

/// Dispatch to the sampler that realizes the spec's class. Finite-state
/// chains serve both the Phi and RestrictedGeoAlpha classes; the chaotic
/// maps serve both C-mixing classes.
pub fn sample(
    spec: &MixingSpec,
    model: &RegressionModel,
    n: usize,
    seed: u64,
) -> Result<SamplePath> {
    match spec.class {
        MixingClass::Iid => sample_iid(spec, model, n, seed),
        MixingClass::GeoAlpha => sample_ar1(spec, model, n, seed),
        MixingClass::GeoAlphaMarkov | MixingClass::Phi | MixingClass::RestrictedGeoAlpha => {
            sample_markov(spec, model, n, seed)
        }
        MixingClass::GeoC | MixingClass::PolyC => sample_cmixing_map(spec, model, n, seed),
    }
}

/// Draws m independent points from the stationary covariate marginal.
///
/// Risk is an expectation over the marginal, so independent draws are valid
/// evaluation points even for dependent processes. Returns row-major data
/// and the dimension.
pub fn stationary_x_sample(spec: &MixingSpec, m: usize, seed: u64) -> Result<(Vec<f64>, usize)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.dim();
    let mut out = Vec::with_capacity(m * dim);
    match &spec.params {
        ProcessParams::Iid { dim } => {
            for _ in 0..m * dim {
                out.push(2.0 * rng.random::<f64>() - 1.0);
            }
        }
        ProcessParams::Ar1 { a } => {
            let sd0 = (1.0 / (1.0 - a * a)).sqrt();
            for _ in 0..m {
                let w: f64 =
                    sd0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                out.push(w.tanh());
            }
        }
        ProcessParams::Markov { matrix, .. } => {
            let pi = stationary_distribution(matrix)?;
            let k = matrix.len();
            for _ in 0..m {
                let j = draw_categorical(&pi, &mut rng);
                out.push((2.0 * j as f64 - k as f64 + 1.0) / (k as f64 - 1.0));
            }
        }
        ProcessParams::Map { map } =>
        {
            #[allow(clippy::same_item_push)]
            for _ in 0..m {
                let u = match map {
                    ChaoticMap::Logistic4 => {
                        let v: f64 = rng.random();
                        let s = (std::f64::consts::PI * v / 2.0).sin();
                        s * s
                    }
                    ChaoticMap::Tent => rng.random(),
                };
                out.push(2.0 * u - 1.0);
            }
        }
    }
    Ok((out, dim))
}

/// Expectation of g(X) under the stationary covariate marginal, computed by
/// quadrature (or an exact finite sum for chains). Only one-dimensional
/// marginals are supported.
pub fn stationary_expectation<F: Fn(f64) -> f64>(spec: &MixingSpec, g: F) -> Result<f64> {
    spec.validate()?;
    if spec.dim() != 1 {
        return Err(Error::config(
            "stationary expectation is only available for scalar covariates",
        ));
    }
    match &spec.params {
        ProcessParams::Iid { .. } => Ok(integrate(&|x| 0.5 * g(x), -1.0, 1.0, 1e-13)),
        ProcessParams::Ar1 { a } => {
            let var = 1.0 / (1.0 - a * a);
            let sd = var.sqrt();
            let dens = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
            let f = |w: f64| dens * (-0.5 * w * w / var).exp() * g(w.tanh());
            Ok(integrate(&f, -10.0 * sd, 10.0 * sd, 1e-13))
        }
        ProcessParams::Markov { matrix, .. } => {
            let pi = stationary_distribution(matrix)?;
            let k = matrix.len();
            Ok(pi
                .iter()
                .enumerate()
                .map(|(j, &w)| w * g((2.0 * j as f64 - k as f64 + 1.0) / (k as f64 - 1.0)))
                .sum())
        }
        ProcessParams::Map { map } => match map {
            // substituting u = sin^2(pi v / 2) turns the arcsine integral
            // into a smooth one: x = 2u - 1 = -cos(pi v)
            ChaoticMap::Logistic4 => Ok(integrate(
                &|v: f64| g(-(std::f64::consts::PI * v).cos()),
                0.0,
                1.0,
                1e-13,
            )),
            ChaoticMap::Tent => Ok(integrate(&|u: f64| g(2.0 * u - 1.0), 0.0, 1.0, 1e-13)),
        },
    }
}

/// Curated demo process for each class, paired with the default regression
/// model (sine target, amplitude 0.8, noise 0.2, M = 1).
///
/// The decay constants are honest for the exactly analyzable processes:
/// the symmetric two-state chain with off-diagonal 0.45 has beta(n) and
/// phi(n) exactly 0.5 * 0.1^n, and the Gaussian AR(1) with a = 0.5 has
/// alpha(n) <= rho(n)/4 = 0.25 * exp(-n ln 2). The chaotic-map constants
/// are configuration, not derived quantities.
pub fn demo_process(class: MixingClass) -> (MixingSpec, RegressionModel) {
    let model = RegressionModel {
        target: Target::Sine { amplitude: 0.8 },
        s_noise: 0.2,
        m_bound: 1.0,
        quantile_level: 0.5,
    };
    let fast_chain = vec![vec![0.55, 0.45], vec![0.45, 0.55]];
    let spec = match class {
        MixingClass::Iid => MixingSpec {
            class,
            b: 1.0,
            c: 0.0,
            gamma: 1.0,
            params: ProcessParams::Iid { dim: 1 },
        },
        MixingClass::GeoAlpha => MixingSpec {
            class,
            b: std::f64::consts::LN_2,
            c: 0.25,
            gamma: 1.0,
            params: ProcessParams::Ar1 { a: 0.5 },
        },
        MixingClass::GeoAlphaMarkov => MixingSpec {
            class,
            b: 10f64.ln(),
            c: 0.5,
            gamma: 1.0,
            params: ProcessParams::Markov {
                matrix: fast_chain,
                phi_sequence: None,
            },
        },
        MixingClass::RestrictedGeoAlpha => MixingSpec {
            class,
            b: 10f64.ln(),
            c: 0.5,
            gamma: 1.0,
            params: ProcessParams::Markov {
                matrix: fast_chain,
                phi_sequence: None,
            },
        },
        MixingClass::Phi => MixingSpec {
            class,
            b: 10f64.ln(),
            c: 0.5,
            gamma: 1.0,
            params: ProcessParams::Markov {
                matrix: fast_chain,
                phi_sequence: None,
            },
        },
        MixingClass::GeoC => MixingSpec {
            class,
            b: 1.0,
            c: 0.01,
            gamma: 2.0,
            params: ProcessParams::Map {
                map: ChaoticMap::Logistic4,
            },
        },
        MixingClass::PolyC => MixingSpec {
            class,
            b: 1.0,
            c: 0.01,
            gamma: 3.0,
            params: ProcessParams::Map {
                map: ChaoticMap::Tent,
            },
        },
    };
    (spec, model)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    class: MixingClass,
    params: &'a ProcessParams,
    seed: u64,
    #[serde(rename = "M")]
    m_bound: f64,
    bayes_tag: Target,
    bayes_risk: f64,
}

/// Writes the path as CSV (header x1,...,xd,y) plus a JSON sidecar with the
/// generating configuration and the least-squares Bayes risk. Decimal
/// formatting is shortest-round-trip, so reading the CSV back reproduces the
/// exact binary values.
pub fn export_csv(path: &SamplePath, spec: &MixingSpec, csv_path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 0..path.dim {
        out.push_str(&format!("x{},", j + 1));
    }
    out.push_str("y\n");
    for i in 0..path.len() {
        for v in path.row(i) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", path.y[i]));
    }
    std::fs::File::create(csv_path)?.write_all(out.as_bytes())?;
    let sidecar = Sidecar {
        class: spec.class,
        params: &spec.params,
        seed: path.seed,
        m_bound: path.m_bound,
        bayes_tag: path.model.target,
        bayes_risk: path.model.bayes_risk_lsq(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::numerical(format!("sidecar serialization failed: {e}")))?;
    std::fs::write(csv_path.with_extension("json"), json)?;
    Ok(())
}

/// Parses CSV written by export_csv (or any x1..xd,y table).
pub fn parse_csv(text: &str) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::config("empty CSV input"))?;
    let cols = header.split(',').count();
    if cols < 2 {
        return Err(Error::config("CSV needs at least one covariate and y"));
    }
    let dim = cols - 1;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::config(format!(
                "CSV row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                cols
            )));
        }
        for f in &fields[..dim] {
            x.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config(format!("bad number in CSV: {e}")))?,
            );
        }
        y.push(
            fields[dim]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::config(format!("bad number in CSV: {e}")))?,
        );
    }
    Ok((x, dim, y))
}

/// Derives the per-cell seed for parallel experiment grids.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master, index)
}
