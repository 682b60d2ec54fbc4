//! Effective sample sizes, per-class Bernstein constants, exact mixing
//! coefficients for finite-state chains, and Monte-Carlo verification of the
//! tail inequality
//!
//!   P( (1/n) sum h(Z_i) >= eps ) <= C exp( -eps^2 n_eff / (c_sigma sigma^2 + c_B eps B) )
//!
//! valid for n >= n0, where (C, c_sigma, c_B, n0, n_eff) depend on the
//! dependence class and its decay constants.

use crate::error::{Error, Result};
use crate::processes::{
    sample, stationary_distribution, stationary_expectation, MixingClass, MixingSpec,
    ProcessParams, RegressionModel,
};
use crate::stats::{mix64, wilson_upper, WILSON_Z_999};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Free constants of the restricted geometric alpha-mixing tail bound. The
/// source statement only asserts their existence as functions of the decay
/// constants, so they are normalization conventions here, both fixed to 1.
pub const RESTRICTED_CB: f64 = 1.0;
pub const RESTRICTED_CC: f64 = 1.0;

/// Instantiated constants of the generalized Bernstein inequality.
///
/// n0 is kept as a real number: for slowly mixing chains the admissible
/// minimum exp(c_eps * sigma^{-2 eps/(2+eps)}) can exceed every integer type,
/// and the only use of n0 is the comparison n >= n0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinConstants {
    pub class: MixingClass,
    pub gamma: f64,
    pub leading_constant: f64,
    pub c_sigma: f64,
    pub c_range: f64,
    pub n0: f64,
}

/// Bounds on the centered test function h: sup-norm B, variance bound
/// sigma^2, the semi-norm bound A used by the C-mixing classes, and the free
/// Davydov parameter entering the Markov-type minimum sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HBounds {
    pub sup_bound: f64,
    pub sigma2: f64,
    pub seminorm_bound: f64,
    pub epsilon_dav: f64,
}

impl HBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.sup_bound > 0.0) {
            return Err(Error::config("sup-norm bound B must be positive"));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(Error::config("variance bound must be nonnegative"));
        }
        if self.sigma2 > self.sup_bound * self.sup_bound * (1.0 + 1e-12) {
            return Err(Error::config(
                "variance bound exceeds B^2, impossible for a centered bounded variable",
            ));
        }
        if !(self.seminorm_bound >= 0.0) {
            return Err(Error::config("semi-norm bound A must be nonnegative"));
        }
        if !(self.epsilon_dav > 0.0) {
            return Err(Error::config("Davydov parameter must be positive"));
        }
        Ok(())
    }
}

/// Effective number of observations for a class at sample size n.
///
/// IID and Phi keep n; geometric alpha-mixing pays n^{gamma/(gamma+1)};
/// the restricted variant n/(ln n)^2; Markov chains n/ln n; geometric
/// C-mixing n/(ln n)^{2/gamma}; polynomial C-mixing n^{(gamma-2)/(gamma+1)}.
pub fn effective_observations(class: MixingClass, gamma: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    let needs_log = matches!(
        class,
        MixingClass::RestrictedGeoAlpha | MixingClass::GeoAlphaMarkov | MixingClass::GeoC
    );
    if needs_log && n < 3 {
        return Err(Error::domain(format!(
            "effective observations for {class:?} needs n >= 3, got {n}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("effective observations needs n >= 1"));
    }
    match class {
        MixingClass::Iid | MixingClass::Phi => Ok(nf),
        MixingClass::GeoAlpha => {
            if !(gamma > 0.0) {
                return Err(Error::domain("gamma must be positive"));
            }
            Ok(nf.powf(gamma / (gamma + 1.0)))
        }
        MixingClass::RestrictedGeoAlpha => Ok(nf / nf.ln().powi(2)),
        MixingClass::GeoAlphaMarkov => Ok(nf / nf.ln()),
        MixingClass::GeoC => {
            if !(gamma > 0.0) {
                return Err(Error::domain("gamma must be positive"));
            }
            Ok(nf / nf.ln().powf(2.0 / gamma))
        }
        MixingClass::PolyC => {
            if gamma <= 2.0 {
                return Err(Error::domain(
                    "polynomial C-mixing requires gamma > 2 for a positive rate",
                ));
            }
            Ok(nf.powf((gamma - 2.0) / (gamma + 1.0)))
        }
    }
}

/// The geometric-series constant controlling the Markov-type minimum sample
/// sizes: 16 c^{e/(2+e)} B^{2e/(2+e)} sum_{i>=1} exp(-b e i / (2+e)) with
/// the series summed in closed form.
pub fn davydov_constant(c: f64, b: f64, sup_bound: f64, eps: f64) -> f64 {
    let w = eps / (2.0 + eps);
    let q = (-b * eps / (2.0 + eps)).exp();
    16.0 * c.powf(w) * sup_bound.powf(2.0 * w) * q / (1.0 - q)
}

/// Instantiates (C, c_sigma, c_B, n0) for the spec's class.
pub fn bernstein_constants(spec: &MixingSpec, h: &HBounds) -> Result<BernsteinConstants> {
    spec.validate()?;
    h.validate()?;
    let (b, c, gamma) = (spec.b, spec.c, spec.gamma);
    let (leading_constant, c_sigma, c_range, n0) = match spec.class {
        MixingClass::Iid => (1.0, 2.0, 2.0 / 3.0, 1.0),
        MixingClass::GeoAlpha => {
            let cs = (8f64.powf(2.0 + gamma) / b).powf(1.0 / (1.0 + gamma));
            let n0 = (b / 8.0).max(2f64.powf(2.0 + 5.0 / gamma) * b.powf(-1.0 / gamma));
            (1.0 + 4.0 * (-2.0f64).exp() * c, cs, cs / 3.0, n0.max(1.0))
        }
        MixingClass::RestrictedGeoAlpha => {
            if gamma < 1.0 {
                return Err(Error::domain(
                    "restricted geometric alpha-mixing requires gamma >= 1",
                ));
            }
            if h.sigma2 < 1e-12 {
                return Err(Error::domain(
                    "variance bound below 1e-12: the minimum sample size diverges",
                ));
            }
            let eps = h.epsilon_dav;
            let ce = davydov_constant(c, b, h.sup_bound, eps);
            let sigma = h.sigma2.sqrt();
            let n0 = 3f64
                .max((ce.sqrt() * sigma.powf(-eps / (2.0 + eps))).exp())
                .max(h.sup_bound * h.sup_bound / h.sigma2);
            (RESTRICTED_CC, 3.0 / RESTRICTED_CB, 1.0 / RESTRICTED_CB, n0)
        }
        MixingClass::GeoAlphaMarkov => {
            if h.sigma2 < 1e-12 {
                return Err(Error::domain(
                    "variance bound below 1e-12: the minimum sample size diverges",
                ));
            }
            let eps = h.epsilon_dav;
            let ce = davydov_constant(c, b, h.sup_bound, eps);
            let sigma = h.sigma2.sqrt();
            let n0 = 3f64.max((ce * sigma.powf(-2.0 * eps / (2.0 + eps))).exp());
            (1.0, 2.0, 1.0, n0)
        }
        MixingClass::Phi => {
            let c_phi = phi_series_constant(spec)?;
            (1.0, 32.0 * c_phi, 8.0 * c_phi, 1.0)
        }
        MixingClass::GeoC => {
            let a = h.seminorm_bound;
            let thresh = 808.0 * c * (3.0 * a + h.sup_bound) / h.sup_bound;
            let m = smallest_admissible_m(thresh, 2.0 / gamma)?;
            (2.0, 8.0, 8.0 / 3.0, (m as f64).max((3.0 / b).exp()))
        }
        MixingClass::PolyC => {
            let a = h.seminorm_bound;
            let thresh = 808.0 * c * (3.0 * a + h.sup_bound) / h.sup_bound;
            let n0 = thresh
                .sqrt()
                .max(4f64.powf((gamma + 1.0) / (gamma - 2.0)))
                .max(1.0);
            (2.0, 8.0, 8.0 / 3.0, n0)
        }
    };
    Ok(BernsteinConstants {
        class: spec.class,
        gamma,
        leading_constant,
        c_sigma,
        c_range,
        n0,
    })
}

/// The part of the minimum sample size determined by the decay constants
/// alone. The full minimum from bernstein_constants can be larger because it
/// also depends on the test function; this floor is what a sample-size grid
/// can be checked against before any test function is fixed.
pub fn class_sample_floor(spec: &MixingSpec) -> Result<f64> {
    spec.validate()?;
    let (b, c, gamma) = (spec.b, spec.c, spec.gamma);
    Ok(match spec.class {
        MixingClass::Iid | MixingClass::Phi => 1.0,
        MixingClass::GeoAlpha => (b / 8.0)
            .max(2f64.powf(2.0 + 5.0 / gamma) * b.powf(-1.0 / gamma))
            .max(1.0),
        MixingClass::RestrictedGeoAlpha | MixingClass::GeoAlphaMarkov => 3.0,
        // (3A + B)/B >= 1, so 808 c lower-bounds the threshold of the m-scan
        MixingClass::GeoC => {
            let m = smallest_admissible_m(808.0 * c, 2.0 / gamma)?;
            (m as f64).max((3.0 / b).exp())
        }
        MixingClass::PolyC => (808.0 * c)
            .sqrt()
            .max(4f64.powf((gamma + 1.0) / (gamma - 2.0)))
            .max(1.0),
    })
}

/// Smallest integer m >= 3 with m^2 >= thresh and m/(ln m)^k >= 4.
///
/// The second constraint is not monotone in m (the left side dips before
/// growing), so the search walks forward, jumping to ceil(4 (ln m)^k) while
/// inside the dip. The jump target never passes the crossing point because
/// 4 (ln m)^k is increasing and below m there.
fn smallest_admissible_m(thresh: f64, k: f64) -> Result<u64> {
    let mut m = 3u64.max(thresh.sqrt().ceil() as u64);
    for _ in 0..10_000 {
        let mf = m as f64;
        if mf * mf >= thresh && mf / mf.ln().powf(k) >= 4.0 {
            return Ok(m);
        }
        let jump = (4.0 * mf.ln().powf(k)).ceil() as u64;
        m = (m + 1).max(jump);
    }
    Err(Error::numerical(
        "minimum sample size search did not terminate",
    ))
}

/// c_phi = sum_{k>=1} sqrt(phi(k)), from an explicit coefficient sequence
/// (extended geometrically past its last entries, tail below relative 1e-12)
/// or from the majorant phi(k) <= c exp(-b k) in closed form.
fn phi_series_constant(spec: &MixingSpec) -> Result<f64> {
    let phi_sequence = match &spec.params {
        ProcessParams::Markov { phi_sequence, .. } => phi_sequence.as_ref(),
        _ => None,
    };
    match phi_sequence {
        None => {
            if spec.c <= 0.0 {
                return Err(Error::domain(
                    "phi-mixing majorant needs a positive prefactor c",
                ));
            }
            let q = (-spec.b / 2.0).exp();
            Ok(spec.c.sqrt() * q / (1.0 - q))
        }
        Some(seq) => {
            if seq.is_empty() {
                return Err(Error::config("phi coefficient sequence is empty"));
            }
            if seq.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::config(
                    "phi coefficients must lie in [0, 1]",
                ));
            }
            let partial: f64 = seq.iter().map(|&v| v.sqrt()).sum();
            let l = seq.len();
            let last = seq[l - 1].sqrt();
            if last == 0.0 {
                return Ok(partial);
            }
            let ratio = if l >= 2 && seq[l - 2] > 0.0 {
                (seq[l - 1] / seq[l - 2]).sqrt()
            } else {
                // single positive entry: no decay information, refuse
                return Err(Error::domain(
                    "phi sequence too short to certify a convergent tail",
                ));
            };
            if ratio >= 1.0 {
                return Err(Error::domain(
                    "phi coefficient series does not converge (non-decreasing tail)",
                ));
            }
            let tail = last * ratio / (1.0 - ratio);
            if tail > 1e-12 * (partial + tail) {
                // extend explicitly until the geometric tail is negligible
                let mut total = partial;
                let mut term = last * ratio;
                for _ in 0..10_000_000 {
                    total += term;
                    term *= ratio;
                    if term <= 1e-12 * total {
                        return Ok(total);
                    }
                }
                return Err(Error::domain("phi coefficient tail converges too slowly"));
            }
            Ok(partial + tail)
        }
    }
}

fn check_min_sample(k: &BernsteinConstants, n: usize) -> Result<f64> {
    if (n as f64) < k.n0 {
        return Err(Error::domain(format!(
            "n = {n} is below the minimum sample size n0 = {:.6} for class {:?}",
            k.n0, k.class
        )));
    }
    effective_observations(k.class, k.gamma, n)
}

/// Tail probability bound C exp(-eps^2 n_eff / (c_sigma sigma^2 + c_B eps B)).
/// The raw value is returned even when it exceeds 1.
pub fn bernstein_bound(k: &BernsteinConstants, h: &HBounds, n: usize, eps: f64) -> Result<f64> {
    h.validate()?;
    if !(eps > 0.0) {
        return Err(Error::domain("threshold eps must be positive"));
    }
    let n_eff = check_min_sample(k, n)?;
    let denom = k.c_sigma * h.sigma2 + k.c_range * eps * h.sup_bound;
    Ok(k.leading_constant * (-eps * eps * n_eff / denom).exp())
}

/// Threshold form of the same inequality: the returned value t satisfies
/// P((1/n) sum h >= t) <= C exp(-tau).
pub fn bernstein_bound_tau_form(
    k: &BernsteinConstants,
    h: &HBounds,
    n: usize,
    tau: f64,
) -> Result<f64> {
    h.validate()?;
    if !(tau > 0.0) {
        return Err(Error::domain("tau must be positive"));
    }
    let n_eff = check_min_sample(k, n)?;
    Ok((tau * k.c_sigma * h.sigma2 / n_eff).sqrt() + k.c_range * h.sup_bound * tau / n_eff)
}

/// Exact inverse of bernstein_bound_tau_form in tau: recovers the tau whose
/// threshold equals eps, by solving the quadratic r t^2 + sqrt(s) t = eps in
/// t = sqrt(tau).
pub fn tau_for_threshold(k: &BernsteinConstants, h: &HBounds, n: usize, eps: f64) -> Result<f64> {
    h.validate()?;
    if !(eps > 0.0) {
        return Err(Error::domain("threshold eps must be positive"));
    }
    let n_eff = check_min_sample(k, n)?;
    let s = k.c_sigma * h.sigma2 / n_eff;
    let r = k.c_range * h.sup_bound / n_eff;
    let t = if s == 0.0 {
        (eps / r).sqrt()
    } else {
        // numerically stable positive root
        2.0 * eps / (s.sqrt() + (s + 4.0 * r * eps).sqrt())
    };
    Ok(t * t)
}

/// The eps at which bernstein_bound equals the requested level exactly
/// (levels at or above the leading constant have no positive solution).
pub fn threshold_for_bound(
    k: &BernsteinConstants,
    h: &HBounds,
    n: usize,
    level: f64,
) -> Result<f64> {
    h.validate()?;
    if !(level > 0.0 && level < k.leading_constant) {
        return Err(Error::domain(
            "bound level must lie strictly between 0 and the leading constant",
        ));
    }
    let n_eff = check_min_sample(k, n)?;
    let t = (k.leading_constant / level).ln();
    let s = k.c_sigma * h.sigma2 / n_eff;
    let r = k.c_range * h.sup_bound / n_eff;
    // eps^2 = t (s + r eps)
    Ok((t * r + (t * t * r * r + 4.0 * t * s).sqrt()) / 2.0)
}

/// Exact beta-mixing coefficient of a finite-state chain at gap n:
/// beta(n) = sum_x pi(x) (1/2) sum_y |P^n(x,y) - pi(y)|.
pub fn markov_beta_coefficient(p: &[Vec<f64>], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::config("gap must be at least 1"));
    }
    let pi = stationary_distribution(p)?;
    let k = p.len();
    let pn = matrix_power(p, n);
    let mut beta = 0.0;
    for x in 0..k {
        let mut tv = 0.0;
        for y in 0..k {
            tv += (pn[x][y] - pi[y]).abs();
        }
        beta += pi[x] * 0.5 * tv;
    }
    Ok(beta)
}

fn matrix_power(p: &[Vec<f64>], mut n: usize) -> Vec<Vec<f64>> {
    let k = p.len();
    let mut result: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut base = p.to_vec();
    while n > 0 {
        if n & 1 == 1 {
            result = mat_mul(&result, &base);
        }
        base = mat_mul(&base, &base);
        n >>= 1;
    }
    result
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for l in 0..k {
            let v = a[i][l];
            for j in 0..k {
                out[i][j] += v * b[l][j];
            }
        }
    }
    out
}

/// Built-in centered test functions with moments known in closed form or by
/// quadrature against the stationary marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinH {
    /// h(x, y) = x - E[x]
    CenteredX,
    /// h(x, y) = y^2 - E[y^2]
    CenteredYSquared,
}

/// A built-in h with its stationary mean and exact bounds.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedH {
    pub kind: BuiltinH,
    pub mean: f64,
    pub bounds: HBounds,
}

impl ResolvedH {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            BuiltinH::CenteredX => x - self.mean,
            BuiltinH::CenteredYSquared => y * y - self.mean,
        }
    }
}

/// Computes the stationary mean and (exact) variance and range bounds of a
/// built-in test function for the given process. epsilon_dav and the
/// semi-norm bound A are free configuration and passed through.
pub fn resolve_h(
    kind: BuiltinH,
    spec: &MixingSpec,
    model: &RegressionModel,
    epsilon_dav: f64,
    seminorm_bound: f64,
) -> Result<ResolvedH> {
    model.validate()?;
    match kind {
        BuiltinH::CenteredX => {
            let mean = stationary_expectation(spec, |x| x)?;
            let second = stationary_expectation(spec, |x| x * x)?;
            let sigma2 = (second - mean * mean).max(0.0);
            let sup_bound = (1.0 + mean.abs()).max(1e-12);
            Ok(ResolvedH {
                kind,
                mean,
                bounds: HBounds {
                    sup_bound,
                    sigma2: sigma2.min(sup_bound * sup_bound),
                    seminorm_bound,
                    epsilon_dav,
                },
            })
        }
        BuiltinH::CenteredYSquared => {
            let t = model.target;
            let s = model.s_noise;
            let f2 = stationary_expectation(spec, |x| t.eval(&[x]).powi(2))?;
            let f4 = stationary_expectation(spec, |x| t.eval(&[x]).powi(4))?;
            // y = f*(X) + U with U uniform on [-s, s] independent of X
            let mean = f2 + s * s / 3.0;
            let fourth = f4 + 2.0 * f2 * s * s + s.powi(4) / 5.0;
            let sigma2 = (fourth - mean * mean).max(0.0);
            let m2 = model.m_bound * model.m_bound;
            let sup_bound = mean.max(m2 - mean).max(1e-12);
            Ok(ResolvedH {
                kind,
                mean,
                bounds: HBounds {
                    sup_bound,
                    sigma2: sigma2.min(sup_bound * sup_bound),
                    seminorm_bound,
                    epsilon_dav,
                },
            })
        }
    }
}

/// One row of the Monte-Carlo verification table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VerifyRow {
    pub eps: f64,
    pub empirical_tail: f64,
    pub wilson_upper: f64,
    pub bound: f64,
}

/// Simulates reps independent paths of length n and compares the empirical
/// tail frequency of the centered mean against the theoretical bound at each
/// grid point. The Wilson column is the one-sided 0.999 upper confidence
/// limit for the tail probability.
///
/// Replications are farmed out in fixed-size blocks with per-replication
/// derived seeds; the counts are exact integers, so the result is identical
/// for every thread count.
#[allow(clippy::too_many_arguments)]
pub fn verify_bernstein_mc(
    spec: &MixingSpec,
    model: &RegressionModel,
    h_def: BuiltinH,
    n: usize,
    eps_grid: &[f64],
    reps: usize,
    seed: u64,
    epsilon_dav: f64,
    seminorm_bound: f64,
) -> Result<Vec<VerifyRow>> {
    if eps_grid.is_empty() {
        return Err(Error::config("eps grid must be nonempty"));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::config("eps grid entries must be positive"));
    }
    if reps < 1_000 {
        return Err(Error::config("at least 1000 replications are required"));
    }
    let resolved = resolve_h(h_def, spec, model, epsilon_dav, seminorm_bound)?;
    let constants = bernstein_constants(spec, &resolved.bounds)?;
    check_min_sample(&constants, n)?;

    const BLOCK: usize = 256;
    let blocks = reps.div_ceil(BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let lo = blk * BLOCK;
            let hi = (lo + BLOCK).min(reps);
            let mut local = vec![0u64; eps_grid.len()];
            for rep in lo..hi {
                let path = sample(spec, model, n, mix64(seed, rep as u64))
                    .expect("validated spec cannot fail to sample");
                let mut acc = 0.0;
                for i in 0..n {
                    acc += resolved.eval(path.x[i], path.y[i]);
                }
                let mean = acc / n as f64;
                for (j, &eps) in eps_grid.iter().enumerate() {
                    if mean >= eps {
                        local[j] += 1;
                    }
                }
            }
            local
        })
        .reduce(
            || vec![0u64; eps_grid.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );

    eps_grid
        .iter()
        .zip(&counts)
        .map(|(&eps, &cnt)| {
            Ok(VerifyRow {
                eps,
                empirical_tail: cnt as f64 / reps as f64,
                wilson_upper: wilson_upper(cnt, reps as u64, WILSON_Z_999),
                bound: bernstein_bound(&constants, &resolved.bounds, n, eps)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::demo_process;
    use proptest::prelude::*;

    fn demo_h(class: MixingClass) -> (MixingSpec, RegressionModel, ResolvedH) {
        let (spec, model) = demo_process(class);
        // Davydov parameter 4 keeps the chain-class minimum sample sizes at
        // desk scale; A = 1 is the demo semi-norm bound
        let h = resolve_h(BuiltinH::CenteredX, &spec, &model, 4.0, 1.0).unwrap();
        (spec, model, h)
    }

    #[test]
    fn effective_observations_table_values() {
        assert_eq!(
            effective_observations(MixingClass::Iid, 1.0, 1000).unwrap(),
            1000.0
        );
        assert!(
            (effective_observations(MixingClass::GeoAlpha, 1.0, 10_000).unwrap() - 100.0).abs()
                < 1e-9
        );
        // 1000 / ln 1000 with ln 1000 = 3 ln 10
        let expect = 1000.0 / (3.0 * std::f64::consts::LN_10);
        let got = effective_observations(MixingClass::GeoAlphaMarkov, 1.0, 1000).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 144.76482730108395).abs() < 1e-9);
    }

    #[test]
    fn effective_observations_domain_errors() {
        assert!(effective_observations(MixingClass::PolyC, 2.0, 100).is_err());
        assert!(effective_observations(MixingClass::GeoAlphaMarkov, 1.0, 2).is_err());
        assert!(effective_observations(MixingClass::RestrictedGeoAlpha, 1.0, 2).is_err());
    }

    #[test]
    fn geo_alpha_constants_closed_form() {
        let spec = MixingSpec {
            class: MixingClass::GeoAlpha,
            b: 8.0,
            c: 1.0,
            gamma: 1.0,
            params: ProcessParams::Ar1 { a: 0.5 },
        };
        let h = HBounds {
            sup_bound: 1.0,
            sigma2: 1.0,
            seminorm_bound: 0.0,
            epsilon_dav: 1.0,
        };
        let k = bernstein_constants(&spec, &h).unwrap();
        // c_sigma = (8^3 / 8)^{1/2} = 8, c_B = 8/3, C = 1 + 4 e^{-2},
        // n0 = max(1, 2^7 / 8) = 16
        assert!((k.c_sigma - 8.0).abs() < 1e-12);
        assert!((k.c_range - 8.0 / 3.0).abs() < 1e-12);
        assert!((k.leading_constant - 1.5413411329464508).abs() < 1e-12);
        assert!((k.n0 - 16.0).abs() < 1e-12);
    }

    #[test]
    fn geo_c_constants_and_minimum_sample_size() {
        let (spec, _, h) = demo_h(MixingClass::GeoC);
        let k = bernstein_constants(&spec, &h.bounds).unwrap();
        assert_eq!(k.leading_constant, 2.0);
        assert_eq!(k.c_sigma, 8.0);
        assert!((k.c_range - 8.0 / 3.0).abs() < 1e-12);
        // demo constants b=1, c=0.01, A=1, B=1: the m-search needs
        // m^2 >= 808*0.01*4 = 32.3 and m/ln m >= 4, first met at m = 9,
        // while exp(3/b) = e^3 = 20.0855 dominates
        assert!((k.n0 - 3f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn admissible_m_search_handles_the_dip() {
        // k = 1: f(m) = m / ln m is below 4 from m = 3 through m = 8
        assert_eq!(smallest_admissible_m(0.0, 1.0).unwrap(), 9);
        // large threshold puts the start past the dip
        assert_eq!(smallest_admissible_m(10_000.0, 1.0).unwrap(), 100);
        // zero exponent: constraint is exactly m >= 4
        assert_eq!(smallest_admissible_m(0.0, 0.0).unwrap(), 4);
        // any positive exponent makes 4 itself fall just short
        assert_eq!(smallest_admissible_m(0.0, 1e-9).unwrap(), 5);
    }

    #[test]
    fn markov_minimum_sample_size_geometric_series() {
        let spec = MixingSpec {
            class: MixingClass::GeoAlphaMarkov,
            b: 1.0,
            c: 1.0,
            gamma: 1.0,
            params: ProcessParams::Markov {
                matrix: vec![vec![0.55, 0.45], vec![0.45, 0.55]],
                phi_sequence: None,
            },
        };
        let h = HBounds {
            sup_bound: 1.0,
            sigma2: 0.25,
            seminorm_bound: 0.0,
            epsilon_dav: 1.0,
        };
        let k = bernstein_constants(&spec, &h).unwrap();
        assert_eq!(k.leading_constant, 1.0);
        assert_eq!(k.c_sigma, 2.0);
        assert_eq!(k.c_range, 1.0);
        // c_eps = 16 e^{-1/3} / (1 - e^{-1/3}), sigma^{-2/3} = 0.25^{-1/3}
        let q = (-1.0f64 / 3.0).exp();
        let c_eps = 16.0 * q / (1.0 - q);
        assert!((davydov_constant(1.0, 1.0, 1.0, 1.0) - c_eps).abs() < 1e-12);
        let expect_ln_n0 = c_eps * 0.25f64.powf(-1.0 / 3.0);
        assert!((k.n0.ln() - expect_ln_n0).abs() < 1e-9 * expect_ln_n0);
    }

    #[test]
    fn restricted_requires_gamma_at_least_one_and_positive_variance() {
        let (mut spec, _, h) = demo_h(MixingClass::RestrictedGeoAlpha);
        spec.gamma = 0.5;
        assert!(bernstein_constants(&spec, &h.bounds).is_err());
        spec.gamma = 1.0;
        let mut tiny = h.bounds;
        tiny.sigma2 = 1e-13;
        assert!(bernstein_constants(&spec, &tiny).is_err());
        let k = bernstein_constants(&spec, &h.bounds).unwrap();
        assert_eq!(k.leading_constant, RESTRICTED_CC);
        assert_eq!(k.c_sigma, 3.0 / RESTRICTED_CB);
        assert_eq!(k.c_range, 1.0 / RESTRICTED_CB);
        assert!(k.n0 <= 500.0, "demo chain must admit n = 500, n0 = {}", k.n0);
    }

    #[test]
    fn phi_constant_from_majorant_and_sequence() {
        let (spec, _, h) = demo_h(MixingClass::Phi);
        let k = bernstein_constants(&spec, &h.bounds).unwrap();
        // majorant c = 0.5, b = ln 10: c_phi = sqrt(0.5) q/(1-q), q = 10^{-1/2}
        let q = 0.1f64.sqrt();
        let c_phi = 0.5f64.sqrt() * q / (1.0 - q);
        assert!((k.c_sigma - 32.0 * c_phi).abs() < 1e-12);
        assert!((k.c_range - 8.0 * c_phi).abs() < 1e-12);
        assert_eq!(k.n0, 1.0);

        // explicit sequence matching the same geometric law gives the same
        // constant through the tail-extension path
        let seq: Vec<f64> = (1..=6).map(|i| 0.5 * 0.1f64.powi(i)).collect();
        let mut spec2 = spec.clone();
        if let ProcessParams::Markov { phi_sequence, .. } = &mut spec2.params {
            *phi_sequence = Some(seq);
        }
        let k2 = bernstein_constants(&spec2, &h.bounds).unwrap();
        assert!((k2.c_sigma - k.c_sigma).abs() < 1e-9 * k.c_sigma);

        // non-decreasing tail diverges
        let mut spec3 = spec;
        if let ProcessParams::Markov { phi_sequence, .. } = &mut spec3.params {
            *phi_sequence = Some(vec![0.5, 0.5, 0.5]);
        }
        assert!(bernstein_constants(&spec3, &h.bounds).is_err());
    }

    #[test]
    fn bound_matches_iid_substitution() {
        let (_, _, h0) = demo_h(MixingClass::Iid);
        let k = BernsteinConstants {
            class: MixingClass::Iid,
            gamma: 1.0,
            leading_constant: 1.0,
            c_sigma: 2.0,
            c_range: 2.0 / 3.0,
            n0: 1.0,
        };
        let h = HBounds {
            sigma2: 1.0,
            sup_bound: 1.0,
            ..h0.bounds
        };
        let got = bernstein_bound(&k, &h, 100, 0.5).unwrap();
        // 0.25 * 100 / (2 + 1/3) = 75/7
        assert!((got - (-75.0f64 / 7.0).exp()).abs() < 1e-18);
        // huge eps: super-exponentially small
        assert!(bernstein_bound(&k, &h, 100, 1e6).unwrap() < 1e-100);
        // below the minimum sample size
        let k16 = BernsteinConstants { n0: 16.0, ..k };
        assert!(bernstein_bound(&k16, &h, 15, 0.5).is_err());
    }

    #[test]
    fn tau_form_iid_value() {
        let k = BernsteinConstants {
            class: MixingClass::Iid,
            gamma: 1.0,
            leading_constant: 1.0,
            c_sigma: 2.0,
            c_range: 2.0 / 3.0,
            n0: 1.0,
        };
        let h = HBounds {
            sup_bound: 1.0,
            sigma2: 1.0,
            seminorm_bound: 0.0,
            epsilon_dav: 1.0,
        };
        let t = bernstein_bound_tau_form(&k, &h, 100, 1.0).unwrap();
        assert!((t - (0.02f64.sqrt() + 2.0 / 300.0)).abs() < 1e-15);
        assert!((t - 0.14808802290397618).abs() < 1e-12);
        // tau -> 0 limit
        assert!(bernstein_bound_tau_form(&k, &h, 100, 1e-300).unwrap() < 1e-140);
    }

    #[test]
    fn tau_round_trip_is_conservative_and_threshold_inverts_exactly() {
        for class in [
            MixingClass::Iid,
            MixingClass::GeoAlphaMarkov,
            MixingClass::GeoC,
            MixingClass::Phi,
        ] {
            let (spec, _, h) = demo_h(class);
            let k = bernstein_constants(&spec, &h.bounds).unwrap();
            for tau in [0.1, 0.5, 1.0, 3.0, 10.0] {
                let thr = bernstein_bound_tau_form(&k, &h.bounds, 500, tau).unwrap();
                let p = bernstein_bound(&k, &h.bounds, 500, thr).unwrap();
                let claim = k.leading_constant * (-tau).exp();
                // plugging the threshold back in can only sharpen the bound
                assert!(p <= claim * (1.0 + 1e-9), "{class:?}: {p} vs {claim}");
                // and the quadratic inverse recovers tau exactly
                let tau_back = tau_for_threshold(&k, &h.bounds, 500, thr).unwrap();
                assert!(
                    (tau_back - tau).abs() <= 1e-9 * tau,
                    "{class:?}: {tau_back} vs {tau}"
                );
            }
            for level in [0.9, 0.1, 1e-3] {
                let eps = threshold_for_bound(&k, &h.bounds, 500, level).unwrap();
                let p = bernstein_bound(&k, &h.bounds, 500, eps).unwrap();
                assert!((p - level).abs() < 1e-9 * level);
            }
        }
    }

    #[test]
    fn beta_coefficient_oracle_values() {
        // one-step independence
        let uniform = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert!(markov_beta_coefficient(&uniform, 1).unwrap() < 1e-15);

        // pi = (2/3, 1/3); row TV distances 7/15 and 14/15 halve and average
        // to 14/45
        let p = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let b1 = markov_beta_coefficient(&p, 1).unwrap();
        assert!((b1 - 14.0 / 45.0).abs() < 1e-10);

        // two-state chains decay exactly like the second eigenvalue
        for n in 1..=10 {
            let bn = markov_beta_coefficient(&p, n).unwrap();
            assert!((bn - b1 * 0.7f64.powi(n as i32 - 1)).abs() < 1e-12);
        }
        // the demo chain is beta(n) = 0.5 * 0.1^n on the nose; the absolute
        // term covers accumulated rounding once beta is near 1e-9
        let fast = vec![vec![0.55, 0.45], vec![0.45, 0.55]];
        for n in 1..=10 {
            let bn = markov_beta_coefficient(&fast, n).unwrap();
            let expect = 0.5 * 0.1f64.powi(n as i32);
            assert!((bn - expect).abs() < 1e-9 * expect + 1e-15, "n = {n}");
        }
    }

    #[test]
    fn beta_coefficient_monotone_and_geometric() {
        let p = vec![
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.2, 0.7],
        ];
        let mut prev = f64::INFINITY;
        let mut logs = Vec::new();
        let mut gaps = Vec::new();
        for n in 1..=50 {
            let b = markov_beta_coefficient(&p, n).unwrap();
            assert!(b <= prev + 1e-15, "beta must be non-increasing");
            prev = b;
            // below 1e-10 the repeated-squaring rounding floor flattens the
            // decay, so the fit stops there
            if b > 1e-10 {
                gaps.push(n as f64);
                logs.push(b.ln());
            }
        }
        assert!(gaps.len() >= 20);
        let (slope, _, _) = crate::stats::ols_line(&gaps, &logs);
        let lambda2 = crate::processes::second_eigenvalue_modulus(&p).unwrap();
        assert!(slope <= lambda2.ln() + 1e-6, "slope {slope} vs {}", lambda2.ln());

        // a chain whose deviation from stationarity is rank one decays
        // exactly geometrically, so the fitted slope equals log lambda2
        let teleport = vec![
            vec![0.6, 0.2, 0.2],
            vec![0.2, 0.6, 0.2],
            vec![0.2, 0.2, 0.6],
        ];
        let logs: Vec<f64> = (1..=12)
            .map(|n| markov_beta_coefficient(&teleport, n).unwrap().ln())
            .collect();
        let ns: Vec<f64> = (1..=12).map(|n| n as f64).collect();
        let (slope, _, _) = crate::stats::ols_line(&ns, &logs);
        let lambda2 = crate::processes::second_eigenvalue_modulus(&teleport).unwrap();
        assert!((slope - lambda2.ln()).abs() < 1e-9);
    }

    #[test]
    fn resolved_h_moments_match_closed_forms() {
        let (spec, model) = demo_process(MixingClass::Iid);
        let hx = resolve_h(BuiltinH::CenteredX, &spec, &model, 1.0, 0.0).unwrap();
        assert!(hx.mean.abs() < 1e-12);
        assert!((hx.bounds.sigma2 - 1.0 / 3.0).abs() < 1e-10);
        assert!((hx.bounds.sup_bound - 1.0).abs() < 1e-10);

        // E y^2 = a^2/2 + s^2/3 for the sine target on uniform x
        let hy = resolve_h(BuiltinH::CenteredYSquared, &spec, &model, 1.0, 0.0).unwrap();
        let a2 = 0.8f64 * 0.8;
        let expect_mean = a2 / 2.0 + 0.04 / 3.0;
        assert!((hy.mean - expect_mean).abs() < 1e-10);
        // E y^4 = 3 a^4/8 + 2 (a^2/2) s^2 + s^4/5 (E sin^4 = 3/8)
        let expect_fourth = 3.0 * a2 * a2 / 8.0 + a2 * 0.04 + 0.04f64.powi(2) / 5.0;
        assert!((hy.bounds.sigma2 - (expect_fourth - expect_mean * expect_mean)).abs() < 1e-10);
    }

    #[test]
    fn mc_tail_matches_clt_within_berry_esseen_guard() {
        let (spec, model) = demo_process(MixingClass::Iid);
        let n = 200;
        let reps = 20_000;
        let rows = verify_bernstein_mc(
            &spec,
            &model,
            BuiltinH::CenteredX,
            n,
            &[0.05],
            reps,
            417,
            1.0,
            0.0,
        )
        .unwrap();
        let emp = rows[0].empirical_tail;
        // mean of n uniforms on [-1,1]: sd = sqrt(1/(3n)), exact tail by CLT
        let z = 0.05 / (1.0 / (3.0 * n as f64)).sqrt();
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        let clt_tail = 1.0 - statrs::distribution::ContinuousCDF::cdf(&normal, z);
        // Berry-Esseen: |P - Phi| <= 0.56 E|X|^3 / (sigma^3 sqrt(n))
        let guard = 0.56 * 0.25 / ((1.0f64 / 3.0).powf(1.5) * (n as f64).sqrt());
        let mc_sd = (clt_tail * (1.0 - clt_tail) / reps as f64).sqrt();
        assert!(
            (emp - clt_tail).abs() <= guard + 4.0 * mc_sd,
            "empirical {emp} vs CLT {clt_tail} (guard {guard})"
        );
    }

    #[test]
    fn mc_tail_is_zero_beyond_the_range_bound() {
        let (spec, model) = demo_process(MixingClass::Iid);
        let rows = verify_bernstein_mc(
            &spec,
            &model,
            BuiltinH::CenteredX,
            50,
            &[1.5],
            1_000,
            7,
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!(rows[0].empirical_tail, 0.0);
    }

    #[test]
    fn mc_soundness_all_demo_classes() {
        // every class demo: Wilson 0.999 upper limit below the bound
        // wherever the bound is at most 1
        for class in [
            MixingClass::Iid,
            MixingClass::GeoAlpha,
            MixingClass::RestrictedGeoAlpha,
            MixingClass::GeoAlphaMarkov,
            MixingClass::Phi,
            MixingClass::GeoC,
            MixingClass::PolyC,
        ] {
            let (spec, model, h) = demo_h(class);
            let k = bernstein_constants(&spec, &h.bounds).unwrap();
            let n = 500;
            assert!(k.n0 <= n as f64, "{class:?} demo must admit n = 500");
            let grid: Vec<f64> = [0.9, 0.3, 0.05]
                .iter()
                .map(|&lvl| threshold_for_bound(&k, &h.bounds, n, lvl).unwrap())
                .collect();
            let rows = verify_bernstein_mc(
                &spec,
                &model,
                BuiltinH::CenteredX,
                n,
                &grid,
                20_000,
                991,
                4.0,
                1.0,
            )
            .unwrap();
            for row in rows {
                if row.bound <= 1.0 {
                    assert!(
                        row.wilson_upper <= row.bound,
                        "{class:?}: wilson {} > bound {} at eps {}",
                        row.wilson_upper,
                        row.bound,
                        row.eps
                    );
                }
            }
        }
    }

    #[test]
    fn mc_verify_rejects_bad_inputs() {
        let (spec, model) = demo_process(MixingClass::Iid);
        assert!(
            verify_bernstein_mc(&spec, &model, BuiltinH::CenteredX, 50, &[], 2000, 1, 1.0, 0.0)
                .is_err()
        );
        assert!(verify_bernstein_mc(
            &spec,
            &model,
            BuiltinH::CenteredX,
            50,
            &[0.1],
            999,
            1,
            1.0,
            0.0
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn effective_observations_bounded_and_monotone(
            class_idx in 0usize..7,
            gamma in 1.0f64..5.0,
            n in 8usize..100_000,
        ) {
            let class = [
                MixingClass::Iid,
                MixingClass::GeoAlpha,
                MixingClass::RestrictedGeoAlpha,
                MixingClass::GeoAlphaMarkov,
                MixingClass::Phi,
                MixingClass::GeoC,
                MixingClass::PolyC,
            ][class_idx];
            let gamma = if class == MixingClass::PolyC { gamma + 2.0 } else { gamma };
            let a = effective_observations(class, gamma, n).unwrap();
            let b = effective_observations(class, gamma, n + 1).unwrap();
            prop_assert!(a <= n as f64 + 1e-9);
            prop_assert!(b >= a - 1e-12);
        }

        #[test]
        fn bound_monotonicities(
            eps in 0.01f64..2.0,
            sigma2 in 0.05f64..1.0,
            n in 20usize..4000,
        ) {
            let k = BernsteinConstants {
                class: MixingClass::GeoAlphaMarkov,
                gamma: 1.0,
                leading_constant: 1.0,
                c_sigma: 2.0,
                c_range: 1.0,
                n0: 3.0,
            };
            let h = HBounds { sup_bound: 1.0, sigma2, seminorm_bound: 0.0, epsilon_dav: 1.0 };
            let b = bernstein_bound(&k, &h, n, eps).unwrap();
            prop_assert!(bernstein_bound(&k, &h, n, eps * 1.1).unwrap() < b);
            prop_assert!(bernstein_bound(&k, &h, 2 * n, eps).unwrap() < b);
            let mut h2 = h;
            h2.sigma2 = (sigma2 * 1.1).min(1.0);
            if h2.sigma2 > sigma2 {
                prop_assert!(bernstein_bound(&k, &h2, n, eps).unwrap() > b);
            }
        }
    }
}
