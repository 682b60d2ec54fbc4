//! Oracle-inequality calculus: covering-number models, the implicit radius
//! of the high-probability excess-risk bound, its right-hand side, and the
//! rate exponents and parameter schedules that follow from it.
//!
//! The radius r is the smallest solution of
//!   r >= max{ (c_V (tau + phi(eps/2) 2^p r^p) / n_eff)^{1/(2-theta)},
//!             8 c_B B0 tau / n_eff,  r* }
//! with c_V := 64 (4 c_sigma V + c_B). A sum variant replaces the max by the
//! sum of the same three terms, which is the form rate experiments use.

use crate::error::{Error, Result};
use crate::mixing::{effective_observations, BernsteinConstants};
use serde::{Deserialize, Serialize};

/// Models of the log covering numbers ln N(F_r, sup-norm, eps) <= phi(eps) r^p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoveringModel {
    /// phi(eps) = a lambda^{-p} eps^{-2p}
    GenericPowerLaw { a: f64, p: f64, lambda: f64 },
    /// phi(eps) = a sigma^{-d} lambda^{-p} eps^{-2p}
    GaussianRkhs {
        a: f64,
        p: f64,
        sigma: f64,
        dim: usize,
        lambda: f64,
    },
    /// phi(eps) = ln(cardinality), constant in eps, with p = 0
    FiniteSet { cardinality: usize },
}

impl CoveringModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CoveringModel::GenericPowerLaw { a, p, lambda } => {
                if !(a > 0.0) || !(lambda > 0.0) {
                    return Err(Error::config("covering constants a, lambda must be positive"));
                }
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::config("covering exponent p must lie in (0, 1]"));
                }
            }
            CoveringModel::GaussianRkhs {
                a,
                p,
                sigma,
                dim,
                lambda,
            } => {
                if !(a > 0.0) || !(lambda > 0.0) || !(sigma > 0.0) {
                    return Err(Error::config(
                        "covering constants a, sigma, lambda must be positive",
                    ));
                }
                if dim == 0 {
                    return Err(Error::config("dimension must be at least 1"));
                }
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::config(
                        "the Gaussian covering model needs p strictly inside (0, 1)",
                    ));
                }
            }
            CoveringModel::FiniteSet { cardinality } => {
                if cardinality == 0 {
                    return Err(Error::config("a finite hypothesis set cannot be empty"));
                }
            }
        }
        Ok(())
    }

    /// The radius exponent p of the covering bound; zero for finite sets.
    pub fn exponent(&self) -> f64 {
        match *self {
            CoveringModel::GenericPowerLaw { p, .. } | CoveringModel::GaussianRkhs { p, .. } => p,
            CoveringModel::FiniteSet { .. } => 0.0,
        }
    }
}

/// Evaluates the covering model at eps.
pub fn phi_of_eps(model: &CoveringModel, eps: f64) -> Result<f64> {
    model.validate()?;
    if !(eps > 0.0) {
        return Err(Error::domain("covering scale eps must be positive"));
    }
    Ok(match *model {
        CoveringModel::GenericPowerLaw { a, p, lambda } => {
            a * lambda.powf(-p) * eps.powf(-2.0 * p)
        }
        CoveringModel::GaussianRkhs {
            a,
            p,
            sigma,
            dim,
            lambda,
        } => a * sigma.powi(-(dim as i32)) * lambda.powf(-p) * eps.powf(-2.0 * p),
        CoveringModel::FiniteSet { cardinality } => (cardinality as f64).ln(),
    })
}

/// Inputs of the excess-risk bound. eps = 0 is accepted together with an
/// eps-independent covering model, which reproduces the finite-set form of
/// the bound without its 5 eps term.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OracleInputs {
    pub theta: f64,
    pub v: f64,
    pub b0: f64,
    pub tau: f64,
    pub eps: f64,
    pub delta: f64,
    pub r_star: f64,
    pub constants: BernsteinConstants,
    pub n: usize,
}

impl OracleInputs {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::config("theta must lie in [0, 1]"));
        }
        if !(self.v >= 1.0) {
            return Err(Error::config("variance constant V must be at least 1"));
        }
        if !(self.b0 >= 1.0) {
            return Err(Error::config("range constant B0 must be at least 1"));
        }
        if !(self.tau >= 1.0) {
            return Err(Error::config("tau must be at least 1"));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::config("eps must be nonnegative"));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::config("delta must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.r_star) {
            return Err(Error::config("r_star must lie in [0, 1]"));
        }
        if (self.n as f64) < self.constants.n0 {
            return Err(Error::domain(format!(
                "n = {} is below the minimum sample size n0 = {:.6}",
                self.n, self.constants.n0
            )));
        }
        Ok(())
    }
}

/// c_V = 64 (4 c_sigma V + c_B).
pub fn c_v_constant(constants: &BernsteinConstants, v: f64) -> f64 {
    64.0 * (4.0 * constants.c_sigma * v + constants.c_range)
}

/// Whether the radius condition combines its three terms by max (the theorem
/// form) or by sum (the conservative form used in rate experiments).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiusMode {
    Max,
    Sum,
}

/// Solution of the radius condition. The theorem needs r <= 1; when the
/// smallest solution exceeds 1, max mode returns 1 and sum mode returns the
/// raw value, both with out_of_regime set.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadiusSolution {
    pub r: f64,
    pub out_of_regime: bool,
}

/// Smallest r satisfying the radius condition, by fixed-point iteration from
/// r = 1 (bisection on the residual if the iteration is too slow).
pub fn solve_radius(
    model: &CoveringModel,
    inputs: &OracleInputs,
    mode: RadiusMode,
) -> Result<RadiusSolution> {
    model.validate()?;
    inputs.validate()?;
    let p = model.exponent();
    let entropy_half = if p == 0.0 {
        phi_of_eps(model, 1.0)?
    } else {
        if inputs.eps == 0.0 {
            return Err(Error::domain(
                "eps = 0 is only admissible with an eps-independent covering model",
            ));
        }
        phi_of_eps(model, inputs.eps / 2.0)?
    };
    let n_eff = effective_observations(inputs.constants.class, inputs.constants.gamma, inputs.n)?;
    let cv = c_v_constant(&inputs.constants, inputs.v);
    let exponent = 1.0 / (2.0 - inputs.theta);
    let term2 = 8.0 * inputs.constants.c_range * inputs.b0 * inputs.tau / n_eff;
    let step = |r: f64| -> f64 {
        let t1 = (cv * (inputs.tau + entropy_half * 2f64.powf(p) * r.powf(p)) / n_eff)
            .powf(exponent);
        match mode {
            RadiusMode::Max => t1.max(term2).max(inputs.r_star),
            RadiusMode::Sum => t1 + term2 + inputs.r_star,
        }
    };

    let mut r = 1.0;
    if step(1.0) > 1.0 {
        if mode == RadiusMode::Max {
            return Ok(RadiusSolution {
                r: 1.0,
                out_of_regime: true,
            });
        }
        // sum mode reports the raw value: bracket the least fixed point
        // above 1 by doubling, then bisect keeping the upper end feasible
        let mut lo = 1.0;
        let mut hi = 2.0;
        let mut doublings = 0;
        while step(hi) > hi {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 60 {
                return Err(Error::numerical("the radius condition has no finite solution"));
            }
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if step(mid) <= mid {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Ok(RadiusSolution {
            r: hi,
            out_of_regime: true,
        });
    }

    // downward iteration: every iterate stays feasible, so the limit
    // satisfies all branches by monotonicity of the step map
    for _ in 0..500 {
        let next = step(r);
        if (r - next).abs() <= 1e-12 * next.max(1e-300) {
            return Ok(RadiusSolution {
                r: next,
                out_of_regime: false,
            });
        }
        r = next;
    }
    // slow contraction: bisect the residual between an infeasible lower end
    // and the last (feasible) iterate
    let mut lo = 1e-300;
    let mut hi = r;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid >= step(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RadiusSolution {
        r: hi,
        out_of_regime: false,
    })
}

/// Right-hand side of the excess-risk bound for a comparator with
/// regularizer value upsilon_f0 and excess risk excess_f0:
/// 2 upsilon + 4 excess + 4r + 5 eps + 2 delta.
pub fn oracle_rhs(inputs: &OracleInputs, upsilon_f0: f64, excess_f0: f64, r: f64) -> Result<f64> {
    inputs.validate()?;
    if !(excess_f0 >= 0.0) {
        return Err(Error::config("the comparator's excess risk must be nonnegative"));
    }
    if !(upsilon_f0 >= 0.0) {
        return Err(Error::config("the regularizer value must be nonnegative"));
    }
    if !(r >= 0.0) {
        return Err(Error::config("the radius must be nonnegative"));
    }
    Ok(2.0 * upsilon_f0 + 4.0 * excess_f0 + 4.0 * r + 5.0 * inputs.eps + 2.0 * inputs.delta)
}

/// The probability floor 1 - 8 C e^{-tau} at which the bound holds. Can be
/// negative, in which case the bound is vacuous.
pub fn confidence_floor(inputs: &OracleInputs) -> f64 {
    1.0 - 8.0 * inputs.constants.leading_constant * (-inputs.tau).exp()
}

/// Learning-rate exponent for a power-law approximation error with exponent
/// beta and covering exponent p: min{beta, beta/(beta + p beta + p)}.
pub fn rate_exponent_generic(beta: f64, p: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::domain("beta must lie in (0, 1]"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain("p must lie in (0, 1]"));
    }
    Ok(beta.min(beta / (beta + p * beta + p)))
}

/// The exponent min{beta, beta/(beta + 2 p beta + p)} obtained by earlier
/// analyses of the same schedule; kept for verifying that
/// rate_exponent_generic never falls below it.
pub fn rate_exponent_generic_legacy(beta: f64, p: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::domain("beta must lie in (0, 1]"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain("p must lie in (0, 1]"));
    }
    Ok(beta.min(beta / (beta + 2.0 * p * beta + p)))
}

/// Rate exponent 2s/(2s + d + d s / m) for an s-smooth target learned with a
/// kernel of smoothness m > d/2 in dimension d.
pub fn rate_exponent_smooth(s: f64, d: usize, m: f64) -> Result<f64> {
    let df = d as f64;
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    if !(m > df / 2.0) {
        return Err(Error::domain("kernel smoothness must exceed d/2"));
    }
    if !(s > 0.0 && s <= m) {
        return Err(Error::domain("target smoothness must lie in (0, m]"));
    }
    Ok(2.0 * s / (2.0 * s + df + df * s / m))
}

/// Rate exponent 2t/(2t + d) attained by the Gaussian-kernel schedule.
pub fn gaussian_rate_exponent(t: f64, d: usize) -> f64 {
    2.0 * t / (2.0 * t + d as f64)
}

/// Gaussian-kernel parameter schedule (lambda, sigma) =
/// (n_eff^{-1}, n_eff^{-1/(2t+d)}).
pub fn gaussian_schedule(t: f64, d: usize, n_eff: f64) -> Result<(f64, f64)> {
    if !(t >= 1.0) {
        return Err(Error::domain("smoothness t must be at least 1"));
    }
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    if !(n_eff >= 1.0) {
        return Err(Error::domain("effective sample size must be at least 1"));
    }
    Ok((
        1.0 / n_eff,
        n_eff.powf(-1.0 / (2.0 * t + d as f64)),
    ))
}

/// Regularization schedule lambda = n_eff^{-rho/beta} for a power-law
/// approximation error.
pub fn generic_schedule(beta: f64, p: f64, n_eff: f64) -> Result<f64> {
    if !(n_eff >= 1.0) {
        return Err(Error::domain("effective sample size must be at least 1"));
    }
    let rho = rate_exponent_generic(beta, p)?;
    Ok(n_eff.powf(-rho / beta))
}

/// Power-law model c lambda^beta of the approximation error function.
pub fn approximation_error_model(c: f64, beta: f64, lambda: f64) -> f64 {
    c * lambda.powf(beta)
}

/// The bound lambda^{(beta - 1) p} on the range constant B0 for smooth
/// kernels; at least 1 whenever beta <= 1 and lambda <= 1.
pub fn b0_power_law(lambda: f64, beta: f64, p: f64) -> f64 {
    lambda.powf((beta - 1.0) * p)
}
