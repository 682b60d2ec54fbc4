//! Experiment harness: deterministic parallel rate experiments for learners
//! on mixing processes, a thin driver for the tail-inequality Monte Carlo,
//! and coverage experiments for the oracle bound.
//!
//! Every replication derives its seed from the master seed and its cell
//! index, so reports are identical across thread counts and reruns. Work is
//! farmed out per (sample size, repetition) cell and reduced in index order.

use crate::bounds::{
    confidence_floor, gaussian_schedule, generic_schedule, oracle_rhs, solve_radius,
    CoveringModel, OracleInputs, RadiusMode,
};
use crate::error::{Error, Result};
use crate::learners::{
    erm_finite, lssvm_train, quantile_svm_train, FastKernelEval, Hypothesis, KernelSpec,
    Predictor,
};
use crate::losses::{excess_risk_mc, LossKind, LossSpec};
use crate::mixing::{
    class_sample_floor, effective_observations, verify_bernstein_mc, BernsteinConstants,
    BuiltinH, VerifyRow,
};
use crate::processes::{derive_seed, sample, stationary_expectation, MixingSpec, RegressionModel};
use crate::stats::{mix64, ols_line};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Training procedure run in each cell of a rate experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learner {
    KernelLeastSquares,
    KernelQuantile { max_iters: usize, target_delta: f64 },
    FiniteErm { hypotheses: Vec<Hypothesis> },
}

/// How the regularization parameter (and kernel bandwidth, if any) vary with
/// the effective sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// lambda = 1/n_eff, sigma = n_eff^{-1/(2t+1)}, tuned for targets of
    /// smoothness t in one dimension.
    GaussianSmoothness { t: f64 },
    /// lambda = n_eff^{-rho/beta} for an approximation error of order
    /// lambda^beta and covering exponent p; the kernel bandwidth stays at
    /// its configured value.
    EntropyPowerLaw { beta: f64, p: f64 },
    /// Constant parameters, for ablations.
    Fixed { lambda: f64, sigma: f64 },
}

/// Full description of a rate experiment. The base kernel's bandwidth is
/// replaced at each sample size when the schedule prescribes one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: MixingSpec,
    pub model: RegressionModel,
    pub loss: LossSpec,
    pub learner: Learner,
    pub kernel: KernelSpec,
    pub schedule: Schedule,
    pub n_grid: Vec<usize>,
    pub repetitions: usize,
    #[serde(default = "default_mc_eval")]
    pub mc_eval: usize,
    pub master_seed: u64,
    pub target_exponent: f64,
    pub tolerance: f64,
}

fn default_mc_eval() -> usize {
    100_000
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.model.validate()?;
        self.kernel.validate()?;
        if self.spec.dim() != 1 {
            return Err(Error::config("rate experiments need one-dimensional covariates"));
        }
        if !(self.loss.m_bound == self.model.m_bound) {
            return Err(Error::config(
                "loss clipping bound must equal the model's label bound",
            ));
        }
        if !(self.loss.scale > 0.0)
            || self.loss.sup_value() > 1.0 + 1e-12
            || self.loss.lipschitz() > 1.0 + 1e-12
        {
            return Err(Error::config(
                "loss scale must keep the clipped loss bounded by 1 and 1-Lipschitz",
            ));
        }
        match (&self.learner, self.loss.kind) {
            (Learner::KernelLeastSquares, LossKind::LeastSquares) => {}
            (Learner::KernelQuantile { max_iters, target_delta }, LossKind::Pinball { level }) => {
                if *max_iters == 0 {
                    return Err(Error::config("iteration budget must be at least 1"));
                }
                if !(*target_delta > 0.0) {
                    return Err(Error::config("target optimization gap must be positive"));
                }
                if (level - self.model.quantile_level).abs() > 1e-12 {
                    return Err(Error::config(
                        "pinball level must equal the model's quantile level",
                    ));
                }
            }
            (Learner::FiniteErm { hypotheses }, _) => {
                if hypotheses.is_empty() {
                    return Err(Error::config("the hypothesis set must be nonempty"));
                }
            }
            _ => {
                return Err(Error::config("learner and loss kinds do not match"));
            }
        }
        match self.schedule {
            Schedule::GaussianSmoothness { t } => {
                if !(t >= 1.0) {
                    return Err(Error::config("schedule smoothness t must be at least 1"));
                }
            }
            Schedule::EntropyPowerLaw { beta, p } => {
                crate::bounds::rate_exponent_generic(beta, p)?;
            }
            Schedule::Fixed { lambda, sigma } => {
                if !(lambda > 0.0) || !(sigma > 0.0) {
                    return Err(Error::config("fixed schedule parameters must be positive"));
                }
            }
        }
        if self.n_grid.is_empty() {
            return Err(Error::config("the sample-size grid must be nonempty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("the sample-size grid must be strictly increasing"));
        }
        let floor = class_sample_floor(&self.spec)?;
        if (self.n_grid[0] as f64) < floor {
            return Err(Error::config(format!(
                "smallest sample size {} is below the class minimum {:.3}",
                self.n_grid[0], floor
            )));
        }
        if self.repetitions < 3 {
            return Err(Error::config("at least 3 repetitions are needed for a stderr"));
        }
        if self.mc_eval < 100 {
            return Err(Error::config("excess-risk evaluation needs at least 100 draws"));
        }
        if !(self.target_exponent > 0.0) || !self.target_exponent.is_finite() {
            return Err(Error::config("target exponent must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("slope tolerance must be positive"));
        }
        Ok(())
    }

    /// (lambda, sigma, n_eff) the schedule assigns at sample size n.
    fn resolve(&self, n: usize) -> Result<(f64, f64, f64)> {
        let n_eff = effective_observations(self.spec.class, self.spec.gamma, n)?;
        let KernelSpec::Gaussian { sigma: base_sigma } = self.kernel;
        Ok(match self.schedule {
            Schedule::GaussianSmoothness { t } => {
                let (lambda, sigma) = gaussian_schedule(t, 1, n_eff)?;
                (lambda, sigma, n_eff)
            }
            Schedule::EntropyPowerLaw { beta, p } => {
                (generic_schedule(beta, p, n_eff)?, base_sigma, n_eff)
            }
            Schedule::Fixed { lambda, sigma } => (lambda, sigma, n_eff),
        })
    }
}

/// Aggregated result at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub n_eff: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub mean_excess: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The log-log fit is undefined: fewer than two rows or a mean excess
    /// that is not strictly positive.
    Degenerate,
}

/// Outcome of a rate experiment. The fitted slope comes from ordinary least
/// squares of log mean excess on log effective sample size; the verdict
/// compares it against -target within tolerance plus two slope standard
/// errors. runtime_seconds is wall-clock time and is the one field expected
/// to differ between identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub target: f64,
    pub verdict: Verdict,
    pub runtime_seconds: f64,
}

fn with_cell_context(e: Error, n: usize, rep: usize, seed: u64) -> Error {
    let ctx = format!("cell n = {n}, repetition {rep}, seed {seed}");
    match e {
        Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{ctx}: {io}"))),
    }
}

/// Mean excess risk of the clipped predictor under the stationary law,
/// estimated from mc_eval fresh draws. Kernel expansions go through the
/// windowed evaluator when their support is sorted.
fn excess_of_predictor(
    cfg: &ExperimentConfig,
    predictor: &Predictor,
    mc_seed: u64,
) -> Result<f64> {
    let (mean, _stderr) = match FastKernelEval::new(predictor) {
        Some(fast) => excess_risk_mc(
            &cfg.loss,
            &cfg.spec,
            &cfg.model,
            &|x: &[f64]| fast.eval_clipped(x[0]),
            cfg.mc_eval,
            mc_seed,
        )?,
        None => excess_risk_mc(
            &cfg.loss,
            &cfg.spec,
            &cfg.model,
            &|x: &[f64]| predictor.eval_clipped(x),
            cfg.mc_eval,
            mc_seed,
        )?,
    };
    Ok(mean)
}

fn run_cell(cfg: &ExperimentConfig, lambda: f64, sigma: f64, i: usize, rep: usize) -> Result<f64> {
    let n = cfg.n_grid[i];
    let cell_seed = derive_seed(cfg.master_seed, (i * cfg.repetitions + rep) as u64);
    let inner = |seed: u64| -> Result<f64> {
        let path = sample(&cfg.spec, &cfg.model, n, mix64(seed, 0))?;
        let mc_seed = mix64(seed, 1);
        let predictor = match &cfg.learner {
            Learner::KernelLeastSquares => {
                let kernel = KernelSpec::Gaussian { sigma };
                lssvm_train(&cfg.loss, &path, &kernel, lambda)?.predictor
            }
            Learner::KernelQuantile {
                max_iters,
                target_delta,
            } => {
                let kernel = KernelSpec::Gaussian { sigma };
                quantile_svm_train(&cfg.loss, &path, &kernel, lambda, *max_iters, *target_delta)?
                    .predictor
            }
            Learner::FiniteErm { hypotheses } => {
                let (idx, _) = erm_finite(&cfg.loss, &path, hypotheses)?;
                Predictor::Finite {
                    hypothesis: hypotheses[idx],
                    m_bound: cfg.loss.m_bound,
                }
            }
        };
        excess_of_predictor(cfg, &predictor, mc_seed)
    };
    inner(cell_seed).map_err(|e| with_cell_context(e, n, rep, cell_seed))
}

/// Runs the full grid of (sample size, repetition) cells in parallel and
/// fits the learning rate. Deterministic for a fixed config: cell seeds are
/// derived from the master seed and the cell index, and the reduction is in
/// index order regardless of thread count.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    let start = Instant::now();
    let params: Vec<(f64, f64, f64)> = cfg
        .n_grid
        .iter()
        .map(|&n| cfg.resolve(n))
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..cfg.n_grid.len())
        .flat_map(|i| (0..cfg.repetitions).map(move |rep| (i, rep)))
        .collect();
    let excesses: Vec<f64> = cells
        .par_iter()
        .map(|&(i, rep)| run_cell(cfg, params[i].0, params[i].1, i, rep))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let vals = &excesses[i * cfg.repetitions..(i + 1) * cfg.repetitions];
        let (mean, stderr) = crate::stats::mean_stderr(vals);
        let (lambda, sigma, n_eff) = params[i];
        rows.push(RateRow {
            n,
            n_eff,
            lambda,
            sigma,
            mean_excess: mean,
            stderr,
        });
    }

    let fit = fit_loglog_slope(
        &rows.iter().map(|r| r.n_eff).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.mean_excess).collect::<Vec<_>>(),
    );
    let (fitted_slope, slope_stderr, verdict) = match fit {
        Some((slope, stderr)) => {
            let ok = (slope - (-cfg.target_exponent)).abs() <= cfg.tolerance + 2.0 * stderr;
            (slope, stderr, if ok { Verdict::Pass } else { Verdict::Fail })
        }
        None => (f64::NAN, f64::NAN, Verdict::Degenerate),
    };
    Ok(RateReport {
        rows,
        fitted_slope,
        slope_stderr,
        target: cfg.target_exponent,
        verdict,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Slope and slope standard error of log means against log effective sample
/// sizes; None when the fit is undefined.
fn fit_loglog_slope(n_effs: &[f64], means: &[f64]) -> Option<(f64, f64)> {
    if n_effs.len() < 2 || means.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return None;
    }
    let xs: Vec<f64> = n_effs.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = means.iter().map(|v| v.ln()).collect();
    let (slope, _, stderr) = ols_line(&xs, &ys);
    Some((slope, stderr))
}

/// CSV serialization of rate rows, shortest-round-trip decimals.
pub fn rate_rows_to_csv(rows: &[RateRow]) -> String {
    let mut out = String::from("n,n_eff,lambda,sigma,mean_excess,stderr\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.n_eff, r.lambda, r.sigma, r.mean_excess, r.stderr
        ));
    }
    out
}

/// CSV serialization of tail-verification rows.
pub fn verify_rows_to_csv(rows: &[VerifyRow]) -> String {
    let mut out = String::from("eps,empirical_tail,wilson_upper,bound\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.eps, r.empirical_tail, r.wilson_upper, r.bound
        ));
    }
    out
}

/// Configuration of a tail-inequality Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    pub spec: MixingSpec,
    pub model: RegressionModel,
    pub h: BuiltinH,
    pub n: usize,
    pub eps_grid: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub epsilon_dav: f64,
    pub seminorm_bound: f64,
}

/// Simulates the tail frequencies for the configured test function and
/// compares them with the theoretical bound at each grid point.
pub fn run_bernstein_experiment(cfg: &TailConfig) -> Result<Vec<VerifyRow>> {
    verify_bernstein_mc(
        &cfg.spec,
        &cfg.model,
        cfg.h,
        cfg.n,
        &cfg.eps_grid,
        cfg.repetitions,
        cfg.seed,
        cfg.epsilon_dav,
        cfg.seminorm_bound,
    )
}

/// Configuration of an oracle-coverage experiment: empirical risk
/// minimization over a finite hypothesis set, repeated over fresh paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleExperimentConfig {
    pub spec: MixingSpec,
    pub model: RegressionModel,
    pub loss: LossSpec,
    pub hypotheses: Vec<Hypothesis>,
    pub n: usize,
    pub repetitions: usize,
    pub theta: f64,
    pub v: f64,
    pub b0: f64,
    pub master_seed: u64,
    pub constants: BernsteinConstants,
}

/// One repetition: the excess risk of the selected hypothesis (clipped),
/// the bound's right-hand side, the radius entering it, and whether the
/// bound covered the repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRepRow {
    pub rep: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub r: f64,
    pub covered: bool,
}

/// Coverage of the oracle bound across repetitions, against the theoretical
/// floor 1 - 8 C e^{-tau} (clamped to 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub rows: Vec<OracleRepRow>,
    pub coverage: f64,
    pub floor: f64,
    pub confidence_tau: f64,
    pub out_of_regime: bool,
    pub runtime_seconds: f64,
}

/// Exact excess risk of a predictor under the stationary law, by quadrature
/// of the closed-form conditional risks.
fn exact_excess<F: Fn(f64) -> f64>(
    loss: &LossSpec,
    spec: &MixingSpec,
    model: &RegressionModel,
    f: F,
) -> Result<f64> {
    stationary_expectation(spec, |x| {
        let best = loss.bayes_predictor(model, x);
        (loss.conditional_risk(model, x, f(x)) - loss.conditional_risk(model, x, best)).max(0.0)
    })
}

/// Runs the coverage experiment: in each repetition a fresh path is drawn,
/// empirical risk minimization picks a hypothesis, and the bound with the
/// comparator f0 is checked against the selection's exact excess risk. The
/// radius uses the summed form of the fixed-point condition with the finite
/// covering model, so it can exceed 1 at small sample sizes; coverage is
/// still meaningful there because the check is the raw inequality.
pub fn run_oracle_experiment(
    cfg: &OracleExperimentConfig,
    f0: &Predictor,
    tau_conf: f64,
) -> Result<OracleReport> {
    let start = Instant::now();
    cfg.spec.validate()?;
    cfg.model.validate()?;
    if cfg.spec.dim() != 1 {
        return Err(Error::config("oracle experiments need one-dimensional covariates"));
    }
    if cfg.hypotheses.is_empty() {
        return Err(Error::config("the hypothesis set must be nonempty"));
    }
    if cfg.repetitions == 0 {
        return Err(Error::config("at least one repetition is needed"));
    }
    let inputs = OracleInputs {
        theta: cfg.theta,
        v: cfg.v,
        b0: cfg.b0,
        tau: tau_conf,
        eps: 0.0,
        delta: 0.0,
        r_star: 0.0,
        constants: cfg.constants,
        n: cfg.n,
    };
    let covering = CoveringModel::FiniteSet {
        cardinality: cfg.hypotheses.len(),
    };
    let solution = solve_radius(&covering, &inputs, RadiusMode::Sum)?;

    // exact excess of every hypothesis (clipped, as selected predictors are
    // evaluated) and of the unclipped comparator
    let m = cfg.loss.m_bound;
    let hyp_excess: Vec<f64> = cfg
        .hypotheses
        .iter()
        .map(|h| exact_excess(&cfg.loss, &cfg.spec, &cfg.model, |x| {
            h.eval(&[x]).clamp(-m, m)
        }))
        .collect::<Result<_>>()?;
    let excess_f0 = exact_excess(&cfg.loss, &cfg.spec, &cfg.model, |x| f0.eval(&[x]))?;
    let rhs = oracle_rhs(&inputs, 0.0, excess_f0, solution.r)?;

    let rows: Vec<Result<OracleRepRow>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(cfg.master_seed, rep as u64);
            let path = sample(&cfg.spec, &cfg.model, cfg.n, seed)
                .map_err(|e| with_cell_context(e, cfg.n, rep, seed))?;
            let (idx, _) = erm_finite(&cfg.loss, &path, &cfg.hypotheses)
                .map_err(|e| with_cell_context(e, cfg.n, rep, seed))?;
            let lhs = hyp_excess[idx];
            Ok(OracleRepRow {
                rep,
                lhs,
                rhs,
                r: solution.r,
                covered: lhs <= rhs + 1e-12,
            })
        })
        .collect();
    let rows: Vec<OracleRepRow> = rows.into_iter().collect::<Result<_>>()?;
    let coverage = rows.iter().filter(|r| r.covered).count() as f64 / rows.len() as f64;
    Ok(OracleReport {
        rows,
        coverage,
        floor: confidence_floor(&inputs).max(0.0),
        confidence_tau: tau_conf,
        out_of_regime: solution.out_of_regime,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
