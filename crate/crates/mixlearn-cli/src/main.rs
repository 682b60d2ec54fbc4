//! Command-line driver: sample synthetic mixing processes, compute effective
//! sample sizes, verify the tail inequality by Monte Carlo, train learners on
//! CSV data, evaluate the oracle bound, and run rate experiments from TOML
//! configs.
//!
//! Exit codes: 0 on success (and passing rate verdicts), 2 when a rate
//! experiment ran cleanly but its verdict is not a pass, 1 on any error.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mixlearn::bounds::{
    confidence_floor, oracle_rhs, solve_radius, CoveringModel, OracleInputs, RadiusMode,
};
use mixlearn::harness::{
    rate_rows_to_csv, run_bernstein_experiment, run_rate_experiment, verify_rows_to_csv,
    ExperimentConfig, TailConfig, Verdict,
};
use mixlearn::learners::{
    erm_finite, lssvm_train, quantile_svm_train, Hypothesis, KernelSpec, Predictor,
};
use mixlearn::losses::LossSpec;
use mixlearn::mixing::{bernstein_constants, effective_observations, BuiltinH, HBounds};
use mixlearn::processes::{
    demo_process, export_csv, parse_csv, sample, MixingClass, RegressionModel, SamplePath, Target,
};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mixlearn", about = "learning-from-dependent-data toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliClass {
    Iid,
    GeoAlpha,
    GeoAlphaMarkov,
    RestrictedGeoAlpha,
    Phi,
    GeoC,
    PolyC,
}

impl From<CliClass> for MixingClass {
    fn from(c: CliClass) -> MixingClass {
        match c {
            CliClass::Iid => MixingClass::Iid,
            CliClass::GeoAlpha => MixingClass::GeoAlpha,
            CliClass::GeoAlphaMarkov => MixingClass::GeoAlphaMarkov,
            CliClass::RestrictedGeoAlpha => MixingClass::RestrictedGeoAlpha,
            CliClass::Phi => MixingClass::Phi,
            CliClass::GeoC => MixingClass::GeoC,
            CliClass::PolyC => MixingClass::PolyC,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliH {
    CenteredX,
    CenteredYSquared,
}

impl From<CliH> for BuiltinH {
    fn from(h: CliH) -> BuiltinH {
        match h {
            CliH::CenteredX => BuiltinH::CenteredX,
            CliH::CenteredYSquared => BuiltinH::CenteredYSquared,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliLearner {
    Erm,
    Lssvm,
    Qsvm,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliKernel {
    Gaussian,
    Linear,
    Poly,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliCovering {
    FiniteSet,
    PowerLaw,
    GaussianRkhs,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Max,
    Sum,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a path from a class's built-in demo process and write it as CSV
    /// with a JSON sidecar describing the generator.
    Sample {
        #[arg(long)]
        class: CliClass,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV path; the sidecar lands next to it with extension .json
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the effective number of observations for a dependence class.
    Effobs {
        #[arg(long)]
        class: CliClass,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long)]
        n: usize,
    },
    /// Monte Carlo check of the tail inequality on a demo process; emits CSV
    /// eps,empirical_tail,wilson_upper,bound.
    BernsteinVerify {
        #[arg(long)]
        class: CliClass,
        #[arg(long, value_enum, default_value = "centered-x")]
        h: CliH,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated threshold grid, e.g. 0.1,0.2,0.4
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        eps_dav: f64,
        #[arg(long, default_value_t = 1.0)]
        seminorm: f64,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a learner on CSV data (header x1,...,xd,y) and write the model
    /// as JSON.
    Train(TrainArgs),
    /// Evaluate the excess-risk bound: radius, right-hand side, confidence.
    Bound(BoundArgs),
    /// Run a rate experiment from a TOML config and write the JSON report
    /// (plus a CSV of the per-size rows next to it).
    Rates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    learner: CliLearner,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: CliKernel,
    /// Gaussian kernel bandwidth (kernel learners)
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Regularization parameter (kernel learners)
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Pinball level for the quantile learner
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Label bound M; predictions are clipped to [-M, M]
    #[arg(long, default_value_t = 1.0)]
    m_bound: f64,
    /// Iteration budget for the quantile learner
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
    /// Optimization-gap target for the quantile learner
    #[arg(long, default_value_t = 1e-4)]
    target_delta: f64,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    /// Dependence class supplying the tail-inequality constants
    #[arg(long, value_enum, default_value = "iid")]
    class: CliClass,
    /// Decay constants of the class (defaults come from the demo process)
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Bounds on the test functions: sup-norm, variance, semi-norm, and the
    /// free parameter of the Markov-type minimum sample sizes
    #[arg(long, default_value_t = 1.0)]
    sup_bound: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    seminorm: f64,
    #[arg(long, default_value_t = 1.0)]
    eps_dav: f64,
    /// Variance-bound exponent theta in [0, 1]
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Variance-bound constant V >= 1
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    /// Range constant B0 >= 1
    #[arg(long, default_value_t = 1.0)]
    b0: f64,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Optimization gap of the learner
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    r_star: f64,
    #[arg(long)]
    n: usize,
    /// Regularizer value of the comparator
    #[arg(long, default_value_t = 0.0)]
    upsilon: f64,
    /// Excess risk of the comparator
    #[arg(long, default_value_t = 0.0)]
    excess: f64,
    #[arg(long, value_enum, default_value = "max")]
    mode: CliMode,
    #[arg(long, value_enum)]
    covering: CliCovering,
    /// Hypothesis count for the finite-set covering model
    #[arg(long)]
    cardinality: Option<usize>,
    /// Power-law covering constants
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_cov: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_cov: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
}

/// The model JSON written by `train`. Every learner fills the same fields;
/// the finite-set learner has no kernel expansion, so it reports the chosen
/// hypothesis instead and leaves the expansion empty.
#[derive(Serialize)]
struct ModelJson {
    kind: &'static str,
    kernel: &'static str,
    sigma: f64,
    lambda: f64,
    #[serde(rename = "M")]
    m_bound: f64,
    support_points: Vec<f64>,
    coefficients: Vec<f64>,
    delta_achieved: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hypothesis: Option<Hypothesis>,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sample {
            class,
            n,
            seed,
            out,
        } => {
            let (spec, model) = demo_process(class.into());
            let path = sample(&spec, &model, n, seed)?;
            export_csv(&path, &spec, &out)?;
            eprintln!(
                "wrote {} observations to {} (+ sidecar {})",
                n,
                out.display(),
                out.with_extension("json").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Effobs { class, gamma, n } => {
            let v = effective_observations(class.into(), gamma, n)?;
            println!("{v}");
            Ok(ExitCode::SUCCESS)
        }
        Command::BernsteinVerify {
            class,
            h,
            n,
            reps,
            seed,
            eps,
            eps_dav,
            seminorm,
            out,
        } => {
            let (spec, model) = demo_process(class.into());
            let cfg = TailConfig {
                spec,
                model,
                h: h.into(),
                n,
                eps_grid: eps,
                repetitions: reps,
                seed,
                epsilon_dav: eps_dav,
                seminorm_bound: seminorm,
            };
            let rows = run_bernstein_experiment(&cfg)?;
            let csv = verify_rows_to_csv(&rows);
            match out {
                Some(path) => std::fs::write(&path, csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train(args) => {
            train(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound(args) => {
            bound(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Rates { config, out } => rates(&config, &out),
    }
}

/// Reference hypotheses for the finite-set learner: bounded sines,
/// constants, and lines on [-1, 1].
fn erm_catalog() -> Vec<Hypothesis> {
    let mut hs = vec![Hypothesis::Zero];
    for a in [0.2, 0.4, 0.6, 0.8, 1.0] {
        hs.push(Hypothesis::Sine { amplitude: a });
    }
    for v in [-0.5, -0.25, 0.25, 0.5] {
        hs.push(Hypothesis::Constant { value: v });
    }
    hs.push(Hypothesis::Line {
        slope: 0.5,
        intercept: 0.0,
    });
    hs.push(Hypothesis::Line {
        slope: -0.5,
        intercept: 0.0,
    });
    hs
}

fn train(args: TrainArgs) -> Result<()> {
    if !matches!(args.kernel, CliKernel::Gaussian) {
        bail!("only the gaussian kernel is implemented; linear and poly are not available");
    }
    let text = std::fs::read_to_string(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let (x, dim, y) = parse_csv(&text)?;
    let path = SamplePath {
        x,
        dim,
        y,
        m_bound: args.m_bound,
        seed: 0,
        model: RegressionModel {
            target: Target::Sine { amplitude: 0.0 },
            s_noise: 0.0,
            m_bound: args.m_bound,
            quantile_level: 0.5,
        },
    };
    let kernel = KernelSpec::Gaussian { sigma: args.sigma };

    let model = match args.learner {
        CliLearner::Lssvm => {
            let loss = LossSpec::least_squares(args.m_bound)?;
            let report = lssvm_train(&loss, &path, &kernel, args.lambda)?;
            model_json("lssvm", &report.predictor, args.lambda, report.delta_achieved)
        }
        CliLearner::Qsvm => {
            let loss = LossSpec::pinball(args.m_bound, args.tau)?;
            let report = quantile_svm_train(
                &loss,
                &path,
                &kernel,
                args.lambda,
                args.max_iters,
                args.target_delta,
            )?;
            if !report.converged {
                eprintln!(
                    "warning: gap target not reached within {} iterations (achieved {:.3e})",
                    args.max_iters, report.delta_achieved
                );
            }
            model_json("qsvm", &report.predictor, args.lambda, report.delta_achieved)
        }
        CliLearner::Erm => {
            let loss = LossSpec::least_squares(args.m_bound)?;
            let catalog = erm_catalog();
            let (idx, _) = erm_finite(&loss, &path, &catalog)?;
            ModelJson {
                kind: "erm",
                kernel: "none",
                sigma: 0.0,
                lambda: 0.0,
                m_bound: args.m_bound,
                support_points: Vec::new(),
                coefficients: Vec::new(),
                delta_achieved: 0.0,
                hypothesis: Some(catalog[idx]),
            }
        }
    };
    let json = serde_json::to_string_pretty(&model)?;
    std::fs::write(&args.model_out, json)
        .with_context(|| format!("writing {}", args.model_out.display()))?;
    eprintln!("wrote model to {}", args.model_out.display());
    Ok(())
}

fn model_json(
    kind: &'static str,
    predictor: &Predictor,
    lambda: f64,
    delta_achieved: f64,
) -> ModelJson {
    match predictor {
        Predictor::Kernel {
            kernel: KernelSpec::Gaussian { sigma },
            support,
            coefficients,
            m_bound,
            ..
        } => ModelJson {
            kind,
            kernel: "gaussian",
            sigma: *sigma,
            lambda,
            m_bound: *m_bound,
            support_points: support.clone(),
            coefficients: coefficients.clone(),
            delta_achieved,
            hypothesis: None,
        },
        Predictor::Finite { .. } => unreachable!("kernel learners return kernel predictors"),
    }
}

fn bound(args: BoundArgs) -> Result<()> {
    let (mut spec, _) = demo_process(args.class.into());
    if let Some(b) = args.b {
        spec.b = b;
    }
    if let Some(c) = args.c {
        spec.c = c;
    }
    if let Some(g) = args.gamma {
        spec.gamma = g;
    }
    let h = HBounds {
        sup_bound: args.sup_bound,
        sigma2: args.sigma2,
        seminorm_bound: args.seminorm,
        epsilon_dav: args.eps_dav,
    };
    let constants = bernstein_constants(&spec, &h)?;
    let covering = match args.covering {
        CliCovering::FiniteSet => {
            let cardinality = args
                .cardinality
                .context("--cardinality is required for the finite-set covering model")?;
            CoveringModel::FiniteSet { cardinality }
        }
        CliCovering::PowerLaw => CoveringModel::GenericPowerLaw {
            a: args.a,
            p: args.p,
            lambda: args.lambda_cov,
        },
        CliCovering::GaussianRkhs => CoveringModel::GaussianRkhs {
            a: args.a,
            p: args.p,
            sigma: args.sigma_cov,
            dim: args.dim,
            lambda: args.lambda_cov,
        },
    };
    let inputs = OracleInputs {
        theta: args.theta,
        v: args.v,
        b0: args.b0,
        tau: args.tau,
        eps: args.eps,
        delta: args.delta,
        r_star: args.r_star,
        constants,
        n: args.n,
    };
    let mode = match args.mode {
        CliMode::Max => RadiusMode::Max,
        CliMode::Sum => RadiusMode::Sum,
    };
    let solution = solve_radius(&covering, &inputs, mode)?;
    let rhs = oracle_rhs(&inputs, args.upsilon, args.excess, solution.r)?;
    let output = serde_json::json!({
        "r": solution.r,
        "rhs": rhs,
        "confidence": confidence_floor(&inputs),
        "flags": { "out_of_regime": solution.out_of_regime },
    });
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(())
}

fn rates(config: &PathBuf, out: &PathBuf) -> Result<ExitCode> {
    let text = std::fs::read_to_string(config)
        .with_context(|| format!("reading {}", config.display()))?;
    let cfg: ExperimentConfig =
        toml::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    let report = run_rate_experiment(&cfg)?;
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
    let csv_path = out.with_extension("csv");
    std::fs::write(&csv_path, rate_rows_to_csv(&report.rows))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    let verdict = match report.verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Degenerate => "degenerate",
    };
    println!(
        "verdict: {verdict} (fitted slope {:.4} +/- {:.4}, target -{:.4}, tolerance {:.4})",
        report.fitted_slope, report.slope_stderr, report.target, cfg.tolerance
    );
    Ok(if report.verdict == Verdict::Pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
