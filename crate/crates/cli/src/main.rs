//! `blockstep` — command-line front end for the blockstep toolkit.
//!
//! Subcommands cover the whole workflow: draw two-block least-squares
//! instances (`gen`), print tuned stepsize plans (`stepsizes`) and
//! closed-form iteration spectra (`spectra`), run the solvers and record
//! their error traces (`solve`), tabulate tuned rates against measured
//! contractions across condition numbers (`sweep`), and drive the
//! projection family on subspace pairs (`gap`).
//!
//! Exit codes: `0` on success, `2` for usage errors, `3` when a numerical
//! precondition is violated.

use std::env;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use blockstep_core::altproj::{
    gapxx_stepsizes, make_operator, measured_contraction, rate_table, run_projection,
    OperatorSpec, SmallBlock, SubspacePair,
};
use blockstep_core::datagen::{gen_instance, gen_subspace_pair, gen_two_column, GenSpec};
use blockstep_core::model::{BlockProblem, Method};
use blockstep_core::numkernels::{DenseMatrix, DenseVector};
use blockstep_core::rng::Rng;
use blockstep_core::solvers::{run_bem, run_bgd, run_gd, run_hb};
use blockstep_core::spectrum::{build_m, closed_form_spectrum, rho_of};
use blockstep_core::stepsizes::{bgd_optimal, equal_stepsizes, gd_optimal, hb_optimal, StepsizePlan};
use blockstep_core::Error;

/// Seed used when neither `--seed` nor `BLOCKSTEP_SEED` is given.
const DEFAULT_SEED: u64 = 1;

/// Column header of the sweep CSV schema.
const SWEEP_CSV_HEADER: &str = "kappa,rho_gd,rho_hb,rho_bgd,measured_gd,measured_hb,measured_bgd";

// ---------------------------------------------------------------------------
// failure plumbing
// ---------------------------------------------------------------------------

/// A command failure carrying its process exit code: `2` for usage errors,
/// `3` for violated numerical preconditions.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Failure {
        Failure {
            code: 3,
            message: err.to_string(),
        }
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

// ---------------------------------------------------------------------------
// argument surface
// ---------------------------------------------------------------------------

/// Tuned stepsizes, exact spectra, and reference runs for two-block
/// gradient descent and the projection family.
#[derive(Parser)]
#[command(
    name = "blockstep",
    version,
    about = "Tuned stepsizes, exact spectra, and reference runs for two-block least squares"
)]
struct RunConfig {
    /// RNG seed; overrides the BLOCKSTEP_SEED environment variable.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a two-block instance and write it as JSON.
    Gen(GenArgs),
    /// Print the tuned stepsize plan for a solver on an instance.
    Stepsizes(StepsizesArgs),
    /// Print the closed-form spectrum of one block sweep at given stepsizes.
    Spectra(SpectraArgs),
    /// Run a solver and write its error trace as CSV.
    Solve(SolveArgs),
    /// Tabulate tuned rates and measured contractions across condition numbers.
    Sweep(SweepArgs),
    /// Run a projection-family operator on a pair of subspaces.
    Gap(GapArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Rows of the stacked matrix.
    #[arg(long)]
    m: Option<usize>,
    /// Columns of the first block.
    #[arg(long)]
    n1: Option<usize>,
    /// Columns of the second block.
    #[arg(long)]
    n2: Option<usize>,
    /// Target condition number of the stacked Gram matrix.
    #[arg(long, default_value_t = 100.0)]
    cond: f64,
    /// Norm of the additive right-hand-side noise.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Draw the single-column pair with this coupling instead.
    #[arg(long, value_name = "C")]
    two_column: Option<f64>,
    /// Where to write the instance JSON.
    #[arg(long)]
    out: PathBuf,
}

/// Instance source shared by the commands that consume one. Exactly one of
/// `--instance`, the `--m/--n1/--n2` shape, or `--two-column` must be given.
#[derive(Args)]
struct InstanceArgs {
    /// Load the instance from a JSON file written by `gen`.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Rows of a freshly drawn instance.
    #[arg(long)]
    m: Option<usize>,
    /// First-block columns of a freshly drawn instance.
    #[arg(long)]
    n1: Option<usize>,
    /// Second-block columns of a freshly drawn instance.
    #[arg(long)]
    n2: Option<usize>,
    /// Condition number of a freshly drawn instance.
    #[arg(long, default_value_t = 100.0)]
    cond: f64,
    /// Right-hand-side noise norm of a freshly drawn instance.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Use the single-column pair with this coupling instead.
    #[arg(long, value_name = "C")]
    two_column: Option<f64>,
}

#[derive(Args)]
struct StepsizesArgs {
    #[command(flatten)]
    source: InstanceArgs,
    /// Solver to plan for: gd, hb, bgd, or bem.
    #[arg(long)]
    method: String,
}

#[derive(Args)]
struct SpectraArgs {
    #[command(flatten)]
    source: InstanceArgs,
    /// First-block stepsize.
    #[arg(long)]
    gamma1: f64,
    /// Second-block stepsize.
    #[arg(long)]
    gamma2: f64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: InstanceArgs,
    /// Solver to run: gd, hb, bgd, or bem.
    #[arg(long)]
    method: String,
    /// Resolve the tuned stepsizes for the method at run time.
    #[arg(long)]
    optimal: bool,
    /// Explicit stepsize for gd.
    #[arg(long)]
    gamma: Option<f64>,
    /// Explicit first-block stepsize for bgd.
    #[arg(long)]
    gamma1: Option<f64>,
    /// Explicit second-block stepsize for bgd.
    #[arg(long)]
    gamma2: Option<f64>,
    /// Explicit heavy-ball stepsize.
    #[arg(long)]
    alpha: Option<f64>,
    /// Explicit heavy-ball momentum.
    #[arg(long)]
    beta: Option<f64>,
    /// Iteration count.
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Where to write the trace CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated condition numbers, one row per value.
    #[arg(long, value_delimiter = ',', value_name = "KAPPA,...")]
    cond: Vec<f64>,
    /// Power-iteration steps behind the measured contractions.
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Rows of each drawn instance.
    #[arg(long, default_value_t = 200)]
    m: usize,
    /// First-block columns of each drawn instance.
    #[arg(long, default_value_t = 40)]
    n1: usize,
    /// Second-block columns of each drawn instance.
    #[arg(long, default_value_t = 60)]
    n2: usize,
    /// Right-hand-side noise norm of each drawn instance.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Worker threads for the per-κ rows (default: all logical cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Where to write the sweep CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GapArgs {
    /// Principal angles of a planted pair as a JSON array, e.g. "[0.5236, 1.0472]".
    #[arg(long)]
    angles: Option<String>,
    /// Interpret --angles in degrees instead of radians.
    #[arg(long)]
    degrees: bool,
    /// Ambient dimension (default: n1 + n2 + 2).
    #[arg(long)]
    m: Option<usize>,
    /// First basis width (default: the number of angles).
    #[arg(long)]
    n1: Option<usize>,
    /// Second basis width (default: the number of angles).
    #[arg(long)]
    n2: Option<usize>,
    /// Operator to run: ap, dr, rap, prap, gdr, gap, or gapxx.
    #[arg(long)]
    method: String,
    /// Outer relaxation for rap, gdr, and gap (must lie in (0, 1]).
    #[arg(long)]
    gamma: Option<f64>,
    /// First inner stepsize for prap and gap.
    #[arg(long)]
    gamma1: Option<f64>,
    /// Second inner stepsize for gap.
    #[arg(long)]
    gamma2: Option<f64>,
    /// Iteration count for the trace and the measured contraction.
    #[arg(long, default_value_t = 400)]
    iters: usize,
    /// Where to write the trace CSV.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the closed-form rate table CSV
    /// (default: the trace path with a .table.csv extension).
    #[arg(long)]
    table_out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// entry point and shared helpers
// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let config = RunConfig::parse();
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(config: &RunConfig) -> CmdResult<()> {
    let seed = resolve_seed(config.seed)?;
    match &config.command {
        Command::Gen(args) => cmd_gen(args, seed),
        Command::Stepsizes(args) => cmd_stepsizes(args, seed),
        Command::Spectra(args) => cmd_spectra(args, seed),
        Command::Solve(args) => cmd_solve(args, seed),
        Command::Sweep(args) => cmd_sweep(args, seed),
        Command::Gap(args) => cmd_gap(args, seed),
    }
}

/// Seed precedence: `--seed` flag, then `BLOCKSTEP_SEED`, then the default.
fn resolve_seed(flag: Option<u64>) -> CmdResult<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match env::var("BLOCKSTEP_SEED") {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| {
            usage(format!(
                "BLOCKSTEP_SEED must be an unsigned integer, got {text:?}"
            ))
        }),
        Err(env::VarError::NotPresent) => Ok(DEFAULT_SEED),
        Err(env::VarError::NotUnicode(_)) => Err(usage("BLOCKSTEP_SEED is not valid unicode")),
    }
}

fn write_file(path: &Path, contents: &str) -> CmdResult<()> {
    fs::write(path, contents)
        .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn pretty(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("JSON summaries always serialize")
}

fn parse_method(tag: &str, allowed: &[Method]) -> CmdResult<Method> {
    let method =
        Method::from_tag(tag).ok_or_else(|| usage(format!("unknown method {tag:?}")))?;
    if !allowed.contains(&method) {
        let names: Vec<&str> = allowed.iter().map(|m| m.tag()).collect();
        return Err(usage(format!(
            "method {} is not available here; choose one of {}",
            method.tag(),
            names.join(", ")
        )));
    }
    Ok(method)
}

fn require_bwo(problem: &BlockProblem<f64>) -> CmdResult<()> {
    if !problem.assumes_bwo() {
        return Err(Error::NotBWO(
            "tuned stepsizes and closed-form spectra need orthonormal blocks".into(),
        )
        .into());
    }
    Ok(())
}

fn check_stepsize(value: f64, name: &str) -> CmdResult<f64> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::BadStepsize(format!(
            "{name} must be positive and finite, got {value}"
        ))
        .into());
    }
    Ok(value)
}

impl InstanceArgs {
    /// Resolves to a problem plus the seed it is tied to, enforcing that
    /// exactly one source was given.
    fn resolve(&self, seed: u64) -> CmdResult<(BlockProblem<f64>, Option<u64>)> {
        let shaped = self.m.is_some() || self.n1.is_some() || self.n2.is_some();
        match (&self.instance, shaped, self.two_column) {
            (Some(path), false, None) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                Ok(BlockProblem::from_json(&text)?)
            }
            (None, true, None) => {
                let (m, n1, n2) = match (self.m, self.n1, self.n2) {
                    (Some(m), Some(n1), Some(n2)) => (m, n1, n2),
                    _ => return Err(usage("--m, --n1 and --n2 must be given together")),
                };
                let spec = GenSpec {
                    m,
                    n1,
                    n2,
                    noise_level: self.noise,
                    cond_num: self.cond,
                    seed,
                };
                Ok((gen_instance(&spec)?, Some(seed)))
            }
            (None, false, Some(c)) => Ok((gen_two_column(c, seed)?, Some(seed))),
            _ => Err(usage(
                "give exactly one instance source: --instance, --m/--n1/--n2, or --two-column",
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn cmd_gen(args: &GenArgs, seed: u64) -> CmdResult<()> {
    let shaped = args.m.is_some() || args.n1.is_some() || args.n2.is_some();
    let problem = match (shaped, args.two_column) {
        (true, None) => {
            let (m, n1, n2) = match (args.m, args.n1, args.n2) {
                (Some(m), Some(n1), Some(n2)) => (m, n1, n2),
                _ => return Err(usage("--m, --n1 and --n2 must be given together")),
            };
            gen_instance(&GenSpec {
                m,
                n1,
                n2,
                noise_level: args.noise,
                cond_num: args.cond,
                seed,
            })?
        }
        (false, Some(c)) => gen_two_column(c, seed)?,
        _ => {
            return Err(usage(
                "give exactly one instance source: --m/--n1/--n2 or --two-column",
            ))
        }
    };
    write_file(&args.out, &problem.to_json(Some(seed)))?;
    println!(
        "{}",
        pretty(&json!({
            "out": args.out.display().to_string(),
            "m": problem.m(),
            "n1": problem.n1(),
            "n2": problem.n2(),
            "r": problem.r(),
            "lambda1": problem.lambdas_cc().as_slice().first().copied(),
            "seed": seed,
        }))
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// stepsizes
// ---------------------------------------------------------------------------

fn cmd_stepsizes(args: &StepsizesArgs, seed: u64) -> CmdResult<()> {
    let method = parse_method(
        &args.method,
        &[Method::Gd, Method::Hb, Method::Bgd, Method::Bem],
    )?;
    let (problem, _) = args.source.resolve(seed)?;
    let plan = build_plan(&problem, method)?;
    println!("{}", plan.to_json());
    Ok(())
}

/// Tuned parameter selection for one solver on one instance. Gradient
/// descent and heavy ball read the curvature interval `[1−σ, 1+σ]` of the
/// stacked Gram matrix off the top coupling eigenvalue `σ² = λ1`.
fn build_plan(problem: &BlockProblem<f64>, method: Method) -> CmdResult<StepsizePlan<f64>> {
    require_bwo(problem)?;
    let lambdas = problem.lambdas_cc().as_slice();
    let sigma = lambdas.first().copied().unwrap_or(0.0).sqrt();
    let plan = match method {
        Method::Gd => {
            let (gamma, rho) = gd_optimal(1.0 + sigma, 1.0 - sigma)?;
            StepsizePlan::new(Method::Gd, &[("gamma", gamma)], rho)
        }
        Method::Hb => {
            let opt = hb_optimal(1.0 + sigma, 1.0 - sigma)?;
            StepsizePlan::new(
                Method::Hb,
                &[("alpha", opt.alpha), ("beta", opt.beta)],
                opt.rho,
            )
        }
        Method::Bgd => {
            let opt = bgd_optimal(lambdas, problem.r(), problem.n1(), problem.n2())?;
            StepsizePlan::new(
                Method::Bgd,
                &[("gamma1", opt.gamma1), ("gamma2", opt.gamma2)],
                opt.rho,
            )
        }
        Method::Bem => {
            let rho = rho_of(lambdas, problem.r(), problem.n1(), problem.n2(), 1.0, 1.0);
            StepsizePlan::new(Method::Bem, &[("gamma1", 1.0), ("gamma2", 1.0)], rho)
        }
        _ => unreachable!("gated by parse_method"),
    };
    Ok(plan)
}

// ---------------------------------------------------------------------------
// spectra
// ---------------------------------------------------------------------------

fn cmd_spectra(args: &SpectraArgs, seed: u64) -> CmdResult<()> {
    let (problem, _) = args.source.resolve(seed)?;
    require_bwo(&problem)?;
    let report = closed_form_spectrum(
        problem.lambdas_cc().as_slice(),
        problem.r(),
        problem.n1(),
        problem.n2(),
        args.gamma1,
        args.gamma2,
    )?;
    println!("{}", report.to_json());
    Ok(())
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

fn cmd_solve(args: &SolveArgs, seed: u64) -> CmdResult<()> {
    let method = parse_method(
        &args.method,
        &[Method::Gd, Method::Hb, Method::Bgd, Method::Bem],
    )?;
    if args.iters == 0 {
        return Err(usage("--iters must be at least 1"));
    }
    let explicit = args.gamma.is_some()
        || args.gamma1.is_some()
        || args.gamma2.is_some()
        || args.alpha.is_some()
        || args.beta.is_some();
    if args.optimal && explicit {
        return Err(usage("give --optimal or explicit stepsizes, not both"));
    }
    if method == Method::Bem && explicit {
        return Err(usage(
            "bem takes no stepsize flags: it minimizes both blocks exactly",
        ));
    }
    if method != Method::Bem && !args.optimal && !explicit {
        return Err(usage("give --optimal or the method's explicit stepsizes"));
    }
    let (problem, src_seed) = args.source.resolve(seed)?;
    let bwo = problem.assumes_bwo();
    let lambdas = problem.lambdas_cc().as_slice();
    let (r, n1, n2) = (problem.r(), problem.n1(), problem.n2());
    let sigma = lambdas.first().copied().unwrap_or(0.0).sqrt();

    let (mut trace, params, predicted) = match method {
        Method::Gd => {
            let gamma = if args.optimal {
                require_bwo(&problem)?;
                gd_optimal(1.0 + sigma, 1.0 - sigma)?.0
            } else {
                check_stepsize(
                    args.gamma
                        .ok_or_else(|| usage("gd needs --gamma or --optimal"))?,
                    "stepsize γ",
                )?
            };
            let predicted = bwo.then(|| {
                (1.0 - gamma * (1.0 + sigma))
                    .abs()
                    .max((1.0 - gamma * (1.0 - sigma)).abs())
            });
            (
                run_gd(&problem, gamma, args.iters),
                json!({ "gamma": gamma }),
                predicted,
            )
        }
        Method::Hb => {
            let (alpha, beta) = if args.optimal {
                require_bwo(&problem)?;
                let opt = hb_optimal(1.0 + sigma, 1.0 - sigma)?;
                (opt.alpha, opt.beta)
            } else {
                let missing = || usage("hb needs --alpha and --beta, or --optimal");
                let alpha = check_stepsize(args.alpha.ok_or_else(missing)?, "stepsize α")?;
                let beta = args.beta.ok_or_else(missing)?;
                if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
                    return Err(Error::BadStepsize(format!(
                        "momentum β must lie in [0, 1), got {beta}"
                    ))
                    .into());
                }
                (alpha, beta)
            };
            let predicted = bwo.then(|| hb_radius(alpha, beta, sigma));
            (
                run_hb(&problem, alpha, beta, args.iters),
                json!({ "alpha": alpha, "beta": beta }),
                predicted,
            )
        }
        Method::Bgd => {
            let (g1, g2) = if args.optimal {
                require_bwo(&problem)?;
                let opt = bgd_optimal(lambdas, r, n1, n2)?;
                (opt.gamma1, opt.gamma2)
            } else {
                match (args.gamma1, args.gamma2) {
                    (Some(g1), Some(g2)) => (
                        check_stepsize(g1, "stepsize γ1")?,
                        check_stepsize(g2, "stepsize γ2")?,
                    ),
                    _ => return Err(usage("bgd needs --gamma1 and --gamma2, or --optimal")),
                }
            };
            let predicted = bwo.then(|| rho_of(lambdas, r, n1, n2, g1, g2));
            (
                run_bgd(&problem, g1, g2, args.iters),
                json!({ "gamma1": g1, "gamma2": g2 }),
                predicted,
            )
        }
        Method::Bem => {
            let predicted = bwo.then(|| rho_of(lambdas, r, n1, n2, 1.0, 1.0));
            (run_bem(&problem, args.iters)?, json!({}), predicted)
        }
        _ => unreachable!("gated by parse_method"),
    };

    trace.seed = src_seed;
    write_file(&args.out, &trace.to_csv())?;
    println!(
        "{}",
        pretty(&json!({
            "method": method.tag(),
            "optimal": args.optimal,
            "params": params,
            "predicted_rho": predicted,
            "iters": args.iters,
            "initial_error": trace.initial_error(),
            "final_error": trace.errors.last().copied(),
            "out": args.out.display().to_string(),
        }))
    );
    Ok(())
}

/// Largest root modulus of `z² − (1+β−αλ)z + β` over the curvature interval
/// `[1−σ, 1+σ]`. The per-λ modulus is `√β` in the complex regime and grows
/// with `|1+β−αλ|` in the real one, so the interval endpoints dominate.
fn hb_radius(alpha: f64, beta: f64, sigma: f64) -> f64 {
    [1.0 - sigma, 1.0, 1.0 + sigma]
        .into_iter()
        .map(|lam| {
            let b = 1.0 + beta - alpha * lam;
            let disc = b * b - 4.0 * beta;
            if disc >= 0.0 {
                (b.abs() + disc.sqrt()) / 2.0
            } else {
                beta.sqrt()
            }
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    kappa: f64,
    rho_gd: f64,
    rho_hb: f64,
    rho_bgd: f64,
    measured_gd: f64,
    measured_hb: f64,
    measured_bgd: f64,
}

fn cmd_sweep(args: &SweepArgs, seed: u64) -> CmdResult<()> {
    if args.cond.is_empty() {
        return Err(usage("give at least one condition number via --cond"));
    }
    if args.cond.iter().any(|k| !k.is_finite()) {
        return Err(usage("condition numbers must be finite"));
    }
    if args.iters < 8 {
        return Err(usage("--iters must be at least 8 to measure a tail"));
    }
    // Sort first so each row's draw depends only on its rank in the sorted
    // list: the output is then stable under permutations of the input.
    let mut conds = args.cond.clone();
    conds.sort_by(f64::total_cmp);
    let compute = || -> CmdResult<Vec<SweepRow>> {
        conds
            .par_iter()
            .enumerate()
            .map(|(i, &kappa)| sweep_row(args, kappa, seed.wrapping_add(i as u64)))
            .collect()
    };
    let rows = match args.jobs {
        Some(0) => return Err(usage("--jobs must be at least 1")),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| usage(format!("cannot build the worker pool: {e}")))?
            .install(compute)?,
        None => compute()?,
    };
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            row.kappa,
            row.rho_gd,
            row.rho_hb,
            row.rho_bgd,
            row.measured_gd,
            row.measured_hb,
            row.measured_bgd,
        )
        .expect("string writes cannot fail");
    }
    write_file(&args.out, &csv)?;
    println!(
        "{}",
        pretty(&json!({
            "rows": rows.len(),
            "out": args.out.display().to_string(),
        }))
    );
    Ok(())
}

/// One sweep row: tuned rates from the closed forms, measured rates from
/// renormalized power iterations on the one-step error operators. The power
/// iteration stays above the floating-point floor where a raw error trace
/// would bottom out, so fast contractions remain measurable.
fn sweep_row(args: &SweepArgs, kappa: f64, seed: u64) -> CmdResult<SweepRow> {
    let spec = GenSpec {
        m: args.m,
        n1: args.n1,
        n2: args.n2,
        noise_level: args.noise,
        cond_num: kappa,
        seed,
    };
    let problem = gen_instance(&spec)?;
    let lambda1 = problem.lambdas_cc().as_slice().first().copied().unwrap_or(0.0);
    let sigma = lambda1.sqrt();
    let (gamma_gd, rho_gd) = gd_optimal(1.0 + sigma, 1.0 - sigma)?;
    let hb = hb_optimal(1.0 + sigma, 1.0 - sigma)?;
    // The equal-stepsize selection from the top eigenvalue alone keeps the
    // planned block rate exactly the square of the heavy-ball rate.
    let (gamma_eq, rho_bgd) = equal_stepsizes(lambda1)?;

    let n = args.n1 + args.n2;
    let gram = problem.stacked().gram();
    let gd_op = DenseMatrix::identity(n).sub(&gram.scale(gamma_gd));
    let hb_op = hb_companion(&gram, hb.alpha, hb.beta);
    let bgd_op = build_m(&problem, gamma_eq, gamma_eq)?;

    Ok(SweepRow {
        kappa,
        rho_gd,
        rho_hb: hb.rho,
        rho_bgd,
        measured_gd: power_rate(&gd_op, args.iters),
        measured_hb: power_rate(&hb_op, args.iters),
        measured_bgd: power_rate(&bgd_op, args.iters),
    })
}

/// One-step companion form of the heavy-ball error recurrence
/// `e⁺ = ((1+β)I − αG)e − βe⁻` on the doubled space `[e; e⁻]`.
fn hb_companion(gram: &DenseMatrix<f64>, alpha: f64, beta: f64) -> DenseMatrix<f64> {
    let n = gram.rows();
    let top_left = DenseMatrix::identity(n)
        .scale(1.0 + beta)
        .sub(&gram.scale(alpha));
    let mut op = DenseMatrix::zeros(2 * n, 2 * n);
    op.set_block(0, 0, &top_left);
    op.set_block(0, n, &DenseMatrix::identity(n).scale(-beta));
    op.set_block(n, 0, &DenseMatrix::identity(n));
    op
}

/// Dominant contraction factor of a linear map by renormalized power
/// iteration: the geometric mean of the step ratios over an even-length tail
/// window. The even length cancels the period-two wobble a dominant real
/// pair `±ρ` induces exactly.
fn power_rate(op: &DenseMatrix<f64>, iters: usize) -> f64 {
    assert!(iters >= 8, "too few iterations to take a tail");
    let n = op.cols();
    let mut v = DenseVector::new((0..n).map(|i| (0.5 + i as f64).sin()).collect());
    v = v.scale(1.0 / v.norm());
    let mut ratios = Vec::with_capacity(iters);
    for _ in 0..iters {
        let next = op.mul_vec(&v);
        let norm = next.norm();
        if norm <= f64::MIN_POSITIVE.sqrt() {
            return 0.0;
        }
        ratios.push(norm);
        v = next.scale(1.0 / norm);
    }
    let mut window = (ratios.len() / 4).max(2);
    if window % 2 == 1 {
        window += 1;
    }
    let tail = &ratios[ratios.len() - window..];
    let mean = tail.iter().map(|r| r.ln()).sum::<f64>() / window as f64;
    mean.exp()
}

// ---------------------------------------------------------------------------
// gap
// ---------------------------------------------------------------------------

/// Snap right angles written with rounded decimals (1.5708, 90.0002°…) onto
/// π/2 exactly, so the planted construction's `(0, π/2]` gate accepts them.
fn snap_right_angle(theta: f64) -> f64 {
    if (theta - FRAC_PI_2).abs() <= 1e-3 {
        FRAC_PI_2
    } else {
        theta
    }
}

fn cmd_gap(args: &GapArgs, seed: u64) -> CmdResult<()> {
    if args.iters < 8 {
        return Err(usage("--iters must be at least 8 to measure a tail"));
    }
    let (pair, theta_lo, theta_hi) = resolve_pair(args, seed)?;
    if !(theta_lo > 0.0) {
        return Err(Error::OutOfRange(
            "the bases share a direction: the first principal angle is zero".into(),
        )
        .into());
    }
    let method = parse_method(
        &args.method,
        &[
            Method::Ap,
            Method::Dr,
            Method::Rap,
            Method::Prap,
            Method::Gdr,
            Method::Gap,
            Method::Gapxx,
        ],
    )?;

    let s1 = theta_lo.sin();
    let sr = theta_hi.sin();
    let reject = |flags: &str| -> Failure {
        usage(format!("{} takes no {flags}", method.tag()))
    };
    let spec = match method {
        Method::Ap | Method::Dr => {
            if args.gamma.is_some() || args.gamma1.is_some() || args.gamma2.is_some() {
                return Err(reject("relaxation flags"));
            }
            if method == Method::Ap {
                OperatorSpec::Ap
            } else {
                OperatorSpec::Dr
            }
        }
        Method::Rap | Method::Gdr => {
            if args.gamma1.is_some() || args.gamma2.is_some() {
                return Err(reject("--gamma1/--gamma2, only the outer --gamma"));
            }
            let gamma = args.gamma.unwrap_or(1.0);
            if method == Method::Rap {
                OperatorSpec::Rap(gamma)
            } else {
                OperatorSpec::Gdr(gamma)
            }
        }
        Method::Prap => {
            if args.gamma.is_some() || args.gamma2.is_some() {
                return Err(reject("--gamma/--gamma2, only --gamma1"));
            }
            // default: balance |1 − γ1 sin²θ| over the angle range
            let gamma1 = args.gamma1.unwrap_or(2.0 / (sr * sr + s1 * s1));
            OperatorSpec::Prap(gamma1)
        }
        Method::Gap => {
            let inner = 2.0 / (1.0 + s1); // single-angle tuned inner pair
            OperatorSpec::Gap {
                gamma: args.gamma.unwrap_or(1.0),
                gamma1: args.gamma1.unwrap_or(inner),
                gamma2: args.gamma2.unwrap_or(inner),
            }
        }
        Method::Gapxx => {
            if args.gamma.is_some() || args.gamma1.is_some() || args.gamma2.is_some() {
                return Err(reject("stepsize flags: its pair is resolved from the angles"));
            }
            let full_rank = pair.r() == pair.n1().min(pair.n2());
            let small = if pair.n1() < pair.n2() {
                SmallBlock::N1
            } else if pair.n2() < pair.n1() {
                SmallBlock::N2
            } else {
                SmallBlock::Equal
            };
            let (gamma1, gamma2, _) = gapxx_stepsizes(theta_lo, theta_hi, full_rank, small)?;
            OperatorSpec::Gap {
                gamma: 1.0,
                gamma1,
                gamma2,
            }
        }
        _ => unreachable!("gated by parse_method"),
    };

    let params = match &spec {
        OperatorSpec::Ap | OperatorSpec::Dr => json!({}),
        OperatorSpec::Rap(g) | OperatorSpec::Gdr(g) => json!({ "gamma": g }),
        OperatorSpec::Prap(g1) => json!({ "gamma1": g1 }),
        OperatorSpec::Gap {
            gamma,
            gamma1,
            gamma2,
        } => json!({ "gamma": gamma, "gamma1": gamma1, "gamma2": gamma2 }),
    };

    let op = make_operator(&pair, spec)?;
    // decorrelate the start from the basis draw without a second seed flag
    let mut rng = Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let z0 = DenseVector::new(rng.normal_vec(pair.m()));
    let mut trace = run_projection(&pair, &op, &z0, args.iters);
    trace.seed = Some(seed);
    write_file(&args.out, &trace.to_csv())?;

    let table = rate_table(theta_lo, theta_hi);
    let table_path = args
        .table_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("table.csv"));
    let mut csv = String::from("method,rate\n");
    for (row_method, rate) in table.rows() {
        writeln!(csv, "{},{:e}", row_method.tag(), rate).expect("string writes cannot fail");
    }
    write_file(&table_path, &csv)?;

    let tuned_rate = match method {
        Method::Ap => table.ap,
        Method::Dr => table.dr,
        Method::Rap => table.rap,
        Method::Prap => table.prap,
        Method::Gdr => table.gdr,
        Method::Gap => table.gap,
        Method::Gapxx => table.gapxx,
        _ => unreachable!("gated by parse_method"),
    };
    let measured = measured_contraction(&pair, &op, args.iters);
    println!(
        "{}",
        pretty(&json!({
            "method": method.tag(),
            "theta1": theta_lo,
            "theta_r": theta_hi,
            "m": pair.m(),
            "n1": pair.n1(),
            "n2": pair.n2(),
            "r": pair.r(),
            "params": params,
            "tuned_rate": tuned_rate,
            "measured_rate": measured,
            "initial_error": trace.initial_error(),
            "final_error": trace.errors.last().copied(),
            "out": args.out.display().to_string(),
            "table_out": table_path.display().to_string(),
        }))
    );
    Ok(())
}

/// Builds the subspace pair and the angle extremes the closed forms are
/// evaluated at: the parsed (snapped, sorted) angles for a planted pair,
/// the measured principal angles for a random one.
fn resolve_pair(args: &GapArgs, seed: u64) -> CmdResult<(SubspacePair<f64>, f64, f64)> {
    match &args.angles {
        Some(text) => {
            let mut thetas: Vec<f64> = serde_json::from_str(text)
                .map_err(|e| usage(format!("--angles must be a JSON array of numbers: {e}")))?;
            if thetas.is_empty() {
                return Err(usage("--angles needs at least one angle"));
            }
            if args.degrees {
                for t in &mut thetas {
                    *t = t.to_radians();
                }
            }
            for t in &mut thetas {
                *t = snap_right_angle(*t);
            }
            thetas.sort_by(f64::total_cmp);
            let n1 = args.n1.unwrap_or(thetas.len());
            let n2 = args.n2.unwrap_or(thetas.len());
            let m = args.m.unwrap_or(n1 + n2 + 2);
            let pair = gen_subspace_pair(m, n1, n2, Some(&thetas), seed)?;
            let (lo, hi) = (thetas[0], *thetas.last().expect("nonempty"));
            Ok((pair, lo, hi))
        }
        None => {
            let (n1, n2) = match (args.n1, args.n2) {
                (Some(n1), Some(n2)) => (n1, n2),
                _ => return Err(usage("give --angles, or --n1 and --n2 for a random pair")),
            };
            let m = args.m.unwrap_or(n1 + n2 + 2);
            let pair = gen_subspace_pair::<f64>(m, n1, n2, None, seed)?;
            let thetas = pair.thetas();
            let (lo, hi) = (thetas[0], *thetas.last().expect("min(n1,n2) ≥ 1 angles"));
            Ok((pair, lo, hi))
        }
    }
}
