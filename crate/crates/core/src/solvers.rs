//! Iterative solvers for the two-block model and rate estimation from
//! their error traces.
//!
//! Four iterations share one trace format: plain gradient descent on the
//! stacked matrix, the heavy-ball two-term recurrence, the two-block
//! Gauss–Seidel sweep, and block exact minimization (the unit-stepsize
//! sweep). [`solve_via_block_qr`] composes per-block QR orthogonalization
//! with the optimally tuned sweep, and [`asymptotic_rate`] reads a
//! contraction factor off the tail of any trace.
//!
//! All solvers start from `x⁰ = 0` unless a `_from` variant is used, run a
//! fixed number of iterations with no early stopping, and record
//! `‖xᵗ − x*‖₂` for `t = 0..iters` against the cached least-squares
//! solution.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::model::{BlockProblem, Method};
use crate::numkernels::{back_substitute, qr_thin, DenseMatrix, DenseVector};
use crate::real::Real;
use crate::stepsizes::bgd_optimal;
use crate::tol;

/// Per-iteration error norms of one solver run plus the parameters that
/// produced it.
///
/// `errors[t]` is `‖xᵗ − x*‖₂`, so a run of `iters` iterations yields
/// `iters + 1` entries. Parameter fields are `None` when the method does
/// not take them.
#[derive(Debug, Clone)]
pub struct SolverTrace<T> {
    /// Which iteration produced the trace.
    pub method: Method,
    /// First-block stepsize, or the single stepsize for one-parameter methods.
    pub gamma1: Option<T>,
    /// Second-block stepsize.
    pub gamma2: Option<T>,
    /// Heavy-ball stepsize.
    pub alpha: Option<T>,
    /// Heavy-ball momentum.
    pub beta: Option<T>,
    /// Seed of the instance the run was taken on, when one is known.
    pub seed: Option<u64>,
    /// `‖xᵗ − x*‖₂` for `t = 0..=iters`.
    pub errors: Vec<T>,
    /// Wall-clock time of the run.
    pub wall: Duration,
}

/// Column header of the trace CSV schema.
pub const TRACE_CSV_HEADER: &str = "iter,error,method,gamma1,gamma2,alpha,beta,seed";

impl<T: Real> SolverTrace<T> {
    /// Error at `t = 0`.
    pub fn initial_error(&self) -> T {
        self.errors[0]
    }

    /// Error after the final iteration.
    pub fn final_error(&self) -> T {
        *self.errors.last().expect("trace is never empty")
    }

    /// Render the trace as CSV, one row per iteration.
    ///
    /// The header is [`TRACE_CSV_HEADER`]; parameter fields the method does
    /// not use stay empty. Wall time is not serialized.
    ///
    /// # Example
    ///
    /// ```
    /// use blockstep_core::model::Method;
    /// use blockstep_core::solvers::SolverTrace;
    /// use std::time::Duration;
    ///
    /// let trace = SolverTrace {
    ///     method: Method::Gd,
    ///     gamma1: Some(1.0f64),
    ///     gamma2: None,
    ///     alpha: None,
    ///     beta: None,
    ///     seed: Some(7),
    ///     errors: vec![1.0, 0.5],
    ///     wall: Duration::ZERO,
    /// };
    /// let text = trace.to_csv();
    /// assert!(text.starts_with("iter,error,method,gamma1,gamma2,alpha,beta,seed\n"));
    /// assert!(text.contains("0,1e0,gd,1,,,,7"));
    /// ```
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<T>| v.map(|x| format!("{}", x.as_f64())).unwrap_or_default();
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        for (t, &e) in self.errors.iter().enumerate() {
            out.push_str(&format!(
                "{},{:e},{},{},{},{},{},{}\n",
                t,
                e.as_f64(),
                self.method.tag(),
                opt(self.gamma1),
                opt(self.gamma2),
                opt(self.alpha),
                opt(self.beta),
                seed,
            ));
        }
        out
    }

    /// Parse a trace back from the CSV produced by [`SolverTrace::to_csv`].
    ///
    /// Metadata is taken from the first row; wall time is not stored in the
    /// schema and comes back as zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::BadShape("empty trace CSV".to_string()))?;
        if header != TRACE_CSV_HEADER {
            return Err(Error::BadShape(format!(
                "unexpected trace CSV header: {header}"
            )));
        }
        let mut meta: Option<(Method, [Option<T>; 4], Option<u64>)> = None;
        let mut errors = Vec::new();
        for (row, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::BadShape(format!(
                    "trace CSV row {row} has {} fields, expected 8",
                    fields.len()
                )));
            }
            let iter: usize = fields[0]
                .parse()
                .map_err(|_| Error::BadShape(format!("bad iteration index {:?}", fields[0])))?;
            if iter != row {
                return Err(Error::BadShape(format!(
                    "trace CSV rows out of order: row {row} has iter {iter}"
                )));
            }
            let value: f64 = fields[1]
                .parse()
                .map_err(|_| Error::BadShape(format!("bad error value {:?}", fields[1])))?;
            errors.push(T::c(value));
            if meta.is_none() {
                let method = Method::from_tag(fields[2]).ok_or_else(|| {
                    Error::BadShape(format!("unknown method tag {:?}", fields[2]))
                })?;
                let mut params = [None; 4];
                for (k, raw) in fields[3..7].iter().enumerate() {
                    if !raw.is_empty() {
                        let v: f64 = raw.parse().map_err(|_| {
                            Error::BadShape(format!("bad parameter value {raw:?}"))
                        })?;
                        params[k] = Some(T::c(v));
                    }
                }
                let seed = if fields[7].is_empty() {
                    None
                } else {
                    Some(fields[7].parse().map_err(|_| {
                        Error::BadShape(format!("bad seed value {:?}", fields[7]))
                    })?)
                };
                meta = Some((method, params, seed));
            }
        }
        let (method, [gamma1, gamma2, alpha, beta], seed) =
            meta.ok_or_else(|| Error::BadShape("trace CSV has no rows".to_string()))?;
        Ok(SolverTrace {
            method,
            gamma1,
            gamma2,
            alpha,
            beta,
            seed,
            errors,
            wall: Duration::ZERO,
        })
    }
}

/// Contraction factor fitted to the tail of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate<T> {
    /// Geometric-mean consecutive ratio over the fitted window.
    pub rho_hat: T,
    /// Iteration range `[start, end]` the fit used.
    pub window: (usize, usize),
    /// Root-mean-square deviation of the log-ratios from their mean.
    pub residual: T,
    /// Whether the raw ratio exceeded the divergence cap and was clamped.
    pub diverged: bool,
}

/// Gradient descent `x⁺ = x − γ Aᵀ(Ax − y)` on the stacked system,
/// started from zero.
///
/// # Example
///
/// ```
/// use blockstep_core::model::BlockProblem;
/// use blockstep_core::numkernels::{DenseMatrix, DenseVector};
/// use blockstep_core::solvers::run_gd;
///
/// // orthogonal unit columns: the Gram matrix is the identity, so one
/// // unit step lands on the solution
/// let a1 = DenseMatrix::from_rows(&[&[1.0f64], &[0.0]]);
/// let a2 = DenseMatrix::from_rows(&[&[0.0f64], &[1.0]]);
/// let p = BlockProblem::new(a1, a2, DenseVector::new(vec![2.0, -1.0])).unwrap();
/// let trace = run_gd(&p, 1.0, 3);
/// assert!(trace.errors[1] < 1e-14);
/// ```
pub fn run_gd<T: Real>(problem: &BlockProblem<T>, gamma: T, iters: usize) -> SolverTrace<T> {
    let x0 = DenseVector::zeros(problem.n1() + problem.n2());
    run_gd_from(problem, gamma, iters, &x0)
}

/// Gradient descent from an explicit starting point.
pub fn run_gd_from<T: Real>(
    problem: &BlockProblem<T>,
    gamma: T,
    iters: usize,
    x0: &DenseVector<T>,
) -> SolverTrace<T> {
    assert!(gamma > T::zero(), "stepsize must be positive");
    assert!(iters >= 1, "need at least one iteration");
    let n = problem.n1() + problem.n2();
    assert_eq!(x0.len(), n, "starting point has the wrong length");
    let clock = Instant::now();
    let stacked = problem.stacked();
    let gram = stacked.gram();
    let aty = stacked.transpose().mul_vec(problem.y());
    let xstar = problem.xstar();
    let mut x = x0.clone();
    let mut errors = Vec::with_capacity(iters + 1);
    errors.push(x.sub(xstar).norm());
    for _ in 0..iters {
        let grad = gram.mul_vec(&x).sub(&aty);
        x = x.sub(&grad.scale(gamma));
        errors.push(x.sub(xstar).norm());
    }
    SolverTrace {
        method: Method::Gd,
        gamma1: Some(gamma),
        gamma2: None,
        alpha: None,
        beta: None,
        seed: None,
        errors,
        wall: clock.elapsed(),
    }
}

/// Heavy ball `x⁺⁺ = x⁺ − α ∇F(x⁺) + β (x⁺ − x)` with `x⁻¹ = x⁰ = 0`.
pub fn run_hb<T: Real>(problem: &BlockProblem<T>, alpha: T, beta: T, iters: usize) -> SolverTrace<T> {
    let x0 = DenseVector::zeros(problem.n1() + problem.n2());
    run_hb_from(problem, alpha, beta, iters, &x0)
}

/// Heavy ball from an explicit starting point (`x⁻¹ = x⁰ = x0`).
pub fn run_hb_from<T: Real>(
    problem: &BlockProblem<T>,
    alpha: T,
    beta: T,
    iters: usize,
    x0: &DenseVector<T>,
) -> SolverTrace<T> {
    assert!(alpha > T::zero(), "stepsize must be positive");
    assert!(beta >= T::zero(), "momentum must be nonnegative");
    assert!(iters >= 1, "need at least one iteration");
    let n = problem.n1() + problem.n2();
    assert_eq!(x0.len(), n, "starting point has the wrong length");
    let clock = Instant::now();
    let stacked = problem.stacked();
    let gram = stacked.gram();
    let aty = stacked.transpose().mul_vec(problem.y());
    let xstar = problem.xstar();
    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut errors = Vec::with_capacity(iters + 1);
    errors.push(x.sub(xstar).norm());
    for _ in 0..iters {
        let grad = gram.mul_vec(&x).sub(&aty);
        // evaluate as (x − α·grad) + β·(x − x_prev) so that β = 0 reproduces
        // the gradient-descent arithmetic bit for bit
        let next = x.sub(&grad.scale(alpha)).add(&x.sub(&x_prev).scale(beta));
        x_prev = x;
        x = next;
        errors.push(x.sub(xstar).norm());
    }
    SolverTrace {
        method: Method::Hb,
        gamma1: None,
        gamma2: None,
        alpha: Some(alpha),
        beta: Some(beta),
        seed: None,
        errors,
        wall: clock.elapsed(),
    }
}

/// Two-block gradient descent: a Gauss–Seidel sweep that updates the first
/// block, then the second block using the already-updated first block.
pub fn run_bgd<T: Real>(
    problem: &BlockProblem<T>,
    gamma1: T,
    gamma2: T,
    iters: usize,
) -> SolverTrace<T> {
    let x0 = DenseVector::zeros(problem.n1() + problem.n2());
    run_bgd_from(problem, gamma1, gamma2, iters, &x0)
}

/// Two-block gradient descent from an explicit starting point.
pub fn run_bgd_from<T: Real>(
    problem: &BlockProblem<T>,
    gamma1: T,
    gamma2: T,
    iters: usize,
    x0: &DenseVector<T>,
) -> SolverTrace<T> {
    assert!(
        gamma1 > T::zero() && gamma2 > T::zero(),
        "stepsizes must be positive"
    );
    assert!(iters >= 1, "need at least one iteration");
    let n = problem.n1() + problem.n2();
    assert_eq!(x0.len(), n, "starting point has the wrong length");
    let clock = Instant::now();
    let (errors, _) = bgd_core(problem, gamma1, gamma2, iters, x0);
    SolverTrace {
        method: Method::Bgd,
        gamma1: Some(gamma1),
        gamma2: Some(gamma2),
        alpha: None,
        beta: None,
        seed: None,
        errors,
        wall: clock.elapsed(),
    }
}

/// Block exact minimization: the unit-stepsize sweep, valid when both
/// blocks are orthonormal (each half-step then minimizes the objective
/// over its block exactly).
pub fn run_bem<T: Real>(problem: &BlockProblem<T>, iters: usize) -> Result<SolverTrace<T>> {
    let x0 = DenseVector::zeros(problem.n1() + problem.n2());
    run_bem_from(problem, iters, &x0)
}

/// Block exact minimization from an explicit starting point.
pub fn run_bem_from<T: Real>(
    problem: &BlockProblem<T>,
    iters: usize,
    x0: &DenseVector<T>,
) -> Result<SolverTrace<T>> {
    if !problem.assumes_bwo() {
        return Err(Error::NotBWO(
            "block exact minimization via unit stepsizes needs orthonormal blocks".to_string(),
        ));
    }
    let mut trace = run_bgd_from(problem, T::one(), T::one(), iters, x0);
    trace.method = Method::Bem;
    trace.gamma1 = None;
    trace.gamma2 = None;
    Ok(trace)
}

/// The Gauss–Seidel sweep shared by [`run_bgd`] and [`solve_via_block_qr`];
/// returns the error trace and the final iterate.
fn bgd_core<T: Real>(
    problem: &BlockProblem<T>,
    gamma1: T,
    gamma2: T,
    iters: usize,
    x0: &DenseVector<T>,
) -> (Vec<T>, DenseVector<T>) {
    let n1 = problem.n1();
    let xstar = problem.xstar();
    let (mut x1, mut x2) = x0.split_at(n1);
    let mut errors = Vec::with_capacity(iters + 1);
    errors.push(x0.sub(xstar).norm());
    let a1t = problem.a1().transpose();
    let a2t = problem.a2().transpose();
    let b1 = a1t.mul_vec(problem.y());
    let b2 = a2t.mul_vec(problem.y());
    if problem.assumes_bwo() {
        // blockwise orthonormality collapses the Gram blocks to identities
        // and the cached coupling matrix
        let c = problem.c();
        let ct = c.transpose();
        for _ in 0..iters {
            let g1 = x1.add(&ct.mul_vec(&x2)).sub(&b1);
            x1 = x1.sub(&g1.scale(gamma1));
            let g2 = c.mul_vec(&x1).add(&x2).sub(&b2);
            x2 = x2.sub(&g2.scale(gamma2));
            errors.push(DenseVector::concat(&x1, &x2).sub(xstar).norm());
        }
    } else {
        let g11 = problem.a1().gram();
        let g22 = problem.a2().gram();
        let g12 = a1t.mul(problem.a2());
        let g21 = g12.transpose();
        for _ in 0..iters {
            let g1 = g11.mul_vec(&x1).add(&g12.mul_vec(&x2)).sub(&b1);
            x1 = x1.sub(&g1.scale(gamma1));
            let g2 = g21.mul_vec(&x1).add(&g22.mul_vec(&x2)).sub(&b2);
            x2 = x2.sub(&g2.scale(gamma2));
            errors.push(DenseVector::concat(&x1, &x2).sub(xstar).norm());
        }
    }
    (errors, DenseVector::concat(&x1, &x2))
}

/// Orthogonalize raw blocks by QR, run the optimally tuned sweep on the
/// orthonormal problem, and map the solution back through the triangular
/// factors.
///
/// Returns the recovered solution of the raw system together with the
/// inner sweep's trace.
pub fn solve_via_block_qr<T: Real>(
    a1raw: &DenseMatrix<T>,
    a2raw: &DenseMatrix<T>,
    y: &DenseVector<T>,
    iters: usize,
) -> Result<(DenseVector<T>, SolverTrace<T>)> {
    assert!(iters >= 1, "need at least one iteration");
    let (q1, r1) = qr_thin(a1raw)?;
    let (q2, r2) = qr_thin(a2raw)?;
    check_full_rank(&r1, "first")?;
    check_full_rank(&r2, "second")?;
    let clock = Instant::now();
    let problem = BlockProblem::new(q1, q2, y.clone())?;
    let lambda1 = problem
        .lambdas_cc()
        .as_slice()
        .first()
        .copied()
        .unwrap_or_else(T::zero);
    // mutually orthogonal blocks have no coupling to tune against; the
    // unit sweep already minimizes each block exactly. otherwise tune
    // from the largest coupling value alone: single-column blocks get
    // the exact annihilating pair, wider blocks the conservative equal
    // pair.
    let (gamma1, gamma2) = if lambda1 > T::zero() {
        let plan = bgd_optimal(&[lambda1], 1, problem.n1(), problem.n2())?;
        (plan.gamma1, plan.gamma2)
    } else {
        (T::one(), T::one())
    };
    let (errors, z) = bgd_core(
        &problem,
        gamma1,
        gamma2,
        iters,
        &DenseVector::zeros(problem.n1() + problem.n2()),
    );
    let (z1, z2) = z.split_at(problem.n1());
    let x1 = back_substitute(&r1, &z1)?;
    let x2 = back_substitute(&r2, &z2)?;
    let trace = SolverTrace {
        method: Method::Bgd,
        gamma1: Some(gamma1),
        gamma2: Some(gamma2),
        alpha: None,
        beta: None,
        seed: None,
        errors,
        wall: clock.elapsed(),
    };
    Ok((DenseVector::concat(&x1, &x2), trace))
}

fn check_full_rank<T: Real>(r: &DenseMatrix<T>, which: &str) -> Result<()> {
    let n = r.cols();
    let mut largest = T::zero();
    let mut smallest = T::infinity();
    for j in 0..n {
        let d = r[(j, j)].abs();
        largest = largest.max(d);
        smallest = smallest.min(d);
    }
    if smallest <= T::c(tol::RANK_GATE_QR) * largest {
        return Err(Error::RankDeficient(format!(
            "{which} block is rank deficient: QR diagonal ratio {:e}",
            (smallest / largest).as_f64()
        )));
    }
    Ok(())
}

/// Fit a contraction factor to the final quarter of a trace.
///
/// See [`asymptotic_rate_with`] for the window semantics.
///
/// # Example
///
/// ```
/// use blockstep_core::model::Method;
/// use blockstep_core::solvers::{asymptotic_rate, SolverTrace};
/// use std::time::Duration;
///
/// let trace = SolverTrace {
///     method: Method::Gd,
///     gamma1: Some(1.0f64),
///     gamma2: None,
///     alpha: None,
///     beta: None,
///     seed: None,
///     errors: (0..41).map(|t| 0.5f64.powi(t)).collect(),
///     wall: Duration::ZERO,
/// };
/// let fit = asymptotic_rate(&trace).unwrap();
/// assert!((fit.rho_hat - 0.5).abs() < 1e-12);
/// ```
pub fn asymptotic_rate<T: Real>(trace: &SolverTrace<T>) -> Result<RateEstimate<T>> {
    asymptotic_rate_with(trace, T::c(0.25))
}

/// Fit a contraction factor to the final `window_fraction` of a trace.
///
/// The window covers the last `window_fraction` of the recorded ratios.
/// Entries below the relative floor `max(1e−13, 100·ε)·errors[0]` are
/// dropped from the end of the window (they measure roundoff, not the
/// contraction); if the trace reaches that floor before the window starts,
/// or has fewer than 40 entries, the fit is refused with
/// [`Error::InsufficientTail`]. The estimate is the geometric mean of the
/// surviving consecutive ratios; raw values at or above 1.5 are clamped
/// and flagged as diverged.
pub fn asymptotic_rate_with<T: Real>(
    trace: &SolverTrace<T>,
    window_fraction: T,
) -> Result<RateEstimate<T>> {
    assert!(
        window_fraction > T::zero() && window_fraction <= T::one(),
        "window fraction must lie in (0, 1]"
    );
    let e = &trace.errors;
    let n = e.len();
    if n < 40 {
        return Err(Error::InsufficientTail(format!(
            "need at least 40 trace entries, got {n}"
        )));
    }
    let e0 = e[0];
    if !(e0 > T::zero()) || !e0.is_finite() {
        return Err(Error::InsufficientTail(
            "initial error is zero; there is no decay to fit".to_string(),
        ));
    }
    let total = n - 1;
    let width = ((window_fraction * T::c(total as f64)).as_f64().floor() as usize).max(1);
    let start = total - width;
    let floor = T::c(tol::TRACE_FLOOR_REL).max(T::c(tol::FLOOR_GUARD) * T::epsilon()) * e0;
    // last usable index: everything from the first sub-floor entry on is noise
    let mut last = total;
    for (t, &v) in e.iter().enumerate() {
        if !(v >= floor) {
            last = t.saturating_sub(1);
            break;
        }
    }
    if last <= start {
        return Err(Error::InsufficientTail(format!(
            "trace reached the convergence floor at iteration {} before the fit window at {}",
            last + 1,
            start
        )));
    }
    let cap = T::c(tol::DIVERGENCE_CAP);
    let clamped = cap * (T::one() - T::epsilon());
    if e[start..=last].iter().any(|v| !v.is_finite()) {
        return Ok(RateEstimate {
            rho_hat: clamped,
            window: (start, last),
            residual: T::zero(),
            diverged: true,
        });
    }
    let count = T::c((last - start) as f64);
    let mean_log = (e[last].ln() - e[start].ln()) / count;
    let mut dev = T::zero();
    for t in start..last {
        let d = (e[t + 1].ln() - e[t].ln()) - mean_log;
        dev += d * d;
    }
    let residual = (dev / count).sqrt();
    let raw = mean_log.exp();
    let diverged = !(raw < cap);
    Ok(RateEstimate {
        rho_hat: if diverged { clamped } else { raw },
        window: (start, last),
        residual,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::build_m;
    use crate::stepsizes::{bgd_optimal, hb_optimal};
    use proptest::prelude::*;

    fn planted_bwo(thetas: &[f64], n1: usize, n2: usize, m: usize) -> BlockProblem<f64> {
        assert!(thetas.len() == n1.min(n2) && m >= n1 + n2);
        let mut a1 = DenseMatrix::<f64>::zeros(m, n1);
        for j in 0..n1 {
            a1[(j, j)] = 1.0;
        }
        let mut a2 = DenseMatrix::<f64>::zeros(m, n2);
        for j in 0..n2 {
            if j < thetas.len() {
                a2[(j, j)] = thetas[j].cos();
                a2[(n1 + j, j)] = thetas[j].sin();
            } else {
                a2[(n1 + j, j)] = 1.0;
            }
        }
        let y = DenseVector::new((0..m).map(|i| (i as f64 * 0.7).sin()).collect());
        BlockProblem::new(a1, a2, y).unwrap()
    }

    fn synthetic_trace(errors: Vec<f64>) -> SolverTrace<f64> {
        SolverTrace {
            method: Method::Gd,
            gamma1: Some(1.0),
            gamma2: None,
            alpha: None,
            beta: None,
            seed: None,
            errors,
            wall: Duration::ZERO,
        }
    }

    #[test]
    fn gd_reaches_the_solution_in_one_step_on_orthogonal_columns() {
        let a1 = DenseMatrix::from_rows(&[&[1.0f64], &[0.0], &[0.0]]);
        let a2 = DenseMatrix::from_rows(&[&[0.0f64], &[1.0], &[0.0]]);
        let p = BlockProblem::new(a1, a2, DenseVector::new(vec![2.0, -1.0, 5.0])).unwrap();
        let trace = run_gd(&p, 1.0, 3);
        assert!(trace.errors[0] > 1.0);
        assert!(trace.errors[1] < 1e-14);
        assert!(trace.final_error() < 1e-14);

        // starting at the solution is a fixed point for every solver
        let xstar = p.xstar().clone();
        let e0 = trace.initial_error();
        let gd = run_gd_from(&p, 0.7, 5, &xstar);
        let hb = run_hb_from(&p, 0.7, 0.2, 5, &xstar);
        let bgd = run_bgd_from(&p, 0.7, 1.3, 5, &xstar);
        for t in &[gd, hb, bgd] {
            assert!(t.errors.iter().all(|&e| e <= 1e-13 * e0));
        }
    }

    #[test]
    fn heavy_ball_with_momentum_off_is_exactly_gradient_descent() {
        let p = planted_bwo(&[std::f64::consts::FRAC_PI_3], 1, 1, 3);
        let gd = run_gd(&p, 0.3, 50);
        let hb = run_hb(&p, 0.3, 0.0, 50);
        assert_eq!(gd.errors, hb.errors);
    }

    #[test]
    fn one_sweep_follows_the_error_propagation_matrix() {
        // orthonormal path
        let p = planted_bwo(&[0.5, 1.1], 2, 3, 7);
        let x0 = DenseVector::new((0..5).map(|i| (i as f64 * 1.3).cos()).collect());
        let (gamma1, gamma2) = (1.4, 0.6);
        let (_, x1) = bgd_core(&p, gamma1, gamma2, 1, &x0);
        let e0 = x0.sub(p.xstar());
        let e1 = x1.sub(p.xstar());
        let predicted = build_m(&p, gamma1, gamma2).unwrap().mul_vec(&e0);
        assert!(e1.sub(&predicted).norm() <= tol::RECURRENCE * e0.norm());

        // general path: scale one column so the first block is no longer
        // orthonormal; the recurrence is a consequence of the normal
        // equations alone
        let mut a1 = p.a1().clone();
        for i in 0..a1.rows() {
            a1[(i, 0)] *= 2.0;
        }
        let loose = BlockProblem::new(a1, p.a2().clone(), p.y().clone()).unwrap();
        assert!(!loose.assumes_bwo());
        let (_, lx1) = bgd_core(&loose, gamma1, gamma2, 1, &x0);
        let le0 = x0.sub(loose.xstar());
        let le1 = lx1.sub(loose.xstar());
        let lpred = build_m(&loose, gamma1, gamma2).unwrap().mul_vec(&le0);
        assert!(le1.sub(&lpred).norm() <= tol::RECURRENCE * le0.norm());
    }

    #[test]
    fn unit_stepsizes_minimize_each_block_exactly() {
        let p = planted_bwo(&[0.8, 1.2], 2, 2, 6);
        let x0 = DenseVector::new(vec![0.3, -0.7, 1.1, 0.4]);
        let (x1, x2) = x0.split_at(2);
        let ct = p.c().transpose();
        let b1 = p.a1().transpose().mul_vec(p.y());
        // the unit half-step sets the first block's gradient to zero
        let g1 = x1.add(&ct.mul_vec(&x2)).sub(&b1);
        let x1_half = x1.sub(&g1);
        let after = x1_half.add(&ct.mul_vec(&x2)).sub(&b1);
        assert!(after.norm() <= 1e-13 * (1.0 + b1.norm()));

        // block exact minimization is the unit-stepsize sweep
        let bem = run_bem(&p, 30).unwrap();
        let bgd = run_bgd(&p, 1.0, 1.0, 30);
        assert_eq!(bem.errors, bgd.errors);
        assert_eq!(bem.method, Method::Bem);
        assert!(bem.gamma1.is_none() && bem.gamma2.is_none());

        // and its tail contracts at the largest coupling eigenvalue
        let p_slow = planted_bwo(&[(0.7f64).sqrt().acos()], 1, 1, 3);
        let trace = run_bem(&p_slow, 60).unwrap();
        let fit = asymptotic_rate(&trace).unwrap();
        assert!((fit.rho_hat - 0.7).abs() <= tol::RATE_FIT * 0.7);

        // non-orthonormal blocks are refused
        let mut a1 = p.a1().clone();
        for i in 0..a1.rows() {
            a1[(i, 0)] *= 2.0;
        }
        let loose = BlockProblem::new(a1, p.a2().clone(), p.y().clone()).unwrap();
        assert!(matches!(run_bem(&loose, 5), Err(Error::NotBWO(_))));
    }

    #[test]
    fn two_column_gauss_seidel_is_nilpotent_at_the_tuned_stepsizes() {
        let a1 = DenseMatrix::from_rows(&[&[1.0f64], &[0.0], &[0.0]]);
        let a2 = DenseMatrix::from_rows(&[&[0.6f64], &[0.8], &[0.0]]);
        let y = DenseVector::new(vec![1.0, 2.0, -0.5]);
        let p = BlockProblem::new(a1, a2, y).unwrap();
        // for unit columns the tuned pair is γ1 = 1, γ2 = 1/(1 − c²)
        let (gamma1, gamma2) = (1.0, 1.0 / (1.0 - 0.36));
        let m = build_m(&p, gamma1, gamma2).unwrap();
        assert!(m.mul(&m).max_abs() <= 1e-12);
        let trace = run_bgd(&p, gamma1, gamma2, 5);
        assert!(trace.errors[2] <= 1e-10 * trace.errors[0]);
    }

    #[test]
    fn predicted_contractions_show_up_in_the_tails() {
        // one coupled direction at λ1 = 0.95, one fully orthogonal pair
        let theta = (0.95f64).sqrt().acos();
        let p = planted_bwo(&[theta, std::f64::consts::FRAC_PI_2], 2, 2, 6);
        let lambda1 = p.lambdas_cc().as_slice()[0];
        assert!((lambda1 - 0.95).abs() < 1e-12 && p.r() == 1);

        // gradient descent: unit stepsize is optimal on [1−√λ1, 1+√λ1]
        let rho_gd = lambda1.sqrt();
        let gd = run_gd(&p, 1.0, 300);
        let fit = asymptotic_rate(&gd).unwrap();
        assert!((fit.rho_hat - rho_gd).abs() <= tol::RATE_FIT * rho_gd);
        assert!(!fit.diverged);

        // heavy ball at its optimum
        let hb = hb_optimal(1.0 + lambda1.sqrt(), 1.0 - lambda1.sqrt()).unwrap();
        let hb_trace = run_hb(&p, hb.alpha, hb.beta, 150);
        let fit = asymptotic_rate(&hb_trace).unwrap();
        assert!((fit.rho_hat - hb.rho).abs() <= tol::RATE_FIT * hb.rho);

        // two-block sweep at its optimum: the square of the heavy-ball rate
        let plan = bgd_optimal(&[lambda1], p.r(), 2, 2).unwrap();
        assert!((plan.rho - hb.rho * hb.rho).abs() <= 1e-12);
        let bgd = run_bgd(&p, plan.gamma1, plan.gamma2, 80);
        let fit = asymptotic_rate(&bgd).unwrap();
        assert!((fit.rho_hat - plan.rho).abs() <= tol::RATE_FIT * plan.rho);
    }

    #[test]
    fn rate_fit_reads_clean_geometric_decay() {
        let trace = synthetic_trace((0..41).map(|t| 0.5f64.powi(t)).collect());
        let fit = asymptotic_rate(&trace).unwrap();
        assert!((fit.rho_hat - 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(!fit.diverged);

        // scale invariance
        let trace = synthetic_trace((0..60).map(|t| 3.0 * 0.9f64.powi(t)).collect());
        let fit = asymptotic_rate(&trace).unwrap();
        assert!((fit.rho_hat - 0.9).abs() < 1e-12);
        assert_eq!(fit.window, (45, 59));
    }

    #[test]
    fn rate_fit_guards_refuse_unusable_traces() {
        // too short
        let trace = synthetic_trace((0..39).map(|t| 0.5f64.powi(t)).collect());
        assert!(matches!(
            asymptotic_rate(&trace),
            Err(Error::InsufficientTail(_))
        ));

        // converged to the floor before the window starts
        let trace = synthetic_trace((0..200).map(|t| 0.5f64.powi(t)).collect());
        assert!(matches!(
            asymptotic_rate(&trace),
            Err(Error::InsufficientTail(_))
        ));
        // ... but a wider window that reaches back before the floor is fine
        let fit = asymptotic_rate_with(&trace, 0.9).unwrap();
        assert!((fit.rho_hat - 0.5).abs() < 1e-12);

        // nothing to fit when the start is already exact
        let trace = synthetic_trace(vec![0.0; 50]);
        assert!(matches!(
            asymptotic_rate(&trace),
            Err(Error::InsufficientTail(_))
        ));

        // divergence is flagged and clamped, not propagated
        let trace = synthetic_trace((0..50).map(|t| 1.6f64.powi(t)).collect());
        let fit = asymptotic_rate(&trace).unwrap();
        assert!(fit.diverged);
        assert!(fit.rho_hat < tol::DIVERGENCE_CAP);

        // growth below the cap is reported as measured
        let trace = synthetic_trace((0..50).map(|t| 1.2f64.powi(t)).collect());
        let fit = asymptotic_rate(&trace).unwrap();
        assert!(!fit.diverged);
        assert!((fit.rho_hat - 1.2).abs() < 1e-12);
    }

    #[test]
    fn block_qr_recovers_the_least_squares_solution() {
        // skewed, badly scaled raw blocks
        let a1 = DenseMatrix::from_rows(&[
            &[3.0f64, 1.0],
            &[0.5, -2.0],
            &[1.0, 4.0],
            &[-1.5, 0.25],
            &[2.0, 2.0],
        ]);
        let a2 = DenseMatrix::from_rows(&[
            &[1.0f64, 0.1],
            &[2.0, -0.3],
            &[0.0, 5.0],
            &[1.0, 1.0],
            &[-3.0, 0.7],
        ]);
        let y = DenseVector::new(vec![1.0, -1.0, 2.0, 0.5, 3.0]);
        let (x, trace) = solve_via_block_qr(&a1, &a2, &y, 120).unwrap();
        let stacked = DenseMatrix::hstack(&a1, &a2);
        let direct = crate::numkernels::solve_least_squares(&stacked, &y).unwrap();
        let res = stacked.mul_vec(&x).sub(&y).norm();
        let res_direct = stacked.mul_vec(&direct).sub(&y).norm();
        assert!(res <= res_direct + 1e-6);
        assert!(trace.final_error() <= 1e-10 * trace.initial_error());

        // a duplicated column is refused
        let bad = DenseMatrix::from_rows(&[
            &[1.0f64, 1.0],
            &[2.0, 2.0],
            &[3.0, 3.0],
            &[4.0, 4.0],
            &[5.0, 5.0],
        ]);
        assert!(matches!(
            solve_via_block_qr(&bad, &a2, &y, 10),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn block_qr_passes_orthonormal_blocks_through() {
        let p = planted_bwo(&[std::f64::consts::FRAC_PI_3], 1, 1, 4);
        let (x, trace) = solve_via_block_qr(p.a1(), p.a2(), p.y(), 60).unwrap();
        assert!(x.sub(p.xstar()).norm() <= 1e-12 * (1.0 + p.xstar().norm()));
        assert!(trace.final_error() <= 1e-12 * (1.0 + trace.initial_error()));
    }

    #[test]
    fn traces_round_trip_through_the_csv_schema() {
        let p = planted_bwo(&[0.9], 1, 1, 3);
        let mut trace = run_bgd(&p, 1.25, 0.75, 12);
        trace.seed = Some(7);
        let text = trace.to_csv();
        assert!(text.starts_with("iter,error,method,gamma1,gamma2,alpha,beta,seed\n"));
        let back = SolverTrace::<f64>::from_csv(&text).unwrap();
        assert_eq!(back.errors, trace.errors);
        assert_eq!(back.method, Method::Bgd);
        assert_eq!(back.gamma1, Some(1.25));
        assert_eq!(back.gamma2, Some(0.75));
        assert_eq!(back.alpha, None);
        assert_eq!(back.beta, None);
        assert_eq!(back.seed, Some(7));

        // a single-stepsize method leaves the other parameter fields empty
        let gd = run_gd(&p, 0.5, 3);
        let row = gd.to_csv().lines().nth(1).unwrap().to_string();
        assert!(row.ends_with(",gd,0.5,,,,"));

        // malformed inputs are refused with a shape error
        assert!(SolverTrace::<f64>::from_csv("nope\n1,2").is_err());
        assert!(SolverTrace::<f64>::from_csv(TRACE_CSV_HEADER).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prop_one_sweep_matches_the_iteration_matrix(
            theta1 in 0.15f64..1.4,
            theta2 in 0.15f64..1.4,
            gamma1 in 0.05f64..1.95,
            gamma2 in 0.05f64..1.95,
            seed_x in 0u32..1000,
        ) {
            let p = planted_bwo(&[theta1.min(theta2), theta1.max(theta2)], 2, 2, 5);
            let x0 = DenseVector::new(
                (0..4).map(|i| ((i as f64 + 1.0) * (seed_x as f64 + 0.5)).sin()).collect(),
            );
            let (_, x1) = bgd_core(&p, gamma1, gamma2, 1, &x0);
            let e0 = x0.sub(p.xstar());
            let e1 = x1.sub(p.xstar());
            let predicted = build_m(&p, gamma1, gamma2).unwrap().mul_vec(&e0);
            prop_assert!(e1.sub(&predicted).norm() <= tol::RECURRENCE * e0.norm());
        }

        #[test]
        fn prop_contracting_plans_eventually_contract(
            lambda1 in 0.05f64..0.95,
            spread in 0.0f64..1.0,
        ) {
            let lambda_r = lambda1 * (0.2 + 0.75 * spread);
            let thetas = [lambda1.sqrt().acos(), lambda_r.sqrt().acos()];
            let p = planted_bwo(&thetas, 2, 2, 5);
            let plan = bgd_optimal(
                &[lambda1, lambda_r], 2, 2, 2,
            ).unwrap();
            prop_assert!(plan.rho < 1.0);
            let trace = run_bgd(&p, plan.gamma1, plan.gamma2, 200);
            let floor = 1e-13 * trace.errors[0];
            let tail = trace.errors.len() - trace.errors.len() / 10;
            for t in tail..trace.errors.len() {
                // ratios are meaningful only above the roundoff floor
                if trace.errors[t - 1] >= floor {
                    prop_assert!(trace.errors[t] < trace.errors[t - 1]);
                }
            }
        }
    }
}
