//! Provably optimal constant stepsizes for the least-squares solvers.
//!
//! Every routine here works from the eigenvalues `λ1 ≥ … ≥ λr` of `CCᵀ`
//! (the coupling Gram block under blockwise orthonormality) or from a raw
//! curvature interval. The centerpiece is [`bgd_optimal`], which minimizes
//! the spectral radius of the two-block iteration matrix `M(γ1, γ2)` over
//! both stepsizes simultaneously and returns the closed-form minimizer
//! together with the branch that produced it. The optimum makes the
//! per-eigenvalue quadratics of the closed-form spectrum equioscillate, so
//! its value can also be recovered from a heavy-ball minmax over the
//! reflected spectrum `{1 − λᵢ}` — a consistency check the tests exercise.
//!
//! Supporting routines cover the classical baselines (gradient descent and
//! heavy ball on a curvature interval), the equal-stepsize and fixed
//! `γ2 = 1` specializations, a generic scalar minmax, and a brute-force
//! grid search used as an empirical oracle.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Method;
use crate::real::Real;
use crate::spectrum::rho_of;
use crate::tol;

/// Which analytic branch produced a [`BgdOptimum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BgdBranch {
    /// `r < min(n1, n2)`: uncoupled directions force equal stepsizes.
    RankDeficient,
    /// Full rank with `n1 = n2`.
    FullRankEqual,
    /// Full rank attained by the first block (`r = n1 < n2`).
    FullRankN1,
    /// Full rank attained by the second block (`r = n2 < n1`).
    FullRankN2,
    /// Full rank with `r = min(n1, n2) = 1`: the iteration matrix is
    /// nilpotent at the optimum and the radius is exactly zero.
    RankOneZero,
}

/// Jointly optimal stepsizes for two-block gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgdOptimum<T> {
    /// Stepsize of the first block sweep.
    pub gamma1: T,
    /// Stepsize of the second block sweep.
    pub gamma2: T,
    /// Minimal spectral radius of `M(γ1, γ2)`.
    pub rho: T,
    /// Analytic branch that produced the optimum.
    pub branch: BgdBranch,
}

/// Optimal heavy-ball parameters with their guaranteed radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbOptimum<T> {
    /// Gradient stepsize `α`.
    pub alpha: T,
    /// Momentum coefficient `β`; always exactly `rho²`.
    pub beta: T,
    /// Asymptotic contraction factor.
    pub rho: T,
}

/// A named stepsize selection, ready for serialization.
#[derive(Debug, Clone)]
pub struct StepsizePlan<T> {
    /// Solver the parameters belong to.
    pub method: Method,
    /// Parameter name → value; sorted keys keep the JSON deterministic.
    pub params: BTreeMap<String, T>,
    /// Spectral radius the selection guarantees.
    pub predicted_rho: T,
}

#[derive(Serialize)]
struct PlanDto<'a> {
    method: &'a str,
    params: BTreeMap<&'a str, f64>,
    predicted_rho: f64,
}

impl<T: Real> StepsizePlan<T> {
    /// Builds a plan from parameter pairs.
    pub fn new(method: Method, params: &[(&str, T)], predicted_rho: T) -> Self {
        StepsizePlan {
            method,
            params: params
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
            predicted_rho,
        }
    }

    /// Serializes to the plan schema
    /// (`method`, `params: {name: value}`, `predicted_rho`).
    pub fn to_json(&self) -> String {
        let dto = PlanDto {
            method: self.method.tag(),
            params: self
                .params
                .iter()
                .map(|(k, v)| (k.as_str(), v.as_f64()))
                .collect(),
            predicted_rho: self.predicted_rho.as_f64(),
        };
        serde_json::to_string_pretty(&dto).expect("plan DTO always serializes")
    }
}

fn check_interval<T: Real>(lambda_max: T, lambda_min: T) -> Result<()> {
    if lambda_min <= T::zero() {
        return Err(Error::BadSpectrum(format!(
            "curvature interval must be positive, got λmin = {lambda_min}"
        )));
    }
    if lambda_max < lambda_min {
        return Err(Error::BadSpectrum(format!(
            "interval ends out of order: λmax = {lambda_max} < λmin = {lambda_min}"
        )));
    }
    Ok(())
}

/// Optimal constant stepsize for gradient descent on a quadratic whose
/// curvature lies in `[λmin, λmax]` with `λmin > 0`.
///
/// Returns `(γ, ρ)` with `γ = 2 / (λmax + λmin)` and
/// `ρ = (λmax − λmin) / (λmax + λmin)`.
pub fn gd_optimal<T: Real>(lambda_max: T, lambda_min: T) -> Result<(T, T)> {
    check_interval(lambda_max, lambda_min)?;
    let sum = lambda_max + lambda_min;
    Ok((T::c(2.0) / sum, (lambda_max - lambda_min) / sum))
}

/// Optimal heavy-ball parameters for a quadratic whose curvature lies in
/// `[λmin, λmax]` with `λmin > 0`.
///
/// `α = (2 / (√λmax + √λmin))²`, `ρ = (√λmax − √λmin) / (√λmax + √λmin)`,
/// and `β = ρ²` exactly.
pub fn hb_optimal<T: Real>(lambda_max: T, lambda_min: T) -> Result<HbOptimum<T>> {
    check_interval(lambda_max, lambda_min)?;
    let (hi, lo) = (lambda_max.sqrt(), lambda_min.sqrt());
    let alpha = (T::c(2.0) / (hi + lo)).powi(2);
    let rho = (hi - lo) / (hi + lo);
    Ok(HbOptimum {
        alpha,
        beta: rho * rho,
        rho,
    })
}

/// Heavy-ball minmax over an explicit descending positive spectrum.
///
/// Identical to [`hb_optimal`] on the extreme entries, but gates the input:
/// at least two eigenvalues ([`Error::TooFew`] otherwise), all positive,
/// descending.
pub fn heavyball_minmax<T: Real>(zetas: &[T]) -> Result<(T, T, T)> {
    if zetas.len() < 2 {
        return Err(Error::TooFew(format!(
            "heavy-ball minmax needs at least two eigenvalues, got {}",
            zetas.len()
        )));
    }
    for (i, &z) in zetas.iter().enumerate() {
        if z <= T::zero() {
            return Err(Error::BadSpectrum(format!(
                "eigenvalue {i} must be positive, got {z}"
            )));
        }
        if i > 0 && z > zetas[i - 1] {
            return Err(Error::BadSpectrum(format!(
                "eigenvalues must be descending, but ζ{i} > ζ{}",
                i - 1
            )));
        }
    }
    let opt = hb_optimal(zetas[0], zetas[zetas.len() - 1])?;
    Ok((opt.alpha, opt.beta, opt.rho))
}

/// Minimizes `max_i |1 − γ·ξᵢ|` over `γ` for a descending positive list.
///
/// Returns `(γ, value)`: the balanced point `γ = 2 / (ξ1 + ξlast)` with
/// value `(ξ1 − ξlast) / (ξ1 + ξlast)` when the list has two or more
/// entries, and the exact annihilator `(1/ξ1, 0)` for a single entry.
pub fn minmax_stepsize<T: Real>(xis: &[T]) -> Result<(T, T)> {
    if xis.is_empty() {
        return Err(Error::TooFew(
            "minmax needs at least one coefficient".to_string(),
        ));
    }
    for (i, &xi) in xis.iter().enumerate() {
        if xi <= T::zero() {
            return Err(Error::BadSpectrum(format!(
                "coefficient {i} must be positive, got {xi}"
            )));
        }
        if i > 0 && xi > xis[i - 1] {
            return Err(Error::BadSpectrum(format!(
                "coefficients must be descending, but ξ{i} > ξ{}",
                i - 1
            )));
        }
    }
    let (hi, lo) = (xis[0], xis[xis.len() - 1]);
    if xis.len() == 1 {
        return Ok((T::one() / hi, T::zero()));
    }
    Ok((T::c(2.0) / (hi + lo), (hi - lo) / (hi + lo)))
}

/// Optimal common stepsize `γ1 = γ2 = γ` for two-block gradient descent.
///
/// Returns `(γ, ρ)` with `γ = 2 / (1 + √(1 − λ1))` and `ρ = γ − 1`;
/// `λ1` is the largest eigenvalue of `CCᵀ` and must lie in `(0, 1)`.
///
/// # Example
///
/// ```
/// use blockstep_core::stepsizes::equal_stepsizes;
///
/// let (gamma, rho) = equal_stepsizes(0.75f64).unwrap();
/// assert!((gamma - 4.0 / 3.0).abs() < 1e-15);
/// assert!((rho - 1.0 / 3.0).abs() < 1e-15);
/// ```
pub fn equal_stepsizes<T: Real>(lambda1: T) -> Result<(T, T)> {
    if !(lambda1 > T::zero() && lambda1 < T::one()) {
        return Err(Error::OutOfRange(format!(
            "λ1 must lie in (0, 1), got {lambda1}"
        )));
    }
    let gamma = T::c(2.0) / (T::one() + (T::one() - lambda1).sqrt());
    Ok((gamma, gamma - T::one()))
}

fn check_lambdas<T: Real>(lambdas: &[T], r: usize, n1: usize, n2: usize) -> Result<()> {
    if n1 == 0 || n2 == 0 || r > n1.min(n2) {
        return Err(Error::BadShape(format!(
            "need n1, n2 ≥ 1 and r ≤ min(n1, n2), got n1={n1} n2={n2} r={r}"
        )));
    }
    if r == 0 {
        return Err(Error::BadSpectrum(
            "coupling rank must be at least one".to_string(),
        ));
    }
    if lambdas.len() < r {
        return Err(Error::BadSpectrum(format!(
            "rank {r} exceeds the {} supplied eigenvalues",
            lambdas.len()
        )));
    }
    for i in 0..r {
        let lam = lambdas[i];
        if !(lam > T::zero() && lam < T::one()) {
            return Err(Error::OutOfRange(format!(
                "eigenvalue {i} of CCᵀ must lie in (0, 1), got {lam}"
            )));
        }
        if i > 0 && lambdas[i] > lambdas[i - 1] {
            return Err(Error::BadSpectrum(format!(
                "eigenvalues must be descending, but λ{i} > λ{}",
                i - 1
            )));
        }
    }
    Ok(())
}

/// Jointly optimal stepsizes `(γ1, γ2)` for two-block gradient descent.
///
/// `lambdas` are the descending eigenvalues of `CCᵀ`, `r` its rank, and
/// `n1`, `n2` the block widths; each of the leading `r` eigenvalues must
/// lie strictly in `(0, 1)`.
///
/// When `r < min(n1, n2)` the uncoupled directions pin both stepsizes to
/// the common value of [`equal_stepsizes`]. At full rank let
/// `s1 = √(1 − λr)` and `sr = √(1 − λ1)`; the optimum splits into
///
/// ```text
/// γ± = ((√((1+sr)(1+s1)) ± √((1−sr)(1−s1))) / (s1 + sr))²,
/// ρ  = (s1 − sr) / (s1 + sr),
/// ```
///
/// with the larger stepsize assigned to the thinner block (ties go to the
/// first). The pair satisfies `γ1·γ2 = (2/(s1+sr))²` and
/// `(γ1 − 1)(γ2 − 1) = ρ²`. With a single coupled direction (`r = 1` at
/// full rank) — or extreme eigenvalues within [`tol::LAMBDA_TIE`] of each
/// other, where the closed form degenerates continuously — the formulas
/// collapse to `(1/(1 − λ1), 1)` and the iteration matrix becomes
/// nilpotent: `ρ = 0` exactly.
///
/// # Example
///
/// ```
/// use blockstep_core::stepsizes::{bgd_optimal, BgdBranch};
///
/// // rank-deficient coupling: both sweeps share γ = 4/3
/// let opt = bgd_optimal(&[0.75f64], 1, 2, 2).unwrap();
/// assert_eq!(opt.branch, BgdBranch::RankDeficient);
/// assert!((opt.gamma1 - 4.0 / 3.0).abs() < 1e-15);
/// assert!((opt.rho - 1.0 / 3.0).abs() < 1e-15);
/// ```
pub fn bgd_optimal<T: Real>(
    lambdas: &[T],
    r: usize,
    n1: usize,
    n2: usize,
) -> Result<BgdOptimum<T>> {
    check_lambdas(lambdas, r, n1, n2)?;
    let one = T::one();
    if r < n1.min(n2) {
        let (gamma, rho) = equal_stepsizes(lambdas[0])?;
        return Ok(BgdOptimum {
            gamma1: gamma,
            gamma2: gamma,
            rho,
            branch: BgdBranch::RankDeficient,
        });
    }
    // full rank: a single coupled eigenvalue (or a tied pair of extremes)
    // admits the exact nilpotent construction with zero radius
    if r == 1 || lambdas[0] - lambdas[r - 1] <= T::c(tol::LAMBDA_TIE) {
        let gamma_big = one / (one - lambdas[0]);
        let (gamma1, gamma2) = if n1 <= n2 {
            (gamma_big, one)
        } else {
            (one, gamma_big)
        };
        return Ok(BgdOptimum {
            gamma1,
            gamma2,
            rho: T::zero(),
            branch: BgdBranch::RankOneZero,
        });
    }
    // otherwise equioscillate the extreme quadratics
    let s1 = (one - lambdas[r - 1]).sqrt();
    let sr = (one - lambdas[0]).sqrt();
    let plus = ((one + sr) * (one + s1)).sqrt();
    let minus = ((one - sr) * (one - s1)).sqrt();
    let denom = s1 + sr;
    let gamma_big = ((plus + minus) / denom).powi(2);
    let gamma_small = ((plus - minus) / denom).powi(2);
    let rho = (s1 - sr) / denom;
    let (gamma1, gamma2, branch) = if n1 == n2 {
        (gamma_big, gamma_small, BgdBranch::FullRankEqual)
    } else if r == n1 {
        (gamma_big, gamma_small, BgdBranch::FullRankN1)
    } else {
        (gamma_small, gamma_big, BgdBranch::FullRankN2)
    };
    Ok(BgdOptimum {
        gamma1,
        gamma2,
        rho,
        branch,
    })
}

/// Optimal `γ1` for two-block gradient descent with `γ2` pinned to one.
///
/// Returns `(γ1, ρ)`. With `γ2 = 1` the nonzero spectrum is the affine
/// family `1 − γ1·ξ` over `ξ ∈ {1 (if r < n1)} ∪ {1 − λᵢ}`, so the optimum
/// is a scalar minmax:
///
/// * `r < n1`: `γ1 = 2 / (2 − λ1)`, `ρ = λ1 / (2 − λ1)`;
/// * `r = n1 > 1`: `γ1 = 2 / (2 − λ1 − λr)`, `ρ = (λ1 − λr) / (2 − λ1 − λr)`;
/// * `r = n1 = 1`: `γ1 = 1 / (1 − λ1)`, `ρ = 0`.
pub fn fixed_gamma2_one<T: Real>(lambdas: &[T], r: usize, n1: usize) -> Result<(T, T)> {
    check_lambdas(lambdas, r, n1, r.max(1))?;
    let two = T::c(2.0);
    let lam1 = lambdas[0];
    if r < n1 {
        return Ok((two / (two - lam1), lam1 / (two - lam1)));
    }
    if r == 1 {
        return Ok((T::one() / (T::one() - lam1), T::zero()));
    }
    let lam_r = lambdas[r - 1];
    Ok((
        two / (two - lam1 - lam_r),
        (lam1 - lam_r) / (two - lam1 - lam_r),
    ))
}

/// Brute-force minimizer of the closed-form spectral radius over the grid
/// `{step, 2·step, …} × {…} ⊆ (0, γmax]²`. Returns `(γ1, γ2, ρ)`.
///
/// Rows are scanned in parallel but the reduction is sequential and
/// lexicographic (smallest `γ1`, then `γ2`, wins ties), so the result is
/// deterministic regardless of thread count. This is the empirical oracle
/// the closed forms are validated against.
///
/// # Panics
///
/// Panics unless `γmax ≥ 4` (the optimum can sit beyond 2) and
/// `0 < step ≤ 0.01`.
pub fn grid_search_min_rho<T: Real>(
    lambdas: &[T],
    r: usize,
    n1: usize,
    n2: usize,
    gamma_max: T,
    step: T,
) -> (T, T, T) {
    assert!(
        gamma_max >= T::c(4.0),
        "grid must reach at least γ = 4 to bracket every optimum"
    );
    assert!(
        step > T::zero() && step <= T::c(0.01),
        "grid step must lie in (0, 0.01]"
    );
    let count = (gamma_max / step + T::c(1e-9)).floor().as_f64() as usize;
    let row_best: Vec<(T, T, T)> = (1..=count)
        .into_par_iter()
        .map(|i| {
            let g1 = T::c(i as f64) * step;
            let mut best = (T::infinity(), g1, step);
            for j in 1..=count {
                let g2 = T::c(j as f64) * step;
                let rho = rho_of(lambdas, r, n1, n2, g1, g2);
                if rho < best.0 {
                    best = (rho, g1, g2);
                }
            }
            best
        })
        .collect();
    let mut best = row_best[0];
    for cand in &row_best[1..] {
        if cand.0 < best.0 {
            best = *cand;
        }
    }
    (best.1, best.2, best.0)
}
