//! Principal angles, the relaxed projection-operator family, and its
//! reduction to the two-block iteration matrix.
//!
//! A [`SubspacePair`] stores orthonormal bases `A1`, `A2` of the two
//! complements; the subspaces themselves are `Hj = range(Aj)^⊥`, so the
//! projector onto `Hj` is `P_j = I − AjAjᵀ` and relaxing it means
//! `P_j^γ = I − γAjAjᵀ`. Alternating projections, Douglas–Rachford, and
//! their relaxed variants are all explicit `m×m` matrices here, built by
//! [`make_operator`]; [`rate_table`] collects their closed-form linear
//! contraction factors, and [`gapxx_stepsizes`] tunes the generalized
//! alternating projection to the optimal pair.

use crate::error::{Error, Result};
use crate::model::Method;
use crate::numkernels::{qr_full, singular_values, DenseMatrix, DenseVector};
use crate::real::Real;
use crate::solvers::SolverTrace;
use crate::tol;
use std::time::Instant;

/// Orthonormal complement bases together with the principal angles they
/// subtend.
///
/// `thetas` lists the nonzero principal angles ascending (right angles
/// included); `r` counts the coupled directions, i.e. the numerical rank
/// of `A2ᵀA1`.
#[derive(Debug, Clone)]
pub struct SubspacePair<T> {
    a1: DenseMatrix<T>,
    a2: DenseMatrix<T>,
    thetas: Vec<T>,
    r: usize,
}

impl<T: Real> SubspacePair<T> {
    /// Validate the bases and measure their principal angles.
    ///
    /// # Example
    ///
    /// ```
    /// use blockstep_core::altproj::SubspacePair;
    /// use blockstep_core::numkernels::DenseMatrix;
    ///
    /// let a1 = DenseMatrix::from_rows(&[&[1.0f64], &[0.0], &[0.0]]);
    /// let a2 = DenseMatrix::from_rows(&[&[0.5f64], &[0.75f64.sqrt()], &[0.0]]);
    /// let pair = SubspacePair::new(a1, a2).unwrap();
    /// assert!((pair.thetas()[0] - std::f64::consts::FRAC_PI_3).abs() < 1e-12);
    /// assert_eq!(pair.r(), 1);
    /// ```
    pub fn new(a1: DenseMatrix<T>, a2: DenseMatrix<T>) -> Result<Self> {
        if a1.rows() != a2.rows() {
            return Err(Error::BadShape(format!(
                "bases live in different ambient spaces: {} vs {} rows",
                a1.rows(),
                a2.rows()
            )));
        }
        check_orthonormal(&a1, "first")?;
        check_orthonormal(&a2, "second")?;
        let c = a2.transpose().mul(&a1);
        let sigmas = singular_values(&c)?;
        let thetas = angles_from_cosines(&sigmas);
        let r = coupled_count(&sigmas);
        Ok(SubspacePair { a1, a2, thetas, r })
    }

    /// Ambient dimension.
    pub fn m(&self) -> usize {
        self.a1.rows()
    }

    /// Number of columns of the first basis.
    pub fn n1(&self) -> usize {
        self.a1.cols()
    }

    /// Number of columns of the second basis.
    pub fn n2(&self) -> usize {
        self.a2.cols()
    }

    /// First complement basis.
    pub fn a1(&self) -> &DenseMatrix<T> {
        &self.a1
    }

    /// Second complement basis.
    pub fn a2(&self) -> &DenseMatrix<T> {
        &self.a2
    }

    /// Nonzero principal angles, ascending.
    pub fn thetas(&self) -> &[T] {
        &self.thetas
    }

    /// Count of coupled directions (numerical rank of `A2ᵀA1`).
    pub fn r(&self) -> usize {
        self.r
    }

    /// Projector onto `H1 ∩ H2`, the common orthogonal complement of the
    /// two bases.
    ///
    /// Built from the trailing columns of a full QR of `[A1 A2]`.
    pub fn intersection_projector(&self) -> DenseMatrix<T> {
        let stacked = DenseMatrix::hstack(&self.a1, &self.a2);
        let (q, r) = qr_full(&stacked).expect("full QR of a finite matrix");
        let mut largest = T::zero();
        for j in 0..stacked.cols() {
            largest = largest.max(r[(j, j)].abs());
        }
        let mut rank = 0;
        for j in 0..stacked.cols() {
            if r[(j, j)].abs() > T::c(tol::RANK_GATE_QR) * largest {
                rank += 1;
            }
        }
        let m = self.m();
        let basis = q.block(0, rank, m, m - rank);
        basis.mul(&basis.transpose())
    }
}

fn check_orthonormal<T: Real>(a: &DenseMatrix<T>, which: &str) -> Result<()> {
    let dev = a.gram().sub(&DenseMatrix::identity(a.cols())).norm_inf();
    if dev > T::c(tol::ORTHONORMAL_GATE) {
        return Err(Error::NotOrthonormal(format!(
            "{which} basis has Gram deviation {:e}",
            dev.as_f64()
        )));
    }
    Ok(())
}

fn angles_from_cosines<T: Real>(sigmas: &DenseVector<T>) -> Vec<T> {
    let mut thetas = Vec::with_capacity(sigmas.len());
    for &s in sigmas.iter() {
        let c = s.min(T::one()).max(T::zero());
        if c > T::one() - T::c(tol::ZERO_ANGLE) {
            // a shared direction subtends a zero angle, which the angle
            // list excludes by definition
            continue;
        }
        thetas.push(c.acos());
    }
    thetas
}

fn coupled_count<T: Real>(sigmas: &DenseVector<T>) -> usize {
    let largest = sigmas.as_slice().first().copied().unwrap_or_else(T::zero);
    sigmas
        .iter()
        .filter(|&&s| s > T::c(tol::RANK_REL) * largest && largest > T::zero())
        .count()
}

/// Principal angles between the subspaces spanned against two orthonormal
/// bases: `θᵢ = arccos(σᵢ(A2ᵀA1))`, ascending, zero angles excluded.
///
/// # Example
///
/// ```
/// use blockstep_core::altproj::principal_angles;
/// use blockstep_core::numkernels::DenseMatrix;
///
/// let a1 = DenseMatrix::from_rows(&[&[1.0f64], &[0.0]]);
/// let a2 = DenseMatrix::from_rows(&[&[0.0f64], &[1.0]]);
/// let thetas = principal_angles(&a1, &a2).unwrap();
/// assert!((thetas[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
/// ```
pub fn principal_angles<T: Real>(
    a1: &DenseMatrix<T>,
    a2: &DenseMatrix<T>,
) -> Result<Vec<T>> {
    check_orthonormal(a1, "first")?;
    check_orthonormal(a2, "second")?;
    let sigmas = singular_values(&a2.transpose().mul(a1))?;
    Ok(angles_from_cosines(&sigmas))
}

/// Which projection operator to build, together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorSpec<T> {
    /// Alternating projections `P2 P1`.
    Ap,
    /// Douglas–Rachford `½I + ½(2P2−I)(2P1−I)`.
    Dr,
    /// Relaxed alternating projections `(1−γ)I + γ P2 P1`.
    Rap(T),
    /// Partially relaxed projections `P2 (I − γ1 A1A1ᵀ)`.
    Prap(T),
    /// Generalized Douglas–Rachford `(1−γ)I + γ(½I + ½(2P2−I)(2P1−I))`.
    Gdr(T),
    /// Generalized alternating projections
    /// `(1−γ)I + γ (I − γ2 A2A2ᵀ)(I − γ1 A1A1ᵀ)`.
    Gap {
        /// Outer relaxation.
        gamma: T,
        /// First relaxed-projection stepsize.
        gamma1: T,
        /// Second relaxed-projection stepsize.
        gamma2: T,
    },
}

impl<T: Real> OperatorSpec<T> {
    /// Method tag the spec maps to in traces.
    pub fn method(&self) -> Method {
        match self {
            OperatorSpec::Ap => Method::Ap,
            OperatorSpec::Dr => Method::Dr,
            OperatorSpec::Rap(_) => Method::Rap,
            OperatorSpec::Prap(_) => Method::Prap,
            OperatorSpec::Gdr(_) => Method::Gdr,
            OperatorSpec::Gap { .. } => Method::Gap,
        }
    }
}

/// A projection-family operator as an explicit ambient-space matrix.
#[derive(Debug, Clone)]
pub struct ProjOperator<T> {
    /// The operator kind and parameters the matrix realizes.
    pub kind: OperatorSpec<T>,
    /// The `m×m` matrix itself.
    pub matrix: DenseMatrix<T>,
}

/// Assemble the requested operator for a pair of complement bases.
///
/// Relaxations are gated: RAP and GDR need `γ ∈ (0, 1]`, PRAP needs
/// `γ1 > 0`, GAP needs `γ ∈ (0, 1]` and positive `γ1, γ2`.
pub fn make_operator<T: Real>(
    pair: &SubspacePair<T>,
    kind: OperatorSpec<T>,
) -> Result<ProjOperator<T>> {
    let m = pair.m();
    let eye = DenseMatrix::identity(m);
    let relaxed = |basis: &DenseMatrix<T>, gamma: T| -> DenseMatrix<T> {
        eye.sub(&basis.mul(&basis.transpose()).scale(gamma))
    };
    let check_unit = |gamma: T, name: &str| -> Result<()> {
        if !(gamma > T::zero() && gamma <= T::one()) {
            return Err(Error::BadStepsize(format!(
                "{name} must lie in (0, 1], got {gamma}"
            )));
        }
        Ok(())
    };
    let check_pos = |gamma: T, name: &str| -> Result<()> {
        if !(gamma > T::zero()) {
            return Err(Error::BadStepsize(format!(
                "{name} must be positive, got {gamma}"
            )));
        }
        Ok(())
    };
    let p1 = relaxed(&pair.a1, T::one());
    let p2 = relaxed(&pair.a2, T::one());
    let matrix = match kind {
        OperatorSpec::Ap => p2.mul(&p1),
        OperatorSpec::Dr => {
            let r1 = p1.scale(T::c(2.0)).sub(&eye);
            let r2 = p2.scale(T::c(2.0)).sub(&eye);
            eye.scale(T::c(0.5)).add(&r2.mul(&r1).scale(T::c(0.5)))
        }
        OperatorSpec::Rap(gamma) => {
            check_unit(gamma, "relaxation γ")?;
            eye.scale(T::one() - gamma).add(&p2.mul(&p1).scale(gamma))
        }
        OperatorSpec::Prap(gamma1) => {
            check_pos(gamma1, "stepsize γ1")?;
            p2.mul(&relaxed(&pair.a1, gamma1))
        }
        OperatorSpec::Gdr(gamma) => {
            check_unit(gamma, "relaxation γ")?;
            let r1 = p1.scale(T::c(2.0)).sub(&eye);
            let r2 = p2.scale(T::c(2.0)).sub(&eye);
            let dr = eye.scale(T::c(0.5)).add(&r2.mul(&r1).scale(T::c(0.5)));
            eye.scale(T::one() - gamma).add(&dr.scale(gamma))
        }
        OperatorSpec::Gap {
            gamma,
            gamma1,
            gamma2,
        } => {
            check_unit(gamma, "outer relaxation γ")?;
            check_pos(gamma1, "stepsize γ1")?;
            check_pos(gamma2, "stepsize γ2")?;
            let inner = relaxed(&pair.a2, gamma2).mul(&relaxed(&pair.a1, gamma1));
            eye.scale(T::one() - gamma).add(&inner.scale(gamma))
        }
    };
    Ok(ProjOperator { kind, matrix })
}

/// Which block dimension equals the coupling rank, for ordering the tuned
/// stepsize pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallBlock {
    /// `r = n1 < n2`: the larger stepsize goes first.
    N1,
    /// `r = n2 < n1`: the larger stepsize goes second.
    N2,
    /// `r = n1 = n2`: ties break toward the larger stepsize first.
    Equal,
}

/// Optimal stepsizes and rate for the generalized alternating projection
/// with outer relaxation 1.
///
/// Full rank means the coupling rank equals the smaller block dimension;
/// the tuned pair then satisfies `γ1γ2 = (2/(sinθr + sinθ1))²` and
/// `(γ1−1)(γ2−1) = rate²` with `rate = (sinθr − sinθ1)/(sinθr + sinθ1)`.
/// Otherwise both stepsizes equal `2/(1 + sinθ1)` and the rate is
/// `(1 − sinθ1)/(1 + sinθ1)`.
///
/// # Example
///
/// ```
/// use blockstep_core::altproj::{gapxx_stepsizes, SmallBlock};
/// use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
///
/// let (g1, g2, rate) =
///     gapxx_stepsizes(FRAC_PI_6, FRAC_PI_2, false, SmallBlock::Equal).unwrap();
/// assert!((g1 - 4.0 / 3.0).abs() < 1e-14 && g1 == g2);
/// assert!((rate - 1.0 / 3.0).abs() < 1e-14);
/// ```
pub fn gapxx_stepsizes<T: Real>(
    theta1: T,
    theta_r: T,
    full_rank: bool,
    small: SmallBlock,
) -> Result<(T, T, T)> {
    let half_pi = T::FRAC_PI_2();
    if !(theta1 > T::zero() && theta1 <= theta_r && theta_r <= half_pi) {
        return Err(Error::OutOfRange(format!(
            "need 0 < θ1 ≤ θr ≤ π/2, got θ1 = {theta1}, θr = {theta_r}"
        )));
    }
    let slo = theta1.sin();
    let shi = theta_r.sin();
    if !full_rank {
        let gamma = T::c(2.0) / (T::one() + slo);
        return Ok((gamma, gamma, (T::one() - slo) / (T::one() + slo)));
    }
    if shi - slo <= T::c(tol::LAMBDA_TIE) {
        // a single angle (or a tied pair) admits the nilpotent tuning
        let big = T::one() / (slo * slo);
        return Ok(match small {
            SmallBlock::N2 => (T::one(), big, T::zero()),
            _ => (big, T::one(), T::zero()),
        });
    }
    let plus = ((T::one() + slo) * (T::one() + shi)).sqrt();
    let minus = ((T::one() - slo) * (T::one() - shi)).sqrt();
    let denom = slo + shi;
    let big = ((plus + minus) / denom).powi(2);
    let smallg = ((plus - minus) / denom).powi(2);
    let rate = (shi - slo) / denom;
    Ok(match small {
        SmallBlock::N2 => (smallg, big, rate),
        _ => (big, smallg, rate),
    })
}

/// Closed-form linear contraction factors of the projection family at
/// angles `(θ1, θr)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTable<T> {
    /// Alternating projections: `cos²θ1`.
    pub ap: T,
    /// Douglas–Rachford: `cosθ1`.
    pub dr: T,
    /// Optimally relaxed alternating projections: `(1−sin²θ1)/(1+sin²θ1)`.
    pub rap: T,
    /// Partially relaxed projections: `(sin²θr−sin²θ1)/(sin²θr+sin²θ1)`.
    pub prap: T,
    /// Generalized Douglas–Rachford: `cosθ1`.
    pub gdr: T,
    /// Single-angle tuned alternating projections: `(1−sinθ1)/(1+sinθ1)`.
    pub gap: T,
    /// Two-angle tuned pair: `(sinθr−sinθ1)/(sinθr+sinθ1)`.
    pub gapxx: T,
}

impl<T: Real> RateTable<T> {
    /// The table as `(method, rate)` rows.
    pub fn rows(&self) -> [(Method, T); 7] {
        [
            (Method::Ap, self.ap),
            (Method::Dr, self.dr),
            (Method::Rap, self.rap),
            (Method::Prap, self.prap),
            (Method::Gdr, self.gdr),
            (Method::Gap, self.gap),
            (Method::Gapxx, self.gapxx),
        ]
    }
}

/// Evaluate the closed-form rate table at angles `(θ1, θr)`.
pub fn rate_table<T: Real>(theta1: T, theta_r: T) -> RateTable<T> {
    assert!(
        theta1 > T::zero() && theta1 <= theta_r && theta_r <= T::FRAC_PI_2(),
        "angles must satisfy 0 < θ1 ≤ θr ≤ π/2"
    );
    let s1 = theta1.sin();
    let sr = theta_r.sin();
    let c1 = theta1.cos();
    RateTable {
        ap: c1 * c1,
        dr: c1,
        rap: (T::one() - s1 * s1) / (T::one() + s1 * s1),
        prap: (sr * sr - s1 * s1) / (sr * sr + s1 * s1),
        gdr: c1,
        gap: (T::one() - s1) / (T::one() + s1),
        gapxx: (sr - s1) / (sr + s1),
    }
}

/// Iterate `z⁺ = T z` and record distances to the limit `P∩ z0`.
///
/// The trace's `gamma1`/`gamma2` fields carry the operator's stepsizes
/// where it has them (single-parameter operators use `gamma1`); the outer
/// GAP relaxation is not serialized.
pub fn run_projection<T: Real>(
    pair: &SubspacePair<T>,
    op: &ProjOperator<T>,
    z0: &DenseVector<T>,
    iters: usize,
) -> SolverTrace<T> {
    assert_eq!(z0.len(), pair.m(), "starting point has the wrong length");
    assert!(iters >= 1, "need at least one iteration");
    let clock = Instant::now();
    let limit = pair.intersection_projector().mul_vec(z0);
    let mut z = z0.clone();
    let mut errors = Vec::with_capacity(iters + 1);
    errors.push(z.sub(&limit).norm());
    for _ in 0..iters {
        z = op.matrix.mul_vec(&z);
        errors.push(z.sub(&limit).norm());
    }
    let (gamma1, gamma2) = match op.kind {
        OperatorSpec::Ap | OperatorSpec::Dr => (None, None),
        OperatorSpec::Rap(g) | OperatorSpec::Prap(g) | OperatorSpec::Gdr(g) => (Some(g), None),
        OperatorSpec::Gap { gamma1, gamma2, .. } => (Some(gamma1), Some(gamma2)),
    };
    SolverTrace {
        method: op.kind.method(),
        gamma1,
        gamma2,
        alpha: None,
        beta: None,
        seed: None,
        errors,
        wall: clock.elapsed(),
    }
}

/// Measure the contraction of an operator off the intersection by a
/// renormalized power iteration.
///
/// Each step applies the operator, deflates the intersection component,
/// and renormalizes; the result is the geometric mean of the step ratios
/// over the final quarter of the run. Renormalization keeps the iterate
/// above the floating-point floor, so fast contractions stay measurable
/// where a raw error trace would bottom out.
pub fn measured_contraction<T: Real>(
    pair: &SubspacePair<T>,
    op: &ProjOperator<T>,
    iters: usize,
) -> T {
    assert!(iters >= 8, "too few iterations to take a tail");
    let m = pair.m();
    let deflate = DenseMatrix::identity(m).sub(&pair.intersection_projector());
    let mut v = deflate.mul_vec(&DenseVector::new(
        (0..m).map(|i| (T::c(i as f64) + T::c(0.5)).sin()).collect(),
    ));
    let tiny = T::min_positive_value().sqrt();
    let n0 = v.norm();
    if n0 < tiny {
        return T::zero();
    }
    v = v.scale(T::one() / n0);
    let mut ratios = Vec::with_capacity(iters);
    for _ in 0..iters {
        let next = deflate.mul_vec(&op.matrix.mul_vec(&v));
        let norm = next.norm();
        ratios.push(norm);
        if norm < tiny {
            // annihilated: the contraction toward the intersection is zero
            return T::zero();
        }
        v = next.scale(T::one() / norm);
    }
    let tail = ratios.len() - (ratios.len() / 4).max(1);
    let window = &ratios[tail..];
    let sum: T = window.iter().map(|r| r.ln()).sum();
    (sum / T::c(window.len() as f64)).exp()
}
