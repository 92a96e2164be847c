//! Exact spectrum of the two-block error-propagation matrix.
//!
//! One sweep of two-block gradient descent with stepsizes `(γ1, γ2)` maps the
//! error `x − x*` through a fixed matrix `M(γ1, γ2)` built from the Gram
//! blocks of the instance. This module assembles that matrix, evaluates its
//! characteristic polynomial (the slow, assumption-free oracle), and produces
//! the closed-form spectrum that holds under blockwise orthonormality: a pile
//! of explicit linear eigenvalues plus, for every eigenvalue `λᵢ` of `CCᵀ`,
//! the two roots of
//!
//! ```text
//! z² − (2 − γ1 − γ2 + γ1·γ2·λᵢ)·z + (1 − γ1)(1 − γ2) = 0.
//! ```
//!
//! Unit stepsizes degenerate the analysis (one factor of the product becomes
//! a projection), so `γ1 = 1` and `γ2 = 1` get dedicated case branches.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::BlockProblem;
use crate::numkernels::DenseMatrix;
use crate::real::Real;
use crate::tol;

/// One eigenvalue of the iteration matrix with its algebraic multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEig<T> {
    /// Real part.
    pub re: T,
    /// Imaginary part (conjugate pairs are listed adjacently, `+im` first).
    pub im: T,
    /// Algebraic multiplicity after merging equal values.
    pub multiplicity: usize,
}

impl<T: Real> ComplexEig<T> {
    /// Modulus of the eigenvalue.
    pub fn modulus(&self) -> T {
        (self.re * self.re + self.im * self.im).sqrt()
    }
}

/// Which analytic branch produced a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumCase {
    /// `γ1 = 1`: the first block is minimized exactly each sweep.
    Gamma1One,
    /// `γ2 = 1`: the second block is minimized exactly each sweep.
    Gamma2One,
    /// Both stepsizes away from one.
    Generic,
}

impl SpectrumCase {
    /// Stable string form used in the JSON report.
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumCase::Gamma1One => "Gamma1One",
            SpectrumCase::Gamma2One => "Gamma2One",
            SpectrumCase::Generic => "Generic",
        }
    }
}

/// Full closed-form spectrum of `M(γ1, γ2)` with bookkeeping.
#[derive(Debug, Clone)]
pub struct SpectrumReport<T> {
    /// Analytic branch taken.
    pub case: SpectrumCase,
    /// Spectral radius: the largest eigenvalue modulus.
    pub rho: T,
    /// Merged eigenvalue list; multiplicities sum to `n1 + n2`.
    pub eigs: Vec<ComplexEig<T>>,
    /// First block width.
    pub n1: usize,
    /// Second block width.
    pub n2: usize,
    /// Rank of the coupling block.
    pub r: usize,
}

#[derive(Serialize)]
struct EigDto {
    re: f64,
    im: f64,
    mult: usize,
}

#[derive(Serialize)]
struct ReportDto<'a> {
    case: &'a str,
    rho: f64,
    eigs: Vec<EigDto>,
    n1: usize,
    n2: usize,
    r: usize,
}

impl<T: Real> SpectrumReport<T> {
    /// Serializes the report to its JSON schema
    /// (`case`, `rho`, `eigs: [{re, im, mult}]`, `n1`, `n2`, `r`).
    pub fn to_json(&self) -> String {
        let dto = ReportDto {
            case: self.case.as_str(),
            rho: self.rho.as_f64(),
            eigs: self
                .eigs
                .iter()
                .map(|e| EigDto {
                    re: e.re.as_f64(),
                    im: e.im.as_f64(),
                    mult: e.multiplicity,
                })
                .collect(),
            n1: self.n1,
            n2: self.n2,
            r: self.r,
        };
        serde_json::to_string_pretty(&dto).expect("report DTO always serializes")
    }

    /// Sum of multiplicities; always `n1 + n2` for a well-formed report.
    pub fn total_multiplicity(&self) -> usize {
        self.eigs.iter().map(|e| e.multiplicity).sum()
    }
}

/// Assembles the error-propagation matrix `M(γ1, γ2)` of one sweep as the
/// exact product `(I − γ2·L2)(I − γ1·L1)`, where `L1` holds the first
/// block-row of the Gram matrix and `L2` the second. No orthonormality is
/// assumed — this is the oracle the closed forms are tested against.
///
/// Zero stepsizes are admitted (they produce identity factors); negative
/// ones error with [`Error::BadStepsize`].
pub fn build_m<T: Real>(
    problem: &BlockProblem<T>,
    gamma1: T,
    gamma2: T,
) -> Result<DenseMatrix<T>> {
    if gamma1 < T::zero() || gamma2 < T::zero() {
        return Err(Error::BadStepsize(format!(
            "stepsizes must be nonnegative, got ({}, {})",
            gamma1, gamma2
        )));
    }
    let (n1, n2) = (problem.n1(), problem.n2());
    let n = n1 + n2;
    let g11 = problem.a1().gram();
    let g22 = problem.a2().gram();
    let g21 = problem.c().clone(); // A2ᵀA1
    let g12 = g21.transpose();
    // I − γ1·[G11 G12; 0 0]
    let mut left_sweep = DenseMatrix::identity(n);
    let scaled11 = g11.scale(-gamma1);
    let scaled12 = g12.scale(-gamma1);
    for i in 0..n1 {
        for j in 0..n1 {
            left_sweep[(i, j)] += scaled11[(i, j)];
        }
        for j in 0..n2 {
            left_sweep[(i, n1 + j)] += scaled12[(i, j)];
        }
    }
    // I − γ2·[0 0; G21 G22]
    let mut right_sweep = DenseMatrix::identity(n);
    let scaled21 = g21.scale(-gamma2);
    let scaled22 = g22.scale(-gamma2);
    for i in 0..n2 {
        for j in 0..n1 {
            right_sweep[(n1 + i, j)] += scaled21[(i, j)];
        }
        for j in 0..n2 {
            right_sweep[(n1 + i, n1 + j)] += scaled22[(i, j)];
        }
    }
    Ok(right_sweep.mul(&left_sweep))
}

/// Evaluates the characteristic polynomial `det(zI − M)` at a complex point
/// by LU elimination with partial pivoting. This is the assumption-free
/// oracle: closed-form eigenvalues must be roots of this polynomial.
pub fn charpoly_eval<T: Real>(m: &DenseMatrix<T>, z: Complex<T>) -> Result<Complex<T>> {
    let n = m.rows();
    if m.cols() != n || n == 0 {
        return Err(Error::BadShape(format!(
            "charpoly_eval needs a nonempty square matrix, got {}×{}",
            m.rows(),
            m.cols()
        )));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut a = vec![zero; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = Complex::new(-m[(i, j)], T::zero());
        }
        a[i * n + i] = a[i * n + i] + z;
    }
    let mut det = Complex::new(T::one(), T::zero());
    for k in 0..n {
        let mut pivot_row = k;
        let mut best = a[k * n + k].norm_sqr();
        for i in k + 1..n {
            let cand = a[i * n + k].norm_sqr();
            if cand > best {
                best = cand;
                pivot_row = i;
            }
        }
        if best == T::zero() {
            return Ok(zero);
        }
        if pivot_row != k {
            for j in k..n {
                a.swap(k * n + j, pivot_row * n + j);
            }
            det = -det;
        }
        let akk = a[k * n + k];
        det = det * akk;
        for i in k + 1..n {
            let factor = a[i * n + k] / akk;
            if factor == zero {
                continue;
            }
            for j in k + 1..n {
                a[i * n + j] = a[i * n + j] - factor * a[k * n + j];
            }
        }
    }
    Ok(det)
}

/// Discriminant of `z² + bz + c`, snapped to zero inside a relative guard
/// of [`tol::DISC_SNAP`] so analytic double roots survive roundoff.
fn snapped_discriminant<T: Real>(b: T, c: T) -> T {
    let four = T::c(4.0);
    let disc = b * b - four * c;
    let scale = b * b + four * c.abs();
    if disc.abs() <= T::c(tol::DISC_SNAP) * scale {
        T::zero()
    } else {
        disc
    }
}

/// Largest root modulus of `z² − (2 − γ1 − γ2 + γ1·γ2·λ)·z + (1−γ1)(1−γ2)`,
/// the per-eigenvalue quadratic of the generic closed form.
///
/// When the discriminant is negative the roots are conjugate and the value
/// collapses to `√((1−γ1)(1−γ2))` by Vieta. Discriminants within a relative
/// guard of zero are treated as exact double roots: the optimal-stepsize
/// constructions make the extreme discriminants vanish analytically, and
/// evaluating those points naively would inject square-root-of-roundoff
/// noise. Callers must pass positive stepsizes and `λ ∈ (0, 1)`; the
/// formula itself is total.
pub fn quadratic_root_magnitudes<T: Real>(gamma1: T, gamma2: T, lambda: T) -> T {
    let two = T::c(2.0);
    let b = -(two - gamma1 - gamma2 + gamma1 * gamma2 * lambda);
    let c = (T::one() - gamma1) * (T::one() - gamma2);
    let disc = snapped_discriminant(b, c);
    if disc < T::zero() {
        // conjugate pair; |z|² = product of roots = c > 0
        c.sqrt()
    } else {
        // real roots; the larger magnitude is (|b| + √disc) / 2
        (b.abs() + disc.sqrt()) / two
    }
}

/// Spectral radius of `M(γ1, γ2)` from the closed form alone, without
/// allocating a report. Used by grid searches; agrees with
/// [`closed_form_spectrum`]'s `rho` field to roundoff.
pub fn rho_of<T: Real>(
    lambdas: &[T],
    r: usize,
    n1: usize,
    n2: usize,
    gamma1: T,
    gamma2: T,
) -> T {
    let mut rho = T::zero();
    if n1 > r {
        rho = rho.max((T::one() - gamma1).abs());
    }
    if n2 > r {
        rho = rho.max((T::one() - gamma2).abs());
    }
    for &lam in &lambdas[..r] {
        rho = rho.max(quadratic_root_magnitudes(gamma1, gamma2, lam));
    }
    rho
}

/// Closed-form spectrum of `M(γ1, γ2)` under blockwise orthonormality.
///
/// `lambdas` are the descending eigenvalues of `CCᵀ`; only the leading `r`
/// (the rank of `C`) are used and each must lie strictly in `(0, 1)`.
/// Stepsizes within [`tol::CASE_GATE`] of one select the degenerate
/// branches (`γ1` checked first):
///
/// * `γ1 = 1`: eigenvalue `0` with multiplicity `n1`, `1 − γ2` with
///   multiplicity `n2 − r`, and `1 − γ2 + γ2·λᵢ` for each `i ≤ r`.
/// * `γ2 = 1`: symmetric with the roles of the blocks swapped.
/// * otherwise: `1 − γ1` (multiplicity `n1 − r`), `1 − γ2` (multiplicity
///   `n2 − r`), and the two quadratic roots per `λᵢ`.
///
/// Equal eigenvalues are merged to [`tol::MULT_MERGE`]; multiplicities
/// always sum to `n1 + n2`.
///
/// # Example
///
/// ```
/// use blockstep_core::spectrum::{closed_form_spectrum, SpectrumCase};
///
/// // unit stepsizes on a rank-one coupling: spectrum {0, λ1}
/// let report = closed_form_spectrum(&[0.25f64], 1, 1, 1, 1.0, 1.0).unwrap();
/// assert_eq!(report.case, SpectrumCase::Gamma1One);
/// assert!((report.rho - 0.25).abs() < 1e-15);
/// assert_eq!(report.total_multiplicity(), 2);
/// ```
pub fn closed_form_spectrum<T: Real>(
    lambdas: &[T],
    r: usize,
    n1: usize,
    n2: usize,
    gamma1: T,
    gamma2: T,
) -> Result<SpectrumReport<T>> {
    if n1 == 0 || n2 == 0 || r > n1.min(n2) {
        return Err(Error::BadShape(format!(
            "need n1, n2 ≥ 1 and r ≤ min(n1, n2), got n1={n1} n2={n2} r={r}"
        )));
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
    if gamma1 <= T::zero() || gamma2 <= T::zero() {
        return Err(Error::BadStepsize(format!(
            "stepsizes must be positive, got ({gamma1}, {gamma2})"
        )));
    }

    let one = T::one();
    let case_gate = T::c(tol::CASE_GATE);
    let mut raw: Vec<ComplexEig<T>> = Vec::with_capacity(2 * r + 2);
    let case = if (gamma1 - one).abs() <= case_gate {
        // first factor is an exact projection: n1 zeros, then the second
        // sweep acts alone on the coupled directions
        raw.push(ComplexEig {
            re: T::zero(),
            im: T::zero(),
            multiplicity: n1,
        });
        if n2 > r {
            raw.push(ComplexEig {
                re: one - gamma2,
                im: T::zero(),
                multiplicity: n2 - r,
            });
        }
        for &lam in &lambdas[..r] {
            raw.push(ComplexEig {
                re: one - gamma2 + gamma2 * lam,
                im: T::zero(),
                multiplicity: 1,
            });
        }
        SpectrumCase::Gamma1One
    } else if (gamma2 - one).abs() <= case_gate {
        raw.push(ComplexEig {
            re: T::zero(),
            im: T::zero(),
            multiplicity: n2,
        });
        if n1 > r {
            raw.push(ComplexEig {
                re: one - gamma1,
                im: T::zero(),
                multiplicity: n1 - r,
            });
        }
        for &lam in &lambdas[..r] {
            raw.push(ComplexEig {
                re: one - gamma1 + gamma1 * lam,
                im: T::zero(),
                multiplicity: 1,
            });
        }
        SpectrumCase::Gamma2One
    } else {
        if n1 > r {
            raw.push(ComplexEig {
                re: one - gamma1,
                im: T::zero(),
                multiplicity: n1 - r,
            });
        }
        if n2 > r {
            raw.push(ComplexEig {
                re: one - gamma2,
                im: T::zero(),
                multiplicity: n2 - r,
            });
        }
        let two = T::c(2.0);
        for &lam in &lambdas[..r] {
            let b = -(two - gamma1 - gamma2 + gamma1 * gamma2 * lam);
            let c = (one - gamma1) * (one - gamma2);
            let disc = snapped_discriminant(b, c);
            if disc < T::zero() {
                let re = -b / two;
                let im = (-disc).sqrt() / two;
                raw.push(ComplexEig {
                    re,
                    im,
                    multiplicity: 1,
                });
                raw.push(ComplexEig {
                    re,
                    im: -im,
                    multiplicity: 1,
                });
            } else {
                let s = disc.sqrt();
                // larger-magnitude root first, companion by Vieta
                let big = if b >= T::zero() {
                    (-b - s) / two
                } else {
                    (-b + s) / two
                };
                let small = if big == T::zero() { T::zero() } else { c / big };
                raw.push(ComplexEig {
                    re: big,
                    im: T::zero(),
                    multiplicity: 1,
                });
                raw.push(ComplexEig {
                    re: small,
                    im: T::zero(),
                    multiplicity: 1,
                });
            }
        }
        SpectrumCase::Generic
    };

    // merge equal eigenvalues, preserving first-seen order so conjugate
    // pairs stay adjacent
    let merge_gate = T::c(tol::MULT_MERGE);
    let mut eigs: Vec<ComplexEig<T>> = Vec::with_capacity(raw.len());
    for cand in raw {
        match eigs.iter_mut().find(|e| {
            (e.re - cand.re).abs() <= merge_gate && (e.im - cand.im).abs() <= merge_gate
        }) {
            Some(existing) => existing.multiplicity += cand.multiplicity,
            None => eigs.push(cand),
        }
    }
    let rho = eigs
        .iter()
        .map(|e| e.modulus())
        .fold(T::zero(), |acc, v| acc.max(v));
    let report = SpectrumReport {
        case,
        rho,
        eigs,
        n1,
        n2,
        r,
    };
    debug_assert_eq!(report.total_multiplicity(), n1 + n2);
    Ok(report)
}
