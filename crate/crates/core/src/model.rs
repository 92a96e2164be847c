//! Problem model: two-block least-squares instances and their cached
//! spectral quantities.
//!
//! A [`BlockProblem`] is the immutable currency of the crate: construction
//! validates shapes and finiteness, factors the stacked matrix once for the
//! reference solution, and caches the cross-block coupling `C = A2ᵀA1`
//! together with the descending eigenvalues of `CCᵀ` that every stepsize
//! formula consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernels::{
    numerical_rank, qr_thin, singular_values, solve_least_squares, sym_eigvals, DenseMatrix,
    DenseVector,
};
use crate::real::Real;
use crate::tol;

/// Solver and operator identifiers used in plans and trace artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Plain gradient descent on the stacked problem.
    Gd,
    /// Heavy ball (gradient descent with momentum).
    Hb,
    /// Two-block gradient descent with per-block stepsizes.
    Bgd,
    /// Block exact minimization (unit stepsizes under orthonormal blocks).
    Bem,
    /// Alternating projections.
    Ap,
    /// Douglas–Rachford splitting.
    Dr,
    /// Relaxed alternating projections.
    Rap,
    /// Partial relaxed alternating projections.
    Prap,
    /// Generalized Douglas–Rachford (relaxed DR).
    Gdr,
    /// Generalized alternating projections with inner relaxations.
    Gap,
    /// GAP with the accelerated two-angle stepsizes.
    Gapxx,
}

impl Method {
    /// Lowercase tag used in trace CSV files and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Hb => "hb",
            Method::Bgd => "bgd",
            Method::Bem => "bem",
            Method::Ap => "ap",
            Method::Dr => "dr",
            Method::Rap => "rap",
            Method::Prap => "prap",
            Method::Gdr => "gdr",
            Method::Gap => "gap",
            Method::Gapxx => "gapxx",
        }
    }

    /// Uppercase display name used in stepsize plans.
    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "GD",
            Method::Hb => "HB",
            Method::Bgd => "BGD",
            Method::Bem => "BEM",
            Method::Ap => "AP",
            Method::Dr => "DR",
            Method::Rap => "RAP",
            Method::Prap => "PRAP",
            Method::Gdr => "GDR",
            Method::Gap => "GAP",
            Method::Gapxx => "GAPXX",
        }
    }

    /// Parses a tag case-insensitively.
    pub fn from_tag(s: &str) -> Option<Method> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Some(Method::Gd),
            "hb" => Some(Method::Hb),
            "bgd" => Some(Method::Bgd),
            "bem" => Some(Method::Bem),
            "ap" => Some(Method::Ap),
            "dr" => Some(Method::Dr),
            "rap" => Some(Method::Rap),
            "prap" => Some(Method::Prap),
            "gdr" => Some(Method::Gdr),
            "gap" => Some(Method::Gap),
            "gapxx" => Some(Method::Gapxx),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        Method::from_tag(s)
            .ok_or_else(|| Error::OutOfRange(format!("unknown method tag '{s}'")))
    }
}

/// Immutable two-block least-squares instance `min ‖A1x1 + A2x2 − y‖²`.
///
/// Construction validates shapes, finiteness, and full column rank of the
/// stacked matrix, then caches `C = A2ᵀA1`, the descending eigenvalues of
/// `CCᵀ`, the numerical rank of `C`, and the least-squares solution.
///
/// # Example
///
/// ```
/// use blockstep_core::model::BlockProblem;
/// use blockstep_core::numkernels::{DenseMatrix, DenseVector};
///
/// // two unit columns at a 60° angle: the coupling is cos 60° = 1/2
/// let a1 = DenseMatrix::from_rows(&[&[1.0], &[0.0]]);
/// let a2 = DenseMatrix::from_rows(&[&[0.5], &[0.75f64.sqrt()]]);
/// let y = DenseVector::new(vec![1.0, 1.0]);
/// let p = BlockProblem::new(a1, a2, y).unwrap();
/// assert!(p.assumes_bwo());
/// assert_eq!(p.r(), 1);
/// assert!((p.lambdas_cc()[0] - 0.25).abs() < 1e-15);
/// ```
#[derive(Debug, Clone)]
pub struct BlockProblem<T> {
    m: usize,
    n1: usize,
    n2: usize,
    a1: DenseMatrix<T>,
    a2: DenseMatrix<T>,
    y: DenseVector<T>,
    assumes_bwo: bool,
    c: DenseMatrix<T>,
    lambdas_cc: DenseVector<T>,
    r: usize,
    xstar: DenseVector<T>,
}

/// Measured diagnostics of a [`BlockProblem`], recomputed from scratch.
#[derive(Debug, Clone)]
pub struct ValidationOutcome<T> {
    /// `‖A1ᵀA1 − I‖∞`.
    pub gram_dev1: T,
    /// `‖A2ᵀA2 − I‖∞`.
    pub gram_dev2: T,
    /// Whether the coupling block has any nonzero entry.
    pub c_nonzero: bool,
    /// Whether the stacked matrix has full column rank.
    pub full_column_rank: bool,
    /// Whether the blockwise-orthonormality assumption holds.
    pub assumes_bwo: bool,
    /// Numerical rank of `C`.
    pub r: usize,
    /// Descending eigenvalues of `CCᵀ`.
    pub lambdas_cc: DenseVector<T>,
    /// Measured condition number of `AᵀA` (infinite if singular).
    pub kappa: T,
}

impl<T: Real> BlockProblem<T> {
    /// Validates and caches a two-block instance.
    ///
    /// Errors: [`Error::BadShape`] for inconsistent dimensions or empty
    /// blocks, [`Error::OutOfRange`] for non-finite entries, and
    /// [`Error::RankDeficient`] when the stacked matrix loses full column
    /// rank (no unique least-squares solution to cache).
    pub fn new(a1: DenseMatrix<T>, a2: DenseMatrix<T>, y: DenseVector<T>) -> Result<Self> {
        let (m, n1) = (a1.rows(), a1.cols());
        let n2 = a2.cols();
        if n1 == 0 || n2 == 0 || m == 0 {
            return Err(Error::BadShape(format!(
                "blocks must be nonempty, got A1 {m}×{n1}, A2 {}×{n2}",
                a2.rows()
            )));
        }
        if a2.rows() != m || y.len() != m {
            return Err(Error::BadShape(format!(
                "row counts must agree: A1 has {m}, A2 has {}, y has {}",
                a2.rows(),
                y.len()
            )));
        }
        if !a1.is_finite_all() || !a2.is_finite_all() || !y.is_finite_all() {
            return Err(Error::OutOfRange(
                "instance contains non-finite entries".into(),
            ));
        }
        let c = a2.transpose().mul(&a1);
        let sigmas = singular_values(&c)?;
        let r = numerical_rank(&sigmas);
        let lambdas_cc = DenseVector::new(sigmas.iter().map(|&s| s * s).collect());
        let stacked = DenseMatrix::hstack(&a1, &a2);
        let xstar = solve_least_squares(&stacked, &y)?;
        let gate = T::c(tol::BWO_GATE);
        let eye1 = DenseMatrix::identity(n1);
        let eye2 = DenseMatrix::identity(n2);
        let dev1 = a1.gram().sub(&eye1).norm_inf();
        let dev2 = a2.gram().sub(&eye2).norm_inf();
        let assumes_bwo = dev1 <= gate && dev2 <= gate && r >= 1;
        Ok(BlockProblem {
            m,
            n1,
            n2,
            a1,
            a2,
            y,
            assumes_bwo,
            c,
            lambdas_cc,
            r,
            xstar,
        })
    }

    /// Number of rows.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Columns in the first block.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Columns in the second block.
    pub fn n2(&self) -> usize {
        self.n2
    }

    /// First block.
    pub fn a1(&self) -> &DenseMatrix<T> {
        &self.a1
    }

    /// Second block.
    pub fn a2(&self) -> &DenseMatrix<T> {
        &self.a2
    }

    /// Right-hand side.
    pub fn y(&self) -> &DenseVector<T> {
        &self.y
    }

    /// Whether both blocks passed the orthonormality gate and `C ≠ 0`.
    pub fn assumes_bwo(&self) -> bool {
        self.assumes_bwo
    }

    /// Cached coupling block `C = A2ᵀA1`.
    pub fn c(&self) -> &DenseMatrix<T> {
        &self.c
    }

    /// Cached descending eigenvalues of `CCᵀ` (length `min(n1, n2)`).
    pub fn lambdas_cc(&self) -> &DenseVector<T> {
        &self.lambdas_cc
    }

    /// Cached numerical rank of `C`.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Cached least-squares solution (length `n1 + n2`).
    pub fn xstar(&self) -> &DenseVector<T> {
        &self.xstar
    }

    /// Stacked matrix `[A1 A2]`, built on demand.
    pub fn stacked(&self) -> DenseMatrix<T> {
        DenseMatrix::hstack(&self.a1, &self.a2)
    }

    /// Recomputes the least-squares solution from scratch via thin QR.
    ///
    /// The result satisfies the normal equations to [`tol::NORMAL_EQ`]
    /// relative to `‖Aᵀy‖` and is invariant (to 1e−8) under joint row
    /// permutations of the blocks and right-hand side.
    pub fn least_squares_solution(&self) -> Result<DenseVector<T>> {
        solve_least_squares(&self.stacked(), &self.y)
    }

    /// Re-measures every assumption from the stored blocks.
    pub fn validate(&self) -> ValidationOutcome<T> {
        let eye1 = DenseMatrix::identity(self.n1);
        let eye2 = DenseMatrix::identity(self.n2);
        let gram_dev1 = self.a1.gram().sub(&eye1).norm_inf();
        let gram_dev2 = self.a2.gram().sub(&eye2).norm_inf();
        let c = self.a2.transpose().mul(&self.a1);
        let c_nonzero = c.max_abs() > T::zero();
        let sigmas = singular_values(&c).expect("cached blocks are nonempty");
        let r = numerical_rank(&sigmas);
        let lambdas_cc = DenseVector::new(sigmas.iter().map(|&s| s * s).collect());
        let stacked = self.stacked();
        let full_column_rank = qr_thin(&stacked).is_ok();
        let gate = T::c(tol::BWO_GATE);
        let assumes_bwo = gram_dev1 <= gate && gram_dev2 <= gate && r >= 1;
        // condition number of the stacked Gram matrix, clamping PSD roundoff
        let gram_eigs = sym_eigvals(&stacked.gram()).expect("gram matrix is symmetric");
        let lam_max = gram_eigs[0].max(T::zero());
        let lam_min = gram_eigs[gram_eigs.len() - 1];
        let kappa = if lam_min > T::zero() {
            lam_max / lam_min
        } else {
            T::infinity()
        };
        ValidationOutcome {
            gram_dev1,
            gram_dev2,
            c_nonzero,
            full_column_rank,
            assumes_bwo,
            r,
            lambdas_cc,
            kappa,
        }
    }

    /// Serializes the instance to the on-disk JSON schema
    /// (`m`, `n1`, `n2`, row-major `A1`/`A2`, `y`, optional `seed`).
    pub fn to_json(&self, seed: Option<u64>) -> String {
        let dto = InstanceDto {
            m: self.m,
            n1: self.n1,
            n2: self.n2,
            a1: self.a1.data().iter().map(|v| v.as_f64()).collect(),
            a2: self.a2.data().iter().map(|v| v.as_f64()).collect(),
            y: self.y.iter().map(|v| v.as_f64()).collect(),
            seed,
        };
        serde_json::to_string_pretty(&dto).expect("instance DTO always serializes")
    }

    /// Parses the on-disk JSON schema and rebuilds the instance, rerunning
    /// every construction-time validation. Returns the problem and the
    /// stored generator seed, if any.
    pub fn from_json(text: &str) -> Result<(Self, Option<u64>)> {
        let dto: InstanceDto = serde_json::from_str(text)
            .map_err(|e| Error::BadShape(format!("malformed instance JSON: {e}")))?;
        if dto.a1.len() != dto.m * dto.n1 || dto.a2.len() != dto.m * dto.n2 {
            return Err(Error::BadShape(format!(
                "flat block lengths {} / {} do not match m={} n1={} n2={}",
                dto.a1.len(),
                dto.a2.len(),
                dto.m,
                dto.n1,
                dto.n2
            )));
        }
        if dto.y.len() != dto.m {
            return Err(Error::BadShape(format!(
                "y length {} does not match m={}",
                dto.y.len(),
                dto.m
            )));
        }
        let lift = |v: &[f64]| v.iter().map(|&x| T::c(x)).collect::<Vec<T>>();
        let a1 = DenseMatrix::new(dto.m, dto.n1, lift(&dto.a1));
        let a2 = DenseMatrix::new(dto.m, dto.n2, lift(&dto.a2));
        let y = DenseVector::new(lift(&dto.y));
        let problem = BlockProblem::new(a1, a2, y)?;
        Ok((problem, dto.seed))
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceDto {
    m: usize,
    n1: usize,
    n2: usize,
    #[serde(rename = "A1")]
    a1: Vec<f64>,
    #[serde(rename = "A2")]
    a2: Vec<f64>,
    y: Vec<f64>,
    #[serde(default)]
    seed: Option<u64>,
}
