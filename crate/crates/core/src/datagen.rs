//! Seeded construction of orthonormal-block instances with prescribed
//! conditioning, two-column counterexamples, and subspace pairs with
//! planted principal angles.
//!
//! Everything here is a pure function of its arguments: the same seed
//! always yields bit-identical output, because all randomness flows
//! through the crate's own generator in a documented draw order.

use crate::altproj::SubspacePair;
use crate::error::{Error, Result};
use crate::model::BlockProblem;
use crate::numkernels::{qr_thin, DenseMatrix, DenseVector};
use crate::real::Real;
use crate::rng::Rng;

/// Parameters of one random instance draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec<T> {
    /// Row count of the stacked matrix.
    pub m: usize,
    /// Column count of the first block.
    pub n1: usize,
    /// Column count of the second block.
    pub n2: usize,
    /// Norm of the additive noise on the right-hand side.
    pub noise_level: T,
    /// Target condition number of `AᵀA`, strictly above 1.
    pub cond_num: T,
    /// Seed for the single RNG stream the draw consumes.
    pub seed: u64,
}

impl<T: Real> GenSpec<T> {
    /// Check the shape and parameter gates.
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.m < self.n1 + self.n2 {
            return Err(Error::BadShape(format!(
                "need m ≥ n1 + n2 with nonempty blocks, got m = {}, n1 = {}, n2 = {}",
                self.m, self.n1, self.n2
            )));
        }
        if !(self.cond_num > T::one()) {
            return Err(Error::OutOfRange(format!(
                "condition number must exceed 1, got {}",
                self.cond_num
            )));
        }
        if !(self.noise_level >= T::zero()) {
            return Err(Error::OutOfRange(format!(
                "noise level must be nonnegative, got {}",
                self.noise_level
            )));
        }
        Ok(())
    }
}

fn normal_matrix<T: Real>(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix<T> {
    let mut a = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            a[(i, j)] = T::c(rng.standard_normal());
        }
    }
    a
}

fn normal_vector<T: Real>(rng: &mut Rng, len: usize) -> DenseVector<T> {
    DenseVector::new((0..len).map(|_| T::c(rng.standard_normal())).collect())
}

/// Random orthogonal matrix: QR of a standard-normal square matrix with
/// the sign convention fixed by the factorization itself.
fn random_orthogonal<T: Real>(rng: &mut Rng, n: usize) -> DenseMatrix<T> {
    let (q, _) = qr_thin(&normal_matrix::<T>(rng, n, n)).expect("finite normal draw");
    q
}

fn bounded_singular_values<T: Real>(rng: &mut Rng, count: usize, l: T) -> Vec<T> {
    let mut svs = Vec::with_capacity(count);
    svs.push(l);
    for _ in 1..count {
        // upper − [0, upper) lands in (0, upper]
        svs.push(l - T::c(rng.uniform_half_open(l.as_f64())));
    }
    svs.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    svs
}

fn diag_rect<T: Real>(rows: usize, cols: usize, diag: &[T]) -> DenseMatrix<T> {
    let mut c = DenseMatrix::zeros(rows, cols);
    for (j, &s) in diag.iter().enumerate() {
        c[(j, j)] = s;
    }
    c
}

/// Random `n2×n1` matrix whose largest singular value is exactly `l` and
/// whose remaining singular values are uniform draws in `(0, l]`,
/// descending along the diagonal.
///
/// # Example
///
/// ```
/// use blockstep_core::datagen::gen_bounded_sv_matrix;
/// use blockstep_core::numkernels::singular_values;
///
/// let c = gen_bounded_sv_matrix::<f64>(3, 3, 0.5, 42).unwrap();
/// let svs = singular_values(&c).unwrap();
/// assert!((svs.as_slice()[0] - 0.5).abs() < 1e-12);
/// ```
pub fn gen_bounded_sv_matrix<T: Real>(
    n2: usize,
    n1: usize,
    l: T,
    seed: u64,
) -> Result<DenseMatrix<T>> {
    if !(l > T::zero() && l < T::one()) {
        return Err(Error::OutOfRange(format!(
            "largest singular value must lie in (0, 1), got {l}"
        )));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let svs = bounded_singular_values(&mut rng, n1.min(n2), l);
    Ok(diag_rect(n2, n1, &svs))
}

/// Draw a random instance per the spec, returning the problem alongside
/// the planted signal the right-hand side was built from.
///
/// The draw order is fixed: coupling singular values, the padding frame,
/// the two block rotations, the planted signal, then the noise direction
/// (drawn even at noise level zero, so specs differing only in noise
/// share every other draw).
pub fn gen_instance_with_truth<T: Real>(
    spec: &GenSpec<T>,
) -> Result<(BlockProblem<T>, DenseVector<T>)> {
    spec.validate()?;
    let (m, n1, n2) = (spec.m, spec.n1, spec.n2);
    let mut rng = Rng::seed_from_u64(spec.seed);
    let l = (spec.cond_num - T::one()) / (spec.cond_num + T::one());

    let svs = bounded_singular_values(&mut rng, n1.min(n2), l);
    let c = diag_rect(n2, n1, &svs);

    // pad below the coupling block with an orthonormal frame whose
    // columns are shrunk so every column of the first block has unit norm
    let (u, _) = qr_thin(&normal_matrix::<T>(&mut rng, m - n2, n1)).expect("finite normal draw");
    let mut a1 = DenseMatrix::zeros(m, n1);
    a1.set_block(0, 0, &c);
    for j in 0..n1 {
        let cn = c.col_norm(j);
        let scale = (T::one() - cn * cn).sqrt();
        for i in 0..m - n2 {
            a1[(n2 + i, j)] = u[(i, j)] * scale;
        }
    }
    let mut a2 = DenseMatrix::zeros(m, n2);
    for j in 0..n2 {
        a2[(j, j)] = T::one();
    }

    let q1 = random_orthogonal::<T>(&mut rng, n1);
    let q2 = random_orthogonal::<T>(&mut rng, n2);
    let a1 = a1.mul(&q1);
    let a2 = a2.mul(&q2);

    let x_true = normal_vector::<T>(&mut rng, n1 + n2);
    let noise = normal_vector::<T>(&mut rng, m);
    let noise = noise.scale(T::one() / noise.norm());
    let stacked = DenseMatrix::hstack(&a1, &a2);
    let y = stacked.mul_vec(&x_true).add(&noise.scale(spec.noise_level));

    let problem = BlockProblem::new(a1, a2, y)?;
    Ok((problem, x_true))
}

/// Draw a random instance per the spec.
///
/// # Example
///
/// ```
/// use blockstep_core::datagen::{gen_instance, GenSpec};
///
/// let spec = GenSpec { m: 20, n1: 4, n2: 6, noise_level: 0.01, cond_num: 10.0, seed: 7 };
/// let problem = gen_instance(&spec).unwrap();
/// assert!(problem.assumes_bwo());
/// ```
pub fn gen_instance<T: Real>(spec: &GenSpec<T>) -> Result<BlockProblem<T>> {
    gen_instance_with_truth(spec).map(|(problem, _)| problem)
}

/// Two unit columns with inner product exactly `c`, a random right-hand
/// side, and one column per block.
pub fn gen_two_column<T: Real>(c: T, seed: u64) -> Result<BlockProblem<T>> {
    if !(c.abs() > T::zero() && c.abs() < T::one()) {
        return Err(Error::OutOfRange(format!(
            "column cosine must satisfy 0 < |c| < 1, got {c}"
        )));
    }
    let m = 16;
    let mut rng = Rng::seed_from_u64(seed);
    let v1 = normal_vector::<T>(&mut rng, m);
    let a1 = v1.scale(T::one() / v1.norm());
    let v2 = normal_vector::<T>(&mut rng, m);
    let mut w = v2.sub(&a1.scale(a1.dot(&v2)));
    let wn = w.norm();
    assert!(
        wn > T::c(1e-8),
        "draw landed parallel to the first column; use another seed"
    );
    w = w.scale(T::one() / wn);
    let a2 = a1.scale(c).add(&w.scale((T::one() - c * c).sqrt()));
    let y = normal_vector::<T>(&mut rng, m);
    let col = |v: &DenseVector<T>| {
        DenseMatrix::new(m, 1, v.as_slice().to_vec())
    };
    BlockProblem::new(col(&a1), col(&a2), y)
}

/// Orthonormal bases subtending the requested principal angles, or a
/// fully random pair when no angles are given.
///
/// Planted construction: coordinate-frame bases realizing the cosines
/// exactly, rotated as a whole by one random orthogonal matrix.
pub fn gen_subspace_pair<T: Real>(
    m: usize,
    n1: usize,
    n2: usize,
    angles: Option<&[T]>,
    seed: u64,
) -> Result<SubspacePair<T>> {
    if n1 == 0 || n2 == 0 || m < n1 + n2 {
        return Err(Error::BadShape(format!(
            "need m ≥ n1 + n2 with nonempty bases, got m = {m}, n1 = {n1}, n2 = {n2}"
        )));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let (a1, a2) = match angles {
        Some(thetas) => {
            let p = n1.min(n2);
            if thetas.len() != p {
                return Err(Error::BadShape(format!(
                    "need exactly min(n1, n2) = {p} angles, got {}",
                    thetas.len()
                )));
            }
            for &t in thetas {
                if !(t > T::zero() && t <= T::FRAC_PI_2()) {
                    return Err(Error::OutOfRange(format!(
                        "principal angles must lie in (0, π/2], got {t}"
                    )));
                }
            }
            let mut a1 = DenseMatrix::zeros(m, n1);
            for i in 0..n1 {
                a1[(i, i)] = T::one();
            }
            let mut a2 = DenseMatrix::zeros(m, n2);
            for j in 0..n2 {
                if j < p {
                    a2[(j, j)] = thetas[j].cos();
                    a2[(n1 + j, j)] = thetas[j].sin();
                } else {
                    a2[(n1 + j, j)] = T::one();
                }
            }
            let q = random_orthogonal::<T>(&mut rng, m);
            (q.mul(&a1), q.mul(&a2))
        }
        None => {
            let (a1, _) =
                qr_thin(&normal_matrix::<T>(&mut rng, m, n1)).expect("finite normal draw");
            let (a2, _) =
                qr_thin(&normal_matrix::<T>(&mut rng, m, n2)).expect("finite normal draw");
            (a1, a2)
        }
    };
    SubspacePair::new(a1, a2)
}
