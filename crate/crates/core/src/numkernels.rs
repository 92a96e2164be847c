//! Dense matrix/vector types and the factorization kernels built on them.
//!
//! Everything is hand-rolled and aimed at small dense problems: Householder
//! QR (thin and full), back substitution, cyclic Jacobi for symmetric
//! eigenvalues, and one-sided Jacobi for singular values. The problems this
//! crate analyzes have at most a few hundred columns, so the implementations
//! favor auditable invariants and bit-reproducibility over raw speed.
//!
//! Conventions: matrices are row-major; `qr_thin` returns the unique factor
//! pair with a positive diagonal in `R`; eigenvalues and singular values are
//! always sorted in descending order.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tol;

// ---------------------------------------------------------------------------
// vectors
// ---------------------------------------------------------------------------

/// Dense column vector.
///
/// # Example
///
/// ```
/// use blockstep_core::numkernels::DenseVector;
///
/// let v = DenseVector::new(vec![3.0, 4.0]);
/// assert_eq!(v.norm(), 5.0);
/// assert_eq!(v[1], 4.0);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector<T> {
    data: Vec<T>,
}

impl<T: Real> DenseVector<T> {
    /// Wraps a `Vec` as a vector.
    pub fn new(data: Vec<T>) -> Self {
        DenseVector { data }
    }

    /// All-zeros vector of the given length.
    pub fn zeros(len: usize) -> Self {
        DenseVector {
            data: vec![T::zero(); len],
        }
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// True when the vector has no entries.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Entries as a slice.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Iterator over the entries.
    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    /// Inner product with another vector of the same length.
    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.len(), other.len(), "dot of mismatched lengths");
        let mut acc = T::zero();
        for (a, b) in self.data.iter().zip(&other.data) {
            acc += *a * *b;
        }
        acc
    }

    /// Euclidean norm.
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    /// Largest absolute entry (zero for the empty vector).
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    /// Entrywise sum with another vector.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "add of mismatched lengths");
        DenseVector::new(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a + *b)
                .collect(),
        )
    }

    /// Entrywise difference `self − other`.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "sub of mismatched lengths");
        DenseVector::new(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a - *b)
                .collect(),
        )
    }

    /// Scalar multiple.
    pub fn scale(&self, factor: T) -> Self {
        DenseVector::new(self.data.iter().map(|a| *a * factor).collect())
    }

    /// Concatenation `[a; b]`.
    pub fn concat(a: &Self, b: &Self) -> Self {
        let mut data = Vec::with_capacity(a.len() + b.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        DenseVector::new(data)
    }

    /// Splits into the leading `at` entries and the rest.
    pub fn split_at(&self, at: usize) -> (Self, Self) {
        assert!(at <= self.len(), "split point past end");
        (
            DenseVector::new(self.data[..at].to_vec()),
            DenseVector::new(self.data[at..].to_vec()),
        )
    }

    /// True when every entry is finite.
    pub fn is_finite_all(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T> From<Vec<T>> for DenseVector<T> {
    fn from(data: Vec<T>) -> Self {
        DenseVector { data }
    }
}

impl<T> Index<usize> for DenseVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for DenseVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

// ---------------------------------------------------------------------------
// matrices
// ---------------------------------------------------------------------------

/// Dense row-major matrix.
///
/// # Example
///
/// ```
/// use blockstep_core::numkernels::DenseMatrix;
///
/// let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
/// let b = a.mul(&a.transpose());
/// assert_eq!(b[(0, 0)], 5.0);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    /// Builds a matrix from row-major data; the length must be `rows·cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        DenseMatrix { rows, cols, data }
    }

    /// All-zeros matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix from row slices (all of equal length).
    pub fn from_rows(rows: &[&[T]]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entries as a slice.
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols);
        i * self.cols + j
    }

    /// Transposed copy.
    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, rhs.cols);
        // i-k-j order keeps both operands in row-major streaming access
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a_ik = self.data[i * self.cols + k];
                if a_ik == T::zero() {
                    continue;
                }
                let lhs_row = i * rhs.cols;
                let rhs_row = k * rhs.cols;
                for j in 0..rhs.cols {
                    out.data[lhs_row + j] += a_ik * rhs.data[rhs_row + j];
                }
            }
        }
        out
    }

    /// Matrix–vector product.
    pub fn mul_vec(&self, v: &DenseVector<T>) -> DenseVector<T> {
        assert_eq!(self.cols, v.len(), "matrix–vector dimension mismatch");
        let mut out = DenseVector::zeros(self.rows);
        for i in 0..self.rows {
            let mut acc = T::zero();
            let row = i * self.cols;
            for j in 0..self.cols {
                acc += self.data[row + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Entrywise sum.
    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| *a + *b)
            .collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    /// Entrywise difference `self − rhs`.
    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| *a - *b)
            .collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    /// Scalar multiple.
    pub fn scale(&self, factor: T) -> Self {
        let data = self.data.iter().map(|a| *a * factor).collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    /// Operator ∞-norm: the largest absolute row sum.
    pub fn norm_inf(&self) -> T {
        let mut best = T::zero();
        for i in 0..self.rows {
            let mut sum = T::zero();
            for j in 0..self.cols {
                sum += self.data[i * self.cols + j].abs();
            }
            best = best.max(sum);
        }
        best
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, x| acc + *x * *x)
            .sqrt()
    }

    /// Horizontal concatenation `[left right]`.
    pub fn hstack(left: &Self, right: &Self) -> Self {
        assert_eq!(left.rows, right.rows, "hstack needs equal row counts");
        let cols = left.cols + right.cols;
        let mut out = Self::zeros(left.rows, cols);
        for i in 0..left.rows {
            out.data[i * cols..i * cols + left.cols]
                .copy_from_slice(&left.data[i * left.cols..(i + 1) * left.cols]);
            out.data[i * cols + left.cols..(i + 1) * cols]
                .copy_from_slice(&right.data[i * right.cols..(i + 1) * right.cols]);
        }
        out
    }

    /// Copy of the `nrows × ncols` block with upper-left corner `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> Self {
        assert!(r0 + nrows <= self.rows && c0 + ncols <= self.cols, "block out of bounds");
        let mut out = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                out.data[i * ncols + j] = self.data[(r0 + i) * self.cols + (c0 + j)];
            }
        }
        out
    }

    /// Writes `block` into `self` with upper-left corner `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "block out of bounds"
        );
        for i in 0..block.rows {
            for j in 0..block.cols {
                let v = block.data[i * block.cols + j];
                let idx = self.at(r0 + i, c0 + j);
                self.data[idx] = v;
            }
        }
    }

    /// Copy of column `j`.
    pub fn col(&self, j: usize) -> DenseVector<T> {
        assert!(j < self.cols);
        DenseVector::new((0..self.rows).map(|i| self.data[i * self.cols + j]).collect())
    }

    /// Euclidean norm of column `j`.
    pub fn col_norm(&self, j: usize) -> T {
        assert!(j < self.cols);
        let mut acc = T::zero();
        for i in 0..self.rows {
            let v = self.data[i * self.cols + j];
            acc += v * v;
        }
        acc.sqrt()
    }

    /// Gram matrix `AᵀA`, exactly symmetric by construction.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for k in 0..self.rows {
                    acc += self.data[k * n + i] * self.data[k * n + j];
                }
                g.data[i * n + j] = acc;
                g.data[j * n + i] = acc;
            }
        }
        g
    }

    /// True when every entry is finite.
    pub fn is_finite_all(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T: Real> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[self.at(i, j)]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        let idx = self.at(i, j);
        &mut self.data[idx]
    }
}

// ---------------------------------------------------------------------------
// Householder QR
// ---------------------------------------------------------------------------

/// Packed Householder factorization: `R` in the upper triangle, reflector
/// tails below the diagonal (leading component normalized to one), scaling
/// factors in `beta`.
struct PackedQr<T> {
    a: DenseMatrix<T>,
    beta: Vec<T>,
}

/// Runs the Householder elimination in place. Requires `rows ≥ cols`.
fn householder<T: Real>(a: &DenseMatrix<T>) -> PackedQr<T> {
    let (m, n) = (a.rows(), a.cols());
    debug_assert!(m >= n);
    let mut w = a.clone();
    let mut beta = vec![T::zero(); n];
    for k in 0..n {
        let mut col_sq = T::zero();
        for i in k..m {
            let v = w[(i, k)];
            col_sq += v * v;
        }
        let col_norm = col_sq.sqrt();
        if col_norm == T::zero() {
            // column already zero below the diagonal; R[k][k] = 0 and the
            // rank gate downstream decides whether that is acceptable
            continue;
        }
        let x0 = w[(k, k)];
        // choose the sign that avoids cancellation: |v0| = |x0| + ‖x‖
        let alpha = if x0 >= T::zero() { -col_norm } else { col_norm };
        let v0 = x0 - alpha;
        // store the reflector normalized to leading component one
        let mut tail_sq = T::zero();
        for i in k + 1..m {
            let scaled = w[(i, k)] / v0;
            w[(i, k)] = scaled;
            tail_sq += scaled * scaled;
        }
        beta[k] = T::c(2.0) / (T::one() + tail_sq);
        w[(k, k)] = alpha;
        // apply H = I − β v vᵀ to the remaining columns
        for j in k + 1..n {
            let mut tau = w[(k, j)];
            for i in k + 1..m {
                tau += w[(i, k)] * w[(i, j)];
            }
            tau *= beta[k];
            w[(k, j)] -= tau;
            for i in k + 1..m {
                let correction = tau * w[(i, k)];
                w[(i, j)] -= correction;
            }
        }
    }
    PackedQr { a: w, beta }
}

/// Accumulates the leading `q_cols` columns of the orthogonal factor.
fn accumulate_q<T: Real>(packed: &PackedQr<T>, q_cols: usize) -> DenseMatrix<T> {
    let (m, n) = (packed.a.rows(), packed.a.cols());
    let mut q = DenseMatrix::zeros(m, q_cols);
    for i in 0..m.min(q_cols) {
        q[(i, i)] = T::one();
    }
    for k in (0..n).rev() {
        let b = packed.beta[k];
        if b == T::zero() {
            continue;
        }
        for j in 0..q_cols {
            let mut tau = q[(k, j)];
            for i in k + 1..m {
                tau += packed.a[(i, k)] * q[(i, j)];
            }
            tau *= b;
            q[(k, j)] -= tau;
            for i in k + 1..m {
                let correction = tau * packed.a[(i, k)];
                q[(i, j)] -= correction;
            }
        }
    }
    q
}

/// Thin QR factorization `A = QR` with `Q` of size `m×n` and `R` upper
/// triangular `n×n` with a strictly positive diagonal.
///
/// Errors with [`Error::BadShape`] when `A` is wider than tall or empty, and
/// with [`Error::RankDeficient`] when any diagonal entry of `R` falls below
/// the relative rank gate.
///
/// # Example
///
/// ```
/// use blockstep_core::numkernels::{qr_thin, DenseMatrix};
///
/// let a = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 3.0], &[0.0, 0.0]]);
/// let (q, r) = qr_thin(&a).unwrap();
/// let qr = q.mul(&r);
/// assert!(a.sub(&qr).max_abs() < 1e-14);
/// assert!(r[(0, 0)] > 0.0 && r[(1, 1)] > 0.0);
/// ```
pub fn qr_thin<T: Real>(a: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let (m, n) = (a.rows(), a.cols());
    if n == 0 || m < n {
        return Err(Error::BadShape(format!(
            "qr_thin needs rows ≥ cols ≥ 1, got {m}×{n}"
        )));
    }
    let packed = householder(a);
    let gate = T::c(tol::RANK_GATE_QR) * a.norm_inf();
    for j in 0..n {
        if packed.a[(j, j)].abs() <= gate {
            return Err(Error::RankDeficient(format!(
                "R diagonal {j} has magnitude {:e} at or below gate {:e}",
                packed.a[(j, j)].abs().as_f64(),
                gate.as_f64()
            )));
        }
    }
    let mut q = accumulate_q(&packed, n);
    let mut r = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r[(i, j)] = packed.a[(i, j)];
        }
    }
    // fix signs so R has a positive diagonal; makes the pair unique
    for j in 0..n {
        if r[(j, j)] < T::zero() {
            for jj in j..n {
                r[(j, jj)] = -r[(j, jj)];
            }
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok((q, r))
}

/// Full QR factorization `A = QR` with `Q` square `m×m` and `R` upper
/// trapezoidal `m×n`. No rank gate is applied; trailing columns of `Q`
/// span the orthogonal complement of the column space when `A` has full
/// column rank.
pub fn qr_full<T: Real>(a: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let (m, n) = (a.rows(), a.cols());
    if n == 0 || m < n {
        return Err(Error::BadShape(format!(
            "qr_full needs rows ≥ cols ≥ 1, got {m}×{n}"
        )));
    }
    let packed = householder(a);
    let mut q = accumulate_q(&packed, m);
    let mut r = DenseMatrix::zeros(m, n);
    for i in 0..n {
        for j in i..n {
            r[(i, j)] = packed.a[(i, j)];
        }
    }
    for j in 0..n {
        if r[(j, j)] < T::zero() {
            for jj in j..n {
                r[(j, jj)] = -r[(j, jj)];
            }
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok((q, r))
}

/// Solves the upper-triangular system `Rx = b` by back substitution.
/// Entries below the diagonal are ignored.
///
/// Errors with [`Error::BadShape`] for non-square `R` or mismatched `b`,
/// and with [`Error::Singular`] when a diagonal entry is exactly zero.
pub fn back_substitute<T: Real>(r: &DenseMatrix<T>, b: &DenseVector<T>) -> Result<DenseVector<T>> {
    let n = r.rows();
    if r.cols() != n || b.len() != n {
        return Err(Error::BadShape(format!(
            "back_substitute needs square R and matching b, got {}×{} and len {}",
            n,
            r.cols(),
            b.len()
        )));
    }
    for i in 0..n {
        if r[(i, i)] == T::zero() {
            return Err(Error::Singular(format!("zero diagonal at index {i}")));
        }
    }
    let mut x = DenseVector::zeros(n);
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    Ok(x)
}

/// Least-squares solution of `min ‖Ax − y‖` for full-column-rank `A`,
/// computed as `R⁻¹(Qᵀy)` from the thin QR factorization.
pub fn solve_least_squares<T: Real>(
    a: &DenseMatrix<T>,
    y: &DenseVector<T>,
) -> Result<DenseVector<T>> {
    if y.len() != a.rows() {
        return Err(Error::BadShape(format!(
            "right-hand side length {} does not match {} rows",
            y.len(),
            a.rows()
        )));
    }
    let (q, r) = qr_thin(a)?;
    let qty = q.transpose().mul_vec(y);
    back_substitute(&r, &qty)
}

// ---------------------------------------------------------------------------
// symmetric eigenvalues (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Eigenvalues of a symmetric matrix, in descending order, via cyclic Jacobi
/// sweeps (until the off-diagonal Frobenius mass falls below
/// [`tol::JACOBI_OFF`]`·‖S‖F` or [`tol::JACOBI_MAX_SWEEPS`] sweeps).
///
/// Errors with [`Error::NotSymmetric`] when `‖S − Sᵀ‖∞ > `[`tol::SYM_GATE`]
/// `·‖S‖∞`, and with [`Error::BadShape`] for non-square or empty input.
///
/// # Example
///
/// ```
/// use blockstep_core::numkernels::{sym_eigvals, DenseMatrix};
///
/// let s = DenseMatrix::<f64>::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
/// let eigs = sym_eigvals(&s).unwrap();
/// assert!((eigs[0] - 3.0).abs() < 1e-14);
/// assert!((eigs[1] - 1.0).abs() < 1e-14);
/// ```
pub fn sym_eigvals<T: Real>(s: &DenseMatrix<T>) -> Result<DenseVector<T>> {
    let n = s.rows();
    if s.cols() != n || n == 0 {
        return Err(Error::BadShape(format!(
            "sym_eigvals needs a nonempty square matrix, got {}×{}",
            s.rows(),
            s.cols()
        )));
    }
    let scale = s.norm_inf();
    let asym = s.sub(&s.transpose()).norm_inf();
    if asym > T::c(tol::SYM_GATE) * scale {
        return Err(Error::NotSymmetric(format!(
            "asymmetry {:e} exceeds {:e} relative to scale {:e}",
            asym.as_f64(),
            tol::SYM_GATE,
            scale.as_f64()
        )));
    }
    // symmetrize exactly so the sweep sees w[(p,q)] == w[(q,p)]
    let mut w = s.add(&s.transpose()).scale(T::c(0.5));
    let fro = w.frobenius();
    let off_gate = T::c(tol::JACOBI_OFF) * fro;
    for _sweep in 0..tol::JACOBI_MAX_SWEEPS {
        let mut off_sq = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                let v = w[(p, q)];
                off_sq += v * v;
            }
        }
        if (off_sq + off_sq).sqrt() <= off_gate {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = w[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                // standard symmetric Schur 2×2 rotation (smaller angle root)
                let theta = (w[(q, q)] - w[(p, p)]) / (T::c(2.0) * apq);
                let t = if theta >= T::zero() {
                    T::one() / (theta + (T::one() + theta * theta).sqrt())
                } else {
                    -T::one() / (-theta + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let sn = t * c;
                let wpp = w[(p, p)];
                let wqq = w[(q, q)];
                w[(p, p)] = wpp - t * apq;
                w[(q, q)] = wqq + t * apq;
                w[(p, q)] = T::zero();
                w[(q, p)] = T::zero();
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let wip = w[(i, p)];
                    let wiq = w[(i, q)];
                    let new_ip = c * wip - sn * wiq;
                    let new_iq = sn * wip + c * wiq;
                    w[(i, p)] = new_ip;
                    w[(p, i)] = new_ip;
                    w[(i, q)] = new_iq;
                    w[(q, i)] = new_iq;
                }
            }
        }
    }
    let mut eigs: Vec<T> = (0..n).map(|i| w[(i, i)]).collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    Ok(DenseVector::new(eigs))
}

// ---------------------------------------------------------------------------
// singular values (one-sided Jacobi)
// ---------------------------------------------------------------------------

/// Singular values of a rectangular matrix, in descending order, via
/// one-sided Jacobi: rotate column pairs until all pairs are numerically
/// orthogonal, then read off the column norms. Accurate for small singular
/// values where the Gram-matrix route loses half the digits.
///
/// # Example
///
/// ```
/// use blockstep_core::numkernels::{singular_values, DenseMatrix};
///
/// let a = DenseMatrix::<f64>::from_rows(&[&[0.0, 4.0], &[3.0, 0.0]]);
/// let sv = singular_values(&a).unwrap();
/// assert!((sv[0] - 4.0).abs() < 1e-14);
/// assert!((sv[1] - 3.0).abs() < 1e-14);
/// ```
pub fn singular_values<T: Real>(a: &DenseMatrix<T>) -> Result<DenseVector<T>> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::BadShape(format!(
            "singular_values needs a nonempty matrix, got {}×{}",
            a.rows(),
            a.cols()
        )));
    }
    // work on the tall orientation; singular values are transpose-invariant
    let mut w = if a.rows() >= a.cols() {
        a.clone()
    } else {
        a.transpose()
    };
    let (m, n) = (w.rows(), w.cols());
    let ortho_gate = T::c(tol::JACOBI_OFF);
    for _sweep in 0..tol::JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let mut app = T::zero();
                let mut aqq = T::zero();
                let mut apq = T::zero();
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                // skip pairs that are already orthogonal relative to their
                // column norms (also skips exact zero columns)
                if apq.abs() <= ortho_gate * (app * aqq).sqrt() {
                    continue;
                }
                let theta = (aqq - app) / (T::c(2.0) * apq);
                let t = if theta >= T::zero() {
                    T::one() / (theta + (T::one() + theta * theta).sqrt())
                } else {
                    -T::one() / (-theta + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let sn = t * c;
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - sn * wq;
                    w[(i, q)] = sn * wp + c * wq;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = (0..n).map(|j| w.col_norm(j)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    Ok(DenseVector::new(sv))
}

/// Numerical rank of a descending singular-value list: the count of values
/// strictly above [`tol::RANK_REL`]`·σmax`.
pub fn numerical_rank<T: Real>(singular_vals: &DenseVector<T>) -> usize {
    let smax = match singular_vals.as_slice().first() {
        Some(&s) if s > T::zero() => s,
        _ => return 0,
    };
    let gate = T::c(tol::RANK_REL) * smax;
    singular_vals.iter().filter(|&&s| s > gate).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix<f64> {
        DenseMatrix::new(rows, cols, rng.normal_vec(rows * cols))
    }

    /// Random orthogonal factor from the QR of a square normal matrix.
    fn random_orthogonal(n: usize, rng: &mut Rng) -> DenseMatrix<f64> {
        let (q, _r) = qr_thin(&random_matrix(n, n, rng)).expect("normal matrix has full rank");
        q
    }

    #[test]
    fn qr_thin_of_identity_is_identity() {
        let a = DenseMatrix::<f64>::identity(4);
        let (q, r) = qr_thin(&a).unwrap();
        assert!(q.sub(&DenseMatrix::identity(4)).max_abs() < 1e-15);
        assert!(r.sub(&DenseMatrix::identity(4)).max_abs() < 1e-15);
    }

    #[test]
    fn qr_thin_reconstructs_and_is_orthonormal() {
        let mut rng = Rng::seed_from_u64(7);
        let a = random_matrix(6, 3, &mut rng);
        let (q, r) = qr_thin(&a).unwrap();
        let qtq = q.gram();
        assert!(
            qtq.sub(&DenseMatrix::identity(3)).norm_inf() <= tol::QR_RESIDUAL,
            "QᵀQ deviates from identity"
        );
        let recon = q.mul(&r);
        assert!(
            a.sub(&recon).norm_inf() <= tol::QR_RESIDUAL * a.norm_inf(),
            "QR fails to reproduce A"
        );
        for j in 0..3 {
            assert!(r[(j, j)] > 0.0, "R diagonal must be positive");
        }
        for i in 1..3 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0, "R must be upper triangular");
            }
        }
    }

    #[test]
    fn qr_thin_rejects_rank_deficiency_and_bad_shapes() {
        // second column is an exact multiple of the first
        let a = DenseMatrix::from_rows(&[
            &[1.0, 3.0],
            &[2.0, 6.0],
            &[-1.0, -3.0],
            &[0.5, 1.5],
        ]);
        match qr_thin(&a) {
            Err(Error::RankDeficient(_)) => {}
            other => panic!("expected RankDeficient, got {other:?}"),
        }
        let wide = DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0]]);
        assert!(matches!(qr_thin(&wide), Err(Error::BadShape(_))));
    }

    #[test]
    fn qr_full_spans_the_complement() {
        let mut rng = Rng::seed_from_u64(7);
        let a = random_matrix(5, 2, &mut rng);
        let (q, r) = qr_full(&a).unwrap();
        assert_eq!(q.rows(), 5);
        assert_eq!(q.cols(), 5);
        assert!(q.gram().sub(&DenseMatrix::identity(5)).norm_inf() <= tol::QR_RESIDUAL);
        assert!(a.sub(&q.mul(&r)).norm_inf() <= tol::QR_RESIDUAL * a.norm_inf());
        // trailing columns are orthogonal to the range of A
        let tail = q.block(0, 2, 5, 3);
        assert!(a.transpose().mul(&tail).max_abs() <= 1e-13);
    }

    #[test]
    fn back_substitute_solves_planted_systems() {
        let mut rng = Rng::seed_from_u64(3);
        let n = 4;
        let mut r = DenseMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                r[(i, j)] = rng.standard_normal();
            }
            // keep the diagonal comfortably away from zero
            r[(i, i)] += if r[(i, i)] >= 0.0 { 2.0 } else { -2.0 };
        }
        let x_true = DenseVector::new(rng.normal_vec(n));
        let b = r.mul_vec(&x_true);
        let x = back_substitute(&r, &b).unwrap();
        assert!(x.sub(&x_true).max_abs() < 1e-12);
    }

    #[test]
    fn back_substitute_gates_zero_diagonal_and_shape() {
        let r = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 0.0]]);
        let b = DenseVector::new(vec![1.0, 1.0]);
        assert!(matches!(back_substitute(&r, &b), Err(Error::Singular(_))));
        let rect = DenseMatrix::from_rows(&[&[1.0, 2.0]]);
        assert!(matches!(
            back_substitute(&rect, &b),
            Err(Error::BadShape(_))
        ));
    }

    #[test]
    fn solve_least_squares_minimizes_the_residual() {
        let mut rng = Rng::seed_from_u64(3);
        let a = random_matrix(8, 3, &mut rng);
        let y = DenseVector::new(rng.normal_vec(8));
        let x = solve_least_squares(&a, &y).unwrap();
        // normal-equation residual vanishes at the minimizer
        let resid = a.transpose().mul_vec(&a.mul_vec(&x).sub(&y));
        let scale = a.transpose().mul_vec(&y).norm();
        assert!(resid.norm() <= tol::NORMAL_EQ * scale);
    }

    #[test]
    fn sym_eigvals_recovers_planted_spectrum() {
        let mut rng = Rng::seed_from_u64(11);
        let planted = [5.0, 2.0, 1.0, 0.5, 0.1];
        let n = planted.len();
        let q = random_orthogonal(n, &mut rng);
        let mut lambda = DenseMatrix::<f64>::zeros(n, n);
        for (i, &v) in planted.iter().enumerate() {
            lambda[(i, i)] = v;
        }
        let s = q.mul(&lambda).mul(&q.transpose());
        // enforce exact symmetry of the test input; the product carries
        // roundoff below the gate but the oracle wants a clean S
        let s = s.add(&s.transpose()).scale(0.5);
        let eigs = sym_eigvals(&s).unwrap();
        for (i, &v) in planted.iter().enumerate() {
            assert!(
                (eigs[i] - v).abs() < 1e-8,
                "eig {i}: got {}, planted {v}",
                eigs[i]
            );
        }
        // the eigenvalue sum matches the trace
        let trace: f64 = (0..n).map(|i| s[(i, i)]).sum();
        let sum: f64 = eigs.iter().sum();
        assert!((sum - trace).abs() <= tol::EIG_TRACE * s.norm_inf().max(1.0));
    }

    #[test]
    fn sym_eigvals_gates_asymmetry() {
        let s = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(sym_eigvals(&s), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn sym_eigvals_handles_diagonal_and_zero_matrices() {
        let d = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 7.0]]);
        let eigs = sym_eigvals(&d).unwrap();
        assert_eq!(eigs.as_slice(), &[7.0, 1.0]);
        let z = DenseMatrix::<f64>::zeros(3, 3);
        assert_eq!(sym_eigvals(&z).unwrap().as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn singular_values_recover_planted_values() {
        let mut rng = Rng::seed_from_u64(5);
        let planted = [2.0, 1.0, 0.5];
        let (m, n) = (6, 3);
        let u = random_orthogonal(m, &mut rng).block(0, 0, m, n);
        let v = random_orthogonal(n, &mut rng);
        let mut sigma = DenseMatrix::<f64>::zeros(n, n);
        for (i, &s) in planted.iter().enumerate() {
            sigma[(i, i)] = s;
        }
        let a = u.mul(&sigma).mul(&v.transpose());
        let sv = singular_values(&a).unwrap();
        for (i, &s) in planted.iter().enumerate() {
            assert!((sv[i] - s).abs() < 1e-10, "σ{i}: got {}, planted {s}", sv[i]);
        }
        // wide orientation gives the same values
        let sv_wide = singular_values(&a.transpose()).unwrap();
        for i in 0..n {
            assert!((sv[i] - sv_wide[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_values_match_gram_eigenvalue_roots() {
        let mut rng = Rng::seed_from_u64(5);
        let a = random_matrix(7, 4, &mut rng);
        let sv = singular_values(&a).unwrap();
        let gram_eigs = sym_eigvals(&a.gram()).unwrap();
        for i in 0..4 {
            // clamp tiny negative roundoff in the PSD spectrum to zero
            let lam = gram_eigs[i].max(0.0);
            assert!(gram_eigs[i] >= tol::PSD_CLAMP);
            assert!(
                (sv[i] - lam.sqrt()).abs() <= tol::SVD_MATCH,
                "σ{i} disagrees with Gram route"
            );
        }
    }

    #[test]
    fn numerical_rank_counts_above_the_relative_gate() {
        let sv = DenseVector::new(vec![2.0, 1e-3, 2.0 * 1e-12]);
        assert_eq!(numerical_rank(&sv), 2);
        assert_eq!(numerical_rank(&DenseVector::<f64>::zeros(3)), 0);
        let zero_matrix = DenseMatrix::<f64>::zeros(4, 2);
        let sv = singular_values(&zero_matrix).unwrap();
        assert_eq!(numerical_rank(&sv), 0);
    }

    #[test]
    fn kernels_work_in_f32_too() {
        let a = DenseMatrix::<f32>::from_rows(&[&[2.0, 1.0], &[1.0, 2.0], &[0.0, 1.0]]);
        let (q, r) = qr_thin(&a).unwrap();
        assert!(a.sub(&q.mul(&r)).max_abs() < 1e-5);
        let eigs = sym_eigvals(&a.gram()).unwrap();
        assert!(eigs[0] >= eigs[1] && eigs[1] > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prop_qr_invariants_hold(seed in 0u64..1000, m in 2usize..8, extra in 0usize..4) {
            let n = (m - 1).min(1 + seed as usize % m.max(2)).max(1);
            let m = m + extra;
            let mut rng = Rng::seed_from_u64(seed);
            let a = random_matrix(m, n, &mut rng);
            let (q, r) = qr_thin(&a).unwrap();
            prop_assert!(q.gram().sub(&DenseMatrix::identity(n)).norm_inf() <= tol::QR_RESIDUAL);
            prop_assert!(a.sub(&q.mul(&r)).norm_inf() <= tol::QR_RESIDUAL * a.norm_inf());
            for j in 0..n {
                prop_assert!(r[(j, j)] > 0.0);
            }
        }

        #[test]
        fn prop_singular_values_sorted_nonnegative(seed in 0u64..1000, m in 1usize..7, n in 1usize..7) {
            let mut rng = Rng::seed_from_u64(seed);
            let a = random_matrix(m, n, &mut rng);
            let sv = singular_values(&a).unwrap();
            prop_assert_eq!(sv.len(), m.min(n));
            for i in 0..sv.len() {
                prop_assert!(sv[i] >= 0.0);
                if i + 1 < sv.len() {
                    prop_assert!(sv[i] >= sv[i + 1]);
                }
            }
        }

        #[test]
        fn prop_gram_eigenvalues_are_psd(seed in 0u64..1000, m in 2usize..7, n in 1usize..5) {
            let mut rng = Rng::seed_from_u64(seed);
            let a = random_matrix(m, n, &mut rng);
            let eigs = sym_eigvals(&a.gram()).unwrap();
            for &lam in eigs.as_slice() {
                prop_assert!(lam >= tol::PSD_CLAMP, "PSD eigenvalue {lam} below clamp floor");
            }
        }

        #[test]
        fn prop_back_substitute_residual_small(seed in 0u64..1000, n in 1usize..6) {
            let mut rng = Rng::seed_from_u64(seed);
            let mut r = DenseMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    r[(i, j)] = rng.standard_normal();
                }
                r[(i, i)] += if r[(i, i)] >= 0.0 { 1.5 } else { -1.5 };
            }
            let b = DenseVector::new(rng.normal_vec(n));
            let x = back_substitute(&r, &b).unwrap();
            let resid = r.mul_vec(&x).sub(&b);
            prop_assert!(resid.max_abs() <= 1e-10 * b.max_abs().max(1.0));
        }
    }
}
