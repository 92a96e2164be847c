//! Numerical tolerances pinned in one place.
//!
//! Every gate, convergence test, and acceptance bound in the crate reads its
//! threshold from here, so the numbers are auditable at a glance and no
//! tolerance is ever duplicated inline. All constants are `f64`; generic code
//! lifts them with [`crate::real::Real::c`].

/// QR residual and orthonormality: `‖QᵀQ − I‖∞` and `‖A − QR‖∞ / ‖A‖∞`.
pub const QR_RESIDUAL: f64 = 1e-12;

/// Rank gate in thin QR: `|R[j][j]| ≤ RANK_GATE_QR · ‖A‖∞` flags deficiency.
pub const RANK_GATE_QR: f64 = 1e-12;

/// Relative asymmetry admitted by the symmetric eigensolver:
/// `‖S − Sᵀ‖∞ ≤ SYM_GATE · ‖S‖∞`.
pub const SYM_GATE: f64 = 1e-10;

/// Jacobi sweeps stop when the off-diagonal Frobenius mass falls below
/// `JACOBI_OFF · ‖S‖F` (same criterion drives the one-sided SVD sweeps).
pub const JACOBI_OFF: f64 = 1e-14;

/// Hard sweep cap for both Jacobi iterations.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalue-sum identity: `|Σλ − trace| ≤ EIG_TRACE · max(1, ‖S‖∞)`.
pub const EIG_TRACE: f64 = 1e-10;

/// Agreement between singular values and Gram-eigenvalue square roots.
pub const SVD_MATCH: f64 = 1e-8;

/// Eigenvalues of PSD Gram products may round below zero by at most this
/// much; callers clamp such values to exactly zero.
pub const PSD_CLAMP: f64 = -1e-10;

/// Numerical rank: count of singular values above `RANK_REL · σmax`.
pub const RANK_REL: f64 = 1e-10;

/// Blockwise-orthonormality gate: `‖AjᵀAj − I‖∞ ≤ BWO_GATE` per block.
pub const BWO_GATE: f64 = 1e-10;

/// Normal-equation residual of the least-squares solution:
/// `‖Aᵀ(Ax − y)‖ ≤ NORMAL_EQ · ‖Aᵀy‖`.
pub const NORMAL_EQ: f64 = 1e-10;

/// Closed-form spectra must agree with the characteristic polynomial:
/// `|det(zI − M)| ≤ CHARPOLY · max(1, ‖M‖∞)^(n1+n2)` at every claimed root.
pub const CHARPOLY: f64 = 1e-8;

/// Equal eigenvalues are merged into one entry with summed multiplicity
/// when they agree to this absolute tolerance (real and imaginary parts).
pub const MULT_MERGE: f64 = 1e-9;

/// Case gate for the closed-form spectrum: `|γ − 1| ≤ CASE_GATE` selects the
/// degenerate unit-stepsize branches.
pub const CASE_GATE: f64 = 1e-12;

/// Exact-formula cross checks (block forms of the iteration matrix, product
/// identities between optimal stepsizes, one-step error recurrences).
pub const EXACT_FORMULA: f64 = 1e-12;

/// One-step error-recurrence exactness of the solvers against the assembled
/// iteration matrix, relative to the current error norm.
pub const RECURRENCE: f64 = 1e-10;

/// Grid searches must come within this of the closed-form optimum, and
/// closed-form optima must not beat an exhaustive grid by more than this.
pub const GRID_SLACK: f64 = 5e-3;

/// Extreme eigenvalues of `CCᵀ` within this of each other are treated as
/// equal in the full-rank stepsize branch, which then routes to the exact
/// zero-radius construction (the closed form is continuous there).
pub const LAMBDA_TIE: f64 = 1e-12;

/// Quadratic discriminants within this relative guard of zero are treated
/// as exact double roots. The optimal-stepsize constructions annihilate the
/// extreme discriminants analytically; evaluating them naively would turn
/// coefficient roundoff into square-root-of-roundoff noise in the radius.
pub const DISC_SNAP: f64 = 1e-14;

/// Relative tolerance for measured asymptotic rates against predictions.
pub const RATE_FIT: f64 = 5e-2;

/// Measured condition number of the Gram matrix against the requested one.
pub const KAPPA_FIT: f64 = 1e-6;

/// Exactness of the planted extreme singular value in generated instances.
pub const PLANTED_SV: f64 = 1e-12;

/// Orthonormal-basis gate for subspace pairs (`‖AᵀA − I‖∞`).
pub const ORTHONORMAL_GATE: f64 = 1e-10;

/// Singular values this close to one are treated as zero principal angles
/// and dropped: `σ > 1 − ZERO_ANGLE`.
pub const ZERO_ANGLE: f64 = 1e-12;

/// Round-trip agreement between planted and measured principal angles.
pub const ANGLE_ROUNDTRIP: f64 = 1e-8;

/// Idempotence / reflection identities of projector matrices (`P² = P`,
/// `R² = I`) and operator assembly checks.
pub const PROJECTOR_IDENT: f64 = 1e-12;

/// Rate fits truncate the trace at the first error below
/// `TRACE_FLOOR_REL · error₀` (or below the machine floor guard if larger).
pub const TRACE_FLOOR_REL: f64 = 1e-13;

/// Machine floor guard multiplier: errors below `FLOOR_GUARD · ε · error₀`
/// are dominated by roundoff and never enter a fitting window.
pub const FLOOR_GUARD: f64 = 1e2;

/// Estimated rates at or beyond this value are reported as divergence.
pub const DIVERGENCE_CAP: f64 = 1.5;
