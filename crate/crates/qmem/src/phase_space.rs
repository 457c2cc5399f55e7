//! Canonical quadrature algebra: symplectic maps, Gaussian states, and the
//! complete-memory-map predicate.
//!
//! The global quadrature ordering is `(X_A, P_A, X_L, P_L)`; every matrix
//! and vector in the crate follows it.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Default tolerance for symplecticity of exactly constructed maps.
pub const SYMPLECTIC_TOL: f64 = 1e-10;
/// Tolerance for the uncertainty invariant `cov + (i/2) Omega >= 0`.
pub const UNCERTAINTY_TOL: f64 = 1e-9;

/// Phase-space coordinates of the atom + light system, ordered
/// `(X_A, P_A, X_L, P_L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadVector {
    pub x_a: f64,
    pub p_a: f64,
    pub x_l: f64,
    pub p_l: f64,
}

impl QuadVector {
    pub fn new(x_a: f64, p_a: f64, x_l: f64, p_l: f64) -> Self {
        Self { x_a, p_a, x_l, p_l }
    }

    pub fn to_dvector(self) -> DVector<f64> {
        DVector::from_vec(vec![self.x_a, self.p_a, self.x_l, self.p_l])
    }

    pub fn from_dvector(v: &DVector<f64>) -> Result<Self> {
        if v.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                actual: v.len(),
            });
        }
        Ok(Self::new(v[0], v[1], v[2], v[3]))
    }
}

/// Canonical symplectic form for `n_modes` modes: block diagonal with
/// `[[0, 1], [-1, 0]]` blocks in `(X, P)` ordering.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    assert!(n_modes >= 1, "n_modes must be >= 1");
    let dim = 2 * n_modes;
    let mut omega = DMatrix::zeros(dim, dim);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// True iff `||M Omega M^T - Omega||_max <= tol`.
pub fn is_symplectic(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    if !m.nrows().is_multiple_of(2) {
        return Err(Error::OddDimension(m.nrows()));
    }
    Ok(symplectic_residual(m) <= tol)
}

/// Max-norm of `M Omega M^T - Omega`.
pub fn symplectic_residual(m: &DMatrix<f64>) -> f64 {
    let omega = symplectic_form(m.nrows() / 2);
    let res = m * &omega * m.transpose() - omega;
    res.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// A linear canonical transformation on `n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMap {
    matrix: DMatrix<f64>,
}

impl SymplecticMap {
    /// Wraps a matrix, checking squareness, even dimension, and
    /// symplecticity within `tol`.
    pub fn new(matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !is_symplectic(&matrix, tol)? {
            return Err(Error::InvalidParameter(format!(
                "matrix is not symplectic: residual {:.3e} > tol {:.3e}",
                symplectic_residual(&matrix),
                tol
            )));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix known to be symplectic by construction.
    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.dim() / 2
    }

    pub fn is_symplectic(&self, tol: f64) -> bool {
        symplectic_residual(&self.matrix) <= tol
    }

    /// Composition applying `first`, then `self` (matrix product
    /// `self * first`).
    pub fn compose(&self, first: &SymplecticMap) -> Result<SymplecticMap> {
        if self.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: first.dim(),
            });
        }
        Ok(SymplecticMap {
            matrix: &self.matrix * &first.matrix,
        })
    }

    /// Heisenberg action on a Gaussian state: `mean' = M mean + shift`,
    /// `cov' = M cov M^T`.
    pub fn transform_state(
        &self,
        state: &GaussianState,
        shift: Option<&DVector<f64>>,
    ) -> Result<GaussianState> {
        if self.dim() != state.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: state.dim(),
            });
        }
        let mut mean = &self.matrix * state.mean();
        if let Some(s) = shift {
            if s.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    actual: s.len(),
                });
            }
            mean += s;
        }
        let cov = &self.matrix * state.cov() * self.matrix.transpose();
        GaussianState::new(mean, cov)
    }

    /// True iff both diagonal 2x2 blocks vanish (max-norm <= `tol`) and the
    /// map is symplectic: each subsystem's variables land entirely on the
    /// other.
    pub fn is_complete_memory_map(&self, tol: f64) -> bool {
        if self.dim() != 4 {
            return false;
        }
        let m = &self.matrix;
        let diag_max = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .flat_map(|&(i, j)| [m[(i, j)].abs(), m[(i + 2, j + 2)].abs()])
            .fold(0.0f64, f64::max);
        diag_max <= tol && self.is_symplectic(tol.max(SYMPLECTIC_TOL))
    }
}

/// Gaussian state of `n` bosonic modes: mean vector and covariance matrix.
///
/// Variance convention: the vacuum has `sigma^2 = 1/2` per quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state, checking symmetry of `cov` and the uncertainty
    /// invariant `cov + (i/2) Omega >= 0`.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        // Eigenvalue roundoff grows with the matrix scale; keep the check
        // meaningful for strongly squeezed states.
        let tol = UNCERTAINTY_TOL.max(cov.amax() * 1e-13);
        Self::new_with_tol(mean, cov, tol)
    }

    /// As `new`, with a caller-supplied uncertainty tolerance. Used where
    /// the inputs went through cancellation-prone arithmetic (conditioning
    /// of near-singular states) and the roundoff scale is known.
    pub(crate) fn new_with_tol(mean: DVector<f64>, cov: DMatrix<f64>, tol: f64) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: cov.nrows(),
            });
        }
        if !mean.len().is_multiple_of(2) {
            return Err(Error::OddDimension(mean.len()));
        }
        let asym = (&cov - cov.transpose())
            .iter()
            .fold(0.0f64, |a, x| a.max(x.abs()));
        if asym > 1e-9 {
            return Err(Error::InvalidState(format!(
                "covariance not symmetric: max asymmetry {asym:.3e}"
            )));
        }
        let state = Self { mean, cov };
        let lambda = state.uncertainty_min_eigenvalue();
        if lambda < -tol {
            return Err(Error::InvalidState(format!(
                "uncertainty violated: min eigenvalue of cov + (i/2) Omega is {lambda:.3e}"
            )));
        }
        Ok(state)
    }

    /// Vacuum (equivalently, any coherent state's covariance) on `n` modes.
    pub fn vacuum(n_modes: usize) -> Self {
        let dim = 2 * n_modes;
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * 0.5,
        }
    }

    /// Coherent single-mode state centered at `(x, p)`.
    pub fn coherent(x: f64, p: f64) -> Self {
        let mut s = Self::vacuum(1);
        s.mean[0] = x;
        s.mean[1] = p;
        s
    }

    /// Single-mode Gaussian with independent quadrature variances.
    pub fn single_mode(x: f64, p: f64, var_x: f64, var_p: f64) -> Result<Self> {
        Self::new(
            DVector::from_vec(vec![x, p]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![var_x, var_p])),
        )
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_modes(&self) -> usize {
        self.dim() / 2
    }

    /// Tensor product: `self` first, `other` appended after it.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let dim = self.dim() + other.dim();
        let mut mean = DVector::zeros(dim);
        mean.rows_mut(0, self.dim()).copy_from(&self.mean);
        mean.rows_mut(self.dim(), other.dim())
            .copy_from(&other.mean);
        let mut cov = DMatrix::zeros(dim, dim);
        cov.view_mut((0, 0), (self.dim(), self.dim()))
            .copy_from(&self.cov);
        cov.view_mut((self.dim(), self.dim()), (other.dim(), other.dim()))
            .copy_from(&other.cov);
        GaussianState { mean, cov }
    }

    /// Partial trace keeping only the listed modes, in the given order.
    pub fn keep_modes(&self, modes: &[usize]) -> Result<GaussianState> {
        for &m in modes {
            if m >= self.n_modes() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_modes(),
                    actual: m,
                });
            }
        }
        let dim = 2 * modes.len();
        let mut mean = DVector::zeros(dim);
        let mut cov = DMatrix::zeros(dim, dim);
        for (a, &ma) in modes.iter().enumerate() {
            for q in 0..2 {
                mean[2 * a + q] = self.mean[2 * ma + q];
            }
            for (b, &mb) in modes.iter().enumerate() {
                for q in 0..2 {
                    for r in 0..2 {
                        cov[(2 * a + q, 2 * b + r)] = self.cov[(2 * ma + q, 2 * mb + r)];
                    }
                }
            }
        }
        Ok(GaussianState { mean, cov })
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + (i/2) Omega`,
    /// computed through its real symmetric embedding
    /// `[[A, -B], [B, A]]` for `H = A + iB`.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let n = self.dim();
        let omega = symplectic_form(n / 2);
        // H = cov + (i/2) Omega, so A = cov (symmetric), B = Omega/2.
        let mut embed = DMatrix::zeros(2 * n, 2 * n);
        embed.view_mut((0, 0), (n, n)).copy_from(&self.cov);
        embed.view_mut((n, n), (n, n)).copy_from(&self.cov);
        embed.view_mut((0, n), (n, n)).copy_from(&(-0.5 * &omega));
        embed.view_mut((n, 0), (n, n)).copy_from(&(0.5 * &omega));
        let eig = embed.symmetric_eigenvalues();
        eig.iter().fold(f64::INFINITY, |a, &x| a.min(x))
    }

    /// True iff the uncertainty invariant holds within `tol`.
    pub fn satisfies_uncertainty(&self, tol: f64) -> bool {
        self.uncertainty_min_eigenvalue() >= -tol
    }
}
