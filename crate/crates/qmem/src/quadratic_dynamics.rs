//! Bilinear Hamiltonians and the symplectic maps they generate.
//!
//! A quadratic Hamiltonian
//! `H = (omega_A/2)(X_A^2 + P_A^2) + (omega_L/2)(X_L^2 + P_L^2)
//!    + p X_A X_L + q X_A P_L + r P_A X_L + s P_A P_L`
//! acts on the quadrature vector `y = (X_A, P_A, X_L, P_L)` through the
//! Heisenberg equation `dy/dt = i [H, y] = G y`; `evolve` exponentiates
//! the generator `G`.

use nalgebra::DMatrix;

use crate::phase_space::SymplecticMap;

/// Coupling coefficients of a two-mode bilinear Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearHamiltonian {
    /// Coefficient of `X_A X_L`.
    pub p: f64,
    /// Coefficient of `X_A P_L`.
    pub q: f64,
    /// Coefficient of `P_A X_L`.
    pub r: f64,
    /// Coefficient of `P_A P_L`.
    pub s: f64,
    /// Atomic oscillator frequency.
    pub omega_a: f64,
    /// Light oscillator frequency.
    pub omega_l: f64,
}

impl BilinearHamiltonian {
    /// Pure interaction, no free evolution.
    pub fn interaction(p: f64, q: f64, r: f64, s: f64) -> Self {
        Self {
            p,
            q,
            r,
            s,
            omega_a: 0.0,
            omega_l: 0.0,
        }
    }

    /// The Faraday-type pass Hamiltonian `H = P_A P_L`.
    pub fn momentum_coupling() -> Self {
        Self::interaction(0.0, 0.0, 0.0, 1.0)
    }

    /// The position pass Hamiltonian `H = X_A X_L`.
    pub fn position_coupling() -> Self {
        Self::interaction(1.0, 0.0, 0.0, 0.0)
    }

    /// The resonant swap family `alpha * H_1(xi)` with
    /// `H_1 = sin(xi) (X_A X_L + P_A P_L) + cos(xi) (P_A X_L - X_A P_L)`.
    pub fn swap_family(xi: f64, alpha: f64) -> Self {
        let (sin, cos) = xi.sin_cos();
        Self::interaction(alpha * sin, -alpha * cos, alpha * cos, alpha * sin)
    }
}

/// Accumulated-area description of the resonant swap interaction:
/// `H_int(t) = alpha(t) H_1(xi)` enters the dynamics only through the
/// pulse area `Phi = int alpha dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealCoupling {
    pub xi: f64,
    /// Accumulated pulse area `Phi`.
    pub alpha_area: f64,
}

impl IdealCoupling {
    pub fn new(xi: f64, alpha_area: f64) -> Self {
        Self { xi, alpha_area }
    }
}

/// Generator `G` of the Heisenberg equations `dy/dt = G y`.
pub fn generator_matrix(h: &BilinearHamiltonian) -> DMatrix<f64> {
    let &BilinearHamiltonian {
        p,
        q,
        r,
        s,
        omega_a,
        omega_l,
    } = h;
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, omega_a, r, s, //
            -omega_a, 0.0, -p, -q, //
            q, s, 0.0, omega_l, //
            -p, -r, -omega_l, 0.0,
        ],
    )
}

/// Unitary evolution under a time-independent bilinear Hamiltonian:
/// `M = exp(G t)`.
pub fn evolve(h: &BilinearHamiltonian, t: f64) -> SymplecticMap {
    let g = generator_matrix(h) * t;
    SymplecticMap::from_matrix_unchecked(expm(&g))
}

/// The swap generator `C(xi)` with `C^2 = -1`: off-diagonal blocks
/// `R^{-1}(xi)` (top right) and `-R(xi)` (bottom left), `R` the rotation
/// by `xi`.
fn swap_generator(xi: f64) -> DMatrix<f64> {
    generator_matrix(&BilinearHamiltonian::swap_family(xi, 1.0))
}

/// Closed-form map for the swap family at pulse area `Phi`:
/// `cos(Phi) 1 + sin(Phi) C(xi)`. Complete memory maps occur at
/// `Phi = (2n+1) pi/2`.
pub fn ideal_map(c: &IdealCoupling) -> SymplecticMap {
    let (sin, cos) = c.alpha_area.sin_cos();
    let m = DMatrix::identity(4, 4) * cos + swap_generator(c.xi) * sin;
    SymplecticMap::from_matrix_unchecked(m)
}

/// Partial Baker-Campbell-Hausdorff sum `sum_{k<n_terms} Phi^k C^k / k!`.
///
/// Converges to `ideal_map` with remainder bounded by
/// `Phi^n / n! * exp(Phi)`. Not symplectic at finite order; returned as a
/// plain matrix.
pub fn bch_series_map(c: &IdealCoupling, n_terms: usize) -> DMatrix<f64> {
    assert!(n_terms >= 1, "n_terms must be >= 1");
    let gen = swap_generator(c.xi);
    let mut sum = DMatrix::identity(4, 4);
    let mut term = DMatrix::identity(4, 4);
    for k in 1..n_terms {
        term = &term * &gen * (c.alpha_area / k as f64);
        sum += &term;
    }
    sum
}

/// True iff the free Hamiltonian `H_0 = H_A + H_L` commutes with the
/// interaction part at the generator level (max-norm of the matrix
/// commutator <= 1e-12). Requires resonance `omega_A = omega_L` and an
/// interaction of the `H_1(xi)` form (`p = s`, `q = -r`).
pub fn qnd_commutation_check(h: &BilinearHamiltonian) -> bool {
    let free = generator_matrix(&BilinearHamiltonian {
        p: 0.0,
        q: 0.0,
        r: 0.0,
        s: 0.0,
        omega_a: h.omega_a,
        omega_l: h.omega_l,
    });
    let int = generator_matrix(&BilinearHamiltonian {
        omega_a: 0.0,
        omega_l: 0.0,
        ..*h
    });
    let comm = &free * &int - &int * &free;
    comm.iter().fold(0.0f64, |a, x| a.max(x.abs())) <= 1e-12
}

/// Matrix exponential by scaling and squaring with a Taylor core.
fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())) * a.nrows() as f64;
    let scale = norm.log2().ceil().max(0.0) as u32;
    let small = a / 2f64.powi(scale as i32);
    let mut sum = DMatrix::identity(a.nrows(), a.ncols());
    let mut term = DMatrix::identity(a.nrows(), a.ncols());
    for k in 1..=20 {
        term = &term * &small / k as f64;
        sum += &term;
    }
    let mut result = sum;
    for _ in 0..scale {
        result = &result * &result;
    }
    result
}
