//! Continuous-variable quantum memory toolkit.
//!
//! Simulates the storage of a single light mode in a collective atomic
//! oscillator mode: ideal beam-splitter-like unitary maps, Faraday-type
//! passes supplemented by homodyne measurement and feedback, and the
//! microscopic Faraday/Raman/EIT realizations of those couplings.
//!
//! Conventions used everywhere in this crate:
//! * quadrature ordering `(X_A, P_A, X_L, P_L)` — atom first, light second;
//! * `hbar = 1`, `[X, P] = i`, vacuum variance `1/2` per quadrature;
//! * Heisenberg equation `dA/dt = i [H, A]`.

pub mod error;
pub mod ode;
pub mod phase_space;
pub mod physical_models;
pub mod protocols;
pub mod quadratic_dynamics;
pub mod wigner_engine;

pub use error::Error;
pub use phase_space::{symplectic_form, GaussianState, QuadVector, SymplecticMap};
pub use quadratic_dynamics::{BilinearHamiltonian, IdealCoupling};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
