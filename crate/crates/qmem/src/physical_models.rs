//! Microscopic models behind the abstract bilinear couplings: the Faraday
//! interaction of a polarized pulse with a spin ensemble, the two-level
//! Raman configuration with light-shift cancellation, and the
//! three-mode EIT storage dynamics with excited-state decay.
//!
//! Conventions: the EIT mode vector is `z = (a_L, sigma_21/sqrt(N_A),
//! sigma_23/sqrt(N_A))`; its real quadrature representation interleaves
//! `(X, P)` per mode in that order, so the excited mode occupies rows 4-5.

use nalgebra::{DVector, Matrix3, Matrix6, Vector3, Vector6};
use num_complex::Complex64;

use crate::ode::{integrate, IntegratorOpts};
use crate::phase_space::GaussianState;
use crate::quadratic_dynamics::BilinearHamiltonian;
use crate::{Error, Result};

/// Cap on `tan(theta)` when converting a mixing-angle ramp into a control
/// field; keeps `Omega = g sqrt(N_A)/tan(theta)` finite at `theta = 0`.
pub const MIN_TAN_THETA: f64 = 1e-6;

/// Number of uniformly spaced output samples of an EIT simulation.
pub const EIT_SAMPLES: usize = 512;

const VALIDITY_RATIO: f64 = 0.1;

// ---------------------------------------------------------------------------
// Faraday interaction
// ---------------------------------------------------------------------------

/// Parameters of the off-resonant Faraday interaction.
#[derive(Debug, Clone, Copy)]
pub struct FaradayParams {
    /// Single-atom dipole coupling (rad/s).
    pub g: f64,
    /// One-photon detuning (rad/s), nonzero.
    pub delta: f64,
    /// Classical drive amplitude `|alpha|`.
    pub alpha_amp: f64,
    /// Atom number `N_A`.
    pub n_atoms: f64,
    /// Control phase `arg(alpha)`.
    pub phi: f64,
}

impl FaradayParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta == 0.0 {
            return Err(Error::InvalidParameter(
                "Faraday detuning must be nonzero".into(),
            ));
        }
        if self.n_atoms <= 0.0 || self.alpha_amp < 0.0 {
            return Err(Error::InvalidParameter(
                "need n_atoms > 0 and alpha_amp >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Adiabatic-elimination validity flag: `g|alpha| / |Delta| > 0.1`.
    pub fn validity_warning(&self) -> bool {
        (self.g * self.alpha_amp / self.delta).abs() > VALIDITY_RATIO
    }
}

/// Faraday coupling constant `kappa = g^2 |alpha| sqrt(N_A) / Delta`.
pub fn faraday_coupling(fp: &FaradayParams) -> Result<f64> {
    fp.validate()?;
    Ok(fp.g * fp.g * fp.alpha_amp * fp.n_atoms.sqrt() / fp.delta)
}

/// The eliminated interaction `H_int = -kappa P_A P_L` as a bilinear
/// Hamiltonian (`s = -kappa`).
pub fn faraday_hamiltonian(fp: &FaradayParams) -> Result<BilinearHamiltonian> {
    Ok(BilinearHamiltonian::interaction(
        0.0,
        0.0,
        0.0,
        -faraday_coupling(fp)?,
    ))
}

/// Holstein-Primakoff commutator correction: the factor multiplying `i` in
/// `[X_A, P_A] = i (1 - 2 n / N_A)`.
pub fn hp_commutator_correction(n_excitations: f64, n_atoms: f64) -> f64 {
    1.0 - 2.0 * n_excitations / n_atoms
}

/// Bosonization-validity flag for the correction factor.
pub fn hp_validity_warning(correction: f64) -> bool {
    correction < 0.9
}

// ---------------------------------------------------------------------------
// Raman configuration
// ---------------------------------------------------------------------------

/// Parameters of the double-Lambda Raman configuration.
#[derive(Debug, Clone, Copy)]
pub struct RamanParams {
    pub g: f64,
    pub g_prime: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub alpha_amp: f64,
    pub n_atoms: f64,
}

impl RamanParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta == 0.0 || self.delta_prime == 0.0 {
            return Err(Error::InvalidParameter(
                "Raman detunings must be nonzero".into(),
            ));
        }
        if self.n_atoms <= 0.0 || self.alpha_amp < 0.0 {
            return Err(Error::InvalidParameter(
                "need n_atoms > 0 and alpha_amp >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Off-resonance validity flag: the drive must stay weak compared with
    /// both detuning-to-coupling ratios.
    pub fn validity_warning(&self) -> bool {
        let limit = |g: f64, d: f64| {
            if g == 0.0 {
                f64::INFINITY
            } else {
                (d / g).abs()
            }
        };
        let bound = limit(self.g, self.delta).min(limit(self.g_prime, self.delta_prime));
        self.alpha_amp > VALIDITY_RATIO * bound
    }
}

/// The two prefactors of the eliminated Raman Hamiltonian
/// `H_int = faraday_coeff S_z sigma_z + beamsplitter_coeff (S_x sigma_x + S_y sigma_y)`:
/// `(-2 (g^2/Delta + g'^2/Delta'), 2 (g^2/Delta - g'^2/Delta'))`.
pub fn raman_coefficients(rp: &RamanParams) -> Result<(f64, f64)> {
    rp.validate()?;
    let a = rp.g * rp.g / rp.delta;
    let b = rp.g_prime * rp.g_prime / rp.delta_prime;
    Ok((-2.0 * (a + b), 2.0 * (a - b)))
}

/// True when the light shifts cancel: `g'^2/Delta' = -g^2/Delta` within
/// 1e-9 relative.
pub fn light_shifts_cancelled(rp: &RamanParams) -> Result<bool> {
    rp.validate()?;
    let a = rp.g * rp.g / rp.delta;
    let b = rp.g_prime * rp.g_prime / rp.delta_prime;
    Ok((a + b).abs() <= 1e-9 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
}

/// The classically driven beam-splitter Hamiltonian the cancelled Raman
/// configuration realizes: at the cancellation point this is
/// `(2 g^2 |alpha| sqrt(N_A) / Delta) (X_A X_L + P_A P_L)`, the resonant
/// swap family at `xi = pi/2`.
pub fn raman_effective_hamiltonian(rp: &RamanParams) -> Result<BilinearHamiltonian> {
    let (_, bs) = raman_coefficients(rp)?;
    let c = bs * rp.alpha_amp * rp.n_atoms.sqrt() / 2.0;
    Ok(BilinearHamiltonian::interaction(c, 0.0, 0.0, c))
}

/// Pulse area `(2 g^2 sqrt(N_A) / Delta) int |alpha(t)| dt` by trapezoid
/// over the sampled profile, plus the factor rescaling the amplitude so the
/// area hits `pi/2` exactly.
pub fn raman_pulse_area(rp: &RamanParams, times: &[f64], amplitudes: &[f64]) -> Result<(f64, f64)> {
    rp.validate()?;
    if times.len() != amplitudes.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            actual: amplitudes.len(),
        });
    }
    if times.len() < 2 {
        return Err(Error::InvalidParameter(
            "pulse profile needs at least two samples".into(),
        ));
    }
    if amplitudes.iter().any(|&a| a < 0.0) {
        return Err(Error::InvalidParameter(
            "pulse amplitudes must be non-negative".into(),
        ));
    }
    let mut integral = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        if dt <= 0.0 {
            return Err(Error::InvalidParameter(
                "pulse times must be increasing".into(),
            ));
        }
        integral += 0.5 * (amplitudes[i] + amplitudes[i - 1]) * dt;
    }
    let area = 2.0 * rp.g * rp.g * rp.n_atoms.sqrt() / rp.delta * integral;
    if area == 0.0 {
        return Err(Error::InvalidParameter("pulse area is zero".into()));
    }
    Ok((area, std::f64::consts::FRAC_PI_2 / area))
}

// ---------------------------------------------------------------------------
// EIT three-mode dynamics
// ---------------------------------------------------------------------------

/// Mixing-angle ramp shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampShape {
    Linear,
    Smoothstep,
}

impl std::str::FromStr for RampShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "smoothstep" => Ok(Self::Smoothstep),
            other => Err(Error::InvalidParameter(format!(
                "unknown ramp shape '{other}'"
            ))),
        }
    }
}

/// A mixing-angle schedule `theta(t)` over `[0, duration]`.
#[derive(Debug, Clone, Copy)]
pub struct RampSpec {
    pub shape: RampShape,
    pub duration: f64,
    pub theta_start: f64,
    pub theta_end: f64,
}

impl RampSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ramp duration must be positive, got {}",
                self.duration
            )));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        for theta in [self.theta_start, self.theta_end] {
            if !(0.0..=half_pi + 1e-12).contains(&theta) {
                return Err(Error::InvalidParameter(format!(
                    "ramp endpoint {theta} outside [0, pi/2]"
                )));
            }
        }
        Ok(())
    }

    pub fn theta(&self, t: f64) -> f64 {
        let u = (t / self.duration).clamp(0.0, 1.0);
        let s = match self.shape {
            RampShape::Linear => u,
            RampShape::Smoothstep => u * u * (3.0 - 2.0 * u),
        };
        self.theta_start + (self.theta_end - self.theta_start) * s
    }

    pub fn theta_dot(&self, t: f64) -> f64 {
        let u = (t / self.duration).clamp(0.0, 1.0);
        let ds = match self.shape {
            RampShape::Linear => 1.0,
            RampShape::Smoothstep => 6.0 * u * (1.0 - u),
        };
        (self.theta_end - self.theta_start) * ds / self.duration
    }
}

/// Parameters of the three-mode EIT storage model.
#[derive(Debug, Clone, Copy)]
pub struct EITParams {
    pub g: f64,
    pub n_atoms: f64,
    /// Excited-state decay rate `Gamma`.
    pub gamma: f64,
    /// One-photon detuning `Delta`.
    pub delta: f64,
    pub ramp: RampSpec,
}

impl EITParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter("decay rate must be >= 0".into()));
        }
        if self.n_atoms <= 0.0 {
            return Err(Error::InvalidParameter("n_atoms must be positive".into()));
        }
        self.ramp.validate()
    }

    /// Collective coupling `g sqrt(N_A)`.
    pub fn collective_coupling(&self) -> f64 {
        self.g * self.n_atoms.sqrt()
    }

    /// Control field realizing mixing angle `theta` at fixed `g sqrt(N_A)`,
    /// with `tan(theta)` capped below at `MIN_TAN_THETA`.
    pub fn control_field(&self, theta: f64) -> f64 {
        self.collective_coupling() / theta.tan().max(MIN_TAN_THETA)
    }
}

/// Mixing angle `theta = atan2(g sqrt(N_A), Omega)` in `[0, pi/2]`.
pub fn eit_mixing_angle(g: f64, n_atoms: f64, omega_control: f64) -> Result<f64> {
    let gn = g * n_atoms.sqrt();
    if gn == 0.0 && omega_control == 0.0 {
        return Err(Error::InvalidParameter(
            "mixing angle undefined at g sqrt(N_A) = Omega = 0".into(),
        ));
    }
    if gn < 0.0 || omega_control < 0.0 {
        return Err(Error::InvalidParameter(
            "couplings must be non-negative".into(),
        ));
    }
    Ok(gn.atan2(omega_control))
}

/// Bright-polariton effective parameters at a fixed control field.
#[derive(Debug, Clone, Copy)]
pub struct BrightStateParams {
    /// Total coupling `W = sqrt(g^2 N_A + Omega^2)`.
    pub w: f64,
    /// Light shift `omega_B = W^2 Delta / (Gamma^2/4 + Delta^2)`.
    pub omega_b: f64,
    /// Effective decay `gamma_B = W^2 Gamma / (Gamma^2/4 + Delta^2)`.
    pub gamma_b: f64,
}

impl BrightStateParams {
    /// Non-adiabatic dark-state loss rate `gamma_D = theta_dot^2 / gamma_B`.
    pub fn gamma_d(&self, theta_dot: f64) -> f64 {
        theta_dot * theta_dot / self.gamma_b
    }
}

pub fn eit_bright_params(ep: &EITParams, omega_control: f64) -> Result<BrightStateParams> {
    ep.validate()?;
    let denom = ep.gamma * ep.gamma / 4.0 + ep.delta * ep.delta;
    if denom == 0.0 {
        return Err(Error::InvalidParameter(
            "bright-state parameters undefined at Gamma = Delta = 0".into(),
        ));
    }
    let gn = ep.collective_coupling();
    let w2 = gn * gn + omega_control * omega_control;
    Ok(BrightStateParams {
        w: w2.sqrt(),
        omega_b: w2 * ep.delta / denom,
        gamma_b: w2 * ep.gamma / denom,
    })
}

/// The 3x3 single-excitation Hamiltonian in the `(a_L, sigma_21, sigma_23)`
/// basis: couplings `g sqrt(N_A)` and `Omega` into the excited row, `-Delta`
/// on its diagonal.
pub fn eit_hamiltonian(gn: f64, omega: f64, delta: f64) -> Matrix3<Complex64> {
    Matrix3::new(0.0, 0.0, gn, 0.0, 0.0, omega, gn, omega, -delta).map(Complex64::from)
}

/// The same Hamiltonian in the frame rotating with the polaritons:
/// tridiagonal with entries `(-/+ i theta_dot, W, -Delta)`.
pub fn eit_rotating_hamiltonian(w: f64, delta: f64, theta_dot: f64) -> Matrix3<Complex64> {
    let i = Complex64::i();
    Matrix3::new(
        Complex64::ZERO,
        -i * theta_dot,
        Complex64::ZERO,
        i * theta_dot,
        Complex64::ZERO,
        w.into(),
        Complex64::ZERO,
        w.into(),
        (-delta).into(),
    )
}

/// Drift and noise of the open three-mode dynamics at one instant.
#[derive(Debug, Clone)]
pub struct EitGenerator {
    pub hamiltonian: Matrix3<Complex64>,
    /// Real 6x6 quadrature drift: `-iH` plus `-Gamma/2` on the excited mode.
    pub drift: Matrix6<f64>,
    /// Vacuum-noise diffusion: `Gamma/2` on the excited-mode quadratures,
    /// so `d Sigma/dt = F Sigma + Sigma F^T + D` preserves uncertainty.
    pub noise: Matrix6<f64>,
}

fn complex_drift(h: &Matrix3<Complex64>, gamma: f64) -> Matrix3<Complex64> {
    let mut m = h * Complex64::new(0.0, -1.0);
    m[(2, 2)] += Complex64::from(-gamma / 2.0);
    m
}

/// Real quadrature representation of a complex mode map: each complex entry
/// `a` becomes the 2x2 block `[[Re a, -Im a], [Im a, Re a]]`.
fn realify(m: &Matrix3<Complex64>) -> Matrix6<f64> {
    let mut out = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let z = m[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

pub fn eit_generator(ep: &EITParams, omega_control: f64) -> Result<EitGenerator> {
    ep.validate()?;
    let h = eit_hamiltonian(ep.collective_coupling(), omega_control, ep.delta);
    let mut noise = Matrix6::zeros();
    noise[(4, 4)] = ep.gamma / 2.0;
    noise[(5, 5)] = ep.gamma / 2.0;
    Ok(EitGenerator {
        drift: realify(&complex_drift(&h, ep.gamma)),
        hamiltonian: h,
        noise,
    })
}

/// Sampled first (and optionally second) moments of the three-mode state.
#[derive(Debug, Clone)]
pub struct ThreeModeTrajectory {
    pub times: Vec<f64>,
    pub means: Vec<Vector3<Complex64>>,
    pub second_moments: Option<Vec<Matrix6<f64>>>,
}

impl ThreeModeTrajectory {
    /// Verifies the uncertainty invariant of every sampled covariance.
    pub fn check_uncertainty(&self, tol: f64) -> Result<()> {
        let covs = self
            .second_moments
            .as_ref()
            .ok_or_else(|| Error::InvalidState("no second moments tracked".into()))?;
        for (k, cov) in covs.iter().enumerate() {
            let dyn_cov = nalgebra::DMatrix::from_fn(6, 6, |i, j| cov[(i, j)]);
            GaussianState::new_with_tol(DVector::zeros(6), dyn_cov, tol).map_err(|e| {
                Error::InvalidState(format!(
                    "uncertainty violated at sample {k} (t = {}): {e}",
                    self.times[k]
                ))
            })?;
        }
        Ok(())
    }
}

/// Integrates the storage ramp: light enters mode `a_L`, the control field
/// follows `Omega(t) = g sqrt(N_A) / tan(theta(t))`, and the transfer
/// efficiency is `|<sigma_21>(T)|^2 / |<a_L>(0)|^2`.
pub fn eit_simulate_transfer(
    ep: &EITParams,
    input_amplitude: Complex64,
    opts: &IntegratorOpts,
    track_covariances: bool,
) -> Result<(ThreeModeTrajectory, f64)> {
    ep.validate()?;
    if input_amplitude.norm_sqr() == 0.0 {
        return Err(Error::InvalidParameter(
            "input amplitude must be nonzero".into(),
        ));
    }
    let gn = ep.collective_coupling();
    let ramp = ep.ramp;
    let gamma = ep.gamma;
    let delta = ep.delta;
    let dim = if track_covariances { 42 } else { 6 };

    let mut y0 = DVector::zeros(dim);
    y0[0] = input_amplitude.re;
    y0[1] = input_amplitude.im;
    if track_covariances {
        for i in 0..6 {
            y0[6 + 6 * i + i] = 0.5; // vacuum in all modes
        }
    }
    let mut noise = Matrix6::zeros();
    noise[(4, 4)] = gamma / 2.0;
    noise[(5, 5)] = gamma / 2.0;

    let f = move |t: f64, y: &DVector<f64>| {
        let theta = ramp.theta(t);
        let omega = gn / theta.tan().max(MIN_TAN_THETA);
        let drift = realify(&complex_drift(&eit_hamiltonian(gn, omega, delta), gamma));
        let mean = Vector6::from_iterator(y.iter().take(6).copied());
        let dmean = drift * mean;
        let mut dy = DVector::zeros(dim);
        dy.rows_mut(0, 6).copy_from_slice(dmean.as_slice());
        if track_covariances {
            let sigma = Matrix6::from_fn(|i, j| y[6 + 6 * i + j]);
            let dsigma = drift * sigma + sigma * drift.transpose() + noise;
            for i in 0..6 {
                for j in 0..6 {
                    dy[6 + 6 * i + j] = dsigma[(i, j)];
                }
            }
        }
        dy
    };

    let sol = integrate(f, 0.0, ramp.duration, y0, opts, EIT_SAMPLES)?;
    let means: Vec<Vector3<Complex64>> = sol
        .states
        .iter()
        .map(|y| Vector3::from_fn(|m, _| Complex64::new(y[2 * m], y[2 * m + 1])))
        .collect();
    let second_moments = track_covariances.then(|| {
        sol.states
            .iter()
            .map(|y| Matrix6::from_fn(|i, j| y[6 + 6 * i + j]))
            .collect()
    });
    let stored = means.last().expect("sampled endpoint")[1].norm_sqr();
    let efficiency = stored / input_amplitude.norm_sqr();
    if !(0.0..=1.0 + 1e-9).contains(&efficiency) {
        return Err(Error::InvalidState(format!(
            "efficiency {efficiency} outside [0, 1]"
        )));
    }
    Ok((
        ThreeModeTrajectory {
            times: sol.times,
            means,
            second_moments,
        },
        efficiency,
    ))
}

/// Far-off-resonant reduction of the EIT Hamiltonian.
#[derive(Debug, Clone, Copy)]
pub struct OffResonantEit {
    /// Beam-splitter part `(g sqrt(N_A) Omega / Delta)(X_A X_L + P_A P_L)`.
    pub hamiltonian: BilinearHamiltonian,
    /// AC Stark shift `g^2 N_A / Delta` of the signal mode.
    pub stark_signal: f64,
    /// AC Stark shift `Omega^2 / Delta` of the spin mode.
    pub stark_spin: f64,
    /// True when `W/|Delta|` or `Gamma/|Delta|` exceeds 0.1.
    pub validity_warning: bool,
}

pub fn eit_off_resonant_hamiltonian(ep: &EITParams, omega_control: f64) -> Result<OffResonantEit> {
    ep.validate()?;
    if ep.delta == 0.0 {
        return Err(Error::InvalidParameter(
            "off-resonant reduction needs a nonzero detuning".into(),
        ));
    }
    let gn = ep.collective_coupling();
    let w = (gn * gn + omega_control * omega_control).sqrt();
    let c = gn * omega_control / ep.delta;
    Ok(OffResonantEit {
        hamiltonian: BilinearHamiltonian::interaction(c, 0.0, 0.0, c),
        stark_signal: gn * gn / ep.delta,
        stark_spin: omega_control * omega_control / ep.delta,
        validity_warning: w / ep.delta.abs() > VALIDITY_RATIO
            || ep.gamma / ep.delta.abs() > VALIDITY_RATIO,
    })
}
