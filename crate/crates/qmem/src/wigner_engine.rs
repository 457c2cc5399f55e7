//! Exact Wigner-function calculus on sums of complex Gaussian terms.
//!
//! Every state handled here (Gaussian states and Schroedinger cat states)
//! has a Wigner function of the form
//! `W(x, p) = Re sum_k c_k exp(-(v - mu_k)^T P_k (v - mu_k))`
//! with complex coefficients, complex means, and complex symmetric
//! precision matrices whose real parts are positive definite. This class
//! is exactly closed under the affine pullbacks, one-axis Gaussian
//! convolutions, and product integrals the memory schemes need, so the
//! whole pipeline stays analytic; grid quadrature is only a test oracle.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::protocols::Scheme;
use crate::{Error, Result};

type CMat2 = Matrix2<Complex64>;
type CVec2 = Vector2<Complex64>;

const PI: f64 = std::f64::consts::PI;

/// One complex Gaussian term `c exp(-(v - mu)^T P (v - mu))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTerm {
    pub coeff: Complex64,
    pub mean: CVec2,
    pub precision: CMat2,
}

impl GaussianTerm {
    fn validate(&self) -> Result<()> {
        let re = self.precision.map(|z| z.re);
        let (a, b, c, d) = (re[(0, 0)], re[(0, 1)], re[(1, 0)], re[(1, 1)]);
        let sym = (self.precision[(0, 1)] - self.precision[(1, 0)]).norm();
        if sym > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "precision not symmetric (off-diagonal gap {sym:.3e})"
            )));
        }
        // Positive-definite real part: positive trace and determinant.
        if a <= 0.0 || d <= 0.0 || a * d - b * c <= 0.0 {
            return Err(Error::InvalidParameter(
                "real part of precision is not positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Exact integral over the real plane: `c pi / sqrt(det P)`; complex
    /// means do not change it (contour shift).
    fn integral(&self) -> Complex64 {
        self.coeff * PI / self.precision.determinant().sqrt()
    }

    fn evaluate(&self, v: CVec2) -> Complex64 {
        let d = v - self.mean;
        let q = d.dot(&(self.precision * d)); // transpose form, no conjugation
        self.coeff * (-q).exp()
    }
}

/// A Wigner function represented as a finite sum of complex Gaussian terms;
/// the physical value is the real part of the analytic sum.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTermSum {
    terms: Vec<GaussianTerm>,
}

/// A real-amplitude Schroedinger cat state `|alpha, +/->`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatSpec {
    pub alpha: f64,
    pub parity: CatParity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatParity {
    Even,
    Odd,
}

impl CatSpec {
    /// Cat specified by the squared phase-space displacement `d^2` of its
    /// peaks (`x_peak = +/- d`); equals `2 alpha^2` in coherent-amplitude
    /// units. This is the natural axis for fidelity surfaces over cat
    /// "size", since the peak separation is the geometric quantity the
    /// storage noise competes with.
    pub fn from_peak_displacement_sq(d_sq: f64, parity: CatParity) -> Self {
        Self {
            alpha: (d_sq / 2.0).sqrt(),
            parity,
        }
    }
}

/// Single-mode Gaussian Wigner function with independent quadrature
/// variances, normalized to 1.
pub fn make_gaussian(mean: (f64, f64), variances: (f64, f64)) -> Result<GaussianTermSum> {
    let (var_x, var_p) = variances;
    if var_x <= 0.0 || var_p <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "variances must be positive, got ({var_x}, {var_p})"
        )));
    }
    let term = GaussianTerm {
        coeff: Complex64::new(1.0 / (2.0 * PI * (var_x * var_p).sqrt()), 0.0),
        mean: CVec2::new(mean.0.into(), mean.1.into()),
        precision: CMat2::new(
            Complex64::new(1.0 / (2.0 * var_x), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0 / (2.0 * var_p), 0.0),
        ),
    };
    term.validate()?;
    Ok(GaussianTermSum { terms: vec![term] })
}

/// Wigner function of the cat state `|alpha, +/-> = N (|alpha> +/- |-alpha>)`:
/// two displaced vacuum peaks plus a conjugate pair of interference terms
/// with imaginary momentum means.
pub fn make_cat(spec: &CatSpec) -> Result<GaussianTermSum> {
    if spec.alpha < 0.0 {
        return Err(Error::InvalidParameter("cat amplitude must be >= 0".into()));
    }
    let a2 = spec.alpha * spec.alpha;
    let sign = match spec.parity {
        CatParity::Even => 1.0,
        CatParity::Odd => -1.0,
    };
    let norm = 2.0 * (1.0 + sign * (-2.0 * a2).exp());
    if norm < 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "normalization 1 - exp(-2 alpha^2) underflows at alpha = {}; the \
             small-alpha Fock limit is out of scope",
            spec.alpha
        )));
    }
    let c0 = Complex64::new(1.0 / (PI * norm), 0.0);
    let center = 2.0f64.sqrt() * spec.alpha; // x-center of the coherent peaks
    let unit = CMat2::identity();
    let interference_coeff = c0 * sign * (-2.0 * a2).exp();
    let terms = vec![
        GaussianTerm {
            coeff: c0,
            mean: CVec2::new(center.into(), 0.0.into()),
            precision: unit,
        },
        GaussianTerm {
            coeff: c0,
            mean: CVec2::new((-center).into(), 0.0.into()),
            precision: unit,
        },
        GaussianTerm {
            coeff: interference_coeff,
            mean: CVec2::new(0.0.into(), Complex64::new(0.0, center)),
            precision: unit,
        },
        GaussianTerm {
            coeff: interference_coeff,
            mean: CVec2::new(0.0.into(), Complex64::new(0.0, -center)),
            precision: unit,
        },
    ];
    for t in &terms {
        t.validate()?;
    }
    Ok(GaussianTermSum { terms })
}

impl GaussianTermSum {
    pub fn terms(&self) -> &[GaussianTerm] {
        &self.terms
    }

    /// Pointwise value `W(x, p)`.
    pub fn evaluate(&self, x: f64, p: f64) -> f64 {
        let v = CVec2::new(x.into(), p.into());
        self.terms
            .iter()
            .map(|t| t.evaluate(v))
            .sum::<Complex64>()
            .re
    }

    /// Exact `integral of W over the plane`.
    pub fn total_integral(&self) -> f64 {
        self.terms
            .iter()
            .map(GaussianTerm::integral)
            .sum::<Complex64>()
            .re
    }

    /// Purity proxy `2 pi int W^2`; equals 1 for pure states.
    pub fn purity(&self) -> f64 {
        2.0 * PI * self.product_integral(self)
    }

    /// Pullback `W'(v) = W(A v + b)` for invertible `A`.
    pub fn affine_pullback(&self, a: &Matrix2<f64>, b: &Vector2<f64>) -> Result<GaussianTermSum> {
        if a.determinant().abs() < 1e-300 {
            return Err(Error::SingularMatrix("affine_pullback"));
        }
        let a_c = a.map(Complex64::from);
        let b_c = CVec2::new(b[0].into(), b[1].into());
        let a_inv = a_c
            .try_inverse()
            .ok_or(Error::SingularMatrix("affine_pullback"))?;
        let terms = self
            .terms
            .iter()
            .map(|t| GaussianTerm {
                coeff: t.coeff,
                mean: a_inv * (t.mean - b_c),
                precision: a_c.transpose() * t.precision * a_c,
            })
            .collect();
        Ok(GaussianTermSum { terms })
    }

    /// Convolution with a normalized 1D Gaussian of standard deviation
    /// `width` along the `x` or `p` axis; `width = 0` is the identity.
    pub fn gaussian_smooth(&self, axis: SmoothAxis, width: f64) -> Result<GaussianTermSum> {
        if width < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "negative smoothing width {width}"
            )));
        }
        if width == 0.0 {
            return Ok(self.clone());
        }
        let e = match axis {
            SmoothAxis::X => CVec2::new(1.0.into(), 0.0.into()),
            SmoothAxis::P => CVec2::new(0.0.into(), 1.0.into()),
        };
        let kernel_prec = Complex64::from(1.0 / (2.0 * width * width));
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let pe = t.precision * e;
                let a = e.dot(&pe) + kernel_prec;
                GaussianTerm {
                    coeff: t.coeff * (kernel_prec / a).sqrt(),
                    mean: t.mean,
                    precision: t.precision - pe * pe.transpose() / a,
                }
            })
            .collect();
        Ok(GaussianTermSum { terms })
    }

    /// Closed-form `int W1 W2` over the plane (pairwise complex Gaussian
    /// product integrals).
    fn product_integral(&self, other: &GaussianTermSum) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t1 in &self.terms {
            for t2 in &other.terms {
                let p = t1.precision + t2.precision;
                let p_inv = p.try_inverse().expect("positive-definite real parts");
                let m = t1.precision * t1.mean + t2.precision * t2.mean;
                let exponent = m.dot(&(p_inv * m))
                    - t1.mean.dot(&(t1.precision * t1.mean))
                    - t2.mean.dot(&(t2.precision * t2.mean));
                acc += t1.coeff * t2.coeff * PI / p.determinant().sqrt() * exponent.exp();
            }
        }
        acc.re
    }

    /// The storage-quality metric `2 pi int W_target W_mem`, clamped to
    /// `[0, 1 + 1e-9]` (a larger violation is an error).
    pub fn overlap_fidelity(&self, other: &GaussianTermSum) -> Result<f64> {
        for (name, w) in [("left", self), ("right", other)] {
            let n = w.total_integral();
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!(
                    "{name} Wigner function not normalized: integral = {n}"
                )));
            }
        }
        let f = 2.0 * PI * self.product_integral(other);
        if !(-1e-9..=1.0 + 1e-9).contains(&f) {
            return Err(Error::InvalidParameter(format!(
                "overlap fidelity {f} outside [0, 1]"
            )));
        }
        Ok(f.clamp(0.0, 1.0))
    }
}

/// Axis selector for `gaussian_smooth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothAxis {
    X,
    P,
}

/// Gaussian atomic-state parameters entering the measured schemes.
#[derive(Debug, Clone, Copy)]
pub struct AtomParams {
    /// Position standard deviation `sigma_{X,A}` (not the variance).
    pub sigma_xa: f64,
    /// Squeezed-state center `x_0`.
    pub x0: f64,
}

impl Default for AtomParams {
    fn default() -> Self {
        Self {
            sigma_xa: 0.5f64.sqrt(),
            x0: 0.0,
        }
    }
}

/// The ideal stored state `W_in(-t p, (x - x0)/t)`, the reference of the
/// fidelity integral.
pub fn ideal_target(w_in: &GaussianTermSum, t: f64, x0: f64) -> Result<GaussianTermSum> {
    if t == 0.0 {
        return Err(Error::InvalidParameter(
            "pass strength t must be nonzero".into(),
        ));
    }
    let a = Matrix2::new(0.0, -t, 1.0 / t, 0.0);
    let b = Vector2::new(0.0, -x0 / t);
    w_in.affine_pullback(&a, &b)
}

/// Memory-output Wigner function of a scheme: the ideal pullback followed
/// by the scheme's Gaussian noise convolutions.
///
/// Single-pass: measurement noise `sigma_eta` smears the first argument of
/// `W_in` (the `p` axis with width `sigma_eta/|t|`) and the finite atomic
/// squeezing `sigma_XA/t` smears the second (the `x` axis with width
/// `sigma_XA`). Double-pass without feedback picks up only the atomic `x`
/// noise; with feedback only the measurement noise (`x` axis, width
/// `sigma_eta |t|`). Triple-pass is exact.
pub fn memory_output(
    scheme: Scheme,
    w_in: &GaussianTermSum,
    atom: &AtomParams,
    t: f64,
    sigma_eta: f64,
) -> Result<GaussianTermSum> {
    if sigma_eta < 0.0 {
        return Err(Error::InvalidParameter("sigma_eta must be >= 0".into()));
    }
    let pulled = ideal_target(w_in, t, atom.x0)?;
    match scheme {
        Scheme::SinglePassFeedback => pulled
            .gaussian_smooth(SmoothAxis::P, sigma_eta / t.abs())?
            .gaussian_smooth(SmoothAxis::X, atom.sigma_xa),
        Scheme::DoublePass => pulled.gaussian_smooth(SmoothAxis::X, atom.sigma_xa),
        Scheme::DoublePassFeedback => pulled.gaussian_smooth(SmoothAxis::X, sigma_eta * t.abs()),
        Scheme::TriplePass => Ok(pulled),
    }
}

/// Fidelity of storing `w_in` with the given scheme and imperfections:
/// overlap of the ideal and the noisy stored states.
pub fn storage_fidelity(
    scheme: Scheme,
    w_in: &GaussianTermSum,
    atom: &AtomParams,
    t: f64,
    sigma_eta: f64,
) -> Result<f64> {
    let target = ideal_target(w_in, t, atom.x0)?;
    let mem = memory_output(scheme, w_in, atom, t, sigma_eta)?;
    target.overlap_fidelity(&mem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vacuum() -> GaussianTermSum {
        make_gaussian((0.0, 0.0), (0.5, 0.5)).unwrap()
    }

    fn odd_cat(alpha: f64) -> GaussianTermSum {
        make_cat(&CatSpec {
            alpha,
            parity: CatParity::Odd,
        })
        .unwrap()
    }

    #[test]
    fn vacuum_peak_and_decay() {
        let w = vacuum();
        assert_relative_eq!(w.evaluate(0.0, 0.0), 1.0 / PI, epsilon = 1e-14);
        assert_relative_eq!(w.evaluate(3.0, 0.0), (-9.0f64).exp() / PI, epsilon = 1e-16);
        assert_relative_eq!(w.total_integral(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_marginal_matches_1d_density() {
        // Marginal over p of a displaced squeezed Gaussian: N(x0, var_x),
        // checked by 1D quadrature of the analytic terms.
        let (x0, var_x) = (0.7, 0.3);
        let w = make_gaussian((x0, -0.2), (var_x, 0.4)).unwrap();
        for x in [0.0, 0.5, 1.2] {
            let mut marginal = 0.0;
            let (p_lo, p_hi, n) = (-8.0, 8.0, 4001);
            let dp = (p_hi - p_lo) / (n - 1) as f64;
            for i in 0..n {
                let p = p_lo + i as f64 * dp;
                let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                marginal += weight * w.evaluate(x, p) * dp;
            }
            let expected = (-(x - x0) * (x - x0) / (2.0 * var_x)).exp() / (2.0 * PI * var_x).sqrt();
            assert_relative_eq!(marginal, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn cat_normalization_and_purity() {
        let w = odd_cat(1.5);
        assert_relative_eq!(w.total_integral(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(w.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn odd_cat_central_negativity() {
        for alpha in [0.5, 1.0, 2.0, 3.5] {
            assert_relative_eq!(
                odd_cat(alpha).evaluate(0.0, 0.0),
                -1.0 / PI,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn even_cat_central_peak() {
        let w = make_cat(&CatSpec {
            alpha: 1.2,
            parity: CatParity::Even,
        })
        .unwrap();
        assert_relative_eq!(w.evaluate(0.0, 0.0), 1.0 / PI, epsilon = 1e-12);
        assert_relative_eq!(w.total_integral(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tiny_cat_rejected() {
        assert!(make_cat(&CatSpec {
            alpha: 1e-7,
            parity: CatParity::Odd
        })
        .is_err());
    }

    #[test]
    fn affine_identity_and_rotation() {
        let w = vacuum();
        let same = w
            .affine_pullback(&Matrix2::identity(), &Vector2::zeros())
            .unwrap();
        assert_eq!(same, w);

        // Vacuum is rotation invariant.
        let rot = Matrix2::new(0.0, -1.0, 1.0, 0.0);
        let rotated = w.affine_pullback(&rot, &Vector2::zeros()).unwrap();
        for (x, p) in [(0.3, -0.7), (1.1, 0.2)] {
            assert_relative_eq!(rotated.evaluate(x, p), w.evaluate(x, p), epsilon = 1e-14);
        }
    }

    #[test]
    fn affine_pullback_shift_sign() {
        // W'(v) = W(v + b) with A = 1, b = (-1, 0): peak moves to (1, 0).
        let w = vacuum();
        let shifted = w
            .affine_pullback(&Matrix2::identity(), &Vector2::new(-1.0, 0.0))
            .unwrap();
        assert_relative_eq!(shifted.evaluate(1.0, 0.0), 1.0 / PI, epsilon = 1e-14);
    }

    #[test]
    fn affine_rejects_singular() {
        let w = vacuum();
        let singular = Matrix2::new(1.0, 0.0, 0.0, 0.0);
        assert!(w.affine_pullback(&singular, &Vector2::zeros()).is_err());
    }

    #[test]
    fn smooth_zero_width_is_identity() {
        let w = odd_cat(1.0);
        assert_eq!(w.gaussian_smooth(SmoothAxis::X, 0.0).unwrap(), w);
        assert!(w.gaussian_smooth(SmoothAxis::X, -0.1).is_err());
    }

    #[test]
    fn smooth_vacuum_adds_variance() {
        let w = vacuum().gaussian_smooth(SmoothAxis::X, 1.0).unwrap();
        let expected = make_gaussian((0.0, 0.0), (1.5, 0.5)).unwrap();
        for (x, p) in [(0.0, 0.0), (1.0, -0.5), (-2.0, 0.3)] {
            assert_relative_eq!(w.evaluate(x, p), expected.evaluate(x, p), epsilon = 1e-13);
        }
        assert_relative_eq!(w.total_integral(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn smooth_damps_cat_interference_analytically() {
        // Smoothing along p suppresses the fringe amplitude by
        // exp(-(2 sqrt(2) alpha)^2 sigma^2 / 2) relative to the peaks
        // (in the sigma^2 << 1/2 regime the fringe pattern keeps its shape).
        let (alpha, sigma) = (2.0, 0.25);
        let w = odd_cat(alpha);
        let smoothed = w.gaussian_smooth(SmoothAxis::P, sigma).unwrap();
        // Interference term value at the origin, isolated from the two
        // displaced peaks by subtracting them explicitly.
        let peaks: f64 =
            2.0 / (PI * 2.0 * (1.0 - (-2.0 * alpha * alpha).exp())) * (-2.0 * alpha * alpha).exp();
        let fringe_raw = w.evaluate(0.0, 0.0) - peaks;
        let peak_scale = 1.0 / (1.0 + 2.0 * sigma * sigma).sqrt();
        let peaks_smoothed = peaks * peak_scale;
        // For the fringe term (imaginary mean along p), the convolution
        // multiplies the envelope at the origin by
        // exp(-2 alpha^2 * 2 sigma^2 / (1 + 2 sigma^2)) / sqrt(1 + 2 sigma^2).
        let damping =
            (-(8.0 * alpha * alpha) * sigma * sigma / (2.0 * (1.0 + 2.0 * sigma * sigma))).exp();
        let fringe_smoothed = smoothed.evaluate(0.0, 0.0) - peaks_smoothed;
        assert_relative_eq!(
            fringe_smoothed,
            fringe_raw * peak_scale * damping,
            max_relative = 1e-10
        );
    }

    #[test]
    fn overlap_identical_and_displaced() {
        let w = make_gaussian((0.2, -0.1), (0.5, 0.5)).unwrap();
        assert_relative_eq!(w.overlap_fidelity(&w).unwrap(), 1.0, epsilon = 1e-12);

        let d = 1.3;
        let displaced = make_gaussian((d, 0.0), (0.5, 0.5)).unwrap();
        let f = vacuum().overlap_fidelity(&displaced).unwrap();
        assert_relative_eq!(f, (-d * d / 2.0).exp(), epsilon = 1e-12);
    }

    #[test]
    fn overlap_is_symmetric() {
        let a = odd_cat(1.3);
        let b = make_gaussian((0.4, 0.1), (0.6, 0.45)).unwrap();
        assert_relative_eq!(
            a.overlap_fidelity(&b).unwrap(),
            b.overlap_fidelity(&a).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn memory_output_ideal_limit() {
        // sigma_eta = 0 and floor atomic squeezing: W_mem = W_in pullback.
        let w_in = make_gaussian((0.8, -0.3), (0.5, 0.5)).unwrap();
        let atom = AtomParams {
            sigma_xa: 1e-6,
            x0: 0.0,
        };
        let mem = memory_output(Scheme::SinglePassFeedback, &w_in, &atom, 1.3, 0.0).unwrap();
        let ideal = ideal_target(&w_in, 1.3, 0.0).unwrap();
        for (x, p) in [(0.0, 0.0), (1.0, -0.6), (-0.4, 0.9)] {
            assert_relative_eq!(mem.evaluate(x, p), ideal.evaluate(x, p), epsilon = 1e-9);
        }
    }

    #[test]
    fn memory_output_gaussian_covariances() {
        // Coherent input, CSS atom, t = 1, sigma_eta = 0: variances
        // (sigma_XA^2 + t^2 sigma_PL^2, (sigma_XL^2 + sigma_eta^2)/t^2)
        // = (1, 1/2).
        let w_in = make_gaussian((0.0, 0.0), (0.5, 0.5)).unwrap();
        let atom = AtomParams::default();
        let mem = memory_output(Scheme::SinglePassFeedback, &w_in, &atom, 1.0, 0.0).unwrap();
        let expected = make_gaussian((0.0, 0.0), (1.0, 0.5)).unwrap();
        for (x, p) in [(0.0, 0.0), (0.7, 0.2), (-1.1, -0.4)] {
            assert_relative_eq!(mem.evaluate(x, p), expected.evaluate(x, p), epsilon = 1e-12);
        }
    }

    #[test]
    fn memory_output_preserves_normalization_for_cats() {
        for sigma_eta in [0.0, 0.3, 1.0] {
            let mem = memory_output(
                Scheme::SinglePassFeedback,
                &odd_cat(2.0),
                &AtomParams::default(),
                1.0,
                sigma_eta,
            )
            .unwrap();
            assert_relative_eq!(mem.total_integral(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_fidelity_matches_protocol_formula() {
        // Wigner-engine overlap equals the closed-form analytic fidelity
        // for Gaussian inputs.
        use crate::protocols::{analytic_fidelity, FidelityParams};
        for (t, sigma_eta, sigma_xa_sq) in [
            (1.0f64, 0.0f64, 0.5f64),
            (1.4, 0.2, 0.3),
            (0.8, 0.5, 0.1),
            (2.0, 0.05, 0.5),
        ] {
            let w_in = make_gaussian((0.6, -0.2), (0.5, 0.5)).unwrap();
            let atom = AtomParams {
                sigma_xa: sigma_xa_sq.sqrt(),
                x0: 0.0,
            };
            let f_wigner =
                storage_fidelity(Scheme::SinglePassFeedback, &w_in, &atom, t, sigma_eta).unwrap();
            let f_formula = analytic_fidelity(
                crate::protocols::Scheme::SinglePassFeedback,
                &FidelityParams {
                    sigma_xa_sq,
                    sigma_eta,
                    t,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_relative_eq!(f_wigner, f_formula, epsilon = 1e-9);
        }
    }

    #[test]
    fn cat_storage_reaches_half_near_alpha_sq_two() {
        // CSS atom, sigma_eta = 0, t = 1: F crosses the classical limit 0.5
        // at a squared peak displacement of about 2.0.
        let atom = AtomParams::default();
        let f = |d2: f64| {
            let cat = make_cat(&CatSpec::from_peak_displacement_sq(d2, CatParity::Odd)).unwrap();
            storage_fidelity(Scheme::SinglePassFeedback, &cat, &atom, 1.0, 0.0).unwrap()
        };
        assert!(f(1.5) > 0.5);
        assert!(f(2.5) < 0.5);
        // Bisect the crossing.
        let (mut lo, mut hi) = (1.5, 2.5);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let crossing = 0.5 * (lo + hi);
        assert!((crossing - 2.0).abs() < 0.15, "crossing at {crossing}");
    }
}
