//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)) with
//! uniform-grid sampling by cubic Hermite interpolation.

use nalgebra::DVector;

use crate::{Error, Result};

/// Step-size control parameters.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorOpts {
    pub rtol: f64,
    pub atol: f64,
    /// Optional hard cap on the step size.
    pub max_step: Option<f64>,
}

impl Default for IntegratorOpts {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: None,
        }
    }
}

/// A solution sampled on a uniform time grid.
#[derive(Debug, Clone)]
pub struct SampledSolution {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub n_steps: usize,
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// 5th-order solution weights equal the last A row; E is (b5 - b4).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1`, returning the state on a
/// uniform grid of `n_samples` points (first point at `t0`, last at `t1`).
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: DVector<f64>,
    opts: &IntegratorOpts,
    n_samples: usize,
) -> Result<SampledSolution>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    assert!(n_samples >= 2, "need at least the two endpoints");
    assert!(t1 > t0, "forward integration only");
    let span = t1 - t0;
    let grid: Vec<f64> = (0..n_samples)
        .map(|i| t0 + span * i as f64 / (n_samples - 1) as f64)
        .collect();
    let mut states: Vec<DVector<f64>> = Vec::with_capacity(n_samples);

    let mut t = t0;
    let mut y = y0;
    let mut dy = f(t, &y);
    states.push(y.clone());
    let mut next_sample = 1usize;

    let mut h = (span / 100.0).min(opts.max_step.unwrap_or(f64::INFINITY));
    let h_min = span * 1e-14;
    let mut n_steps = 0usize;

    while t < t1 {
        if h < h_min {
            return Err(Error::IntegratorFailure {
                time: t,
                detail: format!("step size underflow (h = {h:.3e})"),
            });
        }
        h = h.min(t1 - t).min(opts.max_step.unwrap_or(f64::INFINITY));

        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(dy.clone());
        for stage in 0..6 {
            let mut arg = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    arg.axpy(h * a, kj, 1.0);
                }
            }
            k.push(f(t + C[stage] * h, &arg));
        }
        // 5th-order update is stage argument of the FSAL stage: k[6] was
        // evaluated at y_new already.
        let mut y_new = y.clone();
        for (j, kj) in k.iter().take(6).enumerate() {
            let a = A[5][j];
            if a != 0.0 {
                y_new.axpy(h * a, kj, 1.0);
            }
        }
        let mut err_vec = DVector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err_vec.axpy(h * E[j], kj, 1.0);
            }
        }
        let mut err = 0.0f64;
        for i in 0..y.len() {
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (err_vec[i] / scale).powi(2);
        }
        err = (err / y.len() as f64).sqrt();

        if err <= 1.0 {
            let t_new = t + h;
            let dy_new = k.pop().expect("FSAL stage");
            // Emit grid samples inside (t, t_new] by cubic Hermite.
            while next_sample < n_samples && grid[next_sample] <= t_new + 1e-12 * span {
                let ts = grid[next_sample].min(t_new);
                let s = if h > 0.0 { (ts - t) / h } else { 1.0 };
                states.push(hermite(&y, &dy, &y_new, &dy_new, h, s));
                next_sample += 1;
            }
            t = t_new;
            y = y_new;
            dy = dy_new;
            n_steps += 1;
        }
        let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
        h *= factor.clamp(0.2, 5.0);
    }
    while states.len() < n_samples {
        states.push(y.clone());
    }
    Ok(SampledSolution {
        times: grid,
        states,
        n_steps,
    })
}

fn hermite(
    y0: &DVector<f64>,
    dy0: &DVector<f64>,
    y1: &DVector<f64>,
    dy1: &DVector<f64>,
    h: f64,
    s: f64,
) -> DVector<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    y0 * h00 + dy0 * (h10 * h) + y1 * h01 + dy1 * (h11 * h)
}
