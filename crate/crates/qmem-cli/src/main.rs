//! Batch front-end: runs protocol/Wigner/EIT computations from flags or a
//! JSON scenario file and writes deterministic JSON/CSV artifacts.
//!
//! Exit codes: 0 success, 2 usage error, 3 numeric/invariant failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use qmem::ode::IntegratorOpts;
use qmem::phase_space::{symplectic_residual, GaussianState};
use qmem::physical_models::{
    eit_bright_params, eit_simulate_transfer, EITParams, RampShape, RampSpec, MIN_TAN_THETA,
};
use qmem::protocols::{
    analytic_fidelity, run_protocol, FidelityParams, OutcomePolicy, ProtocolSpec, Scheme,
};
use qmem::quadratic_dynamics::{ideal_map, IdealCoupling};
use qmem::wigner_engine::{make_cat, storage_fidelity, AtomParams, CatParity, CatSpec};

#[derive(Parser)]
#[command(name = "qmem", version, about = "Quantum-memory model calculations")]
struct Cli {
    /// JSON scenario file carrying the same fields as one subcommand
    /// (with a "command" discriminator); replaces the subcommand.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Closed-form resonant swap map for a pulse area.
    IdealMap(IdealMapArgs),
    /// One pass/measure/feedback protocol run on Gaussian states.
    Protocol(ProtocolArgs),
    /// Cat-state storage-fidelity surface (CSV) with a 0.5-crossing sidecar.
    CatFidelity(CatFidelityArgs),
    /// EIT storage-efficiency sweep over ramp durations (CSV).
    Eit(EitArgs),
}

/// `start:stop:count` sweep descriptor.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(try_from = "String")]
struct SweepRange {
    start: f64,
    stop: f64,
    count: usize,
}

impl SweepRange {
    fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

impl FromStr for SweepRange {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:stop:count, got '{s}'"));
        }
        let start: f64 = parts[0].parse().map_err(|e| format!("bad start: {e}"))?;
        let stop: f64 = parts[1].parse().map_err(|e| format!("bad stop: {e}"))?;
        let count: usize = parts[2].parse().map_err(|e| format!("bad count: {e}"))?;
        if count < 1 {
            return Err("count must be >= 1".into());
        }
        if stop < start {
            return Err("stop must be >= start".into());
        }
        Ok(Self { start, stop, count })
    }
}

impl TryFrom<String> for SweepRange {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Args, Deserialize)]
struct IdealMapArgs {
    #[arg(long)]
    xi: f64,
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    #[serde(default)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize)]
struct ProtocolArgs {
    /// single-pass | double-pass | double-pass-feedback | triple-pass
    #[arg(long)]
    scheme: String,
    /// Pass strengths, comma separated, one per pass.
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    sigma_eta: f64,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    input_x: f64,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    input_p: f64,
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "half")]
    input_var_x: f64,
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "half")]
    input_var_p: f64,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    atom_x0: f64,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    atom_p0: f64,
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "half")]
    atom_var_x: f64,
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "half")]
    atom_var_p: f64,
    /// Monte-Carlo sample count for the outcome-averaged fidelity.
    #[arg(long)]
    #[serde(default)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    seed: u64,
    #[arg(long)]
    #[serde(default)]
    out: Option<PathBuf>,
}

fn half() -> f64 {
    0.5
}
fn one() -> u64 {
    1
}

#[derive(Args, Deserialize)]
struct CatFidelityArgs {
    /// Squared peak displacement of the odd cat, start:stop:count.
    #[arg(long)]
    alpha2: SweepRange,
    /// Atomic position standard deviation sigma_XA, start:stop:count.
    #[arg(long)]
    sigma_xa: SweepRange,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    sigma_eta: f64,
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "one_f")]
    t: f64,
    /// CSV output path; a `.json` sidecar with the F=0.5 crossing of the
    /// coherent-spin-state row is written next to it.
    #[arg(long)]
    out: PathBuf,
}

fn one_f() -> f64 {
    1.0
}

#[derive(Args, Deserialize)]
struct EitArgs {
    /// Collective coupling g*sqrt(N_A).
    #[arg(long)]
    gn: f64,
    /// Excited-state decay rate.
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    delta: f64,
    /// linear | smoothstep
    #[arg(long, default_value = "smoothstep")]
    #[serde(default = "smoothstep")]
    ramp: String,
    /// Ramp durations T, start:stop:count.
    #[arg(long)]
    t_sweep: SweepRange,
    /// Mixing angle at the start of the storage ramp.
    #[arg(long, default_value_t = 0.01)]
    #[serde(default = "theta0")]
    theta_start: f64,
    #[arg(long)]
    out: PathBuf,
}

fn smoothstep() -> String {
    "smoothstep".into()
}
fn theta0() -> f64 {
    0.01
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match (cli.config, cli.command) {
        (Some(path), None) => {
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => return usage(&format!("cannot read {}: {e}", path.display())),
            };
            match serde_json::from_str(&text) {
                Ok(c) => c,
                Err(e) => return usage(&format!("bad config {}: {e}", path.display())),
            }
        }
        (None, Some(c)) => c,
        _ => return usage("give exactly one of --config or a subcommand"),
    };
    if let Ok(n) = std::env::var("QMEM_THREADS") {
        let threads: usize = match n.parse() {
            Ok(v) => v,
            Err(_) => return usage("QMEM_THREADS must be a positive integer"),
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let result = match command {
        Command::IdealMap(a) => cmd_ideal_map(&a),
        Command::Protocol(a) => cmd_protocol(&a),
        Command::CatFidelity(a) => cmd_cat_fidelity(&a),
        Command::Eit(a) => cmd_eit(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("usage error: {msg}");
    ExitCode::from(2)
}

type AnyError = Box<dyn std::error::Error>;

/// Rounds to 12 significant digits so artifacts are reproducible across
/// platforms without bit-format debates.
fn sig12(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("round trip")
}

fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

fn emit_json(doc: &serde_json::Value, out: Option<&PathBuf>) -> Result<(), AnyError> {
    let text = format!("{}\n", serde_json::to_string_pretty(doc)?);
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_ideal_map(args: &IdealMapArgs) -> Result<(), AnyError> {
    let map = ideal_map(&IdealCoupling {
        xi: args.xi,
        alpha_area: args.phi,
    });
    let residual = symplectic_residual(map.matrix());
    if residual > 1e-8 {
        return Err(format!("map violates symplecticity (residual {residual:.3e})").into());
    }
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| sig12(map.matrix()[(i, j)])).collect())
        .collect();
    let doc = json!({
        "xi": sig12(args.xi),
        "phi": sig12(args.phi),
        "matrix": rows,
        "symplectic_residual": sig12(residual),
        "complete_memory_map": map.is_complete_memory_map(1e-10),
    });
    emit_json(&doc, args.out.as_ref())
}

/// `2 pi int W_a W_b` for two single-mode Gaussian states.
fn gaussian_overlap(a: &GaussianState, b: &GaussianState) -> Result<f64, AnyError> {
    let sum = a.cov() + b.cov();
    let inv = sum
        .clone()
        .try_inverse()
        .ok_or("degenerate covariance sum")?;
    let d = a.mean() - b.mean();
    let det = sum[(0, 0)] * sum[(1, 1)] - sum[(0, 1)] * sum[(1, 0)];
    Ok((-0.5 * d.dot(&(inv * &d))).exp() / det.sqrt())
}

fn cmd_protocol(args: &ProtocolArgs) -> Result<(), AnyError> {
    let scheme: Scheme = args.scheme.parse().map_err(|e| format!("{e}"))?;
    let mut spec = ProtocolSpec::new(scheme, args.t.clone())?;
    let measures = matches!(
        scheme,
        Scheme::SinglePassFeedback | Scheme::DoublePassFeedback
    );
    if measures {
        spec = spec.with_sigma_eta(args.sigma_eta)?;
    } else if args.sigma_eta != 0.0 {
        return Err(format!("scheme {} performs no measurement", scheme.name()).into());
    }
    let light = GaussianState::single_mode(
        args.input_x,
        args.input_p,
        args.input_var_x,
        args.input_var_p,
    )?;
    let atom =
        GaussianState::single_mode(args.atom_x0, args.atom_p0, args.atom_var_x, args.atom_var_p)?;
    let result = run_protocol(&spec, &light, &atom, OutcomePolicy::Average)?;

    let t = args.t[0];
    let analytic = analytic_fidelity(
        scheme,
        &FidelityParams {
            sigma_xa_sq: args.atom_var_x,
            sigma_pl_sq: args.input_var_p,
            sigma_xl_sq: args.input_var_x,
            sigma_eta: args.sigma_eta,
            t,
        },
    )?;

    // The ideal stored state W_in(-t p, (x - x0)/t), the Monte-Carlo
    // fidelity reference.
    let ideal = GaussianState::single_mode(
        args.atom_x0 + t * args.input_p,
        -args.input_x / t,
        t * t * args.input_var_p,
        args.input_var_x / (t * t),
    )?;

    let monte_carlo = match args.samples {
        None => serde_json::Value::Null,
        Some(0) => return Err("--samples must be positive".into()),
        Some(n) => {
            let (mu, var) = result
                .outcome_density_params
                .ok_or("Monte-Carlo sampling needs a measuring scheme")?;
            let normal = Normal::new(mu, var.sqrt())?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let x = normal.sample(&mut rng);
                let run = run_protocol(&spec, &light, &atom, OutcomePolicy::Fixed(x))?;
                let f = gaussian_overlap(&ideal, &run.memory_state)?;
                sum += f;
                sum_sq += f * f;
            }
            let mean = sum / n as f64;
            let var_f = (sum_sq / n as f64 - mean * mean).max(0.0);
            let se = (var_f / n as f64).sqrt();
            json!({
                "samples": n,
                "seed": args.seed,
                "fidelity": sig12(mean),
                "standard_error": sig12(se),
            })
        }
    };

    let mem = &result.memory_state;
    let doc = json!({
        "scheme": scheme.name(),
        "pass_strengths": args.t.iter().map(|&x| sig12(x)).collect::<Vec<_>>(),
        "sigma_eta": sig12(args.sigma_eta),
        "input": { "mean": [sig12(args.input_x), sig12(args.input_p)],
                   "variances": [sig12(args.input_var_x), sig12(args.input_var_p)] },
        "atom": { "mean": [sig12(args.atom_x0), sig12(args.atom_p0)],
                  "variances": [sig12(args.atom_var_x), sig12(args.atom_var_p)] },
        "memory_mean": mem.mean().iter().map(|&x| sig12(x)).collect::<Vec<_>>(),
        "memory_cov": (0..2)
            .map(|i| (0..2).map(|j| sig12(mem.cov()[(i, j)])).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "outcome_density": result.outcome_density_params
            .map(|(m, v)| json!({ "mean": sig12(m), "variance": sig12(v) }))
            .unwrap_or(serde_json::Value::Null),
        "analytic_fidelity": sig12(analytic),
        "monte_carlo": monte_carlo,
    });
    emit_json(&doc, args.out.as_ref())
}

fn cmd_cat_fidelity(args: &CatFidelityArgs) -> Result<(), AnyError> {
    if args.t == 0.0 {
        return Err("pass strength t must be nonzero".into());
    }
    let alpha2s = args.alpha2.values();
    let sigmas = args.sigma_xa.values();
    if alpha2s.iter().any(|&a| a <= 0.0) || sigmas.iter().any(|&s| s <= 0.0) {
        return Err("alpha2 and sigma_xa sweeps must be positive".into());
    }

    let cells: Vec<(f64, f64)> = alpha2s
        .iter()
        .flat_map(|&a2| sigmas.iter().map(move |&s| (a2, s)))
        .collect();
    let fidelities: Vec<f64> = cells
        .par_iter()
        .map(|&(a2, sigma_xa)| {
            let cat = make_cat(&CatSpec::from_peak_displacement_sq(a2, CatParity::Odd))?;
            storage_fidelity(
                Scheme::SinglePassFeedback,
                &cat,
                &AtomParams { sigma_xa, x0: 0.0 },
                args.t,
                args.sigma_eta,
            )
        })
        .collect::<Result<_, _>>()?;

    let mut csv = String::from("alpha2,sigma_xa,fidelity\r\n");
    for ((a2, s), f) in cells.iter().zip(&fidelities) {
        writeln!(csv, "{},{},{}\r", fmt12(*a2), fmt12(*s), fmt12(*f))?;
    }
    std::fs::write(&args.out, csv)?;

    // Sidecar: F = 0.5 crossing along the row closest to the coherent spin
    // state sigma_XA^2 = 1/2, linearly interpolated on the alpha2 grid.
    let css = 0.5f64.sqrt();
    let (row_idx, &row_sigma) = sigmas
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - css).abs().total_cmp(&(b.1 - css).abs()))
        .expect("non-empty sweep");
    let row: Vec<(f64, f64)> = alpha2s
        .iter()
        .enumerate()
        .map(|(i, &a2)| (a2, fidelities[i * sigmas.len() + row_idx]))
        .collect();
    let mut crossing = None;
    for pair in row.windows(2) {
        let ((a0, f0), (a1, f1)) = (pair[0], pair[1]);
        if (f0 - 0.5) * (f1 - 0.5) <= 0.0 && f0 != f1 {
            crossing = Some(a0 + (0.5 - f0) * (a1 - a0) / (f1 - f0));
            break;
        }
    }
    let sidecar = json!({
        "row_sigma_xa": sig12(row_sigma),
        "crossing_alpha2": crossing.map(sig12),
        "definition": "linear interpolation of the F = 0.5 contour along the row",
    });
    let side_path = args.out.with_extension("json");
    std::fs::write(
        &side_path,
        format!("{}\n", serde_json::to_string_pretty(&sidecar)?),
    )?;
    Ok(())
}

fn cmd_eit(args: &EitArgs) -> Result<(), AnyError> {
    let shape: RampShape = args.ramp.parse()?;
    let theta_end = std::f64::consts::FRAC_PI_2;
    let durations = args.t_sweep.values();
    let bright_floor = eit_bright_params(
        &EITParams {
            g: args.gn,
            n_atoms: 1.0,
            gamma: args.gamma,
            delta: args.delta,
            ramp: RampSpec {
                shape,
                duration: durations[0],
                theta_start: args.theta_start,
                theta_end,
            },
        },
        0.0, // control off: the slowest bright decay along the ramp
    )?;

    let rows: Vec<String> = durations
        .par_iter()
        .map(|&duration| {
            let ep = EITParams {
                g: args.gn,
                n_atoms: 1.0,
                gamma: args.gamma,
                delta: args.delta,
                ramp: RampSpec {
                    shape,
                    duration,
                    theta_start: args.theta_start,
                    theta_end,
                },
            };
            let theta_dot_char = (theta_end - args.theta_start) / duration;
            let ratio = theta_dot_char / bright_floor.gamma_b;
            // First-order non-adiabatic population loss: the bright mode
            // follows theta_dot with amplitude 2 theta_dot / gamma_B, so the
            // dark population decays at 4 theta_dot^2 / gamma_B.
            let n = 512;
            let mut predicted = 0.0;
            for i in 0..n {
                let t0 = duration * i as f64 / n as f64;
                let t1 = duration * (i + 1) as f64 / n as f64;
                let gd = |t: f64| {
                    let theta = ep.ramp.theta(t);
                    let omega = args.gn / theta.tan().max(MIN_TAN_THETA);
                    let gb = eit_bright_params(&ep, omega)
                        .map(|b| b.gamma_b)
                        .unwrap_or(f64::NAN);
                    4.0 * ep.ramp.theta_dot(t).powi(2) / gb
                };
                predicted += 0.5 * (gd(t0) + gd(t1)) * (t1 - t0);
            }
            let opts = IntegratorOpts {
                rtol: 1e-8,
                atol: 1e-10,
                max_step: None,
            };
            match eit_simulate_transfer(&ep, Complex64::new(1.0, 0.0), &opts, false) {
                Ok((_, eff)) => format!(
                    "{},{},{},{},{},ok\r\n",
                    fmt12(duration),
                    fmt12(ratio),
                    fmt12(eff),
                    fmt12(predicted),
                    fmt12(bright_floor.omega_b),
                ),
                Err(e) => format!(
                    "{},{},,,{},\"{}\"\r\n",
                    fmt12(duration),
                    fmt12(ratio),
                    fmt12(bright_floor.omega_b),
                    format!("{e}").replace('"', "\"\""),
                ),
            }
        })
        .collect();

    let mut csv =
        String::from("T,theta_dot_over_gammaB,efficiency,predicted_loss,omega_B,status\r\n");
    for row in rows {
        csv.push_str(&row);
    }
    std::fs::write(&args.out, csv)?;
    Ok(())
}
