//! `toda-spectrum`: command-line front end for the toda-spectrum library.
//!
//! Exit status: 0 on success, 2 for invalid input, 3 for numerical failure,
//! 4 when the invariant suite run by `verify` reports a failed check.

mod manifest;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use toda_spectrum::config::Tolerances;
use toda_spectrum::curve::Curve;
use toda_spectrum::error::{Error, Result};
use toda_spectrum::finitegap::{DivisorInput, FiniteGap};
use toda_spectrum::io::{read_coefficients, read_curve, read_divisor, write_arcs_csv, write_coefficients, CurveDocument, DivisorDocument, PeriodsDocument};
use toda_spectrum::periods::PeriodData;
use toda_spectrum::spectrum::{analyze, finite_section, lyapunov, TraceConfig};
use toda_spectrum::toda::CoefficientWindow;
use toda_spectrum::C64;

use manifest::{csv_comment, Run, RunConfig};

#[derive(Parser)]
#[command(name = "toda-spectrum", version, about = "Finite-gap Toda coefficients and arc spectra of Jacobi operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a curve document and echo it with its cut system.
    Curve {
        /// Curve document (alternative to --curve).
        path: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compute periods, tau, the Riemann constants and the certificate.
    Periods {
        #[command(flatten)]
        common: Common,
    },
    /// Coefficient windows.
    Coeffs {
        #[command(subcommand)]
        action: CoeffsAction,
    },
    /// Spectral arcs.
    Spectrum {
        #[command(subcommand)]
        action: SpectrumAction,
    },
    /// Run the invariant suite on a generated window.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Brute-force spectral oracles.
    Oracle {
        kind: OracleKind,
        /// Sweep grid `re0,re1,im0,im1,nx,ny` (Lyapunov only).
        #[arg(long)]
        grid: Option<String>,
        /// Coefficient CSV to use instead of generating one.
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Riemann theta diagnostics.
    Theta {
        #[command(subcommand)]
        action: ThetaAction,
    },
}

#[derive(Subcommand)]
enum CoeffsAction {
    /// Generate a(n), b(n) on n0 - window ..= n0 + window.
    Generate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum SpectrumAction {
    /// Trace the arcs where the spectral function h vanishes.
    Trace {
        /// Coefficient CSV to use instead of generating one.
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum ThetaAction {
    /// Evaluate theta(z | tau) for the curve's period matrix.
    Eval {
        /// Argument as `re,im;re,im;...`, one pair per component.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Lyapunov,
    FiniteSection,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Divisor document; a default divisor is used when absent.
    #[arg(long)]
    divisor: Option<PathBuf>,
    #[arg(long, default_value = "toda-out")]
    out: PathBuf,
    /// Half-width of generated coefficient windows.
    #[arg(long, default_value_t = 40)]
    window: i64,
    /// Number of sites averaged for the spectral means.
    #[arg(long, default_value_t = 100_000)]
    mean_window: i64,
    /// Arc step relative to the diameter of the branch points.
    #[arg(long, default_value_t = 2e-3)]
    step: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol_quad: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol_theta: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_alg: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_arc: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_mean: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let tolerances = Tolerances {
            tol_quad: self.tol_quad,
            tol_theta: self.tol_theta,
            tol_alg: self.tol_alg,
            tol_arc: self.tol_arc,
            tol_mean: self.tol_mean,
        };
        tolerances.validate()?;
        if self.window < 1 || self.mean_window < 2 {
            return Err(Error::InvalidConfig("--window must be >= 1 and --mean-window >= 2".into()));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidConfig("--step must be positive".into()));
        }
        Ok(RunConfig {
            tolerances,
            window: self.window,
            mean_window: self.mean_window,
            step: self.step,
            seed: self.seed,
        })
    }

    fn run(&self, command: &str) -> Result<Run> {
        Run::new(command, &self.out, self.config()?)
    }
}

enum Failure {
    Lib(Error),
    Suite,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn load_curve(run: &mut Run, path: Option<&Path>) -> Result<Curve> {
    let path = path.ok_or_else(|| Error::InvalidConfig("a curve document is required (--curve)".into()))?;
    read_curve(&run.read_input(path)?)
}

/// Everything needed to generate coefficients from a curve.
struct Pipeline {
    curve: Curve,
    data: PeriodData,
    fg: FiniteGap,
}

fn pipeline(run: &mut Run, common: &Common) -> Result<Pipeline> {
    let curve = load_curve(run, common.curve.as_deref())?;
    let divisor = match &common.divisor {
        Some(p) => read_divisor(&run.read_input(p)?)?,
        None => DivisorInput::default_for(&curve),
    };
    let tol = run.config().tolerances;
    let data = PeriodData::compute(&curve, tol.tol_quad)?;
    let fg = FiniteGap::new(&curve, &data, &divisor, &tol)?;
    Ok(Pipeline { curve, data, fg })
}

fn cmd_curve(path: Option<PathBuf>, common: &Common) -> Result<()> {
    let mut run = common.run("curve")?;
    let curve = load_curve(&mut run, path.as_deref().or(common.curve.as_deref()))?;
    #[derive(Serialize)]
    struct Echo {
        genus: usize,
        #[serde(flatten)]
        doc: CurveDocument,
    }
    run.write_json(
        "curve.json",
        &Echo {
            genus: curve.genus(),
            doc: CurveDocument::from_curve(&curve),
        },
    )?;
    run.finish()
}

fn cmd_periods(common: &Common) -> Result<()> {
    let mut run = common.run("periods")?;
    let curve = load_curve(&mut run, common.curve.as_deref())?;
    let data = PeriodData::compute(&curve, run.config().tolerances.tol_quad)?;
    run.write_json("periods.json", &PeriodsDocument::new(&curve, &data))?;
    run.finish()
}

fn cmd_coeffs(common: &Common) -> Result<()> {
    let mut run = common.run("coeffs generate")?;
    let p = pipeline(&mut run, common)?;
    let n0 = p.fg.divisor.n0;
    let w = p.fg.generate(n0 - common.window, n0 + common.window)?;
    let mut buf = Vec::new();
    write_coefficients(&mut buf, &w, Some(&csv_comment()))?;
    run.write_artifact("coeffs.csv", &buf)?;
    run.write_json("divisor.json", &DivisorDocument::from_input(&p.fg.divisor))?;
    run.finish()
}

/// Coefficients from a CSV file, or generated on `n0 - lo_extra ..= n0 + hi_extra`.
fn coefficients(run: &mut Run, common: &Common, coeffs: Option<&Path>, lo_extra: i64, hi_extra: i64) -> Result<(Curve, CoefficientWindow)> {
    match coeffs {
        Some(path) => {
            let curve = load_curve(run, common.curve.as_deref())?;
            let text = run.read_input(path)?;
            Ok((curve, read_coefficients(text.as_bytes())?))
        }
        None => {
            let p = pipeline(run, common)?;
            let n0 = p.fg.divisor.n0;
            let w = p.fg.generate(n0 - lo_extra, n0 + hi_extra)?;
            Ok((p.curve, w))
        }
    }
}

fn cmd_spectrum(coeffs: Option<&Path>, common: &Common) -> Result<()> {
    let mut run = common.run("spectrum trace")?;
    let half = common.mean_window / 2;
    let (curve, w) = coefficients(&mut run, common, coeffs, half, common.mean_window - half - 1)?;
    let cfg = TraceConfig {
        step: common.step,
        tol_arc: common.tol_arc,
        ..TraceConfig::default()
    };
    let an = analyze(&curve, &w, &run.config().tolerances, &cfg)?;
    run.write_json("spectrum.json", &an.result)?;
    let mut buf = Vec::new();
    write_arcs_csv(&mut buf, &an.result, Some(&csv_comment()))?;
    run.write_artifact("arcs.csv", &buf)?;
    #[derive(Serialize)]
    struct Means<'a> {
        means: &'a [C64],
        window_len: usize,
        error: f64,
    }
    run.write_json(
        "means.json",
        &Means {
            means: &an.mean.means,
            window_len: an.mean.window_len,
            error: an.mean.error,
        },
    )?;
    run.finish()
}

fn cmd_verify(common: &Common) -> std::result::Result<(), Failure> {
    let mut run = common.run("verify")?;
    let p = pipeline(&mut run, common)?;
    let n0 = p.fg.divisor.n0;
    let w = p.fg.generate(n0 - common.window, n0 + common.window - 1)?;
    let report = verify::run(&p.curve, &p.data, &w, &run.config().tolerances)?;
    for c in &report.checks {
        let rel = if c.bound == "above" { ">" } else { "<" };
        println!(
            "{} {}: {:.3e} (required {rel} {:.1e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.threshold
        );
    }
    run.write_json("verify.json", &report)?;
    run.finish()?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Suite)
    }
}

fn parse_grid(text: &str) -> Result<(f64, f64, f64, f64, usize, usize)> {
    let bad = || Error::InvalidConfig(format!("--grid expects re0,re1,im0,im1,nx,ny, got {text:?}"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(bad());
    }
    let f: Vec<f64> = parts[..4].iter().map(|s| s.parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let nx: usize = parts[4].parse().map_err(|_| bad())?;
    let ny: usize = parts[5].parse().map_err(|_| bad())?;
    if nx == 0 || ny == 0 || f.iter().any(|x| !x.is_finite()) {
        return Err(bad());
    }
    Ok((f[0], f[1], f[2], f[3], nx, ny))
}

fn grid_axis(lo: f64, hi: f64, n: usize, k: usize) -> f64 {
    if n == 1 {
        lo
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

fn cmd_oracle(kind: OracleKind, grid: Option<&str>, coeffs: Option<&Path>, common: &Common) -> Result<()> {
    let mut run = common.run(match kind {
        OracleKind::Lyapunov => "oracle lyapunov",
        OracleKind::FiniteSection => "oracle finite-section",
    })?;
    let grid = match (kind, grid) {
        (OracleKind::Lyapunov, None) => return Err(Error::InvalidConfig("oracle lyapunov needs --grid".into())),
        (_, g) => g.map(parse_grid).transpose()?,
    };
    let (_, w) = coefficients(&mut run, common, coeffs, common.window + 1, common.window + 1)?;
    let mut out = format!("# {}\n", csv_comment());
    match kind {
        OracleKind::Lyapunov => {
            let (re0, re1, im0, im1, nx, ny) = grid.expect("checked above");
            let steps = w.len() - 2;
            out.push_str("re,im,gamma\n");
            for j in 0..ny {
                for k in 0..nx {
                    let z = C64::new(grid_axis(re0, re1, nx, k), grid_axis(im0, im1, ny, j));
                    let g = lyapunov(&w, z, w.n_lo + 1, steps)?;
                    out.push_str(&format!("{},{},{}\n", z.re, z.im, g));
                }
            }
            run.write_artifact("lyapunov.csv", out.as_bytes())?;
        }
        OracleKind::FiniteSection => {
            let fs = finite_section(&w, w.len())?;
            out.push_str("re,im\n");
            for e in &fs.eigenvalues {
                out.push_str(&format!("{},{}\n", e[0], e[1]));
            }
            run.write_artifact("finite_section.csv", out.as_bytes())?;
        }
    }
    run.finish()
}

fn parse_point(text: &str) -> Result<Vec<C64>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let v: Vec<f64> = pair
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidConfig(format!("bad component {pair:?}")))?;
            match v.as_slice() {
                [re, im] => Ok(C64::new(*re, *im)),
                _ => Err(Error::InvalidConfig(format!("component {pair:?} must be re,im"))),
            }
        })
        .collect()
}

fn cmd_theta(z: &str, common: &Common) -> Result<()> {
    let mut run = common.run("theta eval")?;
    let curve = load_curve(&mut run, common.curve.as_deref())?;
    let tol = run.config().tolerances;
    let data = PeriodData::compute(&curve, tol.tol_quad)?;
    let ctx = data.theta_context(tol.tol_theta)?;
    let z = parse_point(z)?;
    if z.len() != curve.genus() {
        return Err(Error::InvalidConfig(format!(
            "theta argument has {} components, genus is {}",
            z.len(),
            curve.genus()
        )));
    }
    let t = ctx.eval(&z)?;
    #[derive(Serialize)]
    struct ThetaOut {
        z: Vec<C64>,
        ln_theta: C64,
        value: Option<C64>,
        divisor_ratio: f64,
        lattice_terms: usize,
    }
    let out = ThetaOut {
        z,
        ln_theta: t.ln(),
        value: t.value().ok(),
        divisor_ratio: t.divisor_ratio(),
        lattice_terms: ctx.lattice_size(),
    };
    println!("{}", serde_json::to_string(&out).map_err(|e| Error::Io(e.to_string()))?);
    run.write_json("theta.json", &out)?;
    run.finish()
}

fn dispatch(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Curve { path, common } => cmd_curve(path, &common)?,
        Command::Periods { common } => cmd_periods(&common)?,
        Command::Coeffs {
            action: CoeffsAction::Generate { common },
        } => cmd_coeffs(&common)?,
        Command::Spectrum {
            action: SpectrumAction::Trace { coeffs, common },
        } => cmd_spectrum(coeffs.as_deref(), &common)?,
        Command::Verify { common } => cmd_verify(&common)?,
        Command::Oracle { kind, grid, coeffs, common } => cmd_oracle(kind, grid.as_deref(), coeffs.as_deref(), &common)?,
        Command::Theta {
            action: ThetaAction::Eval { z, common },
        } => cmd_theta(&z, &common)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Suite) => {
            eprintln!("error: invariant suite reported failures");
            ExitCode::from(4)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
