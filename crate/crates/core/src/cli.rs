//! The `amf` command-line front end.
//!
//! Exit status: 0 on success, 1 for numerical failures (singular factors,
//! guard violations, violated scheme conditions), 2 for usage errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::AmfError;
use crate::harness::{render_table, run_convergence, level_error, weighted_norm, StepRule, StudyConfig, TableFormat};
use crate::integrator::integrate;
use crate::problems::{build_problem, DEFAULT_EPSILON, DEFAULT_T_END};
use crate::stability::{scan_samples_csv, wedge_stability_scan, ScanConfig};
use crate::tableau::{radau2a_tableau, verify_scheme_conditions, AmfScheme, SchemeKind};

/// Residual threshold used by `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-12;
/// Tolerance on `max |R_q| − 1` used when `stability` reports a verdict.
pub const STABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "amf", about = "AMF_q-Rad splitting integrators: convergence studies, stability scans and scheme checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Amf1,
    Amf2,
    Amf3,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Amf1 => SchemeKind::Amf1,
            SchemeArg::Amf2 => SchemeKind::Amf2,
            SchemeArg::Amf3 => SchemeKind::Amf3,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a convergence study with τ = r·h on a sequence of grids.
    Converge {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        dim: u8,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Comma-separated cell counts, e.g. 24,48,96.
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<usize>,
        /// τ/h; defaults to the scheme's iteration count.
        #[arg(long)]
        tau_ratio: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_T_END)]
        t_end: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one problem on one grid and report the final global error.
    Integrate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        dim: u8,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long)]
        n: usize,
        /// τ/h; defaults to the scheme's iteration count.
        #[arg(long)]
        tau_ratio: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_T_END)]
        t_end: f64,
    },
    /// Scan |R_q| over the A(θ) wedge for a d-splitting.
    Stability {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
        d: u8,
        /// Wedge half-angle in radians.
        #[arg(long)]
        theta: f64,
        /// Number of log-spaced radii in [1e-3, 1e6].
        #[arg(long, default_value_t = 40)]
        radii: usize,
        /// Also write every sample as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the residuals of the scheme's defining conditions.
    Verify {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numerical(String),
}

impl From<AmfError> for CliError {
    fn from(e: AmfError) -> Self {
        match e {
            AmfError::InvalidIterationCount(_)
            | AmfError::InvalidGrid(_)
            | AmfError::NonPositiveDiffusion { .. }
            | AmfError::NonIntegerStepCount { .. }
            | AmfError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o error: {e}"))
    }
}

/// Parses a flat `key = value` file (blank lines and `#` comments ignored).
fn read_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Usage(format!("malformed config line: {l}")))
        })
        .collect()
}

/// Removes `--config PATH` from `args` and appends the file's entries as
/// flags, unless the same flag was given explicitly.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut out = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a path".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            out.push(arg);
        }
    }
    if let Some(path) = config {
        for (key, value) in read_config(&path)? {
            let flag = format!("--{key}");
            let given = out
                .iter()
                .any(|a| a == &flag || a.starts_with(&format!("{flag}=")));
            if !given {
                out.push(flag);
                out.push(value);
            }
        }
    }
    Ok(out)
}

/// Runs the CLI with `args` (including the program name), writing normal
/// output to `stdout` and diagnostics to `stderr`. Returns the exit status.
pub fn run(args: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report(e, stderr),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => report(e, stderr),
    }
}

fn report(e: CliError, stderr: &mut dyn Write) -> i32 {
    match e {
        CliError::Usage(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        CliError::Numerical(msg) => {
            let _ = writeln!(stderr, "numerical failure: {msg}");
            1
        }
    }
}

fn step_rule(tau_ratio: Option<f64>) -> StepRule {
    tau_ratio.map_or(StepRule::SchemeRatio, StepRule::Ratio)
}

fn execute(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Converge {
            dim,
            beta,
            eps,
            scheme,
            grids,
            tau_ratio,
            t_end,
            format,
            out,
        } => {
            let cfg = StudyConfig {
                dim: dim as usize,
                beta,
                epsilon: eps,
                scheme: scheme.into(),
                grid_ns: grids,
                step_rule: step_rule(tau_ratio),
                t_end,
            };
            let rows = run_convergence(&cfg)?;
            let format = match format {
                FormatArg::Csv => TableFormat::Csv,
                FormatArg::Md => TableFormat::Markdown,
            };
            let table = render_table(&rows, format);
            match out {
                Some(path) => {
                    fs::write(&path, &table)?;
                    writeln!(stderr, "wrote {}", path.display())?;
                }
                None => write!(stdout, "{table}")?,
            }
            Ok(0)
        }
        Command::Integrate {
            dim,
            beta,
            eps,
            scheme,
            n,
            tau_ratio,
            t_end,
        } => {
            let kind: SchemeKind = scheme.into();
            let tau = tau_ratio.unwrap_or(kind.q() as f64) / n as f64;
            let cfg = StudyConfig {
                dim: dim as usize,
                beta,
                epsilon: eps,
                scheme: kind,
                grid_ns: vec![n],
                step_rule: StepRule::Explicit(vec![tau]),
                t_end,
            };
            cfg.validate()?;
            let eps2 = if t_end == 0.0 {
                let problem = build_problem(cfg.dim, n, beta, eps)?;
                let rec = integrate(&problem, &AmfScheme::from_kind(kind), &radau2a_tableau(), tau, 0.0)?;
                let exact = problem.exact_solution_on_grid(0.0);
                let diff: Vec<f64> = exact.iter().zip(&rec.y).map(|(u, y)| u - y).collect();
                weighted_norm(&diff, problem.grid())
            } else {
                level_error(&cfg, n, tau)?
            };
            writeln!(stdout, "scheme: {kind}")?;
            writeln!(stdout, "h: 1/{n}")?;
            writeln!(stdout, "tau: {tau:e}")?;
            writeln!(stdout, "eps2: {eps2:.6e}")?;
            writeln!(stdout, "delta2: {:.4}", -eps2.log10())?;
            Ok(0)
        }
        Command::Stability {
            scheme,
            d,
            theta,
            radii,
            csv,
        } => {
            let kind: SchemeKind = scheme.into();
            let scheme = AmfScheme::from_kind(kind);
            let tab = radau2a_tableau();
            let config = ScanConfig::log_spaced(radii);
            let report = wedge_stability_scan(&scheme, &tab, d as usize, theta, &config)?;
            writeln!(stdout, "scheme: {kind}")?;
            writeln!(stdout, "d: {d}")?;
            writeln!(stdout, "theta: {theta}")?;
            writeln!(stdout, "samples: {} (excluded: {})", report.samples, report.excluded)?;
            writeln!(stdout, "max |R|: {:.15e}", report.max_modulus)?;
            writeln!(
                stdout,
                "stable within 1+{STABILITY_TOLERANCE:e}: {}",
                if report.is_stable(STABILITY_TOLERANCE) { "yes" } else { "no" }
            )?;
            writeln!(stdout, "per-ray maxima:")?;
            for (rays, max) in &report.per_ray {
                writeln!(stdout, "  {rays}: {max:.15e}")?;
            }
            if let Some(path) = csv {
                fs::write(&path, scan_samples_csv(&scheme, &tab, d as usize, theta, &config)?)?;
                writeln!(stderr, "wrote {}", path.display())?;
            }
            Ok(0)
        }
        Command::Verify { scheme } => {
            let kind: SchemeKind = scheme.into();
            let report = verify_scheme_conditions(&AmfScheme::from_kind(kind), &radau2a_tableau());
            writeln!(stdout, "scheme: {kind}")?;
            for (name, r) in report.iter() {
                writeln!(stdout, "{name}: {r:.3e}")?;
            }
            let max = report.max_residual();
            writeln!(stdout, "max residual: {max:.3e}")?;
            if max > VERIFY_TOLERANCE || max.is_nan() {
                writeln!(stderr, "residual exceeds {VERIFY_TOLERANCE:e}")?;
                return Ok(1);
            }
            Ok(0)
        }
    }
}
