//! Convergence studies on the manufactured-solution problems: global errors at
//! the end time in the weighted norm, significant digits and observed orders
//! under simultaneous halving of `h` and `τ`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{AmfError, Result};
use crate::integrator::{integrate, step_count};
use crate::problems::{build_problem, DEFAULT_EPSILON, DEFAULT_T_END};
use crate::splitops::GridSpec;
use crate::tableau::{radau2a_tableau, AmfScheme, SchemeKind};

/// `‖v‖_{2,h} = N^{−dim/2} ‖v‖₂`.
pub fn weighted_norm(v: &[f64], grid: &GridSpec) -> f64 {
    let sum: f64 = v.iter().map(|x| x * x).sum();
    sum.sqrt() * (grid.n_cells() as f64).powf(-(grid.dim() as f64) / 2.0)
}

/// How the step size is chosen for each grid level.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    /// `τ = q·h` with `q` the scheme's iteration count.
    SchemeRatio,
    /// `τ = r·h`.
    Ratio(f64),
    /// One explicit `τ` per grid level.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub dim: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub scheme: SchemeKind,
    pub grid_ns: Vec<usize>,
    pub step_rule: StepRule,
    pub t_end: f64,
}

impl StudyConfig {
    /// Reference setup: `ε = 0.1`, `t* = 1`, `τ = q·h`.
    pub fn new(dim: usize, beta: f64, scheme: SchemeKind, grid_ns: Vec<usize>) -> Self {
        Self {
            dim,
            beta,
            epsilon: DEFAULT_EPSILON,
            scheme,
            grid_ns,
            step_rule: StepRule::SchemeRatio,
            t_end: DEFAULT_T_END,
        }
    }

    /// Step size used on the grid with `n` cells at level `level`.
    pub fn tau_for(&self, level: usize, n: usize) -> Result<f64> {
        let h = 1.0 / n as f64;
        match &self.step_rule {
            StepRule::SchemeRatio => Ok(self.scheme.q() as f64 * h),
            StepRule::Ratio(r) => Ok(r * h),
            StepRule::Explicit(taus) => taus.get(level).copied().ok_or_else(|| {
                AmfError::InvalidParameter(format!("no step size given for grid level {level}"))
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_ns.is_empty() {
            return Err(AmfError::InvalidParameter("no grid levels given".into()));
        }
        if let StepRule::Explicit(taus) = &self.step_rule {
            if taus.len() != self.grid_ns.len() {
                return Err(AmfError::InvalidParameter(format!(
                    "{} step sizes given for {} grid levels",
                    taus.len(),
                    self.grid_ns.len()
                )));
            }
        }
        for (level, &n) in self.grid_ns.iter().enumerate() {
            if n < 3 {
                return Err(AmfError::InvalidGrid(format!("need N >= 3, got {n}")));
            }
            step_count(self.t_end, self.tau_for(level, n)?)?;
        }
        Ok(())
    }
}

/// One grid level of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_cells: usize,
    pub h: f64,
    pub tau: f64,
    /// `‖u_h(t*) − y(t*)‖_{2,h}`.
    pub eps2: f64,
    /// `−log₁₀ ε₂`.
    pub delta2: f64,
    /// `(δ₂(next) − δ₂) / log₁₀ 2`, present when the next level halves both
    /// `h` and `τ`.
    pub p: Option<f64>,
}

/// Global error of one level: integrate to `t_end` and compare with the
/// exact grid solution.
pub fn level_error(cfg: &StudyConfig, n: usize, tau: f64) -> Result<f64> {
    let problem = build_problem(cfg.dim, n, cfg.beta, cfg.epsilon)?;
    let scheme = AmfScheme::from_kind(cfg.scheme);
    let record = integrate(&problem, &scheme, &radau2a_tableau(), tau, cfg.t_end)?;
    let exact = problem.exact_solution_on_grid(record.t_n);
    let diff: Vec<f64> = exact.iter().zip(&record.y).map(|(u, y)| u - y).collect();
    Ok(weighted_norm(&diff, problem.grid()))
}

fn halves(coarse: (usize, f64), fine: (usize, f64)) -> bool {
    fine.0 == 2 * coarse.0 && (coarse.1 / fine.1 - 2.0).abs() <= 1e-12
}

/// Runs every grid level (in parallel) and assembles the table rows in
/// configuration order.
pub fn run_convergence(cfg: &StudyConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let levels: Vec<(usize, f64)> = cfg
        .grid_ns
        .iter()
        .enumerate()
        .map(|(level, &n)| Ok((n, cfg.tau_for(level, n)?)))
        .collect::<Result<_>>()?;
    let errors = levels
        .par_iter()
        .map(|&(n, tau)| level_error(cfg, n, tau))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let delta2: Vec<f64> = errors.iter().map(|e| -e.log10()).collect();
    Ok(levels
        .iter()
        .enumerate()
        .map(|(i, &(n, tau))| {
            let p = levels
                .get(i + 1)
                .filter(|&&next| halves((n, tau), next))
                .map(|_| (delta2[i + 1] - delta2[i]) / 2f64.log10());
            ConvergenceRow {
                n_cells: n,
                h: 1.0 / n as f64,
                tau,
                eps2: errors[i],
                delta2: delta2[i],
                p,
            }
        })
        .collect())
}

/// Output layout for [`render_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

/// Formats `x` with `digits` significant digits, choosing fixed or scientific
/// notation like C's `%g` (trailing zeros trimmed).
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", trim(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

/// Renders study rows as CSV (`h,tau,eps2,delta2,p`, six significant digits,
/// `p` empty where absent) or as a markdown table with `δ₂` to two decimals
/// and `p` in parentheses.
pub fn render_table(rows: &[ConvergenceRow], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("h,tau,eps2,delta2,p\n");
            for r in rows {
                let p = r.p.map(|p| format_significant(p, 6)).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    format_significant(r.h, 6),
                    format_significant(r.tau, 6),
                    format_significant(r.eps2, 6),
                    format_significant(r.delta2, 6),
                    p
                );
            }
        }
        TableFormat::Markdown => {
            out.push_str("| h | tau | eps2 | delta2 (p) |\n");
            out.push_str("|---|---|---|---|\n");
            for r in rows {
                let p = r.p.map(|p| format!("{p:.2}")).unwrap_or_else(|| "--".into());
                let _ = writeln!(
                    out,
                    "| 1/{} | {} | {:.3e} | {:.2} ({}) |",
                    r.n_cells,
                    format_significant(r.tau, 6),
                    r.eps2,
                    r.delta2,
                    p
                );
            }
        }
    }
    out
}
