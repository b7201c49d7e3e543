//! The AMF_q-RK one-step map for semilinear systems `y' = J y + g(t)`, a dense
//! exact-IRK reference step and a fixed-step driver.
//!
//! One step with the 2-stage scheme:
//!
//! ```text
//! Y⁰ = e⊗y_n
//! for ν = 1..q:
//!     D  = e⊗y_n − Y^{ν−1} + τ(A⊗I)F(Y^{ν−1})
//!     r  = ((I − L_ν)S_ν⁻¹ ⊗ I) D
//!     Π_d E₁ = r₁
//!     Π_d E₂ = r₂ + l_ν E₁
//!     Y^ν = Y^{ν−1} + (S_ν⊗I) E
//! y_{n+1} = ϖ y_n + (ŝᵀ⊗I) Y^q
//! ```
//!
//! with `Π_d = Π_j (I − γτ J_j)` and `F(Y)_i = J Y_i + g(t_n + c_i τ)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{AmfError, Result};
use crate::splitops::{dense, PiFactors, SplitOperator};
use crate::tableau::{inverse, mat_mul, mat_sub, AmfScheme, ButcherTableau, Mat2, IDENTITY};

/// Largest stage system (`s·m` unknowns) the dense reference step will build.
pub const DENSE_STAGE_LIMIT: usize = 1024;

/// A semilinear ODE system `y' = J y + g(t)` with a directional splitting of
/// `J` and a known initial state.
pub trait SemilinearSystem: Sync {
    fn operator(&self) -> &SplitOperator;

    /// Writes `g(t)` into `out`.
    fn forcing_into(&self, t: f64, out: &mut [f64]);

    fn initial_state(&self) -> Vec<f64>;

    fn len(&self) -> usize {
        self.operator().len()
    }
}

type ForcingFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// A split linear system with an arbitrary (possibly zero) forcing closure.
pub struct LinearSystem {
    op: SplitOperator,
    initial: Vec<f64>,
    forcing: Option<Box<ForcingFn>>,
}

impl LinearSystem {
    /// `y' = J y` with `y(0) = initial`.
    pub fn homogeneous(op: SplitOperator, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != op.len() {
            return Err(AmfError::DimensionMismatch {
                expected: op.len(),
                found: initial.len(),
            });
        }
        Ok(Self {
            op,
            initial,
            forcing: None,
        })
    }

    /// Scalar test equation `y' = λ y`, `y(0) = y0`.
    pub fn scalar(lambda: f64, y0: f64) -> Self {
        Self {
            op: SplitOperator::scalar(lambda),
            initial: vec![y0],
            forcing: None,
        }
    }

    pub fn with_forcing(mut self, forcing: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.forcing = Some(Box::new(forcing));
        self
    }
}

impl SemilinearSystem for LinearSystem {
    fn operator(&self) -> &SplitOperator {
        &self.op
    }

    fn forcing_into(&self, t: f64, out: &mut [f64]) {
        match &self.forcing {
            Some(f) => f(t, out),
            None => out.fill(0.0),
        }
    }

    fn initial_state(&self) -> Vec<f64> {
        self.initial.clone()
    }
}

/// The stage vectors `(Y_1, …, Y_s)` of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StageBlock {
    pub stages: Vec<Vec<f64>>,
}

impl StageBlock {
    /// The predictor `e⊗y`.
    pub fn replicate(y: &[f64], s: usize) -> Self {
        Self {
            stages: vec![y.to_vec(); s],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.stages
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Final state of a fixed-step integration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t_n: f64,
    pub y: Vec<f64>,
    pub steps: usize,
    pub iterations_applied: usize,
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(AmfError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(AmfError::InvalidParameter(format!(
            "step size must be positive, got {tau}"
        )));
    }
    Ok(())
}

/// Stage residual `D = e⊗y_n − Y + τ(A⊗I)F(Y)`.
pub fn residual<P: SemilinearSystem + ?Sized>(
    problem: &P,
    tab: &ButcherTableau,
    t_n: f64,
    tau: f64,
    y_n: &[f64],
    stages: &StageBlock,
) -> Result<StageBlock> {
    check_tau(tau)?;
    let m = problem.len();
    check_len(m, y_n.len())?;
    check_len(tab.stages(), stages.stages.len())?;
    for y in &stages.stages {
        check_len(m, y.len())?;
    }
    let op = problem.operator();
    let mut f = vec![vec![0.0; m]; 2];
    let mut g = vec![0.0; m];
    for i in 0..2 {
        op.apply_full_into(&stages.stages[i], &mut f[i])?;
        problem.forcing_into(t_n + tab.c()[i] * tau, &mut g);
        for (fi, gi) in f[i].iter_mut().zip(&g) {
            *fi += gi;
        }
    }
    let a = tab.a();
    let stages = (0..2)
        .map(|i| {
            (0..m)
                .map(|k| {
                    y_n[k] - stages.stages[i][k] + tau * (a[i][0] * f[0][k] + a[i][1] * f[1][k])
                })
                .collect()
        })
        .collect();
    Ok(StageBlock { stages })
}

/// Per-iteration matrices used by the step, derived once from the scheme.
#[derive(Debug, Clone)]
struct IterationData {
    /// `(I − L) S⁻¹`.
    rhs_map: Mat2,
    /// Sub-diagonal entry of the strictly lower triangular `L`.
    coupling: f64,
    s: Mat2,
}

/// Reusable AMF integrator for a fixed operator, scheme and step size. The
/// factor data of `I − γτ J_j` is computed once at construction.
pub struct AmfStepper {
    tableau: ButcherTableau,
    tau: f64,
    iters: Vec<IterationData>,
    factors: PiFactors,
    g: [Vec<f64>; 2],
    f: [Vec<f64>; 2],
    y: [Vec<f64>; 2],
    e: [Vec<f64>; 2],
}

impl AmfStepper {
    pub fn new(op: &SplitOperator, scheme: &AmfScheme, tab: &ButcherTableau, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        let iters = scheme
            .iterations()
            .iter()
            .map(|it| {
                let s_inv = inverse(&it.s)
                    .ok_or_else(|| AmfError::Singular("iteration matrix S is singular".into()))?;
                Ok(IterationData {
                    rhs_map: mat_mul(&mat_sub(&IDENTITY, &it.l), &s_inv),
                    coupling: it.l[1][0],
                    s: it.s,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let factors = op.factorize(scheme.gamma() * tau)?;
        let m = op.len();
        let buf = || [vec![0.0; m], vec![0.0; m]];
        Ok(Self {
            tableau: tab.clone(),
            tau,
            iters,
            factors,
            g: buf(),
            f: buf(),
            y: buf(),
            e: buf(),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn iterations(&self) -> usize {
        self.iters.len()
    }

    /// Advances `y_n` at time `t_n` by one step, writing `y_{n+1}` into `out`.
    pub fn step_into<P: SemilinearSystem + ?Sized>(
        &mut self,
        problem: &P,
        t_n: f64,
        y_n: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let op = problem.operator();
        let m = op.len();
        check_len(self.g[0].len(), m)?;
        check_len(m, y_n.len())?;
        check_len(m, out.len())?;
        let tau = self.tau;
        let a = *self.tableau.a();
        let c = *self.tableau.c();

        for i in 0..2 {
            problem.forcing_into(t_n + c[i] * tau, &mut self.g[i]);
            self.y[i].copy_from_slice(y_n);
        }

        for it in &self.iters {
            for i in 0..2 {
                op.apply_full_into(&self.y[i], &mut self.f[i])?;
                for (fk, gk) in self.f[i].iter_mut().zip(&self.g[i]) {
                    *fk += gk;
                }
            }
            // Residual D, mapped through (I − L)S⁻¹, lands in e[0], e[1].
            let r = &it.rhs_map;
            {
                let [e0, e1] = &mut self.e;
                for k in 0..m {
                    let d0 = y_n[k] - self.y[0][k] + tau * (a[0][0] * self.f[0][k] + a[0][1] * self.f[1][k]);
                    let d1 = y_n[k] - self.y[1][k] + tau * (a[1][0] * self.f[0][k] + a[1][1] * self.f[1][k]);
                    e0[k] = r[0][0] * d0 + r[0][1] * d1;
                    e1[k] = r[1][0] * d0 + r[1][1] * d1;
                }
            }
            // Forward substitution over stages (L is strictly lower triangular).
            self.factors.solve_in_place(&mut self.e[0])?;
            if it.coupling != 0.0 {
                let [e0, e1] = &mut self.e;
                for (x, y) in e1.iter_mut().zip(e0.iter()) {
                    *x += it.coupling * y;
                }
            }
            self.factors.solve_in_place(&mut self.e[1])?;
            let s = &it.s;
            for k in 0..m {
                let (e0, e1) = (self.e[0][k], self.e[1][k]);
                self.y[0][k] += s[0][0] * e0 + s[0][1] * e1;
                self.y[1][k] += s[1][0] * e0 + s[1][1] * e1;
            }
        }

        let s_hat = self.tableau.s_hat();
        let varpi = self.tableau.varpi();
        for k in 0..m {
            out[k] = varpi * y_n[k] + s_hat[0] * self.y[0][k] + s_hat[1] * self.y[1][k];
        }
        Ok(())
    }

    /// Stage vectors `Y^q` left by the most recent step.
    pub fn last_stages(&self) -> StageBlock {
        StageBlock {
            stages: self.y.to_vec(),
        }
    }
}

/// One AMF_q-RK step from `(t_n, y_n)`.
pub fn amf_step<P: SemilinearSystem + ?Sized>(
    problem: &P,
    scheme: &AmfScheme,
    tab: &ButcherTableau,
    t_n: f64,
    tau: f64,
    y_n: &[f64],
) -> Result<Vec<f64>> {
    let mut stepper = AmfStepper::new(problem.operator(), scheme, tab, tau)?;
    let mut out = vec![0.0; y_n.len()];
    stepper.step_into(problem, t_n, y_n, &mut out)?;
    Ok(out)
}

/// Solves the linear stage equations `(I − τA⊗J) Y = e⊗y_n + τ(A⊗I)G` exactly
/// with a dense LU factorization.
pub fn irk_reference_stages<P: SemilinearSystem + ?Sized>(
    problem: &P,
    tab: &ButcherTableau,
    t_n: f64,
    tau: f64,
    y_n: &[f64],
) -> Result<StageBlock> {
    check_tau(tau)?;
    let m = problem.len();
    check_len(m, y_n.len())?;
    if 2 * m > DENSE_STAGE_LIMIT {
        return Err(AmfError::SizeGuard(format!(
            "dense stage system has {} unknowns, limit is {DENSE_STAGE_LIMIT}",
            2 * m
        )));
    }
    let j = dense::assemble_full(problem.operator())?;
    let a = tab.a();
    let mut system = DMatrix::<f64>::identity(2 * m, 2 * m);
    for bi in 0..2 {
        for bj in 0..2 {
            let mut block = system.view_mut((bi * m, bj * m), (m, m));
            block -= &j * (tau * a[bi][bj]);
        }
    }
    let mut g = [vec![0.0; m], vec![0.0; m]];
    for (i, gi) in g.iter_mut().enumerate() {
        problem.forcing_into(t_n + tab.c()[i] * tau, gi);
    }
    let rhs = DVector::from_fn(2 * m, |row, _| {
        let (i, k) = (row / m, row % m);
        y_n[k] + tau * (a[i][0] * g[0][k] + a[i][1] * g[1][k])
    });
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| AmfError::Singular("dense stage system".into()))?;
    Ok(StageBlock {
        stages: (0..2)
            .map(|i| solution.rows(i * m, m).iter().copied().collect())
            .collect(),
    })
}

/// One step of the underlying Runge-Kutta method with exactly solved stages.
pub fn irk_reference_step<P: SemilinearSystem + ?Sized>(
    problem: &P,
    tab: &ButcherTableau,
    t_n: f64,
    tau: f64,
    y_n: &[f64],
) -> Result<Vec<f64>> {
    let stages = irk_reference_stages(problem, tab, t_n, tau, y_n)?;
    let s_hat = tab.s_hat();
    Ok((0..y_n.len())
        .map(|k| tab.varpi() * y_n[k] + s_hat[0] * stages.stages[0][k] + s_hat[1] * stages.stages[1][k])
        .collect())
}

/// Number of steps of size `tau` covering `[0, t_end]`; `t_end/τ` must be an
/// integer.
pub fn step_count(t_end: f64, tau: f64) -> Result<usize> {
    check_tau(tau)?;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(AmfError::InvalidParameter(format!(
            "end time must be nonnegative, got {t_end}"
        )));
    }
    let ratio = t_end / tau;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > 1e-12 * rounded.max(1.0) {
        return Err(AmfError::NonIntegerStepCount { t_end, tau });
    }
    Ok(rounded as usize)
}

/// Integrates from `t = 0` with the problem's initial state to `t_end` using
/// `t_end/τ` fixed steps.
pub fn integrate<P: SemilinearSystem + ?Sized>(
    problem: &P,
    scheme: &AmfScheme,
    tab: &ButcherTableau,
    tau: f64,
    t_end: f64,
) -> Result<StepRecord> {
    let steps = step_count(t_end, tau)?;
    let mut y = problem.initial_state();
    check_len(problem.len(), y.len())?;
    if steps == 0 {
        return Ok(StepRecord {
            t_n: 0.0,
            y,
            steps,
            iterations_applied: 0,
        });
    }
    let mut stepper = AmfStepper::new(problem.operator(), scheme, tab, tau)?;
    let mut next = vec![0.0; y.len()];
    for n in 0..steps {
        stepper.step_into(problem, n as f64 * tau, &y, &mut next)?;
        std::mem::swap(&mut y, &mut next);
    }
    Ok(StepRecord {
        t_n: steps as f64 * tau,
        y,
        steps,
        iterations_applied: steps * scheme.q(),
    })
}
