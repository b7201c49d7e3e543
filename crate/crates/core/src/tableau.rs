//! Coefficients of the 2-stage Radau IIA formula and of the AMF_q-Rad
//! iteration schemes built on top of it.
//!
//! All coefficients are evaluated from closed forms in `√6` at construction
//! time, never from decimal literals.

use std::fmt;

use crate::error::{AmfError, Result};

/// Row-major 2×2 real matrix.
pub type Mat2 = [[f64; 2]; 2];
/// Real 2-vector.
pub type Vec2 = [f64; 2];

pub(crate) const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub(crate) fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub(crate) fn mat_sub(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

pub(crate) fn mat_scale(a: &Mat2, k: f64) -> Mat2 {
    [[k * a[0][0], k * a[0][1]], [k * a[1][0], k * a[1][1]]]
}

pub(crate) fn mat_vec(a: &Mat2, v: &Vec2) -> Vec2 {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

pub(crate) fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub(crate) fn inverse(a: &Mat2) -> Option<Mat2> {
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]])
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// An s-stage implicit Runge-Kutta formula in the compact form
/// `Y = e⊗y_n + τ(A⊗I)F(Y)`, `y_{n+1} = ϖ y_n + (ŝᵀ⊗I) Y`.
///
/// Only `s = 2` is supported.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    a: Mat2,
    b: Vec2,
    c: Vec2,
    s_hat: Vec2,
    varpi: f64,
}

impl ButcherTableau {
    /// The 2-stage Radau IIA collocation formula (order 3, stage order 2).
    ///
    /// ```text
    /// 1/3 | 5/12  -1/12
    ///  1  | 3/4    1/4
    /// ----+------------
    ///     | 3/4    1/4
    /// ```
    pub fn radau2a() -> Self {
        let a = [[5.0 / 12.0, -1.0 / 12.0], [3.0 / 4.0, 1.0 / 4.0]];
        let b = [3.0 / 4.0, 1.0 / 4.0];
        Self::from_coefficients(a, b).expect("Radau IIA coefficient matrix is nonsingular")
    }

    /// Builds a tableau from `A` and `b`, deriving `c = A e`, `ŝᵀ = bᵀA⁻¹` and
    /// `ϖ = 1 − ŝᵀe`.
    pub fn from_coefficients(a: Mat2, b: Vec2) -> Result<Self> {
        let a_inv = inverse(&a)
            .ok_or_else(|| AmfError::Singular("Runge-Kutta matrix A is singular".into()))?;
        let c = mat_vec(&a, &[1.0, 1.0]);
        let s_hat = [
            b[0] * a_inv[0][0] + b[1] * a_inv[1][0],
            b[0] * a_inv[0][1] + b[1] * a_inv[1][1],
        ];
        let varpi = 1.0 - (s_hat[0] + s_hat[1]);
        Ok(Self {
            a,
            b,
            c,
            s_hat,
            varpi,
        })
    }

    pub fn stages(&self) -> usize {
        2
    }

    pub fn a(&self) -> &Mat2 {
        &self.a
    }

    pub fn b(&self) -> &Vec2 {
        &self.b
    }

    pub fn c(&self) -> &Vec2 {
        &self.c
    }

    /// `ŝᵀ = bᵀA⁻¹`.
    pub fn s_hat(&self) -> &Vec2 {
        &self.s_hat
    }

    /// `ϖ = 1 − ŝᵀe`.
    pub fn varpi(&self) -> f64 {
        self.varpi
    }
}

/// Shorthand for [`ButcherTableau::radau2a`].
pub fn radau2a_tableau() -> ButcherTableau {
    ButcherTableau::radau2a()
}

/// Which built-in AMF_q-Rad family a scheme belongs to. Determines the order
/// conditions checked by [`verify_scheme_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Amf1,
    Amf2,
    Amf3,
}

impl SchemeKind {
    pub fn from_q(q: usize) -> Result<Self> {
        match q {
            1 => Ok(Self::Amf1),
            2 => Ok(Self::Amf2),
            3 => Ok(Self::Amf3),
            other => Err(AmfError::InvalidIterationCount(other)),
        }
    }

    /// Nominal number of iterations.
    pub fn q(self) -> usize {
        match self {
            Self::Amf1 => 1,
            Self::Amf2 => 2,
            Self::Amf3 => 3,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AMF{}-Rad", self.q())
    }
}

/// One splitting iteration: `S = [[1, s], [0, 1]]`, `L = [[0, 0], [l, 0]]`
/// and `T = γ S (I − L)⁻¹ S⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmfIteration {
    pub s_param: f64,
    pub l_param: f64,
    pub s: Mat2,
    pub l: Mat2,
    pub t: Mat2,
}

impl AmfIteration {
    fn new(s_param: f64, l_param: f64, gamma: f64) -> Self {
        let sl = s_param * l_param;
        // Expanded form of γ S (I − L)⁻¹ S⁻¹.
        let t = [
            [gamma * (1.0 + sl), -gamma * s_param * s_param * l_param],
            [gamma * l_param, gamma * (1.0 - sl)],
        ];
        Self {
            s_param,
            l_param,
            s: [[1.0, s_param], [0.0, 1.0]],
            l: [[0.0, 0.0], [l_param, 0.0]],
            t,
        }
    }
}

/// An AMF_q iteration scheme: `q` triples `(S_ν, L_ν, T_ν)` sharing the
/// eigenvalue `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmfScheme {
    kind: SchemeKind,
    gamma: f64,
    iters: Vec<AmfIteration>,
}

/// `γ = √det(A) = 1/√6` for the 2-stage Radau IIA matrix.
pub fn radau_gamma() -> f64 {
    1.0 / 6f64.sqrt()
}

fn amf1_parameters() -> (f64, f64) {
    let r6 = 6f64.sqrt();
    (-(3.0 + 2.0 * r6) / 9.0, 0.75 * (-12.0 + 5.0 * r6))
}

fn amf3_parameters() -> (f64, f64) {
    let r6 = 6f64.sqrt();
    ((5.0 - 2.0 * r6) / 9.0, 3.0 * r6 / 4.0)
}

impl AmfScheme {
    /// One iteration, order two.
    pub fn amf1() -> Self {
        Self::from_parameters(SchemeKind::Amf1, radau_gamma(), &[amf1_parameters()])
            .expect("built-in parameters are valid")
    }

    /// Two iterations, order three.
    pub fn amf2() -> Self {
        Self::from_parameters(
            SchemeKind::Amf2,
            radau_gamma(),
            &[amf1_parameters(), amf3_parameters()],
        )
        .expect("built-in parameters are valid")
    }

    /// Three identical iterations.
    pub fn amf3() -> Self {
        let p = amf3_parameters();
        Self::from_parameters(SchemeKind::Amf3, radau_gamma(), &[p, p, p])
            .expect("built-in parameters are valid")
    }

    pub fn from_kind(kind: SchemeKind) -> Self {
        match kind {
            SchemeKind::Amf1 => Self::amf1(),
            SchemeKind::Amf2 => Self::amf2(),
            SchemeKind::Amf3 => Self::amf3(),
        }
    }

    /// Builds a scheme from explicit `(s_ν, l_ν)` pairs.
    pub fn from_parameters(kind: SchemeKind, gamma: f64, params: &[(f64, f64)]) -> Result<Self> {
        if params.is_empty() {
            return Err(AmfError::InvalidIterationCount(0));
        }
        if !(gamma > 0.0) {
            return Err(AmfError::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        let iters = params
            .iter()
            .map(|&(s, l)| AmfIteration::new(s, l, gamma))
            .collect();
        Ok(Self { kind, gamma, iters })
    }

    /// Returns a copy extended to `total` iterations by repeating the last
    /// `(S, L, T)` triple.
    ///
    /// This is a test facility: driving the iteration to its fixed point
    /// recovers the underlying Runge-Kutta solution. Production runs use
    /// exactly `q` iterations.
    pub fn with_repeated_last(&self, total: usize) -> Self {
        let mut iters = self.iters.clone();
        let last = iters.last().cloned().expect("schemes are never empty");
        while iters.len() < total {
            iters.push(last.clone());
        }
        Self {
            kind: self.kind,
            gamma: self.gamma,
            iters,
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn q(&self) -> usize {
        self.iters.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn iterations(&self) -> &[AmfIteration] {
        &self.iters
    }
}

/// Returns the built-in AMF_q-Rad scheme for `q ∈ {1, 2, 3}`.
pub fn amf_scheme(q: usize) -> Result<AmfScheme> {
    SchemeKind::from_q(q).map(AmfScheme::from_kind)
}

/// Named residuals of the algebraic conditions a scheme is built to satisfy.
/// Thresholds are left to the caller.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionReport {
    entries: Vec<(String, f64)>,
}

impl ConditionReport {
    fn push(&mut self, name: impl Into<String>, residual: f64) {
        self.entries.push((name.into(), residual));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, r)| r)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(n, r)| (n.as_str(), *r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest residual in the report (0 for an empty report, NaN-propagating).
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().fold(0.0, |m: f64, &(_, r)| {
            if r.is_nan() || m.is_nan() {
                f64::NAN
            } else {
                m.max(r)
            }
        })
    }
}

/// `(A − T) c`, max-norm.
fn first_iteration_residual(tab: &ButcherTableau, t: &Mat2) -> f64 {
    max_abs(mat_vec(&mat_sub(tab.a(), t), tab.c()))
}

/// `e₂ᵀ T⁻¹ (A − T)`, max-norm.
fn stiff_accuracy_residual(tab: &ButcherTableau, t: &Mat2) -> f64 {
    match inverse(t) {
        Some(t_inv) => {
            let m = mat_mul(&t_inv, &mat_sub(tab.a(), t));
            max_abs(m[1])
        }
        None => f64::INFINITY,
    }
}

/// Evaluates the tableau identities and the defining conditions of the
/// scheme's iterations.
///
/// Residual names:
/// * `tableau: ...` identities of the underlying formula;
/// * `iter ν: T factorization` compares the stored `T_ν` against
///   `γ S_ν (I − L_ν)⁻¹ S_ν⁻¹` assembled by generic 2×2 algebra;
/// * `iter ν: eigenvalue` checks the characteristic polynomial `(λ − γ)²`;
/// * `iter ν: (A-T)c` and `iter ν: e2^T T^-1 (A-T)` are the order conditions.
pub fn verify_scheme_conditions(scheme: &AmfScheme, tab: &ButcherTableau) -> ConditionReport {
    let mut report = ConditionReport::default();
    let (a, b, c) = (tab.a(), tab.b(), tab.c());

    let ae = mat_vec(a, &[1.0, 1.0]);
    report.push("tableau: c - A e", max_abs([c[0] - ae[0], c[1] - ae[1]]));
    let ac = mat_vec(a, c);
    report.push(
        "tableau: A c - c^2/2",
        max_abs([ac[0] - c[0] * c[0] / 2.0, ac[1] - c[1] * c[1] / 2.0]),
    );
    report.push(
        "tableau: b^T c - 1/2",
        (b[0] * c[0] + b[1] * c[1] - 0.5).abs(),
    );
    let s_hat = tab.s_hat();
    report.push(
        "tableau: s_hat^T A - b^T",
        max_abs([
            s_hat[0] * a[0][0] + s_hat[1] * a[1][0] - b[0],
            s_hat[0] * a[0][1] + s_hat[1] * a[1][1] - b[1],
        ]),
    );
    report.push(
        "tableau: s_hat - e2",
        max_abs([s_hat[0], s_hat[1] - 1.0]),
    );
    report.push("tableau: varpi", tab.varpi().abs());

    let gamma = scheme.gamma();
    for (idx, it) in scheme.iterations().iter().enumerate() {
        let nu = idx + 1;
        let factored = inverse(&it.s)
            .and_then(|s_inv| {
                inverse(&mat_sub(&IDENTITY, &it.l))
                    .map(|il_inv| mat_scale(&mat_mul(&mat_mul(&it.s, &il_inv), &s_inv), gamma))
            })
            .map(|m| max_abs(mat_sub(&it.t, &m).into_iter().flatten()))
            .unwrap_or(f64::INFINITY);
        report.push(format!("iter {nu}: T factorization"), factored);

        let trace = it.t[0][0] + it.t[1][1];
        report.push(
            format!("iter {nu}: eigenvalue"),
            max_abs([trace - 2.0 * gamma, det(&it.t) - gamma * gamma]),
        );

        let first_kind = match scheme.kind() {
            SchemeKind::Amf1 => true,
            SchemeKind::Amf2 => nu == 1,
            SchemeKind::Amf3 => false,
        };
        if first_kind {
            report.push(
                format!("iter {nu}: (A-T)c"),
                first_iteration_residual(tab, &it.t),
            );
        } else {
            report.push(
                format!("iter {nu}: e2^T T^-1 (A-T)"),
                stiff_accuracy_residual(tab, &it.t),
            );
        }
    }
    report
}
