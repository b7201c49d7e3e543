//! Linear stability of AMF_q-RK schemes under a d-splitting.
//!
//! For `y' = Σ_k J_k y` with commuting `J_k`, each eigen-direction reduces to
//! scalars `z_k = τλ_k`, combined into `z = Σ z_k` and
//! `w = γ⁻¹(1 − Π(1 − γ z_k))`. One step multiplies by
//!
//! ```text
//! R_q(z, w) = ϖ + ŝᵀ (Q_q + Σ_{j=q..1} (M_q ⋯ M_j) Q_{j−1}) e
//! Q_ν = (I − w T_ν)⁻¹,  M_ν = Q_ν (z A − w T_ν),  Q_0 = I.
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{AmfError, Result};
use crate::tableau::{AmfScheme, ButcherTableau, Mat2};

type CMat2 = [[Complex64; 2]; 2];
type CVec2 = [Complex64; 2];

/// Relative determinant size below which `I − wT_ν` is treated as singular.
pub const SINGULAR_DET: f64 = 1e-13;

fn cmat_vec(a: &CMat2, v: &CVec2) -> CVec2 {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

fn cmat_mul(a: &CMat2, b: &CMat2) -> CMat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn scaled(m: &Mat2, k: Complex64) -> CMat2 {
    [[k * m[0][0], k * m[0][1]], [k * m[1][0], k * m[1][1]]]
}

/// Maps per-direction scaled eigenvalues `z_k` to `(z, w)`.
pub fn combine_zw(zs: &[Complex64], gamma: f64) -> Result<(Complex64, Complex64)> {
    if zs.is_empty() {
        return Err(AmfError::InvalidParameter("empty splitting".into()));
    }
    if !(gamma > 0.0) {
        return Err(AmfError::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let z = zs.iter().sum();
    let product: Complex64 = zs.iter().map(|&zk| 1.0 - gamma * zk).product();
    Ok((z, (1.0 - product) / gamma))
}

/// `R_q(z, w)`. Fails when some `I − w T_ν` is numerically singular.
pub fn stability_function(
    scheme: &AmfScheme,
    tab: &ButcherTableau,
    z: Complex64,
    w: Complex64,
) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let a = scaled(tab.a(), z);
    // ∂Y^ν/∂y_n = Q_ν e + M_ν ∂Y^{ν−1}/∂y_n, starting from e.
    let mut dy = [one, one];
    for (idx, it) in scheme.iterations().iter().enumerate() {
        let wt = scaled(&it.t, w);
        let lhs = [[one - wt[0][0], -wt[0][1]], [-wt[1][0], one - wt[1][1]]];
        let det = lhs[0][0] * lhs[1][1] - lhs[0][1] * lhs[1][0];
        let scale = 1.0 + wt.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max);
        if !(det.norm() > SINGULAR_DET * scale * scale) {
            return Err(AmfError::Singular(format!(
                "I - w T_{} is singular at w = {w}",
                idx + 1
            )));
        }
        let q = [
            [lhs[1][1] / det, -lhs[0][1] / det],
            [-lhs[1][0] / det, lhs[0][0] / det],
        ];
        let diff = [
            [a[0][0] - wt[0][0], a[0][1] - wt[0][1]],
            [a[1][0] - wt[1][0], a[1][1] - wt[1][1]],
        ];
        let m = cmat_mul(&q, &diff);
        let qe = [q[0][0] + q[0][1], q[1][0] + q[1][1]];
        let mdy = cmat_vec(&m, &dy);
        dy = [qe[0] + mdy[0], qe[1] + mdy[1]];
    }
    let s_hat = tab.s_hat();
    Ok(tab.varpi() + s_hat[0] * dy[0] + s_hat[1] * dy[1])
}

/// `R_q` evaluated from per-direction values `z_k`.
pub fn split_stability_function(
    scheme: &AmfScheme,
    tab: &ButcherTableau,
    zs: &[Complex64],
) -> Result<Complex64> {
    let (z, w) = combine_zw(zs, scheme.gamma())?;
    stability_function(scheme, tab, z, w)
}

/// Where a sample `z_k` lies on the wedge `{|arg(−u)| ≤ θ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ray {
    /// `z_k = 0`.
    Origin,
    /// Negative real axis, `arg(−z_k) = 0`.
    Real,
    /// `arg(−z_k) = +θ`.
    Upper,
    /// `arg(−z_k) = −θ`.
    Lower,
}

impl Ray {
    fn label(self) -> &'static str {
        match self {
            Ray::Origin => "0",
            Ray::Real => "real",
            Ray::Upper => "+theta",
            Ray::Lower => "-theta",
        }
    }

    fn point(self, theta: f64, radius: f64) -> Complex64 {
        match self {
            Ray::Origin => Complex64::new(0.0, 0.0),
            Ray::Real => Complex64::new(-radius, 0.0),
            Ray::Upper => -Complex64::from_polar(radius, theta),
            Ray::Lower => -Complex64::from_polar(radius, -theta),
        }
    }
}

/// Sample layout for [`wedge_stability_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Moduli sampled on every ray.
    pub radii: Vec<f64>,
    /// Also sample the negative real axis (the wedge bisector).
    pub include_real_axis: bool,
    /// Also sample `z_k = 0`, which covers splittings where some directions
    /// are inactive.
    pub include_origin: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self::log_spaced(40)
    }
}

impl ScanConfig {
    /// `count` radii log-spaced on `[1e-3, 1e6]`.
    pub fn log_spaced(count: usize) -> Self {
        Self {
            radii: log_spaced(1e-3, 1e6, count),
            include_real_axis: true,
            include_origin: true,
        }
    }
}

/// `count` log-spaced points on `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// Result of a wedge scan. Thresholding against `1` is left to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub d: usize,
    pub theta: f64,
    pub max_modulus: f64,
    /// The `z_k` at which `max_modulus` was attained.
    pub argmax: Vec<Complex64>,
    /// Maximum per (sorted) ray combination, e.g. `"+theta,-theta"`.
    pub per_ray: BTreeMap<String, f64>,
    pub samples: usize,
    /// Samples skipped because `I − wT_ν` was numerically singular.
    pub excluded: usize,
}

impl ScanReport {
    pub fn is_stable(&self, tol: f64) -> bool {
        self.max_modulus <= 1.0 + tol
    }
}

fn scan_items(theta: f64, config: &ScanConfig) -> Vec<(Ray, f64)> {
    let mut rays = Vec::new();
    if config.include_real_axis || theta == 0.0 {
        rays.push(Ray::Real);
    }
    if theta > 0.0 {
        rays.push(Ray::Upper);
        rays.push(Ray::Lower);
    }
    let mut items = Vec::new();
    if config.include_origin {
        items.push((Ray::Origin, 0.0));
    }
    for &ray in &rays {
        for &r in &config.radii {
            items.push((ray, r));
        }
    }
    items
}

/// Calls `f` on every nondecreasing index tuple of length `d` over `0..n`
/// whose first entry is `first`.
fn for_each_multiset(n: usize, d: usize, first: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, idx: &mut Vec<usize>, d: usize, f: &mut impl FnMut(&[usize])) {
        if idx.len() == d {
            f(idx);
            return;
        }
        let start = *idx.last().expect("nonempty");
        for next in start..n {
            idx.push(next);
            rec(n, idx, d, f);
            idx.pop();
        }
    }
    let mut idx = vec![first];
    rec(n, &mut idx, d, f);
}

#[derive(Default)]
struct PartialScan {
    max: f64,
    argmax: Vec<Complex64>,
    per_ray: BTreeMap<Vec<Ray>, f64>,
    samples: usize,
    excluded: usize,
}

impl PartialScan {
    fn merge(&mut self, other: PartialScan) {
        if other.max > self.max || self.argmax.is_empty() && !other.argmax.is_empty() {
            self.max = other.max;
            self.argmax = other.argmax;
        }
        for (key, v) in other.per_ray {
            let e = self.per_ray.entry(key).or_insert(v);
            *e = e.max(v);
        }
        self.samples += other.samples;
        self.excluded += other.excluded;
    }
}

/// Visits every unordered combination of `d` samples drawn from the wedge
/// rays (R_q is symmetric in the `z_k`), passing the points and `|R_q|`.
fn visit_wedge_samples(
    scheme: &AmfScheme,
    tab: &ButcherTableau,
    d: usize,
    theta: f64,
    config: &ScanConfig,
) -> Result<Vec<PartialScan>> {
    if d == 0 {
        return Err(AmfError::InvalidParameter("splitting count must be positive".into()));
    }
    if !(0.0..=PI / 2.0).contains(&theta) {
        return Err(AmfError::InvalidParameter(format!(
            "theta must lie in [0, pi/2], got {theta}"
        )));
    }
    let items = scan_items(theta, config);
    let points: Vec<Complex64> = items.iter().map(|&(ray, r)| ray.point(theta, r)).collect();
    Ok((0..items.len())
        .into_par_iter()
        .map(|first| {
            let mut part = PartialScan::default();
            let mut zs = vec![Complex64::new(0.0, 0.0); d];
            for_each_multiset(items.len(), d, first, &mut |idx| {
                for (slot, &i) in zs.iter_mut().zip(idx) {
                    *slot = points[i];
                }
                part.samples += 1;
                let value = match split_stability_function(scheme, tab, &zs) {
                    Ok(r) if r.norm().is_finite() => r.norm(),
                    _ => {
                        part.excluded += 1;
                        return;
                    }
                };
                let key: Vec<Ray> = idx.iter().map(|&i| items[i].0).collect();
                let e = part.per_ray.entry(key).or_insert(value);
                *e = e.max(value);
                if value > part.max || part.argmax.is_empty() {
                    part.max = value;
                    part.argmax = zs.clone();
                }
            });
            part
        })
        .collect())
}

/// Samples `|R_q|` with every `z_k` on the boundary rays `arg(−z_k) = ±θ`, on
/// the negative real axis and at the origin, and reports the maximum.
pub fn wedge_stability_scan(
    scheme: &AmfScheme,
    tab: &ButcherTableau,
    d: usize,
    theta: f64,
    config: &ScanConfig,
) -> Result<ScanReport> {
    let parts = visit_wedge_samples(scheme, tab, d, theta, config)?;
    let mut total = PartialScan::default();
    for part in parts {
        total.merge(part);
    }
    let per_ray = total
        .per_ray
        .into_iter()
        .map(|(key, v)| {
            let label = key.iter().map(|r| r.label()).collect::<Vec<_>>().join(",");
            (label, v)
        })
        .collect();
    Ok(ScanReport {
        d,
        theta,
        max_modulus: total.max,
        argmax: total.argmax,
        per_ray,
        samples: total.samples,
        excluded: total.excluded,
    })
}

/// CSV rows `re_1,im_1,…,re_d,im_d,abs_r` for every scan sample (excluded
/// samples are omitted).
pub fn scan_samples_csv(
    scheme: &AmfScheme,
    tab: &ButcherTableau,
    d: usize,
    theta: f64,
    config: &ScanConfig,
) -> Result<String> {
    if d == 0 {
        return Err(AmfError::InvalidParameter("splitting count must be positive".into()));
    }
    let items = scan_items(theta, config);
    let points: Vec<Complex64> = items.iter().map(|&(ray, r)| ray.point(theta, r)).collect();
    let mut out = String::new();
    let header: Vec<String> = (1..=d)
        .flat_map(|k| [format!("re_z{k}"), format!("im_z{k}")])
        .chain(std::iter::once("abs_r".to_string()))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for first in 0..items.len() {
        for_each_multiset(items.len(), d, first, &mut |idx| {
            let zs: Vec<Complex64> = idx.iter().map(|&i| points[i]).collect();
            if let Ok(r) = split_stability_function(scheme, tab, &zs) {
                for z in &zs {
                    let _ = write!(out, "{:e},{:e},", z.re, z.im);
                }
                let _ = writeln!(out, "{:e}", r.norm());
            }
        });
    }
    Ok(out)
}

/// Largest sampled wedge half-angle in `[0, π/2]` for which the scan stays
/// within `1 + tol`, found by bisection to within `resolution` radians.
/// Returns `None` if even `θ = 0` fails.
pub fn estimate_wedge_angle(
    scheme: &AmfScheme,
    tab: &ButcherTableau,
    d: usize,
    tol: f64,
    resolution: f64,
    config: &ScanConfig,
) -> Result<Option<f64>> {
    let stable = |theta: f64| -> Result<bool> {
        Ok(wedge_stability_scan(scheme, tab, d, theta, config)?.is_stable(tol))
    };
    if !stable(0.0)? {
        return Ok(None);
    }
    if stable(PI / 2.0)? {
        return Ok(Some(PI / 2.0));
    }
    let (mut lo, mut hi) = (0.0, PI / 2.0);
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if stable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// `sup |z/(1 − γw)|` over `Re z_k ≤ 0`, in closed form:
/// `γ⁻¹ ((d−1)^{d−1} / d^{d−2})^{1/2}`.
pub fn splitting_sup_bound(d: usize, gamma: f64) -> Result<f64> {
    if d < 2 {
        return Err(AmfError::InvalidParameter(format!("need d >= 2, got {d}")));
    }
    if !(gamma > 0.0) {
        return Err(AmfError::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let df = d as f64;
    Ok(((df - 1.0).powi(d as i32 - 1) / df.powi(d as i32 - 2)).sqrt() / gamma)
}

fn sup_objective(ys: &[f64], gamma: f64) -> f64 {
    let zs: Vec<Complex64> = ys.iter().map(|&y| Complex64::new(0.0, y)).collect();
    let (z, w) = combine_zw(&zs, gamma).expect("nonempty, gamma > 0");
    (z / (1.0 - gamma * w)).norm()
}

/// Numerically maximizes `|z/(1 − γw)|` with every `z_k = i·y_k` on the
/// imaginary axis, by repeatedly refined tensor grids over `y_k ≥ 0`.
pub fn sampled_splitting_sup(d: usize, gamma: f64) -> Result<f64> {
    if d < 2 {
        return Err(AmfError::InvalidParameter(format!("need d >= 2, got {d}")));
    }
    const POINTS: usize = 11;
    let mut center = vec![1.5 / gamma; d];
    let mut half = 1.5 / gamma;
    let mut best = (0.0, center.clone());
    for _ in 0..30 {
        let axis: Vec<Vec<f64>> = center
            .iter()
            .map(|&c| {
                (0..POINTS)
                    .map(|i| (c - half + 2.0 * half * i as f64 / (POINTS - 1) as f64).max(0.0))
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; d];
        let mut ys = vec![0.0; d];
        loop {
            for k in 0..d {
                ys[k] = axis[k][idx[k]];
            }
            let v = sup_objective(&ys, gamma);
            if v > best.0 {
                best = (v, ys.clone());
            }
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < POINTS {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        center = best.1.clone();
        half *= 0.4;
    }
    Ok(best.0)
}
