//! Manufactured-solution diffusion problems `u_t = εΔu + g` on the unit square
//! and cube with Dirichlet data taken from the exact solution.
//!
//! * 2D: `u = 10 x(1−x) y(1−y) eᵗ + β e^{2x−y−t}`
//! * 3D: `u = 64 x(1−x) y(1−y) z(1−z) eᵗ + β e^{2x−y−z−t}`
//!
//! Both are separable, `u = C eᵗ Π P(x_a) + β e^{−t} Π E_a(x_a)` with
//! `P(s) = s(1−s)` and `E_a(s) = e^{k_a s}`, `k = (2, −1, −1)`. The
//! semidiscrete system is `y' = J y + g_h(t) + ε h⁻² u_Γ(t)` where `u_Γ`
//! gathers the boundary values reached by the 5/7-point stencil.

use crate::error::{AmfError, Result};
use crate::integrator::SemilinearSystem;
use crate::splitops::{build_split_operator, GridSpec, SplitOperator};

/// Diffusion constant used in the reference experiments.
pub const DEFAULT_EPSILON: f64 = 0.1;
/// End time used in the reference experiments.
pub const DEFAULT_T_END: f64 = 1.0;

const EXPONENTS: [f64; 3] = [2.0, -1.0, -1.0];

fn amplitude(dim: usize) -> f64 {
    if dim == 2 {
        10.0
    } else {
        64.0
    }
}

/// Per-axis factor tables at grid indices `0..=N`. Axes beyond the problem
/// dimension hold a single entry `1.0`.
#[derive(Debug, Clone, PartialEq)]
struct AxisTables {
    poly: [Vec<f64>; 3],
    expo: [Vec<f64>; 3],
}

impl AxisTables {
    fn new(dim: usize, n: usize) -> Self {
        let h = 1.0 / n as f64;
        let table = |a: usize, f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            if a < dim {
                (0..=n).map(|i| f(i as f64 * h)).collect()
            } else {
                vec![1.0]
            }
        };
        Self {
            poly: std::array::from_fn(|a| table(a, &|s| s * (1.0 - s))),
            expo: std::array::from_fn(|a| table(a, &|s| (EXPONENTS[a] * s).exp())),
        }
    }
}

/// A semidiscretized manufactured-solution problem (problem 1 in 2D, problem
/// 2 in 3D).
#[derive(Debug, Clone, PartialEq)]
pub struct SemidiscreteProblem {
    op: SplitOperator,
    epsilon: f64,
    beta: f64,
    dim: usize,
    tables: AxisTables,
}

/// Builds the problem for `dim ∈ {2, 3}` on `N` cells per axis.
pub fn build_problem(dim: usize, n: usize, beta: f64, epsilon: f64) -> Result<SemidiscreteProblem> {
    if dim != 2 && dim != 3 {
        return Err(AmfError::InvalidGrid(format!(
            "test problems exist in 2 and 3 dimensions, got {dim}"
        )));
    }
    if n < 3 {
        return Err(AmfError::InvalidGrid(format!("need N >= 3, got {n}")));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(AmfError::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !beta.is_finite() {
        return Err(AmfError::InvalidParameter(format!("beta must be finite, got {beta}")));
    }
    let grid = GridSpec::new(dim, n)?;
    let op = build_split_operator(grid, &vec![epsilon; dim], &vec![0.0; dim], 0.0)?;
    Ok(SemidiscreteProblem {
        op,
        epsilon,
        beta,
        dim,
        tables: AxisTables::new(dim, n),
    })
}

impl SemidiscreteProblem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn grid(&self) -> &GridSpec {
        self.op.grid()
    }

    /// Closed-form `u(x, t)`; only the first `dim` coordinates are used.
    pub fn exact_at(&self, point: &[f64], t: f64) -> f64 {
        let (poly, expo) = self.separable_parts(point);
        amplitude(self.dim) * t.exp() * poly + self.beta * (-t).exp() * expo
    }

    /// Closed-form `u_t(x, t)`.
    pub fn exact_time_derivative_at(&self, point: &[f64], t: f64) -> f64 {
        let (poly, expo) = self.separable_parts(point);
        amplitude(self.dim) * t.exp() * poly - self.beta * (-t).exp() * expo
    }

    /// Closed-form source `g = u_t − εΔu`.
    pub fn source_at(&self, point: &[f64], t: f64) -> f64 {
        let p: Vec<f64> = point[..self.dim].iter().map(|&s| s * (1.0 - s)).collect();
        let product: f64 = p.iter().product();
        let cross: f64 = (0..self.dim)
            .map(|a| (0..self.dim).filter(|&b| b != a).map(|b| p[b]).product::<f64>())
            .sum();
        let (_, expo) = self.separable_parts(point);
        let k2: f64 = EXPONENTS[..self.dim].iter().map(|k| k * k).sum();
        amplitude(self.dim) * t.exp() * (product + 2.0 * self.epsilon * cross)
            - self.beta * (1.0 + self.epsilon * k2) * (-t).exp() * expo
    }

    fn separable_parts(&self, point: &[f64]) -> (f64, f64) {
        point[..self.dim]
            .iter()
            .enumerate()
            .fold((1.0, 1.0), |(p, e), (a, &s)| {
                (p * s * (1.0 - s), e * (EXPONENTS[a] * s).exp())
            })
    }

    /// Visits interior nodes in flattening order with their grid indices
    /// (inactive axes report index 0).
    fn for_each_node(&self, mut f: impl FnMut(usize, [usize; 3])) {
        let n = self.grid().n_cells();
        let range = |a: usize| if a < self.dim { 1..n } else { 0..1 };
        let mut flat = 0;
        for k in range(2) {
            for j in range(1) {
                for i in range(0) {
                    f(flat, [i, j, k]);
                    flat += 1;
                }
            }
        }
    }

    /// `u` at grid indices `idx` (boundary indices 0 and N allowed).
    fn value_at_indices(&self, idx: [usize; 3], et: f64, emt: f64) -> f64 {
        let t = &self.tables;
        let poly = t.poly[0][idx[0]] * t.poly[1][idx[1]] * t.poly[2][idx[2]];
        let expo = t.expo[0][idx[0]] * t.expo[1][idx[1]] * t.expo[2][idx[2]];
        amplitude(self.dim) * et * poly + self.beta * emt * expo
    }

    fn grid_map(&self, f: impl Fn([usize; 3]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.op.len()];
        self.for_each_node(|flat, idx| out[flat] = f(idx));
        out
    }

    /// `u_h(t)`: the exact solution at the interior nodes.
    pub fn exact_solution_on_grid(&self, t: f64) -> Vec<f64> {
        let (et, emt) = (t.exp(), (-t).exp());
        self.grid_map(|idx| self.value_at_indices(idx, et, emt))
    }

    /// `u_h'(t)`.
    pub fn exact_time_derivative_on_grid(&self, t: f64) -> Vec<f64> {
        let (et, emt) = (t.exp(), (-t).exp());
        self.grid_map(|idx| self.value_at_indices(idx, et, -emt))
    }

    /// `u_Γ(t)`: for each interior node, the sum of the exact boundary values
    /// at its stencil neighbours on `∂Ω`.
    pub fn boundary_vector(&self, t: f64) -> Vec<f64> {
        let (et, emt) = (t.exp(), (-t).exp());
        self.grid_map(|idx| self.boundary_sum(idx, et, emt))
    }

    fn boundary_sum(&self, idx: [usize; 3], et: f64, emt: f64) -> f64 {
        let n = self.grid().n_cells();
        let mut total = 0.0;
        for a in 0..self.dim {
            if idx[a] == 1 {
                let mut nb = idx;
                nb[a] = 0;
                total += self.value_at_indices(nb, et, emt);
            }
            if idx[a] == n - 1 {
                let mut nb = idx;
                nb[a] = n;
                total += self.value_at_indices(nb, et, emt);
            }
        }
        total
    }

    fn source_at_indices(&self, idx: [usize; 3], et: f64, emt: f64) -> f64 {
        let t = &self.tables;
        let p = [t.poly[0][idx[0]], t.poly[1][idx[1]], t.poly[2][idx[2]]];
        let product = p[0] * p[1] * p[2];
        let cross = if self.dim == 2 {
            p[0] + p[1]
        } else {
            p[1] * p[2] + p[0] * p[2] + p[0] * p[1]
        };
        let expo = t.expo[0][idx[0]] * t.expo[1][idx[1]] * t.expo[2][idx[2]];
        let k2: f64 = EXPONENTS[..self.dim].iter().map(|k| k * k).sum();
        amplitude(self.dim) * et * (product + 2.0 * self.epsilon * cross)
            - self.beta * (1.0 + self.epsilon * k2) * emt * expo
    }

    /// `g_h(t)`: the source at the interior nodes.
    pub fn source_on_grid(&self, t: f64) -> Vec<f64> {
        let (et, emt) = (t.exp(), (-t).exp());
        self.grid_map(|idx| self.source_at_indices(idx, et, emt))
    }

    /// `g_h(t) + ε h⁻² u_Γ(t)`, the forcing of the semidiscrete ODE.
    pub fn forcing_vector(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.op.len()];
        self.forcing_into(t, &mut out);
        out
    }
}

impl SemilinearSystem for SemidiscreteProblem {
    fn operator(&self) -> &SplitOperator {
        &self.op
    }

    fn forcing_into(&self, t: f64, out: &mut [f64]) {
        let (et, emt) = (t.exp(), (-t).exp());
        let h = self.grid().h();
        let scale = self.epsilon / (h * h);
        let with_boundary = self.beta != 0.0;
        self.for_each_node(|flat, idx| {
            let mut v = self.source_at_indices(idx, et, emt);
            if with_boundary {
                v += scale * self.boundary_sum(idx, et, emt);
            }
            out[flat] = v;
        });
    }

    fn initial_state(&self) -> Vec<f64> {
        self.exact_solution_on_grid(0.0)
    }
}
