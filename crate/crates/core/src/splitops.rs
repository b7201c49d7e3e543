//! Directional split operators `J = Σ_j J_j` on tensor-product grids.
//!
//! Each `J_j` is a constant-coefficient tridiagonal stencil acting along one
//! coordinate direction of the interior grid. Unknowns are flattened with the
//! x-index varying fastest, then y, then z, so the interior node with 1-based
//! indices `(i, j, k)` lives at `(i-1) + (j-1)(N-1) + (k-1)(N-1)²`.
//!
//! Directions are 0-based in this API: 0 is x, 1 is y, 2 is z.

use crate::error::{AmfError, Result};

/// Largest `N` accepted by the dense assembly helpers.
pub const DENSE_GUARD_N: usize = 16;

/// Uniform grid on the unit cube with `N` cells per axis (spacing `h = 1/N`)
/// and `N − 1` interior nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    dim: usize,
    n_cells: usize,
}

impl GridSpec {
    /// `dim` may be 1 (used for scalar and 1D test systems), 2 or 3.
    pub fn new(dim: usize, n_cells: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(AmfError::InvalidGrid(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if n_cells < 2 {
            return Err(AmfError::InvalidGrid(format!(
                "need at least 2 cells per axis, got {n_cells}"
            )));
        }
        Ok(Self { dim, n_cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Total number of unknowns `m = (N − 1)^dim`.
    pub fn len(&self) -> usize {
        self.n_interior().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance in the flattened vector between neighbours along `direction`.
    pub fn stride(&self, direction: usize) -> usize {
        self.n_interior().pow(direction as u32)
    }

    /// Flattened position of the interior node with 1-based indices `coords`.
    pub fn flat_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .enumerate()
            .map(|(axis, &c)| {
                debug_assert!((1..=self.n_interior()).contains(&c));
                (c - 1) * self.stride(axis)
            })
            .sum()
    }

    /// Inverse of [`flat_index`](Self::flat_index): 1-based interior indices.
    pub fn coords(&self, mut flat: usize) -> [usize; 3] {
        let n = self.n_interior();
        let mut out = [0; 3];
        for slot in out.iter_mut().take(self.dim) {
            *slot = flat % n + 1;
            flat /= n;
        }
        out
    }
}

/// Tridiagonal stencil `(α, δ, β)` of one direction: sub-diagonal, diagonal,
/// super-diagonal.
///
/// For a physical direction with diffusion `d̄`, advection `a` and reaction
/// share `κ_l` on spacing `h`:
/// `α = h⁻²(d̄ − h a/2)`, `δ = h⁻²(−2d̄ + h²κ_l)`, `β = h⁻²(d̄ + h a/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionStencil {
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
    pub d_bar: f64,
    pub advection: f64,
    pub kappa_share: f64,
    peclet_warning: bool,
}

impl DirectionStencil {
    pub fn from_physical(h: f64, d_bar: f64, advection: f64, kappa_share: f64) -> Self {
        let inv_h2 = 1.0 / (h * h);
        Self {
            alpha: inv_h2 * (d_bar - 0.5 * h * advection),
            delta: inv_h2 * (-2.0 * d_bar + h * h * kappa_share),
            beta: inv_h2 * (d_bar + 0.5 * h * advection),
            d_bar,
            advection,
            kappa_share,
            peclet_warning: advection.abs() * h / d_bar >= 2.0,
        }
    }

    /// A stencil given directly by its three diagonals (no physical
    /// coefficients attached).
    pub fn raw(alpha: f64, delta: f64, beta: f64) -> Self {
        Self {
            alpha,
            delta,
            beta,
            d_bar: 0.0,
            advection: 0.0,
            kappa_share: 0.0,
            peclet_warning: alpha * beta < 0.0,
        }
    }

    /// Set when the cell-Péclet condition `|a| h / d̄ < 2` fails.
    pub fn peclet_warning(&self) -> bool {
        self.peclet_warning
    }
}

/// `J = Σ_j J_j` with one tridiagonal stencil per grid direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOperator {
    grid: GridSpec,
    stencils: Vec<DirectionStencil>,
}

/// Builds the central-difference split operator for constant diffusion,
/// advection and reaction coefficients. The reaction constant is shared
/// equally between directions (`κ_l = κ/d`) so that `Σ J_j` carries it once.
pub fn build_split_operator(
    grid: GridSpec,
    diffusion: &[f64],
    advection: &[f64],
    kappa: f64,
) -> Result<SplitOperator> {
    let d = grid.dim();
    if diffusion.len() != d {
        return Err(AmfError::DimensionMismatch {
            expected: d,
            found: diffusion.len(),
        });
    }
    if advection.len() != d {
        return Err(AmfError::DimensionMismatch {
            expected: d,
            found: advection.len(),
        });
    }
    let h = grid.h();
    let kappa_share = kappa / d as f64;
    let stencils = diffusion
        .iter()
        .zip(advection)
        .enumerate()
        .map(|(direction, (&d_bar, &a))| {
            if !(d_bar > 0.0) {
                return Err(AmfError::NonPositiveDiffusion {
                    direction,
                    value: d_bar,
                });
            }
            Ok(DirectionStencil::from_physical(h, d_bar, a, kappa_share))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitOperator { grid, stencils })
}

/// Visits the grid lines of one direction: `f(base, stride)` is called once
/// per block of `stride` interleaved lines starting at `base`.
fn for_each_block(grid: &GridSpec, direction: usize, mut f: impl FnMut(usize, usize)) {
    let n = grid.n_interior();
    let stride = grid.stride(direction);
    let block = stride * n;
    let mut base = 0;
    while base < grid.len() {
        f(base, stride);
        base += block;
    }
}

impl SplitOperator {
    pub fn from_stencils(grid: GridSpec, stencils: Vec<DirectionStencil>) -> Result<Self> {
        if stencils.len() != grid.dim() {
            return Err(AmfError::DimensionMismatch {
                expected: grid.dim(),
                found: stencils.len(),
            });
        }
        Ok(Self { grid, stencils })
    }

    /// A 1×1 operator `J = λ`, i.e. the scalar test equation `y' = λy`.
    pub fn scalar(lambda: f64) -> Self {
        Self {
            grid: GridSpec::new(1, 2).expect("valid"),
            stencils: vec![DirectionStencil::raw(0.0, lambda, 0.0)],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn stencils(&self) -> &[DirectionStencil] {
        &self.stencils
    }

    pub fn stencil(&self, direction: usize) -> Result<&DirectionStencil> {
        self.stencils.get(direction).ok_or(AmfError::InvalidDirection {
            direction,
            dim: self.dim(),
        })
    }

    pub fn has_peclet_warning(&self) -> bool {
        self.stencils.iter().any(DirectionStencil::peclet_warning)
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(AmfError::DimensionMismatch {
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }

    /// `out += J_j v`.
    fn accumulate_direction(&self, direction: usize, v: &[f64], out: &mut [f64]) {
        let DirectionStencil {
            alpha, delta, beta, ..
        } = self.stencils[direction];
        let n = self.grid.n_interior();
        for_each_block(&self.grid, direction, |base, stride| {
            for k in 0..n {
                let row = base + k * stride;
                for idx in row..row + stride {
                    let mut acc = delta * v[idx];
                    if k > 0 {
                        acc += alpha * v[idx - stride];
                    }
                    if k + 1 < n {
                        acc += beta * v[idx + stride];
                    }
                    out[idx] += acc;
                }
            }
        });
    }

    /// `J_j v`.
    pub fn apply_direction(&self, direction: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.stencil(direction)?;
        self.check_len(v.len())?;
        let mut out = vec![0.0; v.len()];
        self.accumulate_direction(direction, v, &mut out);
        Ok(out)
    }

    /// `(Σ_j J_j) v`, computed by stencil sweeps.
    pub fn apply_full(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.apply_full_into(v, &mut out)?;
        Ok(out)
    }

    /// Writes `J v` into `out`.
    pub fn apply_full_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(v.len())?;
        self.check_len(out.len())?;
        out.fill(0.0);
        for direction in 0..self.dim() {
            self.accumulate_direction(direction, v, out);
        }
        Ok(())
    }

    /// Precomputes the Thomas factors of `I − σ J_j` for every direction.
    pub fn factorize(&self, sigma: f64) -> Result<PiFactors> {
        if !(sigma >= 0.0) {
            return Err(AmfError::InvalidParameter(format!(
                "factor scale sigma must be nonnegative, got {sigma}"
            )));
        }
        let factors = (0..self.dim())
            .map(|direction| DirectionFactor::new(&self.stencils[direction], sigma, self.grid.n_interior(), direction))
            .collect::<Result<Vec<_>>>()?;
        Ok(PiFactors {
            grid: self.grid,
            sigma,
            factors,
        })
    }

    /// Solves `(I − σ J_j) x = rhs`.
    pub fn solve_direction_factor(&self, direction: usize, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        self.stencil(direction)?;
        self.check_len(rhs.len())?;
        let factors = self.factorize(sigma)?;
        let mut x = rhs.to_vec();
        factors.solve_direction_in_place(direction, &mut x)?;
        Ok(x)
    }

    /// Solves `Π_d x = rhs` with `Π_d = Π_j (I − σ J_j)`.
    pub fn solve_pi(&self, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs.len())?;
        let factors = self.factorize(sigma)?;
        let mut x = rhs.to_vec();
        factors.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// `Π_d v = Π_j (I − σ J_j) v`, applied factor by factor.
    pub fn apply_pi(&self, sigma: f64, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        let mut x = v.to_vec();
        for direction in 0..self.dim() {
            let jx = self.apply_direction(direction, &x)?;
            for (xi, ji) in x.iter_mut().zip(jx) {
                *xi -= sigma * ji;
            }
        }
        Ok(x)
    }

    /// Eigenvalues `δ + 2√(αβ) cos(kπ/N)`, `k = 1..N−1`, of the 1D stencil
    /// matrix of `direction` (each is an eigenvalue of `J_j` with
    /// multiplicity `(N−1)^(d−1)`).
    pub fn direction_eigenvalues(&self, direction: usize) -> Result<Vec<f64>> {
        let st = self.stencil(direction)?;
        let product = st.alpha * st.beta;
        if product < 0.0 {
            return Err(AmfError::ComplexSpectrum { direction });
        }
        let n = self.grid.n_cells();
        let root = 2.0 * product.sqrt();
        Ok((1..n)
            .map(|k| st.delta + root * (k as f64 * std::f64::consts::PI / n as f64).cos())
            .collect())
    }
}

/// Thomas factorization of the constant tridiagonal `I − σ T_j`, shared by
/// every grid line of the direction.
#[derive(Debug, Clone, PartialEq)]
struct DirectionFactor {
    direction: usize,
    sub: f64,
    inv_denom: Vec<f64>,
    c_prime: Vec<f64>,
}

impl DirectionFactor {
    fn new(st: &DirectionStencil, sigma: f64, n: usize, direction: usize) -> Result<Self> {
        let sub = -sigma * st.alpha;
        let diag = 1.0 - sigma * st.delta;
        let sup = -sigma * st.beta;
        let scale = sub.abs() + diag.abs() + sup.abs();
        let mut inv_denom = Vec::with_capacity(n);
        let mut c_prime = Vec::with_capacity(n);
        let mut prev_c = 0.0;
        for row in 0..n {
            let denom = diag - sub * prev_c;
            if !(denom.abs() > 1e-14 * scale) || !denom.is_finite() {
                return Err(AmfError::ZeroPivot { direction, row });
            }
            let inv = 1.0 / denom;
            prev_c = sup * inv;
            inv_denom.push(inv);
            c_prime.push(prev_c);
        }
        Ok(Self {
            direction,
            sub,
            inv_denom,
            c_prime,
        })
    }
}

/// Factor data for `Π_d = Π_j (I − σ J_j)` at a fixed `σ`.
///
/// Every grid line is solved independently with identical arithmetic, so the
/// result does not depend on the order in which lines are processed.
#[derive(Debug, Clone, PartialEq)]
pub struct PiFactors {
    grid: GridSpec,
    sigma: f64,
    factors: Vec<DirectionFactor>,
}

impl PiFactors {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Overwrites `x` with `(I − σ J_j)⁻¹ x`.
    pub fn solve_direction_in_place(&self, direction: usize, x: &mut [f64]) -> Result<()> {
        let factor = self.factors.get(direction).ok_or(AmfError::InvalidDirection {
            direction,
            dim: self.grid.dim(),
        })?;
        if x.len() != self.grid.len() {
            return Err(AmfError::DimensionMismatch {
                expected: self.grid.len(),
                found: x.len(),
            });
        }
        debug_assert_eq!(factor.direction, direction);
        let n = self.grid.n_interior();
        let sub = factor.sub;
        for_each_block(&self.grid, direction, |base, stride| {
            // Forward elimination, all interleaved lines of the block at once.
            for idx in base..base + stride {
                x[idx] *= factor.inv_denom[0];
            }
            for k in 1..n {
                let row = base + k * stride;
                let inv = factor.inv_denom[k];
                for idx in row..row + stride {
                    x[idx] = (x[idx] - sub * x[idx - stride]) * inv;
                }
            }
            // Back substitution.
            for k in (0..n.saturating_sub(1)).rev() {
                let row = base + k * stride;
                let cp = factor.c_prime[k];
                for idx in row..row + stride {
                    x[idx] -= cp * x[idx + stride];
                }
            }
        });
        Ok(())
    }

    /// Overwrites `x` with `Π_d⁻¹ x`, solving directions 0, 1, … in turn.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        for direction in 0..self.factors.len() {
            self.solve_direction_in_place(direction, x)?;
        }
        Ok(())
    }
}

/// Dense realizations of split operators, for reference computations on
/// small grids.
pub mod dense {
    use nalgebra::DMatrix;

    use super::{SplitOperator, DENSE_GUARD_N};
    use crate::error::{AmfError, Result};

    fn guard(op: &SplitOperator) -> Result<()> {
        let n = op.grid().n_cells();
        if n > DENSE_GUARD_N {
            return Err(AmfError::SizeGuard(format!(
                "dense assembly needs N <= {DENSE_GUARD_N}, got N = {n}"
            )));
        }
        Ok(())
    }

    /// Dense `J_j`.
    pub fn assemble_direction(op: &SplitOperator, direction: usize) -> Result<DMatrix<f64>> {
        guard(op)?;
        let st = *op.stencil(direction)?;
        let grid = op.grid();
        let m = grid.len();
        let n = grid.n_interior();
        let stride = grid.stride(direction);
        let mut mat = DMatrix::zeros(m, m);
        for row in 0..m {
            let k = grid.coords(row)[direction] - 1;
            mat[(row, row)] += st.delta;
            if k > 0 {
                mat[(row, row - stride)] += st.alpha;
            }
            if k + 1 < n {
                mat[(row, row + stride)] += st.beta;
            }
        }
        Ok(mat)
    }

    /// Dense `J = Σ_j J_j`.
    pub fn assemble_full(op: &SplitOperator) -> Result<DMatrix<f64>> {
        guard(op)?;
        let m = op.len();
        let mut total = DMatrix::zeros(m, m);
        for direction in 0..op.dim() {
            total += assemble_direction(op, direction)?;
        }
        Ok(total)
    }
}
