//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use amf_core::harness::{run_convergence, ConvergenceRow, StudyConfig};
use amf_core::integrator::{amf_step, irk_reference_step, LinearSystem, SemilinearSystem};
use amf_core::problems::build_problem;
use amf_core::splitops::{build_split_operator, dense, DirectionStencil, GridSpec, SplitOperator};
use amf_core::stability::{
    sampled_splitting_sup, splitting_sup_bound, stability_function, wedge_stability_scan, ScanConfig,
};
use amf_core::tableau::{radau2a_tableau, radau_gamma, verify_scheme_conditions, AmfScheme, SchemeKind};
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIGITS_TOL: f64 = 0.03;
const ORDER_TOL: f64 = 0.05;
const CONDITION_TOL: f64 = 1e-14;
const STABILITY_TOL: f64 = 1e-12;
const SUP_TOL: f64 = 1e-3;
const SWEEP_TOL: f64 = 1e-11;
const SCALAR_TOL: f64 = 1e-13;
const SLOPE_TOL: f64 = 0.15;
const EIGEN_TOL: f64 = 1e-10;
const ROUND_TRIP_TOL: f64 = 1e-12;
// The default machine-epsilon Schur threshold stalls on the highly
// degenerate direction matrices.
const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 100_000;

const GRIDS_2D: [usize; 5] = [24, 48, 96, 192, 384];
const GRIDS_3D: [usize; 2] = [24, 48];

/// Published digits and orders; `None` marks an order that is not checked.
struct Reference {
    scheme: SchemeKind,
    delta2: &'static [f64],
    p: &'static [Option<f64>],
}

const HOMOGENEOUS_2D: [Reference; 3] = [
    Reference {
        scheme: SchemeKind::Amf1,
        delta2: &[3.74, 4.35, 4.96, 5.56, 6.16],
        p: &[Some(2.03), Some(2.03), Some(1.99), Some(1.99)],
    },
    Reference {
        scheme: SchemeKind::Amf2,
        delta2: &[4.94, 5.79, 6.66, 7.54, 8.42],
        p: &[Some(2.82), Some(2.89), Some(2.92), Some(2.93)],
    },
    Reference {
        scheme: SchemeKind::Amf3,
        delta2: &[4.90, 5.67, 6.40, 7.11, 7.80],
        p: &[None, Some(2.42), Some(2.36), Some(2.29)],
    },
];

const BOUNDARY_2D: [Reference; 3] = [
    Reference {
        scheme: SchemeKind::Amf1,
        delta2: &[3.02, 3.32, 3.61, 3.91, 4.21],
        p: &[],
    },
    Reference {
        scheme: SchemeKind::Amf2,
        delta2: &[2.79, 3.02, 3.27, 3.54, 3.82],
        p: &[],
    },
    Reference {
        scheme: SchemeKind::Amf3,
        delta2: &[2.52, 2.72, 2.95, 3.21, 3.48],
        p: &[],
    },
];

const HOMOGENEOUS_3D: [Reference; 3] = [
    Reference {
        scheme: SchemeKind::Amf1,
        delta2: &[3.40, 4.01],
        p: &[],
    },
    Reference {
        scheme: SchemeKind::Amf2,
        delta2: &[4.31, 5.20],
        p: &[],
    },
    Reference {
        scheme: SchemeKind::Amf3,
        delta2: &[4.53, 5.34],
        p: &[],
    },
];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn convergence(dim: usize, beta: f64, grids: &[usize], refs: &[Reference]) -> Outcome {
    let mut worst_digits: f64 = 0.0;
    let mut worst_order: f64 = 0.0;
    let mut failures = Vec::new();
    for r in refs {
        let rows: Vec<ConvergenceRow> = run_convergence(&StudyConfig::new(dim, beta, r.scheme, grids.to_vec()))
            .map_err(|e| e.to_string())?;
        for (row, &want) in rows.iter().zip(r.delta2) {
            let dev = (row.delta2 - want).abs();
            worst_digits = worst_digits.max(dev);
            if dev > DIGITS_TOL {
                failures.push(format!("{} N={} delta2 {:.3} vs {want}", r.scheme, row.n_cells, row.delta2));
            }
        }
        for (row, want) in rows.iter().zip(r.p) {
            let (Some(want), Some(got)) = (want, row.p) else { continue };
            let dev = (got - want).abs();
            worst_order = worst_order.max(dev);
            if dev > ORDER_TOL {
                failures.push(format!("{} N={} p {got:.3} vs {want}", r.scheme, row.n_cells));
            }
        }
    }
    let mut detail = format!("max |d delta2| = {worst_digits:.4} (tol {DIGITS_TOL})");
    if refs.iter().any(|r| !r.p.is_empty()) {
        detail += &format!(", max |d p| = {worst_order:.4} (tol {ORDER_TOL})");
    }
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    check(failures.is_empty(), detail)
}

fn order_conditions() -> Outcome {
    let tab = radau2a_tableau();
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    for kind in [SchemeKind::Amf1, SchemeKind::Amf2, SchemeKind::Amf3] {
        let report = verify_scheme_conditions(&AmfScheme::from_kind(kind), &tab);
        entries += report.len();
        worst = worst.max(report.max_residual());
    }
    check(
        worst <= CONDITION_TOL,
        format!("{entries} identities, max residual {worst:.2e} (tol {CONDITION_TOL:e})"),
    )
}

fn stability() -> Outcome {
    let tab = radau2a_tableau();
    let cfg = ScanConfig::default();
    let mut cases = Vec::new();
    for kind in [SchemeKind::Amf1, SchemeKind::Amf2, SchemeKind::Amf3] {
        cases.push((kind, 2, PI / 2.0));
        cases.push((kind, 3, 0.0));
        cases.push((kind, 4, 0.0));
    }
    cases.push((SchemeKind::Amf2, 3, PI / 6.0));
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (kind, d, theta) in cases {
        let report =
            wedge_stability_scan(&AmfScheme::from_kind(kind), &tab, d, theta, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_modulus);
        if !report.is_stable(STABILITY_TOL) {
            failures.push(format!("{kind} d={d} theta={theta:.4}: max |R| = {:.15}", report.max_modulus));
        }
    }
    let mut sup_dev: f64 = 0.0;
    for d in 2..=4 {
        let bound = splitting_sup_bound(d, radau_gamma()).map_err(|e| e.to_string())?;
        let sampled = sampled_splitting_sup(d, radau_gamma()).map_err(|e| e.to_string())?;
        sup_dev = sup_dev.max((bound - sampled).abs());
        if (bound - sampled).abs() > SUP_TOL {
            failures.push(format!("d={d}: sampled sup {sampled:.6} vs {bound:.6}"));
        }
    }
    let mut detail = format!(
        "10 wedge scans, max |R| - 1 = {:.2e} (tol {STABILITY_TOL:e}); sup deviation {sup_dev:.2e} (tol {SUP_TOL:e})",
        worst - 1.0
    );
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    check(failures.is_empty(), detail)
}

/// Realification of multiplication by `z̄` as a 2×2 tridiagonal operator.
fn complex_multiplier(z: Complex64) -> SplitOperator {
    let grid = GridSpec::new(1, 3).unwrap();
    SplitOperator::from_stencils(grid, vec![DirectionStencil::raw(-z.im, z.re, z.im)]).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let tab = radau2a_tableau();
    let mut sweep_err: f64 = 0.0;
    for beta in [0.0, 1.0] {
        let problem = build_problem(2, 8, beta, 0.1).map_err(|e| e.to_string())?;
        for kind in [SchemeKind::Amf1, SchemeKind::Amf2, SchemeKind::Amf3] {
            let scheme = AmfScheme::from_kind(kind).with_repeated_last(30);
            for t_n in [0.0, 0.5] {
                let tau = 0.125;
                let y_n = if t_n == 0.0 {
                    problem.initial_state()
                } else {
                    problem.exact_solution_on_grid(t_n)
                };
                let amf = amf_step(&problem, &scheme, &tab, t_n, tau, &y_n).map_err(|e| e.to_string())?;
                let irk = irk_reference_step(&problem, &tab, t_n, tau, &y_n).map_err(|e| e.to_string())?;
                let err = amf.iter().zip(&irk).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                sweep_err = sweep_err.max(err);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut scalar_err: f64 = 0.0;
    for _ in 0..20 {
        let radius = 10f64.powf(rng.gen_range(-2.0..3.0));
        let angle = rng.gen_range(PI / 2.0..1.5 * PI);
        let z = Complex64::from_polar(radius, angle);
        for kind in [SchemeKind::Amf1, SchemeKind::Amf2, SchemeKind::Amf3] {
            let scheme = AmfScheme::from_kind(kind);
            let system = LinearSystem::homogeneous(complex_multiplier(z), vec![1.0, 0.0]).unwrap();
            let y = amf_step(&system, &scheme, &tab, 0.0, 1.0, &[1.0, 0.0]).map_err(|e| e.to_string())?;
            let expected = stability_function(&scheme, &tab, z.conj(), z.conj()).map_err(|e| e.to_string())?;
            scalar_err = scalar_err.max((Complex64::new(y[0], y[1]) - expected).norm());

            let real = LinearSystem::scalar(z.re, 1.0);
            let y = amf_step(&real, &scheme, &tab, 0.0, 1.0, &[1.0]).map_err(|e| e.to_string())?;
            let expected = stability_function(&scheme, &tab, z.re.into(), z.re.into()).map_err(|e| e.to_string())?;
            scalar_err = scalar_err.max((y[0] - expected.re).abs().max(expected.im.abs()));
        }
    }
    check(
        sweep_err <= SWEEP_TOL && scalar_err <= SCALAR_TOL,
        format!(
            "30-sweep vs dense stage solve {sweep_err:.2e} (tol {SWEEP_TOL:e}); step ratio vs R(z,z) {scalar_err:.2e} (tol {SCALAR_TOL:e})"
        ),
    )
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn scalar_orders() -> Outcome {
    let tab = radau2a_tableau();
    let lambda = -1.0;
    let mut parts = Vec::new();
    let mut ok = true;
    for (kind, want) in [(SchemeKind::Amf1, 3.0), (SchemeKind::Amf2, 4.0), (SchemeKind::Amf3, 4.0)] {
        let scheme = AmfScheme::from_kind(kind);
        let system = LinearSystem::scalar(lambda, 1.0);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for k in 4..=10 {
            let tau = 2f64.powi(-k);
            let y = amf_step(&system, &scheme, &tab, 0.0, tau, &[1.0]).map_err(|e| e.to_string())?;
            xs.push(tau.log2());
            ys.push((y[0] - (lambda * tau).exp()).abs().log2());
        }
        let slope = least_squares_slope(&xs, &ys);
        ok &= (slope - want).abs() <= SLOPE_TOL;
        parts.push(format!("{kind} {slope:.3} (want {want})"));
    }
    check(ok, format!("local-error slopes: {} (tol {SLOPE_TOL})", parts.join(", ")))
}

fn spatial_operator() -> Outcome {
    let mut eig_err: f64 = 0.0;
    let mut trip_err: f64 = 0.0;
    let mut commutator: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dim in 1..=3 {
        for n in [4, 8, 16] {
            if dim == 3 && n == 16 {
                continue;
            }
            let grid = GridSpec::new(dim, n).unwrap();
            let diffusion = [0.1, 0.05, 0.2];
            let advection = [0.5, -0.3, 0.0];
            let op = build_split_operator(grid, &diffusion[..dim], &advection[..dim], -0.7)
                .map_err(|e| e.to_string())?;
            let m = op.len();
            let mats: Vec<DMatrix<f64>> = (0..dim)
                .map(|j| dense::assemble_direction(&op, j))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            for (j, mat) in mats.iter().enumerate() {
                let schur = Schur::try_new(mat.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
                    .ok_or_else(|| format!("dense Schur failed: dim {dim}, N={n}, direction {j}"))?;
                let mut dense_eigs: Vec<f64> = schur
                    .complex_eigenvalues()
                    .iter()
                    .map(|c| {
                        eig_err = eig_err.max(c.im.abs());
                        c.re
                    })
                    .collect();
                dense_eigs.sort_by(f64::total_cmp);
                let reps = m / (n - 1);
                let mut formula: Vec<f64> = op
                    .direction_eigenvalues(j)
                    .map_err(|e| e.to_string())?
                    .into_iter()
                    .flat_map(|v| std::iter::repeat(v).take(reps))
                    .collect();
                formula.sort_by(f64::total_cmp);
                for (a, b) in dense_eigs.iter().zip(&formula) {
                    eig_err = eig_err.max((a - b).abs());
                }
            }
            for i in 0..dim {
                for j in 0..dim {
                    let c = &mats[i] * &mats[j] - &mats[j] * &mats[i];
                    commutator = commutator.max(c.amax());
                }
            }
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let applied = op.apply_full(&v).map_err(|e| e.to_string())?;
            let dense_full = dense::assemble_full(&op).map_err(|e| e.to_string())?;
            let dense_applied = &dense_full * nalgebra::DVector::from_column_slice(&v);
            let scale = dense_full.amax();
            for (a, b) in applied.iter().zip(dense_applied.iter()) {
                trip_err = trip_err.max((a - b).abs() / scale);
            }
            for sigma in [0.01, 0.2, 5.0] {
                let back = op
                    .solve_pi(sigma, &op.apply_pi(sigma, &v).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                for (a, b) in back.iter().zip(&v) {
                    trip_err = trip_err.max((a - b).abs());
                }
                for j in 0..dim {
                    let factor = &DMatrix::identity(m, m) - &mats[j] * sigma;
                    let rhs = &factor * nalgebra::DVector::from_column_slice(&v);
                    let x = op
                        .solve_direction_factor(j, sigma, rhs.as_slice())
                        .map_err(|e| e.to_string())?;
                    for (a, b) in x.iter().zip(&v) {
                        trip_err = trip_err.max((a - b).abs());
                    }
                }
            }
        }
    }
    check(
        eig_err <= EIGEN_TOL && trip_err <= ROUND_TRIP_TOL && commutator == 0.0,
        format!(
            "eigenvalue error {eig_err:.2e} (tol {EIGEN_TOL:e}); round trip {trip_err:.2e} (tol {ROUND_TRIP_TOL:e}); commutator max {commutator:e}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        (
            "2D convergence, beta=0",
            Box::new(|| convergence(2, 0.0, &GRIDS_2D, &HOMOGENEOUS_2D)),
        ),
        (
            "2D convergence, beta=1",
            Box::new(|| convergence(2, 1.0, &GRIDS_2D, &BOUNDARY_2D)),
        ),
        (
            "3D convergence, beta=0",
            Box::new(|| convergence(3, 0.0, &GRIDS_3D, &HOMOGENEOUS_3D)),
        ),
        ("order conditions", Box::new(order_conditions)),
        ("stability wedges and splitting bound", Box::new(stability)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("scalar local orders", Box::new(scalar_orders)),
        ("spatial operator", Box::new(spatial_operator)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
