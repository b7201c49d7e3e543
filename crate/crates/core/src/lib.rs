//! AMF_q-Rad time integrators for directionally split semilinear
//! diffusion-reaction semidiscretizations.
//!
//! The crate is organised bottom-up:
//!
//! * [`tableau`]: the 2-stage Radau IIA coefficients and the three
//!   AMF_q-Rad iteration schemes, with their defining order conditions.
//! * [`splitops`]: tridiagonal directional operators on tensor grids,
//!   the factor solves `(I - σ J_j)^{-1}` and the product solve `Π_d^{-1}`.
//! * [`integrator`]: the AMF one-step map, a dense exact-IRK reference step
//!   and a fixed-step driver.
//! * [`problems`]: manufactured-solution test problems in 2D and 3D.
//! * [`stability`]: the scalar stability function `R_q(z, w)` and
//!   wedge scans.
//! * [`harness`]: convergence studies and table rendering.
//! * [`cli`]: the `amf` command-line front end.

pub mod cli;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod problems;
pub mod splitops;
pub mod stability;
pub mod tableau;

pub use error::{AmfError, Result};
