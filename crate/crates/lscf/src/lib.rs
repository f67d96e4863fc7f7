//! Solvers for three coupled electron-density / Poisson systems on periodic
//! grids: the reduced Hartree-Fock model (`Rehf`), the Poisson-Landscape
//! model (`Pl`), and the landscape-regularized semiclassical model (`Lsc`).
//!
//! All three models couple a density map `rho = F(phi, mu)` to the Poisson
//! equation `-laplace(phi) = kappa - rho` on the torus `[0, L]^d`, with the
//! chemical potential `mu` fixed by charge neutrality. They differ in `F`:
//!
//! * `Rehf`: spectral density of the Hamiltonian `-eps^2 laplace + V - phi`
//!   through the Fermi-Dirac function,
//! * `Pl`: a semiclassical momentum integral over the landscape potential
//!   `W_1 = 1/u_1` of the phi-dependent shifted Hamiltonian,
//! * `Lsc`: the same integral over the phi-independent `W_2`, with `phi`
//!   entering additively.
//!
//! The crate is generic over the floating-point scalar (see [`Scalar`]);
//! concrete `f64`/`f32` aliases for the main types live at the crate root.
//! Library modules are pure: no I/O, deterministic reductions, seeded RNG.

pub mod analysis;
pub mod density;
pub mod error;
pub mod grid;
mod ham;
pub mod landscape;
pub mod potential;
mod quad;
pub mod scalar;
pub mod scf;
pub mod variational;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` grid specification.
pub type Grid64 = grid::GridSpec<f64>;
/// `f64` periodic field.
pub type Field64 = grid::ScalarField<f64>;
/// `f64` converged SCF state.
pub type ScfState64 = scf::ScfState<f64>;

/// `f32` grid specification.
pub type Grid32 = grid::GridSpec<f32>;
/// `f32` periodic field.
pub type Field32 = grid::ScalarField<f32>;
