//! The three electron-density maps and the Fermi-Dirac utilities they
//! share.
//!
//! * `density_rehf`: spectral density `rho(x) = sum_i f_FD(beta(lambda_i -
//!   mu)) |psi_i(x)|^2` of `H = -eps^2 laplace + V - phi`, eigenfunctions
//!   normalized so `sum_x |psi|^2 h^d = 1`. Dense or Lanczos path.
//! * `density_pl`: semiclassical momentum integral over the landscape
//!   potential `W_1` of the phi-dependent shifted Hamiltonian
//!   `-eps^2 laplace + (V - phi - V_cut)`.
//! * `density_lsc`: the same integral over the phi-independent `W_2` from
//!   `-eps^2 laplace + (V - V_cut)`, with `phi` entering additively. `W_2`
//!   is cacheable across `phi` ([`LscDensity`]); the self-consistent loop
//!   reuses one landscape solve for the whole iteration.
//!
//! The momentum integral reduces to a radial one:
//! `(2 pi eps)^{-d} S_{d-1} int_0^inf q^{d-1} f_FD(beta(q^2 + a)) dq`
//! with `S_0 = 2`, `S_1 = 2 pi`, `S_2 = 4 pi`, evaluated by adaptive
//! Gauss-Legendre with upper limit `sqrt(max(0, -a) + 40/beta)`; the
//! discarded tail is below `e^-40` relative.

use crate::error::{Error, Result};
use crate::grid::{FourierModeTable, GridSpec, ScalarField, Scheme};
use crate::ham;
use crate::landscape::solve_landscape;
use crate::quad;
use crate::scalar::{cast, to_f64, Scalar};

/// Thermodynamic state shared by the density maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoState<T: Scalar> {
    /// Inverse temperature, positive.
    pub beta: T,
    /// Chemical potential / Fermi energy.
    pub mu: T,
    /// Cut level splitting the potential floor.
    pub v_cut: T,
}

impl<T: Scalar> ThermoState<T> {
    pub fn new(beta: T, mu: T, v_cut: T) -> Self {
        ThermoState { beta, mu, v_cut }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Dense when the grid fits `dense_limit`, Lanczos otherwise.
    Auto,
    Dense,
    Lanczos,
}

/// Controls for the spectral-density eigensolve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSolveConfig<T: Scalar> {
    pub method: EigenMethod,
    /// Cap on Fermi-occupied eigenpairs the iterative path may collect.
    pub max_pairs: usize,
    /// Stop collecting pairs once the Fermi weight drops below
    /// `tail_tol` times the weight of the ground state.
    pub tail_tol: T,
    pub dense_limit: usize,
}

impl<T: Scalar> Default for EigenSolveConfig<T> {
    fn default() -> Self {
        EigenSolveConfig {
            method: EigenMethod::Auto,
            max_pairs: 512,
            tail_tol: cast::<T>(1e-12),
            dense_limit: 4096,
        }
    }
}

/// Fermi-Dirac distribution `1/(1 + e^lambda)` in the numerically stable
/// branch form: for positive arguments it evaluates
/// `e^{-lambda}/(1 + e^{-lambda})`, avoiding overflow.
pub fn fermi_dirac<T: Scalar>(lambda: T) -> T {
    if lambda > T::zero() {
        let e = (-lambda).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + lambda.exp())
    }
}

/// `f_FD(lambda) * (1 - f_FD(lambda))`, stable for large `|lambda|`;
/// equals `-f_FD'(lambda)`.
pub fn fermi_dirac_weight<T: Scalar>(lambda: T) -> T {
    fermi_dirac(lambda) * fermi_dirac(-lambda)
}

fn sphere_surface<T: Scalar>(d: usize) -> T {
    match d {
        1 => cast::<T>(2.0),
        2 => T::two_pi(),
        3 => cast::<T>(4.0) * T::pi(),
        _ => unreachable!("dimension validated earlier"),
    }
}

fn check_fermi_args<T: Scalar>(beta: T, eps: T, d: usize) -> Result<()> {
    if !(beta > T::zero()) || !(eps > T::zero()) {
        return Err(Error::BadParam("beta and eps must be positive".into()));
    }
    if !(1..=3).contains(&d) {
        return Err(Error::BadDimension(d));
    }
    Ok(())
}

const FERMI_QUAD_TOL: f64 = 1e-10;
const FERMI_QUAD_PANELS: usize = 4000;

/// Semiclassical phase-space density
/// `(2 pi eps)^{-d} int_{R^d} f_FD(beta(p^2 + a)) dp`,
/// strictly decreasing in `a`.
pub fn fermi_integral<T: Scalar>(a: T, beta: T, eps: T, d: usize) -> Result<T> {
    check_fermi_args(beta, eps, d)?;
    radial_momentum_integral(a, beta, eps, d, |lam| fermi_dirac(lam))
}

/// Derivative of [`fermi_integral`] with respect to `a` (negative for all
/// arguments). The `beta` factor from the chain rule is folded in.
pub fn fermi_integral_deriv<T: Scalar>(a: T, beta: T, eps: T, d: usize) -> Result<T> {
    check_fermi_args(beta, eps, d)?;
    radial_momentum_integral(a, beta, eps, d, |lam| -beta * fermi_dirac_weight(lam))
}

fn radial_momentum_integral<T: Scalar>(
    a: T,
    beta: T,
    eps: T,
    d: usize,
    weight: impl Fn(T) -> T,
) -> Result<T> {
    let zero = T::zero();
    let q_f2 = if a < zero { -a } else { zero };
    let q_max = (q_f2 + cast::<T>(40.0) / beta).sqrt();
    let q_f = q_f2.sqrt();
    let splits = if q_f > zero { vec![q_f] } else { vec![] };
    let df = cast::<T>((d as f64) - 1.0);
    let integrand = |q: T| q.powf(df) * weight(beta * (q * q + a));
    let radial = quad::adaptive(
        integrand,
        zero,
        q_max,
        cast::<T>(FERMI_QUAD_TOL),
        FERMI_QUAD_PANELS,
        &splits,
    )?;
    let pref = (T::two_pi() * eps).powi(-(d as i32));
    Ok(pref * sphere_surface::<T>(d) * radial)
}

/// Discrete momentum sum for a constant potential: the exact spectral
/// density of `-eps^2 laplace + c` on the grid,
/// `(1/L^d) sum_k f_FD(beta(eps^2 lambda_k + c - mu))` over the scheme's
/// Laplacian eigenvalues.
pub fn momentum_sum_density<T: Scalar>(
    grid: &GridSpec<T>,
    scheme: Scheme,
    c: T,
    thermo: &ThermoState<T>,
) -> T {
    let table = FourierModeTable::new(grid);
    let symbol = table.neg_laplacian_symbol(scheme);
    let eps2 = grid.eps() * grid.eps();
    let sum = symbol.iter().fold(T::zero(), |acc, &s| {
        acc + fermi_dirac(thermo.beta * (eps2 * s + c - thermo.mu))
    });
    sum / grid.volume()
}

/// Spectral density of `H = -eps^2 laplace + V - phi`.
pub fn density_rehf<T: Scalar>(
    v: &ScalarField<T>,
    phi: &ScalarField<T>,
    thermo: &ThermoState<T>,
    scheme: Scheme,
    cfg: &EigenSolveConfig<T>,
) -> Result<ScalarField<T>> {
    if !(cfg.tail_tol > T::zero() && cfg.tail_tol < T::one()) {
        return Err(Error::BadParam("tail_tol must lie in (0, 1)".into()));
    }
    let v_eff = v.sub(phi)?;
    let grid = *v.grid();
    let size = grid.len();
    let dense = match cfg.method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
        EigenMethod::Auto => size <= cfg.dense_limit,
    };
    let (vals, vecs): (Vec<T>, Vec<Vec<T>>) = if dense {
        if size > cfg.dense_limit {
            return Err(Error::TooLarge {
                size,
                limit: cfg.dense_limit,
            });
        }
        let m = ham::dense_hamiltonian(&v_eff, scheme, cfg.dense_limit)?;
        let (vals, mat) = ham::dense_eigenpairs(m);
        let vecs = (0..size)
            .map(|i| mat.column(i).iter().copied().collect())
            .collect();
        (vals, vecs)
    } else {
        let beta = thermo.beta;
        let mu = thermo.mu;
        let tail = cfg.tail_tol;
        let max_pairs = cfg.max_pairs;
        let (vals, vecs) = ham::lanczos_lowest(
            size,
            |x| {
                let xf = ScalarField::new(grid, x.to_vec()).unwrap();
                ham::apply_hamiltonian(&v_eff, &xf, scheme)
                    .values()
                    .to_vec()
            },
            cast::<T>(1e-10),
            size,
            |converged: &[T]| {
                if converged.len() < 2 {
                    return false;
                }
                if converged.len() >= max_pairs {
                    return true;
                }
                let w0 = fermi_dirac(beta * (converged[0] - mu));
                let wl = fermi_dirac(beta * (converged[converged.len() - 1] - mu));
                wl < tail * w0
            },
        )?;
        // Reaching the pair cap without meeting the tail rule means the
        // truncated density would silently be wrong.
        if vals.len() >= max_pairs {
            let w0 = fermi_dirac(beta * (vals[0] - mu));
            let wl = fermi_dirac(beta * (vals[vals.len() - 1] - mu));
            if wl >= tail * w0 {
                return Err(Error::no_convergence(
                    "rehf eigenpair collection",
                    vals.len(),
                    to_f64(wl / w0),
                ));
            }
        }
        (vals, vecs)
    };

    let hd = grid.cell_volume();
    let mut rho = vec![T::zero(); size];
    for (lam, psi) in vals.iter().zip(&vecs) {
        let f = fermi_dirac(thermo.beta * (*lam - thermo.mu));
        // Euclidean-normalized psi: |psi_phys|^2 = psi^2 / h^d.
        for (r, &p) in rho.iter_mut().zip(psi) {
            *r += f * p * p / hd;
        }
    }
    ScalarField::new(grid, rho)
}

/// Landscape tolerance used by the semiclassical maps.
pub const LANDSCAPE_TOL: f64 = 1e-10;

/// Semiclassical density over the phi-dependent landscape potential:
/// `rho(x) = fermi_integral(W_1(x) + V_cut - mu)` with
/// `(-eps^2 laplace + V - phi - V_cut) u_1 = 1`, `W_1 = 1/u_1`.
pub fn density_pl<T: Scalar>(
    v: &ScalarField<T>,
    phi: &ScalarField<T>,
    thermo: &ThermoState<T>,
    scheme: Scheme,
) -> Result<ScalarField<T>> {
    let v_eff = v.zip(phi, |vi, pi| vi - pi - thermo.v_cut)?;
    let ls = solve_landscape(&v_eff, cast::<T>(LANDSCAPE_TOL), scheme)?;
    let grid = *v.grid();
    let d = grid.dim();
    let eps = grid.eps();
    let mut rho = Vec::with_capacity(grid.len());
    for &w in ls.w.values() {
        rho.push(fermi_integral(
            w + thermo.v_cut - thermo.mu,
            thermo.beta,
            eps,
            d,
        )?);
    }
    ScalarField::new(grid, rho)
}

/// Cached phi-independent landscape for the `Lsc` density map: repeated
/// calls with the same `(grid, V, V_cut)` reuse one landscape solve.
#[derive(Debug, Clone)]
pub struct LscDensity<T: Scalar> {
    w2: ScalarField<T>,
    v_cut: T,
}

impl<T: Scalar> LscDensity<T> {
    pub fn new(v: &ScalarField<T>, v_cut: T, scheme: Scheme) -> Result<Self> {
        let v_eff = v.map(|vi| vi - v_cut);
        let ls = solve_landscape(&v_eff, cast::<T>(LANDSCAPE_TOL), scheme)?;
        Ok(LscDensity { w2: ls.w, v_cut })
    }

    /// The cached landscape potential `W_2`.
    pub fn w2(&self) -> &ScalarField<T> {
        &self.w2
    }

    pub fn v_cut(&self) -> T {
        self.v_cut
    }

    /// `rho(x) = fermi_integral(W_2(x) - phi(x) + V_cut - mu)`.
    pub fn density(&self, phi: &ScalarField<T>, beta: T, mu: T) -> Result<ScalarField<T>> {
        let grid = *self.w2.grid();
        let d = grid.dim();
        let eps = grid.eps();
        let arg = self.w2.zip(phi, |w, p| w - p + self.v_cut - mu)?;
        let mut rho = Vec::with_capacity(grid.len());
        for &a in arg.values() {
            rho.push(fermi_integral(a, beta, eps, d)?);
        }
        ScalarField::new(grid, rho)
    }
}

/// One-shot `Lsc` density; build an [`LscDensity`] instead when `phi`
/// changes across calls.
pub fn density_lsc<T: Scalar>(
    v: &ScalarField<T>,
    phi: &ScalarField<T>,
    thermo: &ThermoState<T>,
    scheme: Scheme,
) -> Result<ScalarField<T>> {
    LscDensity::new(v, thermo.v_cut, scheme)?.density(phi, thermo.beta, thermo.mu)
}
