//! Landscape equation solver and the diagnostics built on the landscape
//! potential.
//!
//! For a strictly positive effective potential `v`, the landscape function
//! `u` solves `(-eps^2 laplace + v) u = 1` on the torus; the landscape
//! potential is `W = 1/u`, an effective confining potential whose local
//! minima predict the low eigenvalues of the Hamiltonian. The solver is
//! conjugate gradients preconditioned by `(-eps^2 laplace + mean(v))^{-1}`
//! in Fourier space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{
    gradient_spectral, laplacian_apply, lp_norm, ScalarField, Scheme,
};
use crate::ham;
use crate::scalar::{cast, to_f64, Scalar};

/// Result of a landscape solve.
#[derive(Debug, Clone)]
pub struct LandscapeResult<T: Scalar> {
    /// Landscape function, strictly positive.
    pub u: ScalarField<T>,
    /// Landscape potential `W = 1/u`.
    pub w: ScalarField<T>,
    /// Relative solver residual `||(H u - 1)||_2 / ||1||_2`.
    pub residual: T,
    pub iterations: usize,
}

/// Solve `(-eps^2 laplace + v_eff) u = 1` to relative residual `tol`
/// (default style: 1e-10) and form `W = 1/u`.
///
/// The same discretization scheme should be used here and in the spectral
/// density so model comparisons are not polluted by scheme mismatch.
pub fn solve_landscape<T: Scalar>(
    v_eff: &ScalarField<T>,
    tol: T,
    scheme: Scheme,
) -> Result<LandscapeResult<T>> {
    let min_v = v_eff.min_value();
    if !(min_v > T::zero()) {
        return Err(Error::NonPositivePotential(to_f64(min_v)));
    }
    let grid = *v_eff.grid();
    let rhs = ScalarField::constant(grid, T::one());
    let max_iter = 10 * grid.len();
    let (u, residual, iterations) = ham::pcg_helmholtz(v_eff, &rhs, scheme, tol, max_iter)?;
    let min_u = u.min_value();
    if !(min_u > cast::<T>(1e-300)) {
        // The maximum principle guarantees u > 0 for positive potentials;
        // hitting this means the linear solve went wrong.
        return Err(Error::no_convergence("landscape", iterations, to_f64(min_u)));
    }
    let w = u.map(|ui| T::one() / ui);
    Ok(LandscapeResult {
        u,
        w,
        residual,
        iterations,
    })
}

/// Strict local minima of a field over the periodic `3^d - 1` neighborhood,
/// ascending by value. Plateaus (ties with any neighbor) are excluded:
/// landscape potentials from an actual solve are smooth, so strictness is
/// safe, and it gives a well-defined answer on degenerate data.
pub fn local_minima<T: Scalar>(w: &ScalarField<T>) -> Vec<(T, usize)> {
    let grid = w.grid();
    let n = grid.points_per_axis();
    let d = grid.dim();
    let v = w.values();
    let mut offsets: Vec<[i64; 3]> = Vec::new();
    for o0 in -1i64..=1 {
        let r1 = if d >= 2 { -1i64..=1 } else { 0..=0 };
        for o1 in r1 {
            let r2 = if d >= 3 { -1i64..=1 } else { 0..=0 };
            for o2 in r2 {
                if o0 == 0 && o1 == 0 && o2 == 0 {
                    continue;
                }
                offsets.push([o0, o1, o2]);
            }
        }
    }
    let mut minima: Vec<(T, usize)> = Vec::new();
    'outer: for idx in 0..grid.len() {
        let ix = grid.unravel(idx);
        for off in &offsets {
            let mut jx = [0usize; 3];
            for axis in 0..d {
                let raw = ix[axis] as i64 + off[axis];
                jx[axis] = raw.rem_euclid(n as i64) as usize;
            }
            let j = grid.ravel(&jx[..d]);
            if !(v[idx] < v[j]) {
                continue 'outer;
            }
        }
        minima.push((v[idx], idx));
    }
    minima.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    minima
}

/// `(||grad W||_p, ||laplace W||_p)` with spectral differentiation.
/// `p` must be in `[2, inf]` (non-finite `p` gives sup norms).
pub fn derivative_norms<T: Scalar>(w: &ScalarField<T>, p: T) -> (T, T) {
    debug_assert!(!(p < cast::<T>(2.0)), "derivative_norms expects p >= 2");
    let grads = gradient_spectral(w);
    let grid = *w.grid();
    let mut mag2 = vec![T::zero(); grid.len()];
    for g in &grads {
        for (m, &gi) in mag2.iter_mut().zip(g.values()) {
            *m += gi * gi;
        }
    }
    let grad_mag = ScalarField::new(grid, mag2.into_iter().map(|m| m.sqrt()).collect()).unwrap();
    let lap = laplacian_apply(w, Scheme::Spectral);
    (lp_norm(&grad_mag, p), lp_norm(&lap, p))
}

/// Lowest eigenvalues of the drift form `-eps^2 laplace - 2 u^{-1} eps grad u . eps grad + W`,
/// assembled densely with centered differences. The operator is similar to
/// the Hamiltonian `-eps^2 laplace + v_eff` in the continuum, so its
/// spectrum converges to the Hamiltonian's under refinement; discretization
/// breaks exact isospectrality, and the imaginary residue of the (real but
/// non-symmetric) matrix eigenvalues is reported as a diagnostic.
#[derive(Debug, Clone)]
pub struct ConjugatedSpectrum<T: Scalar> {
    /// Real parts, ascending.
    pub eigenvalues: Vec<T>,
    /// Largest imaginary magnitude among the returned eigenvalues.
    pub max_imag: T,
}

pub fn conjugated_hamiltonian_spectrum<T: Scalar>(
    v_eff: &ScalarField<T>,
    count: usize,
) -> Result<ConjugatedSpectrum<T>> {
    let grid = *v_eff.grid();
    let size = grid.len();
    if size > 4096 {
        return Err(Error::TooLarge { size, limit: 4096 });
    }
    let ls = solve_landscape(v_eff, cast::<T>(1e-12), Scheme::Stencil2)?;
    let eps2 = grid.eps() * grid.eps();
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let two = cast::<T>(2.0);
    let h2 = h * h;

    let mut m = DMatrix::<T>::zeros(size, size);
    let u = ls.u.values();
    for idx in 0..size {
        let ix = grid.unravel(idx);
        m[(idx, idx)] += ls.w.values()[idx];
        for axis in 0..grid.dim() {
            let stride = n.pow((grid.dim() - 1 - axis) as u32);
            let j = ix[axis];
            let jp = if j + 1 == n { 0 } else { j + 1 };
            let jm = if j == 0 { n - 1 } else { j - 1 };
            let base = idx - stride * j;
            let up = base + stride * jp;
            let down = base + stride * jm;
            // -eps^2 laplace
            m[(idx, idx)] += eps2 * two / h2;
            m[(idx, up)] -= eps2 / h2;
            m[(idx, down)] -= eps2 / h2;
            // drift: -2 eps^2 (du/dx_a)/u * d/dx_a with centered differences
            let du = (u[up] - u[down]) / (two * h);
            let coeff = -two * eps2 * du / u[idx];
            m[(idx, up)] += coeff / (two * h);
            m[(idx, down)] -= coeff / (two * h);
        }
    }
    let eig = m.complex_eigenvalues();
    let mut pairs: Vec<(T, T)> = eig.iter().map(|c| (c.re, c.im.abs())).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let take = count.min(pairs.len());
    let eigenvalues = pairs[..take].iter().map(|p| p.0).collect();
    let max_imag = pairs[..take]
        .iter()
        .fold(T::zero(), |mx, p| if p.1 > mx { p.1 } else { mx });
    Ok(ConjugatedSpectrum {
        eigenvalues,
        max_imag,
    })
}
