//! Periodic computational grids, discrete differential operators, Fourier
//! multipliers, Poisson inversion, and the discrete norms used everywhere
//! else in the crate.
//!
//! The domain is the torus `[0, L]^d` sampled with `n` points per axis,
//! spacing `h = L/n`. Fields are stored flat in row-major axis order (axis 0
//! slowest). Wave vectors live on `(2*pi/L) * Z^d`, folded to the symmetric
//! Nyquist range.
//!
//! Conventions used throughout:
//! * "Laplacian" always means the **negative** Laplacian `-laplace`, which is
//!   positive semidefinite and matches the Hamiltonians built on top of it.
//! * The Poisson solve pins the zero mode: the returned potential has mean
//!   zero. The chemical potential carries the constant instead.
//! * Discrete norms carry the volume factor `h^d`, so `lp_norm(f, 2)` and
//!   `sobolev_norm(f, 0)` are quadratures of the continuum integrals and are
//!   stable under grid refinement.
//! * Every reduction runs in a fixed order; identical inputs give
//!   bit-identical outputs.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::{cast, is_finite, to_f64, Scalar};

/// Discretization scheme for the (negative) Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Second-order centered difference, periodic wrap per axis.
    Stencil2,
    /// Exact Fourier multiplier `|k|^2`.
    Spectral,
}

/// Periodic domain `[0, L]^d` with `n` points per axis and semiclassical
/// parameter `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T: Scalar> {
    d: usize,
    l: usize,
    n: usize,
    eps: T,
    h: T,
}

/// Build a grid, validating alignment: `n` must be a positive multiple of
/// `L` so unit-cell boundaries of piecewise-constant potentials land on grid
/// lines.
pub fn build_grid<T: Scalar>(d: usize, l: usize, n: usize, eps: T) -> Result<GridSpec<T>> {
    if !(1..=3).contains(&d) {
        return Err(Error::BadDimension(d));
    }
    if l == 0 {
        return Err(Error::BadParam("period L must be a positive integer".into()));
    }
    if n == 0 || n % l != 0 {
        return Err(Error::NonAlignedGrid { n, l });
    }
    if !(eps > T::zero()) || !is_finite(eps) {
        return Err(Error::BadParam(format!(
            "eps must be positive and finite (got {:e})",
            to_f64(eps)
        )));
    }
    let h = cast::<T>(l as f64) / cast::<T>(n as f64);
    Ok(GridSpec { d, l, n, eps, h })
}

impl<T: Scalar> GridSpec<T> {
    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn period(&self) -> usize {
        self.l
    }
    pub fn points_per_axis(&self) -> usize {
        self.n
    }
    pub fn eps(&self) -> T {
        self.eps
    }
    /// Grid spacing `h = L/n`.
    pub fn spacing(&self) -> T {
        self.h
    }
    /// Total number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Same grid with a different semiclassical parameter.
    pub fn with_eps(&self, eps: T) -> Result<GridSpec<T>> {
        build_grid(self.d, self.l, self.n, eps)
    }
    /// Domain volume `L^d`.
    pub fn volume(&self) -> T {
        cast::<T>((self.l as f64).powi(self.d as i32))
    }
    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> T {
        let mut v = T::one();
        for _ in 0..self.d {
            v *= self.h;
        }
        v
    }

    /// Decompose a flat index into per-axis indices (axis 0 slowest).
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.d).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Flatten per-axis indices.
    pub fn ravel(&self, ix: &[usize]) -> usize {
        let mut idx = 0;
        for axis in 0..self.d {
            idx = idx * self.n + ix[axis] % self.n;
        }
        idx
    }

    /// Physical coordinates of a grid point.
    pub fn position(&self, idx: usize) -> [T; 3] {
        let ix = self.unravel(idx);
        let mut x = [T::zero(); 3];
        for axis in 0..self.d {
            x[axis] = cast::<T>(ix[axis] as f64) * self.h;
        }
        x
    }
}

/// Real periodic function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T: Scalar> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    /// Wrap raw values; length must be `n^d` and every entry finite.
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BadParam(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|&v| !is_finite(v)) {
            return Err(Error::BadParam("field contains non-finite entries".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: GridSpec<T>, c: T) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut(&[T]) -> T) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                f(&x[..grid.dim()])
            })
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }
    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }
    pub fn shift(&self, s: T) -> Self {
        self.map(|v| v + s)
    }

    pub fn mean(&self) -> T {
        let sum = self.values.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / cast::<T>(self.len() as f64)
    }

    pub fn min_value(&self) -> T {
        self.values
            .iter()
            .skip(1)
            .fold(self.values[0], |m, &v| if v < m { v } else { m })
    }

    pub fn max_value(&self) -> T {
        self.values
            .iter()
            .skip(1)
            .fold(self.values[0], |m, &v| if v > m { v } else { m })
    }

    /// Subtract the mean (the gauge used for electric potentials).
    pub fn project_mean_zero(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }
}

/// Wave vectors of the discrete Fourier basis, folded to the symmetric
/// Nyquist range, with `|k|^2` per mode. The flat mode index matches the
/// field layout.
#[derive(Debug, Clone)]
pub struct FourierModeTable<T: Scalar> {
    grid: GridSpec<T>,
    /// Integer mode index per axis (folded; unused axes stay 0).
    pub modes: Vec<[i64; 3]>,
    /// Wave vector components `2*pi*m/L`.
    pub k: Vec<[T; 3]>,
    /// `|k|^2` per mode.
    pub k2: Vec<T>,
}

impl<T: Scalar> FourierModeTable<T> {
    pub fn new(grid: &GridSpec<T>) -> Self {
        let n = grid.n as i64;
        let scale = T::two_pi() / cast::<T>(grid.l as f64);
        let total = grid.len();
        let mut modes = Vec::with_capacity(total);
        let mut k = Vec::with_capacity(total);
        let mut k2 = Vec::with_capacity(total);
        for idx in 0..total {
            let ix = grid.unravel(idx);
            let mut m = [0i64; 3];
            let mut kv = [T::zero(); 3];
            let mut sq = T::zero();
            for axis in 0..grid.d {
                let j = ix[axis] as i64;
                let folded = if j <= n / 2 { j } else { j - n };
                m[axis] = folded;
                kv[axis] = scale * cast::<T>(folded as f64);
                sq += kv[axis] * kv[axis];
            }
            modes.push(m);
            k.push(kv);
            k2.push(sq);
        }
        FourierModeTable {
            grid: *grid,
            modes,
            k,
            k2,
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// Eigenvalues of the discrete negative Laplacian for a scheme, indexed
    /// like the modes. For `Stencil2` this is `sum_j (2 - 2 cos(k_j h))/h^2`.
    pub fn neg_laplacian_symbol(&self, scheme: Scheme) -> Vec<T> {
        match scheme {
            Scheme::Spectral => self.k2.clone(),
            Scheme::Stencil2 => {
                let h = self.grid.h;
                let h2 = h * h;
                let two = cast::<T>(2.0);
                self.k
                    .iter()
                    .map(|kv| {
                        let mut s = T::zero();
                        for axis in 0..self.grid.d {
                            s += (two - two * (kv[axis] * h).cos()) / h2;
                        }
                        s
                    })
                    .collect()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// FFT plumbing
// ---------------------------------------------------------------------------

/// Forward DFT of a real field, unnormalized (`X_k = sum_x f(x) e^{-ikx}`).
pub(crate) fn forward_fft<T: Scalar>(grid: &GridSpec<T>, values: &[T]) -> Vec<Complex<T>> {
    let mut data: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft_all_axes(grid, &mut data, rustfft::FftDirection::Forward);
    data
}

/// Inverse DFT back to a real field. Returns the real part and the largest
/// imaginary residue (diagnostic for conjugate-symmetry contamination).
pub(crate) fn inverse_fft_real<T: Scalar>(
    grid: &GridSpec<T>,
    mut data: Vec<Complex<T>>,
) -> (Vec<T>, T) {
    fft_all_axes(grid, &mut data, rustfft::FftDirection::Inverse);
    let norm = cast::<T>(grid.len() as f64);
    let mut max_imag = T::zero();
    let values = data
        .iter()
        .map(|c| {
            let im = c.im.abs() / norm;
            if im > max_imag {
                max_imag = im;
            }
            c.re / norm
        })
        .collect();
    (values, max_imag)
}

fn fft_all_axes<T: Scalar>(
    grid: &GridSpec<T>,
    data: &mut [Complex<T>],
    direction: rustfft::FftDirection,
) {
    let n = grid.n;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(n, direction);
    let mut line = vec![Complex::new(T::zero(), T::zero()); n];
    let total = grid.len();
    for axis in 0..grid.d {
        let stride = n.pow((grid.d - 1 - axis) as u32);
        let block = stride * n;
        let mut outer = 0;
        while outer < total {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, &v) in line.iter().enumerate() {
                    data[base + j * stride] = v;
                }
            }
            outer += block;
        }
    }
}

/// Apply a real Fourier multiplier `m(k)` to a field. Returns the resulting
/// field and the imaginary contamination diagnostic.
pub(crate) fn apply_real_multiplier<T: Scalar>(
    f: &ScalarField<T>,
    multiplier: &[T],
) -> (ScalarField<T>, T) {
    let grid = *f.grid();
    let mut spec = forward_fft(&grid, f.values());
    for (c, &m) in spec.iter_mut().zip(multiplier) {
        *c = Complex::new(c.re * m, c.im * m);
    }
    let (values, imag) = inverse_fft_real(&grid, spec);
    (ScalarField { grid, values }, imag)
}

/// Largest imaginary residue of a forward/inverse FFT round trip, relative
/// to nothing (absolute). Real pipelines should keep this near machine eps.
pub fn spectral_imag_residual<T: Scalar>(f: &ScalarField<T>) -> T {
    let spec = forward_fft(f.grid(), f.values());
    let (_, imag) = inverse_fft_real(f.grid(), spec);
    imag
}

// ---------------------------------------------------------------------------
// Differential operators
// ---------------------------------------------------------------------------

/// Negative Laplacian `-laplace f` with the chosen scheme.
pub fn laplacian_apply<T: Scalar>(f: &ScalarField<T>, scheme: Scheme) -> ScalarField<T> {
    match scheme {
        Scheme::Stencil2 => {
            let grid = *f.grid();
            let n = grid.n;
            let h2 = grid.h * grid.h;
            let two = cast::<T>(2.0);
            let v = f.values();
            let mut out = vec![T::zero(); v.len()];
            for (idx, slot) in out.iter_mut().enumerate() {
                let ix = grid.unravel(idx);
                let mut acc = T::zero();
                for axis in 0..grid.d {
                    let stride = n.pow((grid.d - 1 - axis) as u32);
                    let j = ix[axis];
                    let jp = if j + 1 == n { 0 } else { j + 1 };
                    let jm = if j == 0 { n - 1 } else { j - 1 };
                    let base = idx - stride * j;
                    acc += (two * v[idx] - v[base + stride * jp] - v[base + stride * jm]) / h2;
                }
                *slot = acc;
            }
            ScalarField { grid, values: out }
        }
        Scheme::Spectral => {
            let table = FourierModeTable::new(f.grid());
            apply_real_multiplier(f, &table.k2).0
        }
    }
}

/// Spectral gradient: one field per axis, `(df/dx_a)`. Odd-derivative
/// multipliers zero the unpaired Nyquist mode on even grids.
pub fn gradient_spectral<T: Scalar>(f: &ScalarField<T>) -> Vec<ScalarField<T>> {
    let grid = *f.grid();
    let table = FourierModeTable::new(&grid);
    let spec = forward_fft(&grid, f.values());
    let n = grid.n as i64;
    let mut out = Vec::with_capacity(grid.d);
    for axis in 0..grid.d {
        let mut comp = spec.clone();
        for (c, (m, kv)) in comp.iter_mut().zip(table.modes.iter().zip(&table.k)) {
            let k = if n % 2 == 0 && m[axis].abs() == n / 2 {
                T::zero()
            } else {
                kv[axis]
            };
            // multiply by i*k
            *c = Complex::new(-c.im * k, c.re * k);
        }
        let (values, _) = inverse_fft_real(&grid, comp);
        out.push(ScalarField { grid, values });
    }
    out
}

// ---------------------------------------------------------------------------
// Poisson inversion
// ---------------------------------------------------------------------------

/// Neutrality tolerance used by [`poisson_solve`]: `1e-10 * ||g||_2 + 1e-14`.
pub fn neutrality_tolerance<T: Scalar>(g: &ScalarField<T>) -> T {
    cast::<T>(1e-10) * lp_norm(g, cast::<T>(2.0)) + cast::<T>(1e-14)
}

/// Solve `-laplace phi = g` for the unique mean-zero `phi` by spectral
/// inversion. The source must have (numerically) zero mean.
pub fn poisson_solve<T: Scalar>(g: &ScalarField<T>) -> Result<ScalarField<T>> {
    let tol = neutrality_tolerance(g);
    let mean = g.mean();
    if mean.abs() > tol {
        return Err(Error::NonNeutralSource {
            mean: to_f64(mean),
            tol: to_f64(tol),
        });
    }
    Ok(poisson_solve_projected(g))
}

/// Poisson inversion that silently drops the zero mode of the source.
/// Callers balance charge separately; the SCF loop uses this after its
/// chemical-potential solve has already pinned the mean.
pub(crate) fn poisson_solve_projected<T: Scalar>(g: &ScalarField<T>) -> ScalarField<T> {
    let grid = *g.grid();
    let table = FourierModeTable::new(&grid);
    let mut spec = forward_fft(&grid, g.values());
    for (c, &k2) in spec.iter_mut().zip(&table.k2) {
        if k2 > T::zero() {
            *c = Complex::new(c.re / k2, c.im / k2);
        } else {
            *c = Complex::new(T::zero(), T::zero());
        }
    }
    let (values, _) = inverse_fft_real(&grid, spec);
    ScalarField { grid, values }
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

/// Discrete `L^p` norm `(sum |f|^p h^d)^{1/p}`; a non-finite `p` gives the
/// sup norm. Requires `p >= 1`.
pub fn lp_norm<T: Scalar>(f: &ScalarField<T>, p: T) -> T {
    if !is_finite(p) {
        return f
            .values()
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m });
    }
    debug_assert!(p >= T::one(), "lp_norm requires p >= 1");
    let hd = f.grid().cell_volume();
    let two = cast::<T>(2.0);
    if p == two {
        let s = f.values().iter().fold(T::zero(), |acc, &v| acc + v * v);
        return (s * hd).sqrt();
    }
    let s = f
        .values()
        .iter()
        .fold(T::zero(), |acc, &v| acc + v.abs().powf(p));
    (s * hd).powf(T::one() / p)
}

/// Sobolev `H^s` norm from the Fourier coefficients:
/// `||f||_{H^s}^2 = L^d sum_k (1+|k|^2)^s |a_k|^2`, normalized so that `s=0`
/// reproduces the `L^2` quadrature norm. Negative `s` is allowed.
pub fn sobolev_norm<T: Scalar>(f: &ScalarField<T>, s: T) -> T {
    weighted_mode_norm(f, |k2| (T::one() + k2).powf(s), false)
}

/// Homogeneous variant: zero mode omitted, weight `|k|^{2s}`.
pub fn homogeneous_sobolev_norm<T: Scalar>(f: &ScalarField<T>, s: T) -> T {
    weighted_mode_norm(f, |k2| k2.powf(s), true)
}

fn weighted_mode_norm<T: Scalar>(
    f: &ScalarField<T>,
    weight: impl Fn(T) -> T,
    skip_zero: bool,
) -> T {
    let grid = f.grid();
    let table = FourierModeTable::new(grid);
    let spec = forward_fft(grid, f.values());
    let inv_total = T::one() / cast::<T>(grid.len() as f64);
    let mut acc = T::zero();
    for (c, &k2) in spec.iter().zip(&table.k2) {
        if skip_zero && !(k2 > T::zero()) {
            continue;
        }
        let a_re = c.re * inv_total;
        let a_im = c.im * inv_total;
        acc += weight(k2) * (a_re * a_re + a_im * a_im);
    }
    (acc * grid.volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> GridSpec<f64> {
        build_grid(1, 4, n, 0.05).unwrap()
    }

    #[test]
    fn build_grid_examples() {
        let g = build_grid::<f64>(1, 4, 64, 0.05).unwrap();
        assert_eq!(g.spacing(), 0.0625);
        let g = build_grid::<f64>(3, 2, 16, 0.1).unwrap();
        assert_eq!(g.spacing(), 0.125);
        assert!(matches!(
            build_grid::<f64>(1, 4, 63, 0.05),
            Err(Error::NonAlignedGrid { .. })
        ));
        assert!(matches!(
            build_grid::<f64>(4, 4, 64, 0.05),
            Err(Error::BadDimension(4))
        ));
        assert!(matches!(
            build_grid::<f64>(1, 4, 64, 0.0),
            Err(Error::BadParam(_))
        ));
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = grid1(32);
        let f = ScalarField::constant(g, 3.25);
        for scheme in [Scheme::Stencil2, Scheme::Spectral] {
            let lf = laplacian_apply(&f, scheme);
            for &v in lf.values() {
                assert!(v.abs() < 1e-12, "got {v}");
            }
        }
    }

    #[test]
    fn stencil_eigenfield() {
        let g = grid1(64);
        let l = g.period() as f64;
        let f = ScalarField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x[0] / l).cos());
        let lf = laplacian_apply(&f, Scheme::Stencil2);
        let h = g.spacing();
        let lam = (2.0 - 2.0 * (2.0 * std::f64::consts::PI * h / l).cos()) / (h * h);
        for (a, b) in lf.values().iter().zip(f.values()) {
            assert!((a - lam * b).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_single_mode() {
        let g = grid1(64);
        let l = g.period() as f64;
        let k = 2.0 * std::f64::consts::PI / l;
        let f = ScalarField::from_fn(g, |x| (k * x[0]).cos());
        let phi = poisson_solve(&f).unwrap();
        for (idx, &v) in phi.values().iter().enumerate() {
            let x = g.position(idx)[0];
            assert!((v - (x * k).cos() / (k * k)).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_rejects_charged_source() {
        let g = grid1(32);
        let f = ScalarField::constant(g, 1.0);
        assert!(matches!(
            poisson_solve(&f),
            Err(Error::NonNeutralSource { .. })
        ));
        let zero = ScalarField::zeros(g);
        let phi = poisson_solve(&zero).unwrap();
        assert!(phi.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn norms_of_constants() {
        let g = build_grid::<f64>(2, 3, 12, 0.1).unwrap();
        let c = 1.75;
        let f = ScalarField::constant(g, c);
        let vol: f64 = 9.0;
        assert!((lp_norm(&f, 2.0) - c * vol.sqrt()).abs() < 1e-12);
        assert!((lp_norm(&f, f64::INFINITY) - c).abs() < 1e-15);
        assert!((sobolev_norm(&f, 0.0) - c * vol.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_mode_sobolev_ratio() {
        let g = grid1(64);
        let l = g.period() as f64;
        let k = 2.0 * std::f64::consts::PI / l;
        let f = ScalarField::from_fn(g, |x| (k * x[0]).cos());
        let h1 = sobolev_norm(&f, 1.0);
        let l2 = sobolev_norm(&f, 0.0);
        let ratio = (h1 / l2).powi(2);
        assert!((ratio - (1.0 + k * k)).abs() < 1e-10, "ratio {ratio}");
    }

    #[test]
    fn mean_zero_projection() {
        let g = grid1(16);
        let f = ScalarField::from_fn(g, |x| x[0] * x[0] + 0.3);
        let p = f.project_mean_zero();
        assert!(p.mean().abs() < 1e-14);
    }

    #[test]
    fn unravel_ravel_round_trip() {
        let g = build_grid::<f64>(3, 2, 6, 0.1).unwrap();
        for idx in 0..g.len() {
            let ix = g.unravel(idx);
            assert_eq!(g.ravel(&ix[..3]), idx);
        }
    }
}
