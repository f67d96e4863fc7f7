//! Piecewise-constant random potentials on integer unit cells, dopant
//! profiles, cut-level selection, and the parameter-regime diagnostic.
//!
//! Potentials are strictly positive and constant on each unit cube of the
//! period cell, i.e. a fixed realization of an Anderson-type random
//! potential. Generation is driven by ChaCha8, a counter-based generator
//! seeded from a single `u64`; every operation derives its own stream from
//! the user seed (`gen_pw_potential` uses the seed directly, `gen_dopant`
//! uses its own seed argument), so realizations are portable and
//! reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::scalar::{cast, to_f64, Scalar};

/// Per-unit-cell values `omega_j` of a piecewise-constant potential on
/// `[0, L]^d`, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PwPotential<T: Scalar> {
    l: usize,
    d: usize,
    omega: Vec<T>,
    seed: u64,
}

impl<T: Scalar> PwPotential<T> {
    pub fn period(&self) -> usize {
        self.l
    }
    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn omega(&self) -> &[T] {
        &self.omega
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn v_min(&self) -> T {
        self.omega
            .iter()
            .skip(1)
            .fold(self.omega[0], |m, &v| if v < m { v } else { m })
    }
    pub fn v_max(&self) -> T {
        self.omega
            .iter()
            .skip(1)
            .fold(self.omega[0], |m, &v| if v > m { v } else { m })
    }
    /// Spread `delta = V_max - V_min`.
    pub fn delta(&self) -> T {
        self.v_max() - self.v_min()
    }

    /// Build directly from explicit cell values (testing and constant-V runs).
    pub fn from_cells(l: usize, d: usize, omega: Vec<T>, seed: u64) -> Result<Self> {
        if omega.len() != l.pow(d as u32) {
            return Err(Error::BadParam(format!(
                "expected {} cell values, got {}",
                l.pow(d as u32),
                omega.len()
            )));
        }
        if omega.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::BadParam(
                "cell values must be strictly positive".into(),
            ));
        }
        Ok(PwPotential { l, d, omega, seed })
    }
}

/// Draw cell values i.i.d. uniform on `[v_min_target, v_min_target + delta]`,
/// then pin one uniformly chosen cell to the lower endpoint and another to
/// the upper one so the extremes are attained exactly. Pinning is skipped
/// when `delta = 0` or there are fewer than two cells.
pub fn gen_pw_potential<T: Scalar>(
    seed: u64,
    l: usize,
    d: usize,
    v_min_target: T,
    delta: T,
) -> Result<PwPotential<T>> {
    if !(v_min_target > T::zero()) {
        return Err(Error::BadParam("v_min_target must be positive".into()));
    }
    if delta < T::zero() {
        return Err(Error::BadParam("delta must be nonnegative".into()));
    }
    if !(1..=3).contains(&d) {
        return Err(Error::BadDimension(d));
    }
    if l == 0 {
        return Err(Error::BadParam("period L must be positive".into()));
    }
    let cells = l.pow(d as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = to_f64(v_min_target);
    let wid = to_f64(delta);
    let mut omega: Vec<T> = (0..cells)
        .map(|_| cast::<T>(lo + wid * rng.gen::<f64>()))
        .collect();
    if delta > T::zero() && cells >= 2 {
        let i_min = rng.gen_range(0..cells);
        let mut i_max = rng.gen_range(0..cells - 1);
        if i_max >= i_min {
            i_max += 1;
        }
        omega[i_min] = v_min_target;
        omega[i_max] = v_min_target + delta;
    }
    Ok(PwPotential { l, d, omega, seed })
}

/// Sample a cell potential on a grid: `V(x) = omega_{floor(x)}`.
pub fn realize_on_grid<T: Scalar>(
    pw: &PwPotential<T>,
    grid: &GridSpec<T>,
) -> Result<ScalarField<T>> {
    if grid.period() != pw.l || grid.dim() != pw.d {
        return Err(Error::GridMismatch);
    }
    let per_cell = grid.points_per_axis() / pw.l;
    let values = (0..grid.len())
        .map(|idx| {
            let ix = grid.unravel(idx);
            let mut cell = 0usize;
            for axis in 0..pw.d {
                cell = cell * pw.l + ix[axis] / per_cell;
            }
            pw.omega[cell]
        })
        .collect();
    ScalarField::new(*grid, values)
}

/// Cut level below the potential floor: `V_cut = V_min - c_cut * delta^{1/4}`.
///
/// Degenerate (constant) potentials have no intrinsic scale for the cut;
/// callers must supply an explicit level instead.
pub fn select_vcut<T: Scalar>(v: &ScalarField<T>, c_cut: T) -> Result<T> {
    if !(c_cut > T::zero()) {
        return Err(Error::BadParam("c_cut must be positive".into()));
    }
    let v_min = v.min_value();
    let delta = v.max_value() - v_min;
    if !(delta > T::zero()) {
        return Err(Error::DegeneratePotential);
    }
    Ok(v_min - c_cut * delta.powf(cast::<T>(0.25)))
}

/// Dopant density `kappa = kappa0 + amplitude * w` with `w` a mean-zero,
/// band-limited (modes `0 < |m| <= 2`), seeded random field normalized to
/// unit sup norm. The mean is `kappa0` exactly.
pub fn gen_dopant<T: Scalar>(
    grid: &GridSpec<T>,
    kappa0: T,
    amplitude: T,
    seed: u64,
) -> Result<ScalarField<T>> {
    if amplitude < T::zero() {
        return Err(Error::BadParam("amplitude must be nonnegative".into()));
    }
    if amplitude == T::zero() {
        return Ok(ScalarField::constant(*grid, kappa0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // One representative per +/- mode pair, visited in a fixed lexicographic
    // order so the coefficient stream is stable.
    let d = grid.dim();
    let mut reps: Vec<[i64; 3]> = Vec::new();
    for m0 in -2i64..=2 {
        let m1s = if d >= 2 { -2i64..=2 } else { 0..=0 };
        for m1 in m1s {
            let m2s = if d >= 3 { -2i64..=2 } else { 0..=0 };
            for m2 in m2s {
                let m = [m0, m1, m2];
                let norm2 = m.iter().map(|&x| x * x).sum::<i64>();
                if norm2 == 0 || norm2 > 4 {
                    continue;
                }
                // Keep the representative whose first nonzero entry is positive.
                let first = m.iter().find(|&&x| x != 0).copied().unwrap();
                if first > 0 {
                    reps.push(m);
                }
            }
        }
    }
    let coeffs: Vec<(f64, f64)> = reps
        .iter()
        .map(|_| {
            let a = 2.0 * rng.gen::<f64>() - 1.0;
            let b = 2.0 * rng.gen::<f64>() - 1.0;
            (a, b)
        })
        .collect();

    let two_pi_over_l = T::two_pi() / cast::<T>(grid.period() as f64);
    let mut w = ScalarField::from_fn(*grid, |x| {
        let mut acc = T::zero();
        for (m, &(a, b)) in reps.iter().zip(&coeffs) {
            let mut phase = T::zero();
            for (axis, &mi) in m.iter().enumerate().take(d) {
                phase += cast::<T>(mi as f64) * x[axis];
            }
            phase *= two_pi_over_l;
            acc += cast::<T>(a) * phase.cos() + cast::<T>(b) * phase.sin();
        }
        acc
    });
    // Remove the (already tiny) numerical mean, then normalize the sup.
    w = w.project_mean_zero();
    let sup = w.values().iter().fold(T::zero(), |mx, &v| {
        if v.abs() > mx {
            v.abs()
        } else {
            mx
        }
    });
    if sup > T::zero() {
        w = w.scale(T::one() / sup);
    }
    Ok(w.map(|v| kappa0 + amplitude * v))
}

/// Inputs for [`regime_check`]. `mu` is optional: when absent the proxy
/// `mu = v_min - log(eps^-3)/beta` is used for the two density-scale
/// products (that is the bracket value the temperature condition pins).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams<T: Scalar> {
    pub eps: T,
    pub delta: T,
    pub v_min: T,
    pub beta: T,
    /// Lower temperature constant `K < v_min`.
    pub k_temp: T,
    pub kappa0: T,
    /// Operational threshold for "much smaller than" (default 0.2).
    pub ratio_max: T,
    pub mu: Option<T>,
    /// Constant in the density-scale products (default 1).
    pub c_const: T,
}

impl<T: Scalar> RegimeParams<T> {
    pub fn new(eps: T, delta: T, v_min: T, beta: T, k_temp: T, kappa0: T) -> Self {
        RegimeParams {
            eps,
            delta,
            v_min,
            beta,
            k_temp,
            kappa0,
            ratio_max: cast::<T>(0.2),
            mu: None,
            c_const: T::one(),
        }
    }

    /// Coercivity scale `m0 = eps^{delta^{1/4}}`.
    pub fn m0(&self) -> T {
        self.eps.powf(self.delta.powf(cast::<T>(0.25)))
    }
}

/// Diagnostic report; nothing here fails hard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport<T: Scalar> {
    pub eps_over_delta: T,
    pub delta_over_vmin: T,
    /// `log(eps^-3)/beta`, to sit strictly between `K` and `v_min`.
    pub temperature_scale: T,
    pub temperature_ok: bool,
    pub semiclassical_ok: bool,
    pub disorder_ok: bool,
    /// `eps^-3 beta^-3/2 exp(-beta (v_max - mu + C delta))`, wanted <= O(1).
    pub density_scale_upper: T,
    /// `eps^-3 beta^-3/2 exp(-beta (v_min - mu - C delta))`, wanted >= O(1).
    pub density_scale_lower: T,
    pub density_scale_ok: bool,
    pub mu_used: T,
    pub all_ok: bool,
}

/// Check the working-parameter regime: `eps << delta << v_min`, the
/// temperature bracket `K < log(eps^-3)/beta < v_min`, and the two
/// density-scale products. "Much smaller" is `ratio <= ratio_max`; the
/// products pass with the same slack (`upper <= 1/ratio_max`,
/// `lower >= ratio_max`) since their constants are not pinned.
pub fn regime_check<T: Scalar>(p: &RegimeParams<T>) -> RegimeReport<T> {
    let eps_over_delta = p.eps / p.delta;
    let delta_over_vmin = p.delta / p.v_min;
    let temperature_scale = cast::<T>(3.0) * (T::one() / p.eps).ln() / p.beta;
    let temperature_ok = p.k_temp < temperature_scale && temperature_scale < p.v_min;
    let semiclassical_ok = eps_over_delta <= p.ratio_max;
    let disorder_ok = delta_over_vmin <= p.ratio_max;

    let mu_used = p.mu.unwrap_or(p.v_min - temperature_scale);
    let v_max = p.v_min + p.delta;
    let prefactor = p.eps.powi(-3) * p.beta.powf(cast::<T>(-1.5));
    let upper = prefactor * (-p.beta * (v_max - mu_used + p.c_const * p.delta)).exp();
    let lower = prefactor * (-p.beta * (p.v_min - mu_used - p.c_const * p.delta)).exp();
    let density_scale_ok = upper <= T::one() / p.ratio_max && lower >= p.ratio_max;

    RegimeReport {
        eps_over_delta,
        delta_over_vmin,
        temperature_scale,
        temperature_ok,
        semiclassical_ok,
        disorder_ok,
        density_scale_upper: upper,
        density_scale_lower: lower,
        density_scale_ok,
        mu_used,
        all_ok: temperature_ok && semiclassical_ok && disorder_ok && density_scale_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn zero_width_distribution_is_constant() {
        let pw = gen_pw_potential::<f64>(123, 4, 1, 1.0, 0.0).unwrap();
        assert!(pw.omega().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn same_seed_same_draw() {
        let a = gen_pw_potential::<f64>(42, 4, 2, 1.0, 0.3).unwrap();
        let b = gen_pw_potential::<f64>(42, 4, 2, 1.0, 0.3).unwrap();
        assert_eq!(a, b);
        let c = gen_pw_potential::<f64>(43, 4, 2, 1.0, 0.3).unwrap();
        assert_ne!(a.omega(), c.omega());
    }

    #[test]
    fn extremes_are_pinned() {
        let pw = gen_pw_potential::<f64>(7, 4, 1, 1.0, 0.1).unwrap();
        assert_eq!(pw.v_min(), 1.0);
        assert_eq!(pw.v_max(), 1.1);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(matches!(
            gen_pw_potential::<f64>(1, 4, 1, 0.0, 0.1),
            Err(Error::BadParam(_))
        ));
        assert!(matches!(
            gen_pw_potential::<f64>(1, 4, 1, 1.0, -0.1),
            Err(Error::BadParam(_))
        ));
    }

    #[test]
    fn realization_is_cellwise() {
        let pw = PwPotential::from_cells(2, 1, vec![1.0, 1.2], 0).unwrap();
        let grid = build_grid::<f64>(1, 2, 8, 0.1).unwrap();
        let v = realize_on_grid(&pw, &grid).unwrap();
        assert_eq!(&v.values()[..4], &[1.0; 4]);
        assert_eq!(&v.values()[4..], &[1.2; 4]);
    }

    #[test]
    fn realization_values_come_from_cells() {
        let pw = gen_pw_potential::<f64>(11, 3, 2, 0.8, 0.4).unwrap();
        let grid = build_grid::<f64>(2, 3, 12, 0.1).unwrap();
        let v = realize_on_grid(&pw, &grid).unwrap();
        for &x in v.values() {
            assert!(pw.omega().contains(&x));
        }
        assert_eq!(v.max_value(), pw.v_max());
        assert_eq!(v.min_value(), pw.v_min());
    }

    #[test]
    fn vcut_examples() {
        let grid = build_grid::<f64>(1, 2, 8, 0.1).unwrap();
        let pw = PwPotential::from_cells(2, 1, vec![1.0, 1.0016], 0).unwrap();
        let v = realize_on_grid(&pw, &grid).unwrap();
        let vc = select_vcut(&v, 1.0).unwrap();
        assert!((vc - 0.8).abs() < 1e-12);

        let pw = PwPotential::from_cells(2, 1, vec![1.0, 1.0001], 0).unwrap();
        let v = realize_on_grid(&pw, &grid).unwrap();
        let vc = select_vcut(&v, 0.5).unwrap();
        assert!((vc - 0.95).abs() < 1e-12);

        let flat = crate::grid::ScalarField::constant(grid, 2.0);
        assert!(matches!(
            select_vcut(&flat, 1.0),
            Err(Error::DegeneratePotential)
        ));
    }

    #[test]
    fn dopant_mean_and_determinism() {
        let grid = build_grid::<f64>(1, 4, 64, 0.05).unwrap();
        let k = gen_dopant(&grid, 2.5, 0.0, 9).unwrap();
        assert!(k.values().iter().all(|&v| v == 2.5));

        let a = gen_dopant(&grid, 1.0, 0.3, 5).unwrap();
        let b = gen_dopant(&grid, 1.0, 0.3, 5).unwrap();
        assert_eq!(a.values(), b.values());
        assert!((a.mean() - 1.0).abs() < 1e-14);
        // sup-normalized profile: deviation bounded by the amplitude
        assert!(a.values().iter().all(|&v| (v - 1.0).abs() <= 0.3 + 1e-12));
    }

    #[test]
    fn regime_report_arithmetic() {
        // eps=0.01, delta=0.1, v_min=1, beta with log(eps^-3)/beta = 0.5, K=0.3
        let beta = 3.0 * (1.0f64 / 0.01).ln() / 0.5;
        let mut p = RegimeParams::new(0.01, 0.1, 1.0, beta, 0.3, 1.0);
        p.mu = Some(0.5);
        let r = regime_check(&p);
        assert!((r.eps_over_delta - 0.1).abs() < 1e-14);
        assert!((r.delta_over_vmin - 0.1).abs() < 1e-14);
        assert!((r.temperature_scale - 0.5).abs() < 1e-12);
        assert!(r.semiclassical_ok && r.disorder_ok && r.temperature_ok);

        // hand-computed products
        let pref = 0.01f64.powi(-3) * beta.powf(-1.5);
        let upper = pref * (-beta * (1.1 - 0.5 + 0.1)).exp();
        let lower = pref * (-beta * (1.0 - 0.5 - 0.1)).exp();
        assert!((r.density_scale_upper - upper).abs() <= 1e-12 * upper.abs());
        assert!((r.density_scale_lower - lower).abs() <= 1e-12 * lower.abs());
    }

    #[test]
    fn regime_flags_equal_scales() {
        let p = RegimeParams::new(0.1, 0.1, 1.0, 50.0, 0.3, 1.0);
        let r = regime_check(&p);
        assert!(!r.semiclassical_ok);
        assert!(!r.all_ok);
    }
}
