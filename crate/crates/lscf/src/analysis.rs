//! Spectral predictors built on the landscape potential, the semiclassical
//! linearization multiplier with its mode-wise lower bound, cross-model
//! epsilon sweeps, and counting-function comparisons.

use num_complex::Complex;

use crate::density::fermi_dirac;
use crate::error::{Error, Result};
use crate::grid::{
    forward_fft, inverse_fft_real, lp_norm, sobolev_norm, FourierModeTable, GridSpec, ScalarField,
    Scheme,
};
use crate::ham;
use crate::landscape::{derivative_norms, local_minima, solve_landscape};
use crate::potential::{gen_dopant, realize_on_grid, select_vcut, PwPotential};
use crate::quad;
use crate::scalar::{cast, to_f64, Scalar};
use crate::scf::{Model, ScfOptions, ScfProblem, ScfState};

/// Eigenvalue predictions `(1 + d/4) * W_i` from the first `count` local
/// minima of the landscape potential (fewer if fewer minima exist).
pub fn predict_eigenvalues<T: Scalar>(w: &ScalarField<T>, count: usize) -> Vec<T> {
    let d = w.grid().dim();
    let factor = T::one() + cast::<T>(d as f64) / cast::<T>(4.0);
    local_minima(w)
        .into_iter()
        .take(count)
        .map(|(wi, _)| factor * wi)
        .collect()
}

/// Lowest `count` eigenvalues of `-eps^2 laplace + v_eff`, ascending.
pub fn exact_eigenvalues<T: Scalar>(
    v_eff: &ScalarField<T>,
    count: usize,
    scheme: Scheme,
) -> Result<Vec<T>> {
    let grid = *v_eff.grid();
    let size = grid.len();
    if size <= 4096 {
        let m = ham::dense_hamiltonian(v_eff, scheme, 4096)?;
        let (vals, _) = ham::dense_eigenpairs(m);
        Ok(vals.into_iter().take(count).collect())
    } else {
        let (vals, _) = ham::lanczos_lowest(
            size,
            |x| {
                let xf = ScalarField::new(grid, x.to_vec()).unwrap();
                ham::apply_hamiltonian(v_eff, &xf, scheme).values().to_vec()
            },
            cast::<T>(1e-10),
            size,
            |converged: &[T]| converged.len() >= count,
        )?;
        if vals.len() < count {
            return Err(Error::no_convergence("eigenvalue count", vals.len(), f64::NAN));
        }
        Ok(vals.into_iter().take(count).collect())
    }
}

fn ball_volume_coeff<T: Scalar>(d: usize) -> T {
    match d {
        1 => cast::<T>(2.0),
        2 => T::pi(),
        3 => cast::<T>(4.0) * T::pi() / cast::<T>(3.0),
        _ => unreachable!(),
    }
}

/// Phase-space counting prediction for the number of eigenvalues below `E`:
/// `(2 pi eps)^{-d} * omega_d * sum_x max(0, E - W(x))^{d/2} h^d`,
/// nonnegative and nondecreasing in `E`.
pub fn counting_function_landscape<T: Scalar>(w: &ScalarField<T>, e: T, eps: T, d: usize) -> T {
    let grid = w.grid();
    let half_d = cast::<T>(d as f64) * cast::<T>(0.5);
    let sum = w.values().iter().fold(T::zero(), |acc, &wx| {
        let gap = e - wx;
        if gap > T::zero() {
            acc + gap.powf(half_d)
        } else {
            acc
        }
    });
    (T::two_pi() * eps).powi(-(d as i32)) * ball_volume_coeff::<T>(d) * sum * grid.cell_volume()
}

/// One row of [`compare_counting`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingRow<T: Scalar> {
    pub e: T,
    /// Exact count of Hamiltonian eigenvalues at or below `e`.
    pub n_exact: T,
    /// Landscape counting prediction.
    pub n_landscape: T,
    /// Phase-space count with the bare potential in place of `W`.
    pub n_bare_weyl: T,
}

/// Eigenvalue-counting comparison on a dense-solvable grid: exact counts of
/// `H = -eps^2 laplace + V - phi` against the landscape prediction and bare
/// phase-space counting.
pub fn compare_counting<T: Scalar>(
    v: &ScalarField<T>,
    phi: &ScalarField<T>,
    e_list: &[T],
    scheme: Scheme,
) -> Result<Vec<CountingRow<T>>> {
    let v_eff = v.sub(phi)?;
    let grid = *v.grid();
    let eps = grid.eps();
    let d = grid.dim();
    let ls = solve_landscape(&v_eff, cast::<T>(1e-10), scheme)?;
    let eigs = exact_eigenvalues(&v_eff, grid.len(), scheme)?;
    let mut rows = Vec::with_capacity(e_list.len());
    for &e in e_list {
        let n_exact = cast::<T>(eigs.iter().filter(|&&lam| lam <= e).count() as f64);
        rows.push(CountingRow {
            e,
            n_exact,
            n_landscape: counting_function_landscape(&ls.w, e, eps, d),
            n_bare_weyl: counting_function_landscape(&v_eff, e, eps, d),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Semiclassical linearization multiplier
// ---------------------------------------------------------------------------

/// Weight data for [`msc_apply`]: landscape potential `W` of the shifted
/// phi-independent Hamiltonian, base potential `phi0`, cut level, chemical
/// potential, and inverse temperature.
#[derive(Debug, Clone, Copy)]
pub struct MscWeight<'a, T: Scalar> {
    pub w: &'a ScalarField<T>,
    pub phi0: &'a ScalarField<T>,
    pub v_cut: T,
    pub mu: T,
    pub beta: T,
}

/// `G(x) = x log|(x+1)/(x-1)|`, the mode profile of the multiplier.
/// Nonnegative for `x >= 0`; `G(0) = 0`, `G(inf) = 2`.
pub fn multiplier_profile<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        return T::zero();
    }
    let num = (x + T::one()).abs().max(cast::<T>(1e-300));
    let den = (x - T::one()).abs().max(cast::<T>(1e-300));
    x * (num / den).ln()
}

/// Apply the semiclassical linearization operator
/// `f -> (8 pi^2 eps^3)^{-1} int_0^inf f_FD(beta(t + W + V_cut - phi0 - mu))
///        [multiplier_t f] dt`,
/// where `multiplier_t` acts in Fourier space as
/// `(1/|eps k|) log|(sqrt(4t)+|eps k|)/(sqrt(4t)-|eps k|)|` with the value
/// `1/sqrt(t)` on the zero mode. The pointwise Fermi weight is applied
/// after each multiplier application. The `t` integral runs adaptively to
/// relative tolerance `rel_tol`; quadrature nodes are nudged off the
/// integrable log singularities `sqrt(4t) = |eps k|`.
pub fn msc_apply<T: Scalar>(
    args: &MscWeight<'_, T>,
    f: &ScalarField<T>,
    rel_tol: T,
) -> Result<ScalarField<T>> {
    let grid = *f.grid();
    if args.w.grid() != &grid || args.phi0.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let eps = grid.eps();
    let table = FourierModeTable::new(&grid);
    // |eps k| per mode and the set of singular t values p^2/4.
    let p_mag: Vec<T> = table.k2.iter().map(|&k2| eps * k2.sqrt()).collect();
    let a_field: Vec<T> = args
        .w
        .values()
        .iter()
        .zip(args.phi0.values())
        .map(|(&w, &p)| w + args.v_cut - p - args.mu)
        .collect();
    let a_min = a_field
        .iter()
        .skip(1)
        .fold(a_field[0], |m, &v| if v < m { v } else { m });
    let forty = cast::<T>(40.0);
    let t_max = if a_min < T::zero() { -a_min } else { T::zero() } + forty / args.beta;

    let mut singular: Vec<T> = p_mag
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| p * p / cast::<T>(4.0))
        .filter(|&t| t < t_max)
        .collect();
    singular.sort_by(|a, b| a.partial_cmp(b).unwrap());
    singular.dedup_by(|a, b| (*a - *b).abs() <= cast::<T>(1e-14) * (*a + *b).abs());

    let spec_f = forward_fft(&grid, f.values());
    let nudge = T::one() + cast::<T>(1e-10);
    let evaluate = |t_raw: T| -> Vec<T> {
        // Nudge off exact multiplier singularities.
        let mut t = t_raw;
        let root = (cast::<T>(4.0) * t).sqrt();
        if p_mag
            .iter()
            .any(|&p| p > T::zero() && (root - p).abs() <= cast::<T>(1e-13) * p)
        {
            t *= nudge;
        }
        let root = (cast::<T>(4.0) * t).sqrt();
        let mut spec: Vec<Complex<T>> = spec_f.clone();
        for (c, &p) in spec.iter_mut().zip(&p_mag) {
            // (1/p) log|(root+p)/(root-p)| = G(root/p)/root; G -> 2 at the
            // zero mode gives 1/sqrt(t).
            let m = if p > T::zero() {
                multiplier_profile(root / p) / root
            } else {
                T::one() / t.sqrt()
            };
            *c = Complex::new(c.re * m, c.im * m);
        }
        let (g, _) = inverse_fft_real(&grid, spec);
        g.iter()
            .zip(&a_field)
            .map(|(&gx, &ax)| fermi_dirac(args.beta * (t + ax)) * gx)
            .collect()
    };

    let total = vector_adaptive(&grid, evaluate, T::zero(), t_max, rel_tol, 2000, &singular)?;
    let pref = T::one() / (cast::<T>(8.0) * T::pi() * T::pi() * eps.powi(3));
    ScalarField::new(grid, total.into_iter().map(|v| v * pref).collect())
}

/// Adaptive panel integration of a vector-valued integrand; error measured
/// in the discrete L2 norm. Same refinement policy as the scalar version.
fn vector_adaptive<T: Scalar>(
    grid: &GridSpec<T>,
    mut f: impl FnMut(T) -> Vec<T>,
    a: T,
    b: T,
    rel_tol: T,
    max_panels: usize,
    splits: &[T],
) -> Result<Vec<T>> {
    let n = grid.len();
    let coarse = quad::GaussLegendre::<T>::new(7);
    let fine = quad::GaussLegendre::<T>::new(15);
    struct VPanel<T> {
        a: T,
        b: T,
        value: Vec<T>,
        error: T,
    }
    let norm = |v: &[T]| -> T { v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt() };
    let make = |lo: T, hi: T, f: &mut dyn FnMut(T) -> Vec<T>| -> VPanel<T> {
        let mut v7 = vec![T::zero(); n];
        for (t, w) in coarse.mapped(lo, hi) {
            let ft = f(t);
            for (acc, &x) in v7.iter_mut().zip(&ft) {
                *acc += w * x;
            }
        }
        let mut v15 = vec![T::zero(); n];
        for (t, w) in fine.mapped(lo, hi) {
            let ft = f(t);
            for (acc, &x) in v15.iter_mut().zip(&ft) {
                *acc += w * x;
            }
        }
        let diff: Vec<T> = v15.iter().zip(&v7).map(|(&x, &y)| x - y).collect();
        VPanel {
            a: lo,
            b: hi,
            error: norm(&diff),
            value: v15,
        }
    };

    let mut bounds = Vec::with_capacity(splits.len() + 2);
    bounds.push(a);
    for &s in splits {
        if s > a && s < b {
            bounds.push(s);
        }
    }
    bounds.push(b);
    bounds.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut panels: Vec<VPanel<T>> = Vec::new();
    for w in bounds.windows(2) {
        if w[1] > w[0] {
            panels.push(make(w[0], w[1], &mut f));
        }
    }

    loop {
        let mut total = vec![T::zero(); n];
        for p in &panels {
            for (acc, &x) in total.iter_mut().zip(&p.value) {
                *acc += x;
            }
        }
        let err: T = panels.iter().fold(T::zero(), |acc, p| acc + p.error);
        if err <= rel_tol * norm(&total) + cast::<T>(1e-300) {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(Error::QuadratureFailure {
                tol: to_f64(rel_tol),
                estimate: to_f64(err),
            });
        }
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            if p.error > panels[worst].error {
                worst = i;
            }
        }
        let (lo, hi) = (panels[worst].a, panels[worst].b);
        let mid = (lo + hi) * cast::<T>(0.5);
        if !(mid > lo && mid < hi) {
            let mut total = vec![T::zero(); n];
            for p in &panels {
                for (acc, &x) in total.iter_mut().zip(&p.value) {
                    *acc += x;
                }
            }
            return Ok(total);
        }
        let left = make(lo, mid, &mut f);
        let right = make(mid, hi, &mut f);
        panels[worst] = left;
        panels.push(right);
    }
}

/// Result of the mode-wise lower-bound check on the multiplier integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MscBoundCheck<T: Scalar> {
    /// `int_0^inf e^{-t beta} (4t)^{-1/2} G(sqrt(4t)/(eps k)) dt` by quadrature.
    pub lhs: T,
    /// `1 / (2 sqrt(beta) (1 + beta eps^2 k^2))`, the closed-form bound.
    pub rhs: T,
    pub pass: bool,
}

/// Verify `lhs >= rhs` for one Fourier mode magnitude. At `k = 0` the
/// integrand uses the zero-mode convention `G -> 2`, giving the closed form
/// `sqrt(pi/beta)`.
pub fn check_msc_lower_bound<T: Scalar>(k_mag: T, beta: T, eps: T) -> Result<MscBoundCheck<T>> {
    if k_mag < T::zero() || !(beta > T::zero()) || !(eps > T::zero()) {
        return Err(Error::BadParam(
            "k must be nonnegative, beta and eps positive".into(),
        ));
    }
    let p = eps * k_mag;
    let four = cast::<T>(4.0);
    let t_star = p * p / four;
    let t_max = t_star + cast::<T>(80.0) / beta;
    let integrand = |t: T| -> T {
        if t <= T::zero() {
            return T::zero();
        }
        let root = (four * t).sqrt();
        let g = if p > T::zero() {
            multiplier_profile(root / p)
        } else {
            cast::<T>(2.0)
        };
        (-t * beta).exp() * g / root
    };
    let splits = if t_star > T::zero() { vec![t_star] } else { vec![] };
    let lhs = quad::adaptive(integrand, T::zero(), t_max, cast::<T>(1e-10), 20000, &splits)?;
    let rhs = T::one() / (cast::<T>(2.0) * beta.sqrt() * (T::one() + beta * p * p));
    let pass = lhs >= rhs * (T::one() - cast::<T>(1e-8));
    Ok(MscBoundCheck { lhs, rhs, pass })
}

// ---------------------------------------------------------------------------
// Epsilon sweeps
// ---------------------------------------------------------------------------

/// Cross-model and landscape metrics recorded per sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    /// `||phi_X - phi_Y||_{H^2}`.
    PhiDiffH2(Model, Model),
    /// `||rho_X - rho_Y||_{L^2}`.
    RhoDiffL2(Model, Model),
    /// `||grad W||_{L^2}` of the bare-potential landscape.
    GradWL2,
    /// `||laplace W||_{L^2}` of the bare-potential landscape.
    LapWL2,
}

impl SweepMetric {
    pub fn name(&self) -> String {
        match self {
            SweepMetric::PhiDiffH2(a, b) => format!("phi_h2_{}_{}", a.name(), b.name()),
            SweepMetric::RhoDiffL2(a, b) => format!("rho_l2_{}_{}", a.name(), b.name()),
            SweepMetric::GradWL2 => "grad_w_l2".into(),
            SweepMetric::LapWL2 => "lap_w_l2".into(),
        }
    }

    /// Parse `phi_h2_rehf_lsc`, `rho_l2_pl_lsc`, `grad_w_l2`, `lap_w_l2`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "grad_w_l2" => return Ok(SweepMetric::GradWL2),
            "lap_w_l2" => return Ok(SweepMetric::LapWL2),
            _ => {}
        }
        let parts: Vec<&str> = s.split('_').collect();
        if parts.len() == 4 && (parts[0] == "phi" || parts[0] == "rho") {
            let a: Model = parts[2].parse()?;
            let b: Model = parts[3].parse()?;
            return match (parts[0], parts[1]) {
                ("phi", "h2") => Ok(SweepMetric::PhiDiffH2(a, b)),
                ("rho", "l2") => Ok(SweepMetric::RhoDiffL2(a, b)),
                _ => Err(format!("unknown metric '{s}'")),
            };
        }
        Err(format!("unknown metric '{s}'"))
    }

    fn models(&self) -> Vec<Model> {
        match self {
            SweepMetric::PhiDiffH2(a, b) | SweepMetric::RhoDiffL2(a, b) => vec![*a, *b],
            _ => vec![],
        }
    }
}

/// Instance description for [`epsilon_sweep`]: one fixed potential
/// realization, dopant recipe, cut rule, and the `beta`-`eps` coupling
/// `beta = log(eps^-3) / tau`.
#[derive(Debug, Clone)]
pub struct SweepConfig<T: Scalar> {
    pub base_grid: GridSpec<T>,
    pub pw: PwPotential<T>,
    pub kappa0: T,
    pub dopant_amplitude: T,
    pub dopant_seed: u64,
    /// Cut selection constant; ignored when `explicit_v_cut` is set.
    pub c_cut: T,
    pub explicit_v_cut: Option<T>,
    /// Temperature coupling scale, strictly inside `(K, V_min)`.
    pub tau: T,
    pub opts: ScfOptions<T>,
    /// Metric values at or below this floor skip the log-log fit.
    pub fit_floor: T,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T: Scalar> {
    pub param: T,
    pub metric: String,
    pub value: T,
    pub ok: bool,
    /// Failure note when `ok` is false.
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit<T: Scalar> {
    pub slope: T,
    pub intercept: T,
    pub points: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult<T: Scalar> {
    /// Swept variable name (always "eps" here).
    pub variable: String,
    pub rows: Vec<SweepRow<T>>,
    /// `(metric, fit)` for metrics with at least 3 valid points above the
    /// fit floor.
    pub fits: Vec<(String, SlopeFit<T>)>,
    pub seed: u64,
    /// Provenance string supplied by the caller (configuration hash).
    pub config_hash: String,
}

impl<T: Scalar> SweepResult<T> {
    pub fn fit_for(&self, metric: &str) -> Option<&SlopeFit<T>> {
        self.fits.iter().find(|(m, _)| m == metric).map(|(_, f)| f)
    }
}

/// Run the models over a list of semiclassical parameters (sorted
/// descending) with `beta` coupled to `eps`, record the requested metrics,
/// and fit log-log slopes. Solver failures mark their rows instead of
/// aborting the sweep.
pub fn epsilon_sweep<T: Scalar>(
    cfg: &SweepConfig<T>,
    eps_list: &[T],
    metrics: &[SweepMetric],
) -> Result<SweepResult<T>> {
    if eps_list.len() < 3 {
        return Err(Error::BadParam("need at least 3 sweep points".into()));
    }
    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut needed_models: Vec<Model> = Vec::new();
    for m in metrics {
        for model in m.models() {
            if !needed_models.contains(&model) {
                needed_models.push(model);
            }
        }
    }
    let needs_landscape = metrics
        .iter()
        .any(|m| matches!(m, SweepMetric::GradWL2 | SweepMetric::LapWL2));

    let mut rows: Vec<SweepRow<T>> = Vec::new();
    for &eps in &eps_sorted {
        let grid = cfg.base_grid.with_eps(eps)?;
        let beta = cast::<T>(3.0) * (T::one() / eps).ln() / cfg.tau;
        let v = realize_on_grid(&cfg.pw, &grid)?;
        let v_cut = match cfg.explicit_v_cut {
            Some(vc) => vc,
            None => select_vcut(&v, cfg.c_cut)?,
        };
        let kappa = gen_dopant(&grid, cfg.kappa0, cfg.dopant_amplitude, cfg.dopant_seed)?;

        // Landscape derivative metrics on the bare potential (a valid
        // zero-field instance, independent of any solver state).
        let mut land: Option<(T, T)> = None;
        let mut land_err = String::new();
        if needs_landscape {
            match solve_landscape(&v, cfg.opts.landscape_tol, cfg.opts.scheme) {
                Ok(ls) => land = Some(derivative_norms(&ls.w, cast::<T>(2.0))),
                Err(e) => land_err = e.to_string(),
            }
        }

        let mut states: Vec<(Model, std::result::Result<ScfState<T>, String>)> = Vec::new();
        for &model in &needed_models {
            let solved = ScfProblem::new(
                model,
                v.clone(),
                kappa.clone(),
                beta,
                v_cut,
                cfg.opts,
            )
            .and_then(|p| p.solve())
            .map_err(|e| e.to_string());
            states.push((model, solved));
        }
        let state_of = |m: Model| -> &std::result::Result<ScfState<T>, String> {
            &states.iter().find(|(sm, _)| *sm == m).unwrap().1
        };

        for metric in metrics {
            let (value, ok, note) = match metric {
                SweepMetric::GradWL2 => match &land {
                    Some((g, _)) => (*g, true, String::new()),
                    None => (T::zero(), false, land_err.clone()),
                },
                SweepMetric::LapWL2 => match &land {
                    Some((_, l)) => (*l, true, String::new()),
                    None => (T::zero(), false, land_err.clone()),
                },
                SweepMetric::PhiDiffH2(a, b) => match (state_of(*a), state_of(*b)) {
                    (Ok(sa), Ok(sb)) => (
                        sobolev_norm(&sa.phi.sub(&sb.phi)?, cast::<T>(2.0)),
                        true,
                        String::new(),
                    ),
                    (Err(e), _) | (_, Err(e)) => (T::zero(), false, e.clone()),
                },
                SweepMetric::RhoDiffL2(a, b) => match (state_of(*a), state_of(*b)) {
                    (Ok(sa), Ok(sb)) => (
                        lp_norm(&sa.rho.sub(&sb.rho)?, cast::<T>(2.0)),
                        true,
                        String::new(),
                    ),
                    (Err(e), _) | (_, Err(e)) => (T::zero(), false, e.clone()),
                },
            };
            rows.push(SweepRow {
                param: eps,
                metric: metric.name(),
                value,
                ok,
                note,
            });
        }
    }

    let mut fits = Vec::new();
    for metric in metrics {
        let name = metric.name();
        let pts: Vec<(T, T)> = rows
            .iter()
            .filter(|r| r.metric == name && r.ok && r.value > T::zero())
            .map(|r| (r.param.ln(), r.value.ln()))
            .collect();
        let max_val = rows
            .iter()
            .filter(|r| r.metric == name && r.ok)
            .fold(T::zero(), |mx, r| if r.value > mx { r.value } else { mx });
        if pts.len() >= 3 && max_val > cfg.fit_floor {
            fits.push((name, least_squares_line(&pts)));
        }
    }

    Ok(SweepResult {
        variable: "eps".into(),
        rows,
        fits,
        seed: cfg.seed,
        config_hash: String::new(),
    })
}

fn least_squares_line<T: Scalar>(pts: &[(T, T)]) -> SlopeFit<T> {
    let n = cast::<T>(pts.len() as f64);
    let sx = pts.iter().fold(T::zero(), |a, p| a + p.0);
    let sy = pts.iter().fold(T::zero(), |a, p| a + p.1);
    let sxx = pts.iter().fold(T::zero(), |a, p| a + p.0 * p.0);
    let sxy = pts.iter().fold(T::zero(), |a, p| a + p.0 * p.1);
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    SlopeFit {
        slope,
        intercept,
        points: pts.len(),
    }
}

/// Pearson correlation of paired samples.
pub fn pearson_correlation<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len());
    let n = cast::<T>(xs.len() as f64);
    let mx = xs.iter().fold(T::zero(), |a, &x| a + x) / n;
    let my = ys.iter().fold(T::zero(), |a, &y| a + y) / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn predictor_scales_minima() {
        let grid3 = build_grid::<f64>(3, 2, 8, 0.1).unwrap();
        let w = ScalarField::from_fn(grid3, |x| {
            0.8 + 0.3
                * ((std::f64::consts::PI * x[0]).sin().powi(2)
                    + (std::f64::consts::PI * x[1]).sin().powi(2)
                    + (std::f64::consts::PI * x[2]).sin().powi(2))
        });
        let preds = predict_eigenvalues(&w, 1);
        assert_eq!(preds.len(), 1);
        assert!((preds[0] - 1.75 * 0.8).abs() < 1e-12);

        let grid1 = build_grid::<f64>(1, 4, 32, 0.1).unwrap();
        let w1 = ScalarField::from_fn(grid1, |x| {
            1.0 + 0.2 * (std::f64::consts::PI * x[0] / 2.0).sin().powi(2)
        });
        let p1 = predict_eigenvalues(&w1, 3);
        assert!((p1[0] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn exact_eigenvalues_constant_potential() {
        let grid = build_grid::<f64>(1, 2, 32, 0.1).unwrap();
        let c = 1.3;
        let v = ScalarField::constant(grid, c);
        let vals = exact_eigenvalues(&v, 5, Scheme::Spectral).unwrap();
        // eps^2 (2 pi m / L)^2 + c for folded m = 0, +-1, +-2, ...
        let k1 = 0.1 * std::f64::consts::PI; // eps * 2pi/L
        let expect = [c, c + k1 * k1, c + k1 * k1, c + 4.0 * k1 * k1, c + 4.0 * k1 * k1];
        for (got, want) in vals.iter().zip(expect) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }

        let vals2 = exact_eigenvalues(&v, 3, Scheme::Stencil2).unwrap();
        let h = grid.spacing();
        let lam1 = (2.0 - 2.0 * (2.0 * std::f64::consts::PI * h / 2.0).cos()) / (h * h);
        let expect2 = [c, c + 0.01 * lam1, c + 0.01 * lam1];
        for (got, want) in vals2.iter().zip(expect2) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn counting_constant_field() {
        let grid = build_grid::<f64>(3, 2, 8, 0.1).unwrap();
        let c = 1.0;
        let w = ScalarField::constant(grid, c);
        let e = 1.5;
        let got = counting_function_landscape(&w, e, 0.1, 3);
        let expect = (2.0 * std::f64::consts::PI * 0.1).powi(-3)
            * (4.0 * std::f64::consts::PI / 3.0)
            * 0.5f64.powf(1.5)
            * 8.0;
        assert!((got - expect).abs() < 1e-9 * expect);
        assert_eq!(counting_function_landscape(&w, 0.9, 0.1, 3), 0.0);
    }

    #[test]
    fn counting_monotone_in_e() {
        let grid = build_grid::<f64>(1, 4, 64, 0.05).unwrap();
        let w = ScalarField::from_fn(grid, |x| 1.0 + 0.1 * (x[0] * 2.0).sin().powi(2));
        let mut prev = -1.0;
        for i in 0..30 {
            let e = 0.95 + 0.02 * i as f64;
            let n = counting_function_landscape(&w, e, 0.05, 1);
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn multiplier_profile_nonnegative() {
        for i in 0..1000 {
            let x = 0.005 * i as f64;
            assert!(multiplier_profile(x) >= 0.0, "G({x}) < 0");
        }
    }

    #[test]
    fn msc_bound_zero_mode_closed_form() {
        let beta = 7.0;
        let chk = check_msc_lower_bound(0.0, beta, 0.1).unwrap();
        let exact = (std::f64::consts::PI / beta).sqrt();
        assert!((chk.lhs - exact).abs() < 1e-9 * exact, "{} vs {exact}", chk.lhs);
        assert!(chk.pass);
        // sqrt(pi) >= 1/2 in closed form
        assert!(chk.rhs <= chk.lhs);
    }

    #[test]
    fn msc_bound_sample_point() {
        let chk = check_msc_lower_bound(1.0, 10.0, 0.1).unwrap();
        assert!(chk.pass, "lhs {} rhs {}", chk.lhs, chk.rhs);
    }

    #[test]
    fn msc_apply_linear_and_translation_invariant() {
        let grid = build_grid::<f64>(1, 2, 16, 0.1).unwrap();
        let w = ScalarField::constant(grid, 1.0);
        let phi0 = ScalarField::zeros(grid);
        let args = MscWeight {
            w: &w,
            phi0: &phi0,
            v_cut: 0.0,
            mu: 0.4,
            beta: 5.0,
        };
        let f = ScalarField::from_fn(grid, |x| (std::f64::consts::PI * x[0]).sin());
        let g = ScalarField::from_fn(grid, |x| 0.3 * (2.0 * std::f64::consts::PI * x[0]).cos());
        let mf = msc_apply(&args, &f, 1e-12).unwrap();
        let mg = msc_apply(&args, &g, 1e-12).unwrap();
        let mfg = msc_apply(&args, &f.add(&g).unwrap(), 1e-12).unwrap();
        let lin_err = lp_norm(&mfg.sub(&mf.add(&mg).unwrap()).unwrap(), 2.0);
        let scale = lp_norm(&mfg, 2.0);
        assert!(lin_err <= 1e-10 * scale.max(1.0), "linearity error {lin_err}");

        // translation by 4 grid points for constant weight
        let shift = 4usize;
        let fv = f.values().to_vec();
        let shifted: Vec<f64> = (0..16).map(|i| fv[(i + 16 - shift) % 16]).collect();
        let fs = ScalarField::new(grid, shifted).unwrap();
        let mfs = msc_apply(&args, &fs, 1e-12).unwrap();
        let mfv = mf.values().to_vec();
        for i in 0..16 {
            let want = mfv[(i + 16 - shift) % 16];
            assert!((mfs.values()[i] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn sweep_metric_names_round_trip() {
        for m in [
            SweepMetric::PhiDiffH2(Model::Rehf, Model::Lsc),
            SweepMetric::RhoDiffL2(Model::Pl, Model::Lsc),
            SweepMetric::GradWL2,
            SweepMetric::LapWL2,
        ] {
            assert_eq!(SweepMetric::parse(&m.name()).unwrap(), m);
        }
        assert!(SweepMetric::parse("bogus").is_err());
    }

    #[test]
    fn pearson_of_exact_line_is_one() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((pearson_correlation(&xs, &ys) - 1.0).abs() < 1e-12);
    }
}
