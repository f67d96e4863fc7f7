//! Self-consistent coupling of a density map to the Poisson equation:
//! charge-neutral chemical-potential solves, a damped fixed-point loop with
//! optional Anderson extrapolation, and a Newton variant driven by the
//! model linearizations.
//!
//! The solved system is `-laplace(phi) = kappa - F(phi, mu)` with
//! `mean(F(phi, mu)) = kappa0` enforced at every step by a monotone
//! bisection in `mu`. The electric potential is kept mean-zero throughout;
//! the additive gauge freedom `(phi, mu) -> (phi + t, mu - t)` is fixed that
//! way and `mu` carries the constant.

use nalgebra::{DMatrix, DVector};

use crate::density::{
    fermi_dirac, fermi_integral, fermi_integral_deriv, EigenMethod, EigenSolveConfig, LscDensity,
    ThermoState,
};
use crate::error::{Error, Result};
use crate::grid::{
    laplacian_apply, lp_norm, poisson_solve_projected, sobolev_norm, FourierModeTable, GridSpec,
    ScalarField, Scheme,
};
use crate::ham;
use crate::landscape::solve_landscape;
use crate::potential::{regime_check, RegimeParams, RegimeReport};
use crate::scalar::{cast, to_f64, Scalar};

/// Which density map closes the Poisson loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Rehf,
    Pl,
    Lsc,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Rehf => "rehf",
            Model::Pl => "pl",
            Model::Lsc => "lsc",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rehf" => Ok(Model::Rehf),
            "pl" => Ok(Model::Pl),
            "lsc" => Ok(Model::Lsc),
            other => Err(format!("unknown model '{other}' (expected rehf, pl, or lsc)")),
        }
    }
}

/// Iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScfOptions<T: Scalar> {
    /// Damping factor in `(0, 1]`.
    pub alpha: T,
    /// Anderson extrapolation depth; 0 disables.
    pub anderson_depth: usize,
    /// Convergence tolerance for both the iterate change (`H^2`) and the
    /// PDE residual (`H^{-2}`).
    pub tol: T,
    pub max_iter: usize,
    /// Use the Newton path in [`ScfProblem::solve`].
    pub newton: bool,
    /// Relative neutrality tolerance for the chemical-potential solve.
    pub mu_tol: T,
    /// Inner landscape-solver tolerance.
    pub landscape_tol: T,
    pub eigen: EigenSolveConfig<T>,
    pub scheme: Scheme,
}

impl<T: Scalar> Default for ScfOptions<T> {
    fn default() -> Self {
        ScfOptions {
            alpha: cast::<T>(0.5),
            anderson_depth: 5,
            tol: cast::<T>(1e-8),
            max_iter: 200,
            newton: false,
            mu_tol: cast::<T>(1e-10),
            landscape_tol: cast::<T>(1e-10),
            eigen: EigenSolveConfig::default(),
            scheme: Scheme::Stencil2,
        }
    }
}

/// Converged solution of one model.
#[derive(Debug, Clone)]
pub struct ScfState<T: Scalar> {
    pub model: Model,
    /// Electric potential, mean zero.
    pub phi: ScalarField<T>,
    pub mu: T,
    pub rho: ScalarField<T>,
    /// `||-laplace(phi) + rho - kappa||` in the `H^{-2}` norm.
    pub pde_residual: T,
    /// `H^2` norm of the last iterate change.
    pub update_h2: T,
    /// `|mean(rho) - kappa0|`.
    pub neutrality_residual: T,
    pub iterations: usize,
    /// `(iteration, pde_residual)` per outer step.
    pub history: Vec<(usize, T)>,
}

/// One model instance: potential, dopant, temperature, cut level, options.
#[derive(Debug, Clone)]
pub struct ScfProblem<T: Scalar> {
    model: Model,
    grid: GridSpec<T>,
    v: ScalarField<T>,
    kappa: ScalarField<T>,
    beta: T,
    v_cut: T,
    kappa0: T,
    opts: ScfOptions<T>,
    lsc: Option<LscDensity<T>>,
}

/// Expensive per-`phi` state shared between the `mu` bisection and the
/// density evaluation.
enum Prepared<T: Scalar> {
    /// Eigenpairs of `H = -eps^2 laplace + V - phi`, ascending.
    Spectral { vals: Vec<T>, vecs: Vec<Vec<T>> },
    /// Radial-integral argument `a(x)`; the density is
    /// `fermi_integral(a(x) - mu)`.
    Radial { a: ScalarField<T> },
}

/// Linearization `M = d_phi F` at a base point.
enum LinMap<T: Scalar> {
    /// Pointwise multiplication (Lsc).
    Mult(ScalarField<T>),
    /// `m_pl * u0^{-1} h^{-1} (u0 * .)` (Pl).
    Pl {
        m_pl_w0: ScalarField<T>,
        u0: ScalarField<T>,
        v_eff: ScalarField<T>,
    },
    /// Central finite difference of the density map (Rehf).
    FiniteDiff { phi: ScalarField<T>, mu: T, sigma: T },
}

impl<T: Scalar> ScfProblem<T> {
    pub fn new(
        model: Model,
        v: ScalarField<T>,
        kappa: ScalarField<T>,
        beta: T,
        v_cut: T,
        opts: ScfOptions<T>,
    ) -> Result<Self> {
        if v.grid() != kappa.grid() {
            return Err(Error::GridMismatch);
        }
        if !(beta > T::zero()) {
            return Err(Error::BadParam("beta must be positive".into()));
        }
        if !(opts.alpha > T::zero() && opts.alpha <= T::one()) {
            return Err(Error::BadParam("mixing alpha must lie in (0, 1]".into()));
        }
        let kappa0 = kappa.mean();
        if !(kappa0 > T::zero()) {
            return Err(Error::BadParam("mean dopant density must be positive".into()));
        }
        let grid = *v.grid();
        let lsc = match model {
            Model::Lsc => Some(LscDensity::new(&v, v_cut, opts.scheme)?),
            _ => None,
        };
        Ok(ScfProblem {
            model,
            grid,
            v,
            kappa,
            beta,
            v_cut,
            kappa0,
            opts,
            lsc,
        })
    }

    pub fn model(&self) -> Model {
        self.model
    }
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }
    pub fn potential(&self) -> &ScalarField<T> {
        &self.v
    }
    pub fn dopant(&self) -> &ScalarField<T> {
        &self.kappa
    }
    pub fn kappa0(&self) -> T {
        self.kappa0
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn v_cut(&self) -> T {
        self.v_cut
    }
    pub fn options(&self) -> &ScfOptions<T> {
        &self.opts
    }

    /// Parameter-regime diagnostic for this instance (advisory; the solvers
    /// run regardless).
    pub fn regime(&self) -> RegimeReport<T> {
        let v_min = self.v.min_value();
        let delta = self.v.max_value() - v_min;
        let mut p = RegimeParams::new(
            self.grid.eps(),
            delta,
            v_min,
            self.beta,
            T::zero(),
            self.kappa0,
        );
        p.k_temp = v_min * cast::<T>(0.25);
        regime_check(&p)
    }

    fn prepare(&self, phi: &ScalarField<T>, mu_hint: T) -> Result<Prepared<T>> {
        match self.model {
            Model::Rehf => self.prepare_rehf(phi, mu_hint),
            Model::Pl => {
                let v_eff = self.v.zip(phi, |vi, pi| vi - pi - self.v_cut)?;
                let ls = solve_landscape(&v_eff, self.opts.landscape_tol, self.opts.scheme)?;
                Ok(Prepared::Radial {
                    a: ls.w.map(|w| w + self.v_cut),
                })
            }
            Model::Lsc => {
                let cache = self.lsc.as_ref().expect("cache built in new()");
                Ok(Prepared::Radial {
                    a: cache.w2().zip(phi, |w, p| w - p + self.v_cut)?,
                })
            }
        }
    }

    fn prepare_rehf(&self, phi: &ScalarField<T>, mu_hint: T) -> Result<Prepared<T>> {
        let v_eff = self.v.sub(phi)?;
        let size = self.grid.len();
        let cfg = &self.opts.eigen;
        let dense = match cfg.method {
            EigenMethod::Dense => true,
            EigenMethod::Lanczos => false,
            EigenMethod::Auto => size <= cfg.dense_limit,
        };
        if dense {
            let m = ham::dense_hamiltonian(&v_eff, self.opts.scheme, cfg.dense_limit)?;
            let (vals, mat) = ham::dense_eigenpairs(m);
            let vecs = (0..size)
                .map(|i| mat.column(i).iter().copied().collect())
                .collect();
            return Ok(Prepared::Spectral { vals, vecs });
        }
        let beta = self.beta;
        let tail = cfg.tail_tol;
        let max_pairs = cfg.max_pairs;
        let grid = self.grid;
        let scheme = self.opts.scheme;
        let (vals, vecs) = ham::lanczos_lowest(
            size,
            |x| {
                let xf = ScalarField::new(grid, x.to_vec()).unwrap();
                ham::apply_hamiltonian(&v_eff, &xf, scheme).values().to_vec()
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
                let w0 = fermi_dirac(beta * (converged[0] - mu_hint));
                let wl = fermi_dirac(beta * (converged[converged.len() - 1] - mu_hint));
                wl < tail * w0
            },
        )?;
        Ok(Prepared::Spectral { vals, vecs })
    }

    /// For the Lanczos path: does the collected spectrum cover the Fermi
    /// weight down to the tail tolerance at this `mu`?
    fn tail_covered(&self, prep: &Prepared<T>, mu: T) -> bool {
        match prep {
            Prepared::Radial { .. } => true,
            Prepared::Spectral { vals, .. } => {
                if vals.len() == self.grid.len() {
                    return true;
                }
                let w0 = fermi_dirac(self.beta * (vals[0] - mu));
                let wl = fermi_dirac(self.beta * (vals[vals.len() - 1] - mu));
                wl < self.opts.eigen.tail_tol * w0
            }
        }
    }

    fn mean_density(&self, prep: &Prepared<T>, mu: T) -> Result<T> {
        match prep {
            Prepared::Spectral { vals, .. } => {
                let sum = vals.iter().fold(T::zero(), |acc, &lam| {
                    acc + fermi_dirac(self.beta * (lam - mu))
                });
                Ok(sum / self.grid.volume())
            }
            Prepared::Radial { a } => {
                let eps = self.grid.eps();
                let d = self.grid.dim();
                let mut acc = T::zero();
                for &ai in a.values() {
                    acc += fermi_integral(ai - mu, self.beta, eps, d)?;
                }
                Ok(acc / cast::<T>(self.grid.len() as f64))
            }
        }
    }

    fn density_from(&self, prep: &Prepared<T>, mu: T) -> Result<ScalarField<T>> {
        match prep {
            Prepared::Spectral { vals, vecs } => {
                let hd = self.grid.cell_volume();
                let mut rho = vec![T::zero(); self.grid.len()];
                for (lam, psi) in vals.iter().zip(vecs) {
                    let f = fermi_dirac(self.beta * (*lam - mu));
                    for (r, &p) in rho.iter_mut().zip(psi) {
                        *r += f * p * p / hd;
                    }
                }
                ScalarField::new(self.grid, rho)
            }
            Prepared::Radial { a } => {
                let eps = self.grid.eps();
                let d = self.grid.dim();
                let mut rho = Vec::with_capacity(self.grid.len());
                for &ai in a.values() {
                    rho.push(fermi_integral(ai - mu, self.beta, eps, d)?);
                }
                ScalarField::new(self.grid, rho)
            }
        }
    }

    /// Energy window of the prepared state, used to bracket `mu`.
    fn energy_range(&self, prep: &Prepared<T>) -> (T, T) {
        match prep {
            Prepared::Spectral { vals, .. } => (vals[0], vals[vals.len() - 1]),
            Prepared::Radial { a } => (a.min_value(), a.max_value()),
        }
    }

    fn solve_mu_prepared(&self, prep: &Prepared<T>) -> Result<T> {
        let ten = cast::<T>(10.0);
        let (e_lo, e_hi) = self.energy_range(prep);
        let mut lo = e_lo - ten / self.beta;
        let mut hi = e_hi;
        let target = self.kappa0;
        let theta = |mu: T| -> Result<T> { Ok(self.mean_density(prep, mu)? - target) };
        let mut f_lo = theta(lo)?;
        let mut width = (hi - lo).max(T::one() / self.beta);
        let mut tries = 0;
        while f_lo > T::zero() {
            lo -= width;
            width *= cast::<T>(2.0);
            f_lo = theta(lo)?;
            tries += 1;
            if tries > 60 {
                return Err(Error::NoBracket);
            }
        }
        let mut f_hi = theta(hi)?;
        let mut width = (hi - lo).max(T::one() / self.beta);
        tries = 0;
        while f_hi < T::zero() {
            hi += width;
            width *= cast::<T>(2.0);
            f_hi = theta(hi)?;
            tries += 1;
            if tries > 60 {
                return Err(Error::NoBracket);
            }
        }
        let tol = self.opts.mu_tol * target;
        let mut mid = (lo + hi) * cast::<T>(0.5);
        for _ in 0..200 {
            mid = (lo + hi) * cast::<T>(0.5);
            let f_mid = theta(mid)?;
            if f_mid.abs() <= tol {
                return Ok(mid);
            }
            if f_mid > T::zero() {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= cast::<T>(1e-15) * (T::one() + mid.abs()) {
                break;
            }
        }
        Ok(mid)
    }

    /// Chemical potential balancing `mean(F(phi, mu)) = kappa0`, by
    /// bisection on the monotone mean-density map.
    pub fn solve_mu(&self, phi: &ScalarField<T>) -> Result<T> {
        let hint = (self.v.sub(phi)?).max_value();
        let mut prep = self.prepare(phi, hint)?;
        let mut mu = self.solve_mu_prepared(&prep)?;
        // The Lanczos path stops collecting eigenpairs using the hint; if
        // the solved mu moved past the collected window, redo with the
        // better hint.
        let mut attempts = 0;
        while !self.tail_covered(&prep, mu) && attempts < 3 {
            prep = self.prepare(phi, mu + cast::<T>(5.0) / self.beta)?;
            mu = self.solve_mu_prepared(&prep)?;
            attempts += 1;
        }
        if !self.tail_covered(&prep, mu) {
            return Err(Error::no_convergence("mu tail coverage", attempts, f64::NAN));
        }
        Ok(mu)
    }

    /// Density map `F(phi, mu)` for this model.
    pub fn density(&self, phi: &ScalarField<T>, mu: T) -> Result<ScalarField<T>> {
        let prep = self.prepare(phi, mu + cast::<T>(5.0) / self.beta)?;
        self.density_from(&prep, mu)
    }

    /// Thermodynamic state at a given `mu`.
    pub fn thermo(&self, mu: T) -> ThermoState<T> {
        ThermoState::new(self.beta, mu, self.v_cut)
    }

    /// Fixed-point or Newton solve, per `options().newton`.
    pub fn solve(&self) -> Result<ScfState<T>> {
        if self.opts.newton {
            self.newton_solve()
        } else {
            self.scf_solve()
        }
    }

    /// Damped fixed-point iteration with optional Anderson extrapolation:
    /// `mu_k = solve_mu(phi_k)`, `rho_k = F(phi_k, mu_k)`,
    /// `phi~ = poisson(kappa - rho_k)`, then mixing. Stops when the `H^2`
    /// iterate change and the `H^{-2}` PDE residual both drop below `tol`.
    pub fn scf_solve(&self) -> Result<ScfState<T>> {
        let mut phi = ScalarField::zeros(self.grid);
        let mut prev_update = T::zero();
        let mut history: Vec<(usize, T)> = Vec::new();
        let mut mu_hint = self.v.max_value();
        let mut anderson = AndersonMixer::new(self.opts.anderson_depth, self.opts.alpha);

        for iter in 1..=self.opts.max_iter {
            let (mu, rho, prep) = self.step_state(&phi, mu_hint)?;
            mu_hint = mu;
            let _ = prep;
            let residual_field = self.pde_residual_field(&phi, &rho);
            let pde_res = sobolev_norm(&residual_field, cast::<T>(-2.0));
            history.push((iter, pde_res));
            if pde_res <= self.opts.tol && prev_update <= self.opts.tol {
                return Ok(self.finish(phi, mu, rho, pde_res, prev_update, iter, history));
            }

            let source = self.kappa.sub(&rho)?;
            let phi_tilde = poisson_solve_projected(&source);
            let next = anderson.step(&phi, &phi_tilde).project_mean_zero();
            prev_update = sobolev_norm(&next.sub(&phi)?, cast::<T>(2.0));
            debug_assert!(to_f64(next.mean()).abs() < 1e-10);
            phi = next;
        }
        Err(Error::NoConvergence {
            what: "scf fixed point",
            iterations: self.opts.max_iter,
            residual: to_f64(history.last().map(|h| h.1).unwrap_or_else(T::zero)),
            history: history.iter().map(|&(i, r)| (i, to_f64(r))).collect(),
        })
    }

    /// Newton-Krylov iteration: solve `(-laplace + M) dphi = kappa - rho +
    /// laplace(phi)` per step with Fourier-preconditioned GMRES on the
    /// mean-zero subspace, falling back to a damped fixed-point step when
    /// the Krylov solve stalls.
    pub fn newton_solve(&self) -> Result<ScfState<T>> {
        let mut phi = ScalarField::zeros(self.grid);
        let mut prev_update = T::zero();
        let mut history: Vec<(usize, T)> = Vec::new();
        let mut mu_hint = self.v.max_value();
        let table = FourierModeTable::new(&self.grid);

        for iter in 1..=self.opts.max_iter {
            let (mu, rho, _prep) = self.step_state(&phi, mu_hint)?;
            mu_hint = mu;
            let residual_field = self.pde_residual_field(&phi, &rho);
            let pde_res = sobolev_norm(&residual_field, cast::<T>(-2.0));
            history.push((iter, pde_res));
            if pde_res <= self.opts.tol && prev_update <= self.opts.tol {
                return Ok(self.finish(phi, mu, rho, pde_res, prev_update, iter, history));
            }

            // rhs = kappa - rho - (-laplace phi), mean projected away.
            let rhs_field = residual_field.scale(-T::one()).project_mean_zero();
            let lin = self.linearization(&phi, mu)?;
            let m_bar = {
                let ones = ScalarField::constant(self.grid, T::one());
                let m1 = self.apply_linearization(&lin, &ones)?;
                let m = m1.mean();
                if m > cast::<T>(1e-300) {
                    m
                } else {
                    cast::<T>(1e-300)
                }
            };
            let precond_mult: Vec<T> = table
                .k2
                .iter()
                .map(|&k2| {
                    if k2 > T::zero() {
                        T::one() / (k2 + m_bar)
                    } else {
                        T::zero()
                    }
                })
                .collect();
            let grid = self.grid;
            let apply = |x: &DVector<T>| -> DVector<T> {
                let xf = ScalarField::new(grid, x.as_slice().to_vec())
                    .unwrap()
                    .project_mean_zero();
                let lap = laplacian_apply(&xf, Scheme::Spectral);
                let mx = self
                    .apply_linearization(&lin, &xf)
                    .expect("linearization application failed inside newton");
                let sum = lap.add(&mx).unwrap().project_mean_zero();
                DVector::from_column_slice(sum.values())
            };
            let precond = |r: &DVector<T>| -> DVector<T> {
                let rf = ScalarField::new(grid, r.as_slice().to_vec()).unwrap();
                let out = crate::grid::apply_real_multiplier(&rf, &precond_mult).0;
                DVector::from_column_slice(out.values())
            };
            let rhs = DVector::from_column_slice(rhs_field.values());
            let (delta, rel, _) = ham::gmres(apply, precond, &rhs, cast::<T>(1e-6), 30, 4);
            let delta_field = ScalarField::new(self.grid, delta.as_slice().to_vec())
                .unwrap()
                .project_mean_zero();
            let next = if rel <= cast::<T>(0.5) && delta_field.values().iter().all(|v| crate::scalar::is_finite(*v)) {
                phi.add(&delta_field)?.project_mean_zero()
            } else {
                // Krylov breakdown: damped fixed-point step.
                let source = self.kappa.sub(&rho)?;
                let phi_tilde = poisson_solve_projected(&source);
                phi.zip(&phi_tilde, |p, pt| {
                    (T::one() - self.opts.alpha) * p + self.opts.alpha * pt
                })?
                .project_mean_zero()
            };
            prev_update = sobolev_norm(&next.sub(&phi)?, cast::<T>(2.0));
            phi = next;
        }
        Err(Error::NoConvergence {
            what: "scf newton",
            iterations: self.opts.max_iter,
            residual: to_f64(history.last().map(|h| h.1).unwrap_or_else(T::zero)),
            history: history.iter().map(|&(i, r)| (i, to_f64(r))).collect(),
        })
    }

    fn step_state(
        &self,
        phi: &ScalarField<T>,
        mu_hint: T,
    ) -> Result<(T, ScalarField<T>, ())> {
        let mut prep = self.prepare(phi, mu_hint + cast::<T>(5.0) / self.beta)?;
        let mut mu = self.solve_mu_prepared(&prep)?;
        let mut attempts = 0;
        while !self.tail_covered(&prep, mu) && attempts < 3 {
            prep = self.prepare(phi, mu + cast::<T>(5.0) / self.beta)?;
            mu = self.solve_mu_prepared(&prep)?;
            attempts += 1;
        }
        let rho = self.density_from(&prep, mu)?;
        Ok((mu, rho, ()))
    }

    fn pde_residual_field(&self, phi: &ScalarField<T>, rho: &ScalarField<T>) -> ScalarField<T> {
        // -laplace(phi) + rho - kappa
        let neg_lap = laplacian_apply(phi, Scheme::Spectral);
        neg_lap
            .zip(rho, |l, r| l + r)
            .unwrap()
            .zip(&self.kappa, |lr, k| lr - k)
            .unwrap()
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        phi: ScalarField<T>,
        mu: T,
        rho: ScalarField<T>,
        pde_residual: T,
        update_h2: T,
        iterations: usize,
        history: Vec<(usize, T)>,
    ) -> ScfState<T> {
        let neutrality_residual = (rho.mean() - self.kappa0).abs();
        ScfState {
            model: self.model,
            phi,
            mu,
            rho,
            pde_residual,
            update_h2,
            neutrality_residual,
            iterations,
            history,
        }
    }

    fn linearization(&self, phi: &ScalarField<T>, mu: T) -> Result<LinMap<T>> {
        match self.model {
            Model::Lsc => {
                let cache = self.lsc.as_ref().expect("cache built in new()");
                let eps = self.grid.eps();
                let d = self.grid.dim();
                let arg = cache.w2().zip(phi, |w, p| w - p + self.v_cut - mu)?;
                let mut m = Vec::with_capacity(self.grid.len());
                for &a in arg.values() {
                    m.push(-fermi_integral_deriv(a, self.beta, eps, d)?);
                }
                Ok(LinMap::Mult(ScalarField::new(self.grid, m)?))
            }
            Model::Pl => {
                let v_eff = self.v.zip(phi, |vi, pi| vi - pi - self.v_cut)?;
                let ls = solve_landscape(&v_eff, self.opts.landscape_tol, self.opts.scheme)?;
                let eps = self.grid.eps();
                let d = self.grid.dim();
                let mut m = Vec::with_capacity(self.grid.len());
                for &w in ls.w.values() {
                    // m_pl(x) * W_0(x): one factor from the definition, the
                    // second from u0^{-1} applied pointwise afterwards.
                    m.push(-fermi_integral_deriv(w + self.v_cut - mu, self.beta, eps, d)? * w * w);
                }
                Ok(LinMap::Pl {
                    m_pl_w0: ScalarField::new(self.grid, m)?,
                    u0: ls.u,
                    v_eff,
                })
            }
            Model::Rehf => {
                let phi_norm = lp_norm(phi, cast::<T>(2.0));
                Ok(LinMap::FiniteDiff {
                    phi: phi.clone(),
                    mu,
                    sigma: phi_norm,
                })
            }
        }
    }

    fn apply_linearization(
        &self,
        lin: &LinMap<T>,
        direction: &ScalarField<T>,
    ) -> Result<ScalarField<T>> {
        match lin {
            LinMap::Mult(m) => m.zip(direction, |mi, di| mi * di),
            LinMap::Pl { m_pl_w0, u0, v_eff } => {
                let rhs = u0.zip(direction, |ui, di| ui * di)?;
                let (y, _, _) = ham::pcg_helmholtz(
                    v_eff,
                    &rhs,
                    self.opts.scheme,
                    self.opts.landscape_tol,
                    10 * self.grid.len(),
                )?;
                // out = m_pl * u0^{-1} y = (m_pl_w0 contains W0^2 and the
                // integral factor) * y
                m_pl_w0.zip(&y, |mi, yi| mi * yi)
            }
            LinMap::FiniteDiff { phi, mu, sigma } => {
                let dir_norm = lp_norm(direction, cast::<T>(2.0));
                if dir_norm == T::zero() {
                    return Ok(ScalarField::zeros(self.grid));
                }
                let floor = cast::<T>(1e-6);
                let mut s = cast::<T>(1e-4) * *sigma / dir_norm;
                if !(s > floor) {
                    s = floor;
                }
                let plus = phi.zip(direction, |p, d| p + s * d)?;
                let minus = phi.zip(direction, |p, d| p - s * d)?;
                let f_plus = self.density(&plus, *mu)?;
                let f_minus = self.density(&minus, *mu)?;
                f_plus.zip(&f_minus, |a, b| (a - b) / (cast::<T>(2.0) * s))
            }
        }
    }

    /// Apply the model linearization `M = d_phi F` at a converged base
    /// state to a direction field.
    pub fn linearization_apply(
        &self,
        base: &ScfState<T>,
        direction: &ScalarField<T>,
    ) -> Result<ScalarField<T>> {
        let lin = self.linearization(&base.phi, base.mu)?;
        self.apply_linearization(&lin, direction)
    }
}

/// Anderson extrapolation over the last `depth` residuals, with plain
/// damped mixing as the depth-0 (and warm-up) behavior.
struct AndersonMixer<T: Scalar> {
    depth: usize,
    alpha: T,
    iterates: Vec<Vec<T>>,
    residuals: Vec<Vec<T>>,
}

impl<T: Scalar> AndersonMixer<T> {
    fn new(depth: usize, alpha: T) -> Self {
        AndersonMixer {
            depth,
            alpha,
            iterates: Vec::new(),
            residuals: Vec::new(),
        }
    }

    fn step(&mut self, phi: &ScalarField<T>, phi_tilde: &ScalarField<T>) -> ScalarField<T> {
        let grid = *phi.grid();
        let x: Vec<T> = phi.values().to_vec();
        let f: Vec<T> = phi_tilde
            .values()
            .iter()
            .zip(phi.values())
            .map(|(&t, &p)| t - p)
            .collect();
        self.iterates.push(x);
        self.residuals.push(f);
        let keep = self.depth + 1;
        if self.iterates.len() > keep {
            self.iterates.remove(0);
            self.residuals.remove(0);
        }

        let m = self.iterates.len() - 1;
        let n = grid.len();
        let fk = &self.residuals[m];
        if self.depth == 0 || m == 0 {
            let damped: Vec<T> = self.iterates[m]
                .iter()
                .zip(fk)
                .map(|(&xi, &fi)| xi + self.alpha * fi)
                .collect();
            return ScalarField::new(grid, damped).unwrap();
        }

        // Least squares over residual differences.
        let mut df = DMatrix::<T>::zeros(n, m);
        let mut dx = DMatrix::<T>::zeros(n, m);
        for j in 0..m {
            for i in 0..n {
                df[(i, j)] = self.residuals[j + 1][i] - self.residuals[j][i];
                dx[(i, j)] = self.iterates[j + 1][i] - self.iterates[j][i];
            }
        }
        let fk_v = DVector::<T>::from_column_slice(fk);
        let mut normal = &df.transpose() * &df;
        let mut trace = T::zero();
        for j in 0..m {
            trace += normal[(j, j)];
        }
        let ridge = cast::<T>(1e-12) * (trace / cast::<T>(m as f64) + T::one());
        for j in 0..m {
            normal[(j, j)] += ridge;
        }
        let rhs = &df.transpose() * &fk_v;
        let gamma = match normal.lu().solve(&rhs) {
            Some(g) => g,
            None => {
                let damped: Vec<T> = self.iterates[m]
                    .iter()
                    .zip(fk)
                    .map(|(&xi, &fi)| xi + self.alpha * fi)
                    .collect();
                return ScalarField::new(grid, damped).unwrap();
            }
        };
        // x_{k+1} = x_k + alpha f_k - (dx + alpha df) gamma
        let correction = &dx * &gamma * T::one() + &df * &gamma * self.alpha;
        let mut next = vec![T::zero(); n];
        for i in 0..n {
            next[i] = self.iterates[m][i] + self.alpha * fk[i] - correction[i];
        }
        match ScalarField::new(grid, next) {
            Ok(fld) => fld,
            Err(_) => {
                // Non-finite extrapolation: discard history, damped step.
                let damped: Vec<T> = self.iterates[m]
                    .iter()
                    .zip(fk)
                    .map(|(&xi, &fi)| xi + self.alpha * fi)
                    .collect();
                self.iterates.drain(..m);
                self.residuals.drain(..m);
                ScalarField::new(grid, damped).unwrap()
            }
        }
    }
}
