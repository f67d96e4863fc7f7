// Scratch exploration for picking the standard instance parameters.
use lscf::analysis::{epsilon_sweep, SweepConfig, SweepMetric};
use lscf::density::fermi_integral;
use lscf::grid::{build_grid, Scheme};
use lscf::potential::{gen_dopant, gen_pw_potential, realize_on_grid, select_vcut};
use lscf::scf::{Model, ScfOptions, ScfProblem};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("instance");

    match mode {
        "instance" => instance(),
        "sweep" => sweep(),
        _ => eprintln!("unknown mode"),
    }
}

fn instance() {
    // d=1, eps=0.02, delta=0.1, v_min=1, K=0.3, tau=(K+V_min)/2=0.65
    let eps = 0.02;
    let tau = 0.65;
    let beta = 3.0 * (1.0f64 / eps).ln() / tau;
    println!("beta = {beta}");
    for l in [2usize, 4] {
        for n in [128usize, 256] {
            if n % l != 0 {
                continue;
            }
            let grid = build_grid::<f64>(1, l, n, eps).unwrap();
            let pw = gen_pw_potential::<f64>(1234, l, 1, 1.0, 0.1).unwrap();
            let v = realize_on_grid(&pw, &grid).unwrap();
            for c_cut in [1.0, 0.5] {
                let v_cut = select_vcut(&v, c_cut).unwrap();
                for kappa0 in [1e-5, 1e-4, 1e-3, 1e-2] {
                    let kappa = gen_dopant(&grid, kappa0, 0.5 * kappa0, 99).unwrap();
                    let mut opts = ScfOptions::<f64>::default();
                    opts.scheme = Scheme::Stencil2;
                    let t0 = std::time::Instant::now();
                    let mut mus = Vec::new();
                    let mut iters = Vec::new();
                    let mut ok = true;
                    for model in [Model::Rehf, Model::Pl, Model::Lsc] {
                        match ScfProblem::new(model, v.clone(), kappa.clone(), beta, v_cut, opts)
                            .and_then(|p| p.scf_solve())
                        {
                            Ok(s) => {
                                mus.push((model.name(), s.mu, s.iterations, s.pde_residual));
                                iters.push(s.iterations);
                            }
                            Err(e) => {
                                println!("    L={l} n={n} c_cut={c_cut} kappa0={kappa0:.0e}: {:?} FAILED: {e}", model);
                                ok = false;
                            }
                        }
                    }
                    if ok {
                        let mu = mus[0].1;
                        println!(
                            "L={l} n={n} c_cut={c_cut} v_cut={v_cut:.4} kappa0={kappa0:.0e}: mu={mu:.4} (v_min-mu={:.3}) iters={:?} t={:.2?}",
                            1.0 - mu,
                            iters,
                            t0.elapsed()
                        );
                        // regime products
                        let pref = eps.powi(-3) * beta.powf(-1.5);
                        let up = pref * (-beta * (1.1 - mu + 0.1)).exp();
                        let lo_p = pref * (-beta * (1.0 - mu - 0.1)).exp();
                        println!("    products: upper={up:.3e} lower={lo_p:.3e}");
                        let a_typ = 1.05 - v_cut + v_cut - mu;
                        let _ = a_typ;
                        let fi = fermi_integral(1.0 - mu, beta, eps, 1).unwrap();
                        println!("    fermi_integral(v_min - mu) = {fi:.3e} vs kappa0 {kappa0:.1e}");
                    }
                }
            }
        }
    }
}

fn sweep() {
    let l: usize = args_or(2, 2);
    let n: usize = args_or(3, 256);
    let seed: u64 = args_or(4, 1234);
    let kappa0: f64 = args_or(5, 1e-3);
    let c_cut: f64 = args_or(6, 1.0);
    let base = build_grid::<f64>(1, l, n, 0.05).unwrap();
    let delta: f64 = args_or(7, 0.1);
    let pw = gen_pw_potential::<f64>(seed, l, 1, 1.0, delta).unwrap();
    let mut opts = ScfOptions::<f64>::default();
    opts.scheme = Scheme::Stencil2;
    let cfg = SweepConfig {
        base_grid: base,
        pw,
        kappa0,
        dopant_amplitude: 0.5 * kappa0,
        dopant_seed: 99,
        c_cut,
        explicit_v_cut: None,
        tau: 0.65,
        opts,
        fit_floor: 1e-6,
        seed,
    };
    let metrics = [
        SweepMetric::PhiDiffH2(Model::Rehf, Model::Lsc),
        SweepMetric::RhoDiffL2(Model::Rehf, Model::Lsc),
    ];
    let eps_list = [0.08, 0.06, 0.04, 0.03, 0.02];
    let t0 = std::time::Instant::now();
    let res = epsilon_sweep(&cfg, &eps_list, &metrics).unwrap();
    println!("sweep took {:.2?}", t0.elapsed());
    for r in &res.rows {
        println!("eps={:.3} {} = {:.6e} ok={} {}", r.param, r.metric, r.value, r.ok, r.note);
    }
    for (m, f) in &res.fits {
        println!("fit {m}: slope {:.3} ({} pts)", f.slope, f.points);
    }
}

fn args_or<T: std::str::FromStr + Copy>(i: usize, default: T) -> T {
    std::env::args()
        .nth(i)
        .and_then(|s| s.parse().ok())
        .unwrap_or(default)
}
