use lscf::analysis::{compare_counting, exact_eigenvalues, pearson_correlation, predict_eigenvalues};
use lscf::grid::{build_grid, ScalarField, Scheme};
use lscf::landscape::solve_landscape;
use lscf::potential::{gen_pw_potential, realize_on_grid};

fn main() {
    // criterion 7 at delta=0.0016: grad/lap W slopes
    let mut pts_g = Vec::new();
    let mut pts_l = Vec::new();
    for &eps in &[0.08, 0.06, 0.04, 0.03, 0.02] {
        let grid = build_grid::<f64>(1, 2, 256, eps).unwrap();
        let pw = gen_pw_potential::<f64>(1234, 2, 1, 1.0, 0.0016).unwrap();
        let v = realize_on_grid(&pw, &grid).unwrap();
        let ls = solve_landscape(&v, 1e-10, Scheme::Stencil2).unwrap();
        let (g, l) = lscf::landscape::derivative_norms(&ls.w, 2.0);
        println!("eps={eps}: grad={g:.4e} lap={l:.4e}");
        pts_g.push((eps.ln(), g.ln()));
        pts_l.push((eps.ln(), l.ln()));
    }
    let slope = |pts: &[(f64, f64)]| {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    println!("grad slope {:.3}, lap slope {:.3}", slope(&pts_g), slope(&pts_l));

    // criterion 10 exploration: predictor correlation + counting over 20 seeds
    for (l, n, delta) in [(8usize, 256usize, 0.1f64), (8, 192, 0.1), (4, 128, 0.1)] {
        let eps = 0.05;
        let grid = build_grid::<f64>(1, l, n, eps).unwrap();
        let mut all_exact = Vec::new();
        let mut all_pred = Vec::new();
        let mut better = 0usize;
        let mut worse = 0usize;
        let mut rel_w_sum = 0.0;
        let mut rel_b_sum = 0.0;
        let mut rel_cnt = 0usize;
        for seed in 0..20u64 {
            let pw = gen_pw_potential::<f64>(seed, l, 1, 1.0, delta).unwrap();
            let v = realize_on_grid(&pw, &grid).unwrap();
            let ls = solve_landscape(&v, 1e-10, Scheme::Stencil2).unwrap();
            let pred = predict_eigenvalues(&ls.w, 10);
            let exact = exact_eigenvalues(&v, 10, Scheme::Stencil2).unwrap();
            let k = pred.len().min(10);
            for i in 0..k {
                all_pred.push(pred[i]);
                all_exact.push(exact[i]);
            }
            // counting comparison on E grid [v_min, v_min+3delta+10eps^2]
            let e_max = 1.0 + 3.0 * delta + 10.0 * eps * eps;
            let e_list: Vec<f64> = (0..12).map(|i| 1.0 + (e_max - 1.0) * i as f64 / 11.0).collect();
            let rows = compare_counting(&v, &ScalarField::zeros(grid), &e_list, Scheme::Stencil2).unwrap();
            for r in rows {
                if r.n_exact > 0.0 {
                    let rw = (r.n_landscape - r.n_exact).abs() / r.n_exact;
                    let rb = (r.n_bare_weyl - r.n_exact).abs() / r.n_exact;
                    rel_w_sum += rw;
                    rel_b_sum += rb;
                    rel_cnt += 1;
                    if rw <= rb { better += 1 } else { worse += 1 }
                }
            }
        }
        let corr = pearson_correlation(&all_exact, &all_pred);
        println!(
            "L={l} n={n} delta={delta}: pairs={} corr={corr:.4} | counting mean rel: landscape={:.4} bare={:.4} (better {better} / worse {worse})",
            all_exact.len(),
            rel_w_sum / rel_cnt as f64,
            rel_b_sum / rel_cnt as f64
        );
    }
}
