//! Landscape-solver oracles: dense LU reference solve, exhaustive minima
//! scan, refined-grid derivative norms, and the conjugated-operator
//! isospectrality refinement study.

use lscf::grid::{build_grid, GridSpec, ScalarField, Scheme};
use lscf::landscape::{
    conjugated_hamiltonian_spectrum, derivative_norms, local_minima, solve_landscape,
};
use lscf::potential::{gen_pw_potential, realize_on_grid};
use nalgebra::{DMatrix, DVector};

fn two_cell(grid: GridSpec<f64>, lo: f64, hi: f64) -> ScalarField<f64> {
    let half = grid.period() as f64 / 2.0;
    ScalarField::from_fn(grid, move |x| if x[0] < half { lo } else { hi })
}

#[test]
fn landscape_matches_dense_lu_oracle() {
    let grid = build_grid::<f64>(1, 2, 64, 0.1).unwrap();
    let v = two_cell(grid, 1.0, 1.2);
    let ls = solve_landscape(&v, 1e-12, Scheme::Stencil2).unwrap();

    // independent dense solve of the same linear system
    let n = grid.len();
    let h = grid.spacing();
    let e2 = 0.1 * 0.1;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = v.values()[i] + 2.0 * e2 / (h * h);
        m[(i, (i + 1) % n)] -= e2 / (h * h);
        m[(i, (i + n - 1) % n)] -= e2 / (h * h);
    }
    let rhs = DVector::<f64>::from_element(n, 1.0);
    let u_dense = m.lu().solve(&rhs).expect("dense LU");
    for (a, b) in ls.u.values().iter().zip(u_dense.iter()) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    assert!(ls.u.min_value() > 0.0);
}

#[test]
fn residual_reassertable_independently() {
    let grid = build_grid::<f64>(1, 4, 128, 0.05).unwrap();
    let pw = gen_pw_potential::<f64>(3, 4, 1, 1.0, 0.1).unwrap();
    let v = realize_on_grid(&pw, &grid).unwrap();
    let ls = solve_landscape(&v, 1e-10, Scheme::Stencil2).unwrap();
    // recompute ||H u - 1||_2 / ||1||_2 by hand
    let e2 = 0.05 * 0.05;
    let lap = lscf::grid::laplacian_apply(&ls.u, Scheme::Stencil2);
    let mut num = 0.0;
    for i in 0..grid.len() {
        let r = e2 * lap.values()[i] + v.values()[i] * ls.u.values()[i] - 1.0;
        num += r * r;
    }
    let rel = (num / grid.len() as f64).sqrt();
    assert!(rel <= 1e-9, "independent residual {rel}");

    // resolvent bounds: 1/max(v) - tol <= u <= 1/min(v) + tol
    let tol = 1e-9;
    for &u in ls.u.values() {
        assert!(u <= 1.0 / v.min_value() + tol);
        assert!(u >= 1.0 / v.max_value() - tol);
    }
}

#[test]
fn minima_match_exhaustive_scan() {
    let grid = build_grid::<f64>(1, 4, 128, 0.05).unwrap();
    let pw = gen_pw_potential::<f64>(17, 4, 1, 1.0, 0.2).unwrap();
    let v = realize_on_grid(&pw, &grid).unwrap();
    let ls = solve_landscape(&v, 1e-10, Scheme::Stencil2).unwrap();
    let got = local_minima(&ls.w);

    // independent scan in plain index arithmetic
    let n = grid.len();
    let w = ls.w.values();
    let mut want = Vec::new();
    for i in 0..n {
        let up = w[(i + 1) % n];
        let down = w[(i + n - 1) % n];
        if w[i] < up && w[i] < down {
            want.push((w[i], i));
        }
    }
    want.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    assert_eq!(got.len(), want.len());
    for (g, e) in got.iter().zip(&want) {
        assert_eq!(g.1, e.1);
        assert_eq!(g.0, e.0);
    }
    assert!(!got.is_empty());
}

#[test]
fn minima_match_exhaustive_scan_2d() {
    let grid = build_grid::<f64>(2, 2, 16, 0.1).unwrap();
    let pw = gen_pw_potential::<f64>(29, 2, 2, 1.0, 0.3).unwrap();
    let v = realize_on_grid(&pw, &grid).unwrap();
    let ls = solve_landscape(&v, 1e-10, Scheme::Stencil2).unwrap();
    let got = local_minima(&ls.w);
    let n = 16usize;
    let w = ls.w.values();
    let mut want = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let c = w[i * n + j];
            let mut is_min = true;
            for di in [-1i64, 0, 1] {
                for dj in [-1i64, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = (i as i64 + di).rem_euclid(n as i64) as usize;
                    let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
                    if !(c < w[ii * n + jj]) {
                        is_min = false;
                    }
                }
            }
            if is_min {
                want.push((c, i * n + j));
            }
        }
    }
    want.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let got_idx: Vec<usize> = got.iter().map(|g| g.1).collect();
    let want_idx: Vec<usize> = want.iter().map(|g| g.1).collect();
    assert_eq!(got_idx, want_idx);
}

#[test]
fn derivative_norms_match_refined_solve() {
    let pw = gen_pw_potential::<f64>(5, 2, 1, 1.0, 0.1).unwrap();
    let norms = |n: usize| {
        let grid = build_grid::<f64>(1, 2, n, 0.08).unwrap();
        let v = realize_on_grid(&pw, &grid).unwrap();
        let ls = solve_landscape(&v, 1e-11, Scheme::Stencil2).unwrap();
        derivative_norms(&ls.w, 2.0)
    };
    let (g1, l1) = norms(128);
    // refined-grid finite-difference oracle: solve on 2n, difference by hand
    let grid2 = build_grid::<f64>(1, 2, 256, 0.08).unwrap();
    let v2 = realize_on_grid(&pw, &grid2).unwrap();
    let ls2 = solve_landscape(&v2, 1e-11, Scheme::Stencil2).unwrap();
    let w2 = ls2.w.values();
    let n2 = grid2.len();
    let h2 = grid2.spacing();
    let mut grad_sq = 0.0;
    let mut lap_sq = 0.0;
    for i in 0..n2 {
        let up = w2[(i + 1) % n2];
        let down = w2[(i + n2 - 1) % n2];
        let g = (up - down) / (2.0 * h2);
        let l = (up - 2.0 * w2[i] + down) / (h2 * h2);
        grad_sq += g * g * h2;
        lap_sq += l * l * h2;
    }
    let (g_ref, l_ref) = (grad_sq.sqrt(), lap_sq.sqrt());
    assert!(
        (g1 - g_ref).abs() <= 0.02 * g_ref,
        "grad: {g1} vs refined {g_ref}"
    );
    assert!(
        (l1 - l_ref).abs() <= 0.02 * l_ref,
        "lap: {l1} vs refined {l_ref}"
    );
}

#[test]
fn conjugated_spectrum_mismatch_shrinks_under_refinement() {
    let pw = gen_pw_potential::<f64>(7, 2, 1, 1.0, 0.15).unwrap();
    let mismatch = |n: usize| -> f64 {
        let grid = build_grid::<f64>(1, 2, n, 0.1).unwrap();
        let v = realize_on_grid(&pw, &grid).unwrap();
        let conj = conjugated_hamiltonian_spectrum(&v, 4).unwrap();
        let direct = lscf::analysis::exact_eigenvalues(&v, 4, Scheme::Stencil2).unwrap();
        assert!(conj.max_imag <= 1e-8);
        // form lower bound
        assert!(conj.eigenvalues[0] >= v.min_value() - 1e-6);
        conj.eigenvalues
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .sum()
    };
    let coarse = mismatch(64);
    let fine = mismatch(128);
    assert!(
        coarse / fine >= 3.0,
        "refinement factor {} (coarse {coarse:.3e}, fine {fine:.3e})",
        coarse / fine
    );
}

#[test]
fn landscape_scheme_choice_spectral_works_on_smooth_potential() {
    let grid = build_grid::<f64>(1, 4, 64, 0.1).unwrap();
    let v = ScalarField::from_fn(grid, |x| {
        1.5 + 0.2 * (std::f64::consts::PI * x[0] / 2.0).sin()
    });
    let a = solve_landscape(&v, 1e-11, Scheme::Spectral).unwrap();
    let b = solve_landscape(&v, 1e-11, Scheme::Stencil2).unwrap();
    // smooth potential: schemes agree to discretization accuracy
    let diff = lscf::grid::lp_norm(&a.w.sub(&b.w).unwrap(), f64::INFINITY);
    assert!(diff < 1e-3, "scheme gap {diff}");
}
