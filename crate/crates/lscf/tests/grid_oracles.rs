//! Independent oracles for the grid operators: dense matrix application,
//! FFT-free Fourier sums, refined-grid quadrature, and scheme-convergence
//! ratios.

use lscf::grid::{
    build_grid, laplacian_apply, lp_norm, poisson_solve, sobolev_norm, GridSpec, ScalarField,
    Scheme,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(grid: GridSpec<f64>, seed: u64, mean_zero: bool) -> ScalarField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>() - 0.5).collect();
    let f = ScalarField::new(grid, values).unwrap();
    if mean_zero {
        f.project_mean_zero()
    } else {
        f
    }
}

/// Band-limited trigonometric field with a known closed form.
fn trig_field(grid: GridSpec<f64>, seed: u64) -> (ScalarField<f64>, impl Fn(f64) -> f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64, f64)> = (1..=3)
        .map(|m| {
            let k = 2.0 * std::f64::consts::PI * m as f64 / grid.period() as f64;
            (k, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
        .collect();
    let c2 = coeffs.clone();
    let f = ScalarField::from_fn(grid, move |x| {
        c2.iter()
            .map(|&(k, a, b)| a * (k * x[0]).cos() + b * (k * x[0]).sin())
            .sum()
    });
    let closed = move |x: f64| -> f64 {
        coeffs
            .iter()
            .map(|&(k, a, b)| a * (k * x).cos() + b * (k * x).sin())
            .sum()
    };
    (f, closed)
}

#[test]
fn stencil_laplacian_matches_dense_matrix_oracle() {
    let grid = build_grid::<f64>(1, 2, 32, 0.1).unwrap();
    let f = random_field(grid, 11, false);
    // independent dense assembly of the periodic second-difference matrix
    let n = grid.len();
    let h = grid.spacing();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let up = (i + 1) % n;
        let down = (i + n - 1) % n;
        out[i] = (2.0 * f.values()[i] - f.values()[up] - f.values()[down]) / (h * h);
    }
    let lap = laplacian_apply(&f, Scheme::Stencil2);
    for (a, b) in lap.values().iter().zip(&out) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn stencil_laplacian_matches_dense_matrix_oracle_2d() {
    let grid = build_grid::<f64>(2, 2, 8, 0.1).unwrap();
    let f = random_field(grid, 12, false);
    let n = 8usize;
    let h = grid.spacing();
    let idx = |i: usize, j: usize| i * n + j;
    let lap = laplacian_apply(&f, Scheme::Stencil2);
    for i in 0..n {
        for j in 0..n {
            let v = f.values();
            let want = (4.0 * v[idx(i, j)]
                - v[idx((i + 1) % n, j)]
                - v[idx((i + n - 1) % n, j)]
                - v[idx(i, (j + 1) % n)]
                - v[idx(i, (j + n - 1) % n)])
                / (h * h);
            assert!((lap.values()[idx(i, j)] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn poisson_round_trip_residual() {
    let grid = build_grid::<f64>(1, 4, 64, 0.05).unwrap();
    let g = random_field(grid, 21, true);
    let phi = poisson_solve(&g).unwrap();
    let back = laplacian_apply(&phi, Scheme::Spectral);
    let err = lp_norm(&back.sub(&g).unwrap(), 2.0) / lp_norm(&g, 2.0);
    assert!(err < 1e-10, "round-trip residual {err}");

    // inverse then forward on mean-zero fields
    let f = random_field(grid, 22, true);
    let lap = laplacian_apply(&f, Scheme::Spectral);
    let rec = poisson_solve(&lap).unwrap();
    let err2 = lp_norm(&rec.sub(&f).unwrap(), 2.0) / lp_norm(&f, 2.0);
    assert!(err2 < 1e-12, "identity residual {err2}");
}

#[test]
fn sobolev_negative_order_matches_direct_dft() {
    let grid = build_grid::<f64>(1, 2, 32, 0.1).unwrap();
    let f = random_field(grid, 31, false);
    // FFT-free direct DFT
    let n = grid.len();
    let l = grid.period() as f64;
    let mut acc = 0.0;
    for m in 0..n {
        let m_fold = if m <= n / 2 { m as i64 } else { m as i64 - n as i64 };
        let k = 2.0 * std::f64::consts::PI * m_fold as f64 / l;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &v) in f.values().iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (m * j) as f64 / n as f64;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        re /= n as f64;
        im /= n as f64;
        acc += (1.0 + k * k).powi(-2) * (re * re + im * im);
    }
    let want = (acc * l).sqrt();
    let got = sobolev_norm(&f, -2.0);
    assert!(
        (got - want).abs() <= 1e-10 * want,
        "H^-2: {got} vs direct {want}"
    );
}

#[test]
fn lp_norm_matches_refined_riemann_sum() {
    let grid = build_grid::<f64>(1, 4, 64, 0.05).unwrap();
    let (f, closed) = trig_field(grid, 41);
    let got = lp_norm(&f, 4.0);
    // refined Riemann oracle on an 8x finer grid
    let fine = 512usize;
    let hf = 4.0 / fine as f64;
    let mut acc = 0.0;
    for j in 0..fine {
        let x = j as f64 * hf;
        acc += closed(x).abs().powi(4) * hf;
    }
    let want = acc.powf(0.25);
    assert!(
        (got - want).abs() <= 2e-3 * want,
        "L^4: {got} vs refined {want}"
    );
}

#[test]
fn stencil_spectral_gap_shrinks_second_order() {
    // smooth single-mode field: the scheme disagreement is O(h^2), so the
    // error ratio between n and 2n sits near 4.
    let l = 4usize;
    let gap = |n: usize| -> f64 {
        let grid = build_grid::<f64>(1, l, n, 0.05).unwrap();
        let k = 2.0 * std::f64::consts::PI / l as f64;
        let f = ScalarField::from_fn(grid, |x| (k * x[0]).cos());
        let a = laplacian_apply(&f, Scheme::Stencil2);
        let b = laplacian_apply(&f, Scheme::Spectral);
        lp_norm(&a.sub(&b).unwrap(), 2.0)
    };
    let ratio = gap(32) / gap(64);
    assert!(
        (3.5..=4.5).contains(&ratio),
        "convergence ratio {ratio} outside [3.5, 4.5]"
    );
}

#[test]
fn operations_are_bit_deterministic() {
    let grid = build_grid::<f64>(2, 2, 12, 0.07).unwrap();
    let f = random_field(grid, 55, true);
    let a1 = laplacian_apply(&f, Scheme::Spectral);
    let a2 = laplacian_apply(&f, Scheme::Spectral);
    assert_eq!(a1.values(), a2.values());
    let p1 = poisson_solve(&f).unwrap();
    let p2 = poisson_solve(&f).unwrap();
    assert_eq!(p1.values(), p2.values());
    assert_eq!(sobolev_norm(&f, 1.5).to_bits(), sobolev_norm(&f, 1.5).to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Per-mode Sobolev scaling: for a single Fourier mode the squared
    /// H^s norm is exactly (1+|k|^2)^s times the squared L^2 norm.
    #[test]
    fn single_mode_sobolev_scaling(m in 1usize..10, s in -2.5f64..2.5) {
        let grid = build_grid::<f64>(1, 4, 64, 0.1).unwrap();
        let k = 2.0 * std::f64::consts::PI * m as f64 / 4.0;
        let f = ScalarField::from_fn(grid, |x| (k * x[0]).sin());
        let ratio = (sobolev_norm(&f, s) / sobolev_norm(&f, 0.0)).powi(2);
        let want = (1.0 + k * k).powf(s);
        prop_assert!((ratio - want).abs() <= 1e-9 * want.abs());
    }

    /// Laplacian of any band-limited field has zero mean (discrete
    /// divergence theorem on the torus).
    #[test]
    fn laplacian_has_zero_mean(seed in 0u64..500) {
        let grid = build_grid::<f64>(1, 2, 32, 0.1).unwrap();
        let f = {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
            ScalarField::new(grid, values).unwrap()
        };
        for scheme in [Scheme::Stencil2, Scheme::Spectral] {
            let lap = laplacian_apply(&f, scheme);
            prop_assert!(lap.mean().abs() < 1e-12);
        }
    }
}
