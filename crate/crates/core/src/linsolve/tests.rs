use super::*;
use crate::grid::{make_grid, BcKind};
use ks_oracle::DenseGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn grid(n: usize, bc: BcKind, backend: Backend) -> Grid {
    make_grid(n, n, 2.0 * PI, 2.0 * PI, bc, backend).unwrap()
}

fn dense(g: &Grid) -> DenseGrid {
    DenseGrid {
        nx: g.nx(),
        ny: g.ny(),
        lx: g.lx(),
        ly: g.ly(),
        periodic: g.bc() == BcKind::Periodic,
        spectral: g.backend() == Backend::Spectral,
    }
}

fn all_grids(n: usize) -> Vec<Grid> {
    vec![
        grid(n, BcKind::Periodic, Backend::Spectral),
        grid(n, BcKind::Periodic, Backend::FiniteDifference),
        grid(n, BcKind::Neumann, Backend::FiniteDifference),
    ]
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / norm(b)
}

fn random(g: &Grid, rng: &mut ChaCha8Rng) -> Field {
    Field::new(g.clone(), (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn smooth(g: &Grid, rng: &mut ChaCha8Rng) -> Field {
    let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (lx, ly) = (g.lx(), g.ly());
    Field::from_fn(g, |x, y| {
        let (u, v) = (PI * x / lx, PI * y / ly);
        a[0] * (2.0 * u).cos() + a[1] * (2.0 * v).cos() + a[2] * (2.0 * (u + v)).cos() + a[3] * (4.0 * u).cos()
    })
    .unwrap()
}

#[test]
fn helmholtz_constant() {
    for g in all_grids(8) {
        let u = helmholtz_solve(&Field::constant(&g, 2.0).unwrap(), 2.0).unwrap();
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}

#[test]
fn helmholtz_eigenfunction() {
    let g = grid(32, BcKind::Periodic, Backend::Spectral);
    let f = Field::from_fn(&g, |x, _| x.cos()).unwrap();
    let u = helmholtz_solve(&f, 1.0).unwrap();
    for (u, f) in u.values().iter().zip(f.values()) {
        assert!((u - f / 2.0).abs() < 1e-12);
    }
}

#[test]
fn helmholtz_rejects_nonpositive_beta() {
    let g = grid(8, BcKind::Periodic, Backend::Spectral);
    assert!(helmholtz_solve(&Field::zeros(&g), 0.0).is_err());
}

#[test]
fn helmholtz_matches_dense_and_meets_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in all_grids(8) {
        let ops = dense(&g).ops();
        for _ in 0..8 {
            let f = random(&g, &mut rng);
            let beta = rng.gen_range(0.1..10.0);
            let u = helmholtz_solve(&f, beta).unwrap();
            let oracle = ops.helmholtz_solve(f.values(), beta);
            assert!(rel_diff(u.values(), &oracle) < 1e-10, "{:?}", g);
            // Residual recomputed through the dense matrix.
            let au = ops.apply(&ops.helmholtz(beta), u.values());
            assert!(rel_diff(&au, f.values()) <= 1e-12);
        }
    }
}

#[test]
fn advdiff_without_gradient_is_helmholtz() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for g in all_grids(16) {
        let rhs = random(&g, &mut rng);
        let c = Field::constant(&g, 0.7).unwrap();
        let dt = 0.05;
        let sol = advdiff_solve(&rhs, &c, dt, 1.0, &KrylovConfig::default()).unwrap();
        let h = helmholtz_solve(&rhs, 1.0 / dt).unwrap();
        assert!(rel_diff(sol.field.values(), h.values()) < 1e-9);
    }
}

#[test]
fn advdiff_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = KrylovConfig::default();
    for g in all_grids(8) {
        let ops = dense(&g).ops();
        for _ in 0..20 {
            let rhs = random(&g, &mut rng);
            let c = smooth(&g, &mut rng);
            let dt = rng.gen_range(0.001..0.1);
            let chi = rng.gen_range(0.0..2.0);
            let sol = advdiff_solve(&rhs, &c, dt, chi, &cfg).unwrap();
            let oracle = ops.advdiff_solve(rhs.values(), c.values(), dt, chi);
            assert!(rel_diff(sol.field.values(), &oracle) < 1e-9, "{:?} dt {dt} chi {chi}", g);
            // Residual contract, recomputed with the dense operator.
            let ax = ops.apply(&ops.advdiff(c.values(), dt, chi), sol.field.values());
            assert!(rel_diff(&ax, rhs.values()) <= cfg.rel_tol);
        }
    }
}

#[test]
fn advdiff_spectral_mean_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = grid(32, BcKind::Periodic, Backend::Spectral);
    for _ in 0..20 {
        let rhs = random(&g, &mut rng).map(|v| v + 2.0).unwrap();
        let c = smooth(&g, &mut rng);
        let dt = rng.gen_range(0.001..0.1);
        let sol = advdiff_solve(&rhs, &c, dt, 1.0, &KrylovConfig::default()).unwrap();
        let expect = dt * rhs.mean();
        assert!((sol.field.mean() - expect).abs() <= 1e-13 * expect.abs());
    }
}

#[test]
fn advdiff_chi_zero_converges_immediately() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for g in all_grids(16) {
        let rhs = random(&g, &mut rng);
        let c = smooth(&g, &mut rng);
        let sol = advdiff_solve(&rhs, &c, 0.01, 0.0, &KrylovConfig::default()).unwrap();
        assert!(sol.iterations <= 2, "{} iterations on {:?}", sol.iterations, g);
    }
}

#[test]
fn advdiff_reports_no_convergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = grid(32, BcKind::Periodic, Backend::Spectral);
    let rhs = random(&g, &mut rng);
    let c = smooth(&g, &mut rng).map(|v| 40.0 * v).unwrap();
    let cfg = KrylovConfig {
        rel_tol: 1e-10,
        max_iters: 1,
        restart: 1,
    };
    match advdiff_solve(&rhs, &c, 0.5, 5.0, &cfg) {
        Err(Error::NoConvergence { iterations, residual }) => {
            assert_eq!(iterations, 1);
            assert!(residual > 1e-10);
        }
        other => panic!("expected NoConvergence, got {other:?}"),
    }
}

#[test]
fn krylov_config_validation() {
    assert!(KrylovConfig::default().validate().is_ok());
    let bad = KrylovConfig {
        rel_tol: 0.5,
        ..KrylovConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = KrylovConfig {
        max_iters: 10,
        restart: 20,
        ..KrylovConfig::default()
    };
    assert!(bad.validate().is_err());
}
