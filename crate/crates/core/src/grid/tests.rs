use super::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn periodic_spectral(n: usize) -> Grid {
    make_grid(n, n, 2.0 * PI, 2.0 * PI, BcKind::Periodic, Backend::Spectral).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> Field {
    Field::new(grid.clone(), (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Smooth field: a few random low Fourier modes.
fn smooth_field(grid: &Grid, rng: &mut ChaCha8Rng, modes: usize) -> Field {
    let mut terms = Vec::new();
    for kx in 0..=modes {
        for ky in 0..=modes {
            terms.push((kx as f64, ky as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)));
        }
    }
    let (lx, ly) = (grid.lx(), grid.ly());
    Field::from_fn(grid, |x, y| {
        terms
            .iter()
            .map(|(kx, ky, a, ph)| a * (2.0 * PI * (kx * x / lx + ky * y / ly) + ph).cos())
            .sum()
    })
    .unwrap()
}

// ---- dense finite-difference oracle -------------------------------------

fn grad_1d(n: usize, h: f64, bc: BcKind) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let (lo, hi) = match bc {
            BcKind::Periodic => ((i + n - 1) % n, (i + 1) % n),
            BcKind::Neumann => (i.saturating_sub(1), (i + 1).min(n - 1)),
        };
        g[(i, hi)] += 0.5 / h;
        g[(i, lo)] -= 0.5 / h;
    }
    g
}

/// Centered divergence of a wall-normal component with odd ghosts.
fn div_1d(n: usize, h: f64, bc: BcKind) -> DMatrix<f64> {
    match bc {
        BcKind::Periodic => grad_1d(n, h, bc),
        BcKind::Neumann => {
            let mut d = DMatrix::zeros(n, n);
            for i in 0..n {
                if i + 1 < n {
                    d[(i, i + 1)] += 0.5 / h;
                } else {
                    d[(i, n - 1)] -= 0.5 / h;
                }
                if i >= 1 {
                    d[(i, i - 1)] -= 0.5 / h;
                } else {
                    d[(i, 0)] += 0.5 / h;
                }
            }
            d
        }
    }
}

fn fd_oracle(grid: &Grid) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ix = DMatrix::<f64>::identity(nx, nx);
    let iy = DMatrix::<f64>::identity(ny, ny);
    let gx = iy.kronecker(&grad_1d(nx, grid.hx(), grid.bc()));
    let gy = grad_1d(ny, grid.hy(), grid.bc()).kronecker(&ix);
    let dx = iy.kronecker(&div_1d(nx, grid.hx(), grid.bc()));
    let dy = div_1d(ny, grid.hy(), grid.bc()).kronecker(&ix);
    (gx, gy, dx, dy)
}

fn apply(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

// ---- make_grid -----------------------------------------------------------

#[test]
fn make_grid_spacings() {
    let g = periodic_spectral(64);
    assert_eq!(g.hx(), 2.0 * PI / 64.0);
    assert_eq!(g.hy(), 2.0 * PI / 64.0);
    let g = make_grid(8, 16, 1.0, 2.0, BcKind::Neumann, Backend::FiniteDifference).unwrap();
    assert_eq!(g.hx(), 0.125);
    assert_eq!(g.hy(), 0.125);
}

#[test]
fn make_grid_rejects_bad_input() {
    let e = make_grid(9, 8, 2.0 * PI, 2.0 * PI, BcKind::Periodic, Backend::Spectral);
    assert!(matches!(e, Err(Error::BadDimension(_))));
    let e = make_grid(2, 8, 1.0, 1.0, BcKind::Periodic, Backend::FiniteDifference);
    assert!(matches!(e, Err(Error::BadDimension(_))));
    let e = make_grid(8, 8, -1.0, 1.0, BcKind::Periodic, Backend::FiniteDifference);
    assert!(matches!(e, Err(Error::BadDimension(_))));
    let e = make_grid(8, 8, 1.0, 1.0, BcKind::Neumann, Backend::Spectral);
    assert_eq!(e.unwrap_err(), Error::IncompatibleBackend);
}

#[test]
fn field_rejects_non_finite() {
    let g = periodic_spectral(8);
    let mut v = vec![0.0; 64];
    v[3] = f64::NAN;
    assert_eq!(Field::new(g.clone(), v).unwrap_err(), Error::NonFiniteField);
    assert!(matches!(
        Field::new(g, vec![0.0; 3]),
        Err(Error::LengthMismatch { .. })
    ));
}

// ---- gradient ------------------------------------------------------------

#[test]
fn gradient_of_constant_vanishes() {
    for grid in [
        periodic_spectral(16),
        make_grid(8, 12, 1.0, 2.0, BcKind::Neumann, Backend::FiniteDifference).unwrap(),
        make_grid(8, 12, 1.0, 2.0, BcKind::Periodic, Backend::FiniteDifference).unwrap(),
    ] {
        let g = Field::constant(&grid, 3.7).unwrap().gradient().unwrap();
        assert!(g.x_values().iter().chain(g.y_values()).all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn spectral_gradient_of_cosine() {
    let grid = periodic_spectral(32);
    let g = Field::from_fn(&grid, |x, _| x.cos()).unwrap().gradient().unwrap();
    let expect = Field::from_fn(&grid, |x, _| -x.sin()).unwrap();
    assert!(max_abs_diff(g.x_values(), expect.values()) < 1e-12);
    assert!(g.y_values().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn fd_gradient_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for bc in [BcKind::Periodic, BcKind::Neumann] {
        let grid = make_grid(16, 16, 1.0, 1.5, bc, Backend::FiniteDifference).unwrap();
        let (gx, gy, _, _) = fd_oracle(&grid);
        let f = smooth_field(&grid, &mut rng, 3);
        let g = f.gradient().unwrap();
        let ox = apply(&gx, f.values());
        let oy = apply(&gy, f.values());
        assert!(max_abs_diff(g.x_values(), &ox) <= 1e-12 * norm(&ox));
        assert!(max_abs_diff(g.y_values(), &oy) <= 1e-12 * norm(&oy));
    }
}

// ---- divergence ----------------------------------------------------------

#[test]
fn divergence_of_constant_vanishes() {
    for grid in [
        periodic_spectral(16),
        make_grid(8, 8, 1.0, 1.0, BcKind::Periodic, Backend::FiniteDifference).unwrap(),
    ] {
        let v = VectorField::new(grid.clone(), vec![1.0; grid.len()], vec![1.0; grid.len()]).unwrap();
        assert!(v.divergence().unwrap().values().iter().all(|d| d.abs() < 1e-12));
    }
}

#[test]
fn spectral_divergence_of_sine() {
    let grid = periodic_spectral(32);
    let sx = Field::from_fn(&grid, |x, _| x.sin()).unwrap();
    let v = VectorField::new(grid.clone(), sx.into_values(), vec![0.0; grid.len()]).unwrap();
    let d = v.divergence().unwrap();
    let expect = Field::from_fn(&grid, |x, _| x.cos()).unwrap();
    assert!(max_abs_diff(d.values(), expect.values()) < 1e-12);
}

#[test]
fn neumann_divergence_theorem() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = make_grid(12, 12, 1.0, 1.0, BcKind::Neumann, Backend::FiniteDifference).unwrap();
    let (_, _, dx, dy) = fd_oracle(&grid);
    for _ in 0..5 {
        let vx = random_field(&grid, &mut rng).into_values();
        let vy = random_field(&grid, &mut rng).into_values();
        let scale = (norm(&vx).powi(2) + norm(&vy).powi(2)).sqrt();
        let v = VectorField::new(grid.clone(), vx.clone(), vy.clone()).unwrap();
        let d = v.divergence().unwrap();
        assert!((d.sum() * grid.cell_area()).abs() <= 1e-12 * scale);
        let oracle: Vec<f64> = apply(&dx, &vx).iter().zip(apply(&dy, &vy)).map(|(a, b)| a + b).collect();
        assert!(max_abs_diff(d.values(), &oracle) <= 1e-12 * norm(&oracle));
    }
}

// ---- laplacian -----------------------------------------------------------

#[test]
fn laplacian_of_constant_vanishes() {
    for grid in [
        periodic_spectral(16),
        make_grid(8, 8, 1.0, 1.0, BcKind::Neumann, Backend::FiniteDifference).unwrap(),
    ] {
        let l = Field::constant(&grid, 2.5).unwrap().laplacian().unwrap();
        assert!(l.values().iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn spectral_laplacian_eigenfunction() {
    let grid = periodic_spectral(32);
    let l = Field::from_fn(&grid, |x, _| x.cos()).unwrap().laplacian().unwrap();
    let expect = Field::from_fn(&grid, |x, _| -x.cos()).unwrap();
    assert!(max_abs_diff(l.values(), expect.values()) < 1e-12);
}

#[test]
fn neumann_laplacian_matches_dense_oracle() {
    let grid = make_grid(16, 12, 2.0, 1.0, BcKind::Neumann, Backend::FiniteDifference).unwrap();
    let (gx, gy, dx, dy) = fd_oracle(&grid);
    let lap = &dx * &gx + &dy * &gy;
    // Row sums vanish.
    for r in 0..lap.nrows() {
        assert!(lap.row(r).sum().abs() < 1e-9);
    }
    let lx = grid.lx();
    let f = Field::from_fn(&grid, |x, _| (PI * x / lx).cos()).unwrap();
    let l = f.laplacian().unwrap();
    let oracle = apply(&lap, f.values());
    assert!(max_abs_diff(l.values(), &oracle) <= 1e-12 * norm(&oracle));
}

#[test]
fn fd_laplacian_is_second_order() {
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in [16, 32, 64, 128] {
        let grid = make_grid(n, n, 1.0, 1.0, BcKind::Neumann, Backend::FiniteDifference).unwrap();
        let k = PI / grid.lx();
        let f = Field::from_fn(&grid, |x, _| (k * x).cos()).unwrap();
        let l = f.laplacian().unwrap();
        let exact = Field::from_fn(&grid, |x, _| -k * k * (k * x).cos()).unwrap();
        hs.push(grid.hx().ln());
        errs.push(max_abs_diff(l.values(), exact.values()).ln());
    }
    let slope = least_squares_slope(&hs, &errs);
    assert!((1.9..=2.1).contains(&slope), "slope {slope}");
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

// ---- dealias -------------------------------------------------------------

#[test]
fn dealias_passes_low_modes() {
    let grid = periodic_spectral(32);
    let f = Field::from_fn(&grid, |x, y| (8.0 * x).cos() + (3.0 * x + 8.0 * y).sin() + 0.5).unwrap();
    let d = f.dealias().unwrap();
    assert!(max_abs_diff(d.values(), f.values()) < 1e-14);
}

#[test]
fn dealias_removes_top_mode() {
    let grid = periodic_spectral(32);
    let f = Field::from_fn(&grid, |x, _| (15.0 * x).cos()).unwrap();
    let d = f.dealias().unwrap();
    assert!(d.values().iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn dealias_is_idempotent_bitwise() {
    let grid = periodic_spectral(32);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let once = random_field(&grid, &mut rng).dealias().unwrap();
        let twice = once.dealias().unwrap();
        assert_eq!(once.values(), twice.values());
    }
}

#[test]
fn dealias_requires_spectral() {
    let grid = make_grid(8, 8, 1.0, 1.0, BcKind::Periodic, Backend::FiniteDifference).unwrap();
    assert_eq!(Field::zeros(&grid).dealias().unwrap_err(), Error::WrongBackend);
}

#[test]
fn spectral_exactness_on_mode_sums() {
    let grid = periodic_spectral(32);
    let f = Field::from_fn(&grid, |x, y| (2.0 * x + y).sin() + 0.3 * (5.0 * y).cos()).unwrap();
    let g = f.gradient().unwrap();
    let gx = Field::from_fn(&grid, |x, y| 2.0 * (2.0 * x + y).cos()).unwrap();
    let gy = Field::from_fn(&grid, |x, y| (2.0 * x + y).cos() - 1.5 * (5.0 * y).sin()).unwrap();
    assert!(max_abs_diff(g.x_values(), gx.values()) < 1e-12);
    assert!(max_abs_diff(g.y_values(), gy.values()) < 1e-12);
    let l = f.laplacian().unwrap();
    let lap = Field::from_fn(&grid, |x, y| -5.0 * (2.0 * x + y).sin() - 7.5 * (5.0 * y).cos()).unwrap();
    assert!(max_abs_diff(l.values(), lap.values()) < 1e-12);
}

// ---- invariants ----------------------------------------------------------

fn any_grid() -> impl Strategy<Value = Grid> {
    (0usize..3, 2usize..9, 2usize..9, 0.5f64..7.0, 0.5f64..7.0).prop_map(|(kind, hx, hy, lx, ly)| {
        let (bc, backend) = match kind {
            0 => (BcKind::Periodic, Backend::Spectral),
            1 => (BcKind::Periodic, Backend::FiniteDifference),
            _ => (BcKind::Neumann, Backend::FiniteDifference),
        };
        make_grid(2 * hx, 2 * hy, lx, ly, bc, backend).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_divergence_of_gradient(grid in any_grid(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&grid, &mut rng);
        let lap = f.laplacian().unwrap();
        let composed = f.gradient().unwrap().divergence().unwrap();
        prop_assert!(max_abs_diff(lap.values(), composed.values()) <= 1e-12 * norm(lap.values()).max(1e-300));
    }

    #[test]
    fn divergence_is_mean_free(grid in any_grid(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vx = random_field(&grid, &mut rng).into_values();
        let vy = random_field(&grid, &mut rng).into_values();
        let d = VectorField::new(grid.clone(), vx, vy).unwrap().divergence().unwrap();
        prop_assert!(d.mean().abs() <= 1e-13);
    }

    #[test]
    fn spectral_gradient_is_minus_adjoint_of_divergence(n in 2usize..9, seed in any::<u64>()) {
        let grid = periodic_spectral(2 * n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&grid, &mut rng);
        let v = VectorField::new(
            grid.clone(),
            random_field(&grid, &mut rng).into_values(),
            random_field(&grid, &mut rng).into_values(),
        ).unwrap();
        let lhs = f.gradient().unwrap().inner(&v).unwrap();
        let rhs = -f.inner(&v.divergence().unwrap()).unwrap();
        let scale = f.gradient().unwrap().inner(&f.gradient().unwrap()).unwrap().sqrt()
            * v.inner(&v).unwrap().sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
    }
}
