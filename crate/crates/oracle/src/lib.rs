//! Dense-matrix reference discretizations.
//!
//! Every operator here is assembled entry by entry from closed-form
//! formulas (cotangent differentiation matrices, explicit cosine sums for
//! the 2/3 filter, explicit ghost-cell stencils), without FFTs, so the
//! solver's fast paths can be checked against something independent.
//! Sample ordering is row-major with x fastest, matching the solver.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct DenseGrid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub periodic: bool,
    pub spectral: bool,
}

/// Assembled operators on one grid.
pub struct DenseOps {
    pub n: usize,
    pub gx: DMatrix<f64>,
    pub gy: DMatrix<f64>,
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub lap: DMatrix<f64>,
    /// 2/3-rule projection (identity on finite-difference grids).
    pub filter: DMatrix<f64>,
}

/// Fourier differentiation matrix on `n` equispaced nodes of a period `len`
/// (even `n`; the Nyquist mode is differentiated to zero).
pub fn spectral_diff_1d(n: usize, len: f64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    let scale = 2.0 * PI / len;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let m = i as i64 - j as i64;
                let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = scale * 0.5 * sign / (m as f64 * PI / n as f64).tan();
            }
        }
    }
    d
}

/// Projection onto integer modes `|k| <= n/3`.
pub fn dealias_1d(n: usize) -> DMatrix<f64> {
    let kc = n / 3;
    let mut f = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let m = i as f64 - j as f64;
            let mut s = 1.0;
            for k in 1..=kc {
                s += 2.0 * (2.0 * PI * k as f64 * m / n as f64).cos();
            }
            f[(i, j)] = s / n as f64;
        }
    }
    f
}

/// Centered difference of a scalar: wraparound or even mirror ghosts.
pub fn fd_grad_1d(n: usize, h: f64, periodic: bool) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let (lo, hi) = if periodic {
            ((i + n - 1) % n, (i + 1) % n)
        } else {
            (i.saturating_sub(1), (i + 1).min(n - 1))
        };
        g[(i, hi)] += 0.5 / h;
        g[(i, lo)] -= 0.5 / h;
    }
    g
}

/// Centered difference of a wall-normal vector component: odd mirror ghosts.
pub fn fd_div_1d(n: usize, h: f64, periodic: bool) -> DMatrix<f64> {
    if periodic {
        return fd_grad_1d(n, h, true);
    }
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

impl DenseGrid {
    pub fn ops(&self) -> DenseOps {
        let (nx, ny) = (self.nx, self.ny);
        let (hx, hy) = (self.lx / nx as f64, self.ly / ny as f64);
        let ix = DMatrix::<f64>::identity(nx, nx);
        let iy = DMatrix::<f64>::identity(ny, ny);
        let (gx1, gy1, dx1, dy1) = if self.spectral {
            let ax = spectral_diff_1d(nx, self.lx);
            let ay = spectral_diff_1d(ny, self.ly);
            (ax.clone(), ay.clone(), ax, ay)
        } else {
            (
                fd_grad_1d(nx, hx, self.periodic),
                fd_grad_1d(ny, hy, self.periodic),
                fd_div_1d(nx, hx, self.periodic),
                fd_div_1d(ny, hy, self.periodic),
            )
        };
        let gx = iy.kronecker(&gx1);
        let gy = gy1.kronecker(&ix);
        let dx = iy.kronecker(&dx1);
        let dy = dy1.kronecker(&ix);
        let lap = &dx * &gx + &dy * &gy;
        let filter = if self.spectral {
            dealias_1d(ny).kronecker(&dealias_1d(nx))
        } else {
            DMatrix::identity(nx * ny, nx * ny)
        };
        DenseOps {
            n: nx * ny,
            gx,
            gy,
            dx,
            dy,
            lap,
            filter,
        }
    }
}

fn vec_of(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Vec<f64> {
    a.lu().solve(&b).expect("singular dense system").as_slice().to_vec()
}

impl DenseOps {
    pub fn apply(&self, m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        (m * vec_of(v)).as_slice().to_vec()
    }

    /// `beta I - Lap`.
    pub fn helmholtz(&self, beta: f64) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) * beta - &self.lap
    }

    pub fn helmholtz_solve(&self, f: &[f64], beta: f64) -> Vec<f64> {
        solve(self.helmholtz(beta), vec_of(f))
    }

    /// `(1/dt) I - Lap + chi div(P(rho P grad c))`, `P` the 2/3 filter.
    pub fn advdiff(&self, c: &[f64], dt: f64, chi: f64) -> DMatrix<f64> {
        let c = vec_of(c);
        let gcx = &self.filter * (&self.gx * &c);
        let gcy = &self.filter * (&self.gy * &c);
        let adv = &self.dx * &self.filter * DMatrix::from_diagonal(&gcx)
            + &self.dy * &self.filter * DMatrix::from_diagonal(&gcy);
        self.helmholtz(1.0 / dt) + adv * chi
    }

    pub fn advdiff_solve(&self, rhs: &[f64], c: &[f64], dt: f64, chi: f64) -> Vec<f64> {
        solve(self.advdiff(c, dt, chi), vec_of(rhs))
    }

    /// One semi-implicit Euler step: density solve, then concentration solve.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        rho: &[f64],
        c: &[f64],
        dt: f64,
        chi: f64,
        alpha: f64,
        gamma: f64,
        tau: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let rhs: Vec<f64> = rho.iter().map(|r| r / dt).collect();
        let rho1 = self.advdiff_solve(&rhs, c, dt, chi);
        let c1 = if tau == 0.0 {
            let g: Vec<f64> = rho1.iter().map(|r| gamma * r).collect();
            self.helmholtz_solve(&g, alpha)
        } else {
            let rhs: Vec<f64> = c
                .iter()
                .zip(&rho1)
                .map(|(c, r)| tau / dt * c + gamma * r)
                .collect();
            self.helmholtz_solve(&rhs, tau / dt + alpha)
        };
        (rho1, c1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_matrix_differentiates_sine() {
        let n = 16;
        let d = spectral_diff_1d(n, 2.0 * PI);
        let x: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
        let f: Vec<f64> = x.iter().map(|x| (3.0 * x).sin()).collect();
        let df = &d * DVector::from_column_slice(&f);
        for (i, x) in x.iter().enumerate() {
            assert!((df[i] - 3.0 * (3.0 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn filter_is_a_projection() {
        let f = dealias_1d(12);
        assert!((&f * &f - &f).norm() < 1e-12);
    }
}
