//! Linear solves for one time step: the constant-coefficient Helmholtz
//! operator `beta I - Lap` and the non-symmetric density operator
//! `(1/dt) I - Lap + chi div(. grad c)`.

use crate::error::{Error, Result};
use crate::grid::{Backend, Field, Grid};
use num_complex::Complex64;

/// Restarted flexible GMRES settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub rel_tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            rel_tol: 1e-10,
            max_iters: 500,
            restart: 50,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol = {} must lie in (0, 1e-2]",
                self.rel_tol
            )));
        }
        if self.restart < 1 || self.max_iters < self.restart {
            return Err(Error::InvalidParameter(format!(
                "need max_iters ({}) >= restart ({}) >= 1",
                self.max_iters, self.restart
            )));
        }
        Ok(())
    }
}

/// A converged iterative solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: Field,
    pub iterations: usize,
    /// Final relative residual `|b - A x| / |b|`.
    pub residual: f64,
}

/// Tolerance of the inner conjugate-gradient Helmholtz solves.
const CG_REL_TOL: f64 = 1e-13;
const CG_MAX_ITERS: usize = 20_000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mean(a: &[f64]) -> f64 {
    crate::grid::field_sum(a) / a.len() as f64
}

/// `(beta I - Lap)` applied to raw samples.
pub(crate) fn helmholtz_apply(grid: &Grid, u: &[f64], beta: f64) -> Vec<f64> {
    let lap = grid.laplacian_raw(u);
    u.iter().zip(&lap).map(|(u, l)| beta * u - l).collect()
}

/// Solves `(beta I - Lap) u = f` on raw samples: exactly per Fourier mode on
/// spectral grids, by conjugate gradients on finite-difference grids.
pub(crate) fn helmholtz_raw(grid: &Grid, f: &[f64], beta: f64, rel_tol: f64) -> Result<Vec<f64>> {
    if let Some(u) = grid.helmholtz_spectral_raw(f, beta) {
        return Ok(u);
    }
    let fnorm = norm(f);
    let mut u = vec![0.0; f.len()];
    if fnorm == 0.0 {
        return Ok(u);
    }
    let mut r = f.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..CG_MAX_ITERS {
        if rr.sqrt() <= rel_tol * fnorm {
            return Ok(u);
        }
        let ap = helmholtz_apply(grid, &p, beta);
        let alpha = rr / dot(&p, &ap);
        for i in 0..u.len() {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::NonFiniteIterate);
        }
        // Recompute the true residual periodically to stop drift.
        if it % 50 == 49 {
            let au = helmholtz_apply(grid, &u, beta);
            for i in 0..r.len() {
                r[i] = f[i] - au[i];
            }
        }
        let beta_cg = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta_cg * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        iterations: CG_MAX_ITERS,
        residual: rr.sqrt() / fnorm,
    })
}

/// Solves `(beta I - Lap) u = f`.
pub fn helmholtz_solve(f: &Field, beta: f64) -> Result<Field> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    let u = helmholtz_raw(f.grid(), f.values(), beta, CG_REL_TOL)?;
    Field::new(f.grid().clone(), u)
}

/// Right-preconditioned flexible GMRES(m).
///
/// Starts from `x0`; convergence is judged on the recomputed true residual
/// at the end of each restart cycle.
pub(crate) fn fgmres(
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    prec: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    x0: Vec<f64>,
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let mut x = x0;
    let mut iters = 0usize;
    loop {
        let ax = op(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if !beta.is_finite() {
            return Err(Error::NonFiniteIterate);
        }
        let rel = beta / bnorm;
        if rel <= cfg.rel_tol {
            return Ok((x, iters, rel));
        }
        if iters >= cfg.max_iters {
            return Err(Error::NoConvergence {
                iterations: iters,
                residual: rel,
            });
        }

        let m = cfg.restart;
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        // Column-major Hessenberg: hess[k] holds column k (length k + 2).
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];

        let mut k = 0;
        while k < m && iters < cfg.max_iters {
            let z = prec(&basis[k])?;
            let mut w = op(&z);
            if !w.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteIterate);
            }
            let mut col = vec![0.0; k + 2];
            for (j, v) in basis.iter().enumerate() {
                let h = dot(&w, v);
                col[j] = h;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= h * vi;
                }
            }
            let hnext = norm(&w);
            col[k + 1] = hnext;

            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let denom = col[k].hypot(col[k + 1]);
            cs[k] = col[k] / denom;
            sn[k] = col[k + 1] / denom;
            col[k] = denom;
            col[k + 1] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];

            hess.push(col);
            zs.push(z);
            iters += 1;
            k += 1;

            // Stop a bit early relative to the target; the outer loop checks
            // the true residual.
            if g[k].abs() <= 0.5 * cfg.rel_tol * bnorm || hnext <= f64::EPSILON * bnorm {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= hess[j][i] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (yj, z) in y.iter().zip(&zs) {
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi += yj * zi;
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteIterate);
        }
    }
}

/// The implicit density operator `x/dt - Lap x + chi div(x grad c)` with
/// `grad c` frozen.
pub(crate) struct AdvDiffOperator<'a> {
    grid: &'a Grid,
    inv_dt: f64,
    chi: f64,
    /// Gradient of the lagged concentration, dealiased on spectral grids.
    gcx: Vec<f64>,
    gcy: Vec<f64>,
}

impl<'a> AdvDiffOperator<'a> {
    pub fn new(grid: &'a Grid, c: &[f64], dt: f64, chi: f64) -> Self {
        let (mut gcx, mut gcy) = grid.gradient_raw(c);
        if let (Some(dx), Some(dy)) = (grid.dealias_raw(&gcx), grid.dealias_raw(&gcy)) {
            gcx = dx;
            gcy = dy;
        }
        AdvDiffOperator {
            grid,
            inv_dt: 1.0 / dt,
            chi,
            gcx,
            gcy,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let px: Vec<f64> = x.iter().zip(&self.gcx).map(|(a, b)| a * b).collect();
        let py: Vec<f64> = x.iter().zip(&self.gcy).map(|(a, b)| a * b).collect();
        match self.grid.backend() {
            Backend::Spectral => {
                // One fused pass in Fourier space; the flux products are
                // truncated by the 2/3 rule before the divergence.
                let (inv_dt, chi) = (self.inv_dt, self.chi);
                self.grid
                    .spectral_combine(x, &px, &py, |k2, kx, ky, xh, pxh, pyh, resolved| {
                        let mut out = xh * (inv_dt + k2);
                        if resolved {
                            out += chi * (Complex64::new(0.0, kx) * pxh + Complex64::new(0.0, ky) * pyh);
                        }
                        out
                    })
            }
            Backend::FiniteDifference => {
                let lap = self.grid.laplacian_raw(x);
                let div = self.grid.divergence_raw(&px, &py);
                (0..x.len())
                    .map(|i| self.inv_dt * x[i] - lap[i] + self.chi * div[i])
                    .collect()
            }
        }
    }
}

/// Applies the exact (spectral) or CG (finite-difference) inverse of
/// `(1/dt) I - Lap`.
pub(crate) fn heat_preconditioner(grid: &Grid, dt: f64) -> impl Fn(&[f64]) -> Result<Vec<f64>> + '_ {
    let beta = 1.0 / dt;
    move |v: &[f64]| helmholtz_raw(grid, v, beta, 1e-12)
}

/// Shifts `x` so its mean equals `target`. The density operators map the
/// mean of `x` to `mean(x)/dt` exactly, so this only removes round-off.
pub(crate) fn pin_mean(x: &mut [f64], target: f64) {
    let shift = target - mean(x);
    for v in x.iter_mut() {
        *v += shift;
    }
}

/// Solves `(1/dt) rho - Lap rho + chi div(rho grad c) = rhs` with
/// preconditioned restarted GMRES.
pub fn advdiff_solve(rhs: &Field, c: &Field, dt: f64, chi: f64, cfg: &KrylovConfig) -> Result<Solution> {
    rhs.same_grid(c)?;
    cfg.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    let grid = rhs.grid();
    let op = AdvDiffOperator::new(grid, c.values(), dt, chi);
    let prec = heat_preconditioner(grid, dt);
    let b = rhs.values();
    let x0 = prec(b)?;
    let (mut x, iterations, _) = fgmres(&|v| op.apply(v), &prec, b, x0, cfg)?;
    pin_mean(&mut x, dt * mean(b));
    let ax = op.apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let bnorm = norm(b);
    let residual = if bnorm == 0.0 { 0.0 } else { norm(&r) / bnorm };
    let field = Field::new(grid.clone(), x).map_err(|_| Error::NonFiniteIterate)?;
    Ok(Solution {
        field,
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests;
