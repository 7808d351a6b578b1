//! Uniform rectangular grids and the differential operators living on them.
//!
//! Two backends share one interface: a Fourier pseudospectral backend for
//! periodic domains and second-order centered finite differences for either
//! periodic or Neumann walls. All integrals use the equal-weight rule
//! `hx * hy * sum`.

mod fd;
mod field;
mod spectral;

pub use field::{Field, VectorField};
pub(crate) use field::compensated_sum;

pub(crate) fn field_sum(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied())
}

use crate::error::{Error, Result};
use fd::Stencil;
use num_complex::Complex64;
use spectral::Spectral;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcKind {
    Periodic,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Spectral,
    FiniteDifference,
}

struct GridInner {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    bc: BcKind,
    backend: Backend,
    spectral: Option<Spectral>,
}

/// Cheaply clonable handle to a grid description (and, for the spectral
/// backend, its FFT plans).
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.0.nx)
            .field("ny", &self.0.ny)
            .field("lx", &self.0.lx)
            .field("ly", &self.0.ly)
            .field("bc", &self.0.bc)
            .field("backend", &self.0.backend)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.nx == other.0.nx
                && self.0.ny == other.0.ny
                && self.0.lx == other.0.lx
                && self.0.ly == other.0.ly
                && self.0.bc == other.0.bc
                && self.0.backend == other.0.backend)
    }
}

/// Builds a grid, validating the dimension and backend constraints.
pub fn make_grid(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    bc: BcKind,
    backend: Backend,
) -> Result<Grid> {
    for (name, n) in [("nx", nx), ("ny", ny)] {
        if n < 4 || n % 2 != 0 {
            return Err(Error::BadDimension(format!("{name} = {n} must be even and >= 4")));
        }
    }
    for (name, l) in [("Lx", lx), ("Ly", ly)] {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::BadDimension(format!("{name} = {l} must be positive")));
        }
    }
    if backend == Backend::Spectral && bc != BcKind::Periodic {
        return Err(Error::IncompatibleBackend);
    }
    let spectral = (backend == Backend::Spectral).then(|| Spectral::new(nx, ny, lx, ly));
    Ok(Grid(Arc::new(GridInner {
        nx,
        ny,
        lx,
        ly,
        bc,
        backend,
        spectral,
    })))
}

impl Grid {
    pub fn nx(&self) -> usize {
        self.0.nx
    }
    pub fn ny(&self) -> usize {
        self.0.ny
    }
    pub fn lx(&self) -> f64 {
        self.0.lx
    }
    pub fn ly(&self) -> f64 {
        self.0.ly
    }
    pub fn hx(&self) -> f64 {
        self.0.lx / self.0.nx as f64
    }
    pub fn hy(&self) -> f64 {
        self.0.ly / self.0.ny as f64
    }
    pub fn bc(&self) -> BcKind {
        self.0.bc
    }
    pub fn backend(&self) -> Backend {
        self.0.backend
    }
    pub fn len(&self) -> usize {
        self.0.nx * self.0.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Quadrature weight `hx * hy`.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }
    pub fn area(&self) -> f64 {
        self.0.lx * self.0.ly
    }

    /// Sample coordinate along x: nodes `i*hx` on periodic grids, cell
    /// centers `(i + 1/2)*hx` on Neumann grids.
    pub fn x(&self, i: usize) -> f64 {
        match self.0.bc {
            BcKind::Periodic => i as f64 * self.hx(),
            BcKind::Neumann => (i as f64 + 0.5) * self.hx(),
        }
    }
    pub fn y(&self, j: usize) -> f64 {
        match self.0.bc {
            BcKind::Periodic => j as f64 * self.hy(),
            BcKind::Neumann => (j as f64 + 0.5) * self.hy(),
        }
    }

    fn spectral(&self) -> Option<&Spectral> {
        self.0.spectral.as_ref()
    }

    fn stencil(&self) -> Stencil {
        Stencil {
            nx: self.0.nx,
            ny: self.0.ny,
            hx: self.hx(),
            hy: self.hy(),
            bc: self.0.bc,
        }
    }

    // Raw operator kernels on sample slices. These skip finiteness checks
    // so that Krylov loops can run on plain vectors.

    pub(crate) fn gradient_raw(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.spectral() {
            Some(sp) => {
                let hat = sp.forward(f);
                let mut hx = hat.clone();
                let mut hy = hat;
                sp.multiply(&mut hx, |kx, _| Complex64::new(0.0, kx));
                sp.multiply(&mut hy, |_, ky| Complex64::new(0.0, ky));
                (sp.inverse(hx), sp.inverse(hy))
            }
            None => self.stencil().gradient(f),
        }
    }

    pub(crate) fn divergence_raw(&self, vx: &[f64], vy: &[f64]) -> Vec<f64> {
        match self.spectral() {
            Some(sp) => {
                let mut hx = sp.forward(vx);
                let hy = sp.forward(vy);
                let nx = self.0.nx;
                for (idx, (a, b)) in hx.iter_mut().zip(&hy).enumerate() {
                    let (i, j) = (idx % nx, idx / nx);
                    *a = *a * Complex64::new(0.0, sp.kx[i]) + *b * Complex64::new(0.0, sp.ky[j]);
                }
                sp.inverse(hx)
            }
            None => self.stencil().divergence(vx, vy),
        }
    }

    pub(crate) fn laplacian_raw(&self, f: &[f64]) -> Vec<f64> {
        match self.spectral() {
            Some(sp) => sp.apply_symbol(f, |kx, ky| Complex64::new(-(kx * kx + ky * ky), 0.0)),
            None => self.stencil().laplacian(f),
        }
    }

    /// 2/3-rule filter. Returns `None` on non-spectral grids. Input whose
    /// unresolved modes are already at round-off level is returned as-is,
    /// which makes the filter exactly idempotent.
    pub(crate) fn dealias_raw(&self, f: &[f64]) -> Option<Vec<f64>> {
        let sp = self.spectral()?;
        let nx = self.0.nx;
        let mut hat = sp.forward(f);
        let peak = hat.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut high = 0.0f64;
        for (idx, z) in hat.iter_mut().enumerate() {
            if !sp.resolved(idx % nx, idx / nx) {
                high = high.max(z.norm());
                *z = Complex64::default();
            }
        }
        if high <= DEALIAS_ROUNDOFF * peak {
            return Some(f.to_vec());
        }
        Some(sp.inverse(hat))
    }

    /// Transforms three sample arrays, combines them mode by mode and
    /// returns the inverse transform. Panics on non-spectral grids.
    #[allow(clippy::type_complexity)]
    pub(crate) fn spectral_combine(
        &self,
        a: &[f64],
        b: &[f64],
        c: &[f64],
        combine: impl Fn(f64, f64, f64, Complex64, Complex64, Complex64, bool) -> Complex64,
    ) -> Vec<f64> {
        let sp = self.spectral().expect("spectral grid");
        let nx = self.0.nx;
        let mut ah = sp.forward(a);
        let bh = sp.forward(b);
        let ch = sp.forward(c);
        for (idx, z) in ah.iter_mut().enumerate() {
            let (i, j) = (idx % nx, idx / nx);
            let (kx, ky) = (sp.kx[i], sp.ky[j]);
            *z = combine(kx * kx + ky * ky, kx, ky, *z, bh[idx], ch[idx], sp.resolved(i, j));
        }
        sp.inverse(ah)
    }

    /// Exact per-mode solve of `(beta I - Laplacian) u = f`.
    pub(crate) fn helmholtz_spectral_raw(&self, f: &[f64], beta: f64) -> Option<Vec<f64>> {
        let sp = self.spectral()?;
        Some(sp.apply_symbol(f, |kx, ky| Complex64::new(1.0 / (beta + kx * kx + ky * ky), 0.0)))
    }
}

/// Relative size below which unresolved modes count as round-off.
const DEALIAS_ROUNDOFF: f64 = 1e-13;

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteField)
    }
}

impl Field {
    /// Gradient with the grid's backend.
    pub fn gradient(&self) -> Result<VectorField> {
        let (gx, gy) = self.grid().gradient_raw(self.values());
        VectorField::new(self.grid().clone(), gx, gy)
    }

    pub fn laplacian(&self) -> Result<Field> {
        Field::new(self.grid().clone(), self.grid().laplacian_raw(self.values()))
    }

    pub fn dealias(&self) -> Result<Field> {
        let out = self.grid().dealias_raw(self.values()).ok_or(Error::WrongBackend)?;
        Field::new(self.grid().clone(), out)
    }
}

impl VectorField {
    pub fn divergence(&self) -> Result<Field> {
        check_finite(self.x_values())?;
        check_finite(self.y_values())?;
        let out = self.grid().divergence_raw(self.x_values(), self.y_values());
        Field::new(self.grid().clone(), out)
    }
}

#[cfg(test)]
mod tests;
