//! Second-order centered differences on a uniform grid.
//!
//! Scalars are extended across a Neumann wall by even reflection
//! (`f[-1] = f[0]`), the wall-normal component of a vector field by odd
//! reflection (`v[-1] = -v[0]`), so the face flux through the wall vanishes.
//! Periodic walls wrap.

use super::BcKind;

#[derive(Clone, Copy)]
pub(crate) struct Stencil {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub bc: BcKind,
}

/// Value of the scalar neighbour at offset -1/+1 along one axis.
#[inline]
fn scalar_neighbours(line: impl Fn(usize) -> f64, i: usize, n: usize, bc: BcKind) -> (f64, f64) {
    match bc {
        BcKind::Periodic => (line((i + n - 1) % n), line((i + 1) % n)),
        BcKind::Neumann => {
            let lo = if i == 0 { line(0) } else { line(i - 1) };
            let hi = if i + 1 == n { line(n - 1) } else { line(i + 1) };
            (lo, hi)
        }
    }
}

impl Stencil {
    pub fn gradient(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut gx = vec![0.0; nx * ny];
        let mut gy = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let (w, e) = scalar_neighbours(|k| f[j * nx + k], i, nx, self.bc);
                let (s, n) = scalar_neighbours(|k| f[k * nx + i], j, ny, self.bc);
                gx[j * nx + i] = (e - w) / (2.0 * self.hx);
                gy[j * nx + i] = (n - s) / (2.0 * self.hy);
            }
        }
        (gx, gy)
    }

    /// Flux-form divergence: face values are centered averages, wall faces
    /// carry zero flux under Neumann.
    pub fn divergence(&self, vx: &[f64], vy: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = vec![0.0; nx * ny];
        // x faces: face i sits between cells i-1 and i; face nx == face 0 when periodic.
        let face_x = |j: usize, i: usize| -> f64 {
            match self.bc {
                BcKind::Periodic => 0.5 * (vx[j * nx + (i + nx - 1) % nx] + vx[j * nx + i % nx]),
                BcKind::Neumann => {
                    if i == 0 || i == nx {
                        0.0
                    } else {
                        0.5 * (vx[j * nx + i - 1] + vx[j * nx + i])
                    }
                }
            }
        };
        let face_y = |j: usize, i: usize| -> f64 {
            match self.bc {
                BcKind::Periodic => {
                    0.5 * (vy[((j + ny - 1) % ny) * nx + i] + vy[(j % ny) * nx + i])
                }
                BcKind::Neumann => {
                    if j == 0 || j == ny {
                        0.0
                    } else {
                        0.5 * (vy[(j - 1) * nx + i] + vy[j * nx + i])
                    }
                }
            }
        };
        for j in 0..ny {
            for i in 0..nx {
                let dx = (face_x(j, i + 1) - face_x(j, i)) / self.hx;
                let dy = (face_y(j + 1, i) - face_y(j, i)) / self.hy;
                out[j * nx + i] = dx + dy;
            }
        }
        out
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let (gx, gy) = self.gradient(f);
        self.divergence(&gx, &gy)
    }
}
