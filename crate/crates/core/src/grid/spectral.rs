//! Complex 2D FFT plumbing for the periodic pseudospectral backend.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub(crate) struct Spectral {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// Derivative wavenumbers; the Nyquist entry is zero.
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    /// Integer mode index |k| per FFT bin.
    pub mx: Vec<usize>,
    pub my: Vec<usize>,
}

fn wavenumbers(n: usize, len: f64) -> (Vec<f64>, Vec<usize>) {
    let scale = 2.0 * PI / len;
    let mut k = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    for j in 0..n {
        let signed = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
        m.push(signed.unsigned_abs() as usize);
        k.push(if j == n / 2 { 0.0 } else { scale * signed as f64 });
    }
    (k, m)
}

impl Spectral {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        let mut planner = FftPlanner::new();
        let (kx, mx) = wavenumbers(nx, lx);
        let (ky, my) = wavenumbers(ny, ly);
        Spectral {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
            kx,
            ky,
            mx,
            my,
        }
    }

    fn transform(&self, data: &mut [Complex64], along_x: &dyn Fft<f64>, along_y: &dyn Fft<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut scratch = vec![Complex64::default(); along_x.get_inplace_scratch_len()];
        along_x.process_with_scratch(data, &mut scratch);

        let mut column = vec![Complex64::default(); ny];
        let mut scratch = vec![Complex64::default(); along_y.get_inplace_scratch_len()];
        for i in 0..nx {
            for j in 0..ny {
                column[j] = data[j * nx + i];
            }
            along_y.process_with_scratch(&mut column, &mut scratch);
            for j in 0..ny {
                data[j * nx + i] = column[j];
            }
        }
    }

    /// Unnormalized forward transform of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, self.fwd_x.as_ref(), self.fwd_y.as_ref());
        data
    }

    /// Normalized inverse transform; returns the real part.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, self.inv_x.as_ref(), self.inv_y.as_ref());
        let norm = 1.0 / (self.nx * self.ny) as f64;
        data.iter().map(|z| z.re * norm).collect()
    }

    /// Applies `symbol(kx, ky)` to every mode of `values`.
    pub fn apply_symbol(
        &self,
        values: &[f64],
        symbol: impl Fn(f64, f64) -> Complex64,
    ) -> Vec<f64> {
        let mut hat = self.forward(values);
        self.multiply(&mut hat, symbol);
        self.inverse(hat)
    }

    pub fn multiply(&self, hat: &mut [Complex64], symbol: impl Fn(f64, f64) -> Complex64) {
        for j in 0..self.ny {
            for i in 0..self.nx {
                hat[j * self.nx + i] *= symbol(self.kx[i], self.ky[j]);
            }
        }
    }

    /// True when the bin survives the 2/3 rule on both axes.
    #[inline]
    pub fn resolved(&self, i: usize, j: usize) -> bool {
        3 * self.mx[i] <= self.nx && 3 * self.my[j] <= self.ny
    }
}
