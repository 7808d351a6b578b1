use super::Grid;
use crate::error::{Error, Result};

/// Real scalar samples over a [`Grid`], row-major with x fastest.
///
/// Every constructor rejects NaN and infinities, so a `Field` in hand is
/// always finite.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<Self> {
        Field::new(grid.clone(), vec![value; grid.len()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f(x, y)` at the grid's sample positions.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y(j);
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), y));
            }
        }
        Field::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx() + i]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(self.grid.clone(), values)
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Compensated sum of the samples (fixed order, deterministic).
    pub fn sum(&self) -> f64 {
        compensated_sum(self.values.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Quadrature inner product `hx*hy*sum(f*g)`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        let s = compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b));
        Ok(s * self.grid.cell_area())
    }
}

/// Two component sample arrays over a grid.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        for comp in [&x, &y] {
            if comp.len() != grid.len() {
                return Err(Error::LengthMismatch {
                    expected: grid.len(),
                    got: comp.len(),
                });
            }
            if !comp.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteField);
            }
        }
        Ok(VectorField { grid, x, y })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn x_values(&self) -> &[f64] {
        &self.x
    }
    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    /// Quadrature inner product summed over both components.
    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let terms = self
            .x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .map(|(a, b)| a * b);
        Ok(compensated_sum(terms) * self.grid.cell_area())
    }
}

/// Neumaier summation.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
