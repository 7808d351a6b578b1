//! The semi-implicit Euler stepper.
//!
//! Each step is two decoupled linear solves:
//!
//! ```text
//!   (rho' - rho)/dt     = Lap rho' - chi div(rho' grad c)
//!   tau (c' - c)/dt     = Lap c' - alpha c' + gamma rho'
//! ```
//!
//! with the concentration lagged in the density equation. `step_exponential`
//! solves the same density update written as
//! `div(e^{chi c} grad(rho' e^{-chi c}))` and serves as a cross-check.

mod run;

pub use run::{run, DiagSink, FinalState, NullSink, RunAbort};

use crate::error::{Error, Result};
use crate::grid::{BcKind, Field, Grid};
use crate::linsolve::{advdiff_solve, fgmres, heat_preconditioner, helmholtz_solve, pin_mean, KrylovConfig};
use std::f64::consts::PI;

/// Model coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Chemotactic sensitivity.
    pub chi: f64,
    /// Consumption rate of the chemoattractant.
    pub alpha: f64,
    /// Production rate of the chemoattractant.
    pub gamma: f64,
    /// Relaxation time; zero gives the parabolic–elliptic system.
    pub tau: f64,
    /// User estimate of the Gagliardo–Nirenberg constant. Only used in
    /// regime reports.
    pub cgn: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            chi: 1.0,
            alpha: 1.0,
            gamma: 1.0,
            tau: 0.0,
            cgn: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        // chi = 0 is the heat equation limit and is accepted.
        if !(self.chi.is_finite() && self.chi >= 0.0) {
            return Err(Error::InvalidParameter(format!("chi = {} must be >= 0", self.chi)));
        }
        for (name, v) in [("alpha", self.alpha), ("gamma", self.gamma), ("cgn", self.cgn)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("tau = {} must be >= 0", self.tau)));
        }
        Ok(())
    }

    /// Mass threshold `4 pi / (chi gamma)`.
    pub fn mass_threshold(&self) -> f64 {
        4.0 * PI / (self.chi * self.gamma)
    }
}

/// Everything needed to take the next step.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub rho: Field,
    pub c: Field,
    /// Concentration of the previous step; absent at `n = 0`.
    pub c_prev: Option<Field>,
    pub n: usize,
    pub t: f64,
}

/// Initial-condition descriptors.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    Constant(f64),
    /// `background + amplitude * exp(-|x - x0|^2 / (2 sigma^2))`, using the
    /// nearest periodic image on periodic grids.
    Gaussian {
        amplitude: f64,
        x0: f64,
        y0: f64,
        sigma: f64,
        background: f64,
    },
    /// `mean + eps * cos(kx * a x) * cos(ky * a y)` with `a = 2 pi / L` on
    /// periodic grids and `a = pi / L` on Neumann grids.
    PerturbedConstant { mean: f64, eps: f64, kx: f64, ky: f64 },
    Samples(Field),
}

fn wrapped(d: f64, len: f64, bc: BcKind) -> f64 {
    match bc {
        BcKind::Periodic => d - len * (d / len).round(),
        BcKind::Neumann => d,
    }
}

impl InitialCondition {
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        match self {
            InitialCondition::Constant(v) => Field::constant(grid, *v),
            InitialCondition::Gaussian {
                amplitude,
                x0,
                y0,
                sigma,
                background,
            } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidParameter(format!("sigma = {sigma} must be positive")));
                }
                let (lx, ly, bc) = (grid.lx(), grid.ly(), grid.bc());
                Field::from_fn(grid, |x, y| {
                    let dx = wrapped(x - x0, lx, bc);
                    let dy = wrapped(y - y0, ly, bc);
                    background + amplitude * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
                })
            }
            InitialCondition::PerturbedConstant { mean, eps, kx, ky } => {
                let base = match grid.bc() {
                    BcKind::Periodic => 2.0 * PI,
                    BcKind::Neumann => PI,
                };
                let (ax, ay) = (base * kx / grid.lx(), base * ky / grid.ly());
                Field::from_fn(grid, |x, y| mean + eps * (ax * x).cos() * (ay * y).cos())
            }
            InitialCondition::Samples(f) => {
                if f.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(f.clone())
            }
        }
    }
}

/// Full description of a simulation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub dt: f64,
    pub n_steps: usize,
    pub grid: Grid,
    pub initial_rho: InitialCondition,
    /// Required iff `tau > 0`.
    pub initial_c: Option<InitialCondition>,
    pub solver: KrylovConfig,
    pub diag_every: usize,
    /// `max(rho)` above this aborts the run as a blow-up.
    pub blowup_ceiling: f64,
}

pub const DEFAULT_BLOWUP_CEILING: f64 = 1e8;

impl RunConfig {
    /// Config with default solver settings and blow-up ceiling, recording
    /// every step.
    pub fn new(
        grid: Grid,
        params: ModelParams,
        dt: f64,
        n_steps: usize,
        initial_rho: InitialCondition,
        initial_c: Option<InitialCondition>,
    ) -> Self {
        RunConfig {
            params,
            dt,
            n_steps,
            grid,
            initial_rho,
            initial_c,
            solver: KrylovConfig::default(),
            diag_every: 1,
            blowup_ceiling: DEFAULT_BLOWUP_CEILING,
        }
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if self.diag_every == 0 {
            return Err(Error::InvalidParameter("diag_every must be >= 1".into()));
        }
        if self.blowup_ceiling.is_nan() || self.blowup_ceiling <= 0.0 {
            return Err(Error::InvalidParameter("blowup ceiling must be positive".into()));
        }
        match (self.params.tau > 0.0, self.initial_c.is_some()) {
            (true, false) => Err(Error::InvalidParameter("tau > 0 requires an initial concentration".into())),
            (false, true) => Err(Error::InvalidParameter("initial concentration is forbidden when tau = 0".into())),
            _ => Ok(()),
        }
    }
}

/// `gamma (alpha I - Lap)^{-1} rho`.
pub fn elliptic_concentration(rho: &Field, params: &ModelParams) -> Result<Field> {
    let c = helmholtz_solve(rho, params.alpha)?;
    c.map(|v| params.gamma * v)
}

pub fn init_state(cfg: &RunConfig) -> Result<SchemeState> {
    cfg.validate()?;
    let rho = cfg.initial_rho.sample(&cfg.grid)?;
    if rho.min() < 0.0 {
        return Err(Error::NegativeInitialData(rho.min()));
    }
    if rho.max() == 0.0 {
        return Err(Error::ZeroInitialMass);
    }
    let c = match &cfg.initial_c {
        None => elliptic_concentration(&rho, &cfg.params)?,
        Some(ic) => {
            let c = ic.sample(&cfg.grid)?;
            if c.min() < 0.0 {
                return Err(Error::NegativeInitialData(c.min()));
            }
            c
        }
    };
    Ok(SchemeState {
        rho,
        c,
        c_prev: None,
        n: 0,
        t: 0.0,
    })
}

/// Concentration update given the new density.
fn concentration_step(state: &SchemeState, rho_next: &Field, params: &ModelParams, dt: f64) -> Result<Field> {
    if params.tau == 0.0 {
        elliptic_concentration(rho_next, params)
    } else {
        let relax = params.tau / dt;
        let rhs = state.c.zip_map(rho_next, |c, r| relax * c + params.gamma * r)?;
        helmholtz_solve(&rhs, relax + params.alpha)
    }
}

fn advance(state: &SchemeState, rho_next: Field, params: &ModelParams, dt: f64) -> Result<SchemeState> {
    let c_next = concentration_step(state, &rho_next, params, dt)?;
    let n = state.n + 1;
    Ok(SchemeState {
        rho: rho_next,
        c: c_next,
        c_prev: Some(state.c.clone()),
        n,
        t: n as f64 * dt,
    })
}

/// One semi-implicit Euler step.
pub fn step(state: &SchemeState, params: &ModelParams, dt: f64, cfg: &KrylovConfig) -> Result<SchemeState> {
    let rhs = state.rho.map(|r| r / dt)?;
    let rho_next = advdiff_solve(&rhs, &state.c, dt, params.chi, cfg)?.field;
    advance(state, rho_next, params, dt)
}

/// Exponential-reweighting form of the density update, followed by the same
/// concentration update as [`step`].
pub fn step_exponential(
    state: &SchemeState,
    params: &ModelParams,
    dt: f64,
    cfg: &KrylovConfig,
) -> Result<SchemeState> {
    cfg.validate()?;
    let exponent = params.chi * state.c.max();
    if exponent > 700.0 {
        return Err(Error::OverflowInExponential(exponent));
    }
    let grid = state.rho.grid();
    let weight: Vec<f64> = state.c.values().iter().map(|c| (params.chi * c).exp()).collect();
    let inv_weight: Vec<f64> = weight.iter().map(|w| 1.0 / w).collect();
    let inv_dt = 1.0 / dt;
    let op = |x: &[f64]| -> Vec<f64> {
        let q: Vec<f64> = x.iter().zip(&inv_weight).map(|(x, iw)| x * iw).collect();
        let (gx, gy) = grid.gradient_raw(&q);
        let fx: Vec<f64> = gx.iter().zip(&weight).map(|(g, w)| g * w).collect();
        let fy: Vec<f64> = gy.iter().zip(&weight).map(|(g, w)| g * w).collect();
        let div = grid.divergence_raw(&fx, &fy);
        x.iter().zip(&div).map(|(x, d)| inv_dt * x - d).collect()
    };
    let prec = heat_preconditioner(grid, dt);
    let b: Vec<f64> = state.rho.values().iter().map(|r| r * inv_dt).collect();
    let x0 = prec(&b)?;
    let (mut x, _, _) = fgmres(&op, &prec, &b, x0, cfg)?;
    pin_mean(&mut x, state.rho.mean());
    let rho_next = Field::new(grid.clone(), x).map_err(|_| Error::NonFiniteIterate)?;
    advance(state, rho_next, params, dt)
}

/// Takes `n` steps without diagnostics.
pub fn integrate(state: SchemeState, params: &ModelParams, dt: f64, n: usize, cfg: &KrylovConfig) -> Result<SchemeState> {
    let mut s = state;
    for _ in 0..n {
        s = step(&s, params, dt, cfg)?;
    }
    Ok(s)
}
