//! Quantities the scheme is expected to control: mass, Lp norms, the free
//! energy and the per-step dissipation budget.

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Field};
use crate::scheme::{ModelParams, SchemeState};

/// Densities below this contribute `f(rho) = -rho` to the entropy.
pub const ENTROPY_FLOOR: f64 = 1e-14;
/// Relative undershoot tolerated before the free energy is undefined.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;
/// Samples below this fraction of `max(rho)` are dropped from the
/// log-gradient integrand.
pub const LOG_GRADIENT_CUTOFF: f64 = 1e-12;

/// Lp exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

/// `hx*hy*sum(f)`.
pub fn mass(f: &Field) -> f64 {
    f.sum() * f.grid().cell_area()
}

pub fn lp_norm(f: &Field, p: Exponent) -> Result<f64> {
    match p {
        Exponent::Infinity => Ok(f.values().iter().fold(0.0, |m, v| m.max(v.abs()))),
        Exponent::Finite(p) if p > 1.0 && p.is_finite() => {
            let s = compensated_sum(f.values().iter().map(|v| v.abs().powf(p)));
            Ok((s * f.grid().cell_area()).powf(1.0 / p))
        }
        Exponent::Finite(p) => Err(Error::BadExponent(p)),
    }
}

fn entropy_density(rho: f64) -> f64 {
    if rho < ENTROPY_FLOOR {
        -rho
    } else {
        rho * rho.ln() - rho
    }
}

fn check_undershoot(rho: &Field) -> Result<()> {
    let (min, max) = (rho.min(), rho.max());
    if min < -NEGATIVE_TOLERANCE * max.max(0.0) {
        return Err(Error::NegativeDensity { min, max });
    }
    Ok(())
}

fn sq_norm(values: &[f64]) -> f64 {
    compensated_sum(values.iter().map(|v| v * v))
}

/// Free energy
/// `int rho log rho - rho - chi rho c + chi/(2 gamma) |grad c|^2 + alpha chi/(2 gamma) c^2`.
///
/// On spectral grids the 2/3 filter leaves the mean mode alone, so the
/// quadrature of a dealiased integrand equals that of the raw one and no
/// filtering pass is needed here.
pub fn energy(rho: &Field, c: &Field, params: &ModelParams) -> Result<f64> {
    rho.same_grid(c)?;
    check_undershoot(rho)?;
    let (gx, gy) = c.grid().gradient_raw(c.values());
    let k = params.chi / (2.0 * params.gamma);
    let terms = (0..rho.values().len()).map(|i| {
        let (r, cv) = (rho.values()[i], c.values()[i]);
        entropy_density(r) - params.chi * r * cv
            + k * (gx[i] * gx[i] + gy[i] * gy[i])
            + params.alpha * k * cv * cv
    });
    Ok(compensated_sum(terms) * rho.grid().cell_area())
}

/// Right-hand side terms of the discrete dissipation inequality for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    /// `E(n+1) - E(n)`.
    pub d_energy: f64,
    /// `dt * int rho' |grad(log rho' - chi c)|^2`.
    pub diss_rho: f64,
    /// `chi/(2 gamma) |grad c' - grad c|^2`.
    pub diss_c_grad: f64,
    /// `chi/gamma (tau/dt + alpha/2) |c' - c|^2`.
    pub diss_c: f64,
}

impl Dissipation {
    pub fn total(&self) -> f64 {
        self.diss_rho + self.diss_c_grad + self.diss_c
    }
}

/// Dissipation budget of the step `prev -> next` when both energies are
/// already known.
pub fn dissipation_with_energies(
    prev: &SchemeState,
    next: &SchemeState,
    params: &ModelParams,
    dt: f64,
    e_prev: f64,
    e_next: f64,
) -> Result<Dissipation> {
    next.rho.same_grid(&prev.c)?;
    let grid = next.rho.grid();
    let area = grid.cell_area();
    let rho = next.rho.values();
    let cutoff = LOG_GRADIENT_CUTOFF * next.rho.max();
    let potential: Vec<f64> = rho
        .iter()
        .zip(prev.c.values())
        .map(|(&r, &c)| r.max(cutoff).max(f64::MIN_POSITIVE).ln() - params.chi * c)
        .collect();
    let (px, py) = grid.gradient_raw(&potential);
    let weighted = (0..rho.len())
        .filter(|&i| rho[i] >= cutoff && rho[i] > 0.0)
        .map(|i| rho[i] * (px[i] * px[i] + py[i] * py[i]));
    let diss_rho = dt * compensated_sum(weighted) * area;

    let dc: Vec<f64> = next.c.values().iter().zip(prev.c.values()).map(|(a, b)| a - b).collect();
    let (dgx, dgy) = grid.gradient_raw(&dc);
    let diss_c_grad = params.chi / (2.0 * params.gamma) * (sq_norm(&dgx) + sq_norm(&dgy)) * area;
    let diss_c = params.chi / params.gamma * (params.tau / dt + params.alpha / 2.0) * sq_norm(&dc) * area;
    Ok(Dissipation {
        d_energy: e_next - e_prev,
        diss_rho,
        diss_c_grad,
        diss_c,
    })
}

pub fn dissipation_terms(prev: &SchemeState, next: &SchemeState, params: &ModelParams, dt: f64) -> Result<Dissipation> {
    let e_prev = energy(&prev.rho, &prev.c, params)?;
    let e_next = energy(&next.rho, &next.c, params)?;
    dissipation_with_energies(prev, next, params, dt, e_prev, e_next)
}

/// One line of the per-step ledger. Step-transition quantities are absent
/// on the initial record; energy-derived ones are also absent when the
/// density undershoots past the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagRecord {
    pub n: usize,
    pub t: f64,
    pub mass: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub energy: Option<f64>,
    pub d_energy: Option<f64>,
    pub diss_rho: Option<f64>,
    pub diss_c_grad: Option<f64>,
    pub diss_c: Option<f64>,
    pub l2_rho: f64,
    pub l4_rho: f64,
    pub linf_rho: f64,
    pub dc_dt_l2: Option<f64>,
}

/// Builds the record for `state`; `prev` is the state one step earlier
/// together with its energy, when known.
pub fn make_record(
    state: &SchemeState,
    prev: Option<(&SchemeState, Option<f64>)>,
    params: &ModelParams,
    dt: f64,
) -> Result<DiagRecord> {
    let rho = &state.rho;
    let energy_now = energy(rho, &state.c, params).ok();
    let diss = match (prev, energy_now) {
        (Some((p, Some(e_prev))), Some(e_next)) => Some(dissipation_with_energies(p, state, params, dt, e_prev, e_next)?),
        _ => None,
    };
    let dc_dt_l2 = match &state.c_prev {
        Some(cp) => {
            let d = state.c.zip_map(cp, |a, b| (a - b) / dt)?;
            Some(lp_norm(&d, Exponent::Finite(2.0))?)
        }
        None => None,
    };
    Ok(DiagRecord {
        n: state.n,
        t: state.t,
        mass: mass(rho),
        min_rho: rho.min(),
        max_rho: rho.max(),
        energy: energy_now,
        d_energy: diss.map(|d| d.d_energy),
        diss_rho: diss.map(|d| d.diss_rho),
        diss_c_grad: diss.map(|d| d.diss_c_grad),
        diss_c: diss.map(|d| d.diss_c),
        l2_rho: lp_norm(rho, Exponent::Finite(2.0))?,
        l4_rho: lp_norm(rho, Exponent::Finite(4.0))?,
        linf_rho: lp_norm(rho, Exponent::Infinity)?,
        dc_dt_l2,
    })
}

/// Where the initial data sits relative to the small-mass conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub mass: f64,
    /// `(2 + tau) gamma chi cgn M`; meaningful only as far as `cgn` is.
    pub condition_value: f64,
    pub condition_satisfied: bool,
    pub cgn: f64,
    /// `4 pi / (chi gamma)`.
    pub threshold: f64,
    pub below_threshold: bool,
}

impl RegimeReport {
    pub fn subcritical(&self) -> bool {
        self.below_threshold
    }
}

impl std::fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "mass M = {}", self.mass)?;
        writeln!(
            f,
            "(2+tau)*gamma*chi*Cgn*M = {} ({}; conditional on Cgn = {})",
            self.condition_value,
            if self.condition_satisfied { "< 1, subcritical" } else { ">= 1, supercritical" },
            self.cgn
        )?;
        write!(
            f,
            "threshold 4*pi/(chi*gamma) = {}: M is {}",
            self.threshold,
            if self.below_threshold { "below (subcritical)" } else { "at or above (supercritical)" }
        )
    }
}

pub fn regime_report(params: &ModelParams, rho0: &Field) -> Result<RegimeReport> {
    if rho0.min() < 0.0 {
        return Err(Error::NegativeInitialData(rho0.min()));
    }
    let m = mass(rho0);
    if m == 0.0 {
        return Err(Error::ZeroInitialMass);
    }
    Ok(regime_from_mass(params, m))
}

pub fn regime_from_mass(params: &ModelParams, m: f64) -> RegimeReport {
    let condition_value = (2.0 + params.tau) * params.gamma * params.chi * params.cgn * m;
    let threshold = params.mass_threshold();
    RegimeReport {
        mass: m,
        condition_value,
        condition_satisfied: condition_value < 1.0,
        cgn: params.cgn,
        threshold,
        below_threshold: m < threshold,
    }
}
