//! Studies built from many runs: time-step convergence, and behavior across
//! parameters and initial masses.

use crate::diagnostics::{lp_norm, mass, regime_report, DiagRecord, Exponent, RegimeReport};
use crate::error::{Error, Result};
use crate::grid::{Backend, Field};
use crate::scheme::{
    init_state, integrate, run, DiagSink, InitialCondition, RunConfig, SchemeState,
};
use rayon::prelude::*;

/// Least-squares slope of `ln(error)` against `ln(dt)`.
pub fn fit_order(dts: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Reference step is the finest ladder step divided by this.
pub const REFERENCE_REFINEMENT: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Rho,
    C,
}

impl Variable {
    pub fn name(&self) -> &'static str {
        match self {
            Variable::Rho => "rho",
            Variable::C => "c",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ErrorSeries {
    pub p: Exponent,
    pub variable: Variable,
    /// Error at the final time, one entry per ladder step.
    pub errors: Vec<f64>,
    pub order: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    pub final_time: f64,
    pub series: Vec<ErrorSeries>,
}

impl ConvergenceReport {
    pub fn series(&self, p: Exponent, variable: Variable) -> Option<&ErrorSeries> {
        self.series.iter().find(|s| s.p == p && s.variable == variable)
    }
}

/// Number of steps of size `dt` in `t_final`, if `dt` divides it.
fn steps_for(t_final: f64, dt: f64) -> Option<usize> {
    let n = (t_final / dt).round();
    (n >= 1.0 && (n * dt - t_final).abs() <= 1e-12 * t_final).then_some(n as usize)
}

fn difference(a: &Field, b: &Field) -> Result<Field> {
    a.zip_map(b, |x, y| x - y)
}

/// Runs the same initial data at every `dt` and at `min(dts)/16`, and
/// measures final-time errors against the fine run. The final time is
/// `cfg.dt * cfg.n_steps`; the spatial grid is shared by all runs.
pub fn temporal_convergence(cfg: &RunConfig, dts: &[f64], p_list: &[Exponent]) -> Result<ConvergenceReport> {
    cfg.validate()?;
    if dts.len() < 2 {
        return Err(Error::InvalidParameter("need at least two time steps".into()));
    }
    if dts.windows(2).any(|w| w[1] >= w[0]) || dts.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidParameter("time steps must be positive and strictly decreasing".into()));
    }
    for p in p_list {
        if let Exponent::Finite(v) = p {
            if !(v.is_finite() && *v > 1.0) {
                return Err(Error::BadExponent(*v));
            }
        }
    }
    let t_final = cfg.final_time();
    let reference_dt = dts[dts.len() - 1] / REFERENCE_REFINEMENT;
    let mut ladder: Vec<(f64, usize)> = Vec::with_capacity(dts.len() + 1);
    for &dt in dts.iter().chain(std::iter::once(&reference_dt)) {
        let n = steps_for(t_final, dt)
            .ok_or_else(|| Error::InvalidParameter(format!("dt = {dt} does not divide T = {t_final}")))?;
        ladder.push((dt, n));
    }

    let initial = init_state(cfg)?;
    let finals: Vec<SchemeState> = ladder
        .par_iter()
        .map(|&(dt, n)| integrate(initial.clone(), &cfg.params, dt, n, &cfg.solver))
        .collect::<Result<_>>()?;
    let (reference, runs) = finals.split_last().expect("non-empty ladder");

    let mut series = Vec::new();
    for &p in p_list {
        for variable in [Variable::Rho, Variable::C] {
            let errors = runs
                .iter()
                .map(|s| {
                    let e = match variable {
                        Variable::Rho => difference(&s.rho, &reference.rho)?,
                        Variable::C => difference(&s.c, &reference.c)?,
                    };
                    lp_norm(&e, p)
                })
                .collect::<Result<Vec<f64>>>()?;
            let order = fit_order(dts, &errors);
            series.push(ErrorSeries {
                p,
                variable,
                errors,
                order,
            });
        }
    }
    Ok(ConvergenceReport {
        dts: dts.to_vec(),
        reference_dt,
        final_time: t_final,
        series,
    })
}

/// Tolerances for the monitored structure properties.
#[derive(Debug, Clone, Copy)]
pub struct PropertyTolerances {
    /// `|M(rho^n) - M(rho^0)| <= mass * M(rho^0)`.
    pub mass: f64,
    /// `min rho^n >= -positivity * max rho^0`.
    pub positivity: f64,
    /// Energy increase and dissipation-inequality slack, relative to `|E^0|`.
    pub energy: f64,
}

impl PropertyTolerances {
    pub fn for_backend(backend: Backend) -> Self {
        PropertyTolerances {
            mass: match backend {
                Backend::Spectral => 1e-12,
                Backend::FiniteDifference => 1e-11,
            },
            positivity: 1e-10,
            energy: 1e-8,
        }
    }
}

/// Sink that tracks worst-case structure margins over a run.
#[derive(Debug, Clone, Default)]
pub struct PropertyMonitor {
    pub records: usize,
    pub mass0: f64,
    pub max_rho0: f64,
    pub energy0: Option<f64>,
    /// `max_n |M_n - M_0|`.
    pub max_mass_drift: f64,
    pub min_rho: f64,
    /// `max_n (E_{n+1} - E_n)`.
    pub max_energy_increase: f64,
    /// `max_n (diss_total - (E_n - E_{n+1}))`, the violation of the discrete
    /// dissipation inequality.
    pub max_dissipation_gap: f64,
    /// Records after the first without energy information.
    pub missing_energy: usize,
    /// `(n, t, max rho)` per record.
    pub max_trace: Vec<(usize, f64, f64)>,
}

impl PropertyMonitor {
    pub fn new() -> Self {
        PropertyMonitor {
            min_rho: f64::INFINITY,
            max_energy_increase: f64::NEG_INFINITY,
            max_dissipation_gap: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    pub fn mass_drift_relative(&self) -> f64 {
        self.max_mass_drift / self.mass0
    }

    pub fn positivity_margin(&self) -> f64 {
        self.min_rho / self.max_rho0
    }

    pub fn energy_increase_relative(&self) -> f64 {
        self.max_energy_increase / self.energy0.map_or(f64::NAN, f64::abs)
    }

    pub fn dissipation_gap_relative(&self) -> f64 {
        self.max_dissipation_gap / self.energy0.map_or(f64::NAN, f64::abs)
    }

    pub fn check(&self, tol: &PropertyTolerances) -> PropertyCheck {
        let energy_known = self.energy0.is_some() && self.missing_energy == 0;
        PropertyCheck {
            mass_drift: self.mass_drift_relative(),
            positivity_margin: self.positivity_margin(),
            energy_increase: self.energy_increase_relative(),
            dissipation_gap: self.dissipation_gap_relative(),
            mass_ok: self.mass_drift_relative() <= tol.mass,
            positivity_ok: self.positivity_margin() >= -tol.positivity,
            energy_ok: energy_known
                && (self.records < 2
                    || (self.energy_increase_relative() <= tol.energy
                        && self.dissipation_gap_relative() <= tol.energy)),
        }
    }
}

impl DiagSink for PropertyMonitor {
    fn record(&mut self, r: &DiagRecord) {
        if self.records == 0 {
            self.mass0 = r.mass;
            self.max_rho0 = r.max_rho;
            self.energy0 = r.energy;
        } else {
            match (r.d_energy, r.diss_rho, r.diss_c_grad, r.diss_c) {
                (Some(de), Some(a), Some(b), Some(c)) => {
                    self.max_energy_increase = self.max_energy_increase.max(de);
                    self.max_dissipation_gap = self.max_dissipation_gap.max(a + b + c + de);
                }
                _ => self.missing_energy += 1,
            }
        }
        self.records += 1;
        self.max_mass_drift = self.max_mass_drift.max((r.mass - self.mass0).abs());
        self.min_rho = self.min_rho.min(r.min_rho);
        self.max_trace.push((r.n, r.t, r.max_rho));
    }
}

/// Worst-case margins of one run, relative to the initial mass, density
/// maximum and energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyCheck {
    pub mass_drift: f64,
    pub positivity_margin: f64,
    pub energy_increase: f64,
    pub dissipation_gap: f64,
    pub mass_ok: bool,
    pub positivity_ok: bool,
    pub energy_ok: bool,
}

impl PropertyCheck {
    pub fn passed(&self) -> bool {
        self.mass_ok && self.positivity_ok && self.energy_ok
    }
}

/// Cartesian product of relaxation times and sensitivities.
#[derive(Debug, Clone, Default)]
pub struct SweepSpec {
    pub taus: Vec<f64>,
    pub chis: Vec<f64>,
}

impl SweepSpec {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.taus
            .iter()
            .flat_map(|&tau| self.chis.iter().map(move |&chi| (tau, chi)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum SweepOutcome {
    /// Initial mass at or above `4 pi / (chi gamma)`.
    Rejected,
    Completed(PropertyCheck),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub tau: f64,
    pub chi: f64,
    pub regime: Option<RegimeReport>,
    pub outcome: SweepOutcome,
}

impl SweepRow {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, SweepOutcome::Completed(c) if c.passed())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Config for one sweep point. A parabolic point without an initial
/// concentration in the template starts from the elliptic concentration of
/// the initial density.
fn sweep_config(template: &RunConfig, tau: f64, chi: f64) -> Result<RunConfig> {
    let mut cfg = template.clone();
    cfg.params.tau = tau;
    cfg.params.chi = chi;
    if tau == 0.0 {
        cfg.initial_c = None;
    } else if cfg.initial_c.is_none() {
        let rho0 = cfg.initial_rho.sample(&cfg.grid)?;
        let c0 = crate::scheme::elliptic_concentration(&rho0, &cfg.params)?;
        cfg.initial_c = Some(InitialCondition::Samples(c0));
    }
    cfg.diag_every = 1;
    Ok(cfg)
}

fn sweep_point(template: &RunConfig, tau: f64, chi: f64) -> SweepRow {
    let tol = PropertyTolerances::for_backend(template.grid.backend());
    let mut row = SweepRow {
        tau,
        chi,
        regime: None,
        outcome: SweepOutcome::Failed(String::new()),
    };
    let cfg = match sweep_config(template, tau, chi) {
        Ok(c) => c,
        Err(e) => {
            row.outcome = SweepOutcome::Failed(e.to_string());
            return row;
        }
    };
    let regime = cfg
        .initial_rho
        .sample(&cfg.grid)
        .and_then(|rho0| regime_report(&cfg.params, &rho0));
    match regime {
        Err(e) => row.outcome = SweepOutcome::Failed(e.to_string()),
        Ok(r) if !r.subcritical() => {
            row.regime = Some(r);
            row.outcome = SweepOutcome::Rejected;
        }
        Ok(r) => {
            row.regime = Some(r);
            let mut monitor = PropertyMonitor::new();
            row.outcome = match run(&cfg, &mut monitor) {
                Ok(_) => SweepOutcome::Completed(monitor.check(&tol)),
                Err(abort) => SweepOutcome::Failed(abort.error.to_string()),
            };
        }
    }
    row
}

/// Runs every sweep point and checks mass conservation, positivity and
/// energy dissipation at the module tolerances.
pub fn property_sweep(template: &RunConfig, spec: &SweepSpec) -> SweepReport {
    let rows = spec
        .points()
        .par_iter()
        .map(|&(tau, chi)| sweep_point(template, tau, chi))
        .collect();
    SweepReport { rows }
}

#[derive(Debug, Clone)]
pub struct ProbeRow {
    /// Initial mass as a multiple of `4 pi / (chi gamma)`.
    pub scale: f64,
    pub mass: f64,
    pub initial_max: f64,
    pub blowup: bool,
    pub blowup_step: Option<usize>,
    pub blowup_time: Option<f64>,
    /// Why the run stopped, for aborted runs.
    pub message: Option<String>,
    /// `(n, t, max rho)` for every accepted step.
    pub trace: Vec<(usize, f64, f64)>,
}

impl ProbeRow {
    pub fn max_over_run(&self) -> f64 {
        self.trace.iter().map(|t| t.2).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
}

/// Tracks `max rho` of every accepted state.
struct MaxTrace(Vec<(usize, f64, f64)>);

impl DiagSink for MaxTrace {
    fn record(&mut self, _record: &DiagRecord) {}

    fn state(&mut self, s: &SchemeState) {
        self.0.push((s.n, s.t, s.rho.max()));
    }
}

fn probe_scale(cfg: &RunConfig, profile: &Field, scale: f64) -> ProbeRow {
    let target = scale * cfg.params.mass_threshold();
    let m = mass(profile);
    let mut row = ProbeRow {
        scale,
        mass: target,
        initial_max: profile.max() * target / m,
        blowup: false,
        blowup_step: None,
        blowup_time: None,
        message: None,
        trace: Vec::new(),
    };
    let rho0 = match profile.map(|v| v * target / m) {
        Ok(f) => f,
        Err(e) => {
            row.message = Some(e.to_string());
            return row;
        }
    };
    let mut run_cfg = cfg.clone();
    run_cfg.initial_rho = InitialCondition::Samples(rho0);
    // Only the trace is needed; record sparsely.
    run_cfg.diag_every = cfg.n_steps.max(1);
    let mut sink = MaxTrace(Vec::new());
    if let Err(abort) = run(&run_cfg, &mut sink) {
        if let Error::BlowupDetected { step, time, .. } = &abort.error {
            row.blowup = true;
            row.blowup_step = Some(*step);
            row.blowup_time = Some(*time);
        }
        row.message = Some(abort.error.to_string());
    }
    row.trace = sink.0;
    row
}

/// Rescales the initial density of `cfg` to `scale * 4 pi / (chi gamma)` for
/// every scale and records whether and when the run blows up.
pub fn blowup_probe(cfg: &RunConfig, mass_scales: &[f64]) -> ProbeReport {
    let profile = cfg.initial_rho.sample(&cfg.grid);
    let rows = mass_scales
        .par_iter()
        .map(|&scale| match &profile {
            Ok(p) if mass(p) > 0.0 => probe_scale(cfg, p, scale),
            Ok(_) => ProbeRow {
                scale,
                mass: 0.0,
                initial_max: 0.0,
                blowup: false,
                blowup_step: None,
                blowup_time: None,
                message: Some(Error::ZeroInitialMass.to_string()),
                trace: Vec::new(),
            },
            Err(e) => ProbeRow {
                scale,
                mass: f64::NAN,
                initial_max: f64::NAN,
                blowup: false,
                blowup_step: None,
                blowup_time: None,
                message: Some(e.to_string()),
                trace: Vec::new(),
            },
        })
        .collect();
    ProbeReport { rows }
}
