use super::{init_state, step, RunConfig, SchemeState};
use crate::diagnostics::{make_record, DiagRecord};
use crate::error::{BlowupCause, Error};

/// Receives diagnostics (and optionally every accepted state) from [`run`].
pub trait DiagSink {
    fn record(&mut self, record: &DiagRecord);

    /// Called with every accepted state, including the initial one.
    fn state(&mut self, _state: &SchemeState) {}
}

impl DiagSink for Vec<DiagRecord> {
    fn record(&mut self, record: &DiagRecord) {
        self.push(record.clone());
    }
}

/// Discards everything.
pub struct NullSink;

impl DiagSink for NullSink {
    fn record(&mut self, _record: &DiagRecord) {}
}

#[derive(Debug, Clone)]
pub struct FinalState {
    pub state: SchemeState,
    pub records: usize,
}

/// A run that stopped early. `last_good` is absent when initialization
/// itself failed.
#[derive(Debug, Clone)]
pub struct RunAbort {
    pub error: Error,
    pub last_good: Option<SchemeState>,
}

impl std::fmt::Display for RunAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunAbort {}

fn abort(error: Error, last_good: Option<SchemeState>) -> RunAbort {
    RunAbort { error, last_good }
}

/// Runs `cfg.n_steps` steps, emitting a record every `diag_every` steps and
/// at the last step. Exceeding the blow-up ceiling or a failed solve aborts
/// with [`Error::BlowupDetected`].
#[allow(clippy::result_large_err)]
pub fn run(cfg: &RunConfig, sink: &mut dyn DiagSink) -> Result<FinalState, RunAbort> {
    let mut state = init_state(cfg).map_err(|e| abort(e, None))?;
    let params = &cfg.params;
    let dt = cfg.dt;

    let first = make_record(&state, None, params, dt).map_err(|e| abort(e, Some(state.clone())))?;
    let mut energy = first.energy;
    sink.record(&first);
    sink.state(&state);
    let mut records = 1;

    for _ in 0..cfg.n_steps {
        let next = match step(&state, params, dt, &cfg.solver) {
            Ok(s) => s,
            Err(e) => {
                let blowup = Error::BlowupDetected {
                    step: state.n + 1,
                    time: (state.n + 1) as f64 * dt,
                    cause: BlowupCause::SolverFailure(e.to_string()),
                };
                return Err(abort(blowup, Some(state)));
            }
        };
        let max_rho = next.rho.max();
        if max_rho > cfg.blowup_ceiling {
            let blowup = Error::BlowupDetected {
                step: next.n,
                time: next.t,
                cause: BlowupCause::Ceiling {
                    max_rho,
                    ceiling: cfg.blowup_ceiling,
                },
            };
            return Err(abort(blowup, Some(state)));
        }

        let emit = next.n % cfg.diag_every == 0 || next.n == cfg.n_steps;
        if emit {
            let rec = make_record(&next, Some((&state, energy)), params, dt)
                .map_err(|e| abort(e, Some(state.clone())))?;
            energy = rec.energy;
            sink.record(&rec);
            records += 1;
        } else {
            energy = None;
        }
        sink.state(&next);
        state = next;
        // Keep the energy cache valid when the next step will be recorded.
        let next_emits = (state.n + 1) % cfg.diag_every == 0 || state.n + 1 == cfg.n_steps;
        if energy.is_none() && next_emits {
            energy = crate::diagnostics::energy(&state.rho, &state.c, params).ok();
        }
    }
    Ok(FinalState { state, records })
}
