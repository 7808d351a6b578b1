//! Subcommand implementations and exit-code mapping.

use crate::config::{load_config, Config, ConfigError};
use crate::diag_csv::{format_f64, CsvError, DiagWriter};
use crate::snapshot::write_snapshot;
use clap::{Args, Parser, Subcommand};
use ks_core::diagnostics::{regime_report, DiagRecord, Exponent};
use ks_core::experiments::{blowup_probe, property_sweep, temporal_convergence, SweepOutcome, SweepSpec};
use ks_core::scheme::{run, DiagSink, SchemeState};
use ks_core::Field;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Validation = 1,
    Runtime = 2,
}

#[derive(Debug, Parser)]
#[command(name = "ks", version, about = "Semi-implicit Keller-Segel solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation, writing diag.csv and KSF1 snapshots.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Temporal convergence ladder against a dt/16 reference. The final
    /// time is `time.dt * time.n_steps` of the config.
    Converge {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
        /// Norm exponents; `inf` allowed.
        #[arg(long, value_delimiter = ',', default_value = "2,4", value_parser = parse_exponent)]
        p: Vec<Exponent>,
        /// Report file; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structure-property sweep over tau x chi.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        chis: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rescale the initial density to multiples of 4 pi / (chi gamma) and
    /// record blow-up.
    ProbeBlowup {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',', required = true)]
        scales: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-step max-density trace file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare the initial mass with the small-mass conditions.
    Regime {
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn parse_exponent(s: &str) -> Result<Exponent, String> {
    match s.trim() {
        "inf" | "infinity" => Ok(Exponent::Infinity),
        t => match t.parse::<f64>() {
            Ok(p) if p > 1.0 && p.is_finite() => Ok(Exponent::Finite(p)),
            _ => Err(format!("exponent must be > 1 or inf, got {t:?}")),
        },
    }
}

fn exponent_label(p: Exponent) -> String {
    match p {
        Exponent::Finite(v) => format_f64(v),
        Exponent::Infinity => "inf".into(),
    }
}

/// A failure with its exit code.
struct Failure {
    code: ExitCode,
    message: String,
}

fn validation(message: impl ToString) -> Failure {
    Failure {
        code: ExitCode::Validation,
        message: message.to_string(),
    }
}

fn runtime(message: impl ToString) -> Failure {
    Failure {
        code: ExitCode::Runtime,
        message: message.to_string(),
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        validation(e)
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    runtime(format!("{}: {e}", path.display()))
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| runtime(format!("standard output: {e}"))),
    }
}

/// Writes diagnostics and snapshots as the run progresses.
struct RunSink {
    diag: DiagWriter<BufWriter<File>>,
    dir: PathBuf,
    snapshot_every: usize,
    last_snapshot: Option<usize>,
    error: Option<String>,
}

impl RunSink {
    fn snapshot(&mut self, s: &SchemeState) {
        if self.last_snapshot == Some(s.n) || self.error.is_some() {
            return;
        }
        let write = |name: &str, f: &Field| write_snapshot(f, s.t, &self.dir.join(format!("{name}_{:06}.ksf", s.n)));
        if let Err(e) = write("rho", &s.rho).and_then(|_| write("c", &s.c)) {
            self.error = Some(e.to_string());
        }
        self.last_snapshot = Some(s.n);
    }
}

impl DiagSink for RunSink {
    fn record(&mut self, r: &DiagRecord) {
        if self.error.is_none() {
            if let Err(e) = self.diag.append(r) {
                self.error = Some(format!("diag.csv: {e}"));
            }
        }
    }

    fn state(&mut self, s: &SchemeState) {
        if self.snapshot_every > 0 && s.n.is_multiple_of(self.snapshot_every) {
            self.snapshot(s);
        }
    }
}

fn cmd_run(cfg: &Config, out: Option<PathBuf>, stdout: &mut dyn Write) -> Result<ExitCode, Failure> {
    let dir = out
        .or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| validation("no output directory: pass --out or set output.dir"))?;
    std::fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    let diag_path = dir.join("diag.csv");
    let file = File::create(&diag_path).map_err(|e| io_failure(&diag_path, e))?;
    let diag = DiagWriter::new(BufWriter::new(file)).map_err(|e: CsvError| runtime(format!("diag.csv: {e}")))?;
    let mut sink = RunSink {
        diag,
        dir,
        snapshot_every: cfg.output.snapshot_every,
        last_snapshot: None,
        error: None,
    };
    let result = run(&cfg.run, &mut sink);
    let outcome = match result {
        Ok(done) => {
            sink.snapshot(&done.state);
            writeln!(
                stdout,
                "completed {} steps, t = {}, {} diagnostic records",
                done.state.n, done.state.t, done.records
            )
            .map_err(|e| runtime(format!("standard output: {e}")))?;
            Ok(ExitCode::Success)
        }
        Err(abort) => {
            if let Some(s) = &abort.last_good {
                sink.snapshot(s);
            }
            Err(runtime(abort))
        }
    };
    match sink.error {
        Some(e) => Err(runtime(e)),
        None => outcome,
    }
}

fn cmd_converge(cfg: &Config, dts: &[f64], ps: &[Exponent], out: Option<&Path>, stdout: &mut dyn Write) -> Result<ExitCode, Failure> {
    let report = temporal_convergence(&cfg.run, dts, ps).map_err(|e| match e {
        ks_core::Error::InvalidParameter(_) | ks_core::Error::BadExponent(_) => validation(e),
        _ => runtime(e),
    })?;
    let mut text = String::from("dt,p,err_rho,err_c\n");
    for &p in ps {
        let rho = report.series(p, ks_core::experiments::Variable::Rho).expect("requested exponent");
        let c = report.series(p, ks_core::experiments::Variable::C).expect("requested exponent");
        for (k, dt) in report.dts.iter().enumerate() {
            let _ = writeln!(
                text,
                "{},{},{},{}",
                format_f64(*dt),
                exponent_label(p),
                format_f64(rho.errors[k]),
                format_f64(c.errors[k])
            );
        }
    }
    let _ = writeln!(text, "# final_time={}", format_f64(report.final_time));
    let _ = writeln!(text, "# reference_dt={}", format_f64(report.reference_dt));
    for &p in ps {
        let rho = report.series(p, ks_core::experiments::Variable::Rho).expect("requested exponent");
        let c = report.series(p, ks_core::experiments::Variable::C).expect("requested exponent");
        let _ = writeln!(text, "# order p={} rho={} c={}", exponent_label(p), format_f64(rho.order), format_f64(c.order));
    }
    emit(out, &text, stdout)?;
    Ok(ExitCode::Success)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    // Messages never contain quotes that need preserving.
    format!("\"{}\"", s.replace('"', "'"))
}

fn cmd_sweep(cfg: &Config, taus: &[f64], chis: &[f64], out: Option<&Path>, stdout: &mut dyn Write) -> Result<ExitCode, Failure> {
    let spec = SweepSpec {
        taus: taus.to_vec(),
        chis: chis.to_vec(),
    };
    let report = property_sweep(&cfg.run, &spec);
    let mut text =
        String::from("tau,chi,status,mass,threshold,mass_drift,positivity_margin,energy_increase,dissipation_gap,message\n");
    for row in &report.rows {
        let (status, check, message) = match &row.outcome {
            SweepOutcome::Rejected => ("rejected", None, "mass at or above 4*pi/(chi*gamma)".to_string()),
            SweepOutcome::Completed(c) => (if c.passed() { "pass" } else { "fail" }, Some(*c), String::new()),
            SweepOutcome::Failed(m) => ("error", None, m.clone()),
        };
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{}",
            format_f64(row.tau),
            format_f64(row.chi),
            status,
            opt_cell(row.regime.as_ref().map(|r| r.mass)),
            opt_cell(row.regime.as_ref().map(|r| r.threshold)),
            opt_cell(check.map(|c| c.mass_drift)),
            opt_cell(check.map(|c| c.positivity_margin)),
            opt_cell(check.map(|c| c.energy_increase)),
            opt_cell(check.map(|c| c.dissipation_gap)),
            if message.is_empty() { message } else { csv_text(&message) },
        );
    }
    emit(out, &text, stdout)?;
    Ok(ExitCode::Success)
}

fn cmd_probe(
    cfg: &Config,
    scales: &[f64],
    out: Option<&Path>,
    trace: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<ExitCode, Failure> {
    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(validation("mass scales must be positive"));
    }
    let report = blowup_probe(&cfg.run, scales);
    let mut text = String::from("scale,mass,initial_max,max_rho,blowup,blowup_step,blowup_time,message\n");
    let mut trace_text = String::from("scale,step,time,max_rho\n");
    for row in &report.rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            format_f64(row.scale),
            format_f64(row.mass),
            format_f64(row.initial_max),
            opt_cell(row.trace.last().map(|_| row.max_over_run())),
            row.blowup,
            row.blowup_step.map(|n| n.to_string()).unwrap_or_default(),
            opt_cell(row.blowup_time),
            row.message.as_deref().map(csv_text).unwrap_or_default(),
        );
        for (n, t, m) in &row.trace {
            let _ = writeln!(trace_text, "{},{},{},{}", format_f64(row.scale), n, format_f64(*t), format_f64(*m));
        }
    }
    emit(out, &text, stdout)?;
    if let Some(path) = trace {
        std::fs::write(path, trace_text).map_err(|e| io_failure(path, e))?;
    }
    Ok(ExitCode::Success)
}

fn cmd_regime(cfg: &Config, stdout: &mut dyn Write) -> Result<ExitCode, Failure> {
    let rho0 = cfg.run.initial_rho.sample(&cfg.run.grid).map_err(validation)?;
    let report = regime_report(&cfg.run.params, &rho0).map_err(validation)?;
    writeln!(stdout, "{report}").map_err(|e| runtime(format!("standard output: {e}")))?;
    Ok(ExitCode::Success)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Run { config, out } => cmd_run(&load_config(&config.config)?, out, stdout),
        Command::Converge { config, dts, p, out } => cmd_converge(&load_config(&config.config)?, &dts, &p, out.as_deref(), stdout),
        Command::Sweep { config, taus, chis, out } => cmd_sweep(&load_config(&config.config)?, &taus, &chis, out.as_deref(), stdout),
        Command::ProbeBlowup {
            config,
            scales,
            out,
            trace,
        } => cmd_probe(&load_config(&config.config)?, &scales, out.as_deref(), trace.as_deref(), stdout),
        Command::Regime { config } => cmd_regime(&load_config(&config.config)?, stdout),
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code: 0 success, 1 validation error, 2 runtime failure.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { ExitCode::Validation as i32 } else { ExitCode::Success as i32 };
        }
    };
    match dispatch(cli, stdout) {
        Ok(code) => code as i32,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code as i32
        }
    }
}
