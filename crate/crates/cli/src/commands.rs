use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use netage::demography::{integrate_demography, psi_fixed_point, solve_demography, DemographicEquilibrium};
use netage::kernels::KernelSet;
use netage::network::DegreeDistribution;
use netage::simulator::{persistence_check, EpidemicState, LyapunovFunctional, LyapunovWeights, Mode, Simulator};
use netage::threshold::{equilibrium_report, EquilibriumReport};

use crate::config::{Format, LoadedConfig, SweepBlock};
use crate::output::{self, Mesh, Metadata};
use crate::CliError;

/// Tolerance for the demographic equilibrium solve.
const PSI_TOL: f64 = 1e-14;
/// Conservation drift accepted by `validate`.
const DRIFT_TOL: f64 = 1e-2;
/// Allowed per-output increase of the Lyapunov functional.
const LYAPUNOV_TOL: f64 = 1e-6;
/// Relative residual accepted for the endemic equilibrium relations.
const RESIDUAL_TOL: f64 = 1e-8;
const PERSISTENCE_EPS: f64 = 1e-4;

fn mesh(loaded: &LoadedConfig) -> Mesh {
    let k = &loaded.config.kernels;
    let sim = loaded.config.simulation.as_ref();
    Mesh {
        tau_max: k.tau_max,
        dtau: k.dtau,
        dt: sim.map(|s| s.dt),
        t_end: sim.map(|s| s.t_end),
    }
}

fn viable_demography(loaded: &LoadedConfig, dist: &DegreeDistribution) -> Result<DemographicEquilibrium, CliError> {
    let b = loaded.config.demography.b;
    let mu = loaded.config.kernels.mu;
    let dem = solve_demography(dist, b, mu, PSI_TOL)?;
    if !dem.viable {
        return Err(CliError::Regime(format!(
            "b = {b} <= mu = {mu}: the node population dies out and there is no demographic equilibrium"
        )));
    }
    Ok(dem)
}

fn report(loaded: &LoadedConfig) -> Result<(EquilibriumReport, KernelSet, DegreeDistribution), CliError> {
    let dist = loaded.distribution()?;
    let ks = loaded.kernel_set()?;
    let dem = viable_demography(loaded, &dist)?;
    let rep = equilibrium_report(&dist, &loaded.config.infectivity, &ks, &dem)?;
    Ok((rep, ks, dist))
}

pub fn r0(loaded: &LoadedConfig, out: &Path, stdout: &mut impl Write) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Body<'a> {
        r0: f64,
        psi_star: f64,
        s0: &'a [f64],
        k1_0: f64,
        k2_0: f64,
    }
    let (rep, _, _) = report(loaded)?;
    writeln!(stdout, "R0 = {}", rep.r0)?;
    let meta = Metadata::new("r0", &loaded.hash, mesh(loaded));
    let body = Body {
        r0: rep.r0,
        psi_star: rep.psi_star,
        s0: &rep.s0,
        k1_0: rep.k1_0,
        k2_0: rep.k2_0,
    };
    if loaded.config.output.wants(Format::Json) {
        let path = output::write_file(out, "r0.json", &output::json_document(&meta, &body)?)?;
        writeln!(stdout, "wrote {}", path.display())?;
    }
    Ok(())
}

pub fn equilibrium(loaded: &LoadedConfig, out: &Path, stdout: &mut impl Write) -> Result<(), CliError> {
    let (rep, _, dist) = report(loaded)?;
    writeln!(stdout, "R0 = {}", rep.r0)?;
    match &rep.endemic {
        Some(eq) => {
            let total = dist.moment(|k| eq.prevalence[k - 1]);
            writeln!(
                stdout,
                "endemic equilibrium: W = {}, total prevalence = {total}",
                eq.w_star
            )?;
            if let Some(res) = &rep.residuals {
                writeln!(
                    stdout,
                    "relative residuals: susceptible {:e}, incidence {:e}",
                    res.susceptible, res.incidence
                )?;
            }
        }
        None => writeln!(stdout, "no endemic equilibrium (R0 <= 1)")?,
    }
    if let Some(l) = rep.characteristic_root {
        writeln!(stdout, "disease-free state unstable: real characteristic root {l}")?;
    }
    let meta = Metadata::new("equilibrium", &loaded.hash, mesh(loaded));
    if loaded.config.output.wants(Format::Json) {
        let path = output::write_file(out, "equilibrium.json", &output::json_document(&meta, &rep)?)?;
        writeln!(stdout, "wrote {}", path.display())?;
    }
    Ok(())
}

pub fn demography(loaded: &LoadedConfig, out: &Path, stdout: &mut impl Write) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Body<'a> {
        #[serde(flatten)]
        equilibrium: &'a DemographicEquilibrium,
        psi_fixed_point: Option<f64>,
        mean_degree: f64,
    }
    let dist = loaded.distribution()?;
    let dem = solve_demography(&dist, loaded.config.demography.b, loaded.config.kernels.mu, PSI_TOL)?;
    let fixed = psi_fixed_point(&dist, dem.b, dem.mu, 0.5, 100_000)?;
    if dem.viable {
        writeln!(stdout, "Psi* = {}", dem.psi_star)?;
    } else {
        writeln!(stdout, "b = {} <= mu = {}: the node population dies out", dem.b, dem.mu)?;
    }
    if let Some(f) = fixed {
        writeln!(
            stdout,
            "fixed-point iteration: Psi* = {f} (difference {:e})",
            (f - dem.psi_star).abs()
        )?;
    }
    let meta = Metadata::new("demography", &loaded.hash, mesh(loaded));
    let body = Body {
        equilibrium: &dem,
        psi_fixed_point: fixed,
        mean_degree: dist.mean_degree(),
    };
    if loaded.config.output.wants(Format::Json) {
        let path = output::write_file(out, "demography.json", &output::json_document(&meta, &body)?)?;
        writeln!(stdout, "wrote {}", path.display())?;
    }
    if loaded.config.output.wants(Format::Csv) {
        let mut csv = meta.comment_header();
        csv.push_str("k,p,N_star\n");
        for (k, p) in dist.classes() {
            csv.push_str(&format!("{k},{p},{}\n", dem.n_star[k - 1]));
        }
        let path = output::write_file(out, "demography.csv", &csv)?;
        writeln!(stdout, "wrote {}", path.display())?;
        if loaded.config.simulation.is_some() {
            let path = output::write_file(out, "demography_trajectory.csv", &trajectory_csv(loaded, &meta)?)?;
            writeln!(stdout, "wrote {}", path.display())?;
        }
    }
    Ok(())
}

/// Terminal diagnostics of a `simulate` run.
#[derive(Debug, Serialize)]
struct RunSummary {
    mode: Mode,
    steps: usize,
    t_end: f64,
    r0: Option<f64>,
    max_drift: f64,
    terminal_drift: f64,
    terminal_prevalence: Vec<f64>,
    terminal_total_prevalence: f64,
    /// `max_k |I_k(t_end) - I*_k| / I*_k` when an endemic equilibrium exists.
    endemic_relative_error: Option<f64>,
}

fn simulator(loaded: &LoadedConfig) -> Result<Simulator, CliError> {
    let cfg = loaded.simulation()?;
    if cfg.mode == Mode::Limiting {
        viable_demography(loaded, &cfg.dist)?;
    }
    Ok(Simulator::new(cfg)?)
}

fn threshold_report(sim: &Simulator) -> Result<Option<EquilibriumReport>, CliError> {
    let cfg = sim.config();
    match sim.demography() {
        Some(dem) if dem.viable => Ok(Some(equilibrium_report(&cfg.dist, &cfg.phi, &cfg.ks, dem)?)),
        _ => Ok(None),
    }
}

pub fn simulate(loaded: &LoadedConfig, out: &Path, stdout: &mut impl Write) -> Result<(), CliError> {
    let sim = simulator(loaded)?;
    let cfg = sim.config();
    let profile_stride = loaded.config.output.profile_stride;
    let mut snapshots: Vec<EpidemicState> = Vec::new();
    let mut recorded = 0usize;
    let mut max_drift: f64 = 0.0;
    let series = sim.run_observed(|state| {
        max_drift = max_drift.max(sim.conservation_drift(state));
        if let Some(stride) = profile_stride {
            if stride > 0 && recorded.is_multiple_of(stride) {
                snapshots.push(state.clone());
            }
        }
        recorded += 1;
        Ok(())
    })?;
    let terminal = series.terminal.as_ref().expect("run retains the terminal state");
    let rep = threshold_report(&sim)?;
    let last = series.last_prevalence().to_vec();
    let endemic_relative_error = rep.as_ref().and_then(|r| r.endemic.as_ref()).map(|eq| {
        last.iter()
            .zip(&eq.prevalence)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max)
    });
    let summary = RunSummary {
        mode: cfg.mode,
        steps: sim.steps(),
        t_end: terminal.t,
        r0: rep.as_ref().map(|r| r.r0),
        max_drift,
        terminal_drift: sim.conservation_drift(terminal),
        terminal_total_prevalence: *series.total_prevalence.last().unwrap(),
        terminal_prevalence: last,
        endemic_relative_error,
    };
    writeln!(
        stdout,
        "simulated {} steps to t = {}; total prevalence {}",
        summary.steps, summary.t_end, summary.terminal_total_prevalence
    )?;

    let meta = Metadata::new("simulate", &loaded.hash, mesh(loaded))
        .note("mode", format!("{:?}", cfg.mode).to_lowercase())
        .note("transport_decay", format!("{:?}", cfg.decay).to_lowercase())
        .note("time_integrator", "classical 4-stage Runge-Kutta")
        .note("output_stride", cfg.output_stride);
    let wants = |f| loaded.config.output.wants(f);
    let mut written = Vec::new();
    if wants(Format::Csv) {
        written.push(output::write_file(
            out,
            "series.csv",
            &output::series_csv(&meta, &series),
        )?);
        if !snapshots.is_empty() {
            let csv = output::profiles_csv(&meta, cfg.ks.grid(), &snapshots);
            written.push(output::write_file(out, "profiles.csv", &csv)?);
        }
    }
    if wants(Format::Json) {
        written.push(output::write_file(
            out,
            "diagnostics.json",
            &output::json_document(&meta, &summary)?,
        )?);
    }
    if wants(Format::Gnuplot) {
        let script = output::series_plot(&meta, "series.csv", cfg.dist.max_degree());
        written.push(output::write_file(out, "series.gp", &script)?);
    }
    for p in written {
        writeln!(stdout, "wrote {}", p.display())?;
    }
    Ok(())
}

/// One row of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub r0: f64,
    pub psi_star: f64,
    pub endemic: bool,
    pub w_star: Option<f64>,
    /// `sum_k p(k) I*_k`
    pub total_prevalence: Option<f64>,
}

fn sweep_row(loaded: &LoadedConfig, parameter: &str, value: f64) -> Result<SweepRow, CliError> {
    let swept = loaded.with_config(loaded.config.with_parameter(parameter, value)?);
    let dist = swept.distribution()?;
    let ks = swept.kernel_set()?;
    let dem = solve_demography(&dist, swept.config.demography.b, swept.config.kernels.mu, PSI_TOL)?;
    if !dem.viable {
        return Ok(SweepRow {
            value,
            r0: f64::NAN,
            psi_star: 0.0,
            endemic: false,
            w_star: None,
            total_prevalence: None,
        });
    }
    let rep = equilibrium_report(&dist, &swept.config.infectivity, &ks, &dem)?;
    Ok(SweepRow {
        value,
        r0: rep.r0,
        psi_star: rep.psi_star,
        endemic: rep.endemic.is_some(),
        w_star: rep.endemic.as_ref().map(|e| e.w_star),
        total_prevalence: rep.endemic.as_ref().map(|e| dist.moment(|k| e.prevalence[k - 1])),
    })
}

/// Evaluate every grid point in parallel; rows come back in grid order.
pub fn sweep_rows(loaded: &LoadedConfig, sweep: &SweepBlock) -> Result<Vec<SweepRow>, CliError> {
    sweep
        .values
        .par_iter()
        .map(|v| sweep_row(loaded, &sweep.parameter, *v))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep(
    loaded: &LoadedConfig,
    overrides: Option<SweepBlock>,
    out: &Path,
    stdout: &mut impl Write,
) -> Result<(), CliError> {
    let spec = overrides
        .or_else(|| loaded.config.sweep.clone())
        .ok_or_else(|| CliError::Usage("no sweep given: add a [sweep] section or pass --param and --values".into()))?;
    if let Some(bad) = spec.values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("sweep value {bad} is not finite")));
    }
    let rows = sweep_rows(loaded, &spec)?;
    let meta = Metadata::new("sweep", &loaded.hash, mesh(loaded)).note("parameter", &spec.parameter);
    let mut csv = meta.comment_header();
    csv.push_str(&format!(
        "{},r0,psi_star,endemic,w_star,total_prevalence\n",
        spec.parameter
    ));
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.value,
            r.r0,
            r.psi_star,
            r.endemic,
            opt(r.w_star),
            opt(r.total_prevalence)
        ));
        writeln!(stdout, "{} = {}: R0 = {}", spec.parameter, r.value, r.r0)?;
    }
    let wants = |f| loaded.config.output.wants(f);
    let mut written = Vec::new();
    if wants(Format::Csv) {
        written.push(output::write_file(out, "sweep.csv", &csv)?);
    }
    if wants(Format::Json) {
        #[derive(Serialize)]
        struct Body<'a> {
            parameter: &'a str,
            rows: &'a [SweepRow],
        }
        let body = Body {
            parameter: &spec.parameter,
            rows: &rows,
        };
        written.push(output::write_file(
            out,
            "sweep.json",
            &output::json_document(&meta, &body)?,
        )?);
    }
    if wants(Format::Gnuplot) {
        written.push(output::write_file(
            out,
            "sweep.gp",
            &output::sweep_plot(&meta, "sweep.csv", &spec.parameter),
        )?);
    }
    for p in written {
        writeln!(stdout, "wrote {}", p.display())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Reported for information; not a failure.
    Info,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

fn diag(name: &'static str, status: Status, detail: impl Into<String>) -> Diagnostic {
    Diagnostic {
        name,
        status,
        detail: detail.into(),
    }
}

/// Run the configured simulation and check positivity, conservation,
/// equilibrium residuals, the Lyapunov functional and persistence.
pub fn run_diagnostics(loaded: &LoadedConfig) -> Result<Vec<Diagnostic>, CliError> {
    let sim = simulator(loaded)?;
    let cfg = sim.config();
    let rep = threshold_report(&sim)?;
    let mut out = Vec::new();

    let functional = match (&rep, cfg.ks.gamma_kernel().constant_value(), cfg.mode) {
        (Some(r), Some(g), Mode::Limiting) => match &r.endemic {
            Some(eq) => Some(LyapunovFunctional::new(&sim, eq, g, LyapunovWeights::Unit)?),
            None => None,
        },
        _ => None,
    };

    let mut max_drift: f64 = 0.0;
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let run = sim.run_observed(|state| {
        max_drift = max_drift.max(sim.conservation_drift(state));
        if let Some(v) = &functional {
            // points where a logarithm is undefined are left out
            if let Ok(value) = v.evaluate(state) {
                trace.push((state.t, value));
            }
        }
        Ok(())
    });
    let series = match run {
        Ok(s) => {
            out.push(diag(
                "positivity",
                Status::Pass,
                "all state entries stayed finite and >= 0",
            ));
            s
        }
        Err(e @ netage::Error::NumericalFailure(_)) => {
            out.push(diag("positivity", Status::Fail, e.to_string()));
            return Ok(out);
        }
        Err(e) => return Err(e.into()),
    };

    out.push(diag(
        "conservation",
        if max_drift < DRIFT_TOL {
            Status::Pass
        } else {
            Status::Fail
        },
        format!("max_k |S_k + int I_k - N_k| = {max_drift:e} (tolerance {DRIFT_TOL:e})"),
    ));

    match rep.as_ref().and_then(|r| r.residuals) {
        Some(res) => {
            let worst = res.susceptible.max(res.incidence);
            out.push(diag(
                "equilibrium_residuals",
                if worst < RESIDUAL_TOL {
                    Status::Pass
                } else {
                    Status::Fail
                },
                format!("relative residual {worst:e} (tolerance {RESIDUAL_TOL:e})"),
            ));
        }
        None => out.push(diag("equilibrium_residuals", Status::Skipped, "no endemic equilibrium")),
    }

    if functional.is_none() {
        out.push(diag(
            "lyapunov",
            Status::Skipped,
            "needs limiting mode, constant recovery rate and an endemic equilibrium",
        ));
    } else if trace.len() < 2 {
        out.push(diag("lyapunov", Status::Skipped, "functional undefined along the run"));
    } else {
        let worst = trace
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(diag(
            "lyapunov",
            if worst <= LYAPUNOV_TOL {
                Status::Pass
            } else {
                Status::Fail
            },
            format!(
                "{} points from t = {}; largest increase {worst:e} (tolerance {LYAPUNOV_TOL:e})",
                trace.len(),
                trace[0].0
            ),
        ));
    }

    let span = series.times.last().unwrap() - series.times[0];
    if span > 0.0 {
        let window = 0.1 * span;
        let persists = persistence_check(&series, PERSISTENCE_EPS, window)?;
        let count = persists.iter().filter(|p| **p).count();
        let detail = format!(
            "{count}/{} classes above {PERSISTENCE_EPS:e} over the last {window} time units",
            persists.len()
        );
        let status = match rep.as_ref().map(|r| r.r0) {
            Some(r0) if r0 > 1.0 => {
                if count == persists.len() {
                    Status::Pass
                } else {
                    Status::Fail
                }
            }
            _ => Status::Info,
        };
        out.push(diag("persistence", status, detail));
    } else {
        out.push(diag("persistence", Status::Skipped, "run has no time span"));
    }
    Ok(out)
}

/// `N_k(t)` from the simulation's initial occupancy over its horizon.
fn trajectory_csv(loaded: &LoadedConfig, meta: &Metadata) -> Result<String, CliError> {
    let cfg = loaded.simulation()?;
    let (dt, t_end, stride) = (cfg.dt, cfg.t_end, cfg.output_stride);
    let mut full = cfg.clone();
    full.mode = Mode::Full;
    let sim = Simulator::new(full)?;
    let n0 = sim.initialize()?.occupancy.expect("full mode tracks occupancy");
    let run = integrate_demography(&cfg.dist, cfg.b, cfg.mu(), &n0, dt, t_end)?;
    let mut csv = meta.comment_header();
    csv.push_str("t,k,N\n");
    let last = run.times.len() - 1;
    for (m, (t, row)) in run.times.iter().zip(&run.states).enumerate() {
        if !m.is_multiple_of(stride) && m != last {
            continue;
        }
        for (k, n) in row.iter().enumerate() {
            csv.push_str(&format!("{t},{},{n}\n", k + 1));
        }
    }
    Ok(csv)
}

pub fn validate(loaded: &LoadedConfig, out: &Path, stdout: &mut impl Write) -> Result<(), CliError> {
    let diagnostics = run_diagnostics(loaded)?;
    for d in &diagnostics {
        let tag = match d.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::Skipped => "SKIP",
        };
        writeln!(stdout, "[{tag}] {}: {}", d.name, d.detail)?;
    }
    let meta = Metadata::new("validate", &loaded.hash, mesh(loaded));
    #[derive(Serialize)]
    struct Body<'a> {
        diagnostics: &'a [Diagnostic],
        failed: usize,
    }
    let failed = diagnostics.iter().filter(|d| d.status == Status::Fail).count();
    let body = Body {
        diagnostics: &diagnostics,
        failed,
    };
    output::write_file(out, "validate.json", &output::json_document(&meta, &body)?)?;
    if failed > 0 {
        return Err(CliError::DiagnosticsFailed(failed));
    }
    Ok(())
}
