use crate::demography::{psi_of_occupancy, solve_demography, DemographicEquilibrium};
use crate::error::{Error, Result};
use crate::kernels::Against;

use super::{EpidemicState, Mode, ObservableSeries, SimulationConfig, SusceptibleInit, TransportDecay};

/// Precomputed scheme coefficients for one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimulationConfig,
    dem: Option<DemographicEquilibrium>,
    degrees: Vec<f64>,
    /// `phi(k) p(k) / <k>`
    theta_weights: Vec<f64>,
    /// Loss factor per age node (balanced scheme) or `dt (mu + gamma_j)` (Euler).
    decay: Vec<f64>,
    courant: f64,
    steps: usize,
}

/// Aggregates frozen over one step.
struct Frozen {
    /// `int beta(tau) Theta(tau) dtau`
    force: f64,
    /// `int gamma(tau) I_k(tau) dtau` per class.
    recovery: Vec<f64>,
}

impl Simulator {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let dem = if config.b > 0.0 {
            Some(solve_demography(&config.dist, config.b, config.mu(), 1e-14)?)
        } else {
            None
        };
        if config.mode == Mode::Limiting && !dem.as_ref().is_some_and(|d| d.viable) {
            return Err(Error::InvalidUsage(
                "limiting mode needs a viable demographic equilibrium (b > mu)".into(),
            ));
        }
        let n = config.dist.max_degree();
        let mean = config.dist.mean_degree();
        let degrees: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let theta_weights = (1..=n).map(|k| config.phi.eval(k) * config.dist.p(k) / mean).collect();
        let courant = config.dt / config.ks.grid().dtau();
        let decay = match config.decay {
            TransportDecay::Balanced => {
                let log_h = config.ks.log_survival();
                let mut d = vec![1.0; log_h.len()];
                for j in 1..log_h.len() {
                    let rho = (log_h[j] - log_h[j - 1]).exp();
                    d[j] = rho / (courant + (1.0 - courant) * rho);
                }
                d
            }
            TransportDecay::Euler => config
                .ks
                .gamma()
                .iter()
                .map(|g| config.dt * (config.mu() + g))
                .collect(),
        };
        let steps = config.steps()?;
        Ok(Self {
            config,
            dem,
            degrees,
            theta_weights,
            decay,
            courant,
            steps,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn demography(&self) -> Option<&DemographicEquilibrium> {
        self.dem.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `int I(tau) dtau` of one class profile.
    pub fn mass(&self, profile: &[f64]) -> f64 {
        self.config.ks.integrate(Against::Unit, profile)
    }

    pub fn initialize(&self) -> Result<EpidemicState> {
        let cfg = &self.config;
        let n = cfg.dist.max_degree();
        let profile = cfg.initial.i0.sample(cfg.ks.grid())?;
        let mut susceptible = match &cfg.initial.s0 {
            SusceptibleInit::Uniform(s) => vec![*s; n],
            SusceptibleInit::PerClass(v) => v.clone(),
        };
        if let Some(k) = susceptible.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid(
                "s0",
                format!("negative or non-finite value for k = {}", k + 1),
            ));
        }
        let mut infected = vec![profile; n];
        let occupancy = match cfg.mode {
            Mode::Full => {
                let occ: Vec<f64> = susceptible
                    .iter()
                    .zip(&infected)
                    .map(|(s, row)| s + self.mass(row))
                    .collect();
                if let Some(k) = occ.iter().position(|v| *v > 1.0 + 1e-12) {
                    return Err(Error::invalid(
                        "s0",
                        format!("initial occupancy {} exceeds 1 for k = {}", occ[k], k + 1),
                    ));
                }
                Some(occ)
            }
            Mode::Limiting => {
                if cfg.initial.project_onto_occupancy {
                    let n_star = &self.dem.as_ref().expect("checked in new").n_star;
                    for k in 0..n {
                        let total = susceptible[k] + self.mass(&infected[k]);
                        if total > 0.0 {
                            let scale = n_star[k] / total;
                            susceptible[k] *= scale;
                            infected[k].iter_mut().for_each(|v| *v *= scale);
                        } else {
                            susceptible[k] = n_star[k];
                        }
                    }
                }
                None
            }
        };
        Ok(EpidemicState {
            t: 0.0,
            susceptible,
            infected,
            occupancy,
        })
    }

    /// `Theta(tau_j) = (1/<k>) sum_i phi(i) p(i) I_i(tau_j)`
    pub fn theta(&self, state: &EpidemicState) -> Vec<f64> {
        let mut theta = vec![0.0; self.config.ks.grid().len()];
        for (w, row) in self.theta_weights.iter().zip(&state.infected) {
            if *w == 0.0 {
                continue;
            }
            for (t, i) in theta.iter_mut().zip(row) {
                *t += w * i;
            }
        }
        theta
    }

    fn frozen(&self, state: &EpidemicState) -> Frozen {
        let ks = &self.config.ks;
        Frozen {
            force: ks.integrate(Against::Beta, &self.theta(state)),
            recovery: state
                .infected
                .iter()
                .map(|row| ks.integrate(Against::Gamma, row))
                .collect(),
        }
    }

    /// Right-hand side of the susceptible (and occupancy) equations with the
    /// infection aggregates frozen.
    fn rhs(&self, fz: &Frozen, s: &[f64], n: Option<&[f64]>, ds: &mut [f64], dn: Option<&mut [f64]>) {
        let mu = self.config.mu();
        let b = self.config.b;
        match (n, dn) {
            (Some(n), Some(dn)) => {
                let psi = psi_of_occupancy(&self.config.dist, n);
                for k in 0..s.len() {
                    let recruit = b * self.degrees[k] * (1.0 - n[k]) * psi;
                    dn[k] = recruit - mu * n[k];
                    ds[k] = recruit - mu * s[k] - self.degrees[k] * s[k] * fz.force + fz.recovery[k];
                }
            }
            _ => {
                let dem = self.dem.as_ref().expect("limiting mode has an equilibrium");
                for k in 0..s.len() {
                    let recruit = b * self.degrees[k] * (1.0 - dem.n_star[k]) * dem.psi_star;
                    ds[k] = recruit - mu * s[k] - self.degrees[k] * s[k] * fz.force + fz.recovery[k];
                }
            }
        }
    }

    fn advance_susceptible(&self, fz: &Frozen, state: &mut EpidemicState) {
        let h = self.config.dt;
        let m = state.susceptible.len();
        let full = state.occupancy.is_some();
        let len = if full { 2 * m } else { m };
        // y = [S, N]
        let mut y = state.susceptible.clone();
        if let Some(n) = &state.occupancy {
            y.extend_from_slice(n);
        }
        let eval = |y: &[f64], out: &mut [f64]| {
            let (ds, dn) = out.split_at_mut(m);
            if full {
                self.rhs(fz, &y[..m], Some(&y[m..]), ds, Some(dn));
            } else {
                self.rhs(fz, &y[..m], None, ds, None);
            }
        };
        let mut k1 = vec![0.0; len];
        let mut k2 = vec![0.0; len];
        let mut k3 = vec![0.0; len];
        let mut k4 = vec![0.0; len];
        let mut tmp = vec![0.0; len];
        eval(&y, &mut k1);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        eval(&tmp, &mut k2);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        eval(&tmp, &mut k3);
        for i in 0..len {
            tmp[i] = y[i] + h * k3[i];
        }
        eval(&tmp, &mut k4);
        for i in 0..len {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        state.susceptible.copy_from_slice(&y[..m]);
        if let Some(n) = state.occupancy.as_mut() {
            n.copy_from_slice(&y[m..]);
        }
    }

    fn transport(&self, row: &mut [f64]) {
        let c = self.courant;
        match self.config.decay {
            TransportDecay::Balanced => {
                for j in (1..row.len()).rev() {
                    row[j] = self.decay[j] * (row[j] - c * (row[j] - row[j - 1]));
                }
            }
            TransportDecay::Euler => {
                for j in (1..row.len()).rev() {
                    row[j] = row[j] - c * (row[j] - row[j - 1]) - self.decay[j] * row[j];
                }
            }
        }
    }

    /// Advance one time step in place.
    pub fn step(&self, state: &mut EpidemicState) -> Result<()> {
        let fz = self.frozen(state);
        for row in state.infected.iter_mut() {
            self.transport(row);
        }
        self.advance_susceptible(&fz, state);
        for (k, row) in state.infected.iter_mut().enumerate() {
            row[0] = self.degrees[k] * state.susceptible[k] * fz.force;
        }
        state.t += self.config.dt;
        check_state(state)
    }

    /// Run to `t_end` from the configured initial data.
    pub fn run(&self) -> Result<ObservableSeries> {
        self.run_observed(|_| Ok(()))
    }

    /// Run to `t_end`, calling `observer` on every recorded state.
    pub fn run_observed(&self, observer: impl FnMut(&EpidemicState) -> Result<()>) -> Result<ObservableSeries> {
        let state = self.initialize()?;
        self.run_from(state, observer)
    }

    /// Run `steps()` steps starting from `state`.
    pub fn run_from(
        &self,
        mut state: EpidemicState,
        mut observer: impl FnMut(&EpidemicState) -> Result<()>,
    ) -> Result<ObservableSeries> {
        let t0 = state.t;
        let mut series = ObservableSeries {
            times: Vec::new(),
            susceptible_by_degree: Vec::new(),
            prevalence_by_degree: Vec::new(),
            incidence_by_degree: Vec::new(),
            total_prevalence: Vec::new(),
            occupancy_by_degree: state.occupancy.as_ref().map(|_| Vec::new()),
            terminal: None,
        };
        self.record(&mut series, &state);
        observer(&state)?;
        let stride = self.config.output_stride;
        for m in 1..=self.steps {
            self.step(&mut state)?;
            // avoid accumulating round-off in t
            state.t = t0 + m as f64 * self.config.dt;
            if m % stride == 0 || m == self.steps {
                self.record(&mut series, &state);
                observer(&state)?;
            }
        }
        series.terminal = Some(state);
        Ok(series)
    }

    fn record(&self, series: &mut ObservableSeries, state: &EpidemicState) {
        let prevalence: Vec<f64> = state.infected.iter().map(|row| self.mass(row)).collect();
        let total = self.config.dist.moment(|k| prevalence[k - 1]);
        series.times.push(state.t);
        series.susceptible_by_degree.push(state.susceptible.clone());
        series.incidence_by_degree.push(state.incidence());
        series.prevalence_by_degree.push(prevalence);
        series.total_prevalence.push(total);
        if let (Some(occ), Some(n)) = (series.occupancy_by_degree.as_mut(), &state.occupancy) {
            occ.push(n.clone());
        }
    }

    /// `max_k |S_k + int I_k - N_k|` against `N*_k` (limiting mode) or the
    /// integrated occupancy (full mode).
    pub fn conservation_drift(&self, state: &EpidemicState) -> f64 {
        let target: &[f64] = match (&state.occupancy, &self.dem) {
            (Some(n), _) => n,
            (None, Some(dem)) => &dem.n_star,
            (None, None) => return f64::NAN,
        };
        state
            .susceptible
            .iter()
            .zip(&state.infected)
            .zip(target)
            .map(|((s, row), n)| (s + self.mass(row) - n).abs())
            .fold(0.0, f64::max)
    }
}

fn check_state(state: &EpidemicState) -> Result<()> {
    let bad = |v: f64| !(v.is_finite() && v >= 0.0);
    for (k, s) in state.susceptible.iter().enumerate() {
        if bad(*s) {
            return Err(Error::NumericalFailure(format!("S_{} = {s} at t = {}", k + 1, state.t)));
        }
    }
    for (k, row) in state.infected.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| bad(*v)) {
            return Err(Error::NumericalFailure(format!(
                "I_{}(tau_{j}) = {} at t = {}",
                k + 1,
                row[j],
                state.t
            )));
        }
    }
    if let Some(n) = &state.occupancy {
        if let Some(k) = n.iter().position(|v| bad(*v)) {
            return Err(Error::NumericalFailure(format!(
                "N_{} = {} at t = {}",
                k + 1,
                n[k],
                state.t
            )));
        }
    }
    Ok(())
}
