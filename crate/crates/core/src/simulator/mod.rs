//! Forward integration of the degree x age system and observables.
//!
//! Transport in age uses a first-order upwind scheme (Courant number
//! `dt / dtau <= 1`); the susceptible (and, in full mode, occupancy)
//! equations use classical RK4 with the infection aggregates frozen over the
//! step.

mod diagnostics;
mod scheme;

pub use diagnostics::{lyapunov_trace, persistence_check, LyapunovFunctional, LyapunovWeights};
pub use scheme::Simulator;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{AgeGrid, KernelSet};
use crate::network::{DegreeDistribution, InfectivityFunction};

/// Which system is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Occupancy `N_k(t)` evolves by its own ODE; recruitment uses `Psi(t)`.
    #[default]
    Full,
    /// Occupancy frozen at `N*_k`, recruitment at `Psi*`.
    Limiting,
}

/// Loss term in the age-transport step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportDecay {
    /// Exponential loss factor matched to the survival function so that
    /// `Z H(tau)` profiles are transported exactly.
    #[default]
    Balanced,
    /// Forward Euler loss `- dt (mu + gamma(tau_j)) I_j`.
    Euler,
}

/// Initial susceptible density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SusceptibleInit {
    Uniform(f64),
    PerClass(Vec<f64>),
}

/// Initial infection-age profile, identical across degree classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgeProfile {
    /// Normal density `exp(-(tau - center)^2 / (2 sd^2)) / (sd sqrt(2 pi))`.
    Gaussian {
        center: f64,
        sd: f64,
    },
    Zero {},
    /// Values at the age-grid nodes.
    Table {
        values: Vec<f64>,
    },
}

impl AgeProfile {
    /// `I(0, tau) = exp(-(tau + 1.15)^2 / 2) / sqrt(2 pi)`
    pub fn default_gaussian() -> Self {
        AgeProfile::Gaussian { center: -1.15, sd: 1.0 }
    }

    pub fn sample(&self, grid: &AgeGrid) -> Result<Vec<f64>> {
        let values: Vec<f64> = match self {
            AgeProfile::Gaussian { center, sd } => {
                if !(sd.is_finite() && *sd > 0.0 && center.is_finite()) {
                    return Err(Error::invalid("i0", "gaussian needs finite center and sd > 0"));
                }
                let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
                grid.nodes()
                    .map(|t| norm * (-(t - center).powi(2) / (2.0 * sd * sd)).exp())
                    .collect()
            }
            AgeProfile::Zero {} => vec![0.0; grid.len()],
            AgeProfile::Table { values } => {
                if values.len() != grid.len() {
                    return Err(Error::invalid(
                        "i0",
                        format!("table has {} values, age grid has {}", values.len(), grid.len()),
                    ));
                }
                values.clone()
            }
        };
        if let Some(j) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(
                "i0",
                format!("negative or non-finite value at node {j}"),
            ));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub s0: SusceptibleInit,
    pub i0: AgeProfile,
    /// Limiting mode only: rescale each class so that `S_k + int I_k = N*_k`.
    #[serde(default = "default_true")]
    pub project_onto_occupancy: bool,
}

fn default_true() -> bool {
    true
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            s0: SusceptibleInit::Uniform(0.6),
            i0: AgeProfile::default_gaussian(),
            project_onto_occupancy: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub dist: DegreeDistribution,
    pub phi: InfectivityFunction,
    pub ks: KernelSet,
    pub b: f64,
    pub dt: f64,
    pub t_end: f64,
    pub mode: Mode,
    pub initial: InitialData,
    pub output_stride: usize,
    pub decay: TransportDecay,
}

impl SimulationConfig {
    /// Default initial data with full-mode dynamics.
    pub fn new(dist: DegreeDistribution, phi: InfectivityFunction, ks: KernelSet, b: f64, dt: f64, t_end: f64) -> Self {
        Self {
            dist,
            phi,
            ks,
            b,
            dt,
            t_end,
            mode: Mode::Full,
            initial: InitialData::default(),
            output_stride: 1,
            decay: TransportDecay::Balanced,
        }
    }

    pub fn mu(&self) -> f64 {
        self.ks.mu()
    }

    /// Number of steps implied by `t_end / dt`.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.t_end / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(
                "t_end",
                format!("must be an integer multiple of dt = {}, got {}", self.dt, self.t_end),
            ));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let dtau = self.ks.grid().dtau();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        if self.dt > dtau * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "dt",
                format!("CFL violated: dt = {} exceeds dtau = {dtau}", self.dt),
            ));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::invalid(
                "t_end",
                format!("must be finite and >= 0, got {}", self.t_end),
            ));
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::invalid("b", format!("must be finite and >= 0, got {}", self.b)));
        }
        if self.output_stride == 0 {
            return Err(Error::invalid("output_stride", "must be >= 1"));
        }
        self.phi.validate()?;
        self.steps()?;
        if let SusceptibleInit::PerClass(v) = &self.initial.s0 {
            if v.len() != self.dist.max_degree() {
                return Err(Error::invalid(
                    "s0",
                    format!("{} values for {} degree classes", v.len(), self.dist.max_degree()),
                ));
            }
        }
        Ok(())
    }
}

/// Snapshot of the system at one time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpidemicState {
    pub t: f64,
    /// `S_k`, index `k - 1`.
    pub susceptible: Vec<f64>,
    /// `I_k(tau_j)`, one row per degree class.
    pub infected: Vec<Vec<f64>>,
    /// `N_k` in full mode.
    pub occupancy: Option<Vec<f64>>,
}

impl EpidemicState {
    /// Boundary values `Z_k = I_k(t, 0)`.
    pub fn incidence(&self) -> Vec<f64> {
        self.infected.iter().map(|row| row[0]).collect()
    }
}

/// Recorded output of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub susceptible_by_degree: Vec<Vec<f64>>,
    /// `I_k(t) = int I_k(t, tau) dtau`
    pub prevalence_by_degree: Vec<Vec<f64>>,
    pub incidence_by_degree: Vec<Vec<f64>>,
    /// `sum_k p(k) I_k(t)`
    pub total_prevalence: Vec<f64>,
    pub occupancy_by_degree: Option<Vec<Vec<f64>>>,
    #[serde(skip)]
    pub terminal: Option<EpidemicState>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_prevalence(&self) -> &[f64] {
        self.prevalence_by_degree.last().map(Vec::as_slice).unwrap_or(&[])
    }
}
