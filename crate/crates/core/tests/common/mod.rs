#![allow(dead_code)]

pub mod scalar;

use netage::demography::{solve_demography, DemographicEquilibrium};
use netage::kernels::{AgeKernel, KernelSet};
use netage::network::{DegreeDistribution, InfectivityFunction};
use netage::simulator::{Mode, SimulationConfig};

pub const MU: f64 = 0.06;
pub const B: f64 = 0.07;

pub fn beta() -> AgeKernel {
    AgeKernel::Parabolic {
        horizon: 200.0,
        scale: 15000.0,
    }
}

/// Recovery `1/(1 + tau)` (extinction) or `1/(1 + 10 tau)` (endemic).
pub fn gamma(q: f64) -> AgeKernel {
    AgeKernel::RationalDecay { q }
}

pub fn network() -> DegreeDistribution {
    DegreeDistribution::power_law(2.4, 40).unwrap()
}

pub fn demography() -> DemographicEquilibrium {
    solve_demography(&network(), B, MU, 1e-14).unwrap()
}

pub fn kernels(q: f64, dtau: f64) -> KernelSet {
    KernelSet::new(beta(), gamma(q), MU, 200.0, dtau).unwrap()
}

pub fn config(q: f64, dt: f64, dtau: f64, t_end: f64, mode: Mode) -> SimulationConfig {
    let mut cfg = SimulationConfig::new(
        network(),
        InfectivityFunction::Linear {},
        kernels(q, dtau),
        B,
        dt,
        t_end,
    );
    cfg.mode = mode;
    cfg.output_stride = (1.0 / dt).round() as usize;
    cfg
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((x - y) / y).abs()).fold(0.0, f64::max)
}
