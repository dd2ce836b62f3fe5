mod common;

use common::*;
use netage::kernels::{AgeKernel, KernelSet};
use netage::network::InfectivityFunction;
use netage::simulator::{
    persistence_check, EpidemicState, LyapunovFunctional, LyapunovWeights, Mode, SimulationConfig, Simulator,
};
use netage::threshold::{endemic_equilibrium, EndemicEquilibrium};

const GAMMA: f64 = 0.1;

fn setup(t_end: f64) -> (Simulator, EndemicEquilibrium) {
    let ks = KernelSet::new(
        AgeKernel::Parabolic {
            horizon: 200.0,
            scale: 5000.0,
        },
        AgeKernel::Constant { value: GAMMA },
        MU,
        200.0,
        0.2,
    )
    .unwrap();
    let eq = endemic_equilibrium(&network(), &InfectivityFunction::Linear {}, &ks, &demography())
        .unwrap()
        .unwrap();
    let mut cfg = SimulationConfig::new(network(), InfectivityFunction::Linear {}, ks, B, 0.1, t_end);
    cfg.mode = Mode::Limiting;
    cfg.output_stride = 10;
    (Simulator::new(cfg).unwrap(), eq)
}

fn perturbed(eq: &EndemicEquilibrium, dtau: f64, s_scale: f64, shape: impl Fn(f64) -> f64) -> EpidemicState {
    EpidemicState {
        t: 0.0,
        susceptible: eq.s_star.iter().map(|s| s * s_scale).collect(),
        infected: eq
            .i_star_profile
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| v * shape(j as f64 * dtau))
                    .collect()
            })
            .collect(),
        occupancy: None,
    }
}

#[test]
fn functional_decreases_along_trajectories() {
    let (sim, eq) = setup(300.0);
    let starts = [
        perturbed(&eq, 0.2, 1.1, |_| 1.0),
        perturbed(&eq, 0.2, 1.5, |t| 0.5 + (-t / 10.0).exp()),
        perturbed(&eq, 0.2, 0.3, |t| 3.0 - 2.0 * (-t / 30.0).exp()),
    ];
    for weights in [LyapunovWeights::Unit, LyapunovWeights::Infectivity] {
        let v = LyapunovFunctional::new(&sim, &eq, GAMMA, weights).unwrap();
        for start in &starts {
            let mut trace = Vec::new();
            sim.run_from(start.clone(), |s| {
                trace.push(v.evaluate(s)?);
                Ok(())
            })
            .unwrap();
            assert!(trace[0] > 0.0);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-6, "{weights:?}: {} -> {}", w[0], w[1]);
            }
            assert!(*trace.last().unwrap() < 1e-3 * trace[0]);
        }
    }
}

#[test]
fn endemic_run_persists() {
    let (sim, eq) = setup(200.0);
    let series = sim.run_from(perturbed(&eq, 0.2, 1.2, |_| 0.2), |_| Ok(())).unwrap();
    assert!(persistence_check(&series, 1e-4, 50.0).unwrap().iter().all(|ok| *ok));
}
