mod common;

use common::*;
use netage::demography::integrate_demography;
use netage::network::InfectivityFunction;
use netage::simulator::{persistence_check, EpidemicState, Mode, Simulator};
use netage::threshold::endemic_equilibrium;

#[test]
fn subcritical_epidemic_dies_out() {
    let sim = Simulator::new(config(1.0, 0.1, 0.2, 500.0, Mode::Full)).unwrap();
    let series = sim.run().unwrap();
    for w in series.total_prevalence.windows(2) {
        assert!(w[1] < w[0]);
    }
    let peak = series.last_prevalence().iter().cloned().fold(0.0, f64::max);
    assert!(peak < 1e-4, "{peak}");
    assert!(persistence_check(&series, 1e-4, 50.0).unwrap().iter().all(|ok| !ok));
}

#[test]
fn supercritical_run_reaches_endemic_state() {
    let eq = endemic_equilibrium(
        &network(),
        &InfectivityFunction::Linear {},
        &kernels(10.0, 0.2),
        &demography(),
    )
    .unwrap()
    .unwrap();
    let sim = Simulator::new(config(10.0, 0.1, 0.2, 1000.0, Mode::Full)).unwrap();
    let series = sim.run().unwrap();
    let last = series.last_prevalence();
    assert!(max_rel_err(last, &eq.prevalence) < 1e-2);
    for w in last.windows(2) {
        assert!(w[0] < w[1]);
    }
    assert!(persistence_check(&series, 1e-4, 100.0).unwrap().iter().all(|ok| *ok));
}

#[test]
fn equilibrium_is_stationary() {
    let eq = endemic_equilibrium(
        &network(),
        &InfectivityFunction::Linear {},
        &kernels(10.0, 0.2),
        &demography(),
    )
    .unwrap()
    .unwrap();
    let sim = Simulator::new(config(10.0, 0.1, 0.2, 1000.0, Mode::Limiting)).unwrap();
    assert_eq!(sim.steps(), 10_000);
    let start = EpidemicState {
        t: 0.0,
        susceptible: eq.s_star.clone(),
        infected: eq.i_star_profile.clone(),
        occupancy: None,
    };
    let mut worst: f64 = 0.0;
    sim.run_from(start, |s| {
        worst = worst.max(max_rel_err(&s.susceptible, &eq.s_star));
        let prevalence: Vec<f64> = s.infected.iter().map(|row| sim.mass(row)).collect();
        worst = worst.max(max_rel_err(&prevalence, &eq.prevalence));
        Ok(())
    })
    .unwrap();
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn limiting_mode_conserves_occupancy() {
    for q in [1.0, 10.0] {
        let sim = Simulator::new(config(q, 0.1, 0.2, 600.0, Mode::Limiting)).unwrap();
        let mut drift: f64 = 0.0;
        sim.run_observed(|s| {
            drift = drift.max(sim.conservation_drift(s));
            Ok(())
        })
        .unwrap();
        assert!(drift < 1e-2, "q = {q}: {drift}");
    }
}

#[test]
fn full_mode_occupancy_matches_compartments() {
    let dem = demography();
    let sim = Simulator::new(config(10.0, 0.1, 0.2, 600.0, Mode::Full)).unwrap();
    let mut drift: f64 = 0.0;
    let series = sim
        .run_observed(|s| {
            drift = drift.max(sim.conservation_drift(s));
            Ok(())
        })
        .unwrap();
    assert!(drift < 1e-2, "{drift}");
    // occupancy dynamics do not depend on infection status
    let n0 = series.occupancy_by_degree.as_ref().unwrap()[0].clone();
    let alone = integrate_demography(&network(), B, MU, &n0, 0.1, 600.0).unwrap();
    let occupancy = series.terminal.unwrap().occupancy.unwrap();
    assert!(max_rel_err(&occupancy, alone.states.last().unwrap()) < 1e-10);
    assert!(max_rel_err(&occupancy, &dem.n_star) < 0.1);
}

/// Halving both steps roughly halves the distance to a fine-mesh reference.
#[test]
fn first_order_mesh_convergence() {
    let t_end = 20.0;
    for mode in [Mode::Limiting, Mode::Full] {
        let reference = Simulator::new(config(10.0, 0.0125, 0.025, t_end, mode))
            .unwrap()
            .run()
            .unwrap();
        let error = |dt: f64| {
            let s = Simulator::new(config(10.0, dt, 2.0 * dt, t_end, mode))
                .unwrap()
                .run()
                .unwrap();
            max_rel_err(s.last_prevalence(), reference.last_prevalence())
        };
        let (coarse, fine) = (error(0.1), error(0.05));
        assert!(coarse / fine >= 1.8, "{mode:?}: {coarse} {fine}");
    }
}

#[test]
fn series_shapes_are_consistent() {
    let mut cfg = config(10.0, 0.1, 0.2, 10.0, Mode::Full);
    cfg.output_stride = 7;
    let series = Simulator::new(cfg).unwrap().run().unwrap();
    let n = series.len();
    assert_eq!(n, 16);
    for table in [
        &series.susceptible_by_degree,
        &series.prevalence_by_degree,
        &series.incidence_by_degree,
        series.occupancy_by_degree.as_ref().unwrap(),
    ] {
        assert_eq!(table.len(), n);
        assert!(table.iter().all(|row| row.len() == 40 && row.iter().all(|v| *v >= 0.0)));
    }
    assert_eq!(series.total_prevalence.len(), n);
    let p = network();
    let total: f64 = (1..=40).map(|k| p.p(k) * series.prevalence_by_degree[3][k - 1]).sum();
    assert!((total - series.total_prevalence[3]).abs() < 1e-14);
}
