//! Birth-death occupancy dynamics of the network nodes.
//!
//! Vacant nodes of degree `k` are filled at rate `b k (1 - N_k) Psi`, where
//! `Psi = (1/<k>) sum_i p(i) N_i` is the probability that a link leads to an
//! occupied node, and occupants die at rate `mu`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::DegreeDistribution;

/// Lower end of the bisection bracket for `Psi`.
const PSI_FLOOR: f64 = 1e-12;
/// Occupancy excursions outside `[0, 1]` smaller than this are not reported.
const EXCURSION_TOL: f64 = 1e-9;

/// Stationary occupancy of the demographic subsystem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemographicEquilibrium {
    pub b: f64,
    pub mu: f64,
    pub psi_star: f64,
    pub n_star: Vec<f64>,
    /// `b > mu`; otherwise the population goes extinct and everything is zero.
    pub viable: bool,
}

fn check_rates(b: f64, mu: f64) -> Result<()> {
    if !b.is_finite() || b <= 0.0 {
        return Err(Error::invalid(
            "b",
            format!("birth rate must be finite and > 0, got {b}"),
        ));
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::invalid(
            "mu",
            format!("death rate must be finite and > 0, got {mu}"),
        ));
    }
    Ok(())
}

/// `f(Psi) = 1 - (1/<k>) sum_i b i p(i) / (mu + b i Psi)`; its positive root is `Psi*`.
pub fn psi_residual(dist: &DegreeDistribution, b: f64, mu: f64, psi: f64) -> f64 {
    1.0 - dist.moment(|i| b * i as f64 / (mu + b * i as f64 * psi)) / dist.mean_degree()
}

fn psi_residual_derivative(dist: &DegreeDistribution, b: f64, mu: f64, psi: f64) -> f64 {
    dist.moment(|i| {
        let bi = b * i as f64;
        bi * bi / ((mu + bi * psi) * (mu + bi * psi))
    }) / dist.mean_degree()
}

/// `N_k = b k Psi / (mu + b k Psi)` for every degree class.
pub fn occupancy_for_psi(dist: &DegreeDistribution, b: f64, mu: f64, psi: f64) -> Vec<f64> {
    dist.classes()
        .map(|(k, _)| {
            let bkp = b * k as f64 * psi;
            bkp / (mu + bkp)
        })
        .collect()
}

/// `Psi = (1/<k>) sum_i p(i) N_i`.
pub fn psi_of_occupancy(dist: &DegreeDistribution, n: &[f64]) -> f64 {
    dist.moment(|i| n[i - 1]) / dist.mean_degree()
}

/// Demographic equilibrium by bisection on `f(Psi) = 0` over `[1e-12, 1]`
/// followed by one Newton polish.
pub fn solve_demography(dist: &DegreeDistribution, b: f64, mu: f64, tol: f64) -> Result<DemographicEquilibrium> {
    check_rates(b, mu)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be > 0, got {tol}")));
    }
    if b <= mu {
        return Ok(DemographicEquilibrium {
            b,
            mu,
            psi_star: 0.0,
            n_star: vec![0.0; dist.max_degree()],
            viable: false,
        });
    }

    let f = |psi: f64| psi_residual(dist, b, mu, psi);
    let (mut lo, mut hi) = (PSI_FLOOR, 1.0);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NumericalFailure(format!(
            "no sign change for f(Psi) on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut psi = 0.5 * (lo + hi);
    let polished = psi - f(psi) / psi_residual_derivative(dist, b, mu, psi);
    if polished > 0.0 && polished <= 1.0 && f(polished).abs() < f(psi).abs() {
        psi = polished;
    }
    let residual = f(psi);
    if residual.abs() > tol {
        return Err(Error::NumericalFailure(format!(
            "bisection stalled at Psi = {psi} with |f| = {} > tol = {tol}",
            residual.abs()
        )));
    }
    Ok(DemographicEquilibrium {
        b,
        mu,
        psi_star: psi,
        n_star: occupancy_for_psi(dist, b, mu, psi),
        viable: true,
    })
}

/// Independent route to `Psi*`: damped iteration of
/// `Psi <- (1 - w) Psi + w (1/<k>) sum_i p(i) N_i(Psi)` started from `Psi = 1`.
///
/// Returns `None` for `b <= mu` (the only fixed point is zero) or when the
/// iteration has not settled within `max_iter` steps.
pub fn psi_fixed_point(
    dist: &DegreeDistribution,
    b: f64,
    mu: f64,
    damping: f64,
    max_iter: usize,
) -> Result<Option<f64>> {
    check_rates(b, mu)?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::invalid("damping", format!("must lie in (0, 1], got {damping}")));
    }
    if b <= mu {
        return Ok(None);
    }
    let mut psi = 1.0;
    for _ in 0..max_iter {
        let mapped = psi_of_occupancy(dist, &occupancy_for_psi(dist, b, mu, psi));
        let next = (1.0 - damping) * psi + damping * mapped;
        if (next - psi).abs() <= 1e-16 * psi.max(1e-300) || next == psi {
            return Ok(Some(next));
        }
        psi = next;
    }
    Ok(None)
}

/// Occupancy trajectory produced by [`integrate_demography`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemographicTrajectory {
    pub times: Vec<f64>,
    /// `states[m][k - 1] = N_k(times[m])`
    pub states: Vec<Vec<f64>>,
    /// Largest distance of any `N_k` outside `[0, 1]` beyond 1e-9, if any.
    pub max_excursion: Option<f64>,
}

/// Right-hand side of the occupancy ODE with the time-varying `Psi(N)`.
pub fn occupancy_rhs(dist: &DegreeDistribution, b: f64, mu: f64, n: &[f64], out: &mut [f64]) {
    let psi = psi_of_occupancy(dist, n);
    for (k, (o, nk)) in out.iter_mut().zip(n).enumerate() {
        *o = b * (k + 1) as f64 * (1.0 - nk) * psi - mu * nk;
    }
}

/// Classical 4-stage Runge-Kutta integration of the occupancy ODE.
///
/// States are never clamped; excursions outside `[0, 1]` are reported in
/// [`DemographicTrajectory::max_excursion`].
pub fn integrate_demography(
    dist: &DegreeDistribution,
    b: f64,
    mu: f64,
    n0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<DemographicTrajectory> {
    check_rates(b, mu)?;
    let n = dist.max_degree();
    if n0.len() != n {
        return Err(Error::invalid("n0", format!("expected {n} classes, got {}", n0.len())));
    }
    if let Some(bad) = n0.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(
            "n0",
            format!("occupancies must lie in [0, 1], found {bad}"),
        ));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::invalid("dt", format!("must be finite and > 0, got {dt}")));
    }
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::invalid("t_end", format!("must be finite and >= 0, got {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;

    let mut state = n0.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(state.clone());

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut max_excursion: Option<f64> = None;

    for step in 1..=steps {
        occupancy_rhs(dist, b, mu, &state, &mut k1);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * dt * k1[i];
        }
        occupancy_rhs(dist, b, mu, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * dt * k2[i];
        }
        occupancy_rhs(dist, b, mu, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = state[i] + dt * k3[i];
        }
        occupancy_rhs(dist, b, mu, &tmp, &mut k4);
        for i in 0..n {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(i) = state.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "occupancy of degree {} became non-finite at t = {}; reduce dt",
                i + 1,
                step as f64 * dt
            )));
        }
        for v in &state {
            let out = (-v).max(v - 1.0);
            if out > EXCURSION_TOL {
                max_excursion = Some(max_excursion.map_or(out, |m| m.max(out)));
            }
        }
        times.push(step as f64 * dt);
        states.push(state.clone());
    }
    Ok(DemographicTrajectory {
        times,
        states,
        max_excursion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> DegreeDistribution {
        DegreeDistribution::power_law(2.4, 40).unwrap()
    }

    #[test]
    fn extinction_regime() {
        let d = reference();
        let eq = solve_demography(&d, 0.06, 0.06, 1e-12).unwrap();
        assert!(!eq.viable);
        assert_eq!(eq.psi_star, 0.0);
        assert!(eq.n_star.iter().all(|n| *n == 0.0));
        assert_eq!(psi_fixed_point(&d, 0.06, 0.06, 1.0, 1000).unwrap(), None);
    }

    #[test]
    fn single_class_closed_form() {
        let d = DegreeDistribution::power_law(2.4, 1).unwrap();
        let eq = solve_demography(&d, 0.07, 0.06, 1e-14).unwrap();
        assert!((eq.psi_star - 1.0 / 7.0).abs() < 1e-12);
        assert!((eq.n_star[0] - 1.0 / 7.0).abs() < 1e-12);

        // one populated class at degree 3: Psi* = (b - mu) / (3 b)
        let d = DegreeDistribution::from_probabilities(vec![0.0, 0.0, 1.0]).unwrap();
        let eq = solve_demography(&d, 0.07, 0.06, 1e-14).unwrap();
        assert!((eq.psi_star - 0.01 / 0.21).abs() < 1e-12);
    }

    #[test]
    fn bisection_and_fixed_point_agree() {
        let d = reference();
        let eq = solve_demography(&d, 0.07, 0.06, 1e-12).unwrap();
        assert!(psi_residual(&d, 0.07, 0.06, eq.psi_star).abs() <= 1e-12);
        let fp = psi_fixed_point(&d, 0.07, 0.06, 1.0, 100_000).unwrap().unwrap();
        assert!((fp - eq.psi_star).abs() < 1e-10, "{fp} vs {}", eq.psi_star);
        let damped = psi_fixed_point(&d, 0.07, 0.06, 0.5, 100_000).unwrap().unwrap();
        assert!((damped - eq.psi_star).abs() < 1e-10);
    }

    #[test]
    fn equilibrium_invariants() {
        let d = reference();
        let eq = solve_demography(&d, 0.07, 0.06, 1e-12).unwrap();
        for w in eq.n_star.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(eq.n_star.iter().all(|n| *n > 0.0 && *n < 1.0));
        assert_relative_eq!(psi_of_occupancy(&d, &eq.n_star), eq.psi_star, max_relative = 1e-10);
    }

    #[test]
    fn residual_is_increasing_and_positive_at_one() {
        let d = reference();
        for (b, mu) in [(0.07, 0.06), (0.5, 0.1), (0.01, 0.2)] {
            let samples: Vec<f64> = (1..=200).map(|i| psi_residual(&d, b, mu, i as f64 / 200.0)).collect();
            for w in samples.windows(2) {
                assert!(w[1] > w[0]);
            }
            assert!(samples[199] > 0.0);
        }
    }

    #[test]
    fn trajectory_stays_at_equilibrium() {
        let d = reference();
        let eq = solve_demography(&d, 0.07, 0.06, 1e-14).unwrap();
        let tr = integrate_demography(&d, 0.07, 0.06, &eq.n_star, 0.1, 100.0).unwrap();
        assert_eq!(tr.states.len(), 1001);
        let last = tr.states.last().unwrap();
        for (a, b) in last.iter().zip(&eq.n_star) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(tr.max_excursion.is_none());
    }

    #[test]
    fn trajectory_converges_to_equilibrium() {
        let d = reference();
        let eq = solve_demography(&d, 0.07, 0.06, 1e-14).unwrap();
        let tr = integrate_demography(&d, 0.07, 0.06, &vec![0.5; 40], 0.1, 4000.0).unwrap();
        for (a, b) in tr.states.last().unwrap().iter().zip(&eq.n_star) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(tr.max_excursion.is_none());
    }

    #[test]
    fn extinct_population_decays() {
        let d = reference();
        let tr = integrate_demography(&d, 0.05, 0.06, &vec![0.8; 40], 0.1, 2000.0).unwrap();
        let totals: Vec<f64> = tr.states.iter().map(|s| s.iter().sum()).collect();
        // after the transient every class decreases monotonically
        for k in 0..40 {
            for m in 200..tr.states.len() {
                assert!(tr.states[m][k] <= tr.states[m - 1][k]);
            }
        }
        assert!(*totals.last().unwrap() < 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        let d = reference();
        assert!(solve_demography(&d, 0.0, 0.06, 1e-12).is_err());
        assert!(solve_demography(&d, 0.07, -1.0, 1e-12).is_err());
        assert!(integrate_demography(&d, 0.07, 0.06, &[0.5; 3], 0.1, 1.0).is_err());
        assert!(integrate_demography(&d, 0.07, 0.06, &vec![1.5; 40], 0.1, 1.0).is_err());
        assert!(integrate_demography(&d, 0.07, 0.06, &vec![0.5; 40], 0.0, 1.0).is_err());
    }

    #[test]
    fn huge_step_is_reported() {
        let d = reference();
        let err = integrate_demography(&d, 50.0, 0.06, &vec![0.5; 40], 50.0, 5000.0).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(_)));
    }
}
