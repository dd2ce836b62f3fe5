use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::threshold::EndemicEquilibrium;

use super::{EpidemicState, Mode, ObservableSeries, Simulator};

/// Per-class weights `c_k` in `V = sum_k c_k V_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovWeights {
    #[default]
    Unit,
    /// `c_k = phi(k) p(k)`
    Infectivity,
}

/// `g(x) = x - 1 - ln x`
fn g(x: f64) -> f64 {
    x - 1.0 - x.ln()
}

/// Volterra-type functional around the endemic equilibrium of the limiting
/// system with constant recovery rate:
/// `V_k = S*_k g(S_k/S*_k) + a_k int pi(tau) I*_k(tau) g(I_k/I*_k) dtau`,
/// `a_k = k S*_k sum_i phi(i) p(i) I*_i(0) / (<k> I*_k(0))`.
#[derive(Debug, Clone)]
pub struct LyapunovFunctional {
    s_star: Vec<f64>,
    i_star: Vec<Vec<f64>>,
    pi: Vec<f64>,
    /// `c_k a_k`
    age_coef: Vec<f64>,
    class_weights: Vec<f64>,
    trapezoid: Vec<f64>,
}

impl LyapunovFunctional {
    pub fn new(sim: &Simulator, eq: &EndemicEquilibrium, gamma_const: f64, weights: LyapunovWeights) -> Result<Self> {
        let cfg = sim.config();
        if cfg.mode != Mode::Limiting {
            return Err(Error::InvalidUsage(
                "Lyapunov functional is defined for the limiting system".into(),
            ));
        }
        let pi = cfg.ks.pi_kernel(gamma_const)?;
        let n = cfg.dist.max_degree();
        if eq.s_star.len() != n {
            return Err(Error::InvalidUsage("equilibrium and network disagree on n".into()));
        }
        let w = cfg.dist.moment(|i| cfg.phi.eval(i) * eq.z_star[i - 1]);
        let mean = cfg.dist.mean_degree();
        let class_weights: Vec<f64> = (1..=n)
            .map(|k| match weights {
                LyapunovWeights::Unit => 1.0,
                LyapunovWeights::Infectivity => cfg.phi.eval(k) * cfg.dist.p(k),
            })
            .collect();
        let age_coef = (0..n)
            .map(|i| {
                let k = (i + 1) as f64;
                class_weights[i] * k * eq.s_star[i] * w / (mean * eq.z_star[i])
            })
            .collect();
        Ok(Self {
            s_star: eq.s_star.clone(),
            i_star: eq.i_star_profile.clone(),
            pi,
            age_coef,
            class_weights,
            trapezoid: cfg.ks.grid().trapezoid_weights(),
        })
    }

    pub fn evaluate(&self, state: &EpidemicState) -> Result<f64> {
        let unavailable =
            |what: String| Error::DiagnosticUnavailable(format!("{what} at t = {}: logarithm undefined", state.t));
        let mut v = 0.0;
        for (k, (s, row)) in state.susceptible.iter().zip(&state.infected).enumerate() {
            if !(*s > 0.0) {
                return Err(unavailable(format!("S_{} = {s}", k + 1)));
            }
            let s_star = self.s_star[k];
            let mut age = 0.0;
            for (j, i) in row.iter().enumerate() {
                if !(*i > 0.0) {
                    return Err(unavailable(format!("I_{}(tau_{j}) = {i}", k + 1)));
                }
                let i_star = self.i_star[k][j];
                age += self.trapezoid[j] * self.pi[j] * i_star * g(i / i_star);
            }
            v += self.class_weights[k] * s_star * g(s / s_star) + self.age_coef[k] * age;
        }
        Ok(v)
    }
}

/// `V(t)` at each state; points where a logarithm is undefined carry an error.
pub fn lyapunov_trace(states: &[EpidemicState], functional: &LyapunovFunctional) -> Vec<Result<f64>> {
    states.iter().map(|s| functional.evaluate(s)).collect()
}

/// Per class: whether both `I_k(t)` and `S_k(t)` stay above `epsilon` over
/// the trailing `window` of the series.
pub fn persistence_check(series: &ObservableSeries, epsilon: f64, window: f64) -> Result<Vec<bool>> {
    let (Some(first), Some(last)) = (series.times.first(), series.times.last()) else {
        return Err(Error::invalid("window", "series is empty"));
    };
    if !(window >= 0.0) || window > last - first {
        return Err(Error::invalid(
            "window",
            format!("{window} exceeds the series span {}", last - first),
        ));
    }
    let start = last - window;
    let n = series.prevalence_by_degree[0].len();
    let mut ok = vec![true; n];
    for (m, t) in series.times.iter().enumerate() {
        if *t < start - 1e-12 {
            continue;
        }
        let rows = series.prevalence_by_degree[m]
            .iter()
            .zip(&series.susceptible_by_degree[m]);
        for (flag, (i, s)) in ok.iter_mut().zip(rows) {
            if !(*i > epsilon && *s > epsilon) {
                *flag = false;
            }
        }
    }
    Ok(ok)
}
