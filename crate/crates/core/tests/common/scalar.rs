//! Minimal single-class age-of-infection SIS integrator.
//!
//! Written without the library: one degree class with `k = 1`, `p(1) = 1`
//! and infectivity `phi`. Survival and quadrature weights are built in closed
//! form (constant rates) or by trapezoid rules (tabulated rates).

#![allow(dead_code)]

pub struct ScalarModel {
    pub dtau: f64,
    pub mu: f64,
    pub phi: f64,
    pub b: f64,
    pub survival: Vec<f64>,
    pub w_beta: Vec<f64>,
    pub w_gamma: Vec<f64>,
    pub w_mass: Vec<f64>,
}

pub struct ScalarRun {
    pub times: Vec<f64>,
    pub susceptible: Vec<f64>,
    pub prevalence: Vec<f64>,
    pub incidence: Vec<f64>,
    pub profile: Vec<f64>,
}

impl ScalarModel {
    /// Constant `beta` and `gamma`: `H = exp(-(mu + gamma) tau)` and weights
    /// are exact integrals of `H` against piecewise-linear hats, divided by
    /// `H` at the node.
    pub fn constant(beta: f64, gamma: f64, mu: f64, phi: f64, b: f64, tau_max: f64, dtau: f64) -> Self {
        let n = (tau_max / dtau).round() as usize + 1;
        let r = mu + gamma;
        let x = r * dtau;
        let left = (x.exp_m1() - x) / (dtau * r * r);
        let right = (x - 1.0 + (-x).exp()) / (dtau * r * r);
        let w_mass: Vec<f64> = (0..n)
            .map(|j| {
                let mut w = 0.0;
                if j > 0 {
                    w += left;
                }
                if j + 1 < n {
                    w += right;
                }
                w
            })
            .collect();
        Self {
            dtau,
            mu,
            phi,
            b,
            survival: (0..n).map(|j| (-r * j as f64 * dtau).exp()).collect(),
            w_beta: w_mass.iter().map(|w| beta * w).collect(),
            w_gamma: w_mass.iter().map(|w| gamma * w).collect(),
            w_mass,
        }
    }

    /// Tabulated rates at the nodes; trapezoid rules throughout.
    pub fn tabulated(beta: &[f64], gamma: &[f64], mu: f64, phi: f64, b: f64, dtau: f64) -> Self {
        let n = beta.len();
        let mut cum = 0.0;
        let mut survival = Vec::with_capacity(n);
        for j in 0..n {
            if j > 0 {
                cum += 0.5 * dtau * (gamma[j - 1] + gamma[j]);
            }
            survival.push((-mu * j as f64 * dtau - cum).exp());
        }
        let trap = |j: usize| if j == 0 || j == n - 1 { 0.5 * dtau } else { dtau };
        Self {
            dtau,
            mu,
            phi,
            b,
            survival,
            w_beta: (0..n).map(|j| trap(j) * beta[j]).collect(),
            w_gamma: (0..n).map(|j| trap(j) * gamma[j]).collect(),
            w_mass: (0..n).map(trap).collect(),
        }
    }

    fn dot(w: &[f64], v: &[f64]) -> f64 {
        w.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// `limiting`: occupancy fixed at `1 - mu/b` and the initial data scaled
    /// onto it; otherwise the occupancy solves `N' = b (1 - N) N - mu N`.
    pub fn run(&self, s0: f64, i0: &[f64], dt: f64, steps: usize, limiting: bool) -> ScalarRun {
        let c = dt / self.dtau;
        let n_star = 1.0 - self.mu / self.b;
        let mut s = s0;
        let mut i = i0.to_vec();
        let mut occ = s + Self::dot(&self.w_mass, &i);
        if limiting {
            let scale = n_star / occ;
            s *= scale;
            i.iter_mut().for_each(|v| *v *= scale);
            occ = n_star;
        }
        let decay: Vec<f64> = (0..i.len())
            .map(|j| {
                if j == 0 {
                    return 1.0;
                }
                let rho = self.survival[j] / self.survival[j - 1];
                rho / (c + (1.0 - c) * rho)
            })
            .collect();
        let mut out = ScalarRun {
            times: vec![0.0],
            susceptible: vec![s],
            prevalence: vec![Self::dot(&self.w_mass, &i)],
            incidence: vec![i[0]],
            profile: Vec::new(),
        };
        for m in 1..=steps {
            let force = self.phi * Self::dot(&self.w_beta, &i);
            let back = Self::dot(&self.w_gamma, &i);
            for j in (1..i.len()).rev() {
                i[j] = decay[j] * (i[j] - c * (i[j] - i[j - 1]));
            }
            let f = |y: [f64; 2]| -> [f64; 2] {
                let n = if limiting { n_star } else { y[1] };
                let recruit = self.b * (1.0 - n) * n;
                [
                    recruit - self.mu * y[0] - y[0] * force + back,
                    if limiting { 0.0 } else { recruit - self.mu * y[1] },
                ]
            };
            let y = [s, occ];
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]]);
            let k3 = f([y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]]);
            let k4 = f([y[0] + dt * k3[0], y[1] + dt * k3[1]]);
            s += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            occ += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            i[0] = s * force;
            out.times.push(m as f64 * dt);
            out.susceptible.push(s);
            out.prevalence.push(Self::dot(&self.w_mass, &i));
            out.incidence.push(i[0]);
        }
        out.profile = i;
        out
    }
}

/// `exp(-(tau + 1.15)^2 / 2) / sqrt(2 pi)` at the nodes.
pub fn gaussian_start(n: usize, dtau: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let a = j as f64 * dtau + 1.15;
            (-a * a / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })
        .collect()
}

/// Largest relative difference, falling back to absolute below `floor`.
pub fn mismatch(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}
