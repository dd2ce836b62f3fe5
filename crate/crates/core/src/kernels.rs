//! Age-of-infection kernels, the survival function and their transforms.
//!
//! A [`KernelSet`] owns a uniform age grid `0 = tau_0 < ... < tau_J = tau_max`
//! together with the infection kernel `beta`, the recovery kernel `gamma`, the
//! natural death rate `mu` and the survival function
//! `H(tau) = exp(-mu tau - int_0^tau gamma)`.
//!
//! Integrals against the survival function use survival-weighted product
//! quadrature: a density `I(tau)` is written as `u(tau) H(tau)` with `u`
//! interpolated linearly between grid nodes, and `kernel * H * hat_j` is
//! integrated with a composite Gauss-Legendre rule on every cell. Along
//! characteristics `u` is the (smooth) boundary history, so this stays
//! accurate even when `gamma` varies sharply near `tau = 0`. When either
//! kernel is tabulated there is nothing to evaluate between nodes and every
//! rule degrades to the composite trapezoid on the grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-point Gauss-Legendre abscissae on [-1, 1] (positive half).
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
/// Gauss-Legendre panels per grid cell.
const PANELS_PER_CELL: usize = 4;

/// A non-negative rate depending on the age of infection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgeKernel {
    /// `k(tau) = value`
    Constant { value: f64 },
    /// `k(tau) = 1 / (1 + q tau)`
    RationalDecay { q: f64 },
    /// `k(tau) = tau (horizon - tau) / scale` on `[0, horizon]`, zero beyond.
    Parabolic { horizon: f64, scale: f64 },
    /// Samples on the age grid, one per node.
    Tabulated { values: Vec<f64> },
}

impl AgeKernel {
    pub fn is_tabulated(&self) -> bool {
        matches!(self, AgeKernel::Tabulated { .. })
    }

    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            AgeKernel::Constant { value } => Some(value),
            _ => None,
        }
    }

    /// Pointwise value; `None` for tabulated kernels.
    pub fn eval(&self, tau: f64) -> Option<f64> {
        match *self {
            AgeKernel::Constant { value } => Some(value),
            AgeKernel::RationalDecay { q } => Some(1.0 / (1.0 + q * tau)),
            AgeKernel::Parabolic { horizon, scale } => {
                if (0.0..=horizon).contains(&tau) {
                    Some(tau * (horizon - tau) / scale)
                } else {
                    Some(0.0)
                }
            }
            AgeKernel::Tabulated { .. } => None,
        }
    }

    /// `int_0^tau k`, in closed form; `None` for tabulated kernels.
    pub fn antiderivative(&self, tau: f64) -> Option<f64> {
        match *self {
            AgeKernel::Constant { value } => Some(value * tau),
            AgeKernel::RationalDecay { q } => Some((q * tau).ln_1p() / q),
            AgeKernel::Parabolic { horizon, scale } => {
                let t = tau.min(horizon);
                Some((horizon * t * t / 2.0 - t * t * t / 3.0) / scale)
            }
            AgeKernel::Tabulated { .. } => None,
        }
    }

    /// Ages where the kernel has a kink.
    fn breakpoint(&self) -> Option<f64> {
        match *self {
            AgeKernel::Parabolic { horizon, .. } => Some(horizon),
            _ => None,
        }
    }

    fn validate(&self, which: &'static str, grid: &AgeGrid) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("{which}: must be finite and > 0, got {v}"),
                ))
            }
        };
        match self {
            AgeKernel::Constant { value } => {
                if value.is_finite() && *value >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "value",
                        format!("{which}: must be finite and >= 0, got {value}"),
                    ))
                }
            }
            AgeKernel::RationalDecay { q } => positive("q", *q),
            AgeKernel::Parabolic { horizon, scale } => {
                positive("horizon", *horizon)?;
                positive("scale", *scale)
            }
            AgeKernel::Tabulated { values } => {
                if values.len() != grid.len() {
                    return Err(Error::invalid(
                        "values",
                        format!(
                            "{which}: {} samples for an age grid of {} nodes",
                            values.len(),
                            grid.len()
                        ),
                    ));
                }
                match values.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    Some(bad) => Err(Error::invalid(
                        "values",
                        format!("{which}: samples must be finite and >= 0, found {bad}"),
                    )),
                    None => Ok(()),
                }
            }
        }
    }

    /// Parse a two-column `(tau, value)` CSV whose ages coincide with `grid`.
    ///
    /// Blank lines, `#` comments and a non-numeric header line are skipped.
    pub fn tabulated_from_csv(text: &str, grid: &AgeGrid) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::invalid(
                    "csv",
                    format!("line {}: expected two columns", lineno + 1),
                ));
            };
            let (Ok(tau), Ok(value)) = (a.parse::<f64>(), b.parse::<f64>()) else {
                if values.is_empty() && a.parse::<f64>().is_err() {
                    continue; // header
                }
                return Err(Error::invalid("csv", format!("line {}: non-numeric entry", lineno + 1)));
            };
            let j = values.len();
            if j >= grid.len() || (tau - grid.tau(j)).abs() > 1e-9 * grid.tau_max().max(1.0) {
                return Err(Error::invalid(
                    "csv",
                    format!("line {}: age {tau} does not match grid node {j}", lineno + 1),
                ));
            }
            values.push(value);
        }
        let kernel = AgeKernel::Tabulated { values };
        kernel.validate("tabulated", grid)?;
        Ok(kernel)
    }

    pub fn tabulated_from_csv_file(path: &Path, grid: &AgeGrid) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::invalid("csv", format!("{}: {e}", path.display())))?;
        Self::tabulated_from_csv(&text, grid)
    }
}

/// Uniform age grid with `len` nodes spaced `dtau` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgeGrid {
    dtau: f64,
    len: usize,
}

impl AgeGrid {
    pub fn new(tau_max: f64, dtau: f64) -> Result<Self> {
        if !dtau.is_finite() || dtau <= 0.0 {
            return Err(Error::invalid("dtau", format!("must be finite and > 0, got {dtau}")));
        }
        if !tau_max.is_finite() || tau_max < dtau {
            return Err(Error::invalid("tau_max", format!("must be >= dtau, got {tau_max}")));
        }
        let cells = (tau_max / dtau).round();
        if (cells * dtau - tau_max).abs() > 1e-9 * tau_max {
            return Err(Error::invalid(
                "tau_max",
                format!("{tau_max} is not an integer multiple of dtau = {dtau}"),
            ));
        }
        Ok(Self {
            dtau,
            len: cells as usize + 1,
        })
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    /// Number of nodes (cells + 1).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn tau(&self, j: usize) -> f64 {
        j as f64 * self.dtau
    }

    pub fn tau_max(&self) -> f64 {
        self.tau(self.len - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|j| self.tau(j))
    }

    /// Composite trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.dtau; self.len];
        w[0] = 0.5 * self.dtau;
        w[self.len - 1] = 0.5 * self.dtau;
        w
    }

    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len);
        let inner: f64 = values[1..self.len - 1].iter().sum();
        self.dtau * (inner + 0.5 * (values[0] + values[self.len - 1]))
    }
}

/// Quadrature point inside the age domain, with the kernels and survival
/// sampled there and the hat-function split to its two neighbouring nodes.
#[derive(Debug, Clone, Copy)]
struct FinePoint {
    tau: f64,
    weight: f64,
    left: usize,
    /// Share of the weight assigned to node `left + 1`.
    frac: f64,
    beta: f64,
    gamma: f64,
    survival: f64,
}

/// Kernels, survival function and quadrature on a shared age grid.
#[derive(Debug, Clone)]
pub struct KernelSet {
    beta_kernel: AgeKernel,
    gamma_kernel: AgeKernel,
    mu: f64,
    grid: AgeGrid,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    cumulative_gamma: Vec<f64>,
    log_survival: Vec<f64>,
    survival: Vec<f64>,
    fine: Option<Vec<FinePoint>>,
    beta_weights: Vec<f64>,
    gamma_weights: Vec<f64>,
    mass_weights: Vec<f64>,
}

/// Which kernel a density is integrated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Against {
    Beta,
    Gamma,
    /// Plain age integral (total mass).
    Unit,
}

impl KernelSet {
    pub fn new(beta: AgeKernel, gamma: AgeKernel, mu: f64, tau_max: f64, dtau: f64) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::invalid("mu", format!("must be finite and > 0, got {mu}")));
        }
        let grid = AgeGrid::new(tau_max, dtau)?;
        beta.validate("beta", &grid)?;
        gamma.validate("gamma", &grid)?;

        let sample = |k: &AgeKernel| -> Vec<f64> {
            match k {
                AgeKernel::Tabulated { values } => values.clone(),
                _ => grid.nodes().map(|t| k.eval(t).unwrap()).collect(),
            }
        };
        let beta_nodes = sample(&beta);
        let gamma_nodes = sample(&gamma);

        let cumulative_gamma: Vec<f64> = match &gamma {
            AgeKernel::Tabulated { values } => {
                let mut acc = Vec::with_capacity(grid.len());
                acc.push(0.0);
                for j in 1..grid.len() {
                    acc.push(acc[j - 1] + 0.5 * dtau * (values[j - 1] + values[j]));
                }
                acc
            }
            analytic => grid.nodes().map(|t| analytic.antiderivative(t).unwrap()).collect(),
        };
        let log_survival: Vec<f64> = grid.nodes().zip(&cumulative_gamma).map(|(t, g)| -mu * t - g).collect();
        let survival: Vec<f64> = log_survival.iter().map(|l| l.exp()).collect();
        if !(survival[grid.len() - 1] > 0.0) {
            return Err(Error::invalid(
                "tau_max",
                "survival underflows to zero before tau_max; shorten the age domain",
            ));
        }

        let fine = if beta.is_tabulated() || gamma.is_tabulated() {
            None
        } else {
            Some(fine_points(&beta, &gamma, mu, &grid))
        };

        let mut ks = Self {
            beta_kernel: beta,
            gamma_kernel: gamma,
            mu,
            grid,
            beta: beta_nodes,
            gamma: gamma_nodes,
            cumulative_gamma,
            log_survival,
            survival,
            fine,
            beta_weights: Vec::new(),
            gamma_weights: Vec::new(),
            mass_weights: Vec::new(),
        };
        ks.beta_weights = ks.density_weights(Against::Beta);
        ks.gamma_weights = ks.density_weights(Against::Gamma);
        ks.mass_weights = ks.density_weights(Against::Unit);
        Ok(ks)
    }

    /// Weights `a_j` such that `int kernel(tau) I(tau) dtau ~ sum_j a_j I_j`.
    fn density_weights(&self, against: Against) -> Vec<f64> {
        match &self.fine {
            Some(points) => {
                let mut w = vec![0.0; self.grid.len()];
                for p in points {
                    let v = p.weight * p.survival * pick(against, p.beta, p.gamma);
                    w[p.left] += v * (1.0 - p.frac);
                    w[p.left + 1] += v * p.frac;
                }
                w.iter().zip(&self.survival).map(|(w, h)| w / h).collect()
            }
            None => self
                .grid
                .trapezoid_weights()
                .into_iter()
                .enumerate()
                .map(|(j, w)| w * pick(against, self.beta[j], self.gamma[j]))
                .collect(),
        }
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn beta_kernel(&self) -> &AgeKernel {
        &self.beta_kernel
    }

    pub fn gamma_kernel(&self) -> &AgeKernel {
        &self.gamma_kernel
    }

    /// `beta(tau_j)`
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `gamma(tau_j)`
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `H(tau_j)`
    pub fn survival(&self) -> &[f64] {
        &self.survival
    }

    /// `ln H(tau_j)`
    pub fn log_survival(&self) -> &[f64] {
        &self.log_survival
    }

    /// `int_0^{tau_j} gamma`
    pub fn cumulative_gamma(&self) -> &[f64] {
        &self.cumulative_gamma
    }

    /// Whether transforms use sub-cell quadrature (both kernels analytic).
    pub fn uses_fine_quadrature(&self) -> bool {
        self.fine.is_some()
    }

    /// Node weights for integrating a density sampled on the grid.
    pub fn weights(&self, against: Against) -> &[f64] {
        match against {
            Against::Beta => &self.beta_weights,
            Against::Gamma => &self.gamma_weights,
            Against::Unit => &self.mass_weights,
        }
    }

    /// `int_0^tau_max kernel(tau) I(tau) dtau` for a density sampled on the grid.
    pub fn integrate(&self, against: Against, density: &[f64]) -> f64 {
        self.weights(against).iter().zip(density).map(|(w, i)| w * i).sum()
    }

    fn transform(&self, against: Against, lambda: f64) -> f64 {
        match &self.fine {
            Some(points) => points
                .iter()
                .map(|p| p.weight * pick(against, p.beta, p.gamma) * p.survival * (-lambda * p.tau).exp())
                .sum(),
            None => {
                let values: Vec<f64> = (0..self.grid.len())
                    .map(|j| {
                        pick(against, self.beta[j], self.gamma[j])
                            * (self.log_survival[j] - lambda * self.grid.tau(j)).exp()
                    })
                    .collect();
                self.grid.trapezoid(&values)
            }
        }
    }

    /// `K1(lambda) = int beta(tau) e^{-lambda tau} H(tau) dtau` over `[0, tau_max]`.
    pub fn k1(&self, lambda: f64) -> f64 {
        self.transform(Against::Beta, lambda)
    }

    /// `K2(lambda) = int gamma(tau) e^{-lambda tau} H(tau) dtau` over `[0, tau_max]`.
    pub fn k2(&self, lambda: f64) -> f64 {
        self.transform(Against::Gamma, lambda)
    }

    /// `int_0^tau_max H`
    pub fn survival_integral(&self) -> f64 {
        self.transform(Against::Unit, 0.0)
    }

    /// `pi(tau_j) = int_{tau_j}^{tau_max} beta(xi) e^{-(mu + gamma)(xi - tau_j)} dxi`
    /// for a constant recovery rate `gamma_const`, accumulated backwards from
    /// `pi(tau_max) = 0`.
    pub fn pi_kernel(&self, gamma_const: f64) -> Result<Vec<f64>> {
        match self.gamma_kernel.constant_value() {
            Some(g) if (g - gamma_const).abs() <= 1e-12 * g.abs().max(1.0) => {}
            Some(g) => {
                return Err(Error::InvalidUsage(format!(
                    "pi kernel requested for gamma = {gamma_const} but the kernel set has gamma = {g}"
                )))
            }
            None => {
                return Err(Error::InvalidUsage(
                    "pi kernel is only defined for a constant recovery rate".into(),
                ))
            }
        }
        let rate = self.mu + gamma_const;
        let n = self.grid.len();
        let dtau = self.grid.dtau();
        let decay = (-rate * dtau).exp();

        // per-cell integral of beta(xi) e^{-rate (xi - tau_j)} over [tau_j, tau_{j+1}]
        let mut cell = vec![0.0; n - 1];
        match &self.fine {
            Some(points) => {
                for p in points {
                    let j = p.left;
                    cell[j] += p.weight * p.beta * (-rate * (p.tau - self.grid.tau(j))).exp();
                }
            }
            None => {
                for (j, c) in cell.iter_mut().enumerate() {
                    *c = 0.5 * dtau * (self.beta[j] + self.beta[j + 1] * decay);
                }
            }
        }
        let mut pi = vec![0.0; n];
        for j in (0..n - 1).rev() {
            pi[j] = decay * pi[j + 1] + cell[j];
        }
        Ok(pi)
    }
}

fn pick(against: Against, beta: f64, gamma: f64) -> f64 {
    match against {
        Against::Beta => beta,
        Against::Gamma => gamma,
        Against::Unit => 1.0,
    }
}

fn fine_points(beta: &AgeKernel, gamma: &AgeKernel, mu: f64, grid: &AgeGrid) -> Vec<FinePoint> {
    let dtau = grid.dtau();
    let cells = grid.len() - 1;
    let breaks: Vec<f64> = [beta.breakpoint(), gamma.breakpoint()].into_iter().flatten().collect();
    let mut points = Vec::with_capacity(cells * PANELS_PER_CELL * 8);
    for j in 0..cells {
        let a = grid.tau(j);
        let b = grid.tau(j + 1);
        let mut edges = vec![a];
        for p in 0..PANELS_PER_CELL {
            let edge = a + dtau * (p + 1) as f64 / PANELS_PER_CELL as f64;
            for &k in &breaks {
                if k > *edges.last().unwrap() && k < edge {
                    edges.push(k);
                }
            }
            edges.push(if p + 1 == PANELS_PER_CELL { b } else { edge });
        }
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
                for tau in [mid - half * x, mid + half * x] {
                    points.push(FinePoint {
                        tau,
                        weight: wt * half,
                        left: j,
                        frac: (tau - a) / dtau,
                        beta: beta.eval(tau).unwrap(),
                        gamma: gamma.eval(tau).unwrap(),
                        survival: (-mu * tau - gamma.antiderivative(tau).unwrap()).exp(),
                    });
                }
            }
        }
    }
    points
}
