//! Degree distributions and infectivity functions for uncorrelated networks.
//!
//! Degrees run over `1..=n`. All reductions over degree classes are summed in
//! ascending degree order so results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;
/// Explicit probability vectors are accepted if they sum to one within this
/// tolerance and are then renormalized exactly.
const EXPLICIT_SUM_TOL: f64 = 1e-9;

/// Degree law `p(k)` for `k = 1..=n`, with its first moment cached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeDistribution {
    probabilities: Vec<f64>,
    exponent: Option<f64>,
    mean_degree: f64,
}

impl DegreeDistribution {
    /// Truncated power law `p(k) = c k^{-r}` on `1..=n`.
    pub fn power_law(r: f64, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("n", "maximum degree must be at least 1"));
        }
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::invalid("r", format!("exponent must be finite and > 0, got {r}")));
        }
        let weights: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-r)).collect();
        let c = 1.0 / weights.iter().sum::<f64>();
        let probabilities = weights.into_iter().map(|w| c * w).collect();
        Self::build(probabilities, Some(r))
    }

    /// Distribution from an explicit vector `p(1), ..., p(n)`.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::invalid("probabilities", "vector must not be empty"));
        }
        if let Some(bad) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::invalid(
                "probabilities",
                format!("entries must be finite and non-negative, found {bad}"),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > EXPLICIT_SUM_TOL {
            return Err(Error::invalid(
                "probabilities",
                format!("entries must sum to 1, got {total}"),
            ));
        }
        let probabilities = probabilities.into_iter().map(|p| p / total).collect();
        Self::build(probabilities, None)
    }

    fn build(probabilities: Vec<f64>, exponent: Option<f64>) -> Result<Self> {
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NumericalFailure(format!(
                "degree distribution sums to {total} after normalization"
            )));
        }
        let mean_degree = probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum::<f64>();
        if mean_degree <= 0.0 {
            return Err(Error::invalid("probabilities", "mean degree must be positive"));
        }
        Ok(Self {
            probabilities,
            exponent,
            mean_degree,
        })
    }

    pub fn max_degree(&self) -> usize {
        self.probabilities.len()
    }

    /// Power-law exponent, if the distribution was built from one.
    pub fn exponent(&self) -> Option<f64> {
        self.exponent
    }

    /// `p(k)` indexed by `k - 1`.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `p(k)` for `1 <= k <= n`.
    ///
    /// # Panics
    /// If `k` is outside `1..=n`.
    pub fn p(&self, k: usize) -> f64 {
        self.probabilities[k - 1]
    }

    /// `<k> = sum_k k p(k)`.
    pub fn mean_degree(&self) -> f64 {
        self.mean_degree
    }

    /// Iterator over `(k, p(k))` in ascending degree order.
    pub fn classes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probabilities.iter().enumerate().map(|(i, &p)| (i + 1, p))
    }

    /// `<f(k)> = sum_k f(k) p(k)`, summed in ascending `k`.
    pub fn moment(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.classes().map(|(k, p)| f(k) * p).sum()
    }

    /// Probability that a link from any node reaches a node of degree `i`:
    /// `P(i|k) = i p(i) / <k>` on an uncorrelated network.
    pub fn conditional_degree_prob(&self, i: usize) -> Result<f64> {
        if i < 1 || i > self.max_degree() {
            return Err(Error::invalid(
                "i",
                format!("degree {i} outside 1..={}", self.max_degree()),
            ));
        }
        Ok(i as f64 * self.p(i) / self.mean_degree)
    }
}

/// Config-level description of a degree distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    PowerLaw { r: f64, n: usize },
    Explicit { probabilities: Vec<f64> },
}

impl NetworkSpec {
    pub fn build(&self) -> Result<DegreeDistribution> {
        match self {
            NetworkSpec::PowerLaw { r, n } => DegreeDistribution::power_law(*r, *n),
            NetworkSpec::Explicit { probabilities } => DegreeDistribution::from_probabilities(probabilities.clone()),
        }
    }
}

/// Infectivity `phi(k)`: the number of edges through which a degree-`k` node
/// can transmit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InfectivityFunction {
    /// `phi(k) = k`
    Linear {},
    /// `phi(k) = h`
    Constant { h: f64 },
    /// `phi(k) = omega k^a / (1 + nu k^a)`
    Saturated { omega: f64, a: f64, nu: f64 },
}

impl InfectivityFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InfectivityFunction::Linear {} => Ok(()),
            InfectivityFunction::Constant { h } => {
                if h.is_finite() && h > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("h", format!("must be finite and > 0, got {h}")))
                }
            }
            InfectivityFunction::Saturated { omega, a, nu } => {
                for (name, v) in [("omega", omega), ("a", a), ("nu", nu)] {
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, k: usize) -> f64 {
        let k = k as f64;
        match *self {
            InfectivityFunction::Linear {} => k,
            InfectivityFunction::Constant { h } => h,
            InfectivityFunction::Saturated { omega, a, nu } => {
                let ka = k.powf(a);
                omega * ka / (1.0 + nu * ka)
            }
        }
    }

    /// `phi(k)` for `k = 1..=n`.
    pub fn values(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|k| self.eval(k)).collect()
    }
}
