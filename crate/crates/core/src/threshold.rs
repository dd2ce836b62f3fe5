//! Basic reproduction number, equilibria and the characteristic equation of
//! the disease-free state.

use serde::Serialize;

use crate::demography::DemographicEquilibrium;
use crate::error::{Error, Result};
use crate::kernels::{Against, KernelSet};
use crate::network::{DegreeDistribution, InfectivityFunction};

/// Lower end of the bracket for the incidence aggregate `W`.
const W_FLOOR: f64 = 1e-12;

/// Susceptible densities at the disease-free equilibrium,
/// `S0_k = b k (1 - N*_k) Psi* / mu`.
pub fn disease_free_equilibrium(dem: &DemographicEquilibrium, dist: &DegreeDistribution) -> Result<Vec<f64>> {
    if !dem.viable {
        return Err(Error::InvalidUsage(
            "disease-free equilibrium requested for an extinct population (b <= mu)".into(),
        ));
    }
    if dem.n_star.len() != dist.max_degree() {
        return Err(Error::InvalidUsage(
            "demographic equilibrium and network disagree on n".into(),
        ));
    }
    Ok(recruitment(dem).into_iter().map(|r| r / dem.mu).collect())
}

/// Recruitment into the susceptible class at equilibrium, `b k (1 - N*_k) Psi*`.
pub fn recruitment(dem: &DemographicEquilibrium) -> Vec<f64> {
    dem.n_star
        .iter()
        .enumerate()
        .map(|(i, n)| dem.b * (i + 1) as f64 * (1.0 - n) * dem.psi_star)
        .collect()
}

/// `sum_i i phi(i) p(i) S0_i / <k>`
fn susceptible_reach(dist: &DegreeDistribution, phi: &InfectivityFunction, s0: &[f64]) -> f64 {
    dist.moment(|i| i as f64 * phi.eval(i) * s0[i - 1]) / dist.mean_degree()
}

/// `R0 = K1(0)/<k> sum_i i phi(i) p(i) S0_i`.
pub fn basic_reproduction_number(
    dist: &DegreeDistribution,
    phi: &InfectivityFunction,
    ks: &KernelSet,
    s0: &[f64],
) -> f64 {
    ks.k1(0.0) * susceptible_reach(dist, phi, s0)
}

/// `G(lambda) = K1(lambda)/<k> sum_i i phi(i) p(i) S0_i`; real roots of
/// `G(lambda) = 1` are eigenvalues of the linearization at the disease-free state.
pub fn characteristic_g(
    dist: &DegreeDistribution,
    phi: &InfectivityFunction,
    ks: &KernelSet,
    s0: &[f64],
    lambda: f64,
) -> f64 {
    ks.k1(lambda) * susceptible_reach(dist, phi, s0)
}

/// The unique real `lambda* > 0` with `G(lambda*) = 1`, present iff `G(0) > 1`.
pub fn find_characteristic_root(
    dist: &DegreeDistribution,
    phi: &InfectivityFunction,
    ks: &KernelSet,
    s0: &[f64],
) -> Option<f64> {
    let reach = susceptible_reach(dist, phi, s0);
    let g = |l: f64| ks.k1(l) * reach;
    if !(g(0.0) > 1.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while g(hi) >= 1.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Positive (endemic) equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndemicEquilibrium {
    pub s_star: Vec<f64>,
    /// Boundary incidence `Z*_k = I*_k(0)`.
    pub z_star: Vec<f64>,
    /// `I*_k(tau_j) = Z*_k H(tau_j)`, one row per degree class.
    pub i_star_profile: Vec<Vec<f64>>,
    /// `int I*_k(tau) dtau`
    pub prevalence: Vec<f64>,
    /// `W = sum_i phi(i) p(i) Z*_i`
    pub w_star: f64,
}

/// Relative residuals of the two equilibrium relations (susceptible and
/// incidence), maximised over degree classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumResiduals {
    pub susceptible: f64,
    pub incidence: f64,
}

/// Solve for the endemic equilibrium; `None` when `R0 <= 1`.
///
/// Substituting the susceptible relation into the incidence relation leaves a
/// single unknown, the aggregate `W = sum_i phi(i) p(i) Z*_i`:
/// `Z*_k(W) = A_k / (1 - K2(0) + mu <k> / (k K1(0) W))` with
/// `A_k = b k (1 - N*_k) Psi*`, and `W` is found by bisection on
/// `sum_k phi(k) p(k) Z*_k(W) - W = 0`.
pub fn endemic_equilibrium(
    dist: &DegreeDistribution,
    phi: &InfectivityFunction,
    ks: &KernelSet,
    dem: &DemographicEquilibrium,
) -> Result<Option<EndemicEquilibrium>> {
    let s0 = disease_free_equilibrium(dem, dist)?;
    if basic_reproduction_number(dist, phi, ks, &s0) <= 1.0 {
        return Ok(None);
    }
    let k1 = ks.k1(0.0);
    let k2 = ks.k2(0.0);
    let mean = dist.mean_degree();
    let mu = dem.mu;
    let a = recruitment(dem);
    let phis = phi.values(dist.max_degree());

    let z_of = |w: f64| -> Vec<f64> {
        a.iter()
            .enumerate()
            .map(|(i, ak)| ak / (1.0 - k2 + mu * mean / ((i + 1) as f64 * k1 * w)))
            .collect()
    };
    let aggregate = |z: &[f64]| dist.moment(|i| phis[i - 1] * z[i - 1]);
    let h = |w: f64| aggregate(&z_of(w)) - w;

    let lo0 = W_FLOOR;
    let hi0 = dist.moment(|i| phis[i - 1] * a[i - 1]) / (1.0 - k2);
    let (h_lo, h_hi) = (h(lo0), h(hi0));
    if !(h_lo > 0.0 && h_hi < 0.0) {
        let curve: Vec<String> = (0..=8)
            .map(|m| {
                let w = lo0 + (hi0 - lo0) * m as f64 / 8.0;
                format!("({w:.3e}, {:.3e})", h(w))
            })
            .collect();
        return Err(Error::NumericalFailure(format!(
            "endemic aggregate W not bracketed on [{lo0:e}, {hi0:e}]; residual samples: {}",
            curve.join(", ")
        )));
    }
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    let z_star = z_of(w);
    let w_star = aggregate(&z_star);
    let s_star: Vec<f64> = z_star
        .iter()
        .enumerate()
        .map(|(i, z)| mean * z / ((i + 1) as f64 * k1 * w_star))
        .collect();
    let h_grid = ks.survival();
    let i_star_profile: Vec<Vec<f64>> = z_star.iter().map(|z| h_grid.iter().map(|h| z * h).collect()).collect();
    let prevalence = i_star_profile
        .iter()
        .map(|row| ks.integrate(Against::Unit, row))
        .collect();
    Ok(Some(EndemicEquilibrium {
        s_star,
        z_star,
        i_star_profile,
        prevalence,
        w_star,
    }))
}

/// Check the returned equilibrium against both defining relations:
/// `S*_k = <k> Z*_k / (k K1(0) sum phi p Z*)` and
/// `Z*_k = (b k (1 - N*_k) Psi* - mu S*_k) / (1 - K2(0))`.
pub fn endemic_residuals(
    dist: &DegreeDistribution,
    phi: &InfectivityFunction,
    ks: &KernelSet,
    dem: &DemographicEquilibrium,
    eq: &EndemicEquilibrium,
) -> EquilibriumResiduals {
    let k1 = ks.k1(0.0);
    let k2 = ks.k2(0.0);
    let w = dist.moment(|i| phi.eval(i) * eq.z_star[i - 1]);
    let a = recruitment(dem);
    let mut res = EquilibriumResiduals {
        susceptible: 0.0,
        incidence: 0.0,
    };
    for (i, (s, z)) in eq.s_star.iter().zip(&eq.z_star).enumerate() {
        let k = (i + 1) as f64;
        let s_rel = dist.mean_degree() * z / (k * k1 * w);
        let z_rel = (a[i] - dem.mu * s) / (1.0 - k2);
        res.susceptible = res.susceptible.max(((s - s_rel) / s).abs());
        res.incidence = res.incidence.max(((z - z_rel) / z).abs());
    }
    res
}

/// Local stability of the disease-free equilibrium read off the real
/// characteristic root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    /// No real root with positive part: `G(0) < 1`.
    Stable,
    /// A positive real root exists: `G(0) > 1`.
    Unstable,
    /// `G(0) = 1` to machine precision.
    Critical,
}

/// Everything the threshold analysis produces for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub r0: f64,
    pub psi_star: f64,
    pub n_star: Vec<f64>,
    pub s0: Vec<f64>,
    pub k1_0: f64,
    pub k2_0: f64,
    pub endemic: Option<EndemicEquilibrium>,
    pub residuals: Option<EquilibriumResiduals>,
    pub characteristic_root: Option<f64>,
    pub disease_free_stability: Stability,
}

pub fn equilibrium_report(
    dist: &DegreeDistribution,
    phi: &InfectivityFunction,
    ks: &KernelSet,
    dem: &DemographicEquilibrium,
) -> Result<EquilibriumReport> {
    let s0 = disease_free_equilibrium(dem, dist)?;
    let r0 = basic_reproduction_number(dist, phi, ks, &s0);
    let endemic = endemic_equilibrium(dist, phi, ks, dem)?;
    let residuals = endemic.as_ref().map(|eq| endemic_residuals(dist, phi, ks, dem, eq));
    let characteristic_root = find_characteristic_root(dist, phi, ks, &s0);
    let disease_free_stability = if r0 > 1.0 {
        Stability::Unstable
    } else if r0 < 1.0 {
        Stability::Stable
    } else {
        Stability::Critical
    };
    Ok(EquilibriumReport {
        r0,
        psi_star: dem.psi_star,
        n_star: dem.n_star.clone(),
        s0,
        k1_0: ks.k1(0.0),
        k2_0: ks.k2(0.0),
        endemic,
        residuals,
        characteristic_root,
        disease_free_stability,
    })
}
