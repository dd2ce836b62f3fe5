//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use netage::kernels::{AgeGrid, AgeKernel, KernelSet};
use netage::network::{DegreeDistribution, InfectivityFunction, NetworkSpec};
use netage::simulator::{InitialData, Mode, SimulationConfig, TransportDecay};

use crate::CliError;

/// Kernel entry as written in a config file; tabulated kernels may point at
/// a two-column CSV instead of listing values inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelEntry {
    Constant {
        value: f64,
    },
    RationalDecay {
        q: f64,
    },
    Parabolic {
        horizon: f64,
        scale: f64,
    },
    Tabulated {
        #[serde(default)]
        values: Option<Vec<f64>>,
        #[serde(default)]
        file: Option<PathBuf>,
    },
}

impl KernelEntry {
    fn resolve(&self, which: &str, grid: &AgeGrid, base: &Path) -> Result<AgeKernel, CliError> {
        Ok(match self {
            KernelEntry::Constant { value } => AgeKernel::Constant { value: *value },
            KernelEntry::RationalDecay { q } => AgeKernel::RationalDecay { q: *q },
            KernelEntry::Parabolic { horizon, scale } => AgeKernel::Parabolic {
                horizon: *horizon,
                scale: *scale,
            },
            KernelEntry::Tabulated { values, file } => match (values, file) {
                (Some(v), None) => AgeKernel::Tabulated { values: v.clone() },
                (None, Some(f)) => AgeKernel::tabulated_from_csv_file(&base.join(f), grid)?,
                _ => {
                    return Err(CliError::Config(format!(
                        "kernels.{which}: tabulated kernel needs exactly one of `values` or `file`"
                    )))
                }
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub beta: KernelEntry,
    pub gamma: KernelEntry,
    pub mu: f64,
    pub tau_max: f64,
    pub dtau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemographyBlock {
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default = "one")]
    pub output_stride: usize,
    #[serde(default)]
    pub decay: TransportDecay,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Gnuplot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
    /// Write age-profile snapshots every this many recorded outputs.
    #[serde(default)]
    pub profile_stride: Option<usize>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Gnuplot]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: None,
            formats: all_formats(),
            profile_stride: None,
        }
    }
}

impl OutputBlock {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSpec,
    pub infectivity: InfectivityFunction,
    pub kernels: KernelBlock,
    pub demography: DemographyBlock,
    #[serde(default)]
    pub simulation: Option<SimulationBlock>,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
}

/// Parameters a sweep may vary.
pub const SWEEP_PARAMETERS: &[&str] = &[
    "demography.b",
    "kernels.mu",
    "kernels.beta.scale",
    "kernels.beta.value",
    "kernels.gamma.q",
    "kernels.gamma.value",
    "infectivity.omega",
    "infectivity.a",
    "infectivity.nu",
    "infectivity.h",
    "network.r",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Physical rates non-negative and the CFL restriction `dt <= dtau`.
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |what: &str, v: f64| CliError::Config(format!("{what} must be finite and >= 0, got {v}"));
        for (what, v) in [
            ("kernels.mu", self.kernels.mu),
            ("kernels.tau_max", self.kernels.tau_max),
            ("kernels.dtau", self.kernels.dtau),
            ("demography.b", self.demography.b),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(what, v));
            }
        }
        if let Some(sim) = &self.simulation {
            if !(sim.dt.is_finite() && sim.dt > 0.0) {
                return Err(CliError::Config(format!("simulation.dt must be > 0, got {}", sim.dt)));
            }
            if sim.dt > self.kernels.dtau * (1.0 + 1e-12) {
                return Err(CliError::Config(format!(
                    "CFL violated: simulation.dt = {} exceeds kernels.dtau = {}",
                    sim.dt, self.kernels.dtau
                )));
            }
        }
        if let Some(sweep) = &self.sweep {
            check_sweep_parameter(&sweep.parameter)?;
        }
        Ok(())
    }

    /// Copy with one named parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self, CliError> {
        check_sweep_parameter(name)?;
        let mut cfg = self.clone();
        let mismatch = || CliError::Usage(format!("sweep parameter `{name}` does not apply to this config"));
        match name {
            "demography.b" => cfg.demography.b = value,
            "kernels.mu" => cfg.kernels.mu = value,
            "kernels.beta.scale" => match &mut cfg.kernels.beta {
                KernelEntry::Parabolic { scale, .. } => *scale = value,
                _ => return Err(mismatch()),
            },
            "kernels.beta.value" => match &mut cfg.kernels.beta {
                KernelEntry::Constant { value: v } => *v = value,
                _ => return Err(mismatch()),
            },
            "kernels.gamma.q" => match &mut cfg.kernels.gamma {
                KernelEntry::RationalDecay { q } => *q = value,
                _ => return Err(mismatch()),
            },
            "kernels.gamma.value" => match &mut cfg.kernels.gamma {
                KernelEntry::Constant { value: v } => *v = value,
                _ => return Err(mismatch()),
            },
            "infectivity.omega" | "infectivity.a" | "infectivity.nu" => match &mut cfg.infectivity {
                InfectivityFunction::Saturated { omega, a, nu } => match name {
                    "infectivity.omega" => *omega = value,
                    "infectivity.a" => *a = value,
                    _ => *nu = value,
                },
                _ => return Err(mismatch()),
            },
            "infectivity.h" => match &mut cfg.infectivity {
                InfectivityFunction::Constant { h } => *h = value,
                _ => return Err(mismatch()),
            },
            "network.r" => match &mut cfg.network {
                NetworkSpec::PowerLaw { r, .. } => *r = value,
                _ => return Err(mismatch()),
            },
            _ => unreachable!("checked above"),
        }
        Ok(cfg)
    }
}

fn check_sweep_parameter(name: &str) -> Result<(), CliError> {
    if SWEEP_PARAMETERS.contains(&name) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "unknown sweep parameter `{name}`; expected one of {}",
            SWEEP_PARAMETERS.join(", ")
        )))
    }
}

/// A parsed config together with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Directory relative paths in the config are resolved against.
    pub base: PathBuf,
    /// Hex SHA-256 of the config file bytes.
    pub hash: String,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Config(format!("{}: not valid UTF-8", path.display())))?;
        let config = RunConfig::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(Self {
            config,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            hash: hex(&Sha256::digest(&bytes)),
        })
    }

    pub fn with_config(&self, config: RunConfig) -> Self {
        Self {
            config,
            base: self.base.clone(),
            hash: self.hash.clone(),
        }
    }

    pub fn distribution(&self) -> Result<DegreeDistribution, CliError> {
        Ok(self.config.network.build()?)
    }

    pub fn kernel_set(&self) -> Result<KernelSet, CliError> {
        let k = &self.config.kernels;
        let grid = AgeGrid::new(k.tau_max, k.dtau)?;
        let beta = k.beta.resolve("beta", &grid, &self.base)?;
        let gamma = k.gamma.resolve("gamma", &grid, &self.base)?;
        Ok(KernelSet::new(beta, gamma, k.mu, k.tau_max, k.dtau)?)
    }

    pub fn simulation(&self) -> Result<SimulationConfig, CliError> {
        let block = self
            .config
            .simulation
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [simulation] section".into()))?;
        let mut cfg = SimulationConfig::new(
            self.distribution()?,
            self.config.infectivity,
            self.kernel_set()?,
            self.config.demography.b,
            block.dt,
            block.t_end,
        );
        cfg.mode = block.mode;
        cfg.initial = block.initial.clone();
        cfg.output_stride = block.output_stride;
        cfg.decay = block.decay;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
