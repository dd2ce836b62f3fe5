//! Output files. Everything written here is a pure function of the config,
//! so repeated runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use netage::kernels::AgeGrid;
use netage::simulator::{EpidemicState, ObservableSeries};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance attached to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub program: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub mesh: Mesh,
    /// Free-form `key = value` lines (mode, scheme variants, sweep parameter).
    #[serde(skip_serializing_if = "Vec::is_empty", serialize_with = "as_map")]
    pub notes: Vec<(String, String)>,
}

fn as_map<S: serde::Serializer>(notes: &[(String, String)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(notes.iter().map(|(k, v)| (k, v)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Mesh {
    pub tau_max: f64,
    pub dtau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl Metadata {
    pub fn new(command: &str, config_sha256: &str, mesh: Mesh) -> Self {
        Self {
            program: "netage",
            version: VERSION,
            command: command.to_string(),
            config_sha256: config_sha256.to_string(),
            mesh,
            notes: Vec::new(),
        }
    }

    pub fn note(mut self, key: &str, value: impl ToString) -> Self {
        self.notes.push((key.to_string(), value.to_string()));
        self
    }

    /// `#`-prefixed header lines for CSV and plot scripts.
    pub fn comment_header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} {} {}", self.program, self.version, self.command);
        let _ = writeln!(s, "# config_sha256 = {}", self.config_sha256);
        let m = &self.mesh;
        let _ = write!(s, "# mesh: tau_max = {}, dtau = {}", m.tau_max, m.dtau);
        if let Some(dt) = m.dt {
            let _ = write!(s, ", dt = {dt}");
        }
        if let Some(t) = m.t_end {
            let _ = write!(s, ", t_end = {t}");
        }
        s.push('\n');
        for (k, v) in &self.notes {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s
    }
}

/// JSON document with the metadata under `meta`.
pub fn json_document<T: Serialize>(meta: &Metadata, body: &T) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        meta: &'a Metadata,
        #[serde(flatten)]
        body: &'a T,
    }
    let mut s = serde_json::to_string_pretty(&Doc { meta, body })
        .map_err(|e| CliError::Numerical(format!("cannot serialize output: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Long-format table `t,k,S,I,Z` (plus `N` in full mode).
pub fn series_csv(meta: &Metadata, series: &ObservableSeries) -> String {
    let mut s = meta.comment_header();
    let full = series.occupancy_by_degree.is_some();
    s.push_str(if full { "t,k,S,I,Z,N\n" } else { "t,k,S,I,Z\n" });
    for (m, t) in series.times.iter().enumerate() {
        let n = series.prevalence_by_degree[m].len();
        for k in 0..n {
            let _ = write!(
                s,
                "{t},{},{},{},{}",
                k + 1,
                series.susceptible_by_degree[m][k],
                series.prevalence_by_degree[m][k],
                series.incidence_by_degree[m][k]
            );
            if let Some(occ) = &series.occupancy_by_degree {
                let _ = write!(s, ",{}", occ[m][k]);
            }
            s.push('\n');
        }
    }
    s
}

/// Age profiles `t,tau,k,I`.
pub fn profiles_csv(meta: &Metadata, grid: &AgeGrid, snapshots: &[EpidemicState]) -> String {
    let mut s = meta.comment_header();
    s.push_str("t,tau,k,I\n");
    for state in snapshots {
        for (k, row) in state.infected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{v}", state.t, grid.tau(j), k + 1);
            }
        }
    }
    s
}

/// Degree classes highlighted in plots: up to four, evenly spaced, ending at `n`.
pub fn highlighted_degrees(n: usize) -> Vec<usize> {
    if n <= 4 {
        return (1..=n).collect();
    }
    let mut ks: Vec<usize> = (1..=4).map(|i| (i * n) / 4).collect();
    ks.dedup();
    ks
}

/// Gnuplot script drawing `I_k(t)` from a series CSV.
pub fn series_plot(meta: &Metadata, csv_name: &str, n: usize) -> String {
    let mut s = meta.comment_header();
    s.push_str("set datafile separator ','\n");
    s.push_str("set datafile commentschars '#'\n");
    s.push_str("set xlabel 't'\nset ylabel 'I_k(t)'\nset key top right\n");
    let png = csv_name.trim_end_matches(".csv");
    let _ = writeln!(s, "set terminal pngcairo size 900,600\nset output '{png}.png'");
    let curves: Vec<String> = highlighted_degrees(n)
        .iter()
        .map(|k| format!("'{csv_name}' using 1:($2 == {k} ? $4 : 1/0) with lines title 'k = {k}'"))
        .collect();
    let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
    s
}

/// Gnuplot script for a sweep table: `R0` against the swept parameter.
pub fn sweep_plot(meta: &Metadata, csv_name: &str, parameter: &str) -> String {
    let mut s = meta.comment_header();
    s.push_str("set datafile separator ','\n");
    s.push_str("set datafile commentschars '#'\n");
    let _ = writeln!(s, "set xlabel '{parameter}'\nset ylabel 'R0'");
    let png = csv_name.trim_end_matches(".csv");
    let _ = writeln!(s, "set terminal pngcairo size 900,600\nset output '{png}.png'");
    let _ = writeln!(s, "plot '{csv_name}' using 1:2 with linespoints title 'R0'");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Metadata {
        Metadata::new(
            "simulate",
            "ab",
            Mesh {
                tau_max: 200.0,
                dtau: 0.2,
                dt: Some(0.1),
                t_end: None,
            },
        )
        .note("mode", "full")
    }

    #[test]
    fn header_lines_are_comments() {
        let h = meta().comment_header();
        assert!(h.lines().all(|l| l.starts_with("# ")));
        assert!(h.contains("config_sha256 = ab"));
        assert!(h.contains("dt = 0.1"));
        assert!(h.contains("# mode = full"));
    }

    #[test]
    fn highlighted() {
        assert_eq!(highlighted_degrees(40), vec![10, 20, 30, 40]);
        assert_eq!(highlighted_degrees(3), vec![1, 2, 3]);
        assert_eq!(highlighted_degrees(5), vec![1, 2, 3, 5]);
    }

    #[test]
    fn json_carries_meta() {
        #[derive(Serialize)]
        struct Body {
            r0: f64,
        }
        let doc = json_document(&meta(), &Body { r0: 1.5 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["r0"], 1.5);
        assert_eq!(v["meta"]["mesh"]["dtau"], 0.2);
        assert!(v["meta"]["mesh"].get("t_end").is_none());
        assert_eq!(v["meta"]["notes"]["mode"], "full");
    }
}
