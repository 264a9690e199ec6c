//! Experiment descriptions, Cartesian parameter sweeps and CSV output.
//!
//! An experiment file is TOML:
//!
//! ```toml
//! seeds = [1, 2, 3]
//!
//! [base]
//! a = 0.5
//! frames = 100000
//!
//! [[sweep]]
//! field = "allocator"
//! values = ["water_fill", "max_min"]
//! ```
//!
//! Every `[base]` key is a [`SimConfig`] field; omitted keys keep their
//! defaults. Each sweep axis names one field and lists its values as strings.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::simulator::{run_simulation, MetricsReport, SimConfig, CONFIG_FIELDS, METRIC_FIELDS};

/// Version tag written in the first CSV column. Bump when columns change.
pub const CSV_SCHEMA_VERSION: &str = "v1";

/// Upper bound on sweep cells times seeds.
pub const MAX_CELLS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub field: String,
    pub values: Vec<String>,
}

impl SweepAxis {
    /// Parses `FIELD=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (field, values) = spec.split_once('=').ok_or_else(|| {
            Error::config("sweep", format!("expected FIELD=v1,v2,..., got `{spec}`"))
        })?;
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::config(field.trim(), "sweep axis has no values"));
        }
        Ok(SweepAxis {
            field: field.trim().to_string(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seeds: Vec<u64>,
    pub base: SimConfig,
    pub sweep: Vec<SweepAxis>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            seeds: vec![1],
            base: SimConfig::default(),
            sweep: Vec::new(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Number of simulation runs: product of axis lengths times seeds.
    pub fn run_count(&self) -> usize {
        self.sweep.iter().fold(self.seeds.len(), |n, axis| {
            n.saturating_mul(axis.values.len())
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.run_count() > MAX_CELLS {
            return Err(Error::config(
                "sweep",
                format!("{} runs exceed the limit of {MAX_CELLS}", self.run_count()),
            ));
        }
        for axis in &self.sweep {
            if axis.values.is_empty() {
                return Err(Error::config(&axis.field, "sweep axis has no values"));
            }
            let mut probe = self.base.clone();
            for value in &axis.values {
                probe.set_field(&axis.field, value)?;
            }
        }
        for cell in self.cells()? {
            cell.validate()?;
        }
        Ok(())
    }

    /// Sweep cells in row order: the first axis varies slowest.
    pub fn cells(&self) -> Result<Vec<SimConfig>> {
        let mut cells = vec![self.base.clone()];
        for axis in &self.sweep {
            let mut next = Vec::with_capacity(cells.len() * axis.values.len());
            for cell in &cells {
                for value in &axis.values {
                    let mut c = cell.clone();
                    c.set_field(&axis.field, value)?;
                    next.push(c);
                }
            }
            cells = next;
        }
        Ok(cells)
    }

    /// Every (cell, seed) configuration, cell-major.
    pub fn runs(&self) -> Result<Vec<SimConfig>> {
        Ok(self
            .cells()?
            .into_iter()
            .flat_map(|cell| {
                self.seeds.iter().map(move |&seed| SimConfig {
                    seed,
                    ..cell.clone()
                })
            })
            .collect())
    }
}

/// One finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: SimConfig,
    pub report: MetricsReport,
}

/// Runs every (cell, seed) of `spec`; results come back in [`ExperimentSpec::runs`]
/// order whatever the execution strategy.
pub fn run_experiment(spec: &ExperimentSpec, execution: Execution) -> Result<Vec<RunResult>> {
    spec.validate()?;
    let runs = spec.runs()?;
    execution
        .map_indexed(runs.len(), |i| {
            run_simulation(&runs[i]).map(|report| RunResult {
                config: runs[i].clone(),
                report,
            })
        })
        .into_iter()
        .collect()
}

pub fn csv_header() -> Vec<&'static str> {
    std::iter::once("schema_version")
        .chain(CONFIG_FIELDS)
        .chain(METRIC_FIELDS)
        .collect()
}

fn metric_value(report: &MetricsReport, field: &str) -> String {
    match field {
        "mean_n1" => report.mean_n1.to_string(),
        "mean_n2" => report.mean_n2.to_string(),
        "urllc_arrived" => report.urllc_arrived.to_string(),
        "urllc_lost" => report.urllc_lost.to_string(),
        "urllc_loss_prob" => report.urllc_loss_prob.to_string(),
        "embb_arrived_bits" => report.embb_arrived_bits.to_string(),
        "embb_lost_bits" => report.embb_lost_bits.to_string(),
        "embb_loss_prob" => report.embb_loss_prob.to_string(),
        "embb_arrivals" => report.embb_arrivals.to_string(),
        "embb_arrivals_hit" => report.embb_arrivals_hit.to_string(),
        "embb_arrival_loss_prob" => report.embb_arrival_loss_prob.to_string(),
        "sample_variance" => report.sample_variance.to_string(),
        "jain_index" => report.jain_index.to_string(),
        "social_payoff" => report.social_payoff.to_string(),
        "equilibrium_case" => report.equilibrium_case.clone(),
        "n1_star" => report.n1_star.map(|v| v.to_string()).unwrap_or_default(),
        other => unreachable!("unknown metric column {other}"),
    }
}

pub fn csv_record(result: &RunResult) -> Result<Vec<String>> {
    let mut row = vec![CSV_SCHEMA_VERSION.to_string()];
    for field in CONFIG_FIELDS {
        row.push(result.config.field_value(field)?);
    }
    for field in METRIC_FIELDS {
        row.push(metric_value(&result.report, field));
    }
    Ok(row)
}

/// Writes the header and one row per result.
pub fn write_csv<W: Write>(writer: W, results: &[RunResult]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    csv.write_record(csv_header()).map_err(io)?;
    for result in results {
        csv.write_record(csv_record(result)?).map_err(io)?;
    }
    csv.flush()?;
    Ok(())
}

/// Writes the CSV to `path` through a temporary sibling, so a failed run
/// leaves no partial file behind.
pub fn write_csv_file(path: &Path, results: &[RunResult]) -> Result<()> {
    let tmp = path.with_extension("csv.partial");
    let outcome = fs::File::create(&tmp)
        .map_err(Error::from)
        .and_then(|file| write_csv(std::io::BufWriter::new(file), results))
        .and_then(|()| fs::rename(&tmp, path).map_err(Error::from));
    if outcome.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    outcome
}
