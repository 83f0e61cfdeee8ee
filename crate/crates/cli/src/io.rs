//! File formats: panel and covariate CSVs, JSON records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tslpm::hmc::Chain;
use tslpm::map_fit::MapFit;
use tslpm::{CountPanel, CovariateMatrix, Dataset, ModelConfig, ParameterSet};

use crate::DataError;

/// Reads a panel CSV: header of node labels, one row per time step.
pub fn read_panel(path: &Path) -> Result<CountPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DataError(format!("{}: {e}", path.display())))?;
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| DataError(format!("{}: {e}", path.display())))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.trim().parse::<u64>().map_err(|_| {
                    DataError(format!(
                        "{} line {line}, column {}: expected a non-negative integer count, got {cell:?}",
                        path.display(),
                        col + 1
                    ))
                })
            })
            .collect::<Result<Vec<u64>, DataError>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError(format!("{}: no data rows", path.display())).into());
    }
    Ok(CountPanel::from_time_rows(&rows, labels)?)
}

pub fn write_panel(path: &Path, panel: &CountPanel) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(panel.labels())?;
    for t in 0..panel.n_times() {
        w.write_record(panel.at(t).iter().map(|y| y.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a covariate CSV: header of covariate names, one row per node in
/// panel label order.
pub fn read_covariates(path: &Path, n_nodes: usize, standardize: bool) -> Result<CovariateMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DataError(format!("{}: {e}", path.display())))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| DataError(format!("{}: {e}", path.display())))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut values = Vec::new();
    let mut n_rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| DataError(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                DataError(format!(
                    "{} line {line}, column {}: expected a number, got {cell:?}",
                    path.display(),
                    col + 1
                ))
            })?;
            values.push(v);
        }
        n_rows += 1;
    }
    if n_rows != n_nodes {
        return Err(DataError(format!(
            "{}: {n_rows} covariate rows for {n_nodes} nodes",
            path.display()
        ))
        .into());
    }
    let matrix = ndarray::Array2::from_shape_vec((n_nodes, names.len()), values)?;
    Ok(if standardize {
        CovariateMatrix::standardized(matrix, names)?
    } else {
        CovariateMatrix::new(matrix, names)?
    })
}

pub fn load_dataset(panel: &Path, covariates: Option<&Path>, standardize: bool) -> Result<Dataset> {
    let panel = read_panel(panel)?;
    let cov = covariates
        .map(|p| read_covariates(p, panel.n_nodes(), standardize))
        .transpose()?;
    Ok(Dataset::new(panel, cov)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| DataError(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| {
        DataError(format!(
            "{} line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
        .into()
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_config(path: &Path) -> Result<ModelConfig> {
    let config: ModelConfig = read_json(path)?;
    config.validate()?;
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| DataError(format!("cannot create {}: {e}", dir.display())))?;
    }
    let f = File::create(path).map_err(|e| DataError(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

/// Ground truth written by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub config: ModelConfig,
    pub labels: Vec<String>,
    pub params: ParameterSet,
    pub seed: u64,
    /// Seed that produced a panel without intensity overflow.
    pub seed_used: u64,
    pub latent_variance: f64,
    pub expansion_factor: f64,
    pub expansions: usize,
    pub saturated: bool,
    pub spectral_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub config: ModelConfig,
    pub labels: Vec<String>,
    pub fit: MapFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub labels: Vec<String>,
    pub chain: Chain,
}

/// Rejects records whose labels or configuration differ from the run's.
pub fn check_labels(record: &[String], data: &Dataset, what: &str) -> Result<()> {
    if record != data.panel.labels() {
        bail!(DataError(format!(
            "{what} was produced for nodes {:?}, data has {:?}",
            record,
            data.panel.labels()
        )));
    }
    Ok(())
}
