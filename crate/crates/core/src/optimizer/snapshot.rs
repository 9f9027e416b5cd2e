//! On-disk layout of a run directory.
//!
//! ```text
//! <output_dir>/config.toml
//! <output_dir>/iter_<k>/dataset.csv
//! <output_dir>/iter_<k>/candidates.csv
//! <output_dir>/iter_<k>/metrics.json
//! <output_dir>/iter_<k>/timings.json
//! <output_dir>/iter_<k>/surrogate.ckpt      (surrogate modes)
//! <output_dir>/iter_<k>/acquisition.json    (surrogate modes, k >= 1)
//! <output_dir>/iter_<k>/population.json     (nsga2-baseline)
//! ```
//!
//! An iteration directory is written under `iter_<k>.partial` and renamed
//! once complete, so a crash never leaves a half-written `iter_<k>`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::acquisition::AcquisitionDiagnostics;
use crate::dataset::{format_exact, Dataset};
use crate::error::{Error, Result};
use crate::space::DesignPoint;
use crate::surrogate::EnsembleSurrogate;

pub const CONFIG_FILE: &str = "config.toml";
pub const DATASET_FILE: &str = "dataset.csv";
pub const CANDIDATES_FILE: &str = "candidates.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const SURROGATE_FILE: &str = "surrogate.ckpt";
pub const ACQUISITION_FILE: &str = "acquisition.json";
pub const POPULATION_FILE: &str = "population.json";

/// Deterministic per-iteration record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub hv_estimate: f64,
    pub hv_std_error: f64,
    pub front_size: usize,
    pub dataset_size: usize,
    pub evaluated: usize,
    pub accepted: usize,
    pub duplicates: usize,
    pub non_finite: usize,
    /// Final training MSE of each ensemble member (standardized targets).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_mse: Option<Vec<f64>>,
}

/// Wall-clock seconds per phase. Kept out of `metrics.json` so that file is
/// reproducible byte for byte.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub train: f64,
    pub acquire: f64,
    pub evaluate: f64,
}

/// NSGA-II baseline population in the all-minimize convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationFile {
    pub x: Vec<DesignPoint>,
    pub objectives: Vec<Vec<f64>>,
}

pub fn iter_dir(root: &Path, k: usize) -> PathBuf {
    root.join(format!("iter_{k}"))
}

/// Iterations `0..=k` with a complete snapshot, stopping at the first gap.
pub fn completed_iterations(root: &Path) -> Vec<usize> {
    (0..)
        .take_while(|&k| iter_dir(root, k).join(METRICS_FILE).is_file())
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::load(path, e.to_string()))
}

pub fn write_points_csv(path: &Path, prefix: &str, points: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = points.first().map_or(0, Vec::len);
    w.write_record((0..dim).map(|i| format!("{prefix}_{i}")))?;
    for p in points {
        w.write_record(p.iter().map(|v| format_exact(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::load(path, e.to_string()))?;
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::load(path, e.to_string()))?;
        let p = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::load(path, format!("row {row}: {e}")))?;
        out.push(p);
    }
    Ok(out)
}

/// Contents of one iteration directory.
pub struct Snapshot<'a> {
    pub dataset: &'a Dataset,
    pub candidates: &'a [DesignPoint],
    pub metrics: &'a IterationMetrics,
    pub timings: &'a WallTimes,
    pub surrogate: Option<&'a EnsembleSurrogate>,
    pub acquisition: Option<&'a AcquisitionDiagnostics>,
    pub population: Option<&'a PopulationFile>,
}

impl Snapshot<'_> {
    pub fn write(&self, root: &Path, k: usize) -> Result<()> {
        let final_dir = iter_dir(root, k);
        let tmp = root.join(format!("iter_{k}.partial"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir_all(&tmp)?;
        self.dataset.save_csv(&tmp.join(DATASET_FILE))?;
        write_points_csv(&tmp.join(CANDIDATES_FILE), "x", self.candidates)?;
        if let Some(s) = self.surrogate {
            s.save(&tmp.join(SURROGATE_FILE))?;
        }
        if let Some(a) = self.acquisition {
            write_json(&tmp.join(ACQUISITION_FILE), a)?;
        }
        if let Some(p) = self.population {
            write_json(&tmp.join(POPULATION_FILE), p)?;
        }
        write_json(&tmp.join(TIMINGS_FILE), self.timings)?;
        write_json(&tmp.join(METRICS_FILE), self.metrics)?;
        if final_dir.exists() {
            fs::remove_dir_all(&final_dir)?;
        }
        fs::rename(&tmp, &final_dir)?;
        Ok(())
    }
}
