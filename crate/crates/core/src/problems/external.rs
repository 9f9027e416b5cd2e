//! File-based protocol for attaching external simulators.
//!
//! The evaluator writes the candidate batch to `<workdir>/nfp_in_<k>.csv`
//! (header `x_0..x_{n-1}`), runs `<command> --in <in.csv> --out <out.csv>`
//! and reads `y_0..y_{M-1}` rows back in the same order. Exit code 0 means
//! success. Both files stay on disk after the call. The command runs with
//! `<workdir>` as its current directory.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex};

use super::{Evaluator, Problem};
use crate::dataset::format_exact;
use crate::error::{Error, Result};
use crate::space::{DesignPoint, DesignSpace, Direction, PerformanceVector};

#[derive(Debug)]
pub struct ExternalNfp {
    program: String,
    args: Vec<String>,
    workdir: PathBuf,
    dim: usize,
    objectives: usize,
    // Serializes subprocess calls on this instance; holds the call counter.
    calls: Mutex<u64>,
}

impl ExternalNfp {
    pub fn new(command: &str, workdir: &Path, dim: usize, objectives: usize) -> Result<Self> {
        let mut parts = shlex::split(command)
            .ok_or_else(|| Error::argument(format!("cannot parse command {command:?}")))?;
        if parts.is_empty() {
            return Err(Error::argument("external NFP command is empty"));
        }
        let program = parts.remove(0);
        Ok(Self {
            program,
            args: parts,
            workdir: workdir.to_path_buf(),
            dim,
            objectives,
            calls: Mutex::new(0),
        })
    }

    fn write_input(&self, path: &Path, xs: &[DesignPoint]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record((0..self.dim).map(|i| format!("x_{i}")))?;
        for x in xs {
            w.write_record(x.iter().map(|v| format_exact(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    fn read_output(&self, path: &Path, expected_rows: usize, stderr: &str) -> Result<Vec<PerformanceVector>> {
        let fail = |message: String| Error::Evaluation {
            message,
            stderr: Some(stderr.to_string()),
        };
        let mut r = csv::Reader::from_path(path)
            .map_err(|e| fail(format!("cannot open output {}: {e}", path.display())))?;
        let header = r
            .headers()
            .map_err(|e| fail(format!("malformed output header: {e}")))?
            .clone();
        let expected: Vec<String> = (0..self.objectives).map(|j| format!("y_{j}")).collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(fail(format!("output header {header:?}, expected {expected:?}")));
        }
        let mut ys = Vec::with_capacity(expected_rows);
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| fail(format!("malformed output row {row}: {e}")))?;
            let y = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| fail(format!("row {row}: {e}")))?;
            if y.len() != self.objectives {
                return Err(fail(format!(
                    "row {row} has {} values, expected {}",
                    y.len(),
                    self.objectives
                )));
            }
            if let Some(v) = y.iter().find(|v| !v.is_finite()) {
                return Err(fail(format!("row {row} contains non-finite value {v}")));
            }
            ys.push(y);
        }
        if ys.len() != expected_rows {
            return Err(fail(format!(
                "output has {} rows for {expected_rows} designs",
                ys.len()
            )));
        }
        Ok(ys)
    }
}

impl Evaluator for ExternalNfp {
    fn evaluate(&self, xs: &[DesignPoint]) -> Result<Vec<PerformanceVector>> {
        let mut calls = self.calls.lock().unwrap_or_else(|e| e.into_inner());
        let k = *calls;
        *calls += 1;

        std::fs::create_dir_all(&self.workdir)?;
        let workdir = std::fs::canonicalize(&self.workdir)?;
        let input = workdir.join(format!("nfp_in_{k}.csv"));
        let output = workdir.join(format!("nfp_out_{k}.csv"));
        self.write_input(&input, xs)?;
        let _ = std::fs::remove_file(&output);

        let out = Command::new(&self.program)
            .args(&self.args)
            .arg("--in")
            .arg(&input)
            .arg("--out")
            .arg(&output)
            .current_dir(&workdir)
            .output()
            .map_err(|e| Error::evaluation(format!("cannot start {:?}: {e}", self.program)))?;
        let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        if !out.status.success() {
            return Err(Error::Evaluation {
                message: format!("{:?} exited with {}", self.program, out.status),
                stderr: Some(stderr),
            });
        }
        self.read_output(&output, xs.len(), &stderr)
    }
}

/// Wraps an external command as a problem named `external`.
pub fn external_nfp(
    command: &str,
    workdir: &Path,
    space: DesignSpace,
    directions: Vec<Direction>,
) -> Result<Problem> {
    let nfp = ExternalNfp::new(command, workdir, space.dim(), directions.len())?;
    Problem::new("external", space, directions, Arc::new(nfp))
}
