//! The growing archive of NFP-evaluated designs.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::space::{Direction, DesignPoint, PerformanceVector};

/// Outcome of [`Dataset::append`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AppendReport {
    pub accepted: usize,
    pub duplicates: usize,
    pub non_finite: usize,
}

impl AppendReport {
    pub fn rejected(&self) -> usize {
        self.duplicates + self.non_finite
    }
}

/// Exact-equality key for a design; `-0.0` and `0.0` compare equal.
pub(crate) fn design_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

#[derive(Clone, Debug)]
pub struct Dataset {
    dim: usize,
    directions: Vec<Direction>,
    designs: Vec<DesignPoint>,
    performances: Vec<PerformanceVector>,
    iterations: Vec<usize>,
    keys: HashSet<Vec<u64>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.directions == other.directions
            && self.designs == other.designs
            && self.performances == other.performances
            && self.iterations == other.iterations
    }
}

impl Dataset {
    pub fn new(dim: usize, directions: Vec<Direction>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::argument("dataset dimension must be positive"));
        }
        if directions.is_empty() {
            return Err(Error::argument("dataset needs at least one objective"));
        }
        Ok(Self {
            dim,
            directions,
            designs: Vec::new(),
            performances: Vec::new(),
            iterations: Vec::new(),
            keys: HashSet::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_objectives(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    pub fn designs(&self) -> &[DesignPoint] {
        &self.designs
    }

    pub fn performances(&self) -> &[PerformanceVector] {
        &self.performances
    }

    pub fn iterations(&self) -> &[usize] {
        &self.iterations
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.keys.contains(&design_key(x))
    }

    /// Appends rows tagged with iteration `iter`.
    ///
    /// Exact duplicates of existing designs (or of earlier rows in the same
    /// batch) and rows with non-finite objectives are skipped and counted.
    pub fn append(
        &mut self,
        xs: &[DesignPoint],
        ys: &[PerformanceVector],
        iter: usize,
    ) -> Result<AppendReport> {
        if xs.len() != ys.len() {
            return Err(Error::argument(format!(
                "{} designs but {} performance vectors",
                xs.len(),
                ys.len()
            )));
        }
        for (x, y) in xs.iter().zip(ys) {
            if x.len() != self.dim {
                return Err(Error::argument(format!(
                    "design has {} coordinates, dataset expects {}",
                    x.len(),
                    self.dim
                )));
            }
            if y.len() != self.num_objectives() {
                return Err(Error::argument(format!(
                    "performance has {} objectives, dataset expects {}",
                    y.len(),
                    self.num_objectives()
                )));
            }
        }
        let mut report = AppendReport::default();
        for (x, y) in xs.iter().zip(ys) {
            if !y.iter().all(|v| v.is_finite()) {
                report.non_finite += 1;
                continue;
            }
            if !self.keys.insert(design_key(x)) {
                report.duplicates += 1;
                continue;
            }
            self.designs.push(x.clone());
            self.performances.push(y.clone());
            self.iterations.push(iter);
            report.accepted += 1;
        }
        Ok(report)
    }

    /// Writes `x_0..x_{n-1},y_0..y_{M-1},iteration` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("x_{i}")).collect();
        header.extend((0..self.num_objectives()).map(|j| format!("y_{j}")));
        header.push("iteration".into());
        w.write_record(&header)?;
        for ((x, y), it) in self.designs.iter().zip(&self.performances).zip(&self.iterations) {
            let mut row: Vec<String> = x.iter().chain(y).map(|v| format_exact(*v)).collect();
            row.push(it.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a dataset written by [`Dataset::write_csv`]. The column layout is
    /// inferred from the header; directions are not stored in the file.
    pub fn read_csv<R: Read>(reader: R, directions: Vec<Direction>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let dim = header.iter().filter(|h| h.starts_with("x_")).count();
        let m = header.iter().filter(|h| h.starts_with("y_")).count();
        let expected: Vec<String> = (0..dim)
            .map(|i| format!("x_{i}"))
            .chain((0..m).map(|j| format!("y_{j}")))
            .chain(std::iter::once("iteration".to_string()))
            .collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::argument(format!("unexpected dataset header {header:?}")));
        }
        if m != directions.len() {
            return Err(Error::argument(format!(
                "file has {m} objectives but {} directions were given",
                directions.len()
            )));
        }
        let mut ds = Dataset::new(dim, directions)?;
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::argument(format!("row {row}: bad number {s:?}: {e}")))
            };
            let x = (0..dim).map(|i| parse(&record[i])).collect::<Result<Vec<_>>>()?;
            let y = (dim..dim + m).map(|i| parse(&record[i])).collect::<Result<Vec<_>>>()?;
            let it: usize = record[dim + m]
                .trim()
                .parse()
                .map_err(|e| Error::argument(format!("row {row}: bad iteration: {e}")))?;
            let rep = ds.append(&[x], &[y], it)?;
            if rep.accepted != 1 {
                return Err(Error::argument(format!("row {row}: duplicate or non-finite row")));
            }
        }
        Ok(ds)
    }

    pub fn load_csv(path: &Path, directions: Vec<Direction>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), directions)
            .map_err(|e| Error::load(path, e.to_string()))
    }
}

/// Formats a float with 17 significant digits, enough for an exact round-trip.
pub fn format_exact(v: f64) -> String {
    format!("{v:.16e}")
}
