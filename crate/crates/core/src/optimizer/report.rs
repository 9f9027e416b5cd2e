//! Plot-ready exports of a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::extract_pareto;
use super::snapshot::{self, IterationMetrics, WallTimes, CONFIG_FILE, DATASET_FILE, METRICS_FILE, TIMINGS_FILE};
use crate::dataset::{format_exact, Dataset};
use crate::error::{Error, Result};
use crate::metrics::reference_front;
use crate::problems::{ProblemSpec, ZdtVariant};

pub const HV_EVOLUTION_FILE: &str = "hv_evolution.csv";
pub const PARETO_FRONT_FILE: &str = "pareto_front.csv";
pub const FRONT_SVG_FILE: &str = "pareto_front.svg";
pub const COMPARE_FILE: &str = "hv_compare.csv";

/// Metrics and timings of every completed iteration.
pub fn load_history(run_dir: &Path) -> Result<Vec<(IterationMetrics, WallTimes)>> {
    let done = snapshot::completed_iterations(run_dir);
    if done.is_empty() {
        return Err(Error::load(run_dir, "no completed iteration snapshots"));
    }
    done.into_iter()
        .map(|k| {
            let dir = snapshot::iter_dir(run_dir, k);
            let m = snapshot::read_json(&dir.join(METRICS_FILE))?;
            let t = snapshot::read_json(&dir.join(TIMINGS_FILE)).unwrap_or_default();
            Ok((m, t))
        })
        .collect()
}

fn hv_evolution_csv(rows: &[(IterationMetrics, WallTimes)]) -> String {
    let mut out = String::from("iteration,hv,hv_std_error,front_size,dataset_size,train_s,acquire_s,evaluate_s\n");
    for (m, t) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3},{:.3},{:.3}",
            m.iteration, m.hv_estimate, m.hv_std_error, m.front_size, m.dataset_size, t.train, t.acquire, t.evaluate
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub iterations: usize,
    pub final_hv: f64,
    pub front_size: usize,
    pub files: Vec<PathBuf>,
}

/// Writes `hv_evolution.csv`, `pareto_front.csv` and `pareto_front.svg` for
/// the last completed iteration into `out_dir`.
pub fn report(run_dir: &Path, out_dir: &Path) -> Result<ReportSummary> {
    let cfg = RunConfig::load(&run_dir.join(CONFIG_FILE))?;
    let problem = cfg.problem.build()?;
    let rows = load_history(run_dir)?;
    let last = rows.last().map(|(m, _)| m.iteration).unwrap_or(0);
    let ds_path = snapshot::iter_dir(run_dir, last).join(DATASET_FILE);
    let ds = Dataset::load_csv(&ds_path, problem.directions().to_vec())?;
    let pareto = extract_pareto(&ds);

    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let hv_path = out_dir.join(HV_EVOLUTION_FILE);
    std::fs::write(&hv_path, hv_evolution_csv(&rows))?;
    files.push(hv_path);

    let pf_path = out_dir.join(PARETO_FRONT_FILE);
    let mut w = csv::Writer::from_path(&pf_path)?;
    let mut header: Vec<String> = (0..ds.dim()).map(|i| format!("x_{i}")).collect();
    header.extend((0..ds.num_objectives()).map(|j| format!("y_{j}")));
    w.write_record(&header)?;
    for (x, y) in pareto.designs.iter().zip(&pareto.performances) {
        w.write_record(x.iter().chain(y).map(|v| format_exact(*v)))?;
    }
    w.flush()?;
    files.push(pf_path);

    if ds.num_objectives() >= 2 {
        let reference = match cfg.problem {
            ProblemSpec::Zdt { variant, .. } => Some(reference_front(ZdtVariant::from_number(variant)?, 1000)?),
            _ => None,
        };
        let pts: Vec<[f64; 2]> = pareto.performances.iter().map(|y| [y[0], y[1]]).collect();
        let svg_path = out_dir.join(FRONT_SVG_FILE);
        std::fs::write(&svg_path, front_svg(&pts, reference.as_deref()))?;
        files.push(svg_path);
    }
    Ok(ReportSummary {
        iterations: last,
        final_hv: rows.last().map_or(0.0, |(m, _)| m.hv_estimate),
        front_size: pareto.len(),
        files,
    })
}

/// Hypervolume of several runs side by side, one row per iteration. Runs
/// that stopped early leave blanks.
pub fn compare(runs: &[(String, PathBuf)]) -> Result<String> {
    let mut table: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for (j, (_, dir)) in runs.iter().enumerate() {
        for (m, _) in load_history(dir)? {
            table.entry(m.iteration).or_insert_with(|| vec![None; runs.len()])[j] = Some(m.hv_estimate);
        }
    }
    let mut out = String::from("iteration");
    for (label, _) in runs {
        let _ = write!(out, ",hv_{label}");
    }
    out.push('\n');
    for (k, vals) in table {
        let _ = write!(out, "{k}");
        for v in vals {
            match v {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Minimal scatter plot of a two-objective front, with an optional
/// reference front drawn as points in a second colour.
pub fn front_svg(front: &[[f64; 2]], reference: Option<&[[f64; 2]]>) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 40.0;
    let all = front.iter().chain(reference.unwrap_or(&[]));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let sx = if x1 > x0 { (W - 2.0 * PAD) / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { (H - 2.0 * PAD) / (y1 - y0) } else { 1.0 };
    let px = |x: f64| PAD + (x - x0) * sx;
    let py = |y: f64| H - PAD - (y - y0) * sy;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<polyline points="{PAD},{PAD} {PAD},{} {},{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">{x0:.3}</text>"#, PAD, H - PAD + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{x1:.3}</text>"#, W - PAD, H - PAD + 16.0);
    let _ = writeln!(s, r#"<text x="4" y="{}" font-size="12">{y0:.3}</text>"#, H - PAD);
    let _ = writeln!(s, r#"<text x="4" y="{}" font-size="12">{y1:.3}</text>"#, PAD);
    if let Some(r) = reference {
        for p in r {
            let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="1" fill="#999999"/>"##, px(p[0]), py(p[1]));
        }
    }
    for p in front {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#c0392b"/>"##, px(p[0]), py(p[1]));
    }
    s.push_str("</svg>\n");
    s
}
