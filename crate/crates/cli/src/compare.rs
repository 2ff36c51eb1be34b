//! Pairwise run comparison: per-time state deltas, estimation errors and
//! terminal-window oscillation metrics, either from in-memory runs or from
//! previously emitted output directories.

use std::path::{Path, PathBuf};

use retrig_core::linalg;

use crate::emit::format_float;
use crate::run::{CliError, ScenarioOutput};

/// A run reduced to its sampled grid, as needed for comparison.
#[derive(Debug, Clone)]
pub struct SampledRun {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub theta_true: Vec<f64>,
}

impl SampledRun {
    pub fn from_output(out: &ScenarioOutput) -> Self {
        SampledRun {
            t: out.rows.iter().map(|r| r.t).collect(),
            x: out.rows.iter().map(|r| r.x.clone()).collect(),
            theta: out.rows.iter().map(|r| r.theta.clone()).collect(),
            theta_true: out.config.theta_true.clone(),
        }
    }

    /// Reads `trajectory.csv` and `config.txt` back from an emitted
    /// directory.
    pub fn from_dir(dir: &Path) -> Result<Self, CliError> {
        let cfg = crate::config::load_config(&dir.join("config.txt"))?;
        let text = std::fs::read_to_string(dir.join("trajectory.csv"))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Data(format!("{}: empty trajectory.csv", dir.display())))?;
        let cols: Vec<&str> = header.split(',').collect();
        let nx = cols.iter().filter(|c| c.starts_with('x')).count();
        let nth = cols.iter().filter(|c| c.starts_with("th")).count();
        let x_start = 1;
        let th_start = cols
            .iter()
            .position(|c| *c == "th1")
            .ok_or_else(|| CliError::Data(format!("{}: malformed header", dir.display())))?;
        let mut run = SampledRun {
            t: Vec::new(),
            x: Vec::new(),
            theta: Vec::new(),
            theta_true: cfg.theta_true,
        };
        for (k, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| {
                    CliError::Data(format!("{}: bad row {}: {e}", dir.display(), k + 2))
                })?;
            run.t.push(fields[0]);
            run.x.push(fields[x_start..x_start + nx].to_vec());
            run.theta.push(fields[th_start..th_start + nth].to_vec());
        }
        Ok(run)
    }

    fn err_at(&self, i: usize) -> f64 {
        linalg::norm(&linalg::sub_vec(&self.theta[i], &self.theta_true))
    }

    /// Linear interpolation of state and estimate onto `grid`.
    fn resample(&self, grid: &[f64]) -> SampledRun {
        let interp = |vals: &[Vec<f64>], t: f64| -> Vec<f64> {
            let idx = self.t.partition_point(|&s| s <= t);
            if idx == 0 {
                return vals[0].clone();
            }
            if idx >= self.t.len() {
                return vals[vals.len() - 1].clone();
            }
            let (t0, t1) = (self.t[idx - 1], self.t[idx]);
            let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            vals[idx - 1]
                .iter()
                .zip(&vals[idx])
                .map(|(a, b)| a + w * (b - a))
                .collect()
        };
        SampledRun {
            t: grid.to_vec(),
            x: grid.iter().map(|&t| interp(&self.x, t)).collect(),
            theta: grid.iter().map(|&t| interp(&self.theta, t)).collect(),
            theta_true: self.theta_true.clone(),
        }
    }
}

/// Scalar metrics of one run over the full span and a terminal window.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// `sup_t |x(t)|` over the whole run (overshoot measure).
    pub overshoot: f64,
    /// `max |x(t)|` over the terminal window (oscillation magnitude).
    pub terminal_max_x: f64,
    /// `max |theta_hat(t) - theta_true|` over the terminal window.
    pub terminal_max_err: f64,
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub t: f64,
    pub delta_x: f64,
    pub err_a: f64,
    pub err_b: f64,
}

#[derive(Debug)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub metrics_a: RunMetrics,
    pub metrics_b: RunMetrics,
    pub terminal_window: (f64, f64),
    /// Set when the inputs disagreed on grids and one was resampled.
    pub warning: Option<String>,
}

fn metrics(run: &SampledRun, window: (f64, f64)) -> RunMetrics {
    let mut m = RunMetrics {
        overshoot: 0.0,
        terminal_max_x: 0.0,
        terminal_max_err: 0.0,
    };
    for i in 0..run.t.len() {
        let nx = linalg::norm(&run.x[i]);
        m.overshoot = m.overshoot.max(nx);
        if run.t[i] >= window.0 && run.t[i] <= window.1 {
            m.terminal_max_x = m.terminal_max_x.max(nx);
            m.terminal_max_err = m.terminal_max_err.max(run.err_at(i));
        }
    }
    m
}

fn grids_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// Compares two sampled runs over their common grid. Mismatched grids are
/// resampled onto the coarser one (with a warning recorded). The terminal
/// window defaults to the last quarter of the common span when `None`.
pub fn compare_runs(
    a: &SampledRun,
    b: &SampledRun,
    terminal_window: Option<(f64, f64)>,
) -> Result<Comparison, CliError> {
    if a.t.len() < 2 || b.t.len() < 2 {
        return Err(CliError::Data(
            "need at least two samples per run to compare".into(),
        ));
    }
    let (a_rs, b_rs, warning);
    if grids_equal(&a.t, &b.t) {
        a_rs = a.clone();
        b_rs = b.clone();
        warning = None;
    } else {
        let (coarse, note) = if a.t.len() <= b.t.len() {
            (a.t.clone(), "resampled run B onto run A's coarser grid")
        } else {
            (b.t.clone(), "resampled run A onto run B's coarser grid")
        };
        a_rs = a.resample(&coarse);
        b_rs = b.resample(&coarse);
        warning = Some(note.to_string());
    }

    let t_first = a_rs.t[0];
    let t_last = *a_rs.t.last().unwrap();
    let window = terminal_window.unwrap_or((t_first + 0.75 * (t_last - t_first), t_last));
    let rows = (0..a_rs.t.len())
        .map(|i| CompareRow {
            t: a_rs.t[i],
            delta_x: linalg::norm(&linalg::sub_vec(&a_rs.x[i], &b_rs.x[i])),
            err_a: a_rs.err_at(i),
            err_b: b_rs.err_at(i),
        })
        .collect();
    Ok(Comparison {
        rows,
        metrics_a: metrics(&a_rs, window),
        metrics_b: metrics(&b_rs, window),
        terminal_window: window,
        warning,
    })
}

fn metrics_json(m: &RunMetrics) -> String {
    format!(
        "{{\"overshoot\": {}, \"terminal_max_x\": {}, \"terminal_max_err\": {}}}",
        format_float(m.overshoot),
        format_float(m.terminal_max_x),
        format_float(m.terminal_max_err)
    )
}

/// Writes `compare.csv` and `compare_summary.json` into `out_dir`.
pub fn emit_comparison(out_dir: &Path, cmp: &Comparison) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let mut csv = String::from("t,delta_x,err_a,err_b\n");
    for r in &cmp.rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            format_float(r.t),
            format_float(r.delta_x),
            format_float(r.err_a),
            format_float(r.err_b)
        ));
    }
    let json = format!(
        "{{\n  \"terminal_window\": [{}, {}],\n  \"run_a\": {},\n  \"run_b\": {},\n  \"warning\": {}\n}}\n",
        format_float(cmp.terminal_window.0),
        format_float(cmp.terminal_window.1),
        metrics_json(&cmp.metrics_a),
        metrics_json(&cmp.metrics_b),
        cmp.warning.as_ref().map_or("null".to_string(), |w| format!("\"{w}\"")),
    );
    let csv_path = out_dir.join("compare.csv");
    let json_path = out_dir.join("compare_summary.json");
    std::fs::write(&csv_path, csv)?;
    std::fs::write(&json_path, json)?;
    Ok(vec![csv_path, json_path])
}
