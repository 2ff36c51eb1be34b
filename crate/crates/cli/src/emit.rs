//! CSV/JSON emission. All floating-point values are printed with 17
//! significant digits so emitted files are bit-faithful to the run and
//! byte-identical across repeat runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use retrig_core::trigger::EventRecord;
use retrig_core::RunSummary;

use crate::run::{CliError, ScenarioOutput};

/// 17 significant digits; round-trips `f64` exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Fixed trajectory sampling grid: 1 ms resolution through the initial
/// transient (t <= 0.1), 10 ms afterwards, always ending exactly at
/// `t_end`.
pub fn sample_grid(t_end: f64) -> Vec<f64> {
    let mut ts = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * 1e-3;
        if t > t_end + 1e-12 || t > 0.1 + 1e-12 {
            break;
        }
        ts.push(t.min(t_end));
        k += 1;
    }
    if t_end > 0.1 {
        let mut j = 1u64;
        loop {
            let t = 0.1 + j as f64 * 1e-2;
            if t > t_end + 1e-12 {
                break;
            }
            ts.push(t);
            j += 1;
        }
    }
    if let Some(&last) = ts.last() {
        if (t_end - last).abs() > 1e-12 {
            ts.push(t_end);
        }
    }
    ts
}

fn trajectory_csv(out: &ScenarioOutput) -> String {
    let n = out.result.n;
    let l = out.result.l;
    let m = out.rows.first().map_or(1, |r| r.u.len());
    let mut header = String::from("t");
    for i in 1..=n {
        header.push_str(&format!(",x{i}"));
    }
    for i in 1..=m {
        header.push_str(&format!(",u{i}"));
    }
    for i in 1..=l {
        header.push_str(&format!(",th{i}"));
    }
    header.push_str(",V\n");
    let mut body = header;
    for row in &out.rows {
        body.push_str(&format_float(row.t));
        for v in row.x.iter().chain(&row.u).chain(&row.theta) {
            body.push(',');
            body.push_str(&format_float(*v));
        }
        body.push(',');
        body.push_str(&format_float(row.v));
        body.push('\n');
    }
    body
}

fn events_csv(events: &[EventRecord], l: usize) -> String {
    let mut header = String::from("i,tau,cause");
    for i in 1..=l {
        header.push_str(&format!(",th_before{i}"));
    }
    for i in 1..=l {
        header.push_str(&format!(",th_after{i}"));
    }
    header.push_str(",rank,residual,skipped\n");
    let mut body = header;
    for e in events {
        body.push_str(&format!(
            "{},{},{}",
            e.index,
            format_float(e.tau),
            e.cause.as_str()
        ));
        for v in e.theta_before.iter().chain(&e.theta_after) {
            body.push(',');
            body.push_str(&format_float(*v));
        }
        match &e.update {
            Some(up) => body.push_str(&format!(
                ",{},{},{}",
                up.rank,
                format_float(up.residual),
                up.skipped
            )),
            None => body.push_str(",,,"),
        }
        body.push('\n');
    }
    body
}

fn json_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), format_float)
}

fn summary_json(s: &RunSummary) -> String {
    format!(
        "{{\n  \"first_event_time\": {},\n  \"event_count\": {},\n  \"guard_event_count\": {},\n  \"dwell_event_count\": {},\n  \"rank_deficient_updates\": {},\n  \"convergence_time\": {},\n  \"sup_norm_x\": {},\n  \"final_norm_x\": {}\n}}\n",
        json_opt(s.first_event_time),
        s.event_count,
        s.guard_event_count,
        s.dwell_event_count,
        s.rank_deficient_updates,
        json_opt(s.convergence_time),
        format_float(s.sup_norm_x),
        format_float(s.final_norm_x),
    )
}

fn write(path: &Path, contents: &str) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}

/// Writes `trajectory.csv`, `events.csv`, `summary.json` and `config.txt`
/// into `out_dir`, returning the paths written.
pub fn emit(out_dir: &Path, out: &ScenarioOutput) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir)?;
    let files = [
        ("trajectory.csv", trajectory_csv(out)),
        ("events.csv", events_csv(&out.result.events, out.result.l)),
        ("summary.json", summary_json(&out.result.summary)),
        ("config.txt", out.config.canonical_text()),
    ];
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = out_dir.join(name);
        write(&path, &contents)?;
        written.push(path);
    }
    Ok(written)
}
