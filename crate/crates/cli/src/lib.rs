//! Scenario harness for the event-triggered adaptive control engine:
//! flat-text scenario configs, the named preset catalog, batch execution,
//! CSV/JSON emission and pairwise run comparison.
//!
//! The binary exposes four subcommands: `run`, `compare`, `list-presets`
//! and `selftest`. Exit codes: 0 success, 1 usage error, 2 simulation or
//! configuration failure, 3 self-test failure.

use std::path::{Path, PathBuf};

pub mod compare;
pub mod config;
pub mod emit;
pub mod oracle;
pub mod presets;
pub mod rng;
pub mod run;
pub mod selftest;

use compare::{compare_runs, emit_comparison, SampledRun};
use config::ScenarioConfig;
use run::{run_scenario, CliError};

const USAGE: &str = "usage: retrig <command> [args]

commands:
  run <preset-or-config> [--out DIR]   simulate a named preset or a config file
  compare <dirA> <dirB> [--out DIR]    compare two emitted run directories
  list-presets                         list the named presets
  selftest                             run the built-in invariant suite

exit codes: 0 success, 1 usage, 2 simulation failure, 3 selftest failure";

fn parse_out_flag(args: &[String], default: PathBuf) -> Result<(Vec<&str>, PathBuf), String> {
    let mut positional = Vec::new();
    let mut out = default;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if arg == "--out" {
            match it.next() {
                Some(dir) => out = PathBuf::from(dir),
                None => return Err("--out needs a directory argument".into()),
            }
        } else if arg.starts_with("--") {
            return Err(format!("unknown flag `{arg}`"));
        } else {
            positional.push(arg.as_str());
        }
    }
    Ok((positional, out))
}

fn resolve_scenario(target: &str) -> Result<(String, ScenarioConfig), CliError> {
    if let Some(cfg) = presets::expand(target) {
        return Ok((target.to_string(), cfg));
    }
    let path = Path::new(target);
    let cfg = config::load_config(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    Ok((name, cfg))
}

fn cmd_run(args: &[String]) -> Result<u8, String> {
    let (positional, out_dir) = parse_out_flag(args, PathBuf::new())?;
    let [target] = positional[..] else {
        return Err("run expects exactly one preset name or config path".into());
    };
    let (name, cfg) = match resolve_scenario(target) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(2);
        }
    };
    let out_dir = if out_dir.as_os_str().is_empty() {
        PathBuf::from("runs").join(&name)
    } else {
        out_dir
    };
    match run_scenario(&cfg).and_then(|out| {
        let files = emit::emit(&out_dir, &out)?;
        Ok((out, files))
    }) {
        Ok((out, files)) => {
            let s = &out.result.summary;
            let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
            println!(
                "{name}: events={} (guard {}, dwell {})  first_event={}  convergence={}  sup|x|={:.4}  final|x|={:.3e}",
                s.event_count,
                s.guard_event_count,
                s.dwell_event_count,
                fmt_opt(s.first_event_time),
                fmt_opt(s.convergence_time),
                s.sup_norm_x,
                s.final_norm_x,
            );
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(2)
        }
    }
}

fn cmd_compare(args: &[String]) -> Result<u8, String> {
    let (positional, out_dir) = parse_out_flag(args, PathBuf::from("compare_out"))?;
    let [dir_a, dir_b] = positional[..] else {
        return Err("compare expects exactly two run directories".into());
    };
    let load = |d: &str| SampledRun::from_dir(Path::new(d));
    match (|| -> Result<_, CliError> {
        let a = load(dir_a)?;
        let b = load(dir_b)?;
        let cmp = compare_runs(&a, &b, None)?;
        let files = emit_comparison(&out_dir, &cmp)?;
        Ok((cmp, files))
    })() {
        Ok((cmp, files)) => {
            if let Some(w) = &cmp.warning {
                eprintln!("warning: {w}");
            }
            let max_delta = cmp.rows.iter().fold(0.0f64, |m, r| m.max(r.delta_x));
            println!(
                "max |x_a - x_b| = {max_delta:.6e} over {} samples; terminal window [{:.2}, {:.2}]",
                cmp.rows.len(),
                cmp.terminal_window.0,
                cmp.terminal_window.1
            );
            println!(
                "run A: overshoot {:.4}, terminal max|x| {:.4e}, terminal max|th err| {:.4e}",
                cmp.metrics_a.overshoot,
                cmp.metrics_a.terminal_max_x,
                cmp.metrics_a.terminal_max_err
            );
            println!(
                "run B: overshoot {:.4}, terminal max|x| {:.4e}, terminal max|th err| {:.4e}",
                cmp.metrics_b.overshoot,
                cmp.metrics_b.terminal_max_x,
                cmp.metrics_b.terminal_max_err
            );
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(2)
        }
    }
}

/// Entry point shared by the binary and the integration tests. Returns the
/// process exit code.
pub fn cli_main(args: &[String]) -> u8 {
    let Some(command) = args.first() else {
        eprintln!("{USAGE}");
        return 1;
    };
    let rest = &args[1..];
    let handled = match command.as_str() {
        "run" => cmd_run(rest),
        "compare" => cmd_compare(rest),
        "list-presets" => {
            if !rest.is_empty() {
                Err("list-presets takes no arguments".into())
            } else {
                for (name, desc) in presets::listing() {
                    println!("{name:<8} {desc}");
                }
                Ok(0)
            }
        }
        "selftest" => {
            if !rest.is_empty() {
                Err("selftest takes no arguments".into())
            } else if selftest::run_selftest() {
                Ok(0)
            } else {
                Ok(3)
            }
        }
        other => Err(format!("unknown command `{other}`")),
    };
    match handled {
        Ok(code) => code,
        Err(usage_problem) => {
            eprintln!("error: {usage_problem}");
            eprintln!("{USAGE}");
            1
        }
    }
}
