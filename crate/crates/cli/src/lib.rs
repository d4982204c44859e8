//! Config-driven experiment runner behind the `epigraph-lab` binary.
//!
//! A run validates its configuration, executes one named experiment, and
//! leaves a directory with CSV data, a JSON summary, optional SVG plots and a
//! `run.json` record carrying the config hash and a checksummed manifest.

pub mod config;
pub mod error;
pub mod experiments;
pub mod record;
pub mod svg;

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use epigraph_lab::io::CsvTable;
use epigraph_lab::{EpigraphKind, GeneralOpenSet, Nonlinearity};

use config::{ExperimentConfig, ExperimentKind};
use error::CliError;
use record::{now_ms, Check, OutputDir, RunRecord, Status, RUN_RECORD, SUMMARY};

pub const TOOL: &str = "epigraph-lab";
pub const THREADS_ENV: &str = "EPIGRAPH_LAB_THREADS";

/// Runs the experiment described by the config file and returns its record.
/// Validation errors surface as `Err` before anything is written.
pub fn run(config_path: &Path) -> Result<RunRecord, CliError> {
    let config = ExperimentConfig::load(config_path)?;
    config.validate()?;
    run_config(&config)
}

pub fn run_config(config: &ExperimentConfig) -> Result<RunRecord, CliError> {
    let started = now_ms();
    let mut out = OutputDir::create(&config.output_dir)?;
    out.write_json("config.json", config)?;

    let result = experiments::execute(config, &mut out);
    let (status, checks, error, summary) = match result {
        Ok(outcome) => {
            let status = if outcome.checks.iter().all(|c| c.passed) {
                Status::Passed
            } else {
                Status::Failed
            };
            (status, outcome.checks, None, outcome.report)
        }
        Err(e) => {
            let status = match e {
                CliError::Validation(_) => Status::Invalid,
                _ => Status::NumericalFailure,
            };
            let module = match &e {
                CliError::Numerical { module, .. } => *module,
                CliError::Validation(_) => "config",
                CliError::Io(_) => "io",
            };
            let report = json!({ "failure": { "module": module, "message": e.to_string() } });
            (status, Vec::new(), Some(e.to_string()), report)
        }
    };
    let summary = json!({
        "experiment": config.experiment.name(),
        "config_hash": config.hash(),
        "status": status,
        "checks": checks,
        "report": summary,
    });
    out.write_json(SUMMARY, &summary)?;

    let record = RunRecord {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: config.experiment.name().into(),
        config_hash: config.hash(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        status,
        exit_code: status.exit_code(),
        checks,
        error,
        manifest: out.manifest().to_vec(),
    };
    out.write_json(RUN_RECORD, &record)?;
    Ok(record)
}

fn read_summary(dir: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(dir.join(SUMMARY))
        .map_err(|e| CliError::validation(format!("{}: {e}", dir.join(SUMMARY).display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{SUMMARY}: {e}")))
}

/// Failure width from the stored scan table: the first width whose
/// principal eigenvalue drops to `L` or below.
fn scan_failure_width(dir: &Path, lipschitz: f64) -> Option<f64> {
    let table = CsvTable::read(&dir.join("scan.csv")).ok()?;
    let w = table.column("width").ok()?;
    let l = table.column("lambda1").ok()?;
    w.into_iter()
        .zip(l)
        .find(|(_, l)| *l <= lipschitz)
        .map(|(w, _)| w)
}

/// Human-readable summary of a finished run. Fails with a validation error
/// when the record is missing or the manifest does not match the files.
pub fn report(dir: &Path, mut w: impl Write) -> Result<i32, CliError> {
    let record = RunRecord::load(dir)?;
    let problems = record.manifest_problems(dir);
    if record.manifest.is_empty() || !problems.is_empty() {
        let detail = if problems.is_empty() {
            "empty manifest".to_string()
        } else {
            problems.join(", ")
        };
        return Err(CliError::validation(format!("{}: {detail}", dir.display())));
    }
    let summary = read_summary(dir)?;
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(
        w,
        "{} {} | experiment {} | config {}",
        record.tool,
        record.version,
        record.experiment,
        &record.config_hash[..12]
    )
    .map_err(io)?;
    writeln!(w, "status: {:?} (exit {})", record.status, record.exit_code).map_err(io)?;
    if let Some(e) = &record.error {
        writeln!(w, "error: {e}").map_err(io)?;
    }
    let width = record
        .checks
        .iter()
        .map(|c| c.name.chars().count())
        .max()
        .unwrap_or(0);
    for Check {
        name,
        passed,
        observed,
        expected,
    } in &record.checks
    {
        let mark = if *passed { "PASS" } else { "FAIL" };
        writeln!(
            w,
            "{mark}  {name:<width$}  observed {observed}  |  expected {expected}"
        )
        .map_err(io)?;
    }
    let report = &summary["report"];
    match record.experiment.as_str() {
        "threshold_scan" => {
            let eps = report["epsilon_bound"].as_f64();
            let lipschitz = report["scan"]["lipschitz"].as_f64().unwrap_or(f64::NAN);
            let target = report["target_width"].as_f64().unwrap_or(f64::NAN);
            let tol = report["width_rel_tol"].as_f64().unwrap_or(f64::NAN) * target;
            let eps = eps.map(|e| format!("{e:.4}")).unwrap_or_else(|| "∞".into());
            match scan_failure_width(dir, lipschitz) {
                Some(fw) => writeln!(w, "ε_bound = {eps}, failure width = {fw:.2} ± {tol:.2}"),
                None => writeln!(w, "ε_bound = {eps}, failure width not reached in the scan"),
            }
            .map_err(io)?;
        }
        "moving_plane" => {
            let n = report["sign_change_count"].as_u64().unwrap_or(0);
            writeln!(w, "∂_N u sign changes at {n} nodes").map_err(io)?;
        }
        _ => {}
    }
    writeln!(
        w,
        "files: {}",
        record
            .manifest
            .iter()
            .map(|m| m.file.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    )
    .map_err(io)?;
    Ok(record.exit_code)
}

/// Experiments, domains, nonlinearities and closed forms accepted in configs.
pub fn catalog() -> String {
    use epigraph_lab::solver::closed_form::ClosedForm;
    let mut s = String::from("experiments:\n");
    for k in ExperimentKind::ALL {
        s.push_str(&format!("  {:<16} {}\n", k.name(), k.describe()));
    }
    s.push_str("domains (domain.kind):\n");
    let domains = [
        (
            GeneralOpenSet::Strip { lo: 0.0, hi: 1.0 }.tag(),
            "lo < x_N < hi; params lo, hi",
        ),
        (
            GeneralOpenSet::Omega1.tag(),
            "unit strip with two diagonal arms of shrinking width",
        ),
        (
            GeneralOpenSet::Omega3.tag(),
            "0 < x_2 < x_1², unbounded sections",
        ),
        (GeneralOpenSet::Orthant.tag(), "all coordinates positive"),
        ("revolution", "|x'| < φ(x_1); params profile"),
        ("ball", "params center, radius"),
        (
            "epigraph",
            "x_N > g(x') + shift; params spec { dimension, kind, shift }",
        ),
    ];
    for (tag, d) in domains {
        s.push_str(&format!("  {tag:<20} {d}\n"));
    }
    s.push_str("epigraph profiles (spec.kind.kind):\n");
    for (k, d) in [
        (EpigraphKind::HalfSpace, "g = 0"),
        (
            EpigraphKind::LipschitzG1,
            "two arcs of radius 2 meeting in a cusp at 0",
        ),
        (EpigraphKind::LipschitzG2, "g1 plus a ramp (x - 6)^+"),
        (
            EpigraphKind::Weierstrass {
                b: 3,
                alpha: 0.5,
                tol: 1e-12,
            },
            "lacunary cosine series; params b, alpha, tol",
        ),
        (EpigraphKind::CoerciveQuadratic, "g = |x'|²"),
        (EpigraphKind::ExpX1, "g = exp(x_1)"),
    ] {
        s.push_str(&format!("  {:<20} {d}\n", k.tag()));
    }
    s.push_str(&format!(
        "  {:<20} {}\n",
        "custom_sampled", "piecewise linear g from profile_csv"
    ));
    s.push_str("nonlinearities (nonlinearity.kind):\n");
    for (f, d) in [
        (Nonlinearity::Constant { value: 1.0 }, "f = value"),
        (Nonlinearity::Linear { slope: 1.0 }, "f = slope t"),
        (Nonlinearity::AllenCahn, "f = t - t³"),
        (
            Nonlinearity::Power { exponent: 3.0 },
            "f = sign(t) |t|^exponent",
        ),
        (
            Nonlinearity::ClampedQuartic,
            "12 sqrt(1 - t) on [0, 1], non-Lipschitz at 1",
        ),
        (
            Nonlinearity::QuarticComposite,
            "sign-changing profile with a flat top",
        ),
    ] {
        s.push_str(&format!("  {:<20} {d}\n", f.tag()));
    }
    s.push_str(&format!(
        "  {:<20} {}\n",
        "custom_table", "piecewise linear f from table_csv"
    ));
    s.push_str("closed forms (profile.kind):\n");
    for cf in [
        ClosedForm::ClampedQuartic,
        ClosedForm::QuarticComposite,
        ClosedForm::Tanh,
        ClosedForm::TorsionStrip,
    ] {
        let (lo, hi) = cf.window();
        s.push_str(&format!(
            "  {:<20} solves f = {} on x_N in [{lo}, {hi}]\n",
            cf.tag(),
            cf.nonlinearity().tag()
        ));
    }
    s
}

/// Worker count from the environment, if set. Invalid values are validation
/// errors rather than silently ignored.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::validation(format!(
                "{THREADS_ENV}: expected a positive integer (got {v:?})"
            ))),
        },
    }
}
