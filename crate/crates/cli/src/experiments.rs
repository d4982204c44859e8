//! The named experiments. Each writes its CSV files into the output
//! directory and returns its checks together with a JSON report.

use std::f64::consts::PI;
use std::sync::Arc;

use serde_json::{json, Value};

use epigraph_lab::comparison::{
    self, growth_counterexample, random_pair_check, symmetry_defect, symmetry_test, uniqueness_test,
};
use epigraph_lab::estimates::{
    oscillation_fit, random_brandt_probes, refinement_stability, STABILITY_TOL,
};
use epigraph_lab::geometry::{section_measure, SectionParams};
use epigraph_lab::io::{self, fmt_f64, CsvTable};
use epigraph_lab::moving_plane::{cap_sweep, dn_field, hopf_slope_check};
use epigraph_lab::solver::closed_form::residual_study;
use epigraph_lab::solver::IterationKind;
use epigraph_lab::{
    build_grid, BoundaryTrace, DirichletProblem, DomainGrid, EpigraphKind, EpigraphSpec, Error,
    GeneralOpenSet, Nonlinearity, SolutionField, SolvePolicy,
};

use crate::config::{ExperimentConfig, ExperimentKind, MonotoneExpectation, SolutionSource};
use crate::error::{CliError, InModule};
use crate::record::{Check, OutputDir};
use crate::svg::{LinePlot, Series};

pub struct Outcome {
    pub checks: Vec<Check>,
    pub report: Value,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Domain with the profile file, if any, substituted into the epigraph.
fn domain(config: &ExperimentConfig) -> Result<GeneralOpenSet, CliError> {
    let mut d = config
        .domain
        .clone()
        .ok_or_else(|| CliError::validation("domain: required"))?;
    if let GeneralOpenSet::Epigraph { spec } = &mut d {
        if let Some(path) = &config.profile_csv {
            let profile = io::read_profile_csv(path).in_module("io")?;
            spec.kind = EpigraphKind::CustomSampled { profile };
        }
        let checked = if config.normalize_profile {
            EpigraphSpec::normalized(spec.dimension, spec.kind.clone())
        } else {
            EpigraphSpec::new(spec.dimension, spec.kind.clone()).map(|s| EpigraphSpec {
                shift: spec.shift,
                ..s
            })
        };
        *spec = checked.in_module("geometry")?;
    }
    Ok(d)
}

fn nonlinearity(config: &ExperimentConfig) -> Result<Nonlinearity, CliError> {
    if let Some(path) = &config.table_csv {
        return Ok(Nonlinearity::Table {
            table: io::read_table_csv(path).in_module("io")?,
        });
    }
    config
        .nonlinearity
        .clone()
        .ok_or_else(|| CliError::validation("nonlinearity: required"))
}

fn trace(config: &ExperimentConfig) -> BoundaryTrace {
    match config.trace {
        crate::config::TraceConfig::Zero => BoundaryTrace::zero(),
        crate::config::TraceConfig::Constant { value } => {
            BoundaryTrace::new(format!("constant {value}"), move |_| value)
        }
        crate::config::TraceConfig::ClosedForm { profile } => {
            BoundaryTrace::new(profile.tag(), move |x: &[f64]| profile.eval(x))
        }
    }
}

fn grid_with(
    config: &ExperimentConfig,
    set: &GeneralOpenSet,
    h: f64,
) -> Result<DomainGrid, CliError> {
    let g = config
        .grid
        .as_ref()
        .ok_or_else(|| CliError::validation("grid: required"))?;
    build_grid(set, &g.grid_box(), h).in_module("discretization")
}

fn policy(config: &ExperimentConfig) -> SolvePolicy {
    let s = config.solve.clone().unwrap_or_default();
    let base = match s.method {
        IterationKind::Newton => SolvePolicy::default(),
        IterationKind::Picard => SolvePolicy::picard(),
    };
    SolvePolicy {
        tol: config.tolerances.solve,
        linear_tol: config.tolerances.linear,
        damping: s.damping,
        max_iterations: s.max_iterations.unwrap_or(base.max_iterations),
        ..base
    }
}

/// The field under test at spacing `h`, with the nonlinearity it solves.
fn field(
    config: &ExperimentConfig,
    source: &SolutionSource,
    h: f64,
) -> Result<(SolutionField, Nonlinearity), CliError> {
    match source {
        SolutionSource::Solve => {
            let f = nonlinearity(config)?;
            let problem =
                DirichletProblem::new(grid_with(config, &domain(config)?, h)?, trace(config));
            let u = problem
                .solve_semilinear(&f, None, &policy(config))
                .in_module("solver")?;
            Ok((u, f))
        }
        SolutionSource::ClosedForm { profile } => {
            let set = match &config.domain {
                Some(_) => domain(config)?,
                None => profile.domain(),
            };
            let u = profile
                .sample(Arc::new(grid_with(config, &set, h)?))
                .in_module("solver")?;
            Ok((u, profile.nonlinearity()))
        }
    }
}

fn spacing(config: &ExperimentConfig) -> f64 {
    config.grid.as_ref().map(|g| g.h).unwrap_or(0.0)
}

pub fn execute(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    match config.experiment {
        ExperimentKind::Solve => solve(config, out),
        ExperimentKind::MovingPlane => moving_plane(config, out),
        ExperimentKind::ThresholdScan => threshold_scan(config, out),
        ExperimentKind::Uniqueness => uniqueness(config, out),
        ExperimentKind::Symmetry => symmetry(config, out),
        ExperimentKind::Section => section(config, out),
        ExperimentKind::Estimates => estimates(config, out),
        ExperimentKind::VerifyExamples => verify_examples(config, out),
    }
}

fn line_plot_of(u: &SolutionField, title: &str) -> Option<LinePlot> {
    if u.grid().dimension() != 1 {
        return None;
    }
    let points = u
        .grid()
        .interior()
        .iter()
        .zip(u.values())
        .map(|(n, v)| (n.position[0], *v))
        .collect();
    Some(LinePlot {
        title: title.to_string(),
        x_label: "x".into(),
        y_label: "u".into(),
        series: vec![Series {
            name: "u".into(),
            points,
        }],
        ..Default::default()
    })
}

fn solve(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let (u, f) = field(config, &SolutionSource::Solve, spacing(config))?;
    out.write_csv("field.csv", &io::field_table(&u))?;
    out.write_csv("grid.csv", &io::grid_table(u.grid()))?;
    if config.svg {
        if let Some(plot) = line_plot_of(&u, &format!("-u'' = {}(u)", f.tag())) {
            out.write_bytes("field.svg", plot.render().as_bytes())?;
        }
    }
    let tol = config.tolerances.solve;
    let checks = vec![Check::new(
        "residual",
        u.residual_norm <= tol,
        fmt_f64(u.residual_norm),
        format!("<= {tol:e}"),
    )];
    let report =
        json!({ "solution": to_value(&u.meta()), "max_abs": u.max_abs(), "nonlinearity": f.tag() });
    Ok(Outcome { checks, report })
}

fn moving_plane(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let mp = config
        .moving_plane
        .clone()
        .ok_or_else(|| CliError::validation("moving_plane: required"))?;
    let h = spacing(config);
    let (u, _) = field(config, &mp.solution, h)?;
    let spec = match &config.domain {
        Some(GeneralOpenSet::Epigraph { .. }) => match domain(config)? {
            GeneralOpenSet::Epigraph { spec } => spec,
            _ => unreachable!(),
        },
        _ => EpigraphSpec::half_space(u.grid().dimension().max(2)),
    };
    let lambdas = mp
        .lambdas
        .clone()
        .unwrap_or_else(|| mp.lambda_range.map(|r| r.values()).unwrap_or_default());
    let tol = config.tolerances.moving_plane;
    let report = cap_sweep(&u, &spec, &lambdas, tol).in_module("moving_plane")?;
    let hopf = mp
        .hopf_lambdas
        .iter()
        .map(|&l| hopf_slope_check(&u, l, tol))
        .collect::<Result<Vec<_>, _>>()
        .in_module("moving_plane")?;

    out.write_csv("caps.csv", &io::cap_table(&report))?;
    let n = u.grid().dimension();
    let mut dn = CsvTable::new((1..=n).map(|a| format!("x{a}")).chain(["dn_u".to_string()]));
    for (row, d) in dn_field(&u) {
        let mut r = u.grid().interior()[row].position.clone();
        r.push(d);
        dn.push_floats(&r);
    }
    out.write_csv("dn.csv", &dn)?;
    if !hopf.is_empty() {
        let mut t = CsvTable::new(
            ["lambda".to_string()]
                .into_iter()
                .chain((1..=n).map(|a| format!("x{a}")))
                .chain(["lhs".into(), "rhs".into()]),
        );
        for r in &hopf {
            for node in &r.nodes {
                let mut row = vec![r.lambda];
                row.extend(&node.position);
                row.extend([node.lhs, node.rhs]);
                t.push_floats(&row);
            }
        }
        out.write_csv("hopf.csv", &t)?;
    }
    if config.svg {
        let plot = LinePlot {
            title: "min over the cap of u_λ - u".into(),
            x_label: "λ".into(),
            y_label: "cap_min_diff".into(),
            series: vec![Series {
                name: "cap_min_diff".into(),
                points: report
                    .lambda_grid
                    .iter()
                    .copied()
                    .zip(report.cap_min_diff.iter().copied())
                    .collect(),
            }],
            hlines: vec![(-tol, "-tol".into())],
            ..Default::default()
        };
        out.write_bytes("caps.svg", plot.render().as_bytes())?;
    }

    let min_diff = report
        .cap_min_diff
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut checks = Vec::new();
    let caps = |checks: &mut Vec<Check>| {
        checks.push(Check::new(
            "caps_ordered",
            report.caps_ordered(),
            format!("min cap_min_diff = {}", fmt_f64(min_diff)),
            format!(">= -{tol:e} (+ interpolation bound)"),
        ))
    };
    match mp.expect {
        MonotoneExpectation::Monotone => caps(&mut checks),
        MonotoneExpectation::Strict => {
            caps(&mut checks);
            checks.push(Check::new(
                "dn_u_min_positive",
                report.dn_u_min > 0.0,
                fmt_f64(report.dn_u_min),
                "> 0",
            ));
            let bound = mp.hopf_constant * h * h;
            for r in &hopf {
                checks.push(Check::new(
                    format!("hopf_defect(λ={})", r.lambda),
                    r.max_defect <= bound,
                    fmt_f64(r.max_defect),
                    format!("<= {} h² = {bound:e}", mp.hopf_constant),
                ));
                checks.push(Check::new(
                    format!("hopf_slope_positive(λ={})", r.lambda),
                    r.strictly_positive,
                    fmt_f64(r.dn_u_min),
                    "> 0 on the plane",
                ));
            }
        }
        MonotoneExpectation::SignChange => {
            let count = report.sign_change_cells.len();
            checks.push(Check::new(
                "dn_u_sign_change",
                count > 0,
                format!("{count} nodes"),
                "> 0 nodes",
            ));
        }
    }
    if let Some(limit) = mp.flat_above_at_most {
        let observed = report
            .flat_above
            .map(fmt_f64)
            .unwrap_or_else(|| "none".into());
        checks.push(Check::new(
            "flat_region",
            report
                .flat_above
                .is_some_and(|f| f <= limit + h * (1.0 + 1e-9)),
            format!("dn_u = 0 above {observed}"),
            format!("flat above some height <= {limit} + h"),
        ));
    }
    let report = json!({
        "moving_plane": to_value(&report),
        "hopf": to_value(&hopf),
        "sign_change_count": report.sign_change_cells.len(),
        "solution": to_value(&u.meta()),
    });
    Ok(Outcome { checks, report })
}

fn threshold_scan(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let ts = config
        .threshold_scan
        .clone()
        .ok_or_else(|| CliError::validation("threshold_scan: required"))?;
    let widths = ts
        .widths
        .clone()
        .unwrap_or_else(|| ts.width_range.map(|r| r.values()).unwrap_or_default());
    let scan =
        comparison::threshold_scan(ts.lipschitz, &widths, ts.cells).in_module("comparison")?;
    let eps = scan.epsilon_bound.finite().unwrap_or(f64::INFINITY);
    let pair_widths: Vec<f64> = widths.iter().copied().filter(|w| *w <= eps).collect();
    let pairs = pair_widths
        .iter()
        .map(|&w| random_pair_check(w, ts.lipschitz, ts.pairs, config.seed, ts.pair_cells))
        .collect::<Result<Vec<_>, _>>()
        .in_module("comparison")?;

    out.write_csv("scan.csv", &io::scan_table(&scan))?;
    let mut pt = CsvTable::new([
        "width",
        "pairs",
        "hypothesis_all",
        "comparison_all",
        "min_gap",
    ]);
    for p in &pairs {
        pt.push(vec![
            fmt_f64(p.width),
            p.pairs.to_string(),
            p.hypothesis_all.to_string(),
            p.comparison_all.to_string(),
            fmt_f64(p.min_gap),
        ]);
    }
    out.write_csv("pairs.csv", &pt)?;
    if config.svg {
        let plot = LinePlot {
            title: "principal eigenvalue of the cross-section".into(),
            x_label: "S".into(),
            y_label: "λ₁".into(),
            log_y: true,
            series: vec![Series {
                name: "λ₁(S)".into(),
                points: scan.rows.iter().map(|r| (r.width, r.lambda1)).collect(),
            }],
            hlines: vec![(ts.lipschitz, "L".into())],
            ..Default::default()
        };
        out.write_bytes("scan.svg", plot.render().as_bytes())?;
    }

    let target = PI / ts.lipschitz.sqrt();
    let mut checks = Vec::new();
    let fw = scan.failure_width;
    checks.push(Check::new(
        "failure_width",
        fw.is_some_and(|w| (w - target).abs() <= ts.width_rel_tol * target),
        fw.map(fmt_f64).unwrap_or_else(|| "no crossing".into()),
        format!("π/√L = {target:.6} ± {:.0}%", 100.0 * ts.width_rel_tol),
    ));
    checks.push(Check::new(
        "sufficiency_gap",
        scan.sufficiency_gap_holds,
        format!("ε = {eps:.6}"),
        "ε < failure width",
    ));
    let all_ok = !pairs.is_empty() && pairs.iter().all(|p| p.hypothesis_all && p.comparison_all);
    checks.push(Check::new(
        "random_pairs_ordered",
        all_ok,
        format!("{} widths × {} pairs", pairs.len(), ts.pairs),
        "u <= v for every pair with S <= ε",
    ));
    let report = json!({
        "scan": to_value(&scan),
        "pairs": to_value(&pairs),
        "epsilon_bound": eps,
        "target_width": target,
        "width_rel_tol": ts.width_rel_tol,
    });
    Ok(Outcome { checks, report })
}

fn uniqueness(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let us = config.uniqueness.clone().unwrap_or_default();
    let f = nonlinearity(config)?;
    let grid = Arc::new(grid_with(config, &domain(config)?, spacing(config))?);
    let result = uniqueness_test(
        grid,
        &f,
        us.restarts,
        config.tolerances.uniqueness,
        config.seed,
        us.amplitude,
    );
    let report = match result {
        Err(Error::HypothesisViolated { section, threshold }) => {
            let checks = vec![Check::new(
                "hypothesis",
                false,
                format!("S = {section}"),
                format!("< {threshold}"),
            )];
            return Ok(Outcome {
                checks,
                report: json!({ "section": section, "threshold": threshold }),
            });
        }
        r => r.in_module("comparison")?,
    };
    let mut t = CsvTable::new(["seed", "converged", "max_abs", "iterations", "error"]);
    for r in &report.restarts {
        t.push(vec![
            r.seed.to_string(),
            r.converged.to_string(),
            r.max_abs.map(fmt_f64).unwrap_or_default(),
            r.iterations.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    out.write_csv("restarts.csv", &t)?;
    let worst = report
        .restarts
        .iter()
        .filter_map(|r| r.max_abs)
        .fold(0.0, f64::max);
    let converged = report.restarts.iter().filter(|r| r.converged).count();
    let checks = vec![Check::new(
        "all_restarts_vanish",
        report.comparison_holds,
        format!(
            "{converged}/{} converged, max ‖u‖∞ = {}",
            report.restarts.len(),
            fmt_f64(worst)
        ),
        format!("all ‖u‖∞ <= {:e}", config.tolerances.uniqueness),
    )];
    Ok(Outcome {
        checks,
        report: to_value(&report),
    })
}

fn symmetry(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let sy = config
        .symmetry
        .clone()
        .ok_or_else(|| CliError::validation("symmetry: required"))?;
    let f = nonlinearity(config)?;
    let problem = DirichletProblem::new(
        grid_with(config, &domain(config)?, spacing(config))?,
        trace(config),
    );
    let tol = config.tolerances.symmetry;
    let (u, report) =
        symmetry_test(&problem, &f, &sy.isometry, sy.buffer, tol).in_module("comparison")?;
    out.write_csv("field.csv", &io::field_table(&u))?;
    let mut checks = vec![Check::new(
        "symmetry_defect",
        report.comparison_holds,
        format!("{} over {} pairs", fmt_f64(report.defect), report.pairs),
        format!("<= {tol:e}"),
    )];
    let mut periodicity = None;
    if let Some(rho) = &sy.periodicity {
        let (defect, pairs) = symmetry_defect(&u, rho, sy.buffer).in_module("comparison")?;
        checks.push(Check::new(
            "periodicity_defect",
            defect <= sy.periodicity_tol && pairs > 0,
            format!("{} over {pairs} pairs", fmt_f64(defect)),
            format!("<= {:e}", sy.periodicity_tol),
        ));
        periodicity = Some(json!({ "isometry": to_value(rho), "defect": defect, "pairs": pairs }));
    }
    let mut exact_error = None;
    if let Some(cf) = sy.exact {
        let err = u
            .grid()
            .interior()
            .iter()
            .zip(u.values())
            .fold(0.0f64, |m, (n, v)| m.max((v - cf.eval(&n.position)).abs()));
        checks.push(Check::new(
            format!("matches_{}", cf.tag()),
            err <= sy.exact_tol,
            fmt_f64(err),
            format!("<= {:e}", sy.exact_tol),
        ));
        exact_error = Some(err);
    }
    let report = json!({
        "symmetry": to_value(&report),
        "periodicity": periodicity,
        "exact_error": exact_error,
        "solution": to_value(&u.meta()),
    });
    Ok(Outcome { checks, report })
}

fn section(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let se = config
        .section
        .clone()
        .ok_or_else(|| CliError::validation("section: required"))?;
    let set = domain(config)?;
    let probes: Vec<Vec<f64>> = match (&se.probes, &se.probe_range) {
        (Some(p), _) => p.clone(),
        (None, Some(r)) => r.values().into_iter().map(|t| vec![t]).collect(),
        _ => Vec::new(),
    };
    let params = SectionParams {
        line_resolution: se.line_resolution,
        window: se.window,
    };
    let mut checks = Vec::new();
    let report = match section_measure(&set, &se.direction, &probes, &params) {
        Err(Error::UnboundedSection { touching, window }) => {
            checks.push(Check::new(
                "bounded_section",
                se.expect_unbounded,
                format!("{touching} probe lines reach the window ±{window}"),
                if se.expect_unbounded {
                    "unbounded"
                } else {
                    "bounded"
                },
            ));
            json!({ "unbounded": true, "touching": touching, "window": window })
        }
        r => {
            let m = r.in_module("geometry")?;
            let dim = se.direction.len() - 1;
            let mut t = CsvTable::new(
                (1..=dim)
                    .map(|a| format!("p{a}"))
                    .chain(["measure".to_string()]),
            );
            for (p, v) in &m.per_line {
                let mut row = p.clone();
                row.push(*v);
                t.push_floats(&row);
            }
            out.write_csv("section.csv", &t)?;
            if se.expect_unbounded {
                checks.push(Check::new("bounded_section", false, "bounded", "unbounded"));
            }
            if let Some(limit) = se.expect_at_most {
                checks.push(Check::new(
                    "section_at_most",
                    m.value <= limit,
                    fmt_f64(m.value),
                    format!("<= {limit}"),
                ));
            }
            if let Some(v) = se.expect_value {
                checks.push(Check::new(
                    "section_value",
                    (m.value - v).abs() <= se.line_resolution,
                    fmt_f64(m.value),
                    format!("{v} ± {}", se.line_resolution),
                ));
            }
            json!({ "unbounded": false, "value": m.value, "direction": m.direction, "lines": m.per_line.len() })
        }
    };
    Ok(Outcome { checks, report })
}

fn estimates(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let es = config
        .estimates
        .clone()
        .ok_or_else(|| CliError::validation("estimates: required"))?;
    let h = spacing(config);
    let (u, f) = field(config, &es.solution, h)?;
    let probes = random_brandt_probes(&u, &f, es.brandt_probes, config.seed, es.max_delta)
        .in_module("estimates")?;
    let n = u.grid().dimension();
    let mut bt = CsvTable::new(
        (1..=n)
            .map(|a| format!("y{a}"))
            .chain(["delta", "lhs", "rhs", "slack", "holds"].map(String::from)),
    );
    for p in &probes {
        let mut row: Vec<String> = p.center.iter().map(|&v| fmt_f64(v)).collect();
        row.extend([
            fmt_f64(p.delta),
            fmt_f64(p.lhs),
            fmt_f64(p.rhs),
            fmt_f64(p.slack),
            p.holds.to_string(),
        ]);
        bt.push(row);
    }
    out.write_csv("brandt.csv", &bt)?;
    let held = probes.iter().filter(|p| p.holds).count();
    let min_slack = probes.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min);
    let mut checks = vec![Check::new(
        "brandt_bound",
        held == probes.len(),
        format!(
            "{held}/{} probes, min slack {}",
            probes.len(),
            fmt_f64(min_slack)
        ),
        "all probes within C h²",
    )];

    let mut fits = Vec::new();
    if !es.oscillation_points.is_empty() {
        let (fine, _) = field(config, &es.solution, h / 2.0)?;
        let mut ot = CsvTable::new(["point", "h", "alpha", "c"]);
        for (k, x0) in es.oscillation_points.iter().enumerate() {
            let coarse_fit = oscillation_fit(&u, x0, &es.radii).in_module("estimates")?;
            let fine_fit = oscillation_fit(&fine, x0, &es.radii).in_module("estimates")?;
            let (change, stable) = refinement_stability(&coarse_fit, &fine_fit);
            for (fit, hh) in [(&coarse_fit, h), (&fine_fit, h / 2.0)] {
                ot.push(vec![
                    k.to_string(),
                    fmt_f64(hh),
                    fmt_f64(fit.alpha_fit),
                    fmt_f64(fit.c_fit),
                ]);
            }
            checks.push(Check::new(
                format!("oscillation_exponent({x0:?})"),
                fine_fit.alpha_fit > 0.0 && stable,
                format!(
                    "α = {:.4} (h), {:.4} (h/2), change {:.1}%",
                    coarse_fit.alpha_fit,
                    fine_fit.alpha_fit,
                    100.0 * change
                ),
                format!("α > 0, change <= {:.0}%", 100.0 * STABILITY_TOL),
            ));
            fits.push(json!({ "point": x0, "coarse": to_value(&coarse_fit), "fine": to_value(&fine_fit), "change": change }));
        }
        out.write_csv("oscillation.csv", &ot)?;
    }
    let report = json!({
        "brandt": { "probes": probes.len(), "held": held, "min_slack": min_slack },
        "oscillation": fits,
        "solution": to_value(&u.meta()),
    });
    Ok(Outcome { checks, report })
}

fn verify_examples(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let ve = config.verify_examples.clone().unwrap_or_default();
    let mut checks = Vec::new();
    let mut studies = Vec::new();
    let mut table = CsvTable::new(["profile", "h", "residual", "constant"]);
    for cf in &ve.profiles {
        let (lo, hi) = cf.window();
        let cells: Vec<usize> =
            ve.h.iter()
                .map(|h| ((hi - lo) / h).round() as usize)
                .collect();
        let s = residual_study(*cf, &cells).in_module("solver")?;
        for k in 0..s.h.len() {
            table.push(vec![
                cf.tag().into(),
                fmt_f64(s.h[k]),
                fmt_f64(s.residual[k]),
                fmt_f64(s.constant[k]),
            ]);
        }
        checks.push(Check::new(
            format!("{}_order", cf.tag()),
            s.min_order() >= ve.min_order,
            format!("{:.3}", s.min_order()),
            format!(">= {}", ve.min_order),
        ));
        checks.push(Check::new(
            format!("{}_residual", cf.tag()),
            s.max_constant() <= ve.residual_constant,
            format!("max residual / h² = {:.4}", s.max_constant()),
            format!("<= {}", ve.residual_constant),
        ));
        studies.push(s);
    }
    out.write_csv("residuals.csv", &table)?;
    if config.svg {
        let plot = LinePlot {
            title: "sampled closed-form residuals".into(),
            x_label: "h".into(),
            y_label: "max residual".into(),
            log_x: true,
            log_y: true,
            series: studies
                .iter()
                .map(|s| Series {
                    name: s.profile.tag().into(),
                    points: s
                        .h
                        .iter()
                        .copied()
                        .zip(s.residual.iter().copied())
                        .collect(),
                })
                .collect(),
            ..Default::default()
        };
        out.write_bytes("residuals.svg", plot.render().as_bytes())?;
    }
    let mut growth = None;
    if let Some(g) = &ve.growth {
        let r = growth_counterexample(g.m, g.cells, g.x_max).in_module("comparison")?;
        checks.push(Check::new(
            "growth_zero_trace",
            r.boundary_trace_max == 0.0,
            fmt_f64(r.boundary_trace_max),
            "= 0",
        ));
        checks.push(Check::new(
            "growth_nonzero_interior",
            r.interior_max > 0.0,
            fmt_f64(r.interior_max),
            "> 0",
        ));
        checks.push(Check::new(
            "growth_harmonic_residual",
            r.residual_constant <= g.residual_constant,
            format!("residual / (h² cosh(m x_max)) = {:.4}", r.residual_constant),
            format!("<= {}", g.residual_constant),
        ));
        checks.push(Check::new(
            "growth_slope",
            r.slope_relative_error <= g.slope_rel_tol,
            format!(
                "{:.5} (error {:.2}%)",
                r.growth_slope,
                100.0 * r.slope_relative_error
            ),
            format!("m = {} ± {:.0}%", g.m, 100.0 * g.slope_rel_tol),
        ));
        growth = Some(r);
    }
    let report = json!({ "studies": to_value(&studies), "growth": to_value(&growth) });
    Ok(Outcome { checks, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picard_policy_keeps_its_iteration_budget() {
        let mut c = ExperimentConfig::from_json(
            r#"{"experiment":"solve","output_dir":"o","solve":{"method":"picard"}}"#,
        )
        .unwrap();
        assert_eq!(policy(&c).max_iterations, 2000);
        c.solve.as_mut().unwrap().max_iterations = Some(7);
        assert_eq!(policy(&c).max_iterations, 7);
    }

    #[test]
    fn closed_form_trace_is_exact_on_faces() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment":"solve","output_dir":"o","trace":{"kind":"closed_form","profile":{"kind":"torsion_strip"}}}"#,
        )
        .unwrap();
        assert_eq!(trace(&c).eval(&[5.0, 0.0]), 0.5);
    }
}
