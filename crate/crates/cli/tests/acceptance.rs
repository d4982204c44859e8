//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{E, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use epigraph_lab::discretization::{assemble_laplacian, build_grid, GridBox};
use epigraph_lab::geometry::omega1_halfwidth;
use epigraph_lab::io::CsvTable;
use epigraph_lab::nonlinearity::{epsilon_bounded, epsilon_growth, gamma_max, growth_lower_bound};
use epigraph_lab::solver::closed_form;
use epigraph_lab::solver::solve_linear;
use epigraph_lab::{EpigraphKind, EpigraphSpec, GeneralOpenSet};
use epigraph_lab_cli::config::{ExperimentConfig, SolutionSource};
use epigraph_lab_cli::record::{Check, RunRecord, Status};
use epigraph_lab_cli::run_config;

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

struct Runs {
    tmp: tempfile::TempDir,
}

impl Runs {
    fn config(&self, name: &str) -> ExperimentConfig {
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("configs")
            .join(format!("{name}.json"));
        let mut c = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        c.output_dir = self.tmp.path().join(name);
        c
    }

    fn run(&self, mut config: ExperimentConfig, tag: &str) -> (RunRecord, PathBuf) {
        config.output_dir = self.tmp.path().join(tag);
        config.validate().unwrap_or_else(|e| panic!("{tag}: {e}"));
        let record = run_config(&config).unwrap_or_else(|e| panic!("{tag}: {e}"));
        (record, config.output_dir)
    }

    fn shipped(&self, name: &str) -> (RunRecord, PathBuf) {
        self.run(self.config(name), name)
    }
}

fn failed(record: &RunRecord, filter: impl Fn(&Check) -> bool) -> Vec<String> {
    let mut out: Vec<String> = record
        .checks
        .iter()
        .filter(|c| filter(c) && !c.passed)
        .map(|c| format!("{}: {} (expected {})", c.name, c.observed, c.expected))
        .collect();
    if record.status == Status::NumericalFailure || record.status == Status::Invalid {
        out.push(record.error.clone().unwrap_or_default());
    }
    out
}

fn observed<'a>(record: &'a RunRecord, name: &str) -> &'a str {
    record
        .checks
        .iter()
        .find(|c| c.name == name)
        .map(|c| c.observed.as_str())
        .unwrap_or("?")
}

fn verdict(problems: Vec<String>, detail: String) -> Verdict {
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(problems.join("; "))
    }
}

fn closed_form_residuals(runs: &Runs) -> Verdict {
    let mut c = runs.config("verify_examples");
    c.verify_examples.as_mut().unwrap().growth = None;
    let (r, _) = runs.run(c, "c1");
    let detail = format!(
        "orders {} / {}, {} / {}",
        observed(&r, "clamped_quartic_order"),
        observed(&r, "quartic_composite_order"),
        observed(&r, "clamped_quartic_residual"),
        observed(&r, "quartic_composite_residual"),
    );
    verdict(failed(&r, |_| true), detail)
}

fn monotonicity_sharpness(runs: &Runs) -> Verdict {
    let (a, dir) = runs.shipped("monotone_clamped_quartic");
    let (b, _) = runs.shipped("sign_change_quartic_composite");
    let mut problems = failed(&a, |_| true);
    problems.extend(failed(&b, |_| true));
    let caps = CsvTable::read(&dir.join("caps.csv"))
        .unwrap()
        .column("cap_min_diff")
        .unwrap();
    let worst = caps.iter().copied().fold(f64::INFINITY, f64::min);
    if worst < -1e-10 {
        problems.push(format!("cap_min_diff {worst:e} < -1e-10"));
    }
    verdict(
        problems,
        format!(
            "min cap_min_diff {worst:e}, {}, sign changes {}",
            observed(&a, "flat_region"),
            observed(&b, "dn_u_sign_change")
        ),
    )
}

fn strict_monotonicity(runs: &Runs) -> Verdict {
    let (r, _) = runs.shipped("strict_tanh");
    let hopf: Vec<&str> = r
        .checks
        .iter()
        .filter(|c| c.name.starts_with("hopf_defect"))
        .map(|c| c.observed.as_str())
        .collect();
    verdict(
        failed(&r, |_| true),
        format!(
            "dn_u_min {}, Hopf defects {}",
            observed(&r, "dn_u_min_positive"),
            hopf.join(", ")
        ),
    )
}

fn threshold_scan(runs: &Runs) -> Verdict {
    let (r, _) = runs.shipped("threshold_scan");
    verdict(
        failed(&r, |_| true),
        format!(
            "failure width {}, pairs {}",
            observed(&r, "failure_width"),
            observed(&r, "random_pairs_ordered")
        ),
    )
}

fn uniqueness(runs: &Runs) -> Verdict {
    let (r, _) = runs.shipped("uniqueness");
    verdict(
        failed(&r, |_| true),
        observed(&r, "all_restarts_vanish").to_string(),
    )
}

fn torsion_symmetry(runs: &Runs) -> Verdict {
    let (a, _) = runs.shipped("symmetry_torsion");
    let (b, _) = runs.shipped("symmetry_revolution");
    let mut problems = failed(&a, |_| true);
    problems.extend(failed(&b, |_| true));
    verdict(
        problems,
        format!(
            "strip error {}, strip defect {}, revolution defect {}, periodicity {}",
            observed(&a, "matches_torsion_strip"),
            observed(&a, "symmetry_defect"),
            observed(&b, "symmetry_defect"),
            observed(&b, "periodicity_defect")
        ),
    )
}

/// Measure of `(-1, 1) ∪ (a - w, a + w) ∪ (-a - w, -a + w)` on the vertical
/// line through `x`, with `a = |x|` and `w` the band half-width.
fn omega1_union_oracle(x: f64) -> f64 {
    let (a, w) = (x.abs(), omega1_halfwidth(x));
    let mut iv = [(-1.0, 1.0), (a - w, a + w), (-a - w, -a + w)];
    iv.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut total, mut cur) = (0.0, iv[0]);
    for &(lo, hi) in &iv[1..] {
        if lo <= cur.1 {
            cur.1 = cur.1.max(hi);
        } else {
            total += cur.1 - cur.0;
            cur = (lo, hi);
        }
    }
    total + cur.1 - cur.0
}

fn section_measures(runs: &Runs) -> Verdict {
    let (s, _) = runs.shipped("section_strip");
    let (o1, dir) = runs.shipped("section_omega1");
    let (o3, _) = runs.shipped("section_omega3");
    let mut problems = failed(&s, |_| true);
    problems.extend(failed(&o1, |_| true));
    problems.extend(failed(&o3, |_| true));
    let t = CsvTable::read(&dir.join("section.csv")).unwrap();
    let (p, m) = (t.column("p1").unwrap(), t.column("measure").unwrap());
    let worst = p
        .iter()
        .zip(&m)
        .map(|(x, v)| (v - omega1_union_oracle(*x)).abs())
        .fold(0.0, f64::max);
    if worst > 1e-6 {
        problems.push(format!("Ω₁ per-line deviation {worst:e} > 1e-6"));
    }
    verdict(
        problems,
        format!(
            "strip {}, Ω₁ {} (per-line deviation {worst:.1e} over {} lines), Ω₃ {}",
            observed(&s, "section_value"),
            observed(&o1, "section_at_most"),
            p.len(),
            observed(&o3, "bounded_section")
        ),
    )
}

fn growth_counterexample(runs: &Runs) -> Verdict {
    let (r, _) = runs.shipped("verify_examples");
    verdict(
        failed(&r, |c| c.name.starts_with("growth")),
        format!(
            "trace {}, interior {}, {}, slope {}",
            observed(&r, "growth_zero_trace"),
            observed(&r, "growth_nonzero_interior"),
            observed(&r, "growth_harmonic_residual"),
            observed(&r, "growth_slope")
        ),
    )
}

fn thresholds() -> Verdict {
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let h1 = ((E - 1.0) / 1.0f64).sqrt();
    let cases = [
        (
            "epsilon_bounded(1)",
            epsilon_bounded(1.0).unwrap().finite().unwrap(),
            PI / 2f64.sqrt(),
        ),
        (
            "epsilon_bounded(π²/2)",
            epsilon_bounded(PI * PI / 2.0).unwrap().finite().unwrap(),
            1.0,
        ),
        (
            "epsilon_growth(1, 0)",
            epsilon_growth(1.0, 0.0).unwrap().finite().unwrap(),
            PI / 2f64.sqrt(),
        ),
        (
            "epsilon_growth(0, 1)",
            epsilon_growth(0.0, 1.0).unwrap().finite().unwrap(),
            PI / (16.0 * (E - 1.0)).sqrt(),
        ),
        (
            "gamma_max(π)",
            gamma_max(PI).unwrap(),
            1.0 / (4.0 * (E - 1.0).sqrt()),
        ),
        (
            "gamma_max(1)",
            gamma_max(1.0).unwrap(),
            PI / (4.0 * (E - 1.0).sqrt()),
        ),
        (
            "growth_lower_bound(1, 1, 1, 1 + 2h)",
            growth_lower_bound(1.0, 1.0, 1.0, 1.0 + 2.0 * h1).unwrap(),
            E,
        ),
    ];
    let problems: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| rel(*got, *want) > 1e-9)
        .map(|(name, got, want)| format!("{name} = {got} vs {want}"))
        .collect();
    let worst = cases
        .iter()
        .map(|(_, g, w)| rel(*g, *w))
        .fold(0.0, f64::max);
    verdict(
        problems,
        format!("{} values, max relative error {worst:.1e}", cases.len()),
    )
}

fn estimates(runs: &Runs) -> Verdict {
    let (tanh, _) = runs.shipped("estimates_tanh");
    let mut problems = failed(&tanh, |_| true);
    let mut brandt = vec![format!("tanh {}", observed(&tanh, "brandt_bound"))];
    for (profile, lo, hi, tag) in [
        (
            closed_form::ClosedForm::TorsionStrip,
            [-2.0, -1.0],
            [2.0, 1.0],
            "torsion",
        ),
        (
            closed_form::ClosedForm::ClampedQuartic,
            [0.0, 0.0],
            [4.0, 4.0],
            "clamped_quartic",
        ),
    ] {
        let mut c = runs.config("estimates_tanh");
        let g = c.grid.as_mut().unwrap();
        g.lo = lo.to_vec();
        g.hi = hi.to_vec();
        let e = c.estimates.as_mut().unwrap();
        e.solution = SolutionSource::ClosedForm { profile };
        e.max_delta = 0.75;
        e.oscillation_points.clear();
        let (r, _) = runs.run(c, tag);
        problems.extend(failed(&r, |_| true));
        brandt.push(format!("{tag} {}", observed(&r, "brandt_bound")));
    }
    let alphas: Vec<&str> = tanh
        .checks
        .iter()
        .filter(|c| c.name.starts_with("oscillation"))
        .map(|c| c.observed.split(", change").next().unwrap_or(""))
        .collect();
    verdict(
        problems,
        format!("{}; {}", brandt.join("; "), alphas.join("; ")),
    )
}

fn determinism_and_oracle(runs: &Runs) -> Verdict {
    let mut problems = Vec::new();
    for (name, files) in [
        ("threshold_scan", &["scan.csv", "pairs.csv"][..]),
        ("uniqueness", &["restarts.csv"][..]),
    ] {
        let (_, a) = runs.run(runs.config(name), &format!("{name}_a"));
        let (_, b) = runs.run(runs.config(name), &format!("{name}_b"));
        for f in files {
            if fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).unwrap() {
                problems.push(format!("{name}/{f} differs"));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g1 = GeneralOpenSet::Epigraph {
        spec: EpigraphSpec::new(2, EpigraphKind::LipschitzG1).unwrap(),
    };
    let instances = [
        (
            GeneralOpenSet::Strip { lo: 0.0, hi: 1.0 },
            GridBox::new(vec![0.0], vec![1.0]),
            1.0 / 199.0,
        ),
        (
            GeneralOpenSet::Ball {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            GridBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]),
            2.0 / 13.0,
        ),
        (
            GeneralOpenSet::Omega1,
            GridBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]),
            0.25,
        ),
        (g1, GridBox::new(vec![-3.0, 0.0], vec![3.0, 2.0]), 0.25),
    ];
    let mut worst = 0.0f64;
    let mut sizes = Vec::new();
    for (set, bbox, h) in instances {
        let grid = build_grid(&set, &bbox, h).unwrap();
        let n = grid.n_interior();
        sizes.push(n);
        if n > 200 {
            problems.push(format!("{} instance has {n} unknowns", set.tag()));
            continue;
        }
        let op = assemble_laplacian(&grid);
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = solve_linear(&op, &rhs, 1e-13).unwrap().x;
        let dense = op.to_dense();
        let a = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
        let oracle = a.lu().solve(&DVector::from_vec(rhs)).unwrap();
        let err = x
            .iter()
            .zip(oracle.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err);
    }
    if worst > 1e-10 {
        problems.push(format!("dense disagreement {worst:e}"));
    }
    verdict(
        problems,
        format!("CSVs identical; dense agreement {worst:.1e} on sizes {sizes:?}"),
    )
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|_| {}));
    let runs = Runs {
        tmp: tempfile::tempdir().unwrap(),
    };
    let criteria: [Criterion; 11] = [
        (
            "closed-form residuals",
            Box::new(|| closed_form_residuals(&runs)),
        ),
        (
            "monotonicity sharpness",
            Box::new(|| monotonicity_sharpness(&runs)),
        ),
        (
            "strict monotonicity",
            Box::new(|| strict_monotonicity(&runs)),
        ),
        ("threshold scan", Box::new(|| threshold_scan(&runs))),
        ("uniqueness", Box::new(|| uniqueness(&runs))),
        ("torsion symmetry", Box::new(|| torsion_symmetry(&runs))),
        ("section measures", Box::new(|| section_measures(&runs))),
        (
            "growth counterexample",
            Box::new(|| growth_counterexample(&runs)),
        ),
        ("thresholds", Box::new(thresholds)),
        ("estimates", Box::new(|| estimates(&runs))),
        (
            "determinism and dense oracle",
            Box::new(|| determinism_and_oracle(&runs)),
        ),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result =
            std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)).unwrap_or_else(|p| {
                Err(p
                    .downcast_ref::<String>()
                    .cloned()
                    .unwrap_or_else(|| "panicked".into()))
            });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {:>2}. {name} ({secs:.1}s): {detail}", k + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL  {:>2}. {name} ({secs:.1}s): {why}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
