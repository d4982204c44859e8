use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::discretization::{build_grid, GridBox};
use crate::geometry::GeneralOpenSet;

fn strip_1d(width: f64, n: usize) -> DomainGrid {
    let h = width / n as f64;
    build_grid(
        &GeneralOpenSet::Strip { lo: 0.0, hi: width },
        &GridBox::new(vec![0.0], vec![width]),
        h,
    )
    .unwrap()
}

fn disk(h: f64) -> DomainGrid {
    let ball = GeneralOpenSet::Ball {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    build_grid(&ball, &GridBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]), h).unwrap()
}

fn discrete_strip_eigenvalue(width: f64, h: f64) -> f64 {
    2.0 / (h * h) * (1.0 - (PI * h / width).cos())
}

#[test]
fn torsion_on_unit_strip_is_exact() {
    let problem = DirichletProblem::homogeneous(strip_1d(1.0, 16));
    let rhs = vec![1.0; problem.operator().dim()];
    let u = problem.solve_linear(&rhs, 1e-14).unwrap();
    let exact = problem.grid().sample(|x| x[0] * (1.0 - x[0]) / 2.0);
    let err = u
        .values()
        .iter()
        .zip(&exact)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-13, "err = {err}");
    assert!((u.max_abs() - 0.125).abs() < 1e-13);
    assert_eq!(u.method, Method::Linear);
}

#[test]
fn zero_rhs_gives_zero() {
    let problem = DirichletProblem::homogeneous(disk(0.25));
    let u = problem
        .solve_linear(&vec![0.0; problem.operator().dim()], 1e-10)
        .unwrap();
    assert!(u.values().iter().all(|&v| v == 0.0));
}

#[test]
fn disk_torsion_matches_quadratic() {
    let problem = DirichletProblem::homogeneous(disk(1.0 / 16.0));
    let rhs = vec![1.0; problem.operator().dim()];
    let u = problem.solve_linear(&rhs, 1e-14).unwrap();
    let exact = problem
        .grid()
        .sample(|x| (1.0 - x[0] * x[0] - x[1] * x[1]) / 4.0);
    let err = u
        .values()
        .iter()
        .zip(&exact)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-10, "err = {err}");
    let centre = problem.grid().lattice_index(&[16, 16]);
    assert!((u.lattice()[centre] - 0.25).abs() < 1e-10);
}

#[test]
fn agrees_with_dense_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = disk(2.0 / 13.0);
    let n = grid.n_interior();
    assert!(n <= 200 && n > 50, "n = {n}");
    let op = assemble_laplacian(&grid);
    let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = solve_linear(&op, &rhs, 1e-15).unwrap().x;
    let dense = op.to_dense();
    let a = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
    let oracle = a.lu().solve(&DVector::from_vec(rhs)).unwrap();
    let err = x
        .iter()
        .zip(oracle.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 1e-10, "err = {err}");
}

#[test]
fn strip_eigenvalues_match_discrete_oracle() {
    for (width, n) in [(PI, 64), (2.0, 128)] {
        let grid = strip_1d(width, n);
        let pair = principal_eigenpair(&assemble_laplacian(&grid), 1e-12).unwrap();
        let oracle = discrete_strip_eigenvalue(width, width / n as f64);
        assert!(
            (pair.lambda1 - oracle).abs() < 1e-8 * oracle,
            "{} vs {oracle}",
            pair.lambda1
        );
        let continuum = (PI / width).powi(2);
        assert!((pair.lambda1 - continuum).abs() < 0.02 * continuum);
        assert!(pair.phi1.iter().all(|&p| p > 0.0));
        let top = pair.phi1.iter().copied().fold(f64::MIN, f64::max);
        assert!((top - 1.0).abs() < 1e-15);
        assert!(pair.residual <= 1e-8 * pair.lambda1);
    }
}

#[test]
fn disk_eigenvalue_near_bessel_zero() {
    let j0 = 2.404_825_557_695_773_f64;
    let pair = principal_eigenpair(&assemble_laplacian(&disk(1.0 / 32.0)), 1e-10).unwrap();
    assert!(
        (pair.lambda1 - j0 * j0).abs() < 0.02 * j0 * j0,
        "{}",
        pair.lambda1
    );
    assert!(pair.phi1.iter().all(|&p| p > 0.0));
}

#[test]
fn uniqueness_example_converges_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let problem = DirichletProblem::homogeneous(strip_1d(2.0, 64));
    let init: Vec<f64> = (0..problem.operator().dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let f = Nonlinearity::Linear { slope: 1.0 };
    let u = problem
        .solve_semilinear(&f, Some(&init), &SolvePolicy::default())
        .unwrap();
    assert!(u.max_abs() <= 1e-8);
    assert_eq!(u.method, Method::Newton);
}

fn allen_cahn_error(h: f64) -> f64 {
    let profile = |x: &[f64]| (x[1] * FRAC_1_SQRT_2).tanh();
    let set = GeneralOpenSet::Strip { lo: 0.0, hi: 1e9 };
    let grid = build_grid(&set, &GridBox::new(vec![0.0, 0.0], vec![1.0, 12.0]), h).unwrap();
    let problem = DirichletProblem::new(grid, BoundaryTrace::new("tanh", profile));
    let u = problem
        .solve_semilinear(&Nonlinearity::AllenCahn, None, &SolvePolicy::default())
        .unwrap();
    assert!(u.residual_norm <= 1e-9);
    let exact = problem.grid().sample(profile);
    u.values()
        .iter()
        .zip(&exact)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
}

#[test]
fn allen_cahn_converges_at_second_order() {
    let errs: Vec<f64> = [0.25, 0.125, 0.0625]
        .iter()
        .map(|&h| allen_cahn_error(h))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "errors {errs:?}");
    }
}

#[test]
fn clamped_quartic_closed_form_residual_is_second_order() {
    let closed = |x: &[f64]| {
        let y = x[x.len() - 1];
        if y < 1.0 {
            1.0 - (y - 1.0).powi(4)
        } else {
            1.0
        }
    };
    let mut res = Vec::new();
    for n in [32, 64, 128] {
        let h = 1.0 / n as f64;
        let grid = build_grid(
            &GeneralOpenSet::Strip { lo: 0.0, hi: 1e9 },
            &GridBox::new(vec![0.0], vec![2.0]),
            h,
        )
        .unwrap();
        let field =
            SolutionField::sample(Arc::new(grid), closed, &Nonlinearity::ClampedQuartic).unwrap();
        res.push(field.residual_norm / (h * h));
    }
    assert!(res.iter().all(|&c| c < 10.0), "{res:?}");
}

#[test]
fn non_smooth_newton_falls_back_to_picard() {
    let problem = DirichletProblem::new(
        strip_1d(2.0, 64),
        BoundaryTrace::new("one", |_: &[f64]| 1.0),
    );
    let f = Nonlinearity::Power { exponent: 0.5 };
    let u = problem
        .solve_semilinear(&f, None, &SolvePolicy::default())
        .unwrap();
    assert_eq!(u.method, Method::Picard);
    assert!(!u.notes.is_empty());
    assert!(u.residual_norm <= 1e-9);
    assert!(u.values().iter().all(|&v| v >= 1.0));
}

#[test]
fn positive_source_gives_positive_solution() {
    let problem = DirichletProblem::homogeneous(strip_1d(3.0, 48));
    for f in [
        Nonlinearity::Constant { value: 1.0 },
        Nonlinearity::AllenCahn,
    ] {
        let u = problem
            .solve_semilinear(&f, None, &SolvePolicy::default())
            .unwrap();
        assert!(u.values().iter().all(|&v| v >= 0.0), "{}", f.tag());
    }
}

#[test]
fn residual_check_is_independent_of_matrix() {
    let grid = disk(0.1);
    let trace = BoundaryTrace::new("affine", |x: &[f64]| 0.3 + x[0] - 0.5 * x[1]);
    let problem = DirichletProblem::new(grid, trace);
    let f = Nonlinearity::AllenCahn;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u: Vec<f64> = (0..problem.operator().dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let internal = problem.residual(&u, &f).unwrap();
    let independent = stencil_residual(problem.grid(), &u, problem.trace(), &f).unwrap();
    let scale = problem
        .operator()
        .diagonal()
        .iter()
        .fold(0.0f64, |m, d| m.max(*d))
        * 2.0;
    for (a, b) in internal.iter().zip(&independent) {
        assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
    }
}

#[test]
fn rejects_bad_inputs() {
    let problem = DirichletProblem::homogeneous(strip_1d(1.0, 8));
    assert!(matches!(
        problem.solve_linear(&[1.0], 1e-10),
        Err(Error::DimensionMismatch { .. })
    ));
    let bad = SolvePolicy {
        damping: 0.0,
        ..Default::default()
    };
    assert!(problem
        .solve_semilinear(&Nonlinearity::AllenCahn, None, &bad)
        .is_err());
    assert!(principal_eigenpair(problem.operator(), 0.0).is_err());
}

#[test]
fn resonant_newton_reports_singularity_or_stall() {
    let problem = DirichletProblem::homogeneous(strip_1d(PI, 64));
    let lambda = principal_eigenpair(problem.operator(), 1e-12)
        .unwrap()
        .lambda1;
    let f = Nonlinearity::Linear { slope: lambda };
    let init = vec![0.5; problem.operator().dim()];
    let res = problem.solve_semilinear(&f, Some(&init), &SolvePolicy::default());
    match res {
        Err(Error::JacobianSingular { .. }) | Err(Error::NoConvergence { .. }) => {}
        Ok(u) => assert!(u.max_abs() > 0.0),
        Err(e) => panic!("unexpected {e}"),
    }
}
