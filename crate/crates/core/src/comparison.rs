//! Comparison, uniqueness and symmetry experiments, the eigenvalue threshold
//! scan and the harmonic growth counterexample.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{build_grid, DomainGrid, GridBox, NodeKind};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::geometry::{section_measure, GeneralOpenSet, SectionParams};
use crate::nonlinearity::{epsilon_bounded, Nonlinearity};
use crate::solver::{
    principal_eigenpair, solve_linear, stencil_residual, BoundaryTrace, DirichletProblem, Method,
    SolutionField, SolvePolicy,
};

/// Interior node where `u ≤ v` fails most.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub position: Vec<f64>,
    /// `v - u` at the node (negative).
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub domain: String,
    /// Section in the `x_N` direction, when known.
    pub section: Option<f64>,
    /// Lipschitz constant of `f` on the range of `u` and `v`.
    pub lipschitz: Extended,
    /// Sufficient width `π / sqrt(2L)`.
    pub epsilon_bound: Extended,
    pub lambda1: Option<f64>,
    /// Discrete `-Δu - f(u) ≤ -Δv - f(v)` at every interior node.
    pub hypothesis_holds: bool,
    /// Largest positive part of `(-Δu - f(u)) - (-Δv - f(v))`.
    pub hypothesis_excess: f64,
    pub comparison_holds: bool,
    /// `min (v - u)` over interior nodes.
    pub min_gap: f64,
    pub witness: Option<Witness>,
}

/// `x_N`-section of a strip, or the measured section along `e_N` over the
/// grid's `x'` lattice for other sets.
pub fn section_of(grid: &DomainGrid) -> Option<f64> {
    match grid.domain() {
        GeneralOpenSet::Strip { lo, hi } => Some(hi - lo),
        set => {
            let n = grid.dimension();
            if n < 2 {
                return None;
            }
            let probes = transverse_lattice(grid);
            let mut nu = vec![0.0; n];
            nu[n - 1] = 1.0;
            section_measure(set, &nu, &probes, &SectionParams::default())
                .ok()
                .map(|s| s.value)
        }
    }
}

fn transverse_lattice(grid: &DomainGrid) -> Vec<Vec<f64>> {
    let n = grid.dimension();
    let mut out = vec![Vec::new()];
    for a in 0..n - 1 {
        let coords: Vec<f64> = (0..grid.shape()[a])
            .map(|i| grid.coordinate(a, i))
            .collect();
        out = out
            .into_iter()
            .flat_map(|p| {
                coords.iter().map(move |c| {
                    let mut q = p.clone();
                    q.push(*c);
                    q
                })
            })
            .collect();
    }
    out
}

fn value_range(fields: &[&SolutionField]) -> (f64, f64) {
    fields
        .iter()
        .flat_map(|f| f.values().iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        })
}

/// Checks `u ≤ v + tol` on the interior given `u ≤ v` on every boundary
/// point reached by a stencil arm.
pub fn comparison_test(
    f: &Nonlinearity,
    u: &SolutionField,
    v: &SolutionField,
    tol: f64,
) -> Result<ComparisonReport> {
    let grid = u.grid();
    if !Arc::ptr_eq(grid, v.grid()) && grid.n_interior() != v.grid().n_interior() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_interior(),
            got: v.grid().n_interior(),
        });
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be nonnegative"));
    }
    for (point, _) in grid.boundary_points() {
        let excess = u.trace().eval(&point) - v.trace().eval(&point);
        if excess > tol {
            return Err(Error::BoundaryOrderingViolated {
                position: point,
                excess,
            });
        }
    }
    let ru = stencil_residual(grid, u.values(), u.trace(), f)?;
    let rv = stencil_residual(grid, v.values(), v.trace(), f)?;
    let hypothesis_excess = ru.iter().zip(&rv).fold(0.0f64, |m, (a, b)| m.max(a - b));

    let (row, min_gap) = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| b - a)
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |(k, m), (i, g)| if g < m { (i, g) } else { (k, m) },
        );
    let witness = (min_gap < -tol).then(|| Witness {
        position: grid.interior()[row].position.clone(),
        gap: min_gap,
    });
    let (lo, hi) = value_range(&[u, v]);
    let lipschitz = if lo <= hi {
        f.lipschitz_on(lo, hi)?
    } else {
        Extended::Finite(0.0)
    };
    let epsilon_bound = match lipschitz {
        Extended::Finite(l) => epsilon_bounded(l)?,
        Extended::Infinite => Extended::Finite(0.0),
    };
    Ok(ComparisonReport {
        domain: grid.domain().tag().to_string(),
        section: section_of(grid),
        lipschitz,
        epsilon_bound,
        lambda1: None,
        hypothesis_holds: hypothesis_excess <= tol,
        hypothesis_excess,
        comparison_holds: witness.is_none(),
        min_gap,
        witness,
    })
}

/// 1-D cross-section `(0, S)` with `cells` cells.
fn cross_section(width: f64, cells: usize) -> Result<DomainGrid> {
    build_grid(
        &GeneralOpenSet::Strip { lo: 0.0, hi: width },
        &GridBox::new(vec![0.0], vec![width]),
        width / cells as f64,
    )
}

/// Discrete principal eigenvalue of the strip of width `S`, computed on its
/// cross-section with `h = S / cells`.
pub fn strip_lambda1(width: f64, cells: usize) -> Result<f64> {
    let grid = cross_section(width, cells)?;
    Ok(principal_eigenpair(&crate::discretization::assemble_laplacian(&grid), 1e-12)?.lambda1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub width: f64,
    pub h: f64,
    pub lambda1: f64,
    /// `λ₁(S) ≤ L`: the linear comparison principle fails.
    pub unstable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub lipschitz: f64,
    pub cells: usize,
    pub epsilon_bound: Extended,
    pub rows: Vec<ScanRow>,
    /// First scanned width with `λ₁ ≤ L`.
    pub failure_width: Option<f64>,
    /// Crossing `λ₁(S) = L` from `λ₁ S² = const` at the first unstable width.
    pub crossing: Option<f64>,
    /// `ε < failure_width`.
    pub sufficiency_gap_holds: bool,
}

/// Scans `λ₁(S)` over increasing `widths` at `h = S / cells` for `f = L t`.
pub fn threshold_scan(lipschitz: f64, widths: &[f64], cells: usize) -> Result<ThresholdScan> {
    if widths.is_empty() || widths.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::invalid("widths must be positive"));
    }
    if widths.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("widths must be increasing"));
    }
    let epsilon_bound = epsilon_bounded(lipschitz)?;
    let rows: Vec<ScanRow> = widths
        .par_iter()
        .map(|&s| {
            let lambda1 = strip_lambda1(s, cells)?;
            Ok(ScanRow {
                width: s,
                h: s / cells as f64,
                lambda1,
                unstable: lambda1 <= lipschitz,
            })
        })
        .collect::<Result<_>>()?;
    let first = rows.iter().find(|r| r.unstable);
    let failure_width = first.map(|r| r.width);
    let crossing = first.map(|r| (r.lambda1 * r.width * r.width / lipschitz).sqrt());
    let sufficiency_gap_holds = match (epsilon_bound, failure_width) {
        (Extended::Finite(e), Some(w)) => e < w,
        (_, None) => true,
        (Extended::Infinite, Some(_)) => false,
    };
    Ok(ThresholdScan {
        lipschitz,
        cells,
        epsilon_bound,
        rows,
        failure_width,
        crossing,
        sufficiency_gap_holds,
    })
}

/// Outcome of [`random_pair_check`] at one width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub width: f64,
    pub lipschitz: f64,
    pub pairs: usize,
    pub hypothesis_all: bool,
    pub comparison_all: bool,
    pub min_gap: f64,
}

/// Window `(-X, X) × (0, S)` of the strip with `h = S / cells` and `X = 2S`.
pub fn strip_window(width: f64, cells: usize) -> Result<DomainGrid> {
    let h = width / cells as f64;
    let half = 2.0 * cells as f64 * h;
    build_grid(
        &GeneralOpenSet::Strip { lo: 0.0, hi: width },
        &GridBox::new(vec![-half, 0.0], vec![half, width]),
        h,
    )
}

/// Draws `n_pairs` ordered pairs for `f = L t` on a strip window and runs
/// [`comparison_test`] on each.
///
/// `v` is a random smooth field and `u = v - b` with `(A - L) b = ψ` for a
/// random nonnegative bump source `ψ`, so `u` and `v` share their boundary
/// values and satisfy the differential inequality by construction.
pub fn random_pair_check(
    width: f64,
    lipschitz: f64,
    n_pairs: usize,
    seed: u64,
    cells: usize,
) -> Result<PairCheck> {
    let grid = Arc::new(strip_window(width, cells)?);
    let f = Nonlinearity::Linear { slope: lipschitz };
    let op = crate::discretization::assemble_laplacian(&grid);
    let shifted = op.with_diagonal_shift(&vec![-lipschitz; op.dim()])?;
    let reports: Vec<ComparisonReport> = (0..n_pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let (a, b, c) = (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.2..2.0),
                rng.random_range(-1.0..1.0),
            );
            let v_fn = move |x: &[f64]| a * (b * x[0]).cos() + c * x[1] + 0.3 * (x[0] * x[1]).sin();
            let trace = BoundaryTrace::new("random smooth", v_fn);
            let v_vals = grid.sample(v_fn);
            let bumps: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    let cx = rng.random_range(-width..width);
                    let cy = rng.random_range(0.25 * width..0.75 * width);
                    (cx, cy, rng.random_range(0.1..1.0))
                })
                .collect();
            let r2 = (0.25 * width).powi(2);
            let psi = grid.sample(|x| {
                bumps
                    .iter()
                    .map(|(cx, cy, amp)| {
                        let d2 = (x[0] - cx).powi(2) + (x[1] - cy).powi(2);
                        amp * (1.0 - d2 / r2).max(0.0)
                    })
                    .sum()
            });
            let bump = solve_linear(&shifted, &psi, 1e-13)?.x;
            let u_vals: Vec<f64> = v_vals.iter().zip(&bump).map(|(v, b)| v - b).collect();
            let v =
                SolutionField::from_values(grid.clone(), v_vals, trace.clone(), Method::Sampled)?;
            let u = SolutionField::from_values(grid.clone(), u_vals, trace, Method::Sampled)?;
            comparison_test(&f, &u, &v, 1e-9)
        })
        .collect::<Result<_>>()?;
    Ok(PairCheck {
        width,
        lipschitz,
        pairs: n_pairs,
        hypothesis_all: reports.iter().all(|r| r.hypothesis_holds),
        comparison_all: reports.iter().all(|r| r.comparison_holds),
        min_gap: reports
            .iter()
            .map(|r| r.min_gap)
            .fold(f64::INFINITY, f64::min),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub seed: u64,
    pub converged: bool,
    pub max_abs: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub domain: String,
    pub section: f64,
    pub lipschitz: Extended,
    pub threshold: Extended,
    pub restarts: Vec<RestartOutcome>,
    /// Every restart converged to `‖u‖∞ ≤ tol`.
    pub comparison_holds: bool,
}

/// Solves `-Δu = f(u)` with zero data from `n_restarts` random initial
/// guesses in `[-amplitude, amplitude]` and checks that each converges to 0.
///
/// Requires `S < π / sqrt(2L)` with `L` the Lipschitz constant of `f` on
/// `[-amplitude, amplitude]`; non-increasing `f` has no width restriction.
pub fn uniqueness_test(
    grid: Arc<DomainGrid>,
    f: &Nonlinearity,
    n_restarts: usize,
    tol: f64,
    seed: u64,
    amplitude: f64,
) -> Result<UniquenessReport> {
    if f.f0()? != 0.0 {
        return Err(Error::invalid("uniqueness test needs f(0) = 0"));
    }
    if !(amplitude > 0.0) {
        return Err(Error::invalid("amplitude must be positive"));
    }
    let section = section_of(&grid).ok_or_else(|| Error::invalid("section unavailable"))?;
    let lipschitz = f.lipschitz_on(-amplitude, amplitude)?;
    let threshold = if f.monotone_nonincreasing() {
        Extended::Infinite
    } else {
        match lipschitz {
            Extended::Finite(l) => epsilon_bounded(l)?,
            Extended::Infinite => Extended::Finite(0.0),
        }
    };
    if !threshold.exceeds(section) {
        return Err(Error::HypothesisViolated {
            section,
            threshold: threshold.finite().unwrap_or(f64::INFINITY),
        });
    }
    let problem = DirichletProblem::from_arc(grid.clone(), BoundaryTrace::zero());
    let n = grid.n_interior();
    let restarts: Vec<RestartOutcome> = (0..n_restarts)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let init: Vec<f64> = (0..n)
                .map(|_| rng.random_range(-amplitude..=amplitude))
                .collect();
            match problem.solve_semilinear(f, Some(&init), &SolvePolicy::default()) {
                Ok(u) => RestartOutcome {
                    seed: s,
                    converged: true,
                    max_abs: Some(u.max_abs()),
                    iterations: u.iterations,
                    error: None,
                },
                Err(e) => RestartOutcome {
                    seed: s,
                    converged: false,
                    max_abs: None,
                    iterations: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let comparison_holds = restarts.iter().all(|r| r.max_abs.is_some_and(|m| m <= tol));
    Ok(UniquenessReport {
        domain: grid.domain().tag().to_string(),
        section,
        lipschitz,
        threshold,
        restarts,
        comparison_holds,
    })
}

/// Isometry acting on lattice nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridIsometry {
    Identity,
    /// `x_axis ↦ 2 about - x_axis`.
    ReflectAxis {
        axis: usize,
        about: f64,
    },
    /// `x_axis ↦ x_axis + shift`.
    Translate {
        axis: usize,
        shift: f64,
    },
}

impl GridIsometry {
    /// Lattice-index map `i ↦ a + sign * i` along the isometry's axis.
    fn index_map(&self, grid: &DomainGrid) -> Result<Option<(usize, i64, i64)>> {
        let aligned = |v: f64, what: &str| -> Result<i64> {
            let r = v.round();
            if (v - r).abs() > 1e-9 * v.abs().max(1.0) {
                return Err(Error::IsometryNotGridAligned(format!("{what} = {v} cells")));
            }
            Ok(r as i64)
        };
        let h = grid.h();
        match *self {
            GridIsometry::Identity => Ok(None),
            GridIsometry::ReflectAxis { axis, about } => {
                check_axis(grid, axis)?;
                let a = aligned(
                    2.0 * (about - grid.bbox().lo[axis]) / h,
                    "2 (about - lo) / h",
                )?;
                Ok(Some((axis, a, -1)))
            }
            GridIsometry::Translate { axis, shift } => {
                check_axis(grid, axis)?;
                Ok(Some((axis, aligned(shift / h, "shift / h")?, 1)))
            }
        }
    }
}

fn check_axis(grid: &DomainGrid, axis: usize) -> Result<()> {
    if axis >= grid.dimension() {
        return Err(Error::DimensionMismatch {
            expected: grid.dimension(),
            got: axis + 1,
        });
    }
    Ok(())
}

/// `max |u(x) - u(ρx)|` over interior nodes `x` with `ρx` interior and both at
/// distance at least `buffer` from artificial faces; with the number of pairs.
pub fn symmetry_defect(u: &SolutionField, rho: &GridIsometry, buffer: f64) -> Result<(f64, usize)> {
    let grid = u.grid();
    let Some((axis, offset, sign)) = rho.index_map(grid)? else {
        return Ok((0.0, grid.n_interior()));
    };
    let stride = grid.strides()[axis] as i64;
    let len = grid.shape()[axis] as i64;
    let mut defect = 0.0f64;
    let mut pairs = 0;
    for (row, node) in grid.interior().iter().enumerate() {
        if grid.distance_to_artificial(&node.position) < buffer {
            continue;
        }
        let idx = node.lattice as i64;
        let i = (idx / stride) % len;
        let j = offset + sign * i;
        if j < 0 || j >= len {
            continue;
        }
        let image = (idx + (j - i) * stride) as usize;
        let NodeKind::Interior(k) = grid.kind(image) else {
            continue;
        };
        if grid.distance_to_artificial(&grid.position(image)) < buffer {
            continue;
        }
        defect = defect.max((u.values()[row] - u.values()[k]).abs());
        pairs += 1;
    }
    Ok((defect, pairs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub domain: String,
    pub isometry: GridIsometry,
    pub buffer: f64,
    pub defect: f64,
    pub pairs: usize,
    pub tol: f64,
    pub comparison_holds: bool,
}

/// Solves the problem and measures `max |u - u∘ρ|` away from the truncation.
pub fn symmetry_test(
    problem: &DirichletProblem,
    f: &Nonlinearity,
    rho: &GridIsometry,
    buffer: f64,
    tol: f64,
) -> Result<(SolutionField, SymmetryReport)> {
    rho.index_map(problem.grid())?;
    let policy = SolvePolicy {
        tol: 1e-11,
        ..SolvePolicy::default()
    };
    let u = problem.solve_semilinear(f, None, &policy)?;
    let (defect, pairs) = symmetry_defect(&u, rho, buffer)?;
    let report = SymmetryReport {
        domain: problem.grid().domain().tag().to_string(),
        isometry: rho.clone(),
        buffer,
        defect,
        pairs,
        tol,
        comparison_holds: defect <= tol,
    };
    Ok((u, report))
}

/// `sin(m y)` on lattice heights `y = j h` with `h = π / cells`, reduced with
/// integer phases so that `y ∈ {0, π}` gives exactly 0.
fn lattice_sine(m: u32, y: f64, cells: usize) -> f64 {
    let h = PI / cells as f64;
    let j = (y / h).round();
    if (y - j * h).abs() > 1e-9 * h {
        return (m as f64 * y).sin();
    }
    let period = 2 * cells as i64;
    let k = ((m as i64) * (j as i64)).rem_euclid(period);
    if k % cells as i64 == 0 {
        0.0
    } else {
        (PI * k as f64 / cells as f64).sin()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub m: u32,
    pub h: f64,
    pub x_max: f64,
    pub boundary_trace_max: f64,
    pub interior_max: f64,
    pub residual_max: f64,
    /// `residual_max / (h² cosh(m x_max))`.
    pub residual_constant: f64,
    /// Least-squares slope of `log max_{|x| ≤ X} |w|` over `X ∈ [x_max/2, x_max]`.
    pub growth_slope: f64,
    pub slope_relative_error: f64,
}

/// Samples the harmonic function `w = cosh(m x) sin(m y)` on the strip
/// `0 < y < π`, `|x| ≤ x_max` (rounded up to the lattice), with `h = π / cells`.
pub fn growth_counterexample(m: u32, cells: usize, x_max: f64) -> Result<GrowthReport> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if !(x_max > 0.0) {
        return Err(Error::invalid("x_max must be positive"));
    }
    let h = PI / cells as f64;
    let nx = (x_max / h).ceil().max(2.0);
    let x_max = nx * h;
    let grid = Arc::new(build_grid(
        &GeneralOpenSet::Strip { lo: 0.0, hi: PI },
        &GridBox::new(vec![-x_max, 0.0], vec![x_max, PI]),
        h,
    )?);
    let mf = m as f64;
    let w = move |x: &[f64]| (mf * x[0]).cosh() * lattice_sine(m, x[1], cells);
    let field = SolutionField::sample(grid.clone(), w, &Nonlinearity::Constant { value: 0.0 })?;

    let boundary_trace_max = grid
        .boundary_points()
        .iter()
        .filter(|(p, _)| p[1] <= 0.5 * h || p[1] >= PI - 0.5 * h)
        .fold(0.0f64, |a, (p, _)| a.max(w(p).abs()));
    let interior_max = field.max_abs();

    let mut xs = Vec::new();
    let mut logs = Vec::new();
    for k in ((nx / 2.0).ceil() as usize)..=(nx as usize) {
        let big_x = k as f64 * h;
        let top = grid
            .interior()
            .iter()
            .zip(field.values())
            .filter(|(n, _)| n.position[0].abs() <= big_x + 1e-12)
            .fold(0.0f64, |a, (_, v)| a.max(v.abs()));
        xs.push(big_x);
        logs.push(top.ln());
    }
    let slope = least_squares_slope(&xs, &logs);
    Ok(GrowthReport {
        m,
        h,
        x_max,
        boundary_trace_max,
        interior_max,
        residual_max: field.residual_norm,
        residual_constant: field.residual_norm / (h * h * (mf * x_max).cosh()),
        growth_slope: slope,
        slope_relative_error: (slope - mf).abs() / mf,
    })
}

pub(crate) fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::geometry::RevolutionProfile;

    fn sampled(
        grid: &Arc<DomainGrid>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + Clone + 'static,
    ) -> SolutionField {
        SolutionField::sample(grid.clone(), f, &Nonlinearity::Constant { value: 0.0 }).unwrap()
    }

    #[test]
    fn sine_on_resonant_strip_breaks_comparison() {
        let grid = Arc::new(cross_section(PI, 64).unwrap());
        let u = sampled(&grid, |x| lattice_sine(1, x[0], 64));
        let v = sampled(&grid, |_| 0.0);
        let f = Nonlinearity::Linear { slope: 1.0 };
        let report = comparison_test(&f, &u, &v, 1e-12).unwrap();
        assert!(report.hypothesis_holds);
        assert!(!report.comparison_holds);
        let w = report.witness.unwrap();
        assert_abs_diff_eq!(w.position[0], FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(w.gap, -1.0, epsilon = 1e-12);
        assert_eq!(report.section, Some(PI));
    }

    #[test]
    fn identical_fields_compare() {
        let grid = Arc::new(strip_window(2.0, 8).unwrap());
        let u = sampled(&grid, |x| x[0].sin() + x[1]);
        let report = comparison_test(&Nonlinearity::AllenCahn, &u, &u, 0.0).unwrap();
        assert!(report.comparison_holds && report.hypothesis_holds);
        assert_eq!(report.min_gap, 0.0);
    }

    #[test]
    fn boundary_ordering_is_a_precondition() {
        let grid = Arc::new(cross_section(2.0, 16).unwrap());
        let u = sampled(&grid, |_| 1.0);
        let v = sampled(&grid, |_| 0.0);
        let err = comparison_test(&Nonlinearity::AllenCahn, &u, &v, 1e-9).unwrap_err();
        assert!(matches!(err, Error::BoundaryOrderingViolated { .. }));
    }

    #[test]
    fn scan_finds_pi() {
        let widths: Vec<f64> = (0..=16).map(|k| 2.0 + 0.1 * k as f64).collect();
        let scan = threshold_scan(1.0, &widths, 128).unwrap();
        let fw = scan.failure_width.unwrap();
        assert!((fw - PI).abs() <= 0.02 * PI, "{fw}");
        assert!((scan.crossing.unwrap() - PI).abs() < 1e-3);
        assert!(scan.sufficiency_gap_holds);
        let eps = scan.epsilon_bound.finite().unwrap();
        assert_abs_diff_eq!(eps, PI / 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(fw / eps, 2f64.sqrt(), epsilon = 0.03);
    }

    #[test]
    fn scan_with_l4_finds_half_pi() {
        let widths: Vec<f64> = (0..=20).map(|k| 1.0 + 0.05 * k as f64).collect();
        let scan = threshold_scan(4.0, &widths, 128).unwrap();
        let fw = scan.failure_width.unwrap();
        assert!((fw - FRAC_PI_2).abs() <= 0.02 * FRAC_PI_2, "{fw}");
    }

    #[test]
    fn eigenvalue_scaling_is_constant() {
        let c: Vec<f64> = [1.0, 2.0, 3.0, 5.0]
            .iter()
            .map(|&s| strip_lambda1(s, 64).unwrap() * s * s)
            .collect();
        for v in &c {
            assert!((v - c[0]).abs() <= 0.01 * c[0]);
        }
    }

    #[test]
    fn random_pairs_below_threshold_compare() {
        let check = random_pair_check(2.0, 1.0, 4, 5, 16).unwrap();
        assert!(check.hypothesis_all);
        assert!(check.comparison_all);
        assert!(check.min_gap >= -1e-9);
    }

    #[test]
    fn uniqueness_on_narrow_strip() {
        let grid = Arc::new(cross_section(2.0, 64).unwrap());
        let report =
            uniqueness_test(grid, &Nonlinearity::Linear { slope: 1.0 }, 5, 1e-8, 1, 1.0).unwrap();
        assert!(report.comparison_holds);
        assert!(report.restarts.iter().all(|r| r.converged));
    }

    #[test]
    fn uniqueness_beyond_threshold_is_refused() {
        let grid = Arc::new(cross_section(3.3, 64).unwrap());
        let err = uniqueness_test(grid, &Nonlinearity::Linear { slope: 1.0 }, 5, 1e-8, 1, 1.0)
            .unwrap_err();
        assert!(matches!(err, Error::HypothesisViolated { .. }));
    }

    #[test]
    fn zero_nonlinearity_is_unique_at_any_width() {
        let grid = Arc::new(cross_section(10.0, 64).unwrap());
        let report = uniqueness_test(
            grid,
            &Nonlinearity::Constant { value: 0.0 },
            3,
            1e-12,
            9,
            1.0,
        )
        .unwrap();
        assert!(report.comparison_holds);
        assert_eq!(report.threshold, Extended::Infinite);
    }

    #[test]
    fn strip_torsion_is_exact_and_even() {
        let h = 1.0 / 16.0;
        let grid = build_grid(
            &GeneralOpenSet::Strip { lo: -1.0, hi: 1.0 },
            &GridBox::new(vec![-2.0, -1.0], vec![2.0, 1.0]),
            h,
        )
        .unwrap();
        let exact = |x: &[f64]| (1.0 - x[1] * x[1]) / 2.0;
        let problem = DirichletProblem::new(grid, BoundaryTrace::new("torsion", exact));
        let rho = GridIsometry::ReflectAxis {
            axis: 1,
            about: 0.0,
        };
        let (u, report) = symmetry_test(
            &problem,
            &Nonlinearity::Constant { value: 1.0 },
            &rho,
            0.0,
            1e-12,
        )
        .unwrap();
        assert!(report.comparison_holds, "{}", report.defect);
        let err = u
            .values()
            .iter()
            .zip(problem.grid().sample(exact))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn identity_has_no_defect_and_misaligned_maps_fail() {
        let grid = Arc::new(strip_window(2.0, 8).unwrap());
        let u = sampled(&grid, |x| x[0] + x[1]);
        assert_eq!(
            symmetry_defect(&u, &GridIsometry::Identity, 0.0).unwrap().0,
            0.0
        );
        let bad = GridIsometry::Translate {
            axis: 0,
            shift: 0.1,
        };
        assert!(matches!(
            symmetry_defect(&u, &bad, 0.0),
            Err(Error::IsometryNotGridAligned(_))
        ));
    }

    #[test]
    fn revolution_torsion_is_even_and_periodic() {
        let h = 2.0 * PI / 64.0;
        let set = GeneralOpenSet::Revolution {
            profile: RevolutionProfile::Cosine {
                base: 1.0,
                amplitude: 0.2,
                frequency: 1.0,
            },
        };
        let bbox = GridBox::new(vec![-6.0 * PI, -13.0 * h], vec![6.0 * PI, 13.0 * h]);
        let grid = build_grid(&set, &bbox, h).unwrap();
        let problem = DirichletProblem::homogeneous(grid);
        let f = Nonlinearity::Constant { value: 1.0 };
        let even = GridIsometry::ReflectAxis {
            axis: 1,
            about: 0.0,
        };
        let (u, report) = symmetry_test(&problem, &f, &even, 0.0, 1e-8).unwrap();
        assert!(report.comparison_holds, "{}", report.defect);
        let shift = GridIsometry::Translate {
            axis: 0,
            shift: 2.0 * PI,
        };
        let (periodic, pairs) = symmetry_defect(&u, &shift, 3.0 * PI).unwrap();
        assert!(pairs > 0);
        assert!(periodic <= 1e-6, "{periodic}");
    }

    #[test]
    fn growth_counterexample_is_harmonic_with_unit_slope() {
        let report = growth_counterexample(1, 32, 2.0).unwrap();
        assert_eq!(report.boundary_trace_max, 0.0);
        assert!(report.interior_max > 1.0);
        assert!(
            report.residual_constant < 1.0,
            "{}",
            report.residual_constant
        );
        let far = growth_counterexample(1, 32, 6.0).unwrap();
        assert!(far.slope_relative_error <= 0.05, "{}", far.growth_slope);
        let m2 = growth_counterexample(2, 64, 4.0).unwrap();
        assert_eq!(m2.boundary_trace_max, 0.0);
        assert!(m2.slope_relative_error <= 0.05);
    }

    #[test]
    fn nonincreasing_f_compares_at_any_width() {
        let closed = |x: &[f64]| {
            let y = x[0];
            if y < 1.0 {
                1.0 - (y - 1.0).powi(4)
            } else {
                1.0
            }
        };
        for width in [1.0, 2.0, 5.0, 10.0] {
            let grid = Arc::new(cross_section(width, 128).unwrap());
            let u = sampled(&grid, closed);
            for shift in [0.0, 0.1, 1.0] {
                let v = sampled(&grid, move |x| closed(x) + shift);
                let report = comparison_test(&Nonlinearity::ClampedQuartic, &u, &v, 1e-12).unwrap();
                assert!(
                    report.hypothesis_holds && report.comparison_holds,
                    "width {width}"
                );
            }
        }
    }
}
