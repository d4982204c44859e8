//! Moving-plane diagnostics: reflections `u_λ(x) = u(x', 2λ - x_N)`, cap
//! comparisons `u ≤ u_λ` on `{g < x_N < λ}`, vertical derivatives and the
//! Hopf slope identity on planes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{ArmTarget, DomainGrid, NodeKind};
use crate::error::{Error, Result};
use crate::geometry::EpigraphSpec;
use crate::solver::{Method, SolutionField};

/// Default absolute tolerance on cap differences.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Width of the band near artificial faces excluded from caps, in units of `h`.
pub const BUFFER_CELLS: f64 = 3.0;

/// `max_{t∈[0,1]} |(t+1) t (t-1) (t-2)| / 4!`.
const CUBIC_BOUND: f64 = 0.5625 / 24.0;

/// A reflected field with the interpolation error bound of its values.
#[derive(Clone, Debug)]
pub struct Reflection {
    /// Lattice values of `u_λ`; `NaN` where `2λ - x_N` leaves the window.
    pub field: SolutionField,
    pub lambda: f64,
    /// `true` when every mirror lands on a lattice plane.
    pub exact: bool,
    /// Largest estimated cubic-interpolation error, `0` when exact.
    pub interpolation_bound: f64,
}

fn last_axis_offset(grid: &DomainGrid, lambda: f64) -> (f64, bool) {
    let n = grid.dimension() - 1;
    let s = 2.0 * (lambda - grid.bbox().lo[n]) / grid.h();
    let r = s.round();
    if (s - r).abs() <= 1e-9 * s.abs().max(1.0) {
        (r, true)
    } else {
        (s, false)
    }
}

/// Value of `u` at the mirror of lattice node `idx`, with its error bound.
/// `None` when the mirror leaves the window.
fn mirror_value(
    grid: &DomainGrid,
    lattice: &[f64],
    idx: usize,
    s: f64,
    exact: bool,
) -> Option<(f64, f64)> {
    let axis = grid.dimension() - 1;
    let stride = grid.strides()[axis];
    let len = grid.shape()[axis];
    let i = (idx / stride) % len;
    let base = idx - i * stride;
    let at = |k: usize| lattice[base + k * stride];
    let t = s - i as f64;
    if exact {
        let k = t as i64;
        if k < 0 || k >= len as i64 {
            return None;
        }
        return Some((at(k as usize), 0.0));
    }
    if t < 0.0 || t > (len - 1) as f64 || len < 4 {
        return None;
    }
    let j = (t.floor() as usize).clamp(1, len - 3);
    let frac = t - j as f64;
    let vals = [at(j - 1), at(j), at(j + 1), at(j + 2)];
    let nodes = [-1.0, 0.0, 1.0, 2.0];
    let mut value = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (frac - nodes[b]) / (nodes[a] - nodes[b]);
            }
        }
        value += w * vals[a];
    }
    let d4 = if len >= 5 {
        let k = (j - 1).min(len - 5);
        (at(k) - 4.0 * at(k + 1) + 6.0 * at(k + 2) - 4.0 * at(k + 3) + at(k + 4)).abs()
    } else {
        0.0
    };
    Some((value, CUBIC_BOUND * d4))
}

/// Reflects `u` across `{x_N = λ}` at every lattice node whose mirror lies in
/// the window. Mirrors on lattice planes are read exactly; otherwise cubic
/// Lagrange interpolation along `x_N` is used.
pub fn reflect_field(u: &SolutionField, lambda: f64) -> Result<Reflection> {
    let grid = u.grid();
    let axis = grid.dimension() - 1;
    let (lo, hi) = (grid.bbox().lo[axis], grid.bbox().hi[axis]);
    if !(lambda > lo && lambda < hi) {
        return Err(Error::ReflectionLeavesWindow {
            target: lambda,
            lo,
            hi,
        });
    }
    let (s, exact) = last_axis_offset(grid, lambda);
    let mut bound: f64 = 0.0;
    let lattice: Vec<f64> = (0..grid.lattice_len())
        .map(|idx| match mirror_value(grid, u.lattice(), idx, s, exact) {
            Some((v, b)) => {
                bound = bound.max(b);
                v
            }
            None => f64::NAN,
        })
        .collect();
    let values = grid
        .interior()
        .iter()
        .map(|node| lattice[node.lattice])
        .collect();
    let mut field =
        SolutionField::from_values(grid.clone(), values, u.trace().clone(), Method::Reflected)?
            .with_lattice(lattice);
    field.notes.push(format!("reflected across x_N = {lambda}"));
    if !exact {
        field
            .notes
            .push(format!("cubic interpolation bound {bound:e}"));
    }
    Ok(Reflection {
        field,
        lambda,
        exact,
        interpolation_bound: bound,
    })
}

/// Node where `∂u/∂x_N` changes sign along its vertical line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignChange {
    pub position: Vec<f64>,
    pub dn_u: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovingPlaneReport {
    pub lambda_grid: Vec<f64>,
    /// Per λ: `min (u_λ - u)` over cap nodes, `0` for an empty cap.
    pub cap_min_diff: Vec<f64>,
    pub cap_nodes: Vec<usize>,
    pub interpolation_bounds: Vec<f64>,
    /// Largest λ of the grid with no violation at or below it.
    pub monotone_up_to: Option<f64>,
    pub dn_u_min: f64,
    pub dn_u_max: f64,
    /// Lowest height above which `|∂_N u| ≤ tol` at every window node.
    pub flat_above: Option<f64>,
    pub sign_change_cells: Vec<SignChange>,
    pub tol: f64,
    pub buffer: f64,
}

impl MovingPlaneReport {
    /// `true` if no λ shows a violation beyond tolerance.
    pub fn caps_ordered(&self) -> bool {
        self.monotone_up_to == self.lambda_grid.last().copied()
    }
}

fn in_window(grid: &DomainGrid, x: &[f64]) -> bool {
    grid.distance_to_artificial(x) >= BUFFER_CELLS * grid.h() - 1e-12
}

/// `∂u/∂x_N` at interior node `row` from the three-point formula on the
/// node's (possibly cut) vertical arms.
pub fn dn_at(u: &SolutionField, row: usize) -> f64 {
    let grid = u.grid();
    let node = &grid.interior()[row];
    let pair = &node.arms[grid.dimension() - 1];
    let read = |k: usize| match &pair[k].target {
        ArmTarget::Node(j) => u.values()[*j],
        ArmTarget::Boundary { point, .. } => u.trace().eval(point),
    };
    let (a, b) = (pair[0].theta, pair[1].theta);
    let (um, u0, up) = (read(0), u.values()[row], read(1));
    (-b / (a * (a + b)) * um + (b - a) / (a * b) * u0 + a / (b * (a + b)) * up) / grid.h()
}

/// `∂u/∂x_N` at every interior node outside the artificial-face buffer,
/// as `(row, dn)` in equation order.
pub fn dn_field(u: &SolutionField) -> Vec<(usize, f64)> {
    let grid = u.grid();
    grid.interior()
        .iter()
        .enumerate()
        .filter(|(_, n)| in_window(grid, &n.position))
        .map(|(row, _)| (row, dn_at(u, row)))
        .collect()
}

fn cap_min(u: &SolutionField, spec: &EpigraphSpec, lambda: f64) -> Result<(f64, usize, f64)> {
    let grid = u.grid();
    let axis = grid.dimension() - 1;
    let hi = grid.bbox().hi[axis];
    let lo = grid.bbox().lo[axis];
    let (s, exact) = last_axis_offset(grid, lambda);
    let mut min = f64::INFINITY;
    let mut count = 0;
    let mut bound: f64 = 0.0;
    for node in grid.interior() {
        let x = &node.position;
        let xn = x[axis];
        if !(xn < lambda && spec.eval_g(&x[..axis]) < xn) || !in_window(grid, x) {
            continue;
        }
        let mirror = 2.0 * lambda - xn;
        if mirror > hi + 1e-12 {
            return Err(Error::ReflectionLeavesWindow {
                target: mirror,
                lo,
                hi,
            });
        }
        let mut y = x.clone();
        y[axis] = mirror;
        if !in_window(grid, &y) {
            continue;
        }
        let (v, b) = mirror_value(grid, u.lattice(), node.lattice, s, exact).ok_or(
            Error::ReflectionLeavesWindow {
                target: mirror,
                lo,
                hi,
            },
        )?;
        min = min.min(v - u.lattice()[node.lattice]);
        bound = bound.max(b);
        count += 1;
    }
    Ok((if count == 0 { 0.0 } else { min }, count, bound))
}

/// Sweeps `lambda_grid` (increasing), comparing `u` with `u_λ` on each cap
/// intersected with the window minus a `3h` band at artificial faces.
pub fn cap_sweep(
    u: &SolutionField,
    spec: &EpigraphSpec,
    lambda_grid: &[f64],
    tol: f64,
) -> Result<MovingPlaneReport> {
    let grid = u.grid();
    if grid.dimension() != spec.dimension && grid.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension,
            got: grid.dimension(),
        });
    }
    if lambda_grid.is_empty() || lambda_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid(
            "lambda grid must be nonempty and increasing",
        ));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be nonnegative"));
    }
    let per_lambda: Vec<(f64, usize, f64)> = lambda_grid
        .par_iter()
        .map(|&l| cap_min(u, spec, l))
        .collect::<Result<_>>()?;

    let mut monotone_up_to = None;
    for (l, (m, _, b)) in lambda_grid.iter().zip(&per_lambda) {
        if *m < -(tol + b) {
            break;
        }
        monotone_up_to = Some(*l);
    }

    let axis = grid.dimension() - 1;
    let dn = dn_field(u);
    let dn_u_min = dn.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let dn_u_max = dn.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

    let mut flat_above: Option<f64> = None;
    let mut heights: Vec<(f64, f64)> = dn
        .iter()
        .map(|&(row, d)| (grid.interior()[row].position[axis], d))
        .collect();
    heights.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (y, d) in &heights {
        if d.abs() > tol {
            break;
        }
        flat_above = Some(*y);
    }

    let sign_change_cells = sign_changes(u, &dn, tol);

    Ok(MovingPlaneReport {
        lambda_grid: lambda_grid.to_vec(),
        cap_min_diff: per_lambda.iter().map(|p| p.0).collect(),
        cap_nodes: per_lambda.iter().map(|p| p.1).collect(),
        interpolation_bounds: per_lambda.iter().map(|p| p.2).collect(),
        monotone_up_to,
        dn_u_min,
        dn_u_max,
        flat_above,
        sign_change_cells,
        tol,
        buffer: BUFFER_CELLS * grid.h(),
    })
}

fn sign_changes(u: &SolutionField, dn: &[(usize, f64)], tol: f64) -> Vec<SignChange> {
    let grid = u.grid();
    let axis = grid.dimension() - 1;
    let stride = grid.strides()[axis];
    let len = grid.shape()[axis];
    // group window nodes by vertical line, keyed by the lattice index of the
    // line's bottom node
    let mut lines: std::collections::BTreeMap<usize, Vec<(usize, f64)>> = Default::default();
    for &(row, d) in dn {
        let idx = grid.interior()[row].lattice;
        let i = (idx / stride) % len;
        lines.entry(idx - i * stride).or_default().push((i, d));
    }
    let mut out = Vec::new();
    for (base, mut line) in lines {
        line.sort_by_key(|p| p.0);
        let mut last = 0.0f64;
        for (i, d) in line {
            if d.abs() <= tol {
                continue;
            }
            if last != 0.0 && d.signum() != last {
                out.push(SignChange {
                    position: grid.position(base + i * stride),
                    dn_u: d,
                });
            }
            last = d.signum();
        }
    }
    out
}

/// One node of the plane `{x_N = λ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfNode {
    pub position: Vec<f64>,
    /// `∂_N (u_λ - u)` from one-sided differences below the plane.
    pub lhs: f64,
    /// `-2 ∂_N u` from centered differences.
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfReport {
    pub lambda: f64,
    pub nodes: Vec<HopfNode>,
    pub max_defect: f64,
    pub dn_u_min: f64,
    pub dn_u_max: f64,
    /// `∂_N u > tol` at every node of the plane.
    pub strictly_positive: bool,
}

/// Checks `∂_N(u_λ - u) = -2 ∂_N u` on `{x_N = λ}`. The left side uses the
/// second-order one-sided difference of `w = u_λ - u` from below, the right
/// side the centered difference of `u`; they agree to `O(h²)`.
pub fn hopf_slope_check(u: &SolutionField, lambda: f64, tol: f64) -> Result<HopfReport> {
    let grid = u.grid();
    let axis = grid.dimension() - 1;
    let h = grid.h();
    let lo = grid.bbox().lo[axis];
    let plane = (lambda - lo) / h;
    let p = plane.round();
    if (plane - p).abs() > 1e-9 * plane.abs().max(1.0) {
        return Err(Error::invalid(format!(
            "lambda = {lambda} is not a grid plane"
        )));
    }
    let p = p as usize;
    let len = grid.shape()[axis];
    if p < 2 || p + 2 >= len {
        return Err(Error::ReflectionLeavesWindow {
            target: lambda,
            lo,
            hi: grid.bbox().hi[axis],
        });
    }
    let reflected = reflect_field(u, lambda)?;
    let ul = reflected.field.lattice();
    let uu = u.lattice();
    let stride = grid.strides()[axis];
    let mut nodes = Vec::new();
    for node in grid.interior() {
        let idx = node.lattice;
        if (idx / stride) % len != p || !in_window(grid, &node.position) {
            continue;
        }
        let ok = (1..=2).all(|k| {
            matches!(grid.kind(idx - k * stride), NodeKind::Interior(_))
                && !matches!(grid.kind(idx + k * stride), NodeKind::Exterior)
        });
        if !ok {
            continue;
        }
        let w = |k: usize| ul[idx - k * stride] - uu[idx - k * stride];
        let lhs = (3.0 * w(0) - 4.0 * w(1) + w(2)) / (2.0 * h);
        let rhs = -(uu[idx + stride] - uu[idx - stride]) / h;
        nodes.push(HopfNode {
            position: node.position.clone(),
            lhs,
            rhs,
        });
    }
    let max_defect = nodes
        .iter()
        .fold(0.0f64, |m, n| m.max((n.lhs - n.rhs).abs()));
    let dn: Vec<f64> = nodes.iter().map(|n| -n.rhs / 2.0).collect();
    let dn_u_min = dn.iter().copied().fold(f64::INFINITY, f64::min);
    let dn_u_max = dn.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(HopfReport {
        lambda,
        strictly_positive: !dn.is_empty() && dn_u_min > tol,
        nodes,
        max_defect,
        dn_u_min,
        dn_u_max,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;
    use std::sync::Arc;

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::discretization::{build_grid, GridBox};
    use crate::geometry::GeneralOpenSet;
    use crate::nonlinearity::Nonlinearity;

    fn half_plane_window(h: f64) -> Arc<DomainGrid> {
        let set = GeneralOpenSet::Epigraph {
            spec: EpigraphSpec::half_space(2),
        };
        Arc::new(build_grid(&set, &GridBox::new(vec![0.0, 0.0], vec![1.0, 12.0]), h).unwrap())
    }

    fn column(h: f64, top: f64) -> Arc<DomainGrid> {
        let set = GeneralOpenSet::Strip { lo: 0.0, hi: 1e9 };
        Arc::new(build_grid(&set, &GridBox::new(vec![0.0], vec![top]), h).unwrap())
    }

    fn tanh_profile(x: &[f64]) -> f64 {
        (x[x.len() - 1] * FRAC_1_SQRT_2).tanh()
    }

    fn lattice_at(field: &SolutionField, y: f64) -> f64 {
        let grid = field.grid();
        let i = ((y - grid.bbox().lo[0]) / grid.h()).round() as usize;
        field.lattice()[grid.lattice_index(&[i])]
    }

    #[test]
    fn affine_reflection() {
        let u = SolutionField::sample(
            column(0.125, 4.0),
            |x| x[0],
            &Nonlinearity::Constant { value: 0.0 },
        )
        .unwrap();
        let r = reflect_field(&u, 1.0).unwrap();
        assert!(r.exact);
        for y in [0.0, 0.5, 1.25, 2.0] {
            assert_abs_diff_eq!(lattice_at(&r.field, y), 2.0 - y, epsilon = 1e-15);
        }
        assert!(lattice_at(&r.field, 3.0).is_nan());
    }

    #[test]
    fn tanh_reflection_value() {
        let u = SolutionField::sample(column(0.0625, 12.0), tanh_profile, &Nonlinearity::AllenCahn)
            .unwrap();
        let r = reflect_field(&u, 1.0).unwrap();
        let oracle = (1.5 * FRAC_1_SQRT_2).tanh();
        assert_abs_diff_eq!(oracle, 0.785_916_4, epsilon = 1e-7);
        assert_abs_diff_eq!(lattice_at(&r.field, 0.5), oracle, epsilon = 1e-15);
    }

    #[test]
    fn off_lattice_reflection_is_interpolated_with_bound() {
        let u = SolutionField::sample(column(0.0625, 12.0), tanh_profile, &Nonlinearity::AllenCahn)
            .unwrap();
        let lambda = 1.0 + 0.3 * 0.0625;
        let r = reflect_field(&u, lambda).unwrap();
        assert!(!r.exact);
        assert!(r.interpolation_bound > 0.0 && r.interpolation_bound < 1e-5);
        let y: f64 = 0.5;
        let exact = ((2.0 * lambda - y) * FRAC_1_SQRT_2).tanh();
        assert!((lattice_at(&r.field, y) - exact).abs() <= 10.0 * r.interpolation_bound + 1e-12);
    }

    #[test]
    fn symmetric_field_is_invariant() {
        let u = SolutionField::sample(
            column(0.125, 4.0),
            |x| (x[0] - 2.0).powi(2),
            &Nonlinearity::AllenCahn,
        )
        .unwrap();
        let r = reflect_field(&u, 2.0).unwrap();
        for (a, b) in r.field.lattice().iter().zip(u.lattice()) {
            assert_eq!(a, b);
        }
        let hopf = hopf_slope_check(&u, 2.0, 1e-12).unwrap();
        assert!(hopf
            .nodes
            .iter()
            .all(|n| n.lhs.abs() < 1e-12 && n.rhs.abs() < 1e-12));
    }

    #[test]
    fn reflection_is_an_involution() {
        let u = SolutionField::sample(column(0.125, 4.0), |x| x[0].sin(), &Nonlinearity::AllenCahn)
            .unwrap();
        let once = reflect_field(&u, 1.5).unwrap();
        let twice = reflect_field(&once.field, 1.5).unwrap();
        for (i, (a, b)) in twice.field.lattice().iter().zip(u.lattice()).enumerate() {
            if a.is_finite() {
                assert_eq!(a, b, "node {i}");
            }
        }
    }

    #[test]
    fn reflection_outside_window_errors() {
        let u =
            SolutionField::sample(column(0.125, 4.0), |x| x[0], &Nonlinearity::AllenCahn).unwrap();
        assert!(matches!(
            reflect_field(&u, 5.0),
            Err(Error::ReflectionLeavesWindow { .. })
        ));
        let spec = EpigraphSpec::half_space(2);
        let err = cap_sweep(&u, &spec, &[1.0, 3.5], 1e-8).unwrap_err();
        assert!(matches!(err, Error::ReflectionLeavesWindow { .. }));
    }

    #[test]
    fn tanh_sweep_is_strictly_monotone() {
        let u = SolutionField::sample(
            half_plane_window(0.0625),
            tanh_profile,
            &Nonlinearity::AllenCahn,
        )
        .unwrap();
        let lambdas: Vec<f64> = (2..=80).map(|k| k as f64 * 0.0625).collect();
        let report = cap_sweep(&u, &EpigraphSpec::half_space(2), &lambdas, 1e-8).unwrap();
        assert!(report.cap_min_diff.iter().all(|&d| d >= -1e-8));
        assert!(report.dn_u_min > 0.0);
        assert!(report.caps_ordered());
        assert!(report.sign_change_cells.is_empty());
        assert!(report.cap_nodes.iter().all(|&n| n > 0));
    }

    #[test]
    fn hopf_identity_on_tanh() {
        let mut defects = Vec::new();
        for h in [0.125, 0.0625] {
            let u =
                SolutionField::sample(half_plane_window(h), tanh_profile, &Nonlinearity::AllenCahn)
                    .unwrap();
            let report = hopf_slope_check(&u, 1.0, 1e-8).unwrap();
            assert!(report.strictly_positive);
            let slope = FRAC_1_SQRT_2 / FRAC_1_SQRT_2.cosh().powi(2);
            assert_abs_diff_eq!(slope, 0.444_975_4, epsilon = 1e-7);
            assert_abs_diff_eq!(report.dn_u_min, slope, epsilon = 2.0 * h * h);
            defects.push(report.max_defect / (h * h));
        }
        assert!(defects.iter().all(|&c| c < 1.0), "{defects:?}");
    }

    #[test]
    fn hopf_identity_affine() {
        let u =
            SolutionField::sample(column(0.125, 4.0), |x| x[0], &Nonlinearity::AllenCahn).unwrap();
        let report = hopf_slope_check(&u, 1.0, 0.0).unwrap();
        for n in &report.nodes {
            assert_abs_diff_eq!(n.lhs, -2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(n.rhs, -2.0, epsilon = 1e-12);
        }
        assert!(hopf_slope_check(&u, 1.01, 0.0).is_err());
    }

    #[test]
    fn decreasing_profile_violates_caps() {
        let u = SolutionField::sample(
            column(0.125, 6.0),
            |x| (-x[0]).exp(),
            &Nonlinearity::AllenCahn,
        )
        .unwrap();
        let report = cap_sweep(&u, &EpigraphSpec::half_space(2), &[0.5, 1.0, 2.0], 1e-8).unwrap();
        assert_eq!(report.monotone_up_to, None);
        assert!(report.cap_min_diff.iter().all(|&d| d < 0.0));
        assert!(report.dn_u_max < 0.0);
    }
}
