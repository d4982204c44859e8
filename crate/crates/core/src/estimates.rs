//! Interior gradient (Brandt) bounds and boundary oscillation-decay fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparison::least_squares_slope;
use crate::discretization::{DomainGrid, NodeKind};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::solver::SolutionField;

/// Frozen constant `C` of the scheme allowance `C h²` in [`brandt_check`].
pub const BRANDT_SCHEME_C: f64 = 1.0;

/// Smallest number of samples accepted in the smallest oscillation ball.
pub const MIN_BALL_NODES: usize = 4;

/// Relative change of `α` under refinement accepted as stable.
pub const STABILITY_TOL: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrandtReport {
    pub center: Vec<f64>,
    pub delta: f64,
    /// Centered differences `∂_i u(y)`.
    pub gradient: Vec<f64>,
    /// `max_i |∂_i u(y)|`.
    pub lhs: f64,
    pub u_max: f64,
    pub f_max: f64,
    /// `(2N/δ) max|u| + (δ/4) max|f|` over the ball.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn ball_inside(grid: &DomainGrid, y: &[f64], delta: f64) -> bool {
    let n = grid.dimension();
    let set = grid.domain();
    let bbox = grid.bbox();
    let inside = |p: &[f64]| {
        set.contains(p)
            && p.iter()
                .enumerate()
                .all(|(a, &t)| t >= bbox.lo[a] && t <= bbox.hi[a])
    };
    let mut probes = Vec::new();
    for a in 0..n {
        for s in [-1.0, 1.0] {
            let mut p = y.to_vec();
            p[a] += s * delta;
            probes.push(p);
        }
    }
    if n >= 2 {
        for k in 0..64 {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
            for (a, b) in (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))) {
                let mut p = y.to_vec();
                p[a] += delta * t.cos();
                p[b] += delta * t.sin();
                probes.push(p);
            }
        }
    }
    if !probes.iter().all(|p| inside(p)) {
        return false;
    }
    nodes_near(grid, y, delta).into_iter().all(|idx| {
        dist2(&grid.position(idx), y) > delta * delta
            || matches!(grid.kind(idx), NodeKind::Interior(_))
    })
}

/// Lattice nodes in the axis-aligned cube of half-width `r` around `y`.
fn nodes_near(grid: &DomainGrid, y: &[f64], r: f64) -> Vec<usize> {
    let h = grid.h();
    let mut out = vec![0usize];
    for a in 0..grid.dimension() {
        let lo = ((y[a] - r - grid.bbox().lo[a]) / h).floor().max(0.0) as usize;
        let hi = (((y[a] + r - grid.bbox().lo[a]) / h).ceil() as usize).min(grid.shape()[a] - 1);
        let stride = grid.strides()[a];
        out = out
            .into_iter()
            .flat_map(|base| (lo..=hi).map(move |i| base + i * stride))
            .collect();
    }
    out
}

/// Compares `max_i |∂_i u(y)|` with `(2N/δ) max_B |u| + (δ/4) max_B |f(u)|`
/// on `B = B(y, δ)`. The ball must lie inside the domain and the box; `y`
/// must be a lattice node. Holds when `lhs ≤ rhs + C h²`.
pub fn brandt_check(
    u: &SolutionField,
    f: &Nonlinearity,
    y: &[f64],
    delta: f64,
) -> Result<BrandtReport> {
    let grid = u.grid();
    let n = grid.dimension();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    let h = grid.h();
    let multi: Vec<usize> = (0..n)
        .map(|a| ((y[a] - grid.bbox().lo[a]) / h).round().max(0.0) as usize)
        .collect();
    if multi.iter().zip(grid.shape()).any(|(i, s)| i >= s) {
        return Err(Error::BallExitsDomain {
            center: y.to_vec(),
            radius: delta,
        });
    }
    let idx = grid.lattice_index(&multi);
    if dist2(&grid.position(idx), y) > 1e-18 {
        return Err(Error::invalid("center must be a lattice node"));
    }
    if !matches!(grid.kind(idx), NodeKind::Interior(_)) || !ball_inside(grid, y, delta.max(h)) {
        return Err(Error::BallExitsDomain {
            center: y.to_vec(),
            radius: delta,
        });
    }
    let lat = u.lattice();
    let gradient: Vec<f64> = (0..n)
        .map(|a| {
            let m = grid
                .neighbor(idx, a, -1)
                .expect("interior node has neighbours");
            let p = grid
                .neighbor(idx, a, 1)
                .expect("interior node has neighbours");
            (lat[p] - lat[m]) / (2.0 * h)
        })
        .collect();
    let lhs = gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut u_max = 0.0f64;
    let mut f_max = 0.0f64;
    for (node, v) in grid.interior().iter().zip(u.values()) {
        if dist2(&node.position, y) <= delta * delta {
            u_max = u_max.max(v.abs());
            f_max = f_max.max(f.eval(*v)?.abs());
        }
    }
    let rhs = 2.0 * n as f64 / delta * u_max + delta / 4.0 * f_max;
    let slack = rhs - lhs;
    Ok(BrandtReport {
        center: y.to_vec(),
        delta,
        gradient,
        lhs,
        u_max,
        f_max,
        rhs,
        slack,
        holds: slack >= -BRANDT_SCHEME_C * h * h,
    })
}

/// Largest admissible radius at `y` (multiple of `h/4`), at most `cap`.
fn admissible_radius(grid: &DomainGrid, y: &[f64], cap: f64) -> f64 {
    let step = grid.h() / 4.0;
    let mut r = 0.0;
    while r + step <= cap && ball_inside(grid, y, r + step) {
        r += step;
    }
    r
}

/// Runs [`brandt_check`] at `count` random interior nodes with random
/// admissible radii in `[h, min(admissible, max_delta)]`.
pub fn random_brandt_probes(
    u: &SolutionField,
    f: &Nonlinearity,
    count: usize,
    seed: u64,
    max_delta: f64,
) -> Result<Vec<BrandtReport>> {
    let grid = u.grid();
    let h = grid.h();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count.max(1) {
            return Err(Error::TooFewNodes {
                found: out.len(),
                required: count,
            });
        }
        let row = rng.random_range(0..grid.n_interior());
        let y = grid.interior()[row].position.clone();
        let cap = admissible_radius(grid, &y, max_delta);
        if cap < h {
            continue;
        }
        let delta = rng.random_range(h..=cap);
        out.push(brandt_check(u, f, &y, delta)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationFit {
    pub center: Vec<f64>,
    /// Radii used in the fit, decreasing.
    pub radii: Vec<f64>,
    pub osc_values: Vec<f64>,
    pub samples: Vec<usize>,
    pub alpha_fit: f64,
    /// `exp` of the intercept: `osc ≈ C r^α`.
    pub c_fit: f64,
    /// Whether the largest requested radius was dropped for touching the
    /// truncation buffer.
    pub discarded_largest: bool,
}

/// Samples of `u` on `Ω̄ ∩ B(x0, r)`: interior nodes and the boundary points
/// reached by stencil arms, with their values.
fn closure_samples(u: &SolutionField) -> Vec<(Vec<f64>, f64)> {
    let grid = u.grid();
    let mut out: Vec<(Vec<f64>, f64)> = grid
        .interior()
        .iter()
        .zip(u.values())
        .map(|(n, v)| (n.position.clone(), *v))
        .collect();
    for (p, _) in grid.boundary_points() {
        let v = u.trace().eval(&p);
        out.push((p, v));
    }
    out
}

/// Fits `osc_{Ω ∩ B(x0, r)} u ≈ C r^α` by least squares in log-log
/// coordinates. `x0` must lie outside the open domain (on its boundary).
pub fn oscillation_fit(u: &SolutionField, x0: &[f64], radii: &[f64]) -> Result<OscillationFit> {
    let grid = u.grid();
    if x0.len() != grid.dimension() {
        return Err(Error::DimensionMismatch {
            expected: grid.dimension(),
            got: x0.len(),
        });
    }
    if grid.domain().contains(x0) {
        return Err(Error::invalid(
            "oscillation center must lie on the boundary",
        ));
    }
    let mut radii: Vec<f64> = radii.to_vec();
    if radii.len() < 2 || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("need at least two positive radii"));
    }
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();
    let buffer = crate::moving_plane::BUFFER_CELLS * grid.h();
    let discarded_largest = grid.distance_to_artificial(x0) - radii[0] < buffer;
    if discarded_largest {
        radii.remove(0);
        if radii.len() < 2 {
            return Err(Error::invalid("radii reach the truncation buffer"));
        }
    }
    let samples = closure_samples(u);
    let mut osc_values = Vec::with_capacity(radii.len());
    let mut counts = Vec::with_capacity(radii.len());
    for &r in &radii {
        let (mut lo, mut hi, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0);
        for (p, v) in &samples {
            if dist2(p, x0) <= r * r * (1.0 + 1e-12) {
                lo = lo.min(*v);
                hi = hi.max(*v);
                count += 1;
            }
        }
        osc_values.push(if count > 0 { hi - lo } else { 0.0 });
        counts.push(count);
    }
    let smallest = *counts.last().unwrap();
    if smallest < MIN_BALL_NODES {
        return Err(Error::TooFewNodes {
            found: smallest,
            required: MIN_BALL_NODES,
        });
    }
    if osc_values.iter().any(|o| !(*o > 0.0)) {
        return Err(Error::invalid(
            "oscillation vanishes on a ball; exponent undefined",
        ));
    }
    let lr: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let lo: Vec<f64> = osc_values.iter().map(|o| o.ln()).collect();
    let alpha_fit = least_squares_slope(&lr, &lo);
    let n = lr.len() as f64;
    let intercept = (lo.iter().sum::<f64>() - alpha_fit * lr.iter().sum::<f64>()) / n;
    Ok(OscillationFit {
        center: x0.to_vec(),
        radii,
        osc_values,
        samples: counts,
        alpha_fit,
        c_fit: intercept.exp(),
        discarded_largest,
    })
}

/// Relative change `|α_coarse - α_fine| / |α_fine|` and whether it is within
/// [`STABILITY_TOL`].
pub fn refinement_stability(coarse: &OscillationFit, fine: &OscillationFit) -> (f64, bool) {
    let change = (coarse.alpha_fit - fine.alpha_fit).abs() / fine.alpha_fit.abs();
    (change, change <= STABILITY_TOL)
}
