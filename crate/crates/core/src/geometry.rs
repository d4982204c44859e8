//! Epigraph and strip-type domains, caps, reflections and section measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear profile sampled on a rectilinear lattice in one or two
/// variables. Outside the lattice the profile is extended by clamping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledProfile {
    /// Sorted, strictly increasing coordinates per axis.
    pub axes: Vec<Vec<f64>>,
    /// Values in row-major order with the first axis varying fastest.
    pub values: Vec<f64>,
}

impl SampledProfile {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::invalid(
                "sampled profiles support one or two variables",
            ));
        }
        for axis in &axes {
            if axis.len() < 2 {
                return Err(Error::invalid(
                    "each sampled axis needs at least two points",
                ));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid("sampled axis is not strictly increasing"));
            }
        }
        let expected: usize = axes.iter().map(Vec::len).product();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sampled profile contains non-finite values"));
        }
        Ok(SampledProfile { axes, values })
    }

    /// One-variable profile from `(x, g)` pairs (any order).
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (xs, gs) = pairs.into_iter().unzip();
        Self::new(vec![xs], gs)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        // (lower index, weight of upper node) per axis
        let locate = |axis: &[f64], t: f64| -> (usize, f64) {
            let n = axis.len();
            if t <= axis[0] {
                return (0, 0.0);
            }
            if t >= axis[n - 1] {
                return (n - 2, 1.0);
            }
            let k = axis.partition_point(|&a| a <= t) - 1;
            let k = k.min(n - 2);
            (k, (t - axis[k]) / (axis[k + 1] - axis[k]))
        };
        match self.axes.len() {
            1 => {
                let (k, w) = locate(&self.axes[0], x[0]);
                self.values[k] * (1.0 - w) + self.values[k + 1] * w
            }
            _ => {
                let nx = self.axes[0].len();
                let (i, wx) = locate(&self.axes[0], x[0]);
                let (j, wy) = locate(&self.axes[1], x.get(1).copied().unwrap_or(0.0));
                let v = |a: usize, b: usize| self.values[a + nx * b];
                (1.0 - wx) * (1.0 - wy) * v(i, j)
                    + wx * (1.0 - wy) * v(i + 1, j)
                    + (1.0 - wx) * wy * v(i, j + 1)
                    + wx * wy * v(i + 1, j + 1)
            }
        }
    }
}

/// Catalog of boundary profiles `g: R^{N-1} -> R`.
///
/// One-variable entries act on `x_1` only; `CoerciveQuadratic` uses `|x'|^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpigraphKind {
    HalfSpace,
    /// Two quarter-circle arcs of radius 2 meeting in a cusp at the origin, flat outside.
    LipschitzG1,
    /// `g1(x) + (x - 6)^+`.
    LipschitzG2,
    /// `sum_{n>=1} b^{-n alpha} cos(b^n pi x)`, truncated by a geometric tail bound.
    Weierstrass {
        b: u32,
        alpha: f64,
        tol: f64,
    },
    CoerciveQuadratic,
    ExpX1,
    CustomSampled {
        profile: SampledProfile,
    },
}

impl EpigraphKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EpigraphKind::HalfSpace => "half_space",
            EpigraphKind::LipschitzG1 => "lipschitz_g1",
            EpigraphKind::LipschitzG2 => "lipschitz_g2",
            EpigraphKind::Weierstrass { .. } => "weierstrass",
            EpigraphKind::CoerciveQuadratic => "coercive_quadratic",
            EpigraphKind::ExpX1 => "exp_x1",
            EpigraphKind::CustomSampled { .. } => "custom_sampled",
        }
    }

    /// Whether every cap `{g < x_N < λ}` is bounded.
    pub fn is_coercive(&self) -> bool {
        matches!(self, EpigraphKind::CoerciveQuadratic)
    }
}

/// Number of Weierstrass terms kept: the sum runs over `1..n` where `n` is
/// the first index whose geometric tail `b^{-n alpha} / (1 - b^{-alpha})`
/// is at most `tol`.
pub fn weierstrass_terms(b: u32, alpha: f64, tol: f64) -> usize {
    let ratio = (b as f64).powf(-alpha);
    let denom = 1.0 - ratio;
    let mut n = 1usize;
    let mut term = ratio;
    while term / denom > tol {
        n += 1;
        term *= ratio;
    }
    n - 1
}

fn weierstrass(b: u32, alpha: f64, tol: f64, x: f64) -> f64 {
    let terms = weierstrass_terms(b, alpha, tol);
    let b = b as f64;
    // phase = b^n x mod 2, advanced by the b-adic shift so large frequencies
    // never multiply pi directly
    let mut phase = x.rem_euclid(2.0);
    let mut sum = 0.0;
    for n in 1..=terms {
        phase = (b * phase).rem_euclid(2.0);
        sum += b.powf(-(n as f64) * alpha) * (std::f64::consts::PI * phase).cos();
    }
    sum
}

fn g1(x: f64) -> f64 {
    if x <= -4.0 {
        0.0
    } else if x <= 0.0 {
        (4.0 - (x + 2.0).powi(2)).max(0.0).sqrt()
    } else if x <= 2.0 {
        (4.0 - (x - 2.0).powi(2)).max(0.0).sqrt()
    } else {
        2.0
    }
}

fn g2(x: f64) -> f64 {
    g1(x) + (x - 6.0).max(0.0)
}

/// A catalog epigraph `Ω = {x_N > g(x') + shift}` in dimension `N ≥ 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpigraphSpec {
    pub dimension: usize,
    pub kind: EpigraphKind,
    #[serde(default)]
    pub shift: f64,
}

/// Number of points of the canonical normalization lattice.
pub const NORMALIZATION_PROBES: usize = 10_000;

impl EpigraphSpec {
    /// Unshifted profile.
    pub fn new(dimension: usize, kind: EpigraphKind) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::invalid("epigraphs need dimension N >= 2"));
        }
        if let EpigraphKind::Weierstrass { b, alpha, tol } = kind {
            if b < 2 || !(alpha > 0.0 && alpha < 1.0) || !(tol > 0.0) {
                return Err(Error::invalid(
                    "weierstrass needs integer b > 1, alpha in (0,1), tol > 0",
                ));
            }
        }
        if let EpigraphKind::CustomSampled { profile } = &kind {
            if profile.axes.len() != dimension - 1 {
                return Err(Error::DimensionMismatch {
                    expected: dimension - 1,
                    got: profile.axes.len(),
                });
            }
        }
        Ok(EpigraphSpec {
            dimension,
            kind,
            shift: 0.0,
        })
    }

    /// Profile shifted so that its infimum over the canonical probe lattice is 0.
    pub fn normalized(dimension: usize, kind: EpigraphKind) -> Result<Self> {
        let mut spec = Self::new(dimension, kind)?;
        spec.shift = match &spec.kind {
            EpigraphKind::Weierstrass { b, alpha, .. } if b % 2 == 1 => {
                // odd b: every cosine equals -1 at x = 1
                1.0 / ((*b as f64).powf(*alpha) - 1.0)
            }
            EpigraphKind::Weierstrass { .. } | EpigraphKind::CustomSampled { .. } => {
                let min = spec
                    .probe_lattice(NORMALIZATION_PROBES)
                    .iter()
                    .map(|p| spec.raw(p))
                    .fold(f64::INFINITY, f64::min);
                -min
            }
            _ => 0.0,
        };
        Ok(spec)
    }

    pub fn half_space(dimension: usize) -> Self {
        EpigraphSpec {
            dimension,
            kind: EpigraphKind::HalfSpace,
            shift: 0.0,
        }
    }

    fn raw(&self, x_prime: &[f64]) -> f64 {
        let x1 = x_prime.first().copied().unwrap_or(0.0);
        match &self.kind {
            EpigraphKind::HalfSpace => 0.0,
            EpigraphKind::LipschitzG1 => g1(x1),
            EpigraphKind::LipschitzG2 => g2(x1),
            EpigraphKind::Weierstrass { b, alpha, tol } => weierstrass(*b, *alpha, *tol, x1),
            EpigraphKind::CoerciveQuadratic => x_prime.iter().map(|t| t * t).sum(),
            EpigraphKind::ExpX1 => x1.exp(),
            EpigraphKind::CustomSampled { profile } => profile.eval(x_prime),
        }
    }

    /// `g(x')` including the vertical shift.
    pub fn eval_g(&self, x_prime: &[f64]) -> f64 {
        self.raw(x_prime) + self.shift
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let n = x.len();
        x[n - 1] > self.eval_g(&x[..n - 1])
    }

    /// Canonical lattice of `count` points (per first coordinate) used for
    /// normalization. Periodic profiles are probed over one period.
    pub fn probe_lattice(&self, count: usize) -> Vec<Vec<f64>> {
        let d = self.dimension - 1;
        let (lo, hi) = match &self.kind {
            EpigraphKind::Weierstrass { .. } => (0.0, 2.0),
            EpigraphKind::CustomSampled { profile } => {
                (profile.axes[0][0], *profile.axes[0].last().unwrap())
            }
            _ => (-50.0, 50.0),
        };
        let periodic = matches!(self.kind, EpigraphKind::Weierstrass { .. });
        let steps = if periodic { count } else { count - 1 };
        (0..count)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / steps as f64;
                let mut p = vec![0.0; d];
                p[0] = t;
                p
            })
            .collect()
    }
}

/// `(x', 2λ - x_N)`.
pub fn reflect(x: &[f64], lambda: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    let n = y.len();
    y[n - 1] = 2.0 * lambda - y[n - 1];
    y
}

/// Membership of `x` in the cap `{g(x') < x_N < λ}`.
pub fn cap_membership(spec: &EpigraphSpec, x: &[f64], lambda: f64) -> bool {
    let n = x.len();
    let xn = x[n - 1];
    spec.eval_g(&x[..n - 1]) < xn && xn < lambda
}

/// Radius function of a domain of revolution `{|(x_2..x_N)| < φ(x_1)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RevolutionProfile {
    /// `base + amplitude * cos(frequency * x_1)`.
    Cosine {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
    Sampled {
        profile: SampledProfile,
    },
}

impl RevolutionProfile {
    pub fn eval(&self, x1: f64) -> f64 {
        match self {
            RevolutionProfile::Cosine {
                base,
                amplitude,
                frequency,
            } => base + amplitude * (frequency * x1).cos(),
            RevolutionProfile::Sampled { profile } => profile.eval(&[x1]),
        }
    }
}

/// Open subsets of `R^N` given by a membership predicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneralOpenSet {
    /// `{lo < x_N < hi}`.
    Strip {
        lo: f64,
        hi: f64,
    },
    /// Unit band `|y| < 1` joined with two thinning bands around `y = ±|x|`.
    Omega1,
    /// `{0 < y < x^2}`.
    Omega3,
    Epigraph {
        spec: EpigraphSpec,
    },
    /// All coordinates positive.
    Orthant,
    Revolution {
        profile: RevolutionProfile,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

/// Half-width of the bands of `Ω₁`: `asinh(e^{-|x|})`.
pub fn omega1_halfwidth(x: f64) -> f64 {
    (-x.abs()).exp().asinh()
}

impl GeneralOpenSet {
    pub fn contains(&self, x: &[f64]) -> bool {
        let n = x.len();
        match self {
            GeneralOpenSet::Strip { lo, hi } => *lo < x[n - 1] && x[n - 1] < *hi,
            GeneralOpenSet::Omega1 => {
                let (px, y) = (x[0], x[1]);
                let h = omega1_halfwidth(px);
                let a = px.abs();
                y.abs() < 1.0 || (y - a).abs() < h || (y + a).abs() < h
            }
            GeneralOpenSet::Omega3 => 0.0 < x[1] && x[1] < x[0] * x[0],
            GeneralOpenSet::Epigraph { spec } => spec.contains(x),
            GeneralOpenSet::Orthant => x.iter().all(|&t| t > 0.0),
            GeneralOpenSet::Revolution { profile } => {
                let r2: f64 = x[1..].iter().map(|t| t * t).sum();
                r2.sqrt() < profile.eval(x[0])
            }
            GeneralOpenSet::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                d2 < radius * radius
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            GeneralOpenSet::Strip { .. } => "strip",
            GeneralOpenSet::Omega1 => "omega1",
            GeneralOpenSet::Omega3 => "omega3",
            GeneralOpenSet::Epigraph { .. } => "epigraph",
            GeneralOpenSet::Orthant => "orthant",
            GeneralOpenSet::Revolution { .. } => "revolution",
            GeneralOpenSet::Ball { .. } => "ball",
        }
    }
}

/// Line-probe parameters for [`section_measure`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionParams {
    pub line_resolution: f64,
    /// Probes are truncated to `[-window, window]` along the direction.
    pub window: f64,
}

impl Default for SectionParams {
    fn default() -> Self {
        SectionParams {
            line_resolution: 1e-3,
            window: 100.0,
        }
    }
}

/// Result of probing one line `{base + t ν}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LineProbe {
    /// Disjoint open intervals in the line parameter `t`, increasing.
    pub intervals: Vec<(f64, f64)>,
    pub touches_window: bool,
}

impl LineProbe {
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionMeasure {
    pub value: f64,
    pub per_line: Vec<(Vec<f64>, f64)>,
    pub direction: Vec<f64>,
}

/// Orthonormal basis of the hyperplane orthogonal to `nu`. For a coordinate
/// direction `e_k` this is the remaining coordinate vectors in order.
pub fn orthogonal_complement(nu: &[f64]) -> Vec<Vec<f64>> {
    let n = nu.len();
    let drop = (0..n)
        .max_by(|&a, &b| nu[a].abs().total_cmp(&nu[b].abs()))
        .unwrap_or(0);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for k in (0..n).filter(|&k| k != drop) {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        for q in std::iter::once(nu).chain(basis.iter().map(Vec::as_slice)) {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            if dot != 0.0 {
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        v.iter_mut().for_each(|t| *t /= norm);
        basis.push(v);
    }
    basis
}

fn normalize(nu: &[f64]) -> Result<Vec<f64>> {
    let norm = nu.iter().map(|t| t * t).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::invalid("direction must be a nonzero finite vector"));
    }
    Ok(nu.iter().map(|t| t / norm).collect())
}

/// Intervals of `{t : base + t ν ∈ set}` within the probe window. Crossings
/// are located at `line_resolution` spacing and refined by bisection.
pub fn probe_line(
    set: &GeneralOpenSet,
    base: &[f64],
    nu: &[f64],
    params: &SectionParams,
) -> LineProbe {
    let point = |t: f64| -> Vec<f64> { base.iter().zip(nu).map(|(b, v)| b + t * v).collect() };
    let inside = |t: f64| set.contains(&point(t));
    let steps = (2.0 * params.window / params.line_resolution).ceil() as usize;
    let dt = 2.0 * params.window / steps as f64;
    let t_at = |k: usize| -params.window + k as f64 * dt;
    let tol = params.line_resolution * 1e-10;

    let refine = |mut a: f64, mut b: f64, a_inside: bool| -> f64 {
        while b - a > tol {
            let m = 0.5 * (a + b);
            if inside(m) == a_inside {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };

    let mut intervals = Vec::new();
    let mut prev = inside(t_at(0));
    let touches_start = prev;
    let mut start = if prev { Some(t_at(0)) } else { None };
    for k in 1..=steps {
        let cur = inside(t_at(k));
        if cur != prev {
            let crossing = refine(t_at(k - 1), t_at(k), prev);
            if cur {
                start = Some(crossing);
            } else if let Some(s) = start.take() {
                intervals.push((s, crossing));
            }
        }
        prev = cur;
    }
    if let Some(s) = start {
        intervals.push((s, t_at(steps)));
    }
    LineProbe {
        intervals,
        touches_window: touches_start || prev,
    }
}

fn line_base(x_prime: &[f64], complement: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut base = vec![0.0; n];
    for (c, e) in x_prime.iter().zip(complement) {
        base.iter_mut().zip(e).for_each(|(b, v)| *b += c * v);
    }
    base
}

/// Section of `set` in direction `nu`: the largest 1-D measure of its
/// intersection with the probe lines `{x'} × R ν`, `x' ∈ probe_grid`.
pub fn section_measure(
    set: &GeneralOpenSet,
    nu: &[f64],
    probe_grid: &[Vec<f64>],
    params: &SectionParams,
) -> Result<SectionMeasure> {
    if !(params.line_resolution > 0.0) || !(params.window > 0.0) {
        return Err(Error::invalid(
            "line_resolution and window must be positive",
        ));
    }
    if probe_grid.is_empty() {
        return Err(Error::invalid("probe grid is empty"));
    }
    let nu = normalize(nu)?;
    let n = nu.len();
    if let Some(p) = probe_grid.iter().find(|p| p.len() != n - 1) {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            got: p.len(),
        });
    }
    let complement = orthogonal_complement(&nu);
    let probes: Vec<(Vec<f64>, LineProbe)> = probe_grid
        .par_iter()
        .map(|xp| {
            let base = line_base(xp, &complement, n);
            (xp.clone(), probe_line(set, &base, &nu, params))
        })
        .collect();
    let touching = probes.iter().filter(|(_, p)| p.touches_window).count();
    if touching > 0 {
        return Err(Error::UnboundedSection {
            touching,
            window: params.window,
        });
    }
    let per_line: Vec<(Vec<f64>, f64)> = probes
        .into_iter()
        .map(|(xp, p)| (xp, p.measure()))
        .collect();
    let value = per_line.iter().map(|(_, m)| *m).fold(0.0, f64::max);
    Ok(SectionMeasure {
        value,
        per_line,
        direction: nu,
    })
}

/// `sup_{x'} ∫_{S_{x'}} |x_N|^{2δ} e^{2γ|x_N|} dx_N` over the probe lines,
/// the weighted section of the growth-type comparison principle. Each
/// interval is integrated with composite Simpson on 64 panels.
pub fn weighted_section(
    set: &GeneralOpenSet,
    nu: &[f64],
    probe_grid: &[Vec<f64>],
    params: &SectionParams,
    delta: f64,
    gamma: f64,
) -> Result<f64> {
    let nu = normalize(nu)?;
    let n = nu.len();
    let complement = orthogonal_complement(&nu);
    let weight = |x_n: f64| x_n.abs().powf(2.0 * delta) * (2.0 * gamma * x_n.abs()).exp();
    let values: Vec<std::result::Result<f64, ()>> = probe_grid
        .par_iter()
        .map(|xp| {
            let base = line_base(xp, &complement, n);
            let probe = probe_line(set, &base, &nu, params);
            if probe.touches_window {
                return Err(());
            }
            let mut total = 0.0;
            let xn = |t: f64| base[n - 1] + t * nu[n - 1];
            // the weight has a kink where x_N = 0
            let kink = if nu[n - 1] != 0.0 {
                Some(-base[n - 1] / nu[n - 1])
            } else {
                None
            };
            for &(a, b) in &probe.intervals {
                let pieces = match kink {
                    Some(k) if a < k && k < b => vec![(a, k), (k, b)],
                    _ => vec![(a, b)],
                };
                for (a, b) in pieces {
                    let panels = 64;
                    let dt = (b - a) / panels as f64;
                    let mut s = weight(xn(a)) + weight(xn(b));
                    for k in 1..panels {
                        let c = if k % 2 == 1 { 4.0 } else { 2.0 };
                        s += c * weight(xn(a + k as f64 * dt));
                    }
                    total += s * dt / 3.0;
                }
            }
            Ok(total)
        })
        .collect();
    let touching = values.iter().filter(|v| v.is_err()).count();
    if touching > 0 {
        return Err(Error::UnboundedSection {
            touching,
            window: params.window,
        });
    }
    Ok(values.into_iter().flatten().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn g1_piecewise_values() {
        let spec = EpigraphSpec::new(2, EpigraphKind::LipschitzG1).unwrap();
        assert_eq!(spec.eval_g(&[-5.0]), 0.0);
        assert_eq!(spec.eval_g(&[3.0]), 2.0);
        assert_abs_diff_eq!(spec.eval_g(&[-2.0]), 2.0, epsilon = 1e-15);
        assert_eq!(spec.eval_g(&[0.0]), 0.0);
    }

    #[test]
    fn g2_is_g1_plus_ramp() {
        let s1 = EpigraphSpec::new(2, EpigraphKind::LipschitzG1).unwrap();
        let s2 = EpigraphSpec::new(2, EpigraphKind::LipschitzG2).unwrap();
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64;
            assert_abs_diff_eq!(s2.eval_g(&[x]), s1.eval_g(&[x]) + (x - 6.0).max(0.0));
        }
        assert_eq!(s2.eval_g(&[8.0]), 4.0);
    }

    #[test]
    fn weierstrass_at_origin_matches_geometric_series() {
        let spec = EpigraphSpec::new(
            2,
            EpigraphKind::Weierstrass {
                b: 2,
                alpha: 0.5,
                tol: 1e-12,
            },
        )
        .unwrap();
        // sum_{n>=1} 2^{-n/2} = 1 / (sqrt 2 - 1)
        let oracle = 1.0 / (2f64.sqrt() - 1.0);
        assert_abs_diff_eq!(spec.eval_g(&[0.0]), oracle, epsilon = 1e-11);
        assert_abs_diff_eq!(spec.eval_g(&[0.0]), 2.414214, epsilon = 1e-6);
    }

    #[test]
    fn weierstrass_truncation_is_first_certified_index() {
        let (b, alpha, tol) = (3u32, 0.4, 1e-8);
        let k = weierstrass_terms(b, alpha, tol);
        let r = (b as f64).powf(-alpha);
        let tail = |n: usize| r.powi(n as i32) / (1.0 - r);
        assert!(tail(k + 1) <= tol);
        assert!(tail(k) > tol);
    }

    #[test]
    fn odd_weierstrass_normalization_is_exact() {
        let spec = EpigraphSpec::normalized(
            2,
            EpigraphKind::Weierstrass {
                b: 3,
                alpha: 0.5,
                tol: 1e-12,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(spec.eval_g(&[1.0]), 0.0, epsilon = 1e-11);
    }

    #[test]
    fn catalog_normalization() {
        let kinds = vec![
            EpigraphKind::HalfSpace,
            EpigraphKind::LipschitzG1,
            EpigraphKind::LipschitzG2,
            EpigraphKind::Weierstrass {
                b: 2,
                alpha: 0.5,
                tol: 1e-10,
            },
            EpigraphKind::Weierstrass {
                b: 3,
                alpha: 0.3,
                tol: 1e-10,
            },
            EpigraphKind::CoerciveQuadratic,
            EpigraphKind::ExpX1,
            EpigraphKind::CustomSampled {
                profile: SampledProfile::from_pairs(vec![(-1.0, 3.0), (0.0, 1.5), (2.0, 4.0)])
                    .unwrap(),
            },
        ];
        let resolution = 1e-3;
        for kind in kinds {
            let spec = EpigraphSpec::normalized(2, kind).unwrap();
            let min = spec
                .probe_lattice(NORMALIZATION_PROBES)
                .iter()
                .map(|p| spec.eval_g(p))
                .fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-12, "{}: min {min}", spec.kind.tag());
            assert!(min <= resolution, "{}: min {min}", spec.kind.tag());
        }
    }

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect(&[0.0, 0.5], 1.0), vec![0.0, 1.5]);
        assert_eq!(reflect(&[0.0, 1.0], 1.0), vec![0.0, 1.0]);
    }

    #[test]
    fn cap_examples() {
        let half = EpigraphSpec::half_space(2);
        assert!(cap_membership(&half, &[0.0, 0.5], 1.0));
        assert!(!cap_membership(&half, &[0.0, 1.5], 1.0));
        let g1 = EpigraphSpec::new(2, EpigraphKind::LipschitzG1).unwrap();
        assert!(cap_membership(&g1, &[3.0, 2.5], 3.0));
        assert!(!cap_membership(&g1, &[3.0, 1.5], 3.0));
    }

    #[test]
    fn custom_profile_interpolates_linearly() {
        let p = SampledProfile::from_pairs(vec![(0.0, 0.0), (1.0, 2.0), (3.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(p.eval(&[0.5]), 1.0);
        assert_abs_diff_eq!(p.eval(&[2.0]), 1.0);
        assert_eq!(p.eval(&[-4.0]), 0.0);
        assert_eq!(p.eval(&[9.0]), 0.0);
        let q = SampledProfile::new(
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![0.0, 1.0, 2.0, 3.0],
        )
        .unwrap();
        assert_abs_diff_eq!(q.eval(&[0.5, 0.5]), 1.5);
    }

    #[test]
    fn complement_of_coordinate_direction_is_standard() {
        let c = orthogonal_complement(&[0.0, 0.0, 1.0]);
        assert_eq!(c, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let d = orthogonal_complement(&[0.6, 0.8]);
        let dot: f64 = d[0].iter().zip([0.6, 0.8]).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(dot, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn strip_section_equals_width() {
        let strip = GeneralOpenSet::Strip { lo: 0.0, hi: 1.5 };
        let grid: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let params = SectionParams {
            line_resolution: 1e-2,
            window: 10.0,
        };
        let s = section_measure(&strip, &[0.0, 1.0], &grid, &params).unwrap();
        assert!((s.value - 1.5).abs() <= params.line_resolution);
        assert_eq!(s.per_line.len(), 5);
    }

    #[test]
    fn omega1_per_line_values() {
        let params = SectionParams {
            line_resolution: 1e-2,
            window: 20.0,
        };
        let grid = vec![vec![0.0], vec![1.0]];
        let s = section_measure(&GeneralOpenSet::Omega1, &[0.0, 1.0], &grid, &params).unwrap();
        assert_abs_diff_eq!(s.per_line[0].1, 2.0, epsilon = 1e-6);
        // (-1,1) ∪ (1-h, 1+h) ∪ (-1-h, -1+h) with h = asinh(e^{-1})
        let h = (-1f64).exp().asinh();
        assert_abs_diff_eq!(h, 0.3601, epsilon = 1e-4);
        assert_abs_diff_eq!(s.per_line[1].1, 2.0 + 2.0 * h, epsilon = 1e-6);
        assert_abs_diff_eq!(s.per_line[1].1, 2.7201, epsilon = 1e-4);
    }

    #[test]
    fn omega3_is_flagged() {
        let params = SectionParams {
            line_resolution: 1e-2,
            window: 100.0,
        };
        let grid: Vec<Vec<f64>> = (0..=40).map(|i| vec![-20.0 + i as f64]).collect();
        let err = section_measure(&GeneralOpenSet::Omega3, &[0.0, 1.0], &grid, &params);
        assert!(matches!(err, Err(Error::UnboundedSection { .. })));
    }

    #[test]
    fn section_rejects_bad_input() {
        let strip = GeneralOpenSet::Strip { lo: 0.0, hi: 1.0 };
        let params = SectionParams {
            line_resolution: 0.0,
            window: 1.0,
        };
        assert!(section_measure(&strip, &[0.0, 1.0], &[vec![0.0]], &params).is_err());
        let params = SectionParams::default();
        assert!(section_measure(&strip, &[0.0, 1.0], &[], &params).is_err());
    }

    #[test]
    fn weighted_section_of_strip_with_zero_weights_is_width() {
        let strip = GeneralOpenSet::Strip { lo: -1.0, hi: 2.0 };
        let params = SectionParams {
            line_resolution: 1e-2,
            window: 10.0,
        };
        let w = weighted_section(&strip, &[0.0, 1.0], &[vec![0.0]], &params, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(w, 3.0, epsilon = 1e-8);
        // ∫_{-1}^{2} e^{2|y|} dy = (e^2 - 1)/2 + (e^4 - 1)/2
        let w = weighted_section(&strip, &[0.0, 1.0], &[vec![0.0]], &params, 0.0, 1.0).unwrap();
        let exact = ((1f64).exp().powi(2) - 1.0) / 2.0 + ((1f64).exp().powi(4) - 1.0) / 2.0;
        assert_abs_diff_eq!(w, exact, epsilon = 1e-5);
    }
}
