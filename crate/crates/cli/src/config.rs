//! Experiment configuration: a flat JSON object with one nested section per
//! experiment. Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use epigraph_lab::comparison::GridIsometry;
use epigraph_lab::solver::closed_form::ClosedForm;
use epigraph_lab::solver::IterationKind;
use epigraph_lab::{GeneralOpenSet, GridBox, Nonlinearity};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Solve,
    MovingPlane,
    ThresholdScan,
    Uniqueness,
    Symmetry,
    Section,
    Estimates,
    VerifyExamples,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Solve,
        ExperimentKind::MovingPlane,
        ExperimentKind::ThresholdScan,
        ExperimentKind::Uniqueness,
        ExperimentKind::Symmetry,
        ExperimentKind::Section,
        ExperimentKind::Estimates,
        ExperimentKind::VerifyExamples,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::MovingPlane => "moving_plane",
            ExperimentKind::ThresholdScan => "threshold_scan",
            ExperimentKind::Uniqueness => "uniqueness",
            ExperimentKind::Symmetry => "symmetry",
            ExperimentKind::Section => "section",
            ExperimentKind::Estimates => "estimates",
            ExperimentKind::VerifyExamples => "verify_examples",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve -Δu = f(u) on a masked grid and write the field",
            ExperimentKind::MovingPlane => {
                "cap sweep and Hopf-slope check on a solved or closed-form field"
            }
            ExperimentKind::ThresholdScan => {
                "λ₁ over strip widths and random ordered pairs below the threshold"
            }
            ExperimentKind::Uniqueness => "seeded random restarts must all converge to zero",
            ExperimentKind::Symmetry => "solve and measure the defect under grid isometries",
            ExperimentKind::Section => "section measure of an open set along a direction",
            ExperimentKind::Estimates => {
                "interior gradient bounds and boundary oscillation exponents"
            }
            ExperimentKind::VerifyExamples => {
                "closed-form residual orders and the harmonic growth counterexample"
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
}

impl GridConfig {
    pub fn grid_box(&self) -> GridBox {
        GridBox::new(self.lo.clone(), self.hi.clone())
    }
}

/// Dirichlet data on the physical boundary and the truncation faces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceConfig {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    ClosedForm {
        profile: ClosedForm,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Max-norm residual of semilinear solves.
    pub solve: f64,
    /// Relative residual of inner Krylov solves.
    pub linear: f64,
    pub moving_plane: f64,
    pub comparison: f64,
    pub symmetry: f64,
    /// `‖u‖∞` accepted as zero in uniqueness restarts.
    pub uniqueness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solve: 1e-9,
            linear: 1e-12,
            moving_plane: 1e-8,
            comparison: 1e-9,
            symmetry: 1e-8,
            uniqueness: 1e-8,
        }
    }
}

/// Where the field under test comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionSource {
    #[default]
    Solve,
    ClosedForm {
        profile: ClosedForm,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub method: IterationKind,
    /// Defaults to 100 for Newton and 2000 for Picard.
    pub max_iterations: Option<usize>,
    pub damping: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            method: IterationKind::Newton,
            max_iterations: None,
            damping: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl Range {
    /// `from, from + step, …` up to `to` inclusive (within `1e-9 step`).
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.from + k as f64 * self.step).collect()
    }

    fn validate(&self, field: &str) -> Result<(), CliError> {
        finite(&format!("{field}.from"), self.from)?;
        finite(&format!("{field}.to"), self.to)?;
        positive(&format!("{field}.step"), self.step)?;
        if self.to < self.from {
            return Err(CliError::validation(format!("{field}: to < from")));
        }
        if (self.to - self.from) / self.step > 1e6 {
            return Err(CliError::validation(format!(
                "{field}: more than 10^6 values"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneExpectation {
    /// Caps ordered for every λ.
    #[default]
    Monotone,
    /// Caps ordered, `∂_N u > 0` and the Hopf identity at `O(h²)`.
    Strict,
    /// `∂_N u` changes sign somewhere in the window.
    SignChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingPlaneSection {
    #[serde(default)]
    pub solution: SolutionSource,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda_range: Option<Range>,
    #[serde(default)]
    pub hopf_lambdas: Vec<f64>,
    #[serde(default)]
    pub expect: MonotoneExpectation,
    /// Checks `flat_above ≤ value` when set.
    #[serde(default)]
    pub flat_above_at_most: Option<f64>,
    /// `C` in the Hopf defect bound `C h²`.
    #[serde(default = "default_scheme_constant")]
    pub hopf_constant: f64,
}

fn default_scheme_constant() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdScanSection {
    pub lipschitz: f64,
    #[serde(default)]
    pub widths: Option<Vec<f64>>,
    #[serde(default)]
    pub width_range: Option<Range>,
    #[serde(default = "default_scan_cells")]
    pub cells: usize,
    /// Random ordered pairs per width at or below the threshold.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_pair_cells")]
    pub pair_cells: usize,
    /// Accepted relative error of the failure width against `π / sqrt(L)`.
    #[serde(default = "default_width_tol")]
    pub width_rel_tol: f64,
}

fn default_scan_cells() -> usize {
    128
}
fn default_pairs() -> usize {
    20
}
fn default_pair_cells() -> usize {
    16
}
fn default_width_tol() -> f64 {
    0.02
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniquenessSection {
    pub restarts: usize,
    pub amplitude: f64,
}

impl Default for UniquenessSection {
    fn default() -> Self {
        UniquenessSection {
            restarts: 20,
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySection {
    pub isometry: GridIsometry,
    #[serde(default)]
    pub buffer: f64,
    /// Second isometry (typically a period translation) checked on the same field.
    #[serde(default)]
    pub periodicity: Option<GridIsometry>,
    #[serde(default = "default_periodicity_tol")]
    pub periodicity_tol: f64,
    /// Closed form the field must match at every interior node.
    #[serde(default)]
    pub exact: Option<ClosedForm>,
    #[serde(default = "default_exact_tol")]
    pub exact_tol: f64,
}

fn default_periodicity_tol() -> f64 {
    1e-6
}
fn default_exact_tol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSection {
    pub direction: Vec<f64>,
    /// Explicit probe points in the complement coordinates.
    #[serde(default)]
    pub probes: Option<Vec<Vec<f64>>>,
    /// One-parameter probe family (complement of dimension one).
    #[serde(default)]
    pub probe_range: Option<Range>,
    #[serde(default = "default_line_resolution")]
    pub line_resolution: f64,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default)]
    pub expect_at_most: Option<f64>,
    #[serde(default)]
    pub expect_value: Option<f64>,
    #[serde(default)]
    pub expect_unbounded: bool,
}

fn default_line_resolution() -> f64 {
    1e-3
}
fn default_window() -> f64 {
    100.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatesSection {
    #[serde(default)]
    pub solution: SolutionSource,
    #[serde(default = "default_brandt_probes")]
    pub brandt_probes: usize,
    pub max_delta: f64,
    #[serde(default)]
    pub oscillation_points: Vec<Vec<f64>>,
    #[serde(default)]
    pub radii: Vec<f64>,
}

fn default_brandt_probes() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSection {
    #[serde(default = "default_m")]
    pub m: u32,
    pub cells: usize,
    pub x_max: f64,
    #[serde(default = "default_slope_tol")]
    pub slope_rel_tol: f64,
    /// `C` in the residual bound `C h² cosh(m x_max)`.
    #[serde(default = "default_scheme_constant")]
    pub residual_constant: f64,
}

fn default_m() -> u32 {
    1
}
fn default_slope_tol() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyExamplesSection {
    #[serde(default = "default_profiles")]
    pub profiles: Vec<ClosedForm>,
    /// Grid spacings of the refinement ladder.
    #[serde(default = "default_spacings")]
    pub h: Vec<f64>,
    #[serde(default = "default_min_order")]
    pub min_order: f64,
    /// `C` in the residual bound `C h²`.
    #[serde(default = "default_residual_constant")]
    pub residual_constant: f64,
    #[serde(default)]
    pub growth: Option<GrowthSection>,
}

impl Default for VerifyExamplesSection {
    fn default() -> Self {
        VerifyExamplesSection {
            profiles: default_profiles(),
            h: default_spacings(),
            min_order: default_min_order(),
            residual_constant: default_residual_constant(),
            growth: None,
        }
    }
}

fn default_profiles() -> Vec<ClosedForm> {
    vec![ClosedForm::ClampedQuartic, ClosedForm::QuarticComposite]
}
fn default_spacings() -> Vec<f64> {
    vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
}
fn default_min_order() -> f64 {
    1.8
}
fn default_residual_constant() -> f64 {
    1000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain: Option<GeneralOpenSet>,
    #[serde(default)]
    pub nonlinearity: Option<Nonlinearity>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Boundary profile `x, g` (or `x1, x2, g`) replacing the epigraph's `g`.
    #[serde(default)]
    pub profile_csv: Option<PathBuf>,
    /// Tabulated nonlinearity `t, f` replacing `nonlinearity`.
    #[serde(default)]
    pub table_csv: Option<PathBuf>,
    /// Shift a Weierstrass or sampled profile so that its infimum is 0.
    #[serde(default)]
    pub normalize_profile: bool,
    #[serde(default)]
    pub svg: bool,
    #[serde(default)]
    pub solve: Option<SolveSection>,
    #[serde(default)]
    pub moving_plane: Option<MovingPlaneSection>,
    #[serde(default)]
    pub threshold_scan: Option<ThresholdScanSection>,
    #[serde(default)]
    pub uniqueness: Option<UniquenessSection>,
    #[serde(default)]
    pub symmetry: Option<SymmetrySection>,
    #[serde(default)]
    pub section: Option<SectionSection>,
    #[serde(default)]
    pub estimates: Option<EstimatesSection>,
    #[serde(default)]
    pub verify_examples: Option<VerifyExamplesSection>,
}

fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "{field}: must be finite (got {v})"
        )))
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "{field}: must be positive (got {v})"
        )))
    }
}

/// Keys present in `input` but dropped by the typed round trip. Catches
/// unknown keys on unit enum variants, which serde accepts silently.
fn dropped_keys(input: &Value, typed: &Value, path: &str, out: &mut Vec<String>) {
    match (input, typed) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in a {
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match b.get(k) {
                    Some(w) => dropped_keys(v, w, &p, out),
                    None => out.push(p),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            for (i, (v, w)) in a.iter().zip(b).enumerate() {
                dropped_keys(v, w, &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: Value = serde_json::from_str(text)
            .map_err(|e| CliError::validation(format!("config is not JSON: {e}")))?;
        let config: ExperimentConfig = serde_json::from_value(raw.clone())
            .map_err(|e| CliError::validation(format!("config: {e}")))?;
        let typed =
            serde_json::to_value(&config).map_err(|e| CliError::validation(e.to_string()))?;
        let mut dropped = Vec::new();
        dropped_keys(&raw, &typed, "", &mut dropped);
        if let Some(k) = dropped.first() {
            return Err(CliError::validation(format!("{k}: unknown field")));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        // relative paths in the config are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.profile_csv, &mut config.table_csv]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        Ok(config)
    }

    /// SHA-256 of the canonical (re-serialized) configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn require<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        section.as_ref().ok_or_else(|| {
            CliError::validation(format!(
                "{name}: section required for experiment {}",
                self.experiment.name()
            ))
        })
    }

    fn require_grid(&self) -> Result<&GridConfig, CliError> {
        let g = self.require(&self.grid, "grid")?;
        if g.lo.is_empty() || g.lo.len() != g.hi.len() {
            return Err(CliError::validation(
                "grid.lo/grid.hi: must be nonempty and of equal length",
            ));
        }
        positive("grid.h", g.h)?;
        for (a, (lo, hi)) in g.lo.iter().zip(&g.hi).enumerate() {
            finite(&format!("grid.lo[{a}]"), *lo)?;
            finite(&format!("grid.hi[{a}]"), *hi)?;
            if !(hi > lo) {
                return Err(CliError::validation(format!(
                    "grid.hi[{a}]: must exceed grid.lo[{a}]"
                )));
            }
            let cells = (hi - lo) / g.h;
            if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 2.0 {
                return Err(CliError::validation(format!(
                    "grid.h: box length {} along axis {a} is not a multiple (>= 2) of h = {}",
                    hi - lo,
                    g.h
                )));
            }
        }
        Ok(g)
    }

    fn require_domain(&self) -> Result<&GeneralOpenSet, CliError> {
        let d = self.require(&self.domain, "domain")?;
        if let GeneralOpenSet::Epigraph { spec } = d {
            if spec.dimension < 2 {
                return Err(CliError::validation(
                    "domain.spec.dimension: must be at least 2",
                ));
            }
            if let Some(g) = &self.grid {
                if g.lo.len() != spec.dimension {
                    return Err(CliError::validation(format!(
                        "domain.spec.dimension: {} does not match the grid dimension {}",
                        spec.dimension,
                        g.lo.len()
                    )));
                }
            }
        }
        if let GeneralOpenSet::Strip { lo, hi } = d {
            if !(hi > lo) {
                return Err(CliError::validation("domain.hi: must exceed domain.lo"));
            }
        }
        if let GeneralOpenSet::Ball { radius, .. } = d {
            positive("domain.radius", *radius)?;
        }
        Ok(d)
    }

    fn require_nonlinearity(&self) -> Result<(), CliError> {
        if self.table_csv.is_none() {
            self.require(&self.nonlinearity, "nonlinearity")?;
        }
        Ok(())
    }

    fn validate_tolerances(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.solve", t.solve),
            ("tolerances.linear", t.linear),
            ("tolerances.moving_plane", t.moving_plane),
            ("tolerances.comparison", t.comparison),
            ("tolerances.symmetry", t.symmetry),
            ("tolerances.uniqueness", t.uniqueness),
        ] {
            positive(name, v)?;
        }
        Ok(())
    }

    fn needs_field(&self, source: &SolutionSource) -> Result<(), CliError> {
        self.require_grid()?;
        match source {
            SolutionSource::Solve => {
                self.require_domain()?;
                self.require_nonlinearity()
            }
            SolutionSource::ClosedForm { .. } => Ok(()),
        }
    }

    /// Checks every field the chosen experiment reads, before any compute.
    pub fn validate(&self) -> Result<(), CliError> {
        self.validate_tolerances()?;
        if self.profile_csv.is_some()
            && !matches!(self.domain, Some(GeneralOpenSet::Epigraph { .. }))
        {
            return Err(CliError::validation(
                "profile_csv: requires an epigraph domain",
            ));
        }
        if let Some(s) = &self.solve {
            positive("solve.damping", s.damping)?;
            if s.damping > 1.0 {
                return Err(CliError::validation("solve.damping: must lie in (0, 1]"));
            }
            if s.max_iterations == Some(0) {
                return Err(CliError::validation(
                    "solve.max_iterations: must be positive",
                ));
            }
        }
        match self.experiment {
            ExperimentKind::Solve => self.needs_field(&SolutionSource::Solve)?,
            ExperimentKind::MovingPlane => {
                let mp = self.require(&self.moving_plane, "moving_plane")?;
                self.needs_field(&mp.solution)?;
                match (&mp.lambdas, &mp.lambda_range) {
                    (Some(l), None) => {
                        if l.is_empty() || l.iter().any(|v| !v.is_finite()) {
                            return Err(CliError::validation(
                                "moving_plane.lambdas: must be nonempty and finite",
                            ));
                        }
                    }
                    (None, Some(r)) => r.validate("moving_plane.lambda_range")?,
                    _ => {
                        return Err(CliError::validation(
                            "moving_plane.lambdas: give exactly one of lambdas or lambda_range",
                        ))
                    }
                }
                positive("moving_plane.hopf_constant", mp.hopf_constant)?;
            }
            ExperimentKind::ThresholdScan => {
                let ts = self.require(&self.threshold_scan, "threshold_scan")?;
                positive("threshold_scan.lipschitz", ts.lipschitz)?;
                match (&ts.widths, &ts.width_range) {
                    (Some(w), None) => {
                        if w.is_empty() || w.iter().any(|v| !(*v > 0.0)) {
                            return Err(CliError::validation(
                                "threshold_scan.widths: must be nonempty and positive",
                            ));
                        }
                    }
                    (None, Some(r)) => {
                        r.validate("threshold_scan.width_range")?;
                        positive("threshold_scan.width_range.from", r.from)?;
                    }
                    _ => {
                        return Err(CliError::validation(
                            "threshold_scan.widths: give exactly one of widths or width_range",
                        ))
                    }
                }
                if ts.cells < 2 || ts.pair_cells < 2 {
                    return Err(CliError::validation(
                        "threshold_scan.cells: must be at least 2",
                    ));
                }
                positive("threshold_scan.width_rel_tol", ts.width_rel_tol)?;
            }
            ExperimentKind::Uniqueness => {
                self.needs_field(&SolutionSource::Solve)?;
                let u = self.uniqueness.clone().unwrap_or_default();
                positive("uniqueness.amplitude", u.amplitude)?;
                if u.restarts == 0 {
                    return Err(CliError::validation(
                        "uniqueness.restarts: must be positive",
                    ));
                }
            }
            ExperimentKind::Symmetry => {
                self.needs_field(&SolutionSource::Solve)?;
                let s = self.require(&self.symmetry, "symmetry")?;
                if !(s.buffer >= 0.0) {
                    return Err(CliError::validation("symmetry.buffer: must be nonnegative"));
                }
                positive("symmetry.periodicity_tol", s.periodicity_tol)?;
                positive("symmetry.exact_tol", s.exact_tol)?;
            }
            ExperimentKind::Section => {
                self.require_domain()?;
                let s = self.require(&self.section, "section")?;
                if s.direction.len() < 2 {
                    return Err(CliError::validation(
                        "section.direction: needs at least two components",
                    ));
                }
                positive("section.line_resolution", s.line_resolution)?;
                positive("section.window", s.window)?;
                match (&s.probes, &s.probe_range) {
                    (Some(p), None) => {
                        if p.is_empty() || p.iter().any(|q| q.len() + 1 != s.direction.len()) {
                            return Err(CliError::validation(
                                "section.probes: each probe needs one coordinate fewer than the direction",
                            ));
                        }
                    }
                    (None, Some(r)) => {
                        r.validate("section.probe_range")?;
                        if s.direction.len() != 2 {
                            return Err(CliError::validation(
                                "section.probe_range: only for two-dimensional sets",
                            ));
                        }
                    }
                    _ => {
                        return Err(CliError::validation(
                            "section.probes: give exactly one of probes or probe_range",
                        ))
                    }
                }
            }
            ExperimentKind::Estimates => {
                let e = self.require(&self.estimates, "estimates")?;
                self.needs_field(&e.solution)?;
                positive("estimates.max_delta", e.max_delta)?;
                if !e.oscillation_points.is_empty() && e.radii.len() < 2 {
                    return Err(CliError::validation(
                        "estimates.radii: need at least two radii",
                    ));
                }
                if e.radii.iter().any(|r| !(*r > 0.0)) {
                    return Err(CliError::validation("estimates.radii: must be positive"));
                }
            }
            ExperimentKind::VerifyExamples => {
                let v = self.verify_examples.clone().unwrap_or_default();
                if v.h.len() < 2 || v.h.iter().any(|h| !(*h > 0.0)) {
                    return Err(CliError::validation(
                        "verify_examples.h: need at least two positive spacings",
                    ));
                }
                if v.profiles.is_empty() {
                    return Err(CliError::validation(
                        "verify_examples.profiles: must be nonempty",
                    ));
                }
                for cf in &v.profiles {
                    let (lo, hi) = cf.window();
                    for h in &v.h {
                        let cells = (hi - lo) / h;
                        if (cells - cells.round()).abs() > 1e-9 * cells {
                            return Err(CliError::validation(format!(
                                "verify_examples.h: {h} does not divide the {} window",
                                cf.tag()
                            )));
                        }
                    }
                }
                if let Some(g) = &v.growth {
                    positive("verify_examples.growth.x_max", g.x_max)?;
                    if g.m == 0 || g.cells < 2 {
                        return Err(CliError::validation(
                            "verify_examples.growth.cells: m >= 1 and cells >= 2",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"experiment":"verify_examples","output_dir":"out"}"#;

    #[test]
    fn minimal_config_parses_and_validates() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        for text in [
            r#"{"experiment":"solve","output_dir":"o","tolerence":1}"#,
            r#"{"experiment":"solve","output_dir":"o","tolerances":{"slove":1}}"#,
            r#"{"experiment":"solve","output_dir":"o","domain":{"kind":"orthant","radius":1}}"#,
            r#"{"experiment":"solve","output_dir":"o","nonlinearity":{"kind":"allen_cahn","slope":1}}"#,
        ] {
            let err = ExperimentConfig::from_json(text).unwrap_err();
            assert!(err.to_string().contains("unknown field"), "{err}");
        }
    }

    #[test]
    fn bad_spacing_names_the_field() {
        let text = r#"{"experiment":"solve","output_dir":"o","domain":{"kind":"strip","lo":0,"hi":1},
            "nonlinearity":{"kind":"constant","value":1},"grid":{"lo":[0],"hi":[1],"h":-0.1}}"#;
        let err = ExperimentConfig::from_json(text)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().starts_with("grid.h"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let b = ExperimentConfig::from_json(
            "{\n \"output_dir\": \"out\",\n \"experiment\": \"verify_examples\"\n}",
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn ranges_include_endpoint() {
        let r = Range {
            from: 0.5,
            to: 1.5,
            step: 0.25,
        };
        assert_eq!(r.values(), vec![0.5, 0.75, 1.0, 1.25, 1.5]);
    }
}
