//! Linear and semilinear Dirichlet solves on [`DomainGrid`]s and principal
//! eigenpairs of the discrete `-Δ`.

pub mod closed_form;
pub mod krylov;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::{assemble_laplacian, DomainGrid, NodeKind, SparseOperator};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;

pub use krylov::{bicgstab, conjugate_gradient, KrylovOutcome};

type TraceFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Dirichlet data on `∂Ω` and on the truncation faces.
#[derive(Clone)]
pub struct BoundaryTrace {
    label: String,
    func: Arc<TraceFn>,
}

impl BoundaryTrace {
    pub fn zero() -> Self {
        BoundaryTrace {
            label: "zero".into(),
            func: Arc::new(|_| 0.0),
        }
    }

    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        BoundaryTrace {
            label: label.into(),
            func: Arc::new(f),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for BoundaryTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryTrace")
            .field("label", &self.label)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Linear,
    Newton,
    Picard,
    /// Closed form sampled on the grid.
    Sampled,
    /// Reflection `u(x', 2λ - x_N)` of another field.
    Reflected,
}

/// Grid function with the metadata of the solve that produced it.
#[derive(Clone, Debug)]
pub struct SolutionField {
    grid: Arc<DomainGrid>,
    values: Vec<f64>,
    lattice: Vec<f64>,
    trace: BoundaryTrace,
    pub residual_norm: f64,
    pub iterations: usize,
    pub method: Method,
    pub notes: Vec<String>,
}

/// JSON-serializable summary of a [`SolutionField`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub method: Method,
    pub iterations: usize,
    pub residual_norm: f64,
    pub trace: String,
    pub n_interior: usize,
    pub h: f64,
    pub notes: Vec<String>,
}

impl SolutionField {
    /// Wraps interior values; non-interior lattice nodes take the trace.
    pub fn from_values(
        grid: Arc<DomainGrid>,
        values: Vec<f64>,
        trace: BoundaryTrace,
        method: Method,
    ) -> Result<Self> {
        if values.len() != grid.n_interior() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_interior(),
                got: values.len(),
            });
        }
        let lattice = (0..grid.lattice_len())
            .map(|idx| match grid.kind(idx) {
                NodeKind::Interior(k) => values[k],
                _ => trace.eval(&grid.position(idx)),
            })
            .collect();
        Ok(SolutionField {
            grid,
            values,
            lattice,
            trace,
            residual_norm: 0.0,
            iterations: 0,
            method,
            notes: Vec::new(),
        })
    }

    /// Samples a closed form `u` everywhere on the lattice and records the
    /// residual of `-Δ_h u = f(u)`.
    pub fn sample<F>(grid: Arc<DomainGrid>, u: F, f: &Nonlinearity) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let u = Arc::new(u);
        let trace_u = u.clone();
        let trace = BoundaryTrace::new("closed form", move |x| trace_u(x));
        let values = grid.sample(|x| u(x));
        let mut field = SolutionField::from_values(grid, values, trace, Method::Sampled)?;
        field.residual_norm = stencil_residual(&field.grid, &field.values, &field.trace, f)?
            .iter()
            .fold(0.0, |m, r| m.max(r.abs()));
        Ok(field)
    }

    pub(crate) fn with_lattice(mut self, lattice: Vec<f64>) -> Self {
        self.lattice = lattice;
        self
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    /// Values at interior nodes in equation order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values at every lattice node (trace values off the interior).
    pub fn lattice(&self) -> &[f64] {
        &self.lattice
    }

    pub fn trace(&self) -> &BoundaryTrace {
        &self.trace
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn meta(&self) -> SolutionMeta {
        SolutionMeta {
            method: self.method,
            iterations: self.iterations,
            residual_norm: self.residual_norm,
            trace: self.trace.label().to_string(),
            n_interior: self.grid.n_interior(),
            h: self.grid.h(),
            notes: self.notes.clone(),
        }
    }
}

/// `-Δ_h u - f(u)` at the interior nodes, through the stored stencil arms
/// rather than the assembled matrix.
pub fn stencil_residual(
    grid: &DomainGrid,
    values: &[f64],
    trace: &BoundaryTrace,
    f: &Nonlinearity,
) -> Result<Vec<f64>> {
    let lap = grid.apply_stencil(values, |x| trace.eval(x));
    lap.iter()
        .zip(values)
        .map(|(l, u)| Ok(l - f.eval(*u)?))
        .collect()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `op x = rhs` to relative residual `tol`: CG for symmetric
/// operators, BiCGSTAB otherwise or when CG meets negative curvature.
pub fn solve_linear(op: &SparseOperator, rhs: &[f64], tol: f64) -> Result<KrylovOutcome> {
    solve_linear_from(op, rhs, None, tol)
}

fn solve_linear_from(
    op: &SparseOperator,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
) -> Result<KrylovOutcome> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let cap = krylov::default_max_iterations(op.dim());
    if op.is_symmetric() {
        match conjugate_gradient(op, rhs, x0, tol, cap) {
            Ok(out) => return Ok(out),
            Err(Error::NoConvergence { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    bicgstab(op, rhs, x0, tol, cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationKind {
    Newton,
    Picard,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolvePolicy {
    pub method: IterationKind,
    /// Target max-norm of `-Δ_h u - f(u)`.
    pub tol: f64,
    /// Initial Newton step / Picard relaxation, in `(0, 1]`.
    pub damping: f64,
    pub max_iterations: usize,
    /// Relative residual of the inner linear solves.
    pub linear_tol: f64,
}

impl Default for SolvePolicy {
    fn default() -> Self {
        SolvePolicy {
            method: IterationKind::Newton,
            tol: 1e-9,
            damping: 1.0,
            max_iterations: 100,
            linear_tol: 1e-12,
        }
    }
}

impl SolvePolicy {
    pub fn picard() -> Self {
        SolvePolicy {
            method: IterationKind::Picard,
            max_iterations: 2000,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping must lie in (0, 1]"));
        }
        if !(self.tol > 0.0 && self.linear_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Smallest Newton step before giving up.
pub const DAMPING_FLOOR: f64 = 1.0 / 1024.0;

/// A grid with its assembled operator and boundary data.
#[derive(Clone, Debug)]
pub struct DirichletProblem {
    grid: Arc<DomainGrid>,
    op: SparseOperator,
    lift: Vec<f64>,
    trace: BoundaryTrace,
}

impl DirichletProblem {
    pub fn new(grid: DomainGrid, trace: BoundaryTrace) -> Self {
        Self::from_arc(Arc::new(grid), trace)
    }

    pub fn homogeneous(grid: DomainGrid) -> Self {
        Self::new(grid, BoundaryTrace::zero())
    }

    pub fn from_arc(grid: Arc<DomainGrid>, trace: BoundaryTrace) -> Self {
        let op = assemble_laplacian(&grid);
        let lift = grid.boundary_rhs(|x| trace.eval(x));
        DirichletProblem {
            grid,
            op,
            lift,
            trace,
        }
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn trace(&self) -> &BoundaryTrace {
        &self.trace
    }

    /// Boundary contribution to the right-hand side.
    pub fn lift(&self) -> &[f64] {
        &self.lift
    }

    /// `A u - lift - f(u)` through the assembled matrix.
    pub fn residual(&self, values: &[f64], f: &Nonlinearity) -> Result<Vec<f64>> {
        let au = self.op.apply(values)?;
        au.iter()
            .zip(&self.lift)
            .zip(values)
            .map(|((a, l), u)| Ok(a - l - f.eval(*u)?))
            .collect()
    }

    /// Solves `-Δ_h u = rhs` with the problem's boundary data.
    pub fn solve_linear(&self, rhs: &[f64], tol: f64) -> Result<SolutionField> {
        if rhs.len() != self.op.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.op.dim(),
                got: rhs.len(),
            });
        }
        let b: Vec<f64> = rhs.iter().zip(&self.lift).map(|(r, l)| r + l).collect();
        let out = solve_linear(&self.op, &b, tol)?;
        let lap = self.grid.apply_stencil(&out.x, |x| self.trace.eval(x));
        let residual = max_norm(&lap.iter().zip(rhs).map(|(a, r)| a - r).collect::<Vec<_>>());
        let mut field = SolutionField::from_values(
            self.grid.clone(),
            out.x,
            self.trace.clone(),
            Method::Linear,
        )?;
        field.iterations = out.iterations;
        field.residual_norm = residual;
        Ok(field)
    }

    /// Default initial guess: solution of `-Δ_h u = f(0)`.
    pub fn torsion_lift(&self, f: &Nonlinearity) -> Result<Vec<f64>> {
        let f0 = f.f0()?;
        let b: Vec<f64> = self.lift.iter().map(|l| l + f0).collect();
        Ok(solve_linear(&self.op, &b, 1e-11)?.x)
    }

    /// Solves `-Δ_h u = f(u)` from `init` (torsion lift when `None`).
    ///
    /// Newton uses the exact Jacobian `A - diag f'(u)` with step halving down
    /// to [`DAMPING_FLOOR`]. Non-smooth `f`, or `f'` undefined at an iterate,
    /// switches to Picard and records the switch in `notes`.
    pub fn solve_semilinear(
        &self,
        f: &Nonlinearity,
        init: Option<&[f64]>,
        policy: &SolvePolicy,
    ) -> Result<SolutionField> {
        policy.validate()?;
        let mut u = match init {
            Some(v) => {
                if v.len() != self.op.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.op.dim(),
                        got: v.len(),
                    });
                }
                v.to_vec()
            }
            None => self.torsion_lift(f)?,
        };
        let mut notes = Vec::new();
        let mut method = policy.method;
        if method == IterationKind::Newton && !f.is_smooth() {
            notes.push(format!(
                "{} is not differentiable on the range; using picard",
                f.tag()
            ));
            method = IterationKind::Picard;
        }

        let mut iterations = 0;
        if method == IterationKind::Newton {
            match self.newton(f, &mut u, policy, &mut iterations)? {
                NewtonExit::Converged => {}
                NewtonExit::NotDifferentiable => {
                    notes.push(format!(
                        "f' undefined at an iterate of {}; using picard",
                        f.tag()
                    ));
                    method = IterationKind::Picard;
                }
            }
        }
        if method == IterationKind::Picard {
            self.picard(f, &mut u, policy, &mut iterations)?;
        }

        let residual = max_norm(&stencil_residual(&self.grid, &u, &self.trace, f)?);
        let tag = match method {
            IterationKind::Newton => Method::Newton,
            IterationKind::Picard => Method::Picard,
        };
        let mut field = SolutionField::from_values(self.grid.clone(), u, self.trace.clone(), tag)?;
        field.iterations = iterations;
        field.residual_norm = residual;
        field.notes = notes;
        Ok(field)
    }

    fn newton(
        &self,
        f: &Nonlinearity,
        u: &mut Vec<f64>,
        policy: &SolvePolicy,
        iterations: &mut usize,
    ) -> Result<NewtonExit> {
        let mut r = self.residual(u, f)?;
        let mut rn = max_norm(&r);
        while rn > policy.tol {
            if *iterations >= policy.max_iterations {
                return Err(Error::NoConvergence {
                    iterations: *iterations,
                    residual: rn,
                });
            }
            let mut shift = Vec::with_capacity(u.len());
            for &ui in u.iter() {
                match f.derivative(ui) {
                    Some(d) => shift.push(-d),
                    None => return Ok(NewtonExit::NotDifferentiable),
                }
            }
            let jac = self.op.with_diagonal_shift(&shift)?;
            let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = solve_linear(&jac, &neg_r, policy.linear_tol)
                .map_err(|_| Error::JacobianSingular {
                    iteration: *iterations,
                })?
                .x;
            let mut step = policy.damping;
            loop {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
                let rt = self.residual(&trial, f)?;
                let rtn = max_norm(&rt);
                if rtn < rn {
                    *u = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
                step *= 0.5;
                if step < DAMPING_FLOOR {
                    return Err(Error::NoConvergence {
                        iterations: *iterations,
                        residual: rn,
                    });
                }
            }
            *iterations += 1;
        }
        Ok(NewtonExit::Converged)
    }

    fn picard(
        &self,
        f: &Nonlinearity,
        u: &mut [f64],
        policy: &SolvePolicy,
        iterations: &mut usize,
    ) -> Result<()> {
        let omega = policy.damping;
        let mut rn = max_norm(&self.residual(u, f)?);
        let mut x0: Option<Vec<f64>> = None;
        while rn > policy.tol {
            if *iterations >= policy.max_iterations {
                return Err(Error::NoConvergence {
                    iterations: *iterations,
                    residual: rn,
                });
            }
            let b: Vec<f64> = self
                .lift
                .iter()
                .zip(u.iter())
                .map(|(l, ui)| Ok(l + f.eval(*ui)?))
                .collect::<Result<_>>()?;
            let w = solve_linear_from(&self.op, &b, x0.as_deref(), policy.linear_tol)?.x;
            u.iter_mut()
                .zip(&w)
                .for_each(|(a, b)| *a = (1.0 - omega) * *a + omega * b);
            x0 = Some(w);
            rn = max_norm(&self.residual(u, f)?);
            *iterations += 1;
        }
        Ok(())
    }
}

enum NewtonExit {
    Converged,
    NotDifferentiable,
}

/// Principal Dirichlet eigenpair; `phi1` is positive and max-normalised to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi1: Vec<f64>,
    pub iterations: usize,
    /// `‖A φ - λ φ‖∞`.
    pub residual: f64,
}

/// Inverse power iteration with zero shift, started from the constant vector.
///
/// Stops once the eigenvalue estimate changes by less than `tol` (relative)
/// between sweeps and `‖A φ - λ φ‖∞ ≤ 1e-8 λ`.
pub fn principal_eigenpair(op: &SparseOperator, tol: f64) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let n = op.dim();
    let mut x = vec![1.0; n];
    let mut lambda_prev = f64::NAN;
    let mut y_prev: Option<Vec<f64>> = None;
    for it in 1..=1000 {
        let y = solve_linear_from(op, &x, y_prev.as_deref(), 1e-10)?.x;
        let lambda = dot(&y, &x) / dot(&y, &y);
        let scale = y
            .iter()
            .copied()
            .fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: f64::NAN,
            });
        }
        x = y.iter().map(|v| v / scale).collect();
        y_prev = Some(x.clone());
        let ax = op.apply(&x)?;
        let residual = ax
            .iter()
            .zip(&x)
            .fold(0.0, |m: f64, (a, p)| m.max((a - lambda * p).abs()));
        let settled = (lambda - lambda_prev).abs() < tol * lambda.abs();
        if settled && residual <= 1e-8 * lambda.abs() {
            return Ok(EigenPair {
                lambda1: lambda,
                phi1: x,
                iterations: it,
                residual,
            });
        }
        lambda_prev = lambda;
    }
    Err(Error::NoConvergence {
        iterations: 1000,
        residual: lambda_prev,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests;
