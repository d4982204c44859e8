//! Closed-form solutions used as oracles, and the residual-order study
//! that checks them against the discrete operator.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SolutionField;
use crate::discretization::{build_grid, DomainGrid, GridBox};
use crate::error::{Error, Result};
use crate::geometry::GeneralOpenSet;
use crate::nonlinearity::Nonlinearity;

/// Profiles depending on `x_N` only, each paired with the nonlinearity it
/// solves on the half-space `{x_N > 0}` (or the strip for the torsion bar).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClosedForm {
    /// `1 - (x_N - 1)^4` below `x_N = 1`, `1` above; solves [`Nonlinearity::ClampedQuartic`].
    ClampedQuartic,
    /// Two quartic-composite bumps, `0` on `[0, 1]` and `1` above `x_N = 4`;
    /// solves [`Nonlinearity::QuarticComposite`].
    QuarticComposite,
    /// `tanh(x_N / sqrt 2)`, the Allen–Cahn layer.
    Tanh,
    /// `(1 - x_N^2) / 2` on `|x_N| < 1`, the torsion bar with `f = 1`.
    TorsionStrip,
}

impl ClosedForm {
    pub fn tag(&self) -> &'static str {
        match self {
            ClosedForm::ClampedQuartic => "clamped_quartic",
            ClosedForm::QuarticComposite => "quartic_composite",
            ClosedForm::Tanh => "tanh",
            ClosedForm::TorsionStrip => "torsion_strip",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let y = x[x.len() - 1];
        match self {
            ClosedForm::ClampedQuartic => {
                if y < 1.0 {
                    1.0 - (y - 1.0).powi(4)
                } else {
                    1.0
                }
            }
            ClosedForm::QuarticComposite => {
                let bump = |c: f64| (1.0 - (y - c).powi(4)).powi(4);
                if y <= 1.0 {
                    0.0
                } else if y <= 3.0 {
                    bump(2.0)
                } else if y <= 4.0 {
                    bump(4.0)
                } else {
                    1.0
                }
            }
            ClosedForm::Tanh => (y * FRAC_1_SQRT_2).tanh(),
            ClosedForm::TorsionStrip => 0.5 * (1.0 - y * y),
        }
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        match self {
            ClosedForm::ClampedQuartic => Nonlinearity::ClampedQuartic,
            ClosedForm::QuarticComposite => Nonlinearity::QuarticComposite,
            ClosedForm::Tanh => Nonlinearity::AllenCahn,
            ClosedForm::TorsionStrip => Nonlinearity::Constant { value: 1.0 },
        }
    }

    /// The open set on which the profile vanishes on the boundary.
    pub fn domain(&self) -> GeneralOpenSet {
        match self {
            ClosedForm::TorsionStrip => GeneralOpenSet::Strip { lo: -1.0, hi: 1.0 },
            _ => GeneralOpenSet::Strip { lo: 0.0, hi: 1e9 },
        }
    }

    /// Default 1-D window in `x_N`.
    pub fn window(&self) -> (f64, f64) {
        match self {
            ClosedForm::ClampedQuartic => (0.0, 2.0),
            ClosedForm::QuarticComposite => (0.0, 5.0),
            ClosedForm::Tanh => (0.0, 12.0),
            ClosedForm::TorsionStrip => (-1.0, 1.0),
        }
    }

    /// Samples the profile on `grid`, with the profile itself as trace.
    pub fn sample(&self, grid: Arc<DomainGrid>) -> Result<SolutionField> {
        let cf = *self;
        SolutionField::sample(grid, move |x| cf.eval(x), &self.nonlinearity())
    }

    /// 1-D grid on [`Self::window`] with `cells` cells.
    pub fn line_grid(&self, cells: usize) -> Result<DomainGrid> {
        if cells < 2 {
            return Err(Error::invalid("need at least two cells"));
        }
        let (lo, hi) = self.window();
        build_grid(
            &self.domain(),
            &GridBox::new(vec![lo], vec![hi]),
            (hi - lo) / cells as f64,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualStudy {
    pub profile: ClosedForm,
    pub h: Vec<f64>,
    /// Max-norm of the sampled discrete residual per `h`.
    pub residual: Vec<f64>,
    /// `residual / h²`.
    pub constant: Vec<f64>,
    /// Observed orders between successive levels.
    pub orders: Vec<f64>,
}

impl ResidualStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_constant(&self) -> f64 {
        self.constant.iter().copied().fold(0.0, f64::max)
    }
}

/// Sampled residuals of `profile` on its 1-D window for each cell count.
pub fn residual_study(profile: ClosedForm, cells: &[usize]) -> Result<ResidualStudy> {
    if cells.len() < 2 {
        return Err(Error::invalid("need at least two refinement levels"));
    }
    let (lo, hi) = profile.window();
    let mut h = Vec::new();
    let mut residual = Vec::new();
    for &c in cells {
        let field = profile.sample(Arc::new(profile.line_grid(c)?))?;
        h.push((hi - lo) / c as f64);
        residual.push(field.residual_norm);
    }
    let constant = residual.iter().zip(&h).map(|(r, h)| r / (h * h)).collect();
    let orders = residual
        .windows(2)
        .zip(h.windows(2))
        .map(|(r, h)| (r[0] / r[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    Ok(ResidualStudy {
        profile,
        h,
        residual,
        constant,
        orders,
    })
}
