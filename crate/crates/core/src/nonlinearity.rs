//! Nonlinearities `f` and the explicit thresholds of the comparison principles.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::Extended;

/// Tabulated nonlinearity, linearly interpolated between knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFunction {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
}

impl TableFunction {
    pub fn new(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.len() < 2 {
            return Err(Error::invalid("table needs at least two rows"));
        }
        if pairs.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid("table abscissae must be distinct"));
        }
        if pairs.iter().any(|(t, f)| !t.is_finite() || !f.is_finite()) {
            return Err(Error::invalid("table contains non-finite values"));
        }
        let (t, f) = pairs.into_iter().unzip();
        Ok(TableFunction { t, f })
    }

    fn range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    fn segment(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(Error::DomainExceeded { t, lo, hi });
        }
        Ok(self
            .t
            .partition_point(|&a| a <= t)
            .saturating_sub(1)
            .min(self.t.len() - 2))
    }

    fn slope(&self, k: usize) -> f64 {
        (self.f[k + 1] - self.f[k]) / (self.t[k + 1] - self.t[k])
    }

    fn eval(&self, t: f64) -> Result<f64> {
        let k = self.segment(t)?;
        Ok(self.f[k] + self.slope(k) * (t - self.t[k]))
    }
}

/// Catalog of nonlinearities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
    },
    /// `t - t^3`.
    AllenCahn,
    /// Odd power `sign(t) |t|^q`.
    Power {
        exponent: f64,
    },
    /// `12` for `t < 0`, `12 sqrt(1 - t)` on `[0, 1]`, `0` for `t > 1`.
    /// Non-increasing, Hölder but not locally Lipschitz at `t = 1`.
    ClampedQuartic,
    /// `-192 (t (1 - t^{1/4}))^{1/2} (1 - 5/4 t^{1/4})` on `[0, 1]`, zero elsewhere.
    QuarticComposite,
    Table {
        table: TableFunction,
    },
}

impl Nonlinearity {
    pub fn tag(&self) -> &'static str {
        match self {
            Nonlinearity::Constant { .. } => "constant",
            Nonlinearity::Linear { .. } => "linear",
            Nonlinearity::AllenCahn => "allen_cahn",
            Nonlinearity::Power { .. } => "power",
            Nonlinearity::ClampedQuartic => "clamped_quartic",
            Nonlinearity::QuarticComposite => "quartic_composite",
            Nonlinearity::Table { .. } => "custom_table",
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(match self {
            Nonlinearity::Constant { value } => *value,
            Nonlinearity::Linear { slope } => slope * t,
            Nonlinearity::AllenCahn => t - t * t * t,
            Nonlinearity::Power { exponent } => t.signum() * t.abs().powf(*exponent),
            Nonlinearity::ClampedQuartic => {
                if t < 0.0 {
                    12.0
                } else if t <= 1.0 {
                    12.0 * (1.0 - t).sqrt()
                } else {
                    0.0
                }
            }
            Nonlinearity::QuarticComposite => {
                if (0.0..=1.0).contains(&t) {
                    let p = t.powf(0.25);
                    -192.0 * (t * (1.0 - p)).sqrt() * (1.0 - 1.25 * p)
                } else {
                    0.0
                }
            }
            Nonlinearity::Table { table } => return table.eval(t),
        })
    }

    /// `f(0)`.
    pub fn f0(&self) -> Result<f64> {
        self.eval(0.0)
    }

    /// `f'(t)`, or `None` where `f` is not differentiable.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match self {
            Nonlinearity::Constant { .. } => Some(0.0),
            Nonlinearity::Linear { slope } => Some(*slope),
            Nonlinearity::AllenCahn => Some(1.0 - 3.0 * t * t),
            Nonlinearity::Power { exponent } => {
                let q = *exponent;
                if t == 0.0 {
                    if q > 1.0 {
                        Some(0.0)
                    } else if q == 1.0 {
                        Some(1.0)
                    } else {
                        None
                    }
                } else {
                    Some(q * t.abs().powf(q - 1.0))
                }
            }
            Nonlinearity::ClampedQuartic => {
                if !(0.0..=1.0).contains(&t) {
                    Some(0.0)
                } else if t < 1.0 && t > 0.0 {
                    Some(-6.0 / (1.0 - t).sqrt())
                } else {
                    None
                }
            }
            Nonlinearity::QuarticComposite => {
                if !(0.0..=1.0).contains(&t) {
                    Some(0.0)
                } else if t > 0.0 && t < 1.0 {
                    Some(quartic_composite_derivative(t))
                } else {
                    None
                }
            }
            Nonlinearity::Table { .. } => None,
        }
    }

    /// Entries eligible for Newton's method on any range.
    pub fn is_smooth(&self) -> bool {
        match self {
            Nonlinearity::Constant { .. }
            | Nonlinearity::Linear { .. }
            | Nonlinearity::AllenCahn => true,
            Nonlinearity::Power { exponent } => *exponent >= 1.0,
            _ => false,
        }
    }

    pub fn monotone_nonincreasing(&self) -> bool {
        match self {
            Nonlinearity::Constant { .. } | Nonlinearity::ClampedQuartic => true,
            Nonlinearity::Linear { slope } => *slope <= 0.0,
            Nonlinearity::AllenCahn
            | Nonlinearity::Power { .. }
            | Nonlinearity::QuarticComposite => false,
            Nonlinearity::Table { table } => table.f.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    /// Declared value of `liminf_{t→0+} f(t)/t > 0`.
    pub fn positive_liminf_at_zero(&self) -> bool {
        match self {
            Nonlinearity::Constant { value } => *value > 0.0,
            Nonlinearity::Linear { slope } => *slope > 0.0,
            Nonlinearity::AllenCahn | Nonlinearity::ClampedQuartic => true,
            Nonlinearity::Power { exponent } => *exponent <= 1.0,
            Nonlinearity::QuarticComposite => false,
            Nonlinearity::Table { table } => {
                table.eval(0.0).map(|f0| f0 > 0.0).unwrap_or(false)
                    || table
                        .segment(0.0)
                        .map(|k| table.slope(k) > 0.0)
                        .unwrap_or(false)
            }
        }
    }

    /// Lipschitz constant of `f` on `[m, M]`: the supremum of `|f'|`, or
    /// [`Extended::Infinite`] where `f` fails to be Lipschitz there.
    pub fn lipschitz_on(&self, m: f64, big_m: f64) -> Result<Extended> {
        if !(m <= big_m) {
            return Err(Error::invalid(format!("empty interval [{m}, {big_m}]")));
        }
        Ok(match self {
            Nonlinearity::Constant { .. } => Extended::Finite(0.0),
            Nonlinearity::Linear { slope } => Extended::Finite(slope.abs()),
            Nonlinearity::AllenCahn => {
                // |1 - 3t^2| peaks at an endpoint or at t = 0
                let mut l = (1.0 - 3.0 * m * m)
                    .abs()
                    .max((1.0 - 3.0 * big_m * big_m).abs());
                if m <= 0.0 && big_m >= 0.0 {
                    l = l.max(1.0);
                }
                Extended::Finite(l)
            }
            Nonlinearity::Power { exponent } => {
                let q = *exponent;
                let amax = m.abs().max(big_m.abs());
                let contains_zero = m <= 0.0 && big_m >= 0.0;
                if q >= 1.0 {
                    Extended::Finite(q * amax.powf(q - 1.0))
                } else if contains_zero {
                    Extended::Infinite
                } else {
                    let amin = m.abs().min(big_m.abs());
                    Extended::Finite(q * amin.powf(q - 1.0))
                }
            }
            Nonlinearity::ClampedQuartic => {
                // |f'| = 6 / sqrt(1 - t) on (0, 1), zero outside
                let lo = m.max(0.0);
                let hi = big_m.min(1.0);
                if lo > hi || big_m < 0.0 || m > 1.0 {
                    Extended::Finite(0.0)
                } else if hi >= 1.0 {
                    if lo >= 1.0 {
                        Extended::Finite(0.0)
                    } else {
                        Extended::Infinite
                    }
                } else {
                    Extended::Finite(6.0 / (1.0 - hi).sqrt())
                }
            }
            Nonlinearity::QuarticComposite => {
                let lo = m.max(0.0);
                let hi = big_m.min(1.0);
                if big_m <= 0.0 || m >= 1.0 || lo >= hi {
                    Extended::Finite(0.0)
                } else if lo == 0.0 || hi == 1.0 {
                    Extended::Infinite
                } else {
                    Extended::Finite(sup_abs(quartic_composite_derivative, lo, hi))
                }
            }
            Nonlinearity::Table { table } => {
                let mut l: f64 = 0.0;
                for k in 0..table.t.len() - 1 {
                    if table.t[k + 1] >= m && table.t[k] <= big_m {
                        l = l.max(table.slope(k).abs());
                    }
                }
                Extended::Finite(l)
            }
        })
    }
}

/// `f'` of [`Nonlinearity::QuarticComposite`] on `(0, 1)`, through `p = t^{1/4}`.
fn quartic_composite_derivative(t: f64) -> f64 {
    let p = t.powf(0.25);
    let s = (1.0 - p).sqrt();
    let q = 1.0 - 1.25 * p;
    let df_dp = -192.0 * (2.0 * p * s * q - p * p * q / (2.0 * s) - 1.25 * p * p * s);
    df_dp / (4.0 * p * p * p)
}

/// `max |d|` on `[lo, hi]` by dense sampling and golden-section polish of the best sample.
fn sup_abs(d: fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let samples = 4096;
    let step = (hi - lo) / samples as f64;
    let mut best = (lo, d(lo).abs());
    for k in 1..=samples {
        let t = lo + k as f64 * step;
        let v = d(t).abs();
        if v > best.1 {
            best = (t, v);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let e = a + g * (b - a);
        if d(c).abs() > d(e).abs() {
            b = e;
        } else {
            a = c;
        }
    }
    best.1.max(d(0.5 * (a + b)).abs())
}

/// Data entering the explicit thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    /// Lipschitz constant in force.
    pub lipschitz: f64,
    /// Exponential growth rate.
    pub gamma: f64,
    /// Polynomial growth exponent.
    pub delta: f64,
    /// Growth prefactor.
    pub a: f64,
    /// Section of the domain.
    pub section: f64,
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.lipschitz, self.gamma, self.delta, self.a, self.section];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "threshold parameters must be finite and nonnegative",
            ));
        }
        if !(self.a > 0.0 && self.section > 0.0) {
            return Err(Error::invalid(
                "growth prefactor and section must be positive",
            ));
        }
        Ok(())
    }

    /// Whether the section lies strictly below [`epsilon_growth`].
    pub fn growth_condition_holds(&self) -> Result<bool> {
        self.validate()?;
        Ok(epsilon_growth(self.lipschitz, self.gamma)?.exceeds(self.section))
    }
}

/// `π / sqrt(2L)`; infinite for `L = 0` (non-increasing `f` needs no smallness).
pub fn epsilon_bounded(lipschitz: f64) -> Result<Extended> {
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(Error::invalid("Lipschitz constant must be finite and >= 0"));
    }
    if lipschitz == 0.0 {
        return Ok(Extended::Infinite);
    }
    Ok(Extended::Finite(PI / (2.0 * lipschitz).sqrt()))
}

/// `π / sqrt(16 (e - 1) γ² + 2L)`; infinite when `L = γ = 0`.
pub fn epsilon_growth(lipschitz: f64, gamma: f64) -> Result<Extended> {
    if !(lipschitz >= 0.0 && gamma >= 0.0) || !lipschitz.is_finite() || !gamma.is_finite() {
        return Err(Error::invalid("L and gamma must be finite and >= 0"));
    }
    let denom = 16.0 * (E - 1.0) * gamma * gamma + 2.0 * lipschitz;
    if denom == 0.0 {
        return Ok(Extended::Infinite);
    }
    Ok(Extended::Finite(PI / denom.sqrt()))
}

/// Supremum of admissible growth rates `π / (4 S sqrt(e - 1))` for a section `S`.
pub fn gamma_max(section: f64) -> Result<f64> {
    if !(section > 0.0) || !section.is_finite() {
        return Err(Error::invalid("section must be positive"));
    }
    Ok(PI / (4.0 * section * (E - 1.0).sqrt()))
}

/// Step length `h = sqrt((e - 1)/α)` of the growth dichotomy, for which `α h² + 1 = e`.
pub fn doubling_step(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid("alpha must be positive"));
    }
    Ok(((E - 1.0) / alpha).sqrt())
}

/// Lower bound `w(A) e^{(R - A)/h - 1}` forced on `w(R)` once `w(A) > 0`.
pub fn growth_lower_bound(alpha: f64, a: f64, w_a: f64, r: f64) -> Result<f64> {
    let h = doubling_step(alpha)?;
    if !(a > 0.0 && w_a > 0.0) {
        return Err(Error::invalid("A and w(A) must be positive"));
    }
    let min = a + h;
    if r < min {
        return Err(Error::BelowFirstStep { r, min });
    }
    Ok(w_a * ((r - a) / h - 1.0).exp())
}

/// Per-section Poincaré constant `π² / S²`.
pub fn poincare_constant(section: f64) -> Result<f64> {
    if !(section > 0.0) {
        return Err(Error::invalid("section must be positive"));
    }
    Ok(PI * PI / (section * section))
}

/// `C₁ = 4 / (π²/S² - 2L)`, finite only when `S < π / sqrt(2L)`.
pub fn comparison_constant(section: f64, lipschitz: f64) -> Result<Extended> {
    let gap = poincare_constant(section)? - 2.0 * lipschitz;
    Ok(if gap > 0.0 {
        Extended::Finite(4.0 / gap)
    } else {
        Extended::Infinite
    })
}

/// `C₂ = 4 S² / π²`, the constant for non-increasing `f`.
pub fn comparison_constant_nonincreasing(section: f64) -> Result<f64> {
    Ok(4.0 / poincare_constant(section)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const E_MINUS_ONE: f64 = 1.718_281_828_459_045;

    #[test]
    fn catalog_values() {
        assert_abs_diff_eq!(Nonlinearity::ClampedQuartic.eval(0.75).unwrap(), 6.0);
        assert_eq!(Nonlinearity::ClampedQuartic.eval(-3.0).unwrap(), 12.0);
        assert_eq!(Nonlinearity::ClampedQuartic.eval(2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(Nonlinearity::Linear { slope: 1.0 }.eval(0.3).unwrap(), 0.3);
        assert_eq!(Nonlinearity::QuarticComposite.eval(0.0).unwrap(), 0.0);
        assert_eq!(Nonlinearity::QuarticComposite.eval(1.0).unwrap(), 0.0);
        assert_eq!(Nonlinearity::QuarticComposite.eval(-1.0).unwrap(), 0.0);
        assert_eq!(Nonlinearity::QuarticComposite.eval(1.5).unwrap(), 0.0);
    }

    #[test]
    fn quartic_composite_matches_quartic_composite_second_derivative() {
        // u = (1 - s^4)^4 has -u'' = 48 s^2 p^3 - 192 s^6 p^2 with p = 1 - s^4
        for k in 1..50 {
            let s = -1.0 + 2.0 * k as f64 / 50.0;
            let p = 1.0 - s.powi(4);
            let u = p.powi(4);
            let minus_upp = 48.0 * s * s * p.powi(3) - 192.0 * s.powi(6) * p * p;
            let f = Nonlinearity::QuarticComposite.eval(u).unwrap();
            assert_abs_diff_eq!(f, minus_upp, epsilon = 1e-9);
        }
    }

    #[test]
    fn table_domain_exceeded() {
        let table = TableFunction::new(vec![(0.0, 1.0), (1.0, 0.0), (2.0, 0.5)]).unwrap();
        let f = Nonlinearity::Table { table };
        assert_abs_diff_eq!(f.eval(0.5).unwrap(), 0.5);
        assert!(matches!(f.eval(3.0), Err(Error::DomainExceeded { .. })));
        assert_eq!(f.lipschitz_on(0.0, 0.5).unwrap(), Extended::Finite(1.0));
        assert_eq!(f.lipschitz_on(1.5, 2.0).unwrap(), Extended::Finite(0.5));
        assert!(!f.monotone_nonincreasing());
    }

    #[test]
    fn lipschitz_examples() {
        let one = Nonlinearity::Linear { slope: 1.0 };
        assert_eq!(one.lipschitz_on(0.0, 1.0).unwrap(), Extended::Finite(1.0));
        assert_eq!(
            Nonlinearity::AllenCahn.lipschitz_on(0.0, 1.0).unwrap(),
            Extended::Finite(2.0)
        );
        assert_eq!(
            Nonlinearity::ClampedQuartic.lipschitz_on(0.0, 1.0).unwrap(),
            Extended::Infinite
        );
        assert_eq!(
            Nonlinearity::QuarticComposite
                .lipschitz_on(0.0, 0.5)
                .unwrap(),
            Extended::Infinite
        );
        assert_eq!(
            Nonlinearity::QuarticComposite
                .lipschitz_on(0.5, 1.0)
                .unwrap(),
            Extended::Infinite
        );
        assert_eq!(
            Nonlinearity::QuarticComposite
                .lipschitz_on(1.0, 3.0)
                .unwrap(),
            Extended::Finite(0.0)
        );
        assert!(one.lipschitz_on(1.0, 0.0).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_relative_eq!(
            epsilon_bounded(1.0).unwrap().finite().unwrap(),
            PI / 2f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            epsilon_bounded(PI * PI / 2.0).unwrap().finite().unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert_eq!(epsilon_bounded(0.0).unwrap(), Extended::Infinite);
        assert_relative_eq!(
            epsilon_growth(0.0, 1.0).unwrap().finite().unwrap(),
            PI / (16.0 * E_MINUS_ONE).sqrt(),
            max_relative = 1e-12
        );
        assert_eq!(epsilon_growth(0.0, 0.0).unwrap(), Extended::Infinite);
        assert!(epsilon_bounded(-1.0).is_err());
    }

    #[test]
    fn gamma_max_examples() {
        assert_relative_eq!(gamma_max(PI).unwrap(), 0.190_718_4, max_relative = 1e-6);
        assert_relative_eq!(
            gamma_max(PI).unwrap(),
            1.0 / (4.0 * E_MINUS_ONE.sqrt()),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            gamma_max(1.0).unwrap(),
            PI / (4.0 * E_MINUS_ONE.sqrt()),
            max_relative = 1e-12
        );
        assert!(gamma_max(0.0).is_err());
    }

    #[test]
    fn growth_bound_examples() {
        let h = doubling_step(1.0).unwrap();
        assert_relative_eq!(growth_lower_bound(1.0, 1.0, 1.0, 1.0 + h).unwrap(), 1.0);
        assert_relative_eq!(growth_lower_bound(1.0, 1.0, 1.0, 1.0 + 2.0 * h).unwrap(), E);
        assert!(matches!(
            growth_lower_bound(1.0, 1.0, 1.0, 1.0 + 0.5 * h),
            Err(Error::BelowFirstStep { .. })
        ));
        assert_relative_eq!(doubling_step(4.0).unwrap(), 0.5 * h);
    }

    #[test]
    fn comparison_constants() {
        assert_eq!(comparison_constant(PI, 1.0).unwrap(), Extended::Infinite);
        // S = 1, L = 1: 4 / (π² - 2)
        assert_relative_eq!(
            comparison_constant(1.0, 1.0).unwrap().finite().unwrap(),
            4.0 / (PI * PI - 2.0)
        );
        assert_relative_eq!(comparison_constant_nonincreasing(PI).unwrap(), 4.0);
    }

    #[test]
    fn threshold_params_validation() {
        let p = ThresholdParams {
            lipschitz: 1.0,
            gamma: 0.0,
            delta: 0.0,
            a: 1.0,
            section: 2.0,
        };
        assert!(p.growth_condition_holds().unwrap());
        let q = ThresholdParams { section: 3.0, ..p };
        assert!(!q.growth_condition_holds().unwrap());
        let bad = ThresholdParams { section: 0.0, ..p };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn positive_liminf_metadata() {
        assert!(Nonlinearity::AllenCahn.positive_liminf_at_zero());
        assert!(!Nonlinearity::QuarticComposite.positive_liminf_at_zero());
        let f = Nonlinearity::AllenCahn;
        assert_abs_diff_eq!(f.eval(1e-8).unwrap() / 1e-8, 1.0, epsilon = 1e-12);
    }
}
