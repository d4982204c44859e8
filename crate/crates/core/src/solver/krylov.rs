//! Jacobi-preconditioned conjugate gradients and BiCGSTAB.

use crate::discretization::SparseOperator;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b - A x‖₂ / ‖b‖₂`, recomputed from the returned iterate.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(op: &SparseOperator, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    op.apply_into(x, r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    norm(r)
}

fn inverse_diagonal(op: &SparseOperator) -> Result<Vec<f64>> {
    op.diagonal()
        .into_iter()
        .map(|d| {
            if d != 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::invalid("zero diagonal entry"))
            }
        })
        .collect()
}

pub fn default_max_iterations(n: usize) -> usize {
    (10 * n).max(1000)
}

/// Iterations without a 10% drop of the best residual before giving up.
pub const STAGNATION_WINDOW: usize = 400;

struct Stagnation {
    best: f64,
    since: usize,
}

impl Stagnation {
    fn new(rn: f64) -> Self {
        Self { best: rn, since: 0 }
    }

    fn stalled(&mut self, rn: f64) -> bool {
        if rn < 0.9 * self.best {
            self.best = rn;
            self.since = 0;
        } else {
            self.since += 1;
        }
        self.since > STAGNATION_WINDOW
    }
}

/// Preconditioned CG. Fails with [`Error::NoConvergence`] on a nonpositive
/// curvature `pᵀAp`, which signals an indefinite operator.
pub fn conjugate_gradient(
    op: &SparseOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome> {
    let n = op.dim();
    check_dims(n, b, x0)?;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let minv = inverse_diagonal(op)?;
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    let mut rn = true_residual(op, b, &x, &mut r);
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(a, m)| a * m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    let mut stag = Stagnation::new(rn);
    while rn > tol * bnorm {
        if it >= max_iter || stag.stalled(rn) {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: rn / bnorm,
            });
        }
        op.apply_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: rn / bnorm,
            });
        }
        let alpha = rz / curvature;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut()
            .zip(&ap)
            .for_each(|(ri, api)| *ri -= alpha * api);
        it += 1;
        rn = norm(&r);
        if rn <= tol * bnorm || it % 50 == 0 {
            // guard against drift of the recursive residual
            rn = true_residual(op, b, &x, &mut r);
        }
        z.iter_mut()
            .zip(r.iter().zip(&minv))
            .for_each(|(zi, (ri, mi))| *zi = ri * mi);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut()
            .zip(&z)
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    let rn = true_residual(op, b, &x, &mut r);
    Ok(KrylovOutcome {
        x,
        iterations: it,
        relative_residual: rn / bnorm,
    })
}

/// Right-preconditioned BiCGSTAB with Jacobi scaling. Restarts from the
/// current iterate on breakdown; fails after repeated breakdowns.
pub fn bicgstab(
    op: &SparseOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome> {
    let n = op.dim();
    check_dims(n, b, x0)?;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let minv = inverse_diagonal(op)?;
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    let mut rn = true_residual(op, b, &x, &mut r);
    let mut it = 0;
    let mut restarts = 0;
    let mut stag = Stagnation::new(rn);

    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);

    while rn > tol * bnorm {
        if it >= max_iter || stag.stalled(rn) {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: rn / bnorm,
            });
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            restarts += 1;
            if restarts > 20 {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: rn / bnorm,
                });
            }
            rn = true_residual(op, b, &x, &mut r);
            r_hat.copy_from_slice(&r);
            p.iter_mut().for_each(|v| *v = 0.0);
            v.iter_mut().for_each(|w| *w = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * minv[i];
        }
        op.apply_into(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            omega = 0.0;
            continue;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        it += 1;
        if norm(&s) <= tol * bnorm {
            x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi += alpha * yi);
            rn = true_residual(op, b, &x, &mut r);
            continue;
        }
        for i in 0..n {
            zz[i] = s[i] * minv[i];
        }
        op.apply_into(&zz, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zz[i];
            r[i] = s[i] - omega * t[i];
        }
        rn = norm(&r);
        if rn <= tol * bnorm || it % 50 == 0 {
            rn = true_residual(op, b, &x, &mut r);
        }
    }
    let rn = true_residual(op, b, &x, &mut r);
    Ok(KrylovOutcome {
        x,
        iterations: it,
        relative_residual: rn / bnorm,
    })
}

fn check_dims(n: usize, b: &[f64], x0: Option<&[f64]>) -> Result<()> {
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if let Some(x) = x0 {
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
    }
    Ok(())
}
