//! Damped Gauss-Newton (Levenberg-Marquardt) on transformed parameters.
//!
//! Each physical parameter `p` is driven through an internal coordinate `u`:
//! linear `p = offset + scale * u` or logarithmic `p = exp(u)`, which keeps
//! rates positive without explicit bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Transform {
    Linear { offset: f64, scale: f64 },
    Log,
}

impl Transform {
    pub(crate) fn to_physical(self, u: f64) -> f64 {
        match self {
            Transform::Linear { offset, scale } => offset + scale * u,
            Transform::Log => u.exp(),
        }
    }

    pub(crate) fn to_internal(self, p: f64) -> f64 {
        match self {
            Transform::Linear { offset, scale } => (p - offset) / scale,
            Transform::Log => p.ln(),
        }
    }

    /// `dp/du` at internal coordinate `u`.
    pub(crate) fn derivative(self, u: f64) -> f64 {
        match self {
            Transform::Linear { scale, .. } => scale,
            Transform::Log => u.exp(),
        }
    }
}

/// A least-squares problem in physical parameters.
pub(crate) trait Problem {
    fn n_residuals(&self) -> usize;
    /// Weighted residuals `(y - f(p)) / sigma` at physical parameters `p`.
    /// Returns `false` if `p` lies outside the model's domain.
    fn residuals(&self, p: &[f64], out: &mut [f64]) -> bool;
    /// Optional analytic Jacobian `d r_i / d p_j` in physical parameters.
    fn jacobian(&self, _p: &[f64], _out: &mut DMatrix<f64>) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    /// Physical parameters at the optimum.
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    /// `0.5 * |r|^2` at the optimum.
    pub cost: f64,
    pub n_iter: usize,
    /// Covariance of the internal coordinates, `s^2 (J^T J)^-1`.
    pub cov_u: Option<DMatrix<f64>>,
    /// Ratio of smallest to largest singular value of the column-scaled Jacobian.
    pub conditioning: f64,
}

impl Outcome {
    /// One-sigma uncertainties of the physical parameters.
    pub(crate) fn sigmas(&self, transforms: &[Transform]) -> Vec<f64> {
        (0..self.p.len())
            .map(|j| match &self.cov_u {
                Some(c) => (c[(j, j)].max(0.0)).sqrt() * transforms[j].derivative(self.u[j]).abs(),
                None => f64::NAN,
            })
            .collect()
    }
}

pub(crate) const MAX_ITER: usize = 500;
const STEP_TOL: f64 = 1e-10;
const GRAD_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;
pub(crate) const RANK_TOL: f64 = 1e-10;

struct Eval<'a, P: Problem> {
    problem: &'a P,
    transforms: &'a [Transform],
}

impl<P: Problem> Eval<'_, P> {
    fn physical(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.transforms)
            .map(|(&u, t)| t.to_physical(u))
            .collect()
    }

    fn residuals(&self, u: &[f64]) -> Option<DVector<f64>> {
        let mut r = DVector::zeros(self.problem.n_residuals());
        let p = self.physical(u);
        if !self.problem.residuals(&p, r.as_mut_slice()) || r.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(r)
    }

    fn jacobian(&self, u: &[f64], r0: &DVector<f64>) -> Option<DMatrix<f64>> {
        let (m, n) = (r0.len(), u.len());
        let p = self.physical(u);
        let mut j = DMatrix::zeros(m, n);
        if self.problem.jacobian(&p, &mut j) {
            for c in 0..n {
                let d = self.transforms[c].derivative(u[c]);
                j.column_mut(c).scale_mut(d);
            }
            return Some(j);
        }
        let mut shifted = u.to_vec();
        for c in 0..n {
            let h = FD_STEP * u[c].abs().max(1.0);
            shifted[c] = u[c] + h;
            let r1 = match self.residuals(&shifted) {
                Some(r) => r,
                None => {
                    // Step outside the domain: try the backward difference.
                    shifted[c] = u[c] - h;
                    let r1 = self.residuals(&shifted)?;
                    shifted[c] = u[c];
                    j.set_column(c, &((r0 - r1) / h));
                    continue;
                }
            };
            shifted[c] = u[c];
            j.set_column(c, &((r1 - r0) / h));
        }
        Some(j)
    }
}

fn conditioning(j: &DMatrix<f64>) -> f64 {
    let mut scaled = j.clone();
    for mut c in scaled.column_iter_mut() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// Minimize `0.5 |r(p)|^2` starting from physical `p0`.
///
/// `weighted` says whether residuals are already divided by measurement
/// sigmas; if not, the covariance is scaled by the reduced chi-square.
pub(crate) fn minimize<P: Problem>(
    problem: &P,
    transforms: &[Transform],
    p0: &[f64],
    weighted: bool,
) -> Result<Outcome> {
    let eval = Eval { problem, transforms };
    let n = p0.len();
    let m = problem.n_residuals();
    if m < n {
        return Err(Error::RankDeficient(format!(
            "{m} data points cannot determine {n} parameters"
        )));
    }
    let mut u: Vec<f64> = p0.iter().zip(transforms).map(|(&p, t)| t.to_internal(p)).collect();
    let mut r = eval
        .residuals(&u)
        .ok_or_else(|| Error::domain("initial guess lies outside the model domain"))?;
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda = 1e-3;
    let mut n_iter = 0;
    let mut converged = false;
    let mut jac = eval
        .jacobian(&u, &r)
        .ok_or_else(|| Error::domain("Jacobian undefined at the initial guess"))?;

    while n_iter < MAX_ITER {
        n_iter += 1;
        let g = jac.transpose() * &r;
        let scale = jac.norm() * r.norm();
        if cost == 0.0 || g.amax() <= GRAD_TOL * scale.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let small = step.norm() <= STEP_TOL * (DVector::from_column_slice(&u).norm() + STEP_TOL);
            match eval.residuals(&trial) {
                Some(rt) if 0.5 * rt.norm_squared() <= cost => {
                    let new_cost = 0.5 * rt.norm_squared();
                    u = trial;
                    r = rt;
                    cost = new_cost;
                    lambda = (lambda / 3.0).max(1e-15);
                    accepted = true;
                    if small {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    if small {
                        converged = true;
                        break;
                    }
                    lambda *= 4.0;
                }
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // Damping exhausted without progress: the point is a numerical minimum.
            converged = true;
            break;
        }
        jac = eval
            .jacobian(&u, &r)
            .ok_or_else(|| Error::domain("Jacobian undefined during the fit"))?;
    }

    if !converged {
        let y = r.norm();
        return Err(Error::NotConverged {
            iterations: n_iter,
            residual: y,
        });
    }

    let jac = eval
        .jacobian(&u, &r)
        .ok_or_else(|| Error::domain("Jacobian undefined at the optimum"))?;
    let cond = conditioning(&jac);
    let dof = m.saturating_sub(n);
    let s2 = if weighted {
        1.0
    } else if dof > 0 {
        2.0 * cost / dof as f64
    } else {
        f64::NAN
    };
    let cov_u = if cond > RANK_TOL {
        (jac.transpose() * &jac).try_inverse().map(|c| c * s2)
    } else {
        None
    };
    Ok(Outcome {
        p: eval.physical(&u),
        u,
        cost,
        n_iter,
        cov_u,
        conditioning: cond,
    })
}
