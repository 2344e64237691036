//! Damped least squares (Levenberg-Marquardt) over weighted residuals.
//!
//! Callers supply `r_i = (y_i - f_i(p)) / sigma_i`; the Jacobian is taken by
//! central differences. Each call owns its workspace, so fits can run in
//! parallel freely.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative chi2 decrease below which an accepted step counts as converged.
    pub chi2_tolerance: f64,
    /// Relative parameter step below which the fit counts as converged.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            chi2_tolerance: 1e-14,
            step_tolerance: 1e-13,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// (J^T J)^-1 at the solution, in parameter units.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl LmFit {
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }

    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }
}

fn chi2_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<F>(residuals: &F, p: &[f64], scales: &[f64], n: usize) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let m = p.len();
    let mut jac = DMatrix::zeros(n, m);
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut q = p.to_vec();
    for j in 0..m {
        let h = 1e-6 * p[j].abs().max(scales[j]);
        q[j] = p[j] + h;
        residuals(&q, &mut plus);
        q[j] = p[j] - h;
        residuals(&q, &mut minus);
        q[j] = p[j];
        for i in 0..n {
            let d = (plus[i] - minus[i]) / (2.0 * h);
            if !d.is_finite() {
                return None;
            }
            jac[(i, j)] = d;
        }
    }
    Some(jac)
}

/// Minimizes sum r_i(p)^2 starting from `p0`.
///
/// `scales` gives a typical magnitude per parameter for finite-difference
/// steps when a parameter is near zero.
pub fn levenberg_marquardt<F>(
    residuals: F,
    p0: &[f64],
    scales: &[f64],
    n_residuals: usize,
    opts: &LmOptions,
) -> Result<LmFit>
where
    F: Fn(&[f64], &mut [f64]),
{
    let m = p0.len();
    assert_eq!(scales.len(), m);
    if n_residuals < m {
        return Err(Error::InsufficientData(format!(
            "{n_residuals} residuals for {m} parameters"
        )));
    }
    let dof = n_residuals - m;
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n_residuals];
    residuals(&p, &mut r);
    let mut chi2 = chi2_of(&r);
    if !chi2.is_finite() {
        return Err(Error::domain("residuals not finite at the starting point"));
    }
    let mut lambda = opts.initial_damping;
    let mut trial = vec![0.0; m];
    let mut r_trial = vec![0.0; n_residuals];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(&residuals, &p, scales, n_residuals)
            .ok_or_else(|| Error::domain("non-finite Jacobian"))?;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);

        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&grad));
            for k in 0..m {
                trial[k] = p[k] + delta[k];
            }
            residuals(&trial, &mut r_trial);
            let chi2_trial = chi2_of(&r_trial);
            if chi2_trial.is_finite() && chi2_trial <= chi2 {
                let rel_step = (0..m)
                    .map(|k| delta[k].abs() / p[k].abs().max(scales[k]))
                    .fold(0.0, f64::max);
                let rel_chi2 = (chi2 - chi2_trial) / chi2.max(1e-300);
                p.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                chi2 = chi2_trial;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if rel_step < opts.step_tolerance
                    || rel_chi2 < opts.chi2_tolerance
                    || chi2 < 1e-28
                {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left: we are at a (possibly flat) minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            chi2,
            reduced_chi2: if dof > 0 { chi2 / dof as f64 } else { f64::NAN },
        });
    }

    let jac = jacobian(&residuals, &p, scales, n_residuals)
        .ok_or_else(|| Error::domain("non-finite Jacobian"))?;
    let jtj = jac.transpose() * &jac;
    let covariance = jtj
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(m, m, f64::NAN));
    Ok(LmFit {
        params: p,
        covariance,
        chi2,
        dof,
        iterations,
    })
}
