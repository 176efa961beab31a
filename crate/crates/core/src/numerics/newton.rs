//! Damped-free Newton iteration for small square systems, with an optional
//! finite-difference Jacobian.

use crate::error::{LabError, Result};

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub residual_inf: f64,
    pub iterations: usize,
}

/// Jacobian supplier: analytic, or forward finite differences with the given
/// per-component steps (a single step broadcast if one value is given).
pub enum Jacobian<'a> {
    Analytic(&'a dyn Fn(&[f64]) -> Vec<Vec<f64>>),
    FiniteDifference { steps: Vec<f64> },
}

impl Jacobian<'_> {
    pub fn fd(step: f64) -> Self {
        Jacobian::FiniteDifference { steps: vec![step] }
    }

    pub fn fd_steps(steps: Vec<f64>) -> Self {
        Jacobian::FiniteDifference { steps }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Dense Gaussian elimination with partial pivoting; sized for the small
/// modulation systems (dimension ≤ a few dozen).
pub(crate) fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(f64::MIN_POSITIVE, |acc, v| acc.max(v.abs()));
    for k in 0..n {
        let (r, piv) = (k..n)
            .map(|i| (i, m[i][k].abs()))
            .max_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        if piv <= 1e-14 * scale {
            return Err(LabError::SingularPivot { row: k, magnitude: piv });
        }
        m.swap(k, r);
        x.swap(k, r);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in k + 1..n {
            acc -= m[k][j] * x[j];
        }
        x[k] = acc / m[k][k];
    }
    Ok(x)
}

/// Solve F(x) = 0 near x0; stops when ‖F‖∞ ≤ tol.
///
/// Non-convergence is an error carrying the last iterate and residual.
pub fn newton<F>(
    f: F,
    jacobian: Jacobian<'_>,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NewtonSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut res = inf_norm(&fx);
    if res <= tol {
        return Ok(NewtonSolution { x, residual_inf: res, iterations: 0 });
    }

    for it in 1..=max_iter {
        let jac: Vec<Vec<f64>> = match &jacobian {
            Jacobian::Analytic(j) => j(&x),
            Jacobian::FiniteDifference { steps } => {
                let mut cols = vec![vec![0.0; dim]; dim];
                for c in 0..dim {
                    let hc = if steps.len() == 1 { steps[0] } else { steps[c] };
                    let mut xp = x.clone();
                    xp[c] += hc;
                    let fp = f(&xp);
                    for r in 0..dim {
                        cols[c][r] = (fp[r] - fx[r]) / hc;
                    }
                }
                (0..dim)
                    .map(|r| (0..dim).map(|c| cols[c][r]).collect())
                    .collect()
            }
        };
        let neg_fx: Vec<f64> = fx.iter().map(|v| -v).collect();
        let delta = dense_solve(&jac, &neg_fx).map_err(|_| LabError::NewtonNonConvergence {
            iterations: it,
            residual: res,
            last_iterate: x.clone(),
        })?;
        for i in 0..dim {
            x[i] += delta[i];
        }
        fx = f(&x);
        res = inf_norm(&fx);
        if !res.is_finite() {
            return Err(LabError::NewtonNonConvergence {
                iterations: it,
                residual: res,
                last_iterate: x,
            });
        }
        if res <= tol {
            return Ok(NewtonSolution { x, residual_inf: res, iterations: it });
        }
    }
    Err(LabError::NewtonNonConvergence { iterations: max_iter, residual: res, last_iterate: x })
}
