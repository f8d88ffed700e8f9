//! Damped Newton iteration with Armijo backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::DiscreteProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Bound on `h^order * |G|_inf`.
    pub tol: f64,
    pub max_iters: usize,
    pub damping_floor: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 60, damping_floor: 2f64.powi(-20) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iters: usize,
    /// Scaled residual at the returned point.
    pub residual: f64,
    /// Scaled residuals, one per iterate.
    pub history: Vec<f64>,
}

const ARMIJO_C: f64 = 1e-4;

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn newton<P: DiscreteProblem + ?Sized>(
    p: &P,
    x0: Vec<f64>,
    lambda: f64,
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    let mut x = x0;
    if !p.admissible(&x) {
        return Err(Error::DomainExit { max_u: p.sup(&x) });
    }
    let mut r = p.residual(&x, lambda);
    let mut res = p.scaled_residual_norm(&r);
    let mut history = vec![res];
    for it in 0..=opts.max_iters {
        if res <= opts.tol {
            return Ok(NewtonReport { x, iters: it, residual: res, history });
        }
        if it == opts.max_iters {
            break;
        }
        let j = p.jacobian(&x, lambda);
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = j.solve(&neg)?;
        let r_norm = norm2(&r);
        let mut alpha = 1.0;
        let mut any_admissible = false;
        let accepted = loop {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if p.admissible(&xt) {
                any_admissible = true;
                let rt = p.residual(&xt, lambda);
                if norm2(&rt) <= (1.0 - ARMIJO_C * alpha) * r_norm {
                    break Some((xt, rt));
                }
            }
            alpha *= 0.5;
            if alpha < opts.damping_floor {
                break None;
            }
        };
        match accepted {
            Some((xt, rt)) => {
                let step = d.iter().fold(0.0f64, |m, v| m.max(v.abs())) * alpha;
                let scale = 1.0 + xt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                x = xt;
                r = rt;
                res = p.scaled_residual_norm(&r);
                history.push(res);
                // rounding floor: the update no longer moves the iterate
                if step <= 1e-14 * scale && res <= 1e3 * opts.tol {
                    return Ok(NewtonReport { x, iters: it + 1, residual: res, history });
                }
            }
            None if !any_admissible => {
                let max_u = x.iter().zip(&d).map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
                return Err(Error::DomainExit { max_u });
            }
            None => {
                return Err(Error::NonConvergence { iters: it + 1, residual: res });
            }
        }
    }
    Err(Error::NonConvergence { iters: opts.max_iters, residual: res })
}
