//! Smallest eigenvalue of a banded operator that is self-adjoint in a
//! diagonal weighted inner product.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Normalized to unit weighted norm with a nonnegative sum.
    pub vector: Vec<f64>,
    pub iters: usize,
}

const MAX_ITERS: usize = 400;

fn winner(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, p), q)| w * p * q).sum()
}

fn normalize(w: &[f64], x: &mut [f64]) {
    let n = winner(w, x, x).sqrt();
    let s = if x.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for v in x.iter_mut() {
        *v *= s / n;
    }
}

fn shifted(j: &BandMatrix, s: f64) -> BandMatrix {
    let mut m = j.clone();
    m.add_diagonal(&vec![-s; j.n()]);
    m
}

/// Shifted inverse iteration from `lower` (below the spectrum) with a
/// positive start vector, tightened by Rayleigh-quotient shifts. `tol`
/// bounds the eigenvalue error.
pub fn smallest_eigenpair(j: &BandMatrix, w: &[f64], lower: f64, tol: f64) -> Result<EigenPair> {
    let n = j.n();
    let mut x = vec![1.0; n];
    normalize(w, &mut x);
    let mut shift = lower;
    let mut rq_phase = false;
    let mut rq_allowed = true;
    for it in 1..=MAX_ITERS {
        let m = shifted(j, shift);
        let lu = match m.factor() {
            Ok(lu) => lu,
            Err(Error::SingularMatrix(_)) => {
                shift -= 1e-10 * shift.abs().max(1.0);
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut y = lu.solve(&x);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigenStagnation(it));
        }
        normalize(w, &mut y);
        let jy = j.apply(&y);
        let rho = winner(w, &jy, &y);
        let res: Vec<f64> = jy.iter().zip(&y).map(|(a, b)| a - rho * b).collect();
        let rnorm = winner(w, &res, &res).sqrt();
        let overlap = winner(w, &x, &y).abs();
        if rq_phase && overlap < 0.9 {
            // the Rayleigh shift jumped to another eigenvalue: fall back
            rq_phase = false;
            rq_allowed = false;
            shift = lower;
            x = vec![1.0; n];
            normalize(w, &mut x);
            continue;
        }
        x = y;
        // eigenvalue error is O(|r|^2 / gap)
        if rnorm <= tol.sqrt() * rho.abs().max(1.0) * 1e-2 {
            return Ok(EigenPair { value: rho, vector: x, iters: it });
        }
        if rq_allowed && rnorm <= 1e-2 * (rho - lower).abs().max(1.0) {
            rq_phase = true;
            shift = rho;
        } else {
            // stay below the target while closing in
            shift = shift.max(rho - 2.0 * rnorm).min(rho);
        }
    }
    Err(Error::EigenStagnation(MAX_ITERS))
}
