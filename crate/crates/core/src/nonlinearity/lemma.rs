//! Scalar inequalities satisfied by class (R) and (S) nonlinearities, with
//! constructive searches for the constants `mu` and `k`.

use serde::Serialize;

use super::{ClassTag, Kind, Nonlinearity};
use crate::error::{Error, Result};

/// An inequality `lhs >= rhs` holds when `lhs - rhs >= -INEQUALITY_SLACK`.
pub const INEQUALITY_SLACK: f64 = 1e-12;

const MU_FLOOR: f64 = 1e-6;
const S_DENSE_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    R,
    S,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupercriticalCheck {
    pub holds: bool,
    /// Minimum tail ratio minus the threshold.
    pub margin: f64,
    pub threshold: f64,
    pub min_ratio: f64,
}

/// Tests the class (R) and (S) axioms at the supplied samples.
pub fn classify(nl: &Nonlinearity, samples: &[f64]) -> Result<Classification> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty sample grid".into()));
    }
    for &t in samples {
        nl.check_domain(t)?;
    }
    if (nl.f(0.0) - 1.0).abs() > 1e-12 {
        return Ok(Classification::Neither);
    }
    for &t in samples {
        let (f, fp, fpp) = (nl.f(t), nl.fprime(t), nl.fsecond(t));
        let tol = INEQUALITY_SLACK * f.abs().max(1.0);
        if !(f > 0.0) || fp < -tol || fpp < -tol {
            return Ok(Classification::Neither);
        }
    }
    match nl.class_tag() {
        ClassTag::R => {
            let mut tail: Vec<f64> = samples.iter().copied().filter(|&t| t >= 1.0).collect();
            tail.sort_by(f64::total_cmp);
            let Some(&t_max) = tail.last() else {
                return Ok(Classification::Neither);
            };
            // elasticity t f'/f > 1 at the far end and f(t)/t increasing over the tail
            let elasticity = (t_max * nl.fprime(t_max) / nl.f(t_max)).abs();
            let mut increasing = true;
            let upper: Vec<f64> = tail.iter().copied().filter(|&t| t >= 0.5 * t_max).collect();
            for w in upper.windows(2) {
                let (a, b) = (nl.ln_f(w[0]) - w[0].ln(), nl.ln_f(w[1]) - w[1].ln());
                if b < a - 1e-12 {
                    increasing = false;
                }
            }
            if elasticity > 1.0 + 1e-6 && increasing {
                Ok(Classification::R)
            } else {
                Ok(Classification::Neither)
            }
        }
        ClassTag::S => {
            let near = nl.f(1.0 - 1e-12);
            let less = nl.f(1.0 - 1e-11);
            if near.is_infinite() || near / less > 1.01 {
                Ok(Classification::S)
            } else {
                Ok(Classification::Neither)
            }
        }
    }
}

/// `t f(t)/F(t)` for class (R), `f(t)/F(t)` for class (S).
pub fn superlinearity_ratio(nl: &Nonlinearity, t: f64) -> Result<f64> {
    nl.check_domain(t)?;
    if t == 0.0 {
        return Err(Error::Singular("superlinearity ratio at t = 0 (F(0) = 0)".into()));
    }
    match nl.class_tag() {
        ClassTag::R => match nl.kind() {
            // t e^t/(e^t - 1) = t/(1 - e^-t)
            Kind::Exp => Ok(t / -(-t).exp_m1()),
            _ => {
                let big_f = nl.antiderivative(t);
                let f = nl.f(t);
                if f.is_finite() && big_f.is_finite() {
                    Ok(t * f / big_f)
                } else {
                    Err(Error::Singular(format!("overflow evaluating ratio at t = {t}")))
                }
            }
        },
        ClassTag::S => Ok(nl.f(t) / nl.antiderivative(t)),
    }
}

/// `2N/(N-4)`.
pub fn supercritical_threshold(n: usize) -> Result<f64> {
    if n < 5 {
        return Err(Error::InvalidInput(format!("supercritical threshold needs N >= 5, got {n}")));
    }
    Ok(2.0 * n as f64 / (n as f64 - 4.0))
}

pub fn supercritical_check(nl: &Nonlinearity, n: usize, tail: &[f64]) -> Result<SupercriticalCheck> {
    if nl.class_tag() != ClassTag::R {
        return Err(Error::WrongClass { expected: "R" });
    }
    let threshold = supercritical_threshold(n)?;
    if tail.is_empty() || tail.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("tail must be nonempty and strictly increasing".into()));
    }
    if tail[tail.len() - 1] < 1e3 {
        return Err(Error::InvalidInput("tail must reach at least 1e3".into()));
    }
    let mut min_ratio = f64::INFINITY;
    for &t in tail {
        min_ratio = min_ratio.min(superlinearity_ratio(nl, t)?);
    }
    let margin = min_ratio - threshold;
    Ok(SupercriticalCheck { holds: margin > 0.0, margin, threshold, min_ratio })
}

/// `mu^2 (f(t/mu) + eps) - f(t) - eps/2`. Where `f` overflows the value
/// returned is the log-ratio of the two sides, which has the same sign.
pub fn mu_r_margin(nl: &Nonlinearity, mu: f64, eps: f64, t: f64) -> f64 {
    let a = nl.f(t / mu);
    let b = nl.f(t);
    let direct = mu * mu * (a + eps) - b - 0.5 * eps;
    if direct.is_finite() && a.is_finite() {
        return direct;
    }
    let la = nl.ln_f(t / mu);
    let lb = nl.ln_f(t);
    let lhs = 2.0 * mu.ln() + la + (eps * (-la).exp()).ln_1p();
    let rhs = lb + (0.5 * eps * (-lb).exp()).ln_1p();
    lhs - rhs
}

/// `mu (f(t/mu) + eps) - f(t) - eps/2` for `0 <= t < mu`.
pub fn mu_s_margin(nl: &Nonlinearity, mu: f64, eps: f64, t: f64) -> Result<f64> {
    let s = t / mu;
    if !nl.in_domain(s) {
        return Err(Error::Singular(format!("t/mu = {s} is on or beyond the domain edge")));
    }
    Ok(mu * (nl.f(s) + eps) - nl.f(t) - 0.5 * eps)
}

/// Dense linear grid on `[0, min(10, t_max)]` followed by a geometric
/// stretch out to `t_max`.
pub fn hybrid_grid(t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(4);
    let knee = t_max.min(10.0);
    let n_lin = n / 2;
    let mut g: Vec<f64> = (0..=n_lin).map(|i| knee * i as f64 / n_lin as f64).collect();
    if t_max > knee {
        let n_geo = n - n_lin;
        let ratio = (t_max / knee).powf(1.0 / n_geo as f64);
        let mut t = knee;
        for _ in 0..n_geo {
            t *= ratio;
            g.push(t);
        }
        *g.last_mut().unwrap() = t_max;
    }
    g
}

/// Descend through `1 - 2^-k`, then halvings, until `holds` first fails;
/// bisect the last bracket and return a verified value backed off slightly
/// from the edge.
fn descend_and_bisect(holds: impl Fn(f64) -> bool) -> Result<f64> {
    let mut candidates: Vec<f64> = (1..=19).rev().map(|k| 1.0 - 0.5f64.powi(k)).collect();
    let mut m = 0.25;
    while m >= MU_FLOOR {
        candidates.push(m);
        m *= 0.5;
    }
    if !holds(candidates[0]) {
        return Err(Error::SearchFailure("no admissible mu near 1".into()));
    }
    let mut ok = candidates[0];
    let mut bad = None;
    for &c in &candidates[1..] {
        if holds(c) {
            ok = c;
        } else {
            bad = Some(c);
            break;
        }
    }
    let Some(mut lo) = bad else { return Ok(ok) };
    let mut hi = ok;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // move a little into the valid region so points between grid nodes also pass
    let backed = hi + 0.05 * (1.0 - hi);
    if holds(backed) {
        Ok(backed)
    } else {
        Ok(hi)
    }
}

/// Searches for `mu` in `(0,1)` with `mu^2 (f(t/mu)+eps) >= f(t) + eps/2`
/// at every grid point.
pub fn find_mu_r(nl: &Nonlinearity, eps: f64, t_grid: &[f64]) -> Result<f64> {
    if nl.class_tag() != ClassTag::R {
        return Err(Error::WrongClass { expected: "R" });
    }
    if !nl.is_log_convex() {
        return Err(Error::NotLogConvex);
    }
    if !(eps > 0.0) || t_grid.is_empty() || t_grid.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidInput("need eps > 0 and a nonempty grid in [0, inf)".into()));
    }
    descend_and_bisect(|mu| t_grid.iter().all(|&t| mu_r_margin(nl, mu, eps, t) >= -INEQUALITY_SLACK))
}

/// Searches for `mu` in `(0,1)` with `mu (f(t/mu)+eps) >= f(t) + eps/2` for
/// `0 <= t <= mu`. Each candidate is checked on the supplied grid (points
/// below `mu`) and on a 512-point grid of `[0, mu)`.
pub fn find_mu_s(nl: &Nonlinearity, eps: f64, t_grid: &[f64]) -> Result<f64> {
    if nl.class_tag() != ClassTag::S {
        return Err(Error::WrongClass { expected: "S" });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("need eps > 0".into()));
    }
    let holds = |mu: f64| {
        let dense = (0..S_DENSE_POINTS).map(|j| mu * j as f64 / S_DENSE_POINTS as f64);
        let given = t_grid.iter().copied().filter(|&t| (0.0..mu).contains(&t));
        dense
            .chain(given)
            .all(|t| matches!(mu_s_margin(nl, mu, eps, t), Ok(m) if m >= -INEQUALITY_SLACK))
    };
    descend_and_bisect(holds)
}

fn k_objective(nl: &Nonlinearity, mu: f64, n: f64, t: f64) -> f64 {
    let a = nl.f(t / mu);
    if a.is_finite() {
        n * nl.f(t) - a
    } else {
        f64::NEG_INFINITY
    }
}

/// Smallest `k >= 0` (plus 1e-9) with `N f(t) <= f(t/mu) + k` for `t >= 0`.
pub fn find_k(nl: &Nonlinearity, mu: f64, n: usize) -> Result<f64> {
    if nl.class_tag() != ClassTag::R {
        return Err(Error::WrongClass { expected: "R" });
    }
    if !nl.is_log_convex() {
        return Err(Error::NotLogConvex);
    }
    if !(mu > 0.0 && mu < 1.0) || n == 0 {
        return Err(Error::InvalidInput(format!("need 0 < mu < 1 and N >= 1 (mu = {mu}, N = {n})")));
    }
    let nf = n as f64;
    let grid = hybrid_grid(1e3, 8000);
    let vals: Vec<f64> = grid.iter().map(|&t| k_objective(nl, mu, nf, t)).collect();
    let (imax, &vmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::SearchFailure("empty grid".into()))?;
    if imax + 1 == grid.len() {
        return Err(Error::SearchFailure("objective still growing at the end of the grid".into()));
    }
    let mut best = vmax;
    if imax > 0 {
        let (mut a, mut b) = (grid[imax - 1], grid[imax + 1]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (k_objective(nl, mu, nf, c), k_objective(nl, mu, nf, d));
        for _ in 0..200 {
            if (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
                break;
            }
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = k_objective(nl, mu, nf, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = k_objective(nl, mu, nf, d);
            }
        }
        best = best.max(fc).max(fd);
    }
    let k = best.max(0.0) + 1e-9;
    if vals.iter().any(|&v| v > k + INEQUALITY_SLACK) {
        return Err(Error::Consistency("k fails on the verification grid".into()));
    }
    Ok(k)
}

/// True iff `f'' > 0` at every grid point.
pub fn strict_convexity_check(nl: &Nonlinearity, t_grid: &[f64]) -> bool {
    t_grid.iter().all(|&t| nl.fsecond(t) > 0.0)
}

/// A common `mu` valid for both nonlinearities (the larger of the two
/// individual ones, re-verified) and the matching common `k`.
pub fn common_mu_k(f: &Nonlinearity, g: &Nonlinearity, eps: f64, n: usize, t_grid: &[f64]) -> Result<(f64, f64)> {
    let mu = find_mu_r(f, eps, t_grid)?.max(find_mu_r(g, eps, t_grid)?);
    for nl in [f, g] {
        if t_grid.iter().any(|&t| mu_r_margin(nl, mu, eps, t) < -INEQUALITY_SLACK) {
            return Err(Error::SearchFailure("common mu fails for one of the pair".into()));
        }
    }
    let k = find_k(f, mu, n)?.max(find_k(g, mu, n)?);
    Ok((mu, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{CustomFns, Nonlinearity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn affine() -> Nonlinearity {
        Nonlinearity::custom(
            "affine",
            ClassTag::R,
            false,
            CustomFns {
                f: Arc::new(|t| 1.0 + t),
                fprime: Arc::new(|_| 1.0),
                fsecond: Arc::new(|_| 0.0),
                antiderivative: Arc::new(|t| t + 0.5 * t * t),
            },
        )
    }

    fn quadratic() -> Nonlinearity {
        Nonlinearity::custom(
            "one_plus_square",
            ClassTag::R,
            false,
            CustomFns {
                f: Arc::new(|t| 1.0 + t * t),
                fprime: Arc::new(|t| 2.0 * t),
                fsecond: Arc::new(|_| 2.0),
                antiderivative: Arc::new(|t| t + t * t * t / 3.0),
            },
        )
    }

    #[test]
    fn classification_of_builtins() {
        let g = hybrid_grid(50.0, 200);
        assert_eq!(classify(&Nonlinearity::exp(), &g).unwrap(), Classification::R);
        let s: Vec<f64> = (0..100).map(|i| i as f64 * 0.0099).collect();
        assert_eq!(classify(&Nonlinearity::mems(2.0).unwrap(), &s).unwrap(), Classification::S);
        assert_eq!(classify(&affine(), &g).unwrap(), Classification::Neither);
        assert!(classify(&Nonlinearity::mems(2.0).unwrap(), &[1.5]).is_err());
        assert!(classify(&Nonlinearity::exp(), &[]).is_err());
    }

    #[test]
    fn exp_ratio_at_one() {
        let e = std::f64::consts::E;
        let r = superlinearity_ratio(&Nonlinearity::exp(), 1.0).unwrap();
        assert!((r - e / (e - 1.0)).abs() < 1e-14);
        assert!((r - 1.5820).abs() < 1e-4);
        assert!(matches!(superlinearity_ratio(&Nonlinearity::exp(), 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn power_ratio_tends_to_p_plus_one() {
        let nl = Nonlinearity::power(3.0).unwrap();
        let r = superlinearity_ratio(&nl, 1e8).unwrap();
        assert!((r - 4.0).abs() < 1e-6);
    }

    #[test]
    fn mems_ratio_monotone_near_one() {
        let nl = Nonlinearity::mems(2.0).unwrap();
        let mut prev = 0.0;
        for i in 0..100 {
            let t = 0.9 + 0.1 * i as f64 / 100.0;
            let r = superlinearity_ratio(&nl, t).unwrap();
            assert!((r - 1.0 / (t * (1.0 - t))).abs() < 1e-8 * r);
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn exp_ratio_crosses_bounds() {
        let nl = Nonlinearity::exp();
        for b in [10.0, 100.0] {
            // t/(1-e^-t) > B once t > B
            let cross = (1..10_000)
                .map(|i| i as f64 * 0.05)
                .find(|&t| superlinearity_ratio(&nl, t).unwrap() > b)
                .unwrap();
            assert!(cross > b - 1.0 && cross <= b + 0.1, "{cross}");
        }
        let mut prev = 0.0;
        for i in 0..200 {
            let r = superlinearity_ratio(&nl, 1.0 + i as f64 * 0.5).unwrap();
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn mems_f_over_big_f_exceeds_n() {
        for p in [0.5, 1.0, 2.0] {
            let nl = Nonlinearity::mems(p).unwrap();
            for n in [1.0, 8.0, 64.0] {
                let t = 1.0 - 1e-6;
                assert!(nl.f(t) / nl.antiderivative(t) >= n, "p={p} n={n}");
            }
        }
    }

    #[test]
    fn threshold_is_ten_at_five() {
        assert_eq!(supercritical_threshold(5).unwrap(), 10.0);
        assert!(supercritical_threshold(4).is_err());
    }

    #[test]
    fn supercritical_examples() {
        let tail: Vec<f64> = (0..50).map(|i| 1e3 * 1.2f64.powi(i)).collect();
        let c = supercritical_check(&Nonlinearity::exp(), 5, &tail).unwrap();
        assert!(c.holds && c.margin > 900.0);
        let c = supercritical_check(&Nonlinearity::power(3.0).unwrap(), 5, &tail).unwrap();
        assert!(!c.holds);
        assert!((c.min_ratio - 4.0).abs() < 0.01);
        assert!(matches!(
            supercritical_check(&Nonlinearity::mems(2.0).unwrap(), 5, &tail),
            Err(Error::WrongClass { .. })
        ));
    }

    #[test]
    fn exp_mu_examples() {
        let nl = Nonlinearity::exp();
        // 0.5^2 (1 + 1) - 1 - 0.5 = -1
        assert!((mu_r_margin(&nl, 0.5, 1.0, 0.0) + 1.0).abs() < 1e-15);
        let grid = hybrid_grid(1e3, 4000);
        let min09 = grid.iter().map(|&t| mu_r_margin(&nl, 0.9, 1.0, t)).fold(f64::INFINITY, f64::min);
        assert!(min09 > 0.0 && min09 < 0.1);
        let mu = find_mu_r(&nl, 1.0, &grid).unwrap();
        assert!(mu > 0.5 && mu < 1.0);
        assert!(mu * mu * 2.0 >= 1.5);
    }

    #[test]
    fn mu_r_verified_off_grid() {
        let nl = Nonlinearity::exp();
        let grid = hybrid_grid(1e3, 4000);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for eps in [0.1, 1.0, 10.0] {
            let mu = find_mu_r(&nl, eps, &grid).unwrap();
            for _ in 0..10_000 {
                let t: f64 = rng.random_range(0.0..1e3);
                assert!(mu_r_margin(&nl, mu, eps, t) >= -INEQUALITY_SLACK, "eps={eps} t={t}");
            }
        }
    }

    #[test]
    fn mu_r_preconditions() {
        let g = hybrid_grid(100.0, 100);
        assert_eq!(find_mu_r(&Nonlinearity::power(2.0).unwrap(), 1.0, &g), Err(Error::NotLogConvex));
        assert!(matches!(
            find_mu_r(&Nonlinearity::mems(2.0).unwrap(), 1.0, &g),
            Err(Error::WrongClass { .. })
        ));
    }

    #[test]
    fn k_for_exp_half() {
        let nl = Nonlinearity::exp();
        let k = find_k(&nl, 0.5, 3).unwrap();
        assert!((k - 2.25).abs() < 1e-6);
        let k1 = find_k(&nl, 0.5, 1).unwrap();
        assert!(k1.abs() < 1e-6);
        // minimality: the maximizer t = ln 1.5 breaks k - 1e-6
        let t = 1.5f64.ln();
        assert!(3.0 * nl.f(t) > nl.f(2.0 * t) + k - 1e-6);
        for n in 1..6 {
            assert!(find_k(&nl, 0.7, n).unwrap() >= n as f64 - 1.0);
        }
    }

    #[test]
    fn mu_s_for_mems() {
        let nl = Nonlinearity::mems(2.0).unwrap();
        let mu = find_mu_s(&nl, 1.0, &[]).unwrap();
        assert!(mu >= 1.5 / 2.0);
        for j in 0..512 {
            let t = mu * j as f64 / 512.0;
            assert!(mu_s_margin(&nl, mu, 1.0, t).unwrap() >= -INEQUALITY_SLACK);
        }
        assert!(matches!(mu_s_margin(&nl, 0.5, 1.0, 0.5), Err(Error::Singular(_))));
    }

    #[test]
    fn convexity_examples() {
        let g = hybrid_grid(20.0, 100);
        assert!(strict_convexity_check(&Nonlinearity::exp(), &g));
        assert!(strict_convexity_check(&quadratic(), &g));
        assert!(!strict_convexity_check(&affine(), &g));
    }

    #[test]
    fn common_parameters_for_pair() {
        let g = hybrid_grid(1e3, 2000);
        let (mu, k) = common_mu_k(&Nonlinearity::exp(), &Nonlinearity::exp(), 1.0, 3, &g).unwrap();
        assert!(mu < 1.0 && k >= 2.0);
    }
}
