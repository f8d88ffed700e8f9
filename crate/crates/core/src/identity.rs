//! Integral identities, functionals and inequality scans evaluated on
//! discrete solutions: the fourth-order Pohozaev identity, the functionals
//! `T` and `S`, the energy identities of the system difference pair, the
//! quadrant integrand scan, the calculus threshold and the ray energy bound.

use rayon::prelude::*;
use serde::Serialize;

use crate::branch::{minimal_solution, BranchPoint};
use crate::eigen::smallest_eigenpair;
use crate::error::{Error, Result};
use crate::grid::{radial_derivative, RadialField, RadialGrid};
use crate::nonlinearity::{ClassTag, Nonlinearity};
use crate::operators::{laplacian, neg_laplacian_rows};
use crate::problem::{Order, ProblemSpec};
use crate::system::{SystemPoint, SystemRay, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub relative: f64,
    pub grid_h: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// `lhs = rhs`
    Equality,
    /// `lhs <= rhs`
    Inequality,
}

/// Calibrated constant of `tol_identity(h) = C h^2`, applied relative to
/// `max(1, |lhs|, |rhs|)`.
pub const IDENTITY_C: f64 = 40.0;

pub fn tol_identity(h: f64, lhs: f64, rhs: f64) -> f64 {
    IDENTITY_C * h * h * lhs.abs().max(rhs.abs()).max(1.0)
}

fn report(name: &str, lhs: f64, rhs: f64, h: f64, kind: Kind) -> IdentityReport {
    let residual = lhs - rhs;
    let tol = tol_identity(h, lhs, rhs);
    let pass = match kind {
        Kind::Equality => residual.abs() <= tol,
        Kind::Inequality => residual <= tol,
    };
    IdentityReport {
        name: name.to_string(),
        lhs,
        rhs,
        residual,
        relative: residual.abs() / lhs.abs().max(rhs.abs()).max(1e-300),
        grid_h: h,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
    }
}

/// `Lap u` at every node; rows `0..=M` from the finite-volume stencil, the
/// boundary value from one-sided second-order `u''(1) + (N-1) u'(1)`.
pub fn laplacian_full(u: &RadialField) -> RadialField {
    let g = u.grid();
    let x = u.values();
    let h = g.h();
    let k = g.len() - 1;
    let mut out: Vec<f64> = neg_laplacian_rows(g, x).into_iter().map(|v| -v).collect();
    let d2 = (2.0 * x[k] - 5.0 * x[k - 1] + 4.0 * x[k - 2] - x[k - 3]) / (h * h);
    let d1 = (3.0 * x[k] - 4.0 * x[k - 1] + x[k - 2]) / (2.0 * h);
    out.push(d2 + (g.dim() as f64 - 1.0) * d1);
    RadialField::new(g.clone(), out).expect("length matches the grid")
}

/// `r u'(r)` at every node.
fn r_du(u: &RadialField) -> Vec<f64> {
    let g = u.grid();
    radial_derivative(u).values().iter().zip(g.nodes()).map(|(d, r)| r * d).collect()
}

fn dot_integral(g: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    g.integrate(&p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PohozaevReport {
    /// `int (-x.grad v) Lap^2 v = (N-4)/2 int (Lap v)^2 + boundary term`.
    pub equality: IdentityReport,
    /// `(N-4)/2 int (Lap v)^2 <= int (-x.grad v) lambda {f(u_l + v) - f(u_l)}`.
    pub inequality: IdentityReport,
}

/// Both sides of the fourth-order Pohozaev identity for `v` given nodal
/// values of `Lap^2 v`. The boundary term on the unit sphere is
/// `omega v'(1) w'(1)` with `w = -Lap v` (Navier, `w'(1)` from the flux) or `omega (Lap v(1))^2 / 2`
/// (clamped).
pub fn pohozaev_terms(order: Order, v: &RadialField, bilap_v: &[f64]) -> Result<IdentityReport> {
    let g = v.grid();
    let nf = g.dim() as f64;
    let lap = laplacian_full(v);
    let rv = r_du(v);
    let lhs = -dot_integral(g, &rv, bilap_v);
    let bulk = 0.5 * (nf - 4.0) * dot_integral(g, lap.values(), lap.values());
    let last = g.len() - 1;
    let boundary = match order {
        Order::FourthNavier => {
            // flux of w through the sphere: omega w'(1) = int Lap w = -int Lap^2 v
            let w_r = -g.integrate(bilap_v) / g.omega();
            g.omega() * radial_derivative(v).values()[last] * w_r
        }
        Order::FourthDirichlet => 0.5 * g.omega() * lap.values()[last].powi(2),
        Order::Second => return Err(Error::InvalidInput("Pohozaev identity here is fourth order".into())),
    };
    let name = match order {
        Order::FourthNavier => "pohozaev_navier",
        _ => "pohozaev_dirichlet",
    };
    Ok(report(name, lhs, bulk + boundary, g.h(), Kind::Equality))
}

/// Evaluates the identity and the inequality for `v = u - u_lambda`.
pub fn pohozaev_fourth(spec: &ProblemSpec, point: &BranchPoint, minimal: &BranchPoint) -> Result<PohozaevReport> {
    if spec.order() == Order::Second {
        return Err(Error::InvalidInput("needs a fourth-order problem".into()));
    }
    if point.lambda != minimal.lambda {
        return Err(Error::InvalidInput("points are at different lambda".into()));
    }
    if point.u.grid() != spec.grid() || minimal.u.grid() != spec.grid() {
        return Err(Error::InvalidInput("points live on a different grid".into()));
    }
    let g = spec.grid();
    let nl = spec.nl();
    let lambda = point.lambda;
    let v = point.u.sub(&minimal.u);
    let rhs: Vec<f64> =
        point.u.values().iter().zip(minimal.u.values()).map(|(&a, &b)| lambda * (nl.f(a) - nl.f(b))).collect();
    let equality = pohozaev_terms(spec.order(), &v, &rhs)?;
    let lap = laplacian_full(&v);
    let nf = g.dim() as f64;
    let lhs = 0.5 * (nf - 4.0) * dot_integral(g, lap.values(), lap.values());
    let rv = r_du(&v);
    let r = -dot_integral(g, &rv, &rhs);
    let inequality = report("pohozaev_inequality", lhs, r, g.h(), Kind::Inequality);
    Ok(PohozaevReport { equality, inequality })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub name: String,
    pub min_value: f64,
    /// Location of the minimum in the scan's two coordinates.
    pub argmin: (f64, f64),
    pub samples: (usize, usize),
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TScanReport {
    /// Minimum of `T(r, t)` over nodes and `t != 0`.
    pub t: ScanReport,
    pub s: ScanReport,
    /// `max |r u_lambda'|`.
    pub epsilon: f64,
    pub c_sigma: f64,
    pub sigma_conv: f64,
    /// Samples with `T < S` beyond rounding.
    pub domination_violations: usize,
    pub warnings: Vec<String>,
}

/// `(N-4)(1-sigma)/2` times the smallest eigenvalue of the fourth-order
/// operator: with it, `(N-4)/2 int (Lap v)^2 >= (N-4) sigma/2 int (Lap v)^2
/// + C int v^2`.
pub fn default_c_sigma(spec: &ProblemSpec, sigma_conv: f64) -> Result<f64> {
    let op = spec.operator();
    let l1 = smallest_eigenpair(op.band(), op.weights(), -1.0, 1e-10)?.value;
    Ok(0.5 * (spec.dim() as f64 - 4.0) * (1.0 - sigma_conv) * l1)
}

fn t_terms(nl: &Nonlinearity, u: f64, t: f64) -> (f64, f64, f64) {
    let fu = nl.f(u);
    let h = nl.f(u + t) - fu;
    let big_h = nl.antiderivative(u + t) - nl.antiderivative(u) - fu * t;
    let q = h - nl.fprime(u) * t;
    (h, big_h, q)
}

/// Scans `T(r, t)` and its lower bound `S(r, t)` over the nodes and an
/// even `t` grid on `t_range`.
pub fn t_scan(
    spec: &ProblemSpec,
    lambda: f64,
    minimal: &BranchPoint,
    sigma_conv: f64,
    c_sigma: Option<f64>,
    t_range: (f64, f64),
    t_samples: usize,
) -> Result<TScanReport> {
    if spec.order() == Order::Second {
        return Err(Error::InvalidInput("T scan needs a fourth-order problem".into()));
    }
    if !(sigma_conv > 0.0 && sigma_conv < 1.0) {
        return Err(Error::InvalidInput(format!("sigma must lie in (0, 1), got {sigma_conv}")));
    }
    if !(lambda > 0.0) || minimal.lambda != lambda {
        return Err(Error::InvalidInput("minimal point must be at the scanned lambda > 0".into()));
    }
    if t_samples < 2 || !(t_range.1 > t_range.0) {
        return Err(Error::InvalidInput("empty t range".into()));
    }
    let nl = spec.nl();
    let g = spec.grid();
    let c = match c_sigma {
        Some(c) => c,
        None => default_c_sigma(spec, sigma_conv)?,
    };
    let mut warnings = Vec::new();
    let (lo, mut hi) = t_range;
    if nl.class_tag() == ClassTag::S {
        let ceiling = 1.0 - minimal.u.max() - 1e-9;
        if hi > ceiling {
            warnings.push(format!("t range clipped from {hi} to {ceiling} below the singular value"));
            hi = ceiling;
        }
    }
    let u = minimal.u.values();
    let xu = r_du(&minimal.u);
    let eps = xu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nf = spec.dim() as f64;
    let ts: Vec<f64> = (0..t_samples).map(|k| lo + (hi - lo) * k as f64 / (t_samples - 1) as f64).collect();
    let zero_tol = 1e-12 * (hi - lo);
    // (min T, argmin, min S, argmin, violations) per t
    let per_t: Vec<(f64, (f64, f64), f64, (f64, f64), usize)> = ts
        .par_iter()
        .map(|&t| {
            let mut best = (f64::INFINITY, (0.0, t), f64::INFINITY, (0.0, t), 0usize);
            if t.abs() <= zero_tol {
                return best;
            }
            for (i, &ui) in u.iter().enumerate() {
                let (h, big_h, q) = t_terms(nl, ui, t);
                let common = 0.5 * (nf - 4.0) * sigma_conv * h * t + c / lambda * t * t - nf * big_h;
                let tv = common - xu[i] * q;
                let sv = common - eps * q;
                let r = g.r(i);
                if tv < best.0 {
                    best.0 = tv;
                    best.1 = (r, t);
                }
                if sv < best.2 {
                    best.2 = sv;
                    best.3 = (r, t);
                }
                if tv < sv - 1e-12 * tv.abs().max(sv.abs()).max(1.0) {
                    best.4 += 1;
                }
            }
            best
        })
        .collect();
    let mut t_min = (f64::INFINITY, (0.0, 0.0));
    let mut s_min = (f64::INFINITY, (0.0, 0.0));
    let mut viol = 0;
    for b in per_t {
        if b.0 < t_min.0 {
            t_min = (b.0, b.1);
        }
        if b.2 < s_min.0 {
            s_min = (b.2, b.3);
        }
        viol += b.4;
    }
    let mk = |name: &str, m: (f64, (f64, f64))| ScanReport {
        name: name.to_string(),
        min_value: m.0,
        argmin: m.1,
        samples: (g.len(), t_samples),
        x_range: (0.0, 1.0),
        y_range: (lo, hi),
    };
    Ok(TScanReport {
        t: mk("T", t_min),
        s: mk("S", s_min),
        epsilon: eps,
        c_sigma: c,
        sigma_conv,
        domination_violations: viol,
        warnings,
    })
}

/// Largest `lambda` in `(0, lambda_hi)`, to relative width `2^-iters`,
/// at which the `T` scan minimum is positive, assuming positivity holds
/// below it. `None` when even `lambda_hi 2^-iters` fails.
pub fn t_scan_threshold(
    spec: &ProblemSpec,
    sigma_conv: f64,
    t_range: (f64, f64),
    t_samples: usize,
    lambda_hi: f64,
    iters: usize,
) -> Result<Option<f64>> {
    let c = default_c_sigma(spec, sigma_conv)?;
    let positive = |l: f64| -> Result<bool> {
        let Some(m) = minimal_solution(spec, l, 1_000_000, 1e-13)?.converged() else { return Ok(false) };
        Ok(t_scan(spec, l, &m, sigma_conv, Some(c), t_range, t_samples)?.t.min_value > 0.0)
    };
    if positive(lambda_hi)? {
        return Ok(Some(lambda_hi));
    }
    let (mut lo, mut hi) = (0.0, lambda_hi);
    let mut found = false;
    for _ in 0..iters {
        let mid = if found { 0.5 * (lo + hi) } else { 0.5 * hi };
        if positive(mid)? {
            lo = mid;
            found = true;
        } else {
            hi = mid;
        }
    }
    Ok(found.then_some(lo))
}

/// The integrand of the quadrant inequality at `(u_o, v_o)`.
pub fn nine_integrand(c: f64, lambda: f64, sigma: f64, uo: f64, vo: f64) -> f64 {
    let part = |t: f64| t * t / lambda + t.exp_m1() * t - c * (t.exp_m1() - t);
    sigma * part(uo) + part(vo)
}

/// Minimum of the quadrant integrand over `[0, u_max]^2` without the origin.
pub fn nine_scan(c: f64, lambda: f64, sigma: f64, u_max: f64, samples: usize) -> Result<ScanReport> {
    if !(c > 0.0) || !(lambda > 0.0) || !(sigma > 0.0 && sigma <= 1.0) || samples < 2 || !(u_max > 0.0) {
        return Err(Error::InvalidInput("nine scan needs C, lambda > 0, sigma in (0, 1], a nonempty grid".into()));
    }
    let step = u_max / (samples - 1) as f64;
    let best = (0..samples)
        .into_par_iter()
        .map(|i| {
            let a = i as f64 * step;
            let mut best = (f64::INFINITY, (0.0, 0.0));
            for j in 0..samples {
                if i == 0 && j == 0 {
                    continue;
                }
                let b = j as f64 * step;
                let v = nine_integrand(c, lambda, sigma, a, b);
                if v < best.0 {
                    best = (v, (a, b));
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, (0.0, 0.0)), |x, y| if y.0 < x.0 { y } else { x });
    Ok(ScanReport {
        name: "nine".into(),
        min_value: best.0,
        argmin: best.1,
        samples: (samples, samples),
        x_range: (0.0, u_max),
        y_range: (0.0, u_max),
    })
}

/// Bisects the `lambda` edge below which the quadrant integrand is
/// positive, starting from the bracket `(lo, hi)`.
pub fn nine_threshold(c: f64, sigma: f64, u_max: f64, samples: usize, lo: f64, hi: f64, iters: usize) -> Result<f64> {
    let positive = |l: f64| -> Result<bool> { Ok(nine_scan(c, l, sigma, u_max, samples)?.min_value > 0.0) };
    if !positive(lo)? || positive(hi)? {
        return Err(Error::InvalidInput(format!("({lo}, {hi}) does not bracket the positivity edge")));
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..iters {
        let mid = (lo * hi).sqrt();
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Default quadrant constant `2N / min(sigma lambda_1, lambda_1)`.
pub fn default_nine_c(dim: usize, sigma: f64, lambda1: f64) -> f64 {
    2.0 * dim as f64 / (sigma * lambda1).min(lambda1)
}

/// Largest `t0` on `[0, t_max]` (`n_t` points) with
/// `min_sigma (e^(sigma t) - sigma e^t) >= 0` for every grid `t <= t0`,
/// `sigma` over `n_sigma` interior points of `(0, 1)`.
pub fn cal_threshold_with(t_max: f64, n_t: usize, n_sigma: usize) -> f64 {
    let sigmas: Vec<f64> = (1..=n_sigma).map(|j| j as f64 / (n_sigma + 1) as f64).collect();
    let mut t0 = 0.0;
    for k in 0..n_t {
        let t = t_max * k as f64 / (n_t - 1) as f64;
        let ok = sigmas.iter().all(|&s| (s * t).exp() - s * t.exp() >= 0.0);
        if !ok {
            break;
        }
        t0 = t;
    }
    t0
}

pub fn cal_threshold() -> f64 {
    cal_threshold_with(2.0, 2001, 2000)
}

/// Energy identities and inequalities for a second solution against the
/// minimal pair at the same parameters.
pub fn system_energy(spec: &SystemSpec, second: &SystemPoint, minimal: &SystemPoint) -> Result<Vec<IdentityReport>> {
    if !spec.is_exp_exp() {
        return Err(Error::InvalidInput("energy identities need f = g = exp".into()));
    }
    if second.lambda != minimal.lambda || second.gamma != minimal.gamma || !(second.lambda > 0.0) {
        return Err(Error::InvalidInput("pairs must share lambda > 0 and gamma".into()));
    }
    let g = spec.grid();
    let lambda = second.lambda;
    let sigma = second.gamma / lambda;
    let nf = g.dim() as f64;
    let h = g.h();
    let uo = second.u.sub(&minimal.u);
    let vo = second.v.sub(&minimal.v);
    let (um, vm) = (minimal.u.values(), minimal.v.values());
    let (xu, xv) = (r_du(&minimal.u), r_du(&minimal.v));
    let int = |f: &dyn Fn(usize) -> f64| g.integrate(&(0..g.len()).map(f).collect::<Vec<_>>());
    let quad = |t: f64| t.exp_m1() - t;

    let lap_u = laplacian_full(&uo);
    let lap_v = laplacian_full(&vo);
    let (xuo, xvo) = (r_du(&uo), r_du(&vo));
    let first_l = dot_integral(g, lap_u.values(), &xvo);
    let first_r = lambda * nf * int(&|i| vm[i].exp() * quad(vo.values()[i]))
        + lambda * int(&|i| vm[i].exp() * xv[i] * quad(vo.values()[i]));
    let second_l = dot_integral(g, lap_v.values(), &xuo);
    let second_r = lambda * nf * sigma * int(&|i| um[i].exp() * quad(uo.values()[i]))
        + lambda * sigma * int(&|i| um[i].exp() * xu[i] * quad(uo.values()[i]));
    let three = three_identity(&uo, &vo);
    let grad = g.gradient_inner(uo.values(), vo.values());
    let seven_l = lambda * int(&|i| vm[i].exp() * vo.values()[i].exp_m1() * vo.values()[i]);
    let seven_r = lambda * sigma * int(&|i| um[i].exp() * uo.values()[i].exp_m1() * uo.values()[i]);
    let l1 = {
        let a = laplacian(g);
        smallest_eigenpair(a.band(), a.weights(), -1.0, 1e-10)?.value
    };
    let uo2 = dot_integral(g, uo.values(), uo.values());
    let vo2 = dot_integral(g, vo.values(), vo.values());
    Ok(vec![
        report("first", first_l, first_r, h, Kind::Equality),
        report("second", second_l, second_r, h, Kind::Equality),
        three,
        report("four", (nf - 2.0) * grad, first_r + second_r, h, Kind::Inequality),
        report("five", sigma * l1 * uo2, grad, h, Kind::Inequality),
        report("six", l1 * vo2, grad, h, Kind::Inequality),
        report("seven_left", seven_l, grad, h, Kind::Equality),
        report("seven_right", grad, seven_r, h, Kind::Equality),
    ])
}

/// `int Lap u (x.grad v) + Lap v (x.grad u) = (N-2) int grad u.grad v
/// + int_boundary u_r v_r` for fields vanishing at `r = 1`.
pub fn three_identity(u: &RadialField, v: &RadialField) -> IdentityReport {
    let g = u.grid();
    let nf = g.dim() as f64;
    let (lu, lv) = (laplacian_full(u), laplacian_full(v));
    let lhs = dot_integral(g, lu.values(), &r_du(v)) + dot_integral(g, lv.values(), &r_du(u));
    let last = g.len() - 1;
    let boundary = g.omega() * radial_derivative(u).values()[last] * radial_derivative(v).values()[last];
    let rhs = (nf - 2.0) * g.gradient_inner(u.values(), v.values()) + boundary;
    report("three", lhs, rhs, g.h(), Kind::Equality)
}

/// `int (-Lap u) v = int grad u.grad v` for `v` vanishing at `r = 1`, with
/// `-Lap u` supplied at the nodes.
pub fn seven_identity(neg_lap_u: &[f64], u: &RadialField, v: &RadialField) -> IdentityReport {
    let g = u.grid();
    let lhs = dot_integral(g, neg_lap_u, v.values());
    let rhs = g.gradient_inner(u.values(), v.values());
    report("seven", lhs, rhs, g.h(), Kind::Equality)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyPoint {
    pub lambda: f64,
    pub gamma: f64,
    /// `int f(v) v`.
    pub f_v_v: f64,
    /// `int g(u) u`.
    pub g_u_u: f64,
    /// `int lambda (N-2)/2 f(v) v + gamma (N-2)/2 g(u) u`.
    pub lhs: f64,
    /// `int lambda N F(v) + gamma N G(u)`.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBoundReport {
    pub points: Vec<EnergyPoint>,
    pub all_hold: bool,
    /// `int f(v) v` nondecreasing up to the fold.
    pub increasing: bool,
    /// Finite, and no value exceeds the one at the fold.
    pub bounded: bool,
    pub fold_value: Option<f64>,
}

/// Evaluates the ray energy inequality at every point up to the fold.
pub fn extremal_energy_bound(spec: &SystemSpec, ray: &SystemRay) -> Result<EnergyBoundReport> {
    let g = spec.grid();
    if g.dim() < 3 {
        return Err(Error::InvalidInput("the energy bound needs N >= 3".into()));
    }
    let nf = g.dim() as f64;
    let (f, gg) = (spec.nl_f(), spec.nl_g());
    let points: Vec<EnergyPoint> = ray
        .pre_fold()
        .iter()
        .map(|p| {
            let (u, v) = (p.u.values(), p.v.values());
            let fvv = g.integrate(&v.iter().map(|&t| f.f(t) * t).collect::<Vec<_>>());
            let guu = g.integrate(&u.iter().map(|&t| gg.f(t) * t).collect::<Vec<_>>());
            let fv = g.integrate(&v.iter().map(|&t| f.antiderivative(t)).collect::<Vec<_>>());
            let gu = g.integrate(&u.iter().map(|&t| gg.antiderivative(t)).collect::<Vec<_>>());
            let lhs = 0.5 * (nf - 2.0) * (p.lambda * fvv + p.gamma * guu);
            let rhs = nf * (p.lambda * fv + p.gamma * gu);
            EnergyPoint { lambda: p.lambda, gamma: p.gamma, f_v_v: fvv, g_u_u: guu, lhs, rhs, holds: lhs <= rhs }
        })
        .collect();
    let all_hold = points.iter().all(|p| p.holds);
    let increasing = points.windows(2).all(|w| w[1].f_v_v >= w[0].f_v_v - 1e-12 * w[0].f_v_v.abs());
    let fold_value = ray.fold.map(|_| points.last().map(|p| p.f_v_v).unwrap_or(0.0));
    let bounded = points.iter().all(|p| p.f_v_v.is_finite())
        && fold_value.is_none_or(|fv| points.iter().all(|p| p.f_v_v <= fv * (1.0 + 1e-12)));
    Ok(EnergyBoundReport { points, all_hold, increasing, bounded, fold_value })
}
