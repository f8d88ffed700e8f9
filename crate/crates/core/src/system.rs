//! The coupled system `-Lap u = lambda f(v)`, `-Lap v = gamma g(u)` with
//! `u = v = 0` on the boundary: minimal pairs, rays `gamma = sigma lambda`,
//! the critical curve and the pointwise orderings of second solutions.

use rayon::prelude::*;
use serde::Serialize;

use crate::banded::BandMatrix;
use crate::branch::{DivergenceReason, DivergenceReport, FoldEstimate};
use crate::continuation::{continuation, ContinuationOptions, ContinuationRun, Termination};
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::newton::{newton, NewtonOptions};
use crate::nonlinearity::{ClassTag, Kind, Nonlinearity};
use crate::operators::{laplacian, OperatorMatrix};
use crate::problem::{check_lambda, DiscreteProblem};

#[derive(Debug, Clone)]
pub struct SystemSpec {
    nl_f: Nonlinearity,
    nl_g: Nonlinearity,
    grid: RadialGrid,
    op: OperatorMatrix,
}

fn cap_of(nl: &Nonlinearity) -> f64 {
    match nl.class_tag() {
        ClassTag::R => 1e6,
        ClassTag::S => 1.0 - 1e-9,
    }
}

impl SystemSpec {
    pub fn new(nl_f: Nonlinearity, nl_g: Nonlinearity, grid: RadialGrid) -> Self {
        let op = laplacian(&grid);
        Self { nl_f, nl_g, grid, op }
    }

    pub fn nl_f(&self) -> &Nonlinearity {
        &self.nl_f
    }

    pub fn nl_g(&self) -> &Nonlinearity {
        &self.nl_g
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn operator(&self) -> &OperatorMatrix {
        &self.op
    }

    pub fn with_grid(&self, grid: RadialGrid) -> Self {
        Self::new(self.nl_f.clone(), self.nl_g.clone(), grid)
    }

    /// Both nonlinearities are the exponential.
    pub fn is_exp_exp(&self) -> bool {
        matches!(self.nl_f.kind(), Kind::Exp) && matches!(self.nl_g.kind(), Kind::Exp)
    }

    /// The problem along the ray `gamma = sigma lambda`, parametrized by
    /// `lambda`.
    pub fn ray(&self, sigma: f64) -> Result<SystemProblem> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!("ray slope must be positive, got {sigma}")));
        }
        let w = self.op.weights();
        let weights = w.iter().flat_map(|&x| [x, x]).collect();
        Ok(SystemProblem { spec: self.clone(), sigma, weights })
    }
}

/// Unknowns are interleaved, `x[2i] = u_i`, `x[2i+1] = v_i`.
#[derive(Debug, Clone)]
pub struct SystemProblem {
    spec: SystemSpec,
    sigma: f64,
    weights: Vec<f64>,
}

pub fn interleave(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).flat_map(|(&a, &b)| [a, b]).collect()
}

pub fn deinterleave(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (x.iter().step_by(2).copied().collect(), x.iter().skip(1).step_by(2).copied().collect())
}

fn max_jump_of(x: &[f64]) -> f64 {
    let mut m = x[x.len() - 1].abs();
    for w in x.windows(2) {
        m = m.max((w[1] - w[0]).abs());
    }
    m
}

impl SystemProblem {
    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn point(&self, x: &[f64], lambda: f64) -> SystemPoint {
        let (u, v) = deinterleave(x);
        let g = self.spec.grid();
        SystemPoint {
            lambda,
            gamma: self.sigma * lambda,
            sigma: self.sigma,
            u: RadialField::from_interior(g, &u),
            v: RadialField::from_interior(g, &v),
            converged: true,
            arclength: 0.0,
            newton_iters: 0,
            residual: self.scaled_residual_norm(&self.residual(x, lambda)),
        }
    }
}

impl DiscreteProblem for SystemProblem {
    fn size(&self) -> usize {
        2 * self.spec.grid.unknowns()
    }

    fn residual(&self, x: &[f64], lambda: f64) -> Vec<f64> {
        let (u, v) = deinterleave(x);
        let au = self.spec.op.apply(&u);
        let av = self.spec.op.apply(&v);
        let gamma = self.sigma * lambda;
        let mut r = Vec::with_capacity(x.len());
        for i in 0..u.len() {
            r.push(au[i] - lambda * self.spec.nl_f.f(v[i]));
            r.push(av[i] - gamma * self.spec.nl_g.f(u[i]));
        }
        r
    }

    fn d_lambda(&self, x: &[f64], _lambda: f64) -> Vec<f64> {
        let mut d = Vec::with_capacity(x.len());
        for pair in x.chunks(2) {
            d.push(-self.spec.nl_f.f(pair[1]));
            d.push(-self.sigma * self.spec.nl_g.f(pair[0]));
        }
        d
    }

    fn jacobian(&self, x: &[f64], lambda: f64) -> BandMatrix {
        let n = self.spec.grid.unknowns();
        let a = self.spec.op.band();
        let mut j = BandMatrix::zeros(2 * n, 2, 2);
        for i in 0..n {
            for k in i.saturating_sub(1)..(i + 2).min(n) {
                let v = a.get(i, k);
                j.set(2 * i, 2 * k, v);
                j.set(2 * i + 1, 2 * k + 1, v);
            }
            j.set(2 * i, 2 * i + 1, -lambda * self.spec.nl_f.fprime(x[2 * i + 1]));
            j.set(2 * i + 1, 2 * i, -self.sigma * lambda * self.spec.nl_g.fprime(x[2 * i]));
        }
        j
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn admissible(&self, x: &[f64]) -> bool {
        x.chunks(2).all(|p| self.spec.nl_g.in_domain(p[0]) && self.spec.nl_f.in_domain(p[1]))
    }

    fn residual_scale(&self) -> f64 {
        self.spec.grid.h().powi(2)
    }

    fn sup(&self, x: &[f64]) -> f64 {
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn max_jump(&self, x: &[f64]) -> f64 {
        let (u, v) = deinterleave(x);
        max_jump_of(&u).max(max_jump_of(&v))
    }

    fn spectrum_lower_bound(&self, x: &[f64], lambda: f64) -> f64 {
        let m = x.chunks(2).fold(0.0f64, |m, p| {
            m.max(self.spec.nl_f.fprime(p[1])).max(self.sigma * self.spec.nl_g.fprime(p[0]))
        });
        -lambda * m - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemPoint {
    pub lambda: f64,
    pub gamma: f64,
    /// `gamma / lambda`; NaN at `lambda = 0`.
    pub sigma: f64,
    pub u: RadialField,
    pub v: RadialField,
    pub converged: bool,
    pub arclength: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

impl SystemPoint {
    pub fn interleaved(&self) -> Vec<f64> {
        interleave(self.u.interior(), self.v.interior())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SystemOutcome {
    Converged(SystemPoint),
    Diverged(DivergenceReport),
}

impl SystemOutcome {
    pub fn converged(self) -> Option<SystemPoint> {
        match self {
            SystemOutcome::Converged(p) => Some(p),
            SystemOutcome::Diverged(_) => None,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, SystemOutcome::Converged(_))
    }
}

/// Coupled monotone iteration from `(0, 0)`:
/// `u_(k+1) = L^-1 (lambda f(v_k))`, `v_(k+1) = L^-1 (gamma g(u_k))`.
pub fn system_minimal(spec: &SystemSpec, lambda: f64, gamma: f64, max_iters: usize, tol: f64) -> Result<SystemOutcome> {
    check_lambda(lambda)?;
    check_lambda(gamma)?;
    let lu = spec.op.factor()?;
    let n = spec.grid.unknowns();
    let (cap_f, cap_g) = (cap_of(&spec.nl_f), cap_of(&spec.nl_g));
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let sup = |x: &[f64]| x.iter().copied().fold(0.0f64, f64::max);
    let mut converged = false;
    let mut iters = 0;
    for k in 1..=max_iters {
        iters = k;
        let ru: Vec<f64> = v.iter().map(|&t| lambda * spec.nl_f.f(t)).collect();
        let rv: Vec<f64> = u.iter().map(|&t| gamma * spec.nl_g.f(t)).collect();
        let nu = lu.solve(&ru);
        let nv = lu.solve(&rv);
        let (su, sv) = (sup(&nu), sup(&nv));
        let over_g = !su.is_finite() || su > cap_g;
        let over_f = !sv.is_finite() || sv > cap_f;
        if over_f || over_g {
            let class = if over_f { spec.nl_f.class_tag() } else { spec.nl_g.class_tag() };
            let reason = match class {
                ClassTag::R => DivergenceReason::BlowUp,
                ClassTag::S => DivergenceReason::Ceiling,
            };
            return Ok(SystemOutcome::Diverged(DivergenceReport { lambda, iters: k, last_sup: su.max(sv), reason }));
        }
        let mut inc = 0.0f64;
        for (a, b) in nu.iter().zip(&u).chain(nv.iter().zip(&v)) {
            if *a < *b - 1e-12 * (1.0 + b.abs()) {
                return Err(Error::Consistency(format!("coupled monotone iteration decreased at step {k}")));
            }
            inc = inc.max(a - b);
        }
        u = nu;
        v = nv;
        if inc <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Ok(SystemOutcome::Diverged(DivergenceReport {
            lambda,
            iters,
            last_sup: sup(&u).max(sup(&v)),
            reason: DivergenceReason::Budget,
        }));
    }
    let (sigma, mut x) = (if lambda > 0.0 { gamma / lambda } else { f64::NAN }, interleave(&u, &v));
    let mut newton_iters = 0;
    if lambda > 0.0 && gamma > 0.0 {
        let p = spec.ray(sigma)?;
        if let Ok(rep) = newton(&p, x.clone(), lambda, &NewtonOptions::default()) {
            if p.admissible(&rep.x) {
                x = rep.x;
                newton_iters = rep.iters;
            }
        }
    }
    let (u, v) = deinterleave(&x);
    let au = spec.op.apply(&u);
    let av = spec.op.apply(&v);
    let res = (0..n)
        .map(|i| (au[i] - lambda * spec.nl_f.f(v[i])).abs().max((av[i] - gamma * spec.nl_g.f(u[i])).abs()))
        .fold(0.0, f64::max)
        * spec.grid.h().powi(2);
    Ok(SystemOutcome::Converged(SystemPoint {
        lambda,
        gamma,
        sigma,
        u: RadialField::from_interior(&spec.grid, &u),
        v: RadialField::from_interior(&spec.grid, &v),
        converged: true,
        arclength: 0.0,
        newton_iters,
        residual: res,
    }))
}

/// One continued ray `gamma = sigma lambda`.
#[derive(Debug, Clone, Serialize)]
pub struct SystemRay {
    pub sigma: f64,
    pub points: Vec<SystemPoint>,
    pub fold: Option<FoldEstimate>,
    pub turning_points: Vec<FoldEstimate>,
    pub termination: Termination,
}

impl SystemRay {
    pub fn lambda_star(&self) -> Option<f64> {
        self.fold.map(|f| f.lambda_star)
    }

    pub fn pre_fold(&self) -> &[SystemPoint] {
        match self.fold {
            Some(f) => &self.points[..=f.index],
            None => &self.points,
        }
    }

    /// Points strictly between the first and second turning points: the
    /// second solutions paired with the minimal ones.
    pub fn upper_segment(&self) -> &[SystemPoint] {
        match self.turning_points.as_slice() {
            [] => &[],
            [a] => &self.points[a.index + 1..],
            [a, b, ..] => &self.points[a.index + 1..b.index],
        }
    }
}

/// Start of a ray: small enough for the coupled iteration to converge fast.
pub fn ray_start(sigma: f64) -> f64 {
    0.1 / sigma.max(1.0)
}

/// Traces the ray from `ray_start(sigma)`; `ds <= 0` selects a quarter of
/// the start value.
pub fn trace_ray(spec: &SystemSpec, sigma: f64, ds: f64, n_steps: usize) -> Result<SystemRay> {
    let l0 = ray_start(sigma);
    let opts = ContinuationOptions::new(if ds > 0.0 { ds } else { l0 / 4.0 }, n_steps);
    trace_ray_with(spec, sigma, l0, &opts)
}

pub fn trace_ray_with(spec: &SystemSpec, sigma: f64, lambda_init: f64, opts: &ContinuationOptions) -> Result<SystemRay> {
    let p = spec.ray(sigma)?;
    if !(lambda_init > 0.0) {
        return Err(Error::InvalidInput("ray start must be positive".into()));
    }
    let start = match system_minimal(spec, lambda_init, sigma * lambda_init, 100_000, 1e-13)? {
        SystemOutcome::Converged(pt) => pt,
        SystemOutcome::Diverged(d) => {
            return Err(Error::InvalidInput(format!(
                "no minimal pair at lambda_init = {lambda_init} ({:?})",
                d.reason
            )))
        }
    };
    let mut opts = *opts;
    opts.sup_cap = opts.sup_cap.min(cap_of(&spec.nl_f)).min(cap_of(&spec.nl_g));
    let run = continuation(&p, start.interleaved(), lambda_init, &opts)?;
    Ok(ray_from_run(&p, run))
}

fn ray_from_run(p: &SystemProblem, run: ContinuationRun) -> SystemRay {
    let points = run
        .points
        .iter()
        .map(|cp| {
            let mut pt = p.point(&cp.x, cp.lambda);
            pt.arclength = cp.arclength;
            pt.newton_iters = cp.newton_iters;
            pt.residual = cp.residual;
            pt
        })
        .collect();
    let turning_points: Vec<FoldEstimate> =
        run.folds.iter().map(|&i| FoldEstimate { lambda_star: run.points[i].lambda, index: i }).collect();
    SystemRay {
        sigma: p.sigma,
        points,
        fold: turning_points.first().copied(),
        turning_points,
        termination: run.termination,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpsilonPoint {
    pub sigma: f64,
    pub lambda_star: f64,
    pub gamma_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayFailure {
    pub sigma: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationProbe {
    pub lambda: f64,
    pub gamma: f64,
    /// Below the curve (scaled by less than one).
    pub inside: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpsilonCurve {
    pub points: Vec<UpsilonPoint>,
    pub failures: Vec<RayFailure>,
    pub probes: Vec<SeparationProbe>,
    /// Every inside probe converged and every outside probe diverged.
    pub separates: bool,
}

/// Scale factors of the separation probes around each curve point.
pub const PROBE_SCALES: [f64; 4] = [0.9, 0.97, 1.03, 1.1];

/// Traces one ray per slope (concurrently), then probes the coupled
/// iteration just inside and outside each curve point.
pub fn upsilon_curve(spec: &SystemSpec, sigma_grid: &[f64], ds: f64, n_steps: usize) -> UpsilonCurve {
    let rays: Vec<(f64, Result<SystemRay>)> =
        sigma_grid.par_iter().map(|&s| (s, trace_ray(spec, s, ds, n_steps))).collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (sigma, r) in rays {
        match r {
            Ok(ray) => match ray.lambda_star() {
                Some(ls) => points.push(UpsilonPoint { sigma, lambda_star: ls, gamma_star: sigma * ls }),
                None => failures.push(RayFailure { sigma, message: format!("no fold ({:?})", ray.termination) }),
            },
            Err(e) => failures.push(RayFailure { sigma, message: e.to_string() }),
        }
    }
    let lattice: Vec<(f64, f64, bool)> = points
        .iter()
        .flat_map(|p| PROBE_SCALES.iter().map(move |&s| (s * p.lambda_star, s * p.gamma_star, s < 1.0)))
        .collect();
    let probes: Vec<SeparationProbe> = lattice
        .par_iter()
        .map(|&(lambda, gamma, inside)| {
            let converged = system_minimal(spec, lambda, gamma, 1_000_000, 1e-10)
                .map(|o| o.is_converged())
                .unwrap_or(false);
            SeparationProbe { lambda, gamma, inside, converged }
        })
        .collect();
    let separates = probes.iter().all(|p| p.inside == p.converged);
    UpsilonCurve { points, failures, probes, separates }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingReport {
    /// i) `v <= u`, ii) `sigma u <= v`, iii) `sigma u_o <= v_o`,
    /// iv) `v_o <= u_o`.
    pub holds: [bool; 4],
    /// Largest nodal excess of the left side over the right, per inequality.
    pub max_violation: [f64; 4],
    pub tol: f64,
}

pub const ORDERING_TOL: f64 = 1e-8;

fn check_pair(spec: &SystemSpec, second: &SystemPoint, minimal: &SystemPoint) -> Result<f64> {
    if !spec.is_exp_exp() {
        return Err(Error::InvalidInput("orderings need f = g = exp".into()));
    }
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if !same(second.lambda, minimal.lambda) || !same(second.gamma, minimal.gamma) {
        return Err(Error::InvalidInput("the two pairs are at different parameters".into()));
    }
    if second.u.grid() != spec.grid() || minimal.u.grid() != spec.grid() {
        return Err(Error::InvalidInput("pair lives on a different grid".into()));
    }
    let sigma = second.gamma / second.lambda;
    if !(sigma > 0.0 && sigma <= 1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("orderings need 0 < sigma <= 1, got {sigma}")));
    }
    Ok(sigma)
}

/// Checks the four nodal inequalities for `u_o = u - u_min`,
/// `v_o = v - v_min`.
pub fn pointwise_orderings(spec: &SystemSpec, second: &SystemPoint, minimal: &SystemPoint) -> Result<OrderingReport> {
    let sigma = check_pair(spec, second, minimal)?;
    let (u, v) = (second.u.values(), second.v.values());
    let (um, vm) = (minimal.u.values(), minimal.v.values());
    let mut viol = [f64::NEG_INFINITY; 4];
    for i in 0..u.len() {
        let (uo, vo) = (u[i] - um[i], v[i] - vm[i]);
        let e = [v[i] - u[i], sigma * u[i] - v[i], sigma * uo - vo, vo - uo];
        for k in 0..4 {
            viol[k] = viol[k].max(e[k]);
        }
    }
    let holds = viol.map(|x| x <= ORDERING_TOL);
    Ok(OrderingReport { holds, max_violation: viol, tol: ORDERING_TOL })
}

/// Residuals of `-Lap u_o = lambda e^(v_min) (e^(v_o) - 1)` and
/// `-Lap v_o = sigma lambda e^(u_min) (e^(u_o) - 1)` on the unknowns.
pub fn difference_residual_fields(
    lambda: f64,
    sigma: f64,
    u_min: &RadialField,
    v_min: &RadialField,
    u_o: &RadialField,
    v_o: &RadialField,
) -> (Vec<f64>, Vec<f64>) {
    let g = u_min.grid();
    let a = laplacian(g);
    let au = a.apply(u_o.interior());
    let av = a.apply(v_o.interior());
    let (um, vm, uo, vo) = (u_min.values(), v_min.values(), u_o.values(), v_o.values());
    let ru = (0..au.len()).map(|i| au[i] - lambda * vm[i].exp() * vo[i].exp_m1()).collect();
    let rv = (0..av.len()).map(|i| av[i] - sigma * lambda * um[i].exp() * uo[i].exp_m1()).collect();
    (ru, rv)
}

pub fn difference_residual(
    spec: &SystemSpec,
    second: &SystemPoint,
    minimal: &SystemPoint,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sigma = check_pair(spec, second, minimal)?;
    let uo = second.u.sub(&minimal.u);
    let vo = second.v.sub(&minimal.v);
    Ok(difference_residual_fields(second.lambda, sigma, &minimal.u, &minimal.v, &uo, &vo))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderedPair {
    pub lambda: f64,
    pub report: OrderingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvThreshold {
    /// iv) holds on every checked pair with `lambda` below this value.
    pub threshold: Option<f64>,
    pub pairs: Vec<OrderedPair>,
}

fn pair_at(spec: &SystemSpec, second: &SystemPoint) -> Result<OrderedPair> {
    let minimal = system_minimal(spec, second.lambda, second.gamma, 1_000_000, 1e-13)?
        .converged()
        .ok_or_else(|| Error::Unavailable(format!("minimal pair at lambda = {}", second.lambda)))?;
    Ok(OrderedPair { lambda: second.lambda, report: pointwise_orderings(spec, second, &minimal)? })
}

/// Checks the orderings on every upper-segment point of `ray` and bisects
/// the `lambda` edge below which iv) holds, solving for second solutions
/// between neighbouring upper points.
pub fn iv_threshold(spec: &SystemSpec, ray: &SystemRay, bisections: usize) -> Result<IvThreshold> {
    let p = spec.ray(ray.sigma)?;
    let mut upper: Vec<&SystemPoint> = ray.upper_segment().iter().collect();
    upper.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut pairs = Vec::with_capacity(upper.len());
    for s in &upper {
        pairs.push(pair_at(spec, s)?);
    }
    let first_fail = pairs.iter().position(|q| !q.report.holds[3]);
    let threshold = match first_fail {
        None => upper.last().map(|s| s.lambda),
        Some(0) => None,
        Some(k) => {
            let (mut lo, mut hi) = (upper[k - 1].clone(), upper[k].clone());
            for _ in 0..bisections {
                let l = 0.5 * (lo.lambda + hi.lambda);
                let w = (l - lo.lambda) / (hi.lambda - lo.lambda);
                let guess: Vec<f64> =
                    lo.interleaved().iter().zip(hi.interleaved()).map(|(a, b)| a + w * (b - a)).collect();
                let Ok(rep) = newton(&p, guess, l, &NewtonOptions::default()) else { break };
                let mid = p.point(&rep.x, l);
                let q = pair_at(spec, &mid)?;
                let ok = q.report.holds[3];
                pairs.push(q);
                if ok {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * (lo.lambda + hi.lambda))
        }
    };
    pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(IvThreshold { threshold, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::minimal_solution;
    use crate::problem::{Order, ProblemSpec};

    fn exp_exp(n: usize, m: usize) -> SystemSpec {
        SystemSpec::new(Nonlinearity::exp(), Nonlinearity::exp(), RadialGrid::new(n, m).unwrap())
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let spec = exp_exp(3, 20);
        let p = spec.ray(0.5).unwrap();
        let n = p.size();
        let x: Vec<f64> = (0..n).map(|i| 0.3 + 0.01 * (i as f64).sin()).collect();
        let j = p.jacobian(&x, 1.3).to_dense();
        let eps = 1e-6;
        for c in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += eps;
            xm[c] -= eps;
            let (rp, rm) = (p.residual(&xp, 1.3), p.residual(&xm, 1.3));
            for r in 0..n {
                let fd = (rp[r] - rm[r]) / (2.0 * eps);
                assert!((fd - j[r][c]).abs() < 1e-4 * (1.0 + fd.abs()), "{r} {c}");
            }
        }
    }

    #[test]
    fn symmetric_parameters_reduce_to_scalar() {
        let spec = exp_exp(2, 64);
        let p = system_minimal(&spec, 1.0, 1.0, 100_000, 1e-13).unwrap().converged().unwrap();
        assert!(p.u.sub(&p.v).sup_abs() <= 1e-10);
        let scalar = ProblemSpec::new(Order::Second, Nonlinearity::exp(), RadialGrid::new(2, 64).unwrap()).unwrap();
        let q = minimal_solution(&scalar, 1.0, 100_000, 1e-13).unwrap().converged().unwrap();
        assert!(p.u.sub(&q.u).sup_abs() < 1e-9);
        let z = system_minimal(&spec, 0.0, 0.0, 10, 1e-13).unwrap().converged().unwrap();
        assert_eq!(z.u.sup_abs() + z.v.sup_abs(), 0.0);
    }

    #[test]
    fn small_parameters_give_small_pairs() {
        let spec = exp_exp(3, 64);
        let mut prev = f64::INFINITY;
        for l in [1e-1, 1e-2, 1e-3] {
            let mut worst = 0.0f64;
            for s in [0.1, 0.5, 0.9] {
                let p = system_minimal(&spec, l, s * l, 100_000, 1e-14).unwrap().converged().unwrap();
                worst = worst.max(p.u.sup_abs().max(p.v.sup_abs()));
                // sigma u <= v <= u on the minimal pair
                let r = pointwise_orderings(&spec, &p, &p).unwrap();
                assert!(r.holds.iter().all(|&h| h));
            }
            assert!(worst < prev);
            prev = worst;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn parameter_monotonicity() {
        let spec = exp_exp(3, 48);
        let a = system_minimal(&spec, 0.5, 0.3, 100_000, 1e-13).unwrap().converged().unwrap();
        let b = system_minimal(&spec, 0.8, 0.4, 100_000, 1e-13).unwrap().converged().unwrap();
        assert!(a.u.values().iter().zip(b.u.values()).all(|(x, y)| x <= y));
        assert!(a.v.values().iter().zip(b.v.values()).all(|(x, y)| x <= y));
    }

    #[test]
    fn ray_through_diagonal_folds_at_scalar_value() {
        let spec = exp_exp(2, 128);
        let ray = trace_ray(&spec, 1.0, 0.0, 200).unwrap();
        let ls = ray.lambda_star().unwrap();
        assert!((ls - 2.0).abs() < 1e-2, "{ls}");
        for p in &ray.points {
            assert!(p.u.sub(&p.v).sup_abs() < 1e-8);
        }
    }

    #[test]
    fn rays_are_ordered_by_slope() {
        let spec = exp_exp(3, 64);
        let a = trace_ray(&spec, 0.5, 0.0, 200).unwrap().lambda_star().unwrap();
        let b = trace_ray(&spec, 1.0, 0.0, 200).unwrap().lambda_star().unwrap();
        let c = trace_ray(&spec, 2.0, 0.0, 200).unwrap().lambda_star().unwrap();
        assert!(a >= b && b >= c, "{a} {b} {c}");
        assert!((c - 0.5 * a).abs() < 2e-2 * c);
    }

    #[test]
    fn curve_separates_probes() {
        let spec = exp_exp(3, 48);
        let curve = upsilon_curve(&spec, &[0.5, 1.0, 2.0], 0.0, 200);
        assert!(curve.failures.is_empty());
        assert!(curve.separates, "{:?}", curve.probes);
        assert!(system_minimal(&spec, 0.1, 0.1, 100_000, 1e-12).unwrap().is_converged());
        let one = curve.points.iter().find(|p| p.sigma == 1.0).unwrap();
        let above = system_minimal(&spec, 1.05 * one.lambda_star, 1.1 * one.gamma_star, 1_000_000, 1e-12).unwrap();
        assert!(!above.is_converged());
    }

    #[test]
    fn orderings_trivial_cases() {
        let spec = exp_exp(3, 48);
        let p = system_minimal(&spec, 0.5, 0.5, 100_000, 1e-13).unwrap().converged().unwrap();
        let r = pointwise_orderings(&spec, &p, &p).unwrap();
        assert!(r.holds.iter().all(|&h| h));
        let q = system_minimal(&spec, 0.6, 0.5, 100_000, 1e-13).unwrap().converged().unwrap();
        assert!(pointwise_orderings(&spec, &p, &q).is_err());
        let (ru, rv) = difference_residual(&spec, &p, &p).unwrap();
        assert!(ru.iter().chain(&rv).all(|&x| x == 0.0));
    }

    #[test]
    fn upper_pairs_are_ordered() {
        let spec = exp_exp(3, 96);
        let ray = trace_ray(&spec, 0.5, 0.0, 300).unwrap();
        assert!(!ray.upper_segment().is_empty());
        let t = iv_threshold(&spec, &ray, 20).unwrap();
        for q in &t.pairs {
            assert!(q.report.holds[0] && q.report.holds[1] && q.report.holds[2], "{q:?}");
            if let Some(th) = t.threshold {
                if q.lambda < th {
                    assert!(q.report.holds[3]);
                }
            }
        }
        let s = &ray.upper_segment()[0];
        let m = system_minimal(&spec, s.lambda, s.gamma, 1_000_000, 1e-13).unwrap().converged().unwrap();
        let (ru, rv) = difference_residual(&spec, s, &m).unwrap();
        let sup = ru.iter().chain(&rv).fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(sup * spec.grid().h().powi(2) < 1e-9, "{sup}");
    }

    #[test]
    fn manufactured_difference_residual_is_second_order() {
        // u_o = (1 - r^2)^2 and v_o from the first equation; lambda = 10,
        // u_min = v_min = 0
        let err = |m| {
            let g = RadialGrid::new(3, m).unwrap();
            let n = 3.0;
            let lap_uo = |r: f64| -4.0 * n + 4.0 * (n + 2.0) * r * r;
            let uo = RadialField::from_fn(&g, |r| (1.0 - r * r).powi(2));
            let vo = RadialField::from_fn(&g, |r| (-lap_uo(r) / 10.0).ln_1p());
            let z = RadialField::zeros(&g);
            let (ru, _) = difference_residual_fields(10.0, 0.5, &z, &z, &uo, &vo);
            ru.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        };
        let (e1, e2) = (err(63), err(127));
        assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
    }
}
