//! Scalar problems: minimal solutions, the small-lambda contraction
//! solution, Newton, continuation with fold detection, stability and weak
//! residuals.

use serde::Serialize;

use crate::continuation::{continuation, ContinuationOptions, ContinuationRun, Termination};
use crate::eigen::smallest_eigenpair;
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::newton::{newton, NewtonOptions};
use crate::nonlinearity::ClassTag;
use crate::problem::{check_lambda, DiscreteProblem, Order, ProblemSpec};

pub const TOL_EIG: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub u: RadialField,
    /// Smallest eigenvalue of the linearized operator.
    pub eta1: Option<f64>,
    pub sup_norm: f64,
    pub arclength: f64,
    pub converged: bool,
    pub newton_iters: usize,
    /// Scaled nonlinear residual.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DivergenceReason {
    /// Sup norm passed the blow-up cap.
    BlowUp,
    /// A class (S) iterate reached the singular value.
    Ceiling,
    /// Neither converged nor blew up within the iteration budget.
    Budget,
    /// Newton homotopy failed to reach the target parameter.
    Homotopy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub lambda: f64,
    pub iters: usize,
    pub last_sup: f64,
    pub reason: DivergenceReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MinimalOutcome {
    Converged(BranchPoint),
    Diverged(DivergenceReport),
}

impl MinimalOutcome {
    pub fn converged(self) -> Option<BranchPoint> {
        match self {
            MinimalOutcome::Converged(p) => Some(p),
            MinimalOutcome::Diverged(_) => None,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, MinimalOutcome::Converged(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldEstimate {
    pub lambda_star: f64,
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub spec: ProblemSpec,
    pub points: Vec<BranchPoint>,
    /// The first turning point, the discrete extremal parameter.
    pub fold: Option<FoldEstimate>,
    /// Every turning point met, in order.
    pub turning_points: Vec<FoldEstimate>,
    pub termination: Termination,
}

impl Branch {
    /// Points up to and including the first fold.
    pub fn pre_fold(&self) -> &[BranchPoint] {
        match self.fold {
            Some(f) => &self.points[..=f.index],
            None => &self.points,
        }
    }
}

fn lambda_zero_point(spec: &ProblemSpec) -> Result<BranchPoint> {
    let u = RadialField::zeros(spec.grid());
    let mut p = BranchPoint {
        lambda: 0.0,
        sup_norm: 0.0,
        u,
        eta1: None,
        arclength: 0.0,
        converged: true,
        newton_iters: 0,
        residual: 0.0,
    };
    p.eta1 = Some(stability_eigenvalue(spec, &p)?);
    Ok(p)
}

fn make_point(spec: &ProblemSpec, lambda: f64, x: &[f64], iters: usize) -> Result<BranchPoint> {
    let r = spec.residual(x, lambda);
    let mut p = BranchPoint {
        lambda,
        u: RadialField::from_interior(spec.grid(), x),
        eta1: None,
        sup_norm: spec.sup(x),
        arclength: 0.0,
        converged: true,
        newton_iters: iters,
        residual: spec.scaled_residual_norm(&r),
    };
    p.eta1 = Some(stability_eigenvalue(spec, &p)?);
    Ok(p)
}

/// Monotone iteration `u_(k+1) = L^-1 (lambda f(u_k))` from zero.
pub fn minimal_solution(spec: &ProblemSpec, lambda: f64, max_iters: usize, tol: f64) -> Result<MinimalOutcome> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(MinimalOutcome::Converged(lambda_zero_point(spec)?));
    }
    match picard(spec, lambda, max_iters, tol)? {
        PicardResult::Converged(x) => {
            // one Newton polish from the monotone limit
            let x = match newton(spec, x.clone(), lambda, &NewtonOptions::default()) {
                Ok(rep) if spec.admissible(&rep.x) => rep.x,
                _ => x,
            };
            Ok(MinimalOutcome::Converged(make_point(spec, lambda, &x, 0)?))
        }
        PicardResult::Diverged(rep) => Ok(MinimalOutcome::Diverged(rep)),
        PicardResult::NotMonotone(k) => {
            if spec.order() == Order::FourthDirichlet {
                newton_homotopy(spec, lambda)
            } else {
                Err(Error::Consistency(format!("monotone iteration decreased at step {k}")))
            }
        }
    }
}

enum PicardResult {
    Converged(Vec<f64>),
    Diverged(DivergenceReport),
    NotMonotone(usize),
}

fn picard(spec: &ProblemSpec, lambda: f64, max_iters: usize, tol: f64) -> Result<PicardResult> {
    let lu = spec.operator().factor()?;
    let nl = spec.nl();
    let cap = spec.blow_up_cap();
    let mut u = vec![0.0; spec.size()];
    for k in 1..=max_iters {
        let rhs: Vec<f64> = u.iter().map(|&v| lambda * nl.f(v)).collect();
        let next = lu.solve(&rhs);
        let sup = spec.sup(&next);
        if !sup.is_finite() || sup > cap {
            let reason = match nl.class_tag() {
                ClassTag::R => DivergenceReason::BlowUp,
                ClassTag::S => DivergenceReason::Ceiling,
            };
            return Ok(PicardResult::Diverged(DivergenceReport { lambda, iters: k, last_sup: sup, reason }));
        }
        let mut inc = 0.0f64;
        for (a, b) in next.iter().zip(&u) {
            if *a < *b - 1e-12 * (1.0 + b.abs()) {
                return Ok(PicardResult::NotMonotone(k));
            }
            inc = inc.max((a - b).abs());
        }
        u = next;
        if inc <= tol {
            return Ok(PicardResult::Converged(u));
        }
    }
    Ok(PicardResult::Diverged(DivergenceReport {
        lambda,
        iters: max_iters,
        last_sup: spec.sup(&u),
        reason: DivergenceReason::Budget,
    }))
}

/// Newton continuation in `lambda` from zero, for operators without a
/// discrete comparison principle.
fn newton_homotopy(spec: &ProblemSpec, lambda: f64) -> Result<MinimalOutcome> {
    let opts = NewtonOptions::default();
    let mut x = vec![0.0; spec.size()];
    let mut l = 0.0;
    let mut step = lambda / 8.0;
    let mut total = 0;
    while l < lambda {
        let target = (l + step).min(lambda);
        match newton(spec, x.clone(), target, &opts) {
            Ok(rep) => {
                total += rep.iters;
                x = rep.x;
                l = target;
                step *= 1.5;
            }
            Err(_) => {
                step *= 0.5;
                if step < lambda * 1e-6 {
                    return Ok(MinimalOutcome::Diverged(DivergenceReport {
                        lambda,
                        iters: total,
                        last_sup: spec.sup(&x),
                        reason: DivergenceReason::Homotopy,
                    }));
                }
            }
        }
    }
    Ok(MinimalOutcome::Converged(make_point(spec, lambda, &x, total)?))
}

/// `|L^-1|_inf`, the sup-norm operator norm of the discrete solution map.
pub fn inverse_sup_norm(spec: &ProblemSpec) -> Result<f64> {
    let lu = spec.operator().factor()?;
    let n = spec.size();
    let mut row_sums = vec![0.0; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = lu.solve(&e);
        for (s, c) in row_sums.iter_mut().zip(&col) {
            *s += c.abs();
        }
        e[j] = 0.0;
    }
    Ok(row_sums.into_iter().fold(0.0, f64::max))
}

/// Contraction-mapping solution for small `lambda` on the ball of radius
/// `sqrt(lambda)`.
pub fn small_solution(spec: &ProblemSpec, lambda: f64) -> Result<BranchPoint> {
    check_lambda(lambda)?;
    if spec.order() != Order::FourthDirichlet {
        return Err(Error::InvalidInput("small_solution applies to the clamped fourth-order problem".into()));
    }
    if lambda == 0.0 {
        return lambda_zero_point(spec);
    }
    let nl = spec.nl();
    let radius = lambda.sqrt();
    if !nl.in_domain(radius) {
        return Err(Error::NoContraction { rate: f64::INFINITY });
    }
    let g = inverse_sup_norm(spec)?;
    let rate = lambda * g * nl.fprime(radius);
    let invariance = lambda * g * nl.f(radius) / radius;
    if rate >= 1.0 || invariance > 1.0 {
        return Err(Error::NoContraction { rate: rate.max(invariance) });
    }
    let lu = spec.operator().factor()?;
    let mut u = vec![0.0; spec.size()];
    let mut iters = 0;
    loop {
        iters += 1;
        let rhs: Vec<f64> = u.iter().map(|&v| lambda * nl.f(v)).collect();
        let next = lu.solve(&rhs);
        let inc = next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        u = next;
        if inc <= 1e-15 * (1.0 + radius) || iters > 10_000 {
            break;
        }
    }
    let mut p = make_point(spec, lambda, &u, 0)?;
    p.newton_iters = iters;
    let sup_abs = p.u.sup_abs();
    if sup_abs > radius {
        return Err(Error::Consistency(format!("small solution sup {sup_abs} exceeds sqrt(lambda) = {radius}")));
    }
    match p.eta1 {
        Some(e) if e > 0.0 => Ok(p),
        other => Err(Error::Consistency(format!("small solution not stable (eta1 = {other:?})"))),
    }
}

pub fn newton_solve(spec: &ProblemSpec, lambda: f64, guess: &RadialField) -> Result<BranchPoint> {
    check_lambda(lambda)?;
    if guess.grid() != spec.grid() {
        return Err(Error::InvalidInput("guess lives on a different grid".into()));
    }
    let rep = newton(spec, guess.interior().to_vec(), lambda, &NewtonOptions::default())?;
    make_point(spec, lambda, &rep.x, rep.iters)
}

/// Smallest eigenvalue of `L - lambda f'(u)`.
pub fn stability_eigenvalue(spec: &ProblemSpec, point: &BranchPoint) -> Result<f64> {
    let x = point.u.interior();
    let j = spec.jacobian(x, point.lambda);
    let lower = spec.spectrum_lower_bound(x, point.lambda);
    Ok(smallest_eigenpair(&j, spec.weights(), lower, TOL_EIG)?.value)
}

/// A starting parameter safely inside the minimal branch: a tenth of the
/// first eigenvalue of the operator over `f'(0)`.
pub fn default_lambda_init(spec: &ProblemSpec) -> Result<f64> {
    let op = spec.operator();
    let l1 = smallest_eigenpair(op.band(), op.weights(), -1.0, TOL_EIG)?.value;
    Ok(0.1 * l1 / spec.nl().fprime(0.0).max(1e-300))
}

/// Default continuation settings for a start at `lambda_init`.
pub fn default_continuation_options(lambda_init: f64, n_steps: usize) -> ContinuationOptions {
    ContinuationOptions::new(lambda_init / 4.0, n_steps)
}

/// Continues the minimal branch from `lambda_init`; `ds <= 0` selects
/// `lambda_init / 4`.
pub fn continue_branch(spec: &ProblemSpec, lambda_init: f64, ds: f64, n_steps: usize) -> Result<Branch> {
    let mut opts = default_continuation_options(lambda_init, n_steps);
    if ds > 0.0 {
        opts = ContinuationOptions::new(ds, n_steps);
    }
    continue_branch_with(spec, lambda_init, &opts)
}

pub fn continue_branch_with(spec: &ProblemSpec, lambda_init: f64, opts: &ContinuationOptions) -> Result<Branch> {
    if !(lambda_init > 0.0) {
        return Err(Error::InvalidInput("continuation needs lambda_init > 0".into()));
    }
    let start = match minimal_solution(spec, lambda_init, 100_000, 1e-13)? {
        MinimalOutcome::Converged(p) => p,
        MinimalOutcome::Diverged(d) => {
            return Err(Error::InvalidInput(format!(
                "no minimal solution at lambda_init = {lambda_init} ({:?})",
                d.reason
            )))
        }
    };
    let mut opts = *opts;
    if spec.nl().class_tag() == ClassTag::S {
        opts.sup_cap = opts.sup_cap.min(spec.blow_up_cap());
    }
    let run = continuation(spec, start.u.interior().to_vec(), lambda_init, &opts)?;
    branch_from_run(spec, run)
}

fn branch_from_run(spec: &ProblemSpec, run: ContinuationRun) -> Result<Branch> {
    let mut points = Vec::with_capacity(run.points.len());
    for cp in &run.points {
        let mut p = make_point(spec, cp.lambda, &cp.x, cp.newton_iters)?;
        p.arclength = cp.arclength;
        p.residual = cp.residual;
        points.push(p);
    }
    let turning_points: Vec<FoldEstimate> =
        run.folds.iter().map(|&i| FoldEstimate { lambda_star: run.points[i].lambda, index: i }).collect();
    Ok(Branch {
        spec: spec.clone(),
        points,
        fold: turning_points.first().copied(),
        turning_points,
        termination: run.termination,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalSolution {
    pub point: BranchPoint,
    /// `max_i |max_k u_k(r_i) - u*(r_i)|` over the pre-fold branch.
    pub monotone_limit_gap: f64,
    /// Largest nodal decrease between consecutive pre-fold points.
    pub monotonicity_violation: f64,
}

/// The fold point of a branch as the discrete extremal solution.
pub fn extremal_solution(branch: &Branch) -> Result<ExtremalSolution> {
    let fold = branch.fold.ok_or_else(|| Error::Unavailable("fold on this branch".into()))?;
    let pre = branch.pre_fold();
    let star = &branch.points[fold.index];
    let n = star.u.values().len();
    let mut gap = 0.0f64;
    for i in 0..n {
        let m = pre.iter().map(|p| p.u.values()[i]).fold(f64::NEG_INFINITY, f64::max);
        gap = gap.max((m - star.u.values()[i]).abs());
    }
    let mut viol = 0.0f64;
    for w in pre.windows(2) {
        for (a, b) in w[0].u.values().iter().zip(w[1].u.values()) {
            viol = viol.max(a - b);
        }
    }
    Ok(ExtremalSolution { point: star.clone(), monotone_limit_gap: gap, monotonicity_violation: viol })
}

/// A radial test function `sum_m c_m r^(2m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialPolynomial {
    pub coeffs: Vec<f64>,
}

impl RadialPolynomial {
    pub fn eval(&self, r: f64) -> f64 {
        let s = r * r;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    pub fn derivative_at_one(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(m, c)| 2.0 * m as f64 * c).sum()
    }

    /// `Lap` in dimension `n`: `Lap r^(2m) = 2m(2m+N-2) r^(2m-2)`.
    pub fn laplacian(&self, n: usize) -> RadialPolynomial {
        let nf = n as f64;
        let coeffs = (1..self.coeffs.len())
            .map(|m| {
                let mf = m as f64;
                self.coeffs[m] * 2.0 * mf * (2.0 * mf + nf - 2.0)
            })
            .collect::<Vec<_>>();
        RadialPolynomial { coeffs: if coeffs.is_empty() { vec![0.0] } else { coeffs } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestSpace {
    /// `phi = 0` on the boundary.
    Xp,
    /// `phi = Lap phi = 0` on the boundary.
    Xn,
    /// `phi = dphi/dr = 0` on the boundary.
    Xd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestBank {
    pub space: TestSpace,
    pub dim: usize,
    pub functions: Vec<RadialPolynomial>,
}

impl TestBank {
    /// Five fixed functions matching the boundary conditions of `order`.
    pub fn standard(order: Order, dim: usize) -> Self {
        let nf = dim as f64;
        let mono = |k: usize, c: f64| {
            let mut v = vec![0.0; k + 1];
            v[k] = c;
            v
        };
        let add = |a: Vec<f64>, b: Vec<f64>| {
            let n = a.len().max(b.len());
            (0..n).map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0)).collect()
        };
        let (space, functions) = match order {
            Order::Second => (
                TestSpace::Xp,
                (1..=5).map(|k| RadialPolynomial { coeffs: add(vec![1.0], mono(k, -1.0)) }).collect(),
            ),
            Order::FourthNavier => (
                TestSpace::Xn,
                (1..=5)
                    .map(|k| {
                        let kf = k as f64;
                        let alpha = 2.0 * kf * (2.0 * kf + nf - 2.0) / ((2.0 * kf + 2.0) * (2.0 * kf + nf));
                        let a: Vec<f64> = add(vec![1.0], mono(k, -1.0));
                        let b: Vec<f64> = add(vec![-alpha], mono(k + 1, alpha));
                        RadialPolynomial { coeffs: add(a, b) }
                    })
                    .collect(),
            ),
            Order::FourthDirichlet => (
                TestSpace::Xd,
                // (1 - r^2)^2 r^(2(k-1))
                (1..=5)
                    .map(|k| {
                        let base = add(add(mono(k - 1, 1.0), mono(k, -2.0)), mono(k + 1, 1.0));
                        RadialPolynomial { coeffs: base }
                    })
                    .collect(),
            ),
        };
        TestBank { space, dim, functions }
    }

    /// Boundary-condition violations, one per function.
    pub fn violations(&self) -> Vec<f64> {
        self.functions
            .iter()
            .map(|phi| {
                let v0 = phi.eval(1.0).abs();
                match self.space {
                    TestSpace::Xp => v0,
                    TestSpace::Xn => v0.max(phi.laplacian(self.dim).eval(1.0).abs()),
                    TestSpace::Xd => v0.max(phi.derivative_at_one().abs()),
                }
            })
            .collect()
    }
}

/// `|int u L*phi - lambda int f(u) phi|` per test function, with `L*` the
/// formal adjoint (`-Lap` or `Lap^2`).
pub fn weak_residual(spec: &ProblemSpec, point: &BranchPoint, bank: &TestBank) -> Result<Vec<f64>> {
    let expected = match spec.order() {
        Order::Second => TestSpace::Xp,
        Order::FourthNavier => TestSpace::Xn,
        Order::FourthDirichlet => TestSpace::Xd,
    };
    if bank.space != expected || bank.dim != spec.dim() {
        return Err(Error::InvalidInput("test bank does not match the problem".into()));
    }
    if let Some(v) = bank.violations().into_iter().find(|&v| v > 1e-12) {
        return Err(Error::InvalidInput(format!("test function violates its boundary conditions by {v}")));
    }
    weak_residual_field(spec, point.lambda, &point.u, bank)
}

pub(crate) fn weak_residual_field(
    spec: &ProblemSpec,
    lambda: f64,
    u: &RadialField,
    bank: &TestBank,
) -> Result<Vec<f64>> {
    let g = spec.grid();
    let nl = spec.nl();
    let fu: Vec<f64> = u.values().iter().map(|&v| nl.f(v)).collect();
    Ok(bank
        .functions
        .iter()
        .map(|phi| {
            let lphi = match spec.order() {
                Order::Second => phi.laplacian(spec.dim()).coeffs.iter().map(|c| -c).collect(),
                _ => phi.laplacian(spec.dim()).laplacian(spec.dim()).coeffs,
            };
            let lphi = RadialPolynomial { coeffs: lphi };
            let lhs: Vec<f64> = g.nodes().iter().zip(u.values()).map(|(&r, &v)| v * lphi.eval(r)).collect();
            let rhs: Vec<f64> = g.nodes().iter().zip(&fu).map(|(&r, &f)| lambda * f * phi.eval(r)).collect();
            (g.integrate(&lhs) - g.integrate(&rhs)).abs()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldCrossCheck {
    pub continuation: f64,
    pub bisection: f64,
    pub relative_gap: f64,
    /// Present when the two estimates differ by more than 2%.
    pub diagnostic: Option<String>,
}

/// `lambda*` as the edge between converging and diverging monotone
/// iteration, bisected on `[lo, hi]`.
pub fn lambda_star_bisection(spec: &ProblemSpec, lo: f64, hi: f64, rel_tol: f64, max_iters: usize) -> Result<f64> {
    let converges = |l: f64| -> Result<bool> { Ok(minimal_solution(spec, l, max_iters, 1e-10)?.is_converged()) };
    let (mut lo, mut hi) = (lo, hi);
    if !converges(lo)? {
        return Err(Error::InvalidInput(format!("monotone iteration diverges at the lower end {lo}")));
    }
    if converges(hi)? {
        return Err(Error::InvalidInput(format!("monotone iteration converges at the upper end {hi}")));
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn fold_cross_check(spec: &ProblemSpec, branch: &Branch) -> Result<FoldCrossCheck> {
    let fold = branch.fold.ok_or_else(|| Error::Unavailable("fold on this branch".into()))?;
    let ls = fold.lambda_star;
    let bis = lambda_star_bisection(spec, 0.5 * ls, 1.5 * ls, 1e-4, 200_000)?;
    let gap = (bis - ls).abs() / ls;
    let diagnostic = (gap > 0.02).then(|| format!("fold {ls} and bisection {bis} differ by {:.2}%", 100.0 * gap));
    Ok(FoldCrossCheck { continuation: ls, bisection: bis, relative_gap: gap, diagnostic })
}

/// Richardson extrapolation of values computed at spacings `h1 > h2` for a
/// method of order `p`.
pub fn richardson(v1: f64, h1: f64, v2: f64, h2: f64, p: f64) -> f64 {
    let ratio = (h1 / h2).powf(p);
    v2 + (v2 - v1) / (ratio - 1.0)
}

/// `lambda*` on the grid and on its refinement, Richardson-combined.
pub fn extrapolated_lambda_star(spec: &ProblemSpec, lambda_init: f64, n_steps: usize) -> Result<(f64, f64, f64)> {
    let coarse = continue_branch(spec, lambda_init, 0.0, n_steps)?;
    let fine_spec = spec.with_grid(RadialGrid::new(spec.dim(), 2 * spec.grid().m() + 1)?)?;
    let fine = continue_branch(&fine_spec, lambda_init, 0.0, n_steps)?;
    let l1 = coarse.fold.ok_or_else(|| Error::Unavailable("fold on the coarse grid".into()))?.lambda_star;
    let l2 = fine.fold.ok_or_else(|| Error::Unavailable("fold on the fine grid".into()))?.lambda_star;
    Ok((l1, l2, richardson(l1, spec.grid().h(), l2, fine_spec.grid().h(), 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Nonlinearity;

    /// `u_b(r) = 2 log((1+b)/(1+b r^2))` solves `-Lap u = lambda e^u` in the
    /// unit disc with `lambda = 8b/(1+b)^2`.
    fn gelfand_disc(b: f64) -> (f64, impl Fn(f64) -> f64) {
        (8.0 * b / (1.0 + b).powi(2), move |r: f64| 2.0 * ((1.0 + b) / (1.0 + b * r * r)).ln())
    }

    fn disc(m: usize) -> ProblemSpec {
        ProblemSpec::new(Order::Second, Nonlinearity::exp(), RadialGrid::new(2, m).unwrap()).unwrap()
    }

    #[test]
    fn oracle_substitution_residual_is_second_order() {
        // the closed form sampled on the grid leaves an O(h^2) residual
        let err = |m| {
            let spec = disc(m);
            let (lambda, u) = gelfand_disc(3.0 - 2.0 * 2f64.sqrt());
            let x = RadialField::from_fn(spec.grid(), u);
            let r = spec.residual(x.interior(), lambda);
            r.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        };
        let (e1, e2) = (err(63), err(127));
        assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
    }

    #[test]
    fn minimal_solution_matches_closed_form() {
        let spec = disc(256);
        let p = minimal_solution(&spec, 1.0, 10_000, 1e-12).unwrap().converged().unwrap();
        let b: f64 = 3.0 - 2.0 * 2f64.sqrt();
        assert!((p.u.values()[0] - 2.0 * (1.0 + b).ln()).abs() < 5e-3);
        assert!((p.u.values()[0] - 0.3167).abs() < 5e-3);
        assert!(p.eta1.unwrap() > 0.0);
        match minimal_solution(&spec, 3.0, 10_000, 1e-12).unwrap() {
            MinimalOutcome::Diverged(d) => assert_eq!(d.reason, DivergenceReason::BlowUp),
            _ => panic!("lambda = 3 must diverge"),
        }
    }

    #[test]
    fn lambda_zero_gives_operator_eigenvalue() {
        let spec = ProblemSpec::new(Order::Second, Nonlinearity::exp(), RadialGrid::new(3, 127).unwrap()).unwrap();
        let p = minimal_solution(&spec, 0.0, 10, 1e-12).unwrap().converged().unwrap();
        assert_eq!(p.sup_norm, 0.0);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((p.eta1.unwrap() - pi2).abs() < 2e-3);
    }

    #[test]
    fn newton_finds_upper_solution_from_oracle_guess() {
        let spec = disc(256);
        let b = 3.0 + 2.0 * 2f64.sqrt();
        let (lambda, u) = gelfand_disc(b);
        assert!((lambda - 1.0).abs() < 1e-14);
        let guess = RadialField::from_fn(spec.grid(), u);
        let p = newton_solve(&spec, 1.0, &guess).unwrap();
        assert!((p.u.values()[0] - 2.0 * (1.0 + b).ln()).abs() < 5e-3, "{}", p.u.values()[0]);
        assert!((p.u.values()[0] - 3.842).abs() < 5e-3);
        assert!(p.eta1.unwrap() < 0.0);
    }

    #[test]
    fn newton_from_minimal_is_immediate() {
        let spec = disc(128);
        let p = minimal_solution(&spec, 1.0, 10_000, 1e-13).unwrap().converged().unwrap();
        let q = newton_solve(&spec, 1.0, &p.u).unwrap();
        assert!(q.newton_iters <= 2);
        assert!(q.u.sub(&p.u).sup_abs() < 1e-10);
        let z = newton_solve(&spec, 0.0, &p.u).unwrap();
        assert!(z.u.sup_abs() < 1e-12);
    }

    #[test]
    fn monotone_in_lambda() {
        let spec = disc(64);
        let a = minimal_solution(&spec, 0.5, 10_000, 1e-12).unwrap().converged().unwrap();
        let b = minimal_solution(&spec, 1.5, 10_000, 1e-12).unwrap().converged().unwrap();
        assert!(a.u.values().iter().zip(b.u.values()).all(|(x, y)| x <= y));
    }

    #[test]
    fn class_s_ceiling() {
        let spec = ProblemSpec::new(Order::Second, Nonlinearity::mems(2.0).unwrap(), RadialGrid::new(2, 64).unwrap())
            .unwrap();
        let p = minimal_solution(&spec, 0.5, 100_000, 1e-12).unwrap().converged().unwrap();
        assert!(p.sup_norm < 1.0);
        match minimal_solution(&spec, 5.0, 100_000, 1e-12).unwrap() {
            MinimalOutcome::Diverged(d) => assert_eq!(d.reason, DivergenceReason::Ceiling),
            _ => panic!("must hit the ceiling"),
        }
    }

    #[test]
    fn small_solution_bound_and_agreement() {
        let spec =
            ProblemSpec::new(Order::FourthDirichlet, Nonlinearity::exp(), RadialGrid::new(5, 64).unwrap()).unwrap();
        let z = small_solution(&spec, 0.0).unwrap();
        assert_eq!(z.sup_norm, 0.0);
        let p = small_solution(&spec, 1e-3).unwrap();
        assert!(p.u.sup_abs() <= 1e-3f64.sqrt());
        let q = minimal_solution(&spec, 1e-3, 10_000, 1e-15).unwrap().converged().unwrap();
        assert!(p.u.sub(&q.u).sup_abs() < 1e-8);
        let g = inverse_sup_norm(&spec).unwrap();
        assert!(g > 0.0 && g < 0.01);
        // lambda with lambda f'(sqrt(lambda)) |L^-1| >= 1
        let big: f64 = 200.0;
        assert!(big * big.sqrt().exp() * g >= 1.0);
        assert!(matches!(small_solution(&spec, big), Err(Error::NoContraction { .. })));
        let navier =
            ProblemSpec::new(Order::FourthNavier, Nonlinearity::exp(), RadialGrid::new(5, 32).unwrap()).unwrap();
        assert!(small_solution(&navier, 1e-3).is_err());
    }

    #[test]
    fn test_banks_satisfy_boundary_conditions() {
        for n in 1..8 {
            for order in [Order::Second, Order::FourthNavier, Order::FourthDirichlet] {
                let bank = TestBank::standard(order, n);
                assert_eq!(bank.functions.len(), 5);
                assert!(bank.violations().iter().all(|&v| v <= 1e-12), "{order:?} N={n}");
            }
        }
    }

    #[test]
    fn weak_residual_examples() {
        let spec = disc(64);
        let z = minimal_solution(&spec, 0.0, 10, 1e-12).unwrap().converged().unwrap();
        let bank = TestBank::standard(Order::Second, 2);
        assert!(weak_residual(&spec, &z, &bank).unwrap().iter().all(|&v| v == 0.0));
        // closed form sampled on the grid
        let err = |m| {
            let spec = disc(m);
            let (lambda, u) = gelfand_disc(0.5);
            let mut p = z.clone();
            p.lambda = lambda;
            p.u = RadialField::from_fn(spec.grid(), u);
            weak_residual(&spec, &p, &bank).unwrap().into_iter().fold(0.0, f64::max)
        };
        let (e1, e2) = (err(63), err(127));
        assert!(e2 < 1e-2 && e1 / e2 > 3.5, "{e1} {e2}");
        let mut bad = bank.clone();
        bad.functions[0].coeffs[0] += 1e-6;
        assert!(weak_residual(&spec, &z, &bad).is_err());
    }

    #[test]
    fn weak_residual_navier_is_second_order() {
        let err = |m| {
            let spec =
                ProblemSpec::new(Order::FourthNavier, Nonlinearity::exp(), RadialGrid::new(5, m).unwrap()).unwrap();
            let p = minimal_solution(&spec, 50.0, 10_000, 1e-13).unwrap().converged().unwrap();
            let bank = TestBank::standard(Order::FourthNavier, 5);
            weak_residual(&spec, &p, &bank).unwrap().into_iter().fold(0.0, f64::max)
        };
        let (e1, e2) = (err(63), err(127));
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn richardson_removes_leading_term() {
        let f = |h: f64| 2.0 + 3.0 * h * h;
        assert!((richardson(f(0.1), 0.1, f(0.05), 0.05, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn disc_fold_and_extremal_solution() {
        let spec = disc(128);
        let br = continue_branch(&spec, 0.1, 0.0, 200).unwrap();
        let fold = br.fold.expect("fold");
        assert!((fold.lambda_star - 2.0).abs() < 1e-2, "{}", fold.lambda_star);
        for w in br.pre_fold().windows(2) {
            assert!(w[1].lambda > w[0].lambda);
            assert!(w[1].arclength > w[0].arclength);
            assert!(w[0].eta1.unwrap() >= -TOL_EIG);
        }
        let ex = extremal_solution(&br).unwrap();
        assert!((ex.point.u.values()[0] - 2.0 * 2f64.ln()).abs() < 5e-3);
        assert!(ex.monotone_limit_gap < 1e-10 && ex.monotonicity_violation <= 1e-12);
        // stability crossing just past the fold
        let after = &br.points[fold.index + 1];
        assert!(after.eta1.unwrap() < 0.0);
    }

    #[test]
    fn default_start_is_on_the_minimal_branch() {
        for (order, n, nl) in [
            (Order::Second, 2, Nonlinearity::exp()),
            (Order::FourthNavier, 5, Nonlinearity::exp()),
            (Order::Second, 2, Nonlinearity::mems(2.0).unwrap()),
        ] {
            let spec = ProblemSpec::new(order, nl, RadialGrid::new(n, 32).unwrap()).unwrap();
            let l = default_lambda_init(&spec).unwrap();
            assert!(l > 0.0 && minimal_solution(&spec, l, 100_000, 1e-13).unwrap().is_converged());
        }
    }
}
