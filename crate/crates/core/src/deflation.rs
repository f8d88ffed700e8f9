//! Deflated Newton enumeration of solutions at fixed parameters, solution
//! counts over parameter grids, and the collapse of the two branches at a
//! fold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::branch::{
    continue_branch, stability_eigenvalue, weak_residual_field, BranchPoint, TestBank, TOL_EIG,
};
use crate::continuation::{correct_on_hyperplane, ContinuationOptions};
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::newton::{newton, NewtonOptions};
use crate::nonlinearity::{ClassTag, Nonlinearity};
use crate::problem::{check_lambda, DiscreteProblem, ProblemSpec};
use crate::system::{deinterleave, interleave, trace_ray, SystemProblem};

/// Two roots closer than this in the weighted mean-square norm are one.
pub const DISTINCT_THRESHOLD: f64 = 1e-5;
/// Roots whose neighbouring nodes jump by more than this are not resolved
/// by the grid and are discarded.
pub const MAX_JUMP: f64 = 0.25;
/// Relative weak-residual bound for accepting a root at `h <= 1/128`.
pub const WEAK_TOL: f64 = 1e-2;

/// Weak-residual bound on a grid of spacing `h`: genuine roots carry an
/// O(h^2) consistency error, so the bound grows as h^2 on coarser grids.
pub fn weak_tol(h: f64) -> f64 {
    WEAK_TOL * (128.0 * h).powi(2).max(1.0)
}
const DEFLATED_ITERS: usize = 100;
const RETRIES_PER_START: usize = 4;

/// A problem whose solutions at fixed parameter can be enumerated.
pub trait Searchable: DiscreteProblem + Sized {
    /// Initial guess `amp (1 - r^2)^q` in every component.
    fn start(&self, amp: f64, q: i32) -> Vec<f64>;
    /// Largest start amplitude.
    fn amplitude_cap(&self) -> f64;
    /// Smallest stability eigenvalue, where one is defined.
    fn eta1(&self, x: &[f64], lambda: f64) -> Result<Option<f64>>;
    /// Relative weak residual, where a test bank is defined.
    fn weak_check(&self, x: &[f64], lambda: f64) -> Result<Option<f64>>;
    fn refined(&self) -> Result<Self>;
    /// Interpolates unknowns onto `refined()`.
    fn prolong(&self, x: &[f64]) -> Vec<f64>;
    fn grid(&self) -> &RadialGrid;
}

fn bump(g: &RadialGrid, amp: f64, q: i32) -> Vec<f64> {
    (0..g.unknowns()).map(|i| amp * (1.0 - g.r(i).powi(2)).powi(q)).collect()
}

fn prolong_field(g: &RadialGrid, x: &[f64]) -> Vec<f64> {
    let full = RadialField::from_interior(g, x);
    let v = full.values();
    let mut out = Vec::with_capacity(2 * x.len());
    for i in 0..x.len() {
        out.push(v[i]);
        out.push(0.5 * (v[i] + v[i + 1]));
    }
    out
}

/// Amplitude at which `f` reaches `cap`, the start range's top for class R.
fn amplitude_for(nl: &Nonlinearity, cap: f64) -> f64 {
    match nl.class_tag() {
        ClassTag::S => 1.0 - 1e-3,
        ClassTag::R => {
            let (mut lo, mut hi) = (0.0, 1.0);
            while nl.f(hi) < cap && hi < 1e6 {
                lo = hi;
                hi *= 2.0;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if nl.f(mid) < cap {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    }
}

impl Searchable for ProblemSpec {
    fn start(&self, amp: f64, q: i32) -> Vec<f64> {
        bump(self.grid(), amp, q)
    }

    fn amplitude_cap(&self) -> f64 {
        amplitude_for(self.nl(), 1e6)
    }

    fn eta1(&self, x: &[f64], lambda: f64) -> Result<Option<f64>> {
        let p = point_of(self, x, lambda);
        Ok(Some(stability_eigenvalue(self, &p)?))
    }

    fn weak_check(&self, x: &[f64], lambda: f64) -> Result<Option<f64>> {
        let bank = TestBank::standard(self.order(), self.dim());
        let u = RadialField::from_interior(self.grid(), x);
        let res = weak_residual_field(self, lambda, &u, &bank)?;
        let g = self.grid();
        let nl = self.nl();
        let mut worst = 0.0f64;
        for (phi, r) in bank.functions.iter().zip(res) {
            let mag: Vec<f64> =
                g.nodes().iter().zip(u.values()).map(|(&s, &v)| (lambda * nl.f(v) * phi.eval(s)).abs()).collect();
            worst = worst.max(r / g.integrate(&mag).max(1e-300));
        }
        Ok(Some(if lambda == 0.0 { 0.0 } else { worst }))
    }

    fn refined(&self) -> Result<Self> {
        self.with_grid(self.grid().refined())
    }

    fn prolong(&self, x: &[f64]) -> Vec<f64> {
        prolong_field(self.grid(), x)
    }

    fn grid(&self) -> &RadialGrid {
        ProblemSpec::grid(self)
    }
}

impl Searchable for SystemProblem {
    fn start(&self, amp: f64, q: i32) -> Vec<f64> {
        let b = bump(self.spec().grid(), amp, q);
        interleave(&b, &b)
    }

    fn amplitude_cap(&self) -> f64 {
        amplitude_for(self.spec().nl_f(), 1e6).min(amplitude_for(self.spec().nl_g(), 1e6))
    }

    fn eta1(&self, _x: &[f64], _lambda: f64) -> Result<Option<f64>> {
        Ok(None)
    }

    fn weak_check(&self, _x: &[f64], _lambda: f64) -> Result<Option<f64>> {
        Ok(None)
    }

    fn refined(&self) -> Result<Self> {
        self.spec().with_grid(self.spec().grid().refined()).ray(self.sigma())
    }

    fn prolong(&self, x: &[f64]) -> Vec<f64> {
        let (u, v) = deinterleave(x);
        let g = self.spec().grid();
        interleave(&prolong_field(g, &u), &prolong_field(g, &v))
    }

    fn grid(&self) -> &RadialGrid {
        self.spec().grid()
    }
}

fn point_of(spec: &ProblemSpec, x: &[f64], lambda: f64) -> BranchPoint {
    BranchPoint {
        lambda,
        u: RadialField::from_interior(spec.grid(), x),
        eta1: None,
        sup_norm: spec.sup(x),
        arclength: 0.0,
        converged: true,
        newton_iters: 0,
        residual: spec.scaled_residual_norm(&spec.residual(x, lambda)),
    }
}

/// Weighted mean-square distance `<e, e>_W / sum W`.
pub fn distance<P: DiscreteProblem + ?Sized>(p: &P, a: &[f64], b: &[f64]) -> f64 {
    let e: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let total: f64 = p.weights().iter().sum();
    (p.inner(&e, &e) / total).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoundSolution {
    /// Unknowns (interleaved for systems).
    pub x: Vec<f64>,
    /// Value of the first component at the centre.
    pub center: f64,
    pub sup_norm: f64,
    pub eta1: Option<f64>,
    /// Scaled residual after undeflated re-verification.
    pub residual: f64,
    pub weak_residual: Option<f64>,
    pub start_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSet {
    pub lambda: f64,
    /// Second parameter for systems.
    pub gamma: Option<f64>,
    pub solutions: Vec<FoundSolution>,
    pub starts: usize,
    pub seed: u64,
    pub threshold: f64,
    /// Starts that produced no new root.
    pub failed_starts: usize,
    /// Converged roots dropped as under-resolved.
    pub unresolved: usize,
    /// Near-coincident roots settled on the refined grid.
    pub refined_rechecks: usize,
}

impl SolutionSet {
    pub fn count(&self) -> usize {
        self.solutions.len()
    }

    pub fn summary(&self) -> String {
        match self.count() {
            0 => format!("no solution found ({} starts)", self.starts),
            1 => format!("no second solution found ({} starts)", self.starts),
            n => format!("{n} distinct solutions found ({} starts)", self.starts),
        }
    }
}

/// Newton on `M(x) G(x)` with `M = prod_k (|x - x_k|^-2 + 1)`.
fn deflated_newton<P: Searchable>(p: &P, mut x: Vec<f64>, lambda: f64, known: &[Vec<f64>]) -> Option<Vec<f64>> {
    let opts = NewtonOptions::default();
    let total: f64 = p.weights().iter().sum();
    let factor = |x: &[f64]| -> f64 {
        known.iter().map(|k| 1.0 / distance(p, x, k).powi(2) + 1.0).product()
    };
    if !p.admissible(&x) {
        return None;
    }
    let mut r = p.residual(&x, lambda);
    for _ in 0..DEFLATED_ITERS {
        let res = p.scaled_residual_norm(&r);
        if !res.is_finite() {
            return None;
        }
        if res <= opts.tol {
            return Some(x);
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = p.jacobian(&x, lambda).solve(&neg).ok()?;
        let mut beta = 0.0;
        for k in known {
            let e: Vec<f64> = x.iter().zip(k).map(|(a, b)| a - b).collect();
            let n2 = p.inner(&e, &e) / total;
            let coef = -2.0 / (n2 * n2) / (1.0 / n2 + 1.0) / total;
            beta += coef * e.iter().zip(p.weights()).zip(&d).map(|((ei, w), di)| ei * w * di).sum::<f64>();
        }
        let scale = if (1.0 - beta).abs() > 1e-12 { 1.0 / (1.0 - beta) } else { 1.0 };
        let f0 = factor(&x) * r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut alpha = 1.0;
        let next = loop {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * scale * b).collect();
            if p.admissible(&xt) {
                let rt = p.residual(&xt, lambda);
                let ft = factor(&xt) * rt.iter().map(|v| v * v).sum::<f64>().sqrt();
                if ft.is_finite() && ft <= (1.0 - 1e-4 * alpha) * f0 {
                    break Some((xt, rt));
                }
            }
            alpha *= 0.5;
            if alpha < opts.damping_floor {
                break None;
            }
        };
        let (xt, rt) = next?;
        x = xt;
        r = rt;
    }
    None
}

/// Whether two roots are one: closer than the threshold, or within a
/// hundredfold of it and merging when both are re-solved on the refined grid.
fn same_root<P: Searchable>(p: &P, a: &[f64], b: &[f64], lambda: f64, rechecks: &mut usize) -> bool {
    let d = distance(p, a, b);
    if d <= DISTINCT_THRESHOLD {
        return true;
    }
    if d > 100.0 * DISTINCT_THRESHOLD {
        return false;
    }
    *rechecks += 1;
    let Ok(fine) = p.refined() else { return false };
    let opts = NewtonOptions::default();
    match (newton(&fine, p.prolong(a), lambda, &opts), newton(&fine, p.prolong(b), lambda, &opts)) {
        (Ok(ra), Ok(rb)) => distance(&fine, &ra.x, &rb.x) <= DISTINCT_THRESHOLD,
        _ => false,
    }
}

/// Start amplitudes `A_k`, log-spaced from `1e-2` to the cap with seeded
/// jitter, and shapes `q` alternating between 1 and 2.
pub fn start_plan(cap: f64, k: usize, seed: u64) -> Vec<(f64, i32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = 1e-2f64.ln();
    let hi = cap.ln();
    (0..k)
        .map(|i| {
            let s = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
            let jitter: f64 = rng.random_range(-0.05..0.05);
            let amp = (lo + s * (hi - lo) + jitter * (hi - lo) / k as f64).exp().min(cap);
            (amp, if i % 2 == 0 { 1 } else { 2 })
        })
        .collect()
}

/// Enumerates solutions at `lambda` from `k` starts.
pub fn deflated_search<P: Searchable>(p: &P, lambda: f64, k: usize, seed: u64) -> Result<SolutionSet> {
    check_lambda(lambda)?;
    if k == 0 {
        return Err(Error::InvalidInput("need at least one start".into()));
    }
    let mut found: Vec<FoundSolution> = Vec::new();
    let mut failed = 0;
    let mut unresolved = 0;
    let mut rechecks = 0;
    for (idx, (amp, q)) in start_plan(p.amplitude_cap(), k, seed).into_iter().enumerate() {
        let x0 = p.start(amp, q);
        let mut new_here = false;
        for _ in 0..RETRIES_PER_START {
            let known: Vec<Vec<f64>> = found.iter().map(|s| s.x.clone()).collect();
            let Some(root) = deflated_newton(p, x0.clone(), lambda, &known) else { break };
            // undeflated re-verification
            let Ok(rep) = newton(p, root, lambda, &NewtonOptions::default()) else { break };
            if p.max_jump(&rep.x) > MAX_JUMP {
                unresolved += 1;
                break;
            }
            if found.iter().any(|s| same_root(p, &s.x, &rep.x, lambda, &mut rechecks)) {
                break;
            }
            let weak = p.weak_check(&rep.x, lambda)?;
            if weak.is_some_and(|w| w > weak_tol(p.grid().h())) {
                unresolved += 1;
                break;
            }
            found.push(FoundSolution {
                center: rep.x[0],
                sup_norm: p.sup(&rep.x),
                eta1: p.eta1(&rep.x, lambda)?,
                residual: rep.residual,
                weak_residual: weak,
                start_index: idx,
                x: rep.x,
            });
            new_here = true;
        }
        if !new_here {
            failed += 1;
        }
    }
    found.sort_by(|a, b| a.sup_norm.total_cmp(&b.sup_norm));
    Ok(SolutionSet {
        lambda,
        gamma: None,
        solutions: found,
        starts: k,
        seed,
        threshold: DISTINCT_THRESHOLD,
        failed_starts: failed,
        unresolved,
        refined_rechecks: rechecks,
    })
}

/// Deflated search for a system on the ray `gamma = sigma lambda`.
pub fn system_search(p: &SystemProblem, lambda: f64, k: usize, seed: u64) -> Result<SolutionSet> {
    let mut s = deflated_search(p, lambda, k, seed)?;
    s.gamma = Some(p.sigma() * lambda);
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionEntry {
    pub lambda: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessRegion {
    /// In increasing `lambda`.
    pub entries: Vec<RegionEntry>,
    /// Largest grid `lambda` with every smaller grid value counting one.
    pub unique_up_to: Option<f64>,
    pub first_multiple: Option<f64>,
    pub starts: usize,
}

/// Solution counts over `lambda_grid`, searched concurrently.
pub fn uniqueness_region<P: Searchable>(p: &P, lambda_grid: &[f64], k: usize, seed: u64) -> Result<UniquenessRegion> {
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let counts: Vec<Result<usize>> =
        grid.par_iter().map(|&l| deflated_search(p, l, k, seed).map(|s| s.count())).collect();
    let mut entries = Vec::with_capacity(grid.len());
    for (l, c) in grid.iter().zip(counts) {
        entries.push(RegionEntry { lambda: *l, count: c? });
    }
    let unique_up_to = entries.iter().take_while(|e| e.count == 1).last().map(|e| e.lambda);
    let first_multiple = entries.iter().find(|e| e.count >= 2).map(|e| e.lambda);
    Ok(UniquenessRegion { entries, unique_up_to, first_multiple, starts: k })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseSample {
    pub delta: f64,
    pub lambda: f64,
    /// `|u_upper(0) - u_lower(0)|`.
    pub center_gap: f64,
    /// Weighted mean-square distance of the two solutions.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseReport {
    pub lambda_star: f64,
    pub samples: Vec<CollapseSample>,
    /// Least-squares slope of `log center_gap` against `log delta`.
    pub exponent: f64,
    /// Roots found at the fold from perturbed starts.
    pub fold_roots: usize,
    /// Largest distance between them.
    pub fold_cluster_diameter: f64,
    pub single_cluster: bool,
}

fn fit_exponent(samples: &[CollapseSample]) -> f64 {
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.delta.ln(), s.center_gap.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Approximate null vector of the Jacobian at the fold by inverse iteration.
fn null_direction<P: DiscreteProblem + ?Sized>(p: &P, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let lu = p.jacobian(x, lambda).factor()?;
    let total: f64 = p.weights().iter().sum();
    let mut phi = vec![1.0; x.len()];
    for _ in 0..30 {
        phi = lu.solve(&phi);
        let n = (p.inner(&phi, &phi) / total).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Consistency("null direction iteration broke down".into()));
        }
        phi.iter_mut().for_each(|v| *v /= n);
    }
    if phi[0] < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(phi)
}

/// Distance of the branch point at offset `s` along `phi` from the fold.
fn slice<P: DiscreteProblem + ?Sized>(
    p: &P,
    x_star: &[f64],
    lambda_star: f64,
    phi: &[f64],
    s: f64,
    guess: Option<(&[f64], f64)>,
) -> Result<(Vec<f64>, f64)> {
    let target: Vec<f64> = x_star.iter().zip(phi).map(|(a, b)| a + s * b).collect();
    let mut opts = ContinuationOptions::new(1.0, 1);
    opts.max_corrector_iters = 40;
    let (x0, l0) = match guess {
        Some((g, l)) => {
            // shift the guess onto the hyperplane through `target`
            let total: f64 = p.weights().iter().sum();
            let e: Vec<f64> = g.iter().zip(&target).map(|(a, b)| a - b).collect();
            let c = p.inner(&e, phi) / total;
            (g.iter().zip(phi).map(|(a, b)| a - c * b).collect::<Vec<_>>(), l)
        }
        None => (target.clone(), lambda_star),
    };
    // the corrector keeps <phi, x - x0> fixed, so hand it the on-plane guess
    let (x, l, _, _) = correct_on_hyperplane(p, &x0, l0, phi, 0.0, &opts)?;
    Ok((x, l))
}

/// Collapse of the two branches at a fold `(x_star, lambda_star)`: for each
/// `delta`, the solutions on either side at `lambda_star (1 - delta)` are
/// found on hyperplanes transverse to the null direction, and their gap is
/// fitted against `delta`. At the fold itself, Newton from perturbed starts
/// must land in a single cluster.
pub fn fold_collapse<P: DiscreteProblem + ?Sized>(
    p: &P,
    x_star: &[f64],
    lambda_star: f64,
    deltas: &[f64],
    seed: u64,
) -> Result<CollapseReport> {
    if deltas.len() < 2 || deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::InvalidInput("need at least two deltas in (0, 1)".into()));
    }
    let phi = null_direction(p, x_star, lambda_star)?;
    // curvature of lambda(s) = lambda_star - a s^2 from a small probe
    let s_probe = 1e-2;
    let a = {
        let lp = slice(p, x_star, lambda_star, &phi, s_probe, None)?.1;
        let lm = slice(p, x_star, lambda_star, &phi, -s_probe, None)?.1;
        (2.0 * lambda_star - lp - lm) / (2.0 * s_probe * s_probe)
    };
    if !(a > 0.0) {
        return Err(Error::Consistency(format!("fold curvature {a} is not positive")));
    }
    let mut samples = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let target = lambda_star * (1.0 - delta);
        let side = |sign: f64| -> Result<Vec<f64>> {
            // secant on s for lambda(s) = target
            let mut s0 = sign * (lambda_star * delta / a).sqrt();
            let (x0, mut l0) = slice(p, x_star, lambda_star, &phi, s0, None)?;
            let mut s1 = s0 * 1.05;
            let (mut x1, mut l1) = slice(p, x_star, lambda_star, &phi, s1, Some((&x0, l0)))?;
            for _ in 0..60 {
                if (l1 - target).abs() <= 1e-13 * target {
                    break;
                }
                let s2 = s1 - (l1 - target) * (s1 - s0) / (l1 - l0);
                let (x2, l2) = slice(p, x_star, lambda_star, &phi, s2, Some((&x1, l1)))?;
                (s0, l0) = (s1, l1);
                (s1, x1, l1) = (s2, x2, l2);
            }
            // polish at exactly `target`
            Ok(newton(p, x1, target, &NewtonOptions::default())?.x)
        };
        let lower = side(-1.0)?;
        let upper = side(1.0)?;
        samples.push(CollapseSample {
            delta,
            lambda: target,
            center_gap: (upper[0] - lower[0]).abs(),
            gap: distance(p, &upper, &lower),
        });
    }
    let exponent = fit_exponent(&samples);

    // at the fold: perturbed starts, plain Newton with a relaxed tolerance
    // since convergence to a double root is only linear
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = NewtonOptions { tol: 1e-8, max_iters: 200, ..NewtonOptions::default() };
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for _ in 0..8 {
        let eps: f64 = rng.random_range(-1e-2..1e-2);
        let x0: Vec<f64> = x_star.iter().zip(&phi).map(|(a, b)| a + eps * b).collect();
        if let Ok(rep) = newton(p, x0, lambda_star, &opts) {
            roots.push(rep.x);
        }
    }
    let mut diameter = 0.0f64;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            diameter = diameter.max(distance(p, &roots[i], &roots[j]));
        }
    }
    let smallest_gap = samples.iter().map(|s| s.gap).fold(f64::INFINITY, f64::min);
    Ok(CollapseReport {
        lambda_star,
        samples,
        exponent,
        fold_roots: roots.len(),
        fold_cluster_diameter: diameter,
        single_cluster: !roots.is_empty() && diameter < smallest_gap,
    })
}

/// Traces the scalar branch from `lambda_init` and probes its fold.
pub fn extremal_uniqueness_probe(
    spec: &ProblemSpec,
    lambda_init: f64,
    deltas: &[f64],
    seed: u64,
) -> Result<CollapseReport> {
    let br = continue_branch(spec, lambda_init, 0.0, 400)?;
    let fold = br.fold.ok_or_else(|| Error::Unavailable("fold on this branch".into()))?;
    let star = &br.points[fold.index];
    if star.eta1.is_some_and(|e| e.abs() > 1e3 * TOL_EIG.sqrt()) {
        return Err(Error::Consistency(format!("fold point eta1 = {:?} is not near zero", star.eta1)));
    }
    fold_collapse(spec, star.u.interior(), fold.lambda_star, deltas, seed)
}

/// The same probe on the system ray `gamma = sigma lambda`.
pub fn system_extremal_probe(
    p: &SystemProblem,
    deltas: &[f64],
    seed: u64,
) -> Result<CollapseReport> {
    let ray = trace_ray(p.spec(), p.sigma(), 0.0, 400)?;
    let fold = ray.fold.ok_or_else(|| Error::Unavailable("fold on this ray".into()))?;
    let star = &ray.points[fold.index];
    fold_collapse(p, &star.interleaved(), fold.lambda_star, deltas, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Order;
    use crate::system::SystemSpec;

    fn gelfand2(m: usize) -> ProblemSpec {
        ProblemSpec::new(Order::Second, Nonlinearity::exp(), RadialGrid::new(2, m).unwrap()).unwrap()
    }

    #[test]
    fn lambda_zero_has_one_solution() {
        let s = deflated_search(&gelfand2(64), 0.0, 6, 1).unwrap();
        assert_eq!(s.count(), 1);
        assert!(s.solutions[0].x.iter().all(|&v| v.abs() < 1e-12));
        assert!(s.summary().contains("no second solution"));
    }

    #[test]
    fn two_solutions_at_lambda_one() {
        let s = deflated_search(&gelfand2(256), 1.0, 20, 7).unwrap();
        assert_eq!(s.count(), 2, "{:?}", s.solutions.iter().map(|x| x.center).collect::<Vec<_>>());
        assert!((s.solutions[0].center - 0.3167).abs() < 5e-3);
        assert!(s.solutions[0].eta1.unwrap() > 0.0 && s.solutions[1].eta1.unwrap() < 0.0);
        for sol in &s.solutions {
            assert!(sol.residual <= 1e-10);
        }
    }

    #[test]
    fn coarse_grid_keeps_the_minimal_navier_root() {
        assert_eq!(weak_tol(1.0 / 256.0), WEAK_TOL);
        assert!((weak_tol(1.0 / 64.0) - 4.0 * WEAK_TOL).abs() < 1e-15);
        let spec = ProblemSpec::new(Order::FourthNavier, Nonlinearity::exp(), RadialGrid::new(5, 64).unwrap()).unwrap();
        let s = deflated_search(&spec, 1.0, 20, 1).unwrap();
        assert_eq!(s.count(), 1);
        assert!(s.solutions[0].weak_residual.unwrap() > WEAK_TOL);
    }

    #[test]
    fn search_is_deterministic() {
        let p = gelfand2(64);
        assert_eq!(deflated_search(&p, 1.0, 8, 3).unwrap(), deflated_search(&p, 1.0, 8, 3).unwrap());
    }

    #[test]
    fn deflation_repels_known_root() {
        let p = gelfand2(64);
        let a = deflated_newton(&p, p.start(0.3, 1), 1.0, &[]).unwrap();
        let b = deflated_newton(&p, p.start(0.3, 1), 1.0, std::slice::from_ref(&a));
        if let Some(b) = b {
            assert!(distance(&p, &a, &b) > DISTINCT_THRESHOLD);
        }
    }

    #[test]
    fn start_plan_respects_cap() {
        let plan = start_plan(0.999, 10, 5);
        assert!(plan.iter().all(|&(a, _)| a > 0.0 && a <= 0.999));
        assert!((amplitude_for(&Nonlinearity::exp(), 1e6) - 1e6f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn prolongation_keeps_coarse_nodes() {
        let p = gelfand2(16);
        let x: Vec<f64> = (0..17).map(|i| i as f64).collect();
        let y = p.prolong(&x);
        assert_eq!(y.len(), p.refined().unwrap().size());
        assert_eq!((y[4], y[5]), (2.0, 2.5));
        assert_eq!(y[33], 8.0);
    }

    #[test]
    fn region_n2_counts_two() {
        let r = uniqueness_region(&gelfand2(128), &[0.5, 1.0, 1.5], 20, 11).unwrap();
        assert!(r.entries.iter().all(|e| e.count == 2), "{r:?}");
        assert_eq!(r.unique_up_to, None);
    }

    #[test]
    fn fold_collapse_gelfand() {
        let r = extremal_uniqueness_probe(&gelfand2(128), 0.5, &[1e-2, 1e-3, 1e-4], 2).unwrap();
        assert!((r.exponent - 0.5).abs() < 0.05, "{r:?}");
        assert!(r.single_cluster, "{r:?}");
        // gap ~ 4 sqrt(delta) from the closed-form family
        let s = &r.samples[2];
        assert!((s.center_gap / (4.0 * s.delta.sqrt()) - 1.0).abs() < 0.1, "{s:?}");
    }

    #[test]
    fn fold_collapse_mems() {
        let spec =
            ProblemSpec::new(Order::Second, Nonlinearity::mems(2.0).unwrap(), RadialGrid::new(2, 128).unwrap()).unwrap();
        let r = extremal_uniqueness_probe(&spec, 0.1, &[1e-2, 1e-3, 1e-4], 2).unwrap();
        assert!((r.exponent - 0.5).abs() < 0.05, "{r:?}");
        assert!(r.single_cluster);
    }

    #[test]
    fn system_small_parameters_unique() {
        let spec = SystemSpec::new(Nonlinearity::exp(), Nonlinearity::exp(), RadialGrid::new(3, 64).unwrap());
        let p = spec.ray(0.5).unwrap();
        let s = system_search(&p, 0.04, 10, 1).unwrap();
        assert_eq!(s.count(), 1, "{:?}", s.solutions.iter().map(|x| x.center).collect::<Vec<_>>());
        assert_eq!(s.gamma, Some(0.02));
    }
}
