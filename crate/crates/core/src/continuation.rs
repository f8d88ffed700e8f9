//! Pseudo-arclength continuation in `(x, lambda)` with fold detection.
//!
//! Arclength is measured in `|(z, mu)|^2 = <z, z>_W / sum W + mu^2`, so
//! the field's weighted mean square and `lambda` carry equal weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::newton::NewtonOptions;
use crate::problem::DiscreteProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    /// Initial step.
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub newton: NewtonOptions,
    pub max_corrector_iters: usize,
    /// Stop once the solution's sup exceeds this.
    pub sup_cap: f64,
    /// Reject steps whose tangent turns by more than `acos(min_cos)`.
    pub min_cos: f64,
    pub refine_folds: bool,
    /// Stop once neighbouring nodal values differ by more than this: the
    /// grid no longer resolves the solution.
    pub max_jump: f64,
}

impl ContinuationOptions {
    pub fn new(ds: f64, max_steps: usize) -> Self {
        Self {
            ds,
            ds_min: ds * 1e-8,
            ds_max: ds * 200.0,
            max_steps,
            newton: NewtonOptions::default(),
            max_corrector_iters: 10,
            sup_cap: f64::INFINITY,
            min_cos: 0.95,
            refine_folds: true,
            max_jump: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    StepBudget,
    LambdaNonPositive,
    SupCap,
    StepUnderflow,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationPoint {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub arclength: f64,
    pub newton_iters: usize,
    pub residual: f64,
    /// `dlambda/ds` on the oriented unit tangent.
    pub tangent_lambda: f64,
    /// Set on points inserted by fold refinement.
    pub is_fold: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationRun {
    pub points: Vec<ContinuationPoint>,
    /// Indices into `points` of refined turning points, in order.
    pub folds: Vec<usize>,
    pub termination: Termination,
}

struct Geometry<'a, P: DiscreteProblem + ?Sized> {
    p: &'a P,
    total_w: f64,
}

#[derive(Clone)]
struct Tangent {
    x: Vec<f64>,
    lambda: f64,
}

impl<'a, P: DiscreteProblem + ?Sized> Geometry<'a, P> {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.p.inner(a, b) / self.total_w
    }

    fn tangent_dot(&self, a: &Tangent, b: &Tangent) -> f64 {
        self.dot(&a.x, &b.x) + a.lambda * b.lambda
    }

    /// Unit tangent at a solution point, oriented along `prev` (or with
    /// increasing `lambda` when there is none).
    fn tangent(&self, x: &[f64], lambda: f64, prev: Option<&Tangent>) -> Result<Tangent> {
        let j = self.p.jacobian(x, lambda);
        let gl: Vec<f64> = self.p.d_lambda(x, lambda).iter().map(|v| -v).collect();
        let z = j.solve(&gl)?;
        let norm = (self.dot(&z, &z) + 1.0).sqrt();
        let mut t = Tangent { x: z.iter().map(|v| v / norm).collect(), lambda: 1.0 / norm };
        let flip = match prev {
            Some(pt) => self.tangent_dot(&t, pt) < 0.0,
            None => false,
        };
        if flip {
            t.x.iter_mut().for_each(|v| *v = -*v);
            t.lambda = -t.lambda;
        }
        Ok(t)
    }

    /// Bordered Newton corrector on `G = 0`, `<t, (x - xp, lambda - lp)> = 0`.
    fn correct(
        &self,
        xp: &[f64],
        lp: f64,
        t: &Tangent,
        opts: &ContinuationOptions,
    ) -> Result<(Vec<f64>, f64, usize, f64)> {
        let mut x = xp.to_vec();
        let mut lambda = lp;
        for it in 0..=opts.max_corrector_iters {
            if !self.p.admissible(&x) {
                return Err(Error::DomainExit { max_u: self.p.sup(&x) });
            }
            let g = self.p.residual(&x, lambda);
            let res = self.p.scaled_residual_norm(&g);
            if !res.is_finite() {
                return Err(Error::NonConvergence { iters: it, residual: res });
            }
            let dx: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
            let nres = self.dot(&t.x, &dx) + t.lambda * (lambda - lp);
            if res <= opts.newton.tol && it > 0 {
                return Ok((x, lambda, it, res));
            }
            if it == opts.max_corrector_iters {
                return Err(Error::NonConvergence { iters: it, residual: res });
            }
            let lu = self.p.jacobian(&x, lambda).factor()?;
            let a = lu.solve(&g.iter().map(|v| -v).collect::<Vec<_>>());
            let b = lu.solve(&self.p.d_lambda(&x, lambda).iter().map(|v| -v).collect::<Vec<_>>());
            let denom = self.dot(&t.x, &b) + t.lambda;
            if denom.abs() < 1e-300 {
                return Err(Error::NonConvergence { iters: it, residual: res });
            }
            let dl = (-nres - self.dot(&t.x, &a)) / denom;
            for i in 0..x.len() {
                x[i] += a[i] + dl * b[i];
            }
            lambda += dl;
        }
        unreachable!()
    }
}

/// Continues the solution `x0` at `lambda0` (already converged) for up to
/// `opts.max_steps` accepted steps.
pub fn continuation<P: DiscreteProblem + ?Sized>(
    p: &P,
    x0: Vec<f64>,
    lambda0: f64,
    opts: &ContinuationOptions,
) -> Result<ContinuationRun> {
    if !(opts.ds > 0.0) {
        return Err(Error::InvalidInput(format!("continuation step must be positive, got {}", opts.ds)));
    }
    let geo = Geometry { p, total_w: p.weights().iter().sum() };
    let r0 = p.residual(&x0, lambda0);
    let mut t = geo.tangent(&x0, lambda0, None)?;
    let mut points = vec![ContinuationPoint {
        x: x0,
        lambda: lambda0,
        arclength: 0.0,
        newton_iters: 0,
        residual: p.scaled_residual_norm(&r0),
        tangent_lambda: t.lambda,
        is_fold: false,
    }];
    let mut folds = Vec::new();
    let mut ds = opts.ds;
    let mut accepted = 0;
    let termination = loop {
        if accepted >= opts.max_steps {
            break Termination::StepBudget;
        }
        let cur = points.last().unwrap().clone();
        let xp: Vec<f64> = cur.x.iter().zip(&t.x).map(|(a, b)| a + ds * b).collect();
        let lp = cur.lambda + ds * t.lambda;
        let attempt = geo.correct(&xp, lp, &t, opts).and_then(|(x, l, its, res)| {
            let tn = geo.tangent(&x, l, Some(&t))?;
            Ok((x, l, its, res, tn))
        });
        let (x, l, its, res, tn) = match attempt {
            Ok(v) if geo.tangent_dot(&v.4, &t) >= opts.min_cos => v,
            Ok(_) | Err(Error::NonConvergence { .. }) | Err(Error::DomainExit { .. }) | Err(Error::SingularMatrix(_)) => {
                ds *= 0.5;
                if ds < opts.ds_min {
                    if accepted == 0 {
                        return Err(Error::StepFailure { lambda: cur.lambda });
                    }
                    break Termination::StepUnderflow;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        if l <= 0.0 {
            break Termination::LambdaNonPositive;
        }
        if t.lambda * tn.lambda < 0.0 && opts.refine_folds {
            if let Some(fp) = refine_fold(&geo, &cur, &t, ds, opts) {
                folds.push(points.len());
                points.push(fp);
            }
        } else if t.lambda * tn.lambda < 0.0 {
            folds.push(points.len());
        }
        accepted += 1;
        let sup = p.sup(&x);
        points.push(ContinuationPoint {
            x,
            lambda: l,
            arclength: cur.arclength + ds,
            newton_iters: its,
            residual: res,
            tangent_lambda: tn.lambda,
            is_fold: false,
        });
        t = tn;
        if sup > opts.sup_cap {
            break Termination::SupCap;
        }
        if p.max_jump(&points.last().unwrap().x) > opts.max_jump {
            break Termination::Unresolved;
        }
        if its <= 3 {
            ds = (ds * 1.5).min(opts.ds_max);
        } else if its >= 6 {
            ds *= 0.7;
        }
    };
    Ok(ContinuationRun { points, folds, termination })
}

/// Solves `G(x, lambda) = 0` on the hyperplane through `(x_pred, lambda_pred)`
/// orthogonal to `(dir_x, dir_lambda)` in the arclength inner product.
/// Returns the solution, its `lambda`, the iteration count and the scaled
/// residual.
pub fn correct_on_hyperplane<P: DiscreteProblem + ?Sized>(
    p: &P,
    x_pred: &[f64],
    lambda_pred: f64,
    dir_x: &[f64],
    dir_lambda: f64,
    opts: &ContinuationOptions,
) -> Result<(Vec<f64>, f64, usize, f64)> {
    let geo = Geometry { p, total_w: p.weights().iter().sum() };
    let t = Tangent { x: dir_x.to_vec(), lambda: dir_lambda };
    geo.correct(x_pred, lambda_pred, &t, opts)
}

/// Bisection in the arclength offset for the zero of `dlambda/ds` between
/// `cur` and the step of length `ds` along `t`.
fn refine_fold<P: DiscreteProblem + ?Sized>(
    geo: &Geometry<'_, P>,
    cur: &ContinuationPoint,
    t: &Tangent,
    ds: f64,
    opts: &ContinuationOptions,
) -> Option<ContinuationPoint> {
    let solve_at = |s: f64| -> Option<(Vec<f64>, f64, usize, f64, Tangent)> {
        let xp: Vec<f64> = cur.x.iter().zip(&t.x).map(|(a, b)| a + s * b).collect();
        let lp = cur.lambda + s * t.lambda;
        let mut o = *opts;
        o.max_corrector_iters = 25;
        let (x, l, its, res) = geo.correct(&xp, lp, t, &o).ok()?;
        let tn = geo.tangent(&x, l, Some(t)).ok()?;
        Some((x, l, its, res, tn))
    };
    let sign0 = t.lambda.signum();
    let (mut lo, mut hi) = (0.0, ds);
    let mut best = None;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let Some(sol) = solve_at(mid) else { break };
        if sol.4.lambda.signum() == sign0 {
            lo = mid;
        } else {
            hi = mid;
        }
        best = Some((mid, sol));
        if hi - lo <= 1e-13 * (1.0 + ds) {
            break;
        }
    }
    let (s, (x, l, its, res, tn)) = best?;
    Some(ContinuationPoint {
        x,
        lambda: l,
        arclength: cur.arclength + s,
        newton_iters: its,
        residual: res,
        tangent_lambda: tn.lambda,
        is_fold: true,
    })
}
