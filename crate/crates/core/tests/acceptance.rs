//! End-to-end checks run as one target; prints a PASS/FAIL line per check
//! and exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use extremal_core::branch::small_solution;
use extremal_core::deflation::{deflated_search, extremal_uniqueness_probe, system_search};
use extremal_core::identity::{
    cal_threshold, extremal_energy_bound, pohozaev_fourth, seven_identity, three_identity, IdentityReport, Verdict,
};
use extremal_core::nonlinearity::{find_k, find_mu_r, hybrid_grid, mu_r_margin, supercritical_threshold, INEQUALITY_SLACK};
use extremal_core::system::{iv_threshold, trace_ray, upsilon_curve, ORDERING_TOL};
use extremal_core::{
    continue_branch, minimal_solution, Nonlinearity, Order, ProblemSpec, RadialField, RadialGrid, SystemSpec,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scalar(order: Order, n: usize, m: usize) -> ProblemSpec {
    ProblemSpec::new(order, Nonlinearity::exp(), RadialGrid::new(n, m).unwrap()).unwrap()
}

fn exp_exp(n: usize, m: usize) -> SystemSpec {
    SystemSpec::new(Nonlinearity::exp(), Nonlinearity::exp(), RadialGrid::new(n, m).unwrap())
}

fn gelfand_fold(m: usize) -> Result<f64, String> {
    let br = continue_branch(&scalar(Order::Second, 2, m), 0.5, 0.0, 400).map_err(|e| e.to_string())?;
    br.fold.map(|f| f.lambda_star).ok_or_else(|| "no fold".to_string())
}

fn baseline_fold() -> Outcome {
    // the oracle family solves the discrete problem to second order
    let b = 1.0;
    let g = RadialGrid::new(2, 256).unwrap();
    let u = RadialField::from_fn(&g, |r| gelfand2_u(b, r));
    let rows = extremal_core::operators::neg_laplacian_rows(&g, u.values());
    let sub = rows.iter().zip(u.values()).map(|(l, v)| (l - gelfand2_lambda(b) * v.exp()).abs()).fold(0.0, f64::max);
    let ls = gelfand_fold(256)?;
    check((ls - 2.0).abs() <= 1e-2 && sub < 1e-3, format!("lambda* = {ls:.6}, oracle substitution residual {sub:.2e}"))
}

fn order_of_accuracy() -> Outcome {
    let (a, b) = (gelfand_fold(128)?, gelfand_fold(256)?);
    let ratio = (a - 2.0).abs() / (b - 2.0).abs();
    check(ratio >= 3.5, format!("errors {:.3e} -> {:.3e}, ratio {ratio:.3}", a - 2.0, b - 2.0))
}

fn small_lambda_bound() -> Outcome {
    let spec = scalar(Order::FourthDirichlet, 5, 128);
    let mut violations = 0;
    let mut successes = 0;
    for k in 0..10 {
        let lambda = 10f64.powf(-6.0 + 4.0 * k as f64 / 9.0);
        if let Ok(p) = small_solution(&spec, lambda) {
            successes += 1;
            if p.u.sup_abs() > lambda.sqrt() {
                violations += 1;
            }
        }
    }
    check(violations == 0 && successes > 0, format!("{successes}/10 successes, {violations} violations"))
}

fn stability_crossing() -> Outcome {
    let br = continue_branch(&scalar(Order::FourthNavier, 5, 128), 20.0, 0.0, 300).map_err(|e| e.to_string())?;
    let f = br.fold.ok_or("no fold")?;
    let pre = &br.points[..f.index];
    let min_pre = pre.iter().map(|p| p.eta1.unwrap()).fold(f64::INFINITY, f64::min);
    let at = br.points[f.index].eta1.unwrap();
    check(min_pre > 0.0 && at.abs() <= 5e-2, format!("lambda* = {:.4}, min pre-fold eta1 = {min_pre:.3e}, fold eta1 = {at:.3e}", f.lambda_star))
}

fn enumeration() -> Outcome {
    let spec = scalar(Order::Second, 2, 256);
    let mut detail = Vec::new();
    let mut ok = true;
    for lambda in [0.5, 1.0, 1.5] {
        let s = deflated_search(&spec, lambda, 20, 1).map_err(|e| e.to_string())?;
        let (lo, hi) = gelfand2_centers(lambda);
        let c: Vec<f64> = s.solutions.iter().map(|x| x.center).collect();
        ok &= c.len() == 2 && (c[0] - lo).abs() <= 5e-3 && (c[1] - hi).abs() <= 5e-3;
        detail.push(format!("lambda {lambda}: {c:.4?} vs ({lo:.4}, {hi:.4})"));
    }
    check(ok, detail.join("; "))
}

fn small_lambda_uniqueness() -> Outcome {
    let spec = scalar(Order::FourthNavier, 5, 128);
    let ls = continue_branch(&spec, 20.0, 0.0, 300).map_err(|e| e.to_string())?.fold.ok_or("no fold")?.lambda_star;
    let s = deflated_search(&spec, ls / 100.0, 20, 1).map_err(|e| e.to_string())?;
    let mut counts = vec![format!("navier {}", s.count())];
    let mut ok = s.count() == 1;
    let sys = exp_exp(3, 128);
    for sigma in [0.25, 0.5, 1.0] {
        let ray = trace_ray(&sys, sigma, 0.0, 300).map_err(|e| e.to_string())?;
        let ls = ray.lambda_star().ok_or("no fold on ray")?;
        let p = sys.ray(sigma).map_err(|e| e.to_string())?;
        let s = system_search(&p, ls / 100.0, 20, 1).map_err(|e| e.to_string())?;
        ok &= s.count() == 1;
        counts.push(format!("sigma {sigma}: {}", s.count()));
    }
    check(ok, counts.join(", "))
}

fn orderings() -> Outcome {
    let sys = exp_exp(3, 128);
    let mut detail = Vec::new();
    let mut ok = true;
    for sigma in [0.25, 0.5, 1.0] {
        let ray = trace_ray(&sys, sigma, 0.0, 300).map_err(|e| e.to_string())?;
        let th = iv_threshold(&sys, &ray, 30).map_err(|e| e.to_string())?;
        let worst = th.pairs.iter().map(|p| p.report.max_violation[..3].iter().cloned().fold(f64::MIN, f64::max)).fold(f64::MIN, f64::max);
        let first3 = th.pairs.iter().all(|p| p.report.holds[..3].iter().all(|&h| h));
        let iv = match th.threshold {
            Some(t) => th.pairs.iter().filter(|p| p.lambda < t).all(|p| p.report.holds[3]),
            None => false,
        };
        ok &= first3 && worst <= ORDERING_TOL && iv && !th.pairs.is_empty();
        detail.push(format!("sigma {sigma}: {} pairs, i-iii worst {worst:.1e}, iv below {:?}", th.pairs.len(), th.threshold));
    }
    check(ok, detail.join("; "))
}

fn identity_residuals() -> Outcome {
    let order = |f: &dyn Fn(usize) -> IdentityReport| {
        let (a, b) = (f(63), f(127));
        ((a.residual / b.residual).abs().log2(), b.verdict == Verdict::Pass)
    };
    let three = order(&|m| {
        let g = RadialGrid::new(3, m).unwrap();
        let u = RadialField::from_fn(&g, |r| (1.0 - r * r) * (1.0 + r.powi(3)));
        let v = RadialField::from_fn(&g, |r| (1.0 - r * r).powi(2) + (1.0 - r).sin());
        three_identity(&u, &v)
    });
    let seven = order(&|m| {
        let g = RadialGrid::new(3, m).unwrap();
        let u = RadialField::from_fn(&g, |r| 1.0 - r.powi(4));
        let v = RadialField::from_fn(&g, |r| (1.0 - r * r) * (2.0 + r).cos());
        let rhs: Vec<f64> = g.nodes().iter().map(|r| 20.0 * r * r).collect();
        seven_identity(&rhs, &u, &v)
    });
    let spec = scalar(Order::FourthNavier, 5, 128);
    let br = continue_branch(&spec, 20.0, 0.0, 300).map_err(|e| e.to_string())?;
    let f = br.fold.ok_or("no fold")?;
    let mut pairs = 0;
    let mut pass = 0;
    for p in &br.points[f.index + 1..] {
        let Some(m) = minimal_solution(&spec, p.lambda, 1_000_000, 1e-13).map_err(|e| e.to_string())?.converged() else {
            continue;
        };
        pairs += 1;
        if pohozaev_fourth(&spec, p, &m).map_err(|e| e.to_string())?.inequality.verdict == Verdict::Pass {
            pass += 1;
        }
    }
    check(
        three.0 >= 1.9 && three.1 && seven.0 >= 1.9 && seven.1 && pairs > 0 && pass == pairs,
        format!("three order {:.2}, seven order {:.2}, pohozaev inequality {pass}/{pairs}", three.0, seven.0),
    )
}

fn lemma_suite() -> Outcome {
    let nl = Nonlinearity::exp();
    let mu = find_mu_r(&nl, 1.0, &hybrid_grid(1e3, 4000)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let fresh_fail = (0..10_000)
        .filter(|_| mu_r_margin(&nl, mu, 1.0, rng.random_range(0.0..1e3)) < -INEQUALITY_SLACK)
        .count();
    let k = find_k(&nl, 0.5, 3).map_err(|e| e.to_string())?;
    let th = supercritical_threshold(5).map_err(|e| e.to_string())?;
    let t0 = cal_threshold();
    check(
        fresh_fail == 0 && (k - 2.25).abs() <= 1e-6 && th == 10.0 && (t0 - 1.0).abs() <= 1e-3,
        format!("mu = {mu:.6} ({fresh_fail} fresh failures), k = {k:.9}, threshold = {th}, t0 = {t0}"),
    )
}

fn upsilon_consistency() -> Outcome {
    let sys = exp_exp(3, 128);
    let grid = [0.25, 0.5, 1.0, 2.0, 4.0];
    let curve = upsilon_curve(&sys, &grid, 0.0, 300);
    let ls = |s: f64| curve.points.iter().find(|p| p.sigma == s).map(|p| p.lambda_star);
    let mut worst = 0.0f64;
    for s in [0.25, 0.5, 2.0, 4.0] {
        let (a, b) = (ls(1.0 / s).ok_or("missing ray")?, ls(s).ok_or("missing ray")?);
        worst = worst.max((a - s * b).abs() / a);
    }
    let oracle = shooting_lambda_star(3);
    let diag = ls(1.0).ok_or("missing ray")?;
    check(
        worst <= 2e-2 && (diag - oracle).abs() <= 1e-2 && curve.separates,
        format!("swap asymmetry {worst:.2e}, sigma=1: {diag:.5} vs oracle {oracle:.5}, separates {}", curve.separates),
    )
}

fn fold_collapse() -> Outcome {
    let r = extremal_uniqueness_probe(&scalar(Order::Second, 2, 256), 0.5, &[1e-2, 1e-3, 1e-4], 3)
        .map_err(|e| e.to_string())?;
    check(
        (r.exponent - 0.5).abs() <= 0.05 && r.single_cluster,
        format!("exponent {:.4}, fold cluster {} roots, diameter {:.1e}", r.exponent, r.fold_roots, r.fold_cluster_diameter),
    )
}

fn energy_bound() -> Outcome {
    let sys = exp_exp(3, 128);
    let ray = trace_ray(&sys, 1.0, 0.0, 300).map_err(|e| e.to_string())?;
    let rep = extremal_energy_bound(&sys, &ray).map_err(|e| e.to_string())?;
    let min_margin = rep.points.iter().map(|p| p.rhs - p.lhs).fold(f64::INFINITY, f64::min);
    check(
        rep.all_hold && rep.bounded && rep.increasing,
        format!("{} points, min margin {min_margin:.3e}, fold value {:?}", rep.points.len(), rep.fold_value),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, u64); 12] = [
        ("baseline fold", baseline_fold, 10),
        ("order of accuracy", order_of_accuracy, 30),
        ("small-lambda sup bound", small_lambda_bound, 20),
        ("stability crossing", stability_crossing, 60),
        ("oracle-complete enumeration", enumeration, 60),
        ("small-parameter uniqueness", small_lambda_uniqueness, 180),
        ("pointwise orderings", orderings, 120),
        ("identity residuals", identity_residuals, 60),
        ("lemma suite", lemma_suite, 5),
        ("critical curve consistency", upsilon_consistency, 180),
        ("fold collapse", fold_collapse, 60),
        ("extremal energy bound", energy_bound, 60),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = f();
        let el = t.elapsed();
        let slow = el > Duration::from_secs(*budget);
        let (tag, detail) = match &out {
            Ok(d) if !slow => ("PASS", d.clone()),
            Ok(d) => ("FAIL", format!("{d} (over the {budget} s budget)")),
            Err(d) => ("FAIL", d.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} {:>2} {name}: {detail} [{:.1} s]", i + 1, el.as_secs_f64());
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
