//! The six verbs.

use serde::Serialize;
use serde_json::{json, Value};

use extremal_core::branch::{default_lambda_init, fold_cross_check, extrapolated_lambda_star};
use extremal_core::deflation::{
    deflated_search, extremal_uniqueness_probe, system_extremal_probe, system_search, uniqueness_region,
    SolutionSet,
};
use extremal_core::eigen::smallest_eigenpair;
use extremal_core::identity::{
    cal_threshold, default_nine_c, extremal_energy_bound, nine_scan, pohozaev_fourth, system_energy, t_scan,
};
use extremal_core::nonlinearity::{
    classify, find_k, find_mu_r, find_mu_s, hybrid_grid, strict_convexity_check, supercritical_check,
    superlinearity_ratio,
};
use extremal_core::operators::laplacian;
use extremal_core::system::{system_minimal, trace_ray, upsilon_curve};
use extremal_core::{
    continue_branch, minimal_solution, ClassTag, Order, ProblemSpec, RadialGrid, SystemSpec,
};

use crate::config::{Format, ProblemKind, RunConfig};
use crate::output::{emit, to_json, BranchRow, BranchTable, Diagram};
use crate::CliError;

fn grid(cfg: &RunConfig) -> Result<RadialGrid, CliError> {
    Ok(RadialGrid::new(cfg.dim, cfg.grid)?)
}

fn scalar_spec(cfg: &RunConfig) -> Result<ProblemSpec, CliError> {
    let order = match cfg.problem {
        ProblemKind::Q => Order::Second,
        ProblemKind::Navier => Order::FourthNavier,
        ProblemKind::Dirichlet => Order::FourthDirichlet,
        ProblemKind::System => return Err(CliError::Config("expected a scalar problem".into())),
    };
    Ok(ProblemSpec::new(order, cfg.nonlinearity()?, grid(cfg)?)?)
}

fn system_spec(cfg: &RunConfig) -> Result<SystemSpec, CliError> {
    Ok(SystemSpec::new(cfg.nonlinearity()?, cfg.nonlinearity_g()?, grid(cfg)?))
}

fn lambda_init(cfg: &RunConfig, spec: &ProblemSpec) -> Result<f64, CliError> {
    match cfg.lambda_init {
        Some(l) => Ok(l),
        None => Ok(default_lambda_init(spec)?),
    }
}

/// Wraps a report with the effective configuration.
fn document<T: Serialize>(cfg: &RunConfig, verb: &str, report: T) -> Vec<u8> {
    to_json(&json!({ "verb": verb, "config": cfg, "report": report }))
}

fn write_plot(cfg: &RunConfig, d: Diagram<'_>) -> Result<(), CliError> {
    match &cfg.plot {
        Some(p) => crate::output::write_atomic(p, d.to_svg().as_bytes()),
        None => Ok(()),
    }
}

pub fn branch(cfg: &RunConfig) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut fold = None;
    if cfg.steps > 0 {
        if cfg.problem == ProblemKind::System {
            let ray = trace_ray(&system_spec(cfg)?, cfg.sigma, cfg.ds, cfg.steps)?;
            fold = ray.fold.map(|f| (f.lambda_star, ray.points[f.index].u.max()));
            for (i, p) in ray.points.iter().enumerate() {
                rows.push(BranchRow {
                    index: i,
                    lambda: p.lambda,
                    gamma: Some(p.gamma),
                    sigma: Some(p.sigma),
                    arclength: p.arclength,
                    sup_u: p.u.max(),
                    sup_v: Some(p.v.max()),
                    eta1: None,
                    newton_iters: p.newton_iters,
                    residual: p.residual,
                });
            }
        } else {
            let spec = scalar_spec(cfg)?;
            let br = continue_branch(&spec, lambda_init(cfg, &spec)?, cfg.ds, cfg.steps)?;
            fold = br.fold.map(|f| (f.lambda_star, br.points[f.index].sup_norm));
            for (i, p) in br.points.iter().enumerate() {
                rows.push(BranchRow {
                    index: i,
                    lambda: p.lambda,
                    gamma: None,
                    sigma: None,
                    arclength: p.arclength,
                    sup_u: p.sup_norm,
                    sup_v: None,
                    eta1: p.eta1,
                    newton_iters: p.newton_iters,
                    residual: p.residual,
                });
            }
        }
    }
    let bytes = match cfg.format {
        Format::Csv => BranchTable { meta: vec![format!("config {}", cfg.echo())], rows: rows.clone() }.to_csv(),
        Format::Json => document(cfg, "branch", json!({ "rows": rows, "fold_lambda": fold.map(|f| f.0) })),
    };
    emit(cfg.output.as_deref(), &bytes)?;
    write_plot(
        cfg,
        Diagram {
            title: "bifurcation diagram",
            x_label: "lambda",
            y_label: "sup u",
            points: rows.iter().map(|r| (r.lambda, r.sup_u)).collect(),
            marker: fold,
        },
    )
}

pub fn lambda_star(cfg: &RunConfig) -> Result<(), CliError> {
    let report = if cfg.problem == ProblemKind::System {
        let ray = trace_ray(&system_spec(cfg)?, cfg.sigma, cfg.ds, cfg.steps)?;
        let ls = ray.lambda_star().ok_or_else(|| CliError::Solver(format!("no fold ({:?})", ray.termination)))?;
        json!({ "sigma": cfg.sigma, "lambda_star": ls, "gamma_star": cfg.sigma * ls, "termination": ray.termination })
    } else {
        let spec = scalar_spec(cfg)?;
        let l0 = lambda_init(cfg, &spec)?;
        let br = continue_branch(&spec, l0, cfg.ds, cfg.steps)?;
        let check = fold_cross_check(&spec, &br)?;
        let (coarse, fine, extrapolated) = extrapolated_lambda_star(&spec, l0, cfg.steps)?;
        let eta1 = br.fold.and_then(|f| br.points[f.index].eta1);
        json!({
            "lambda_star": check.continuation,
            "bisection": check.bisection,
            "relative_gap": check.relative_gap,
            "diagnostic": check.diagnostic,
            "fold_eta1": eta1,
            "refined": { "coarse": coarse, "fine": fine, "extrapolated": extrapolated },
        })
    };
    emit(cfg.output.as_deref(), &document(cfg, "lambda-star", report))
}

fn set_json(s: &SolutionSet) -> Value {
    json!({
        "parameters": { "lambda": s.lambda, "gamma": s.gamma },
        "count": s.count(),
        "summary": s.summary(),
        "solutions": s.solutions.iter().map(|x| json!({
            "sup_norm": x.sup_norm,
            "center": x.center,
            "eta1": x.eta1,
            "residual": x.residual,
            "weak_residual": x.weak_residual,
        })).collect::<Vec<_>>(),
        "starts": s.starts,
        "seed": s.seed,
        "threshold": s.threshold,
        "unresolved": s.unresolved,
    })
}

pub fn probe(cfg: &RunConfig) -> Result<(), CliError> {
    let lambda = || cfg.lambda.ok_or_else(|| CliError::Config("probe needs lambda (or lambdas)".into()));
    let report = if cfg.problem == ProblemKind::System {
        let p = system_spec(cfg)?.ray(cfg.sigma)?;
        if cfg.collapse {
            serde_json::to_value(system_extremal_probe(&p, &cfg.deltas, cfg.seed)?).expect("serializable")
        } else if let Some(grid) = &cfg.lambdas {
            serde_json::to_value(uniqueness_region(&p, grid, cfg.starts, cfg.seed)?).expect("serializable")
        } else {
            set_json(&system_search(&p, lambda()?, cfg.starts, cfg.seed)?)
        }
    } else {
        let spec = scalar_spec(cfg)?;
        if cfg.collapse {
            let l0 = lambda_init(cfg, &spec)?;
            serde_json::to_value(extremal_uniqueness_probe(&spec, l0, &cfg.deltas, cfg.seed)?).expect("serializable")
        } else if let Some(grid) = &cfg.lambdas {
            serde_json::to_value(uniqueness_region(&spec, grid, cfg.starts, cfg.seed)?).expect("serializable")
        } else {
            set_json(&deflated_search(&spec, lambda()?, cfg.starts, cfg.seed)?)
        }
    };
    emit(cfg.output.as_deref(), &document(cfg, "probe", report))
}

pub fn identities(cfg: &RunConfig) -> Result<(), CliError> {
    let mut items: Vec<Value> = Vec::new();
    let tagged = |kind: &str, v: Value| {
        let mut v = v;
        v["kind"] = json!(kind);
        v
    };
    match cfg.problem {
        ProblemKind::Q => {
            return Err(CliError::Config("identities apply to navier, dirichlet or system problems".into()))
        }
        ProblemKind::System => {
            let spec = system_spec(cfg)?;
            let ray = trace_ray(&spec, cfg.sigma, cfg.ds, cfg.steps)?;
            let second = ray
                .upper_segment()
                .first()
                .cloned()
                .ok_or_else(|| CliError::Solver("no upper-branch point on the ray".into()))?;
            let minimal = system_minimal(&spec, second.lambda, second.gamma, 1_000_000, cfg.tol)?
                .converged()
                .ok_or_else(|| CliError::Solver("minimal pair diverged".into()))?;
            if spec.is_exp_exp() && cfg.sigma <= 1.0 {
                for r in system_energy(&spec, &second, &minimal)? {
                    items.push(tagged("identity", serde_json::to_value(r).expect("serializable")));
                }
                let a = laplacian(spec.grid());
                let l1 = smallest_eigenpair(a.band(), a.weights(), -1.0, 1e-10)?.value;
                let c = cfg.nine_c.unwrap_or_else(|| default_nine_c(cfg.dim, cfg.sigma, l1));
                let lam = cfg.lambda.unwrap_or(second.lambda);
                items.push(tagged("scan", serde_json::to_value(nine_scan(c, lam, cfg.sigma, 5.0, 201)?).expect("serializable")));
                items.push(json!({ "kind": "value", "name": "cal_threshold", "value": cal_threshold() }));
            }
            if cfg.dim >= 3 {
                let eb = extremal_energy_bound(&spec, &ray)?;
                items.push(json!({
                    "kind": "energy_bound",
                    "all_hold": eb.all_hold,
                    "increasing": eb.increasing,
                    "bounded": eb.bounded,
                    "fold_value": eb.fold_value,
                    "points": eb.points,
                }));
            }
        }
        ProblemKind::Navier | ProblemKind::Dirichlet => {
            let spec = scalar_spec(cfg)?;
            let br = continue_branch(&spec, lambda_init(cfg, &spec)?, cfg.ds, cfg.steps)?;
            let fold = br.fold.ok_or_else(|| CliError::Solver(format!("no fold ({:?})", br.termination)))?;
            let second = br
                .points
                .get(fold.index + 1)
                .cloned()
                .ok_or_else(|| CliError::Solver("no upper-branch point".into()))?;
            let minimal = minimal_solution(&spec, second.lambda, 1_000_000, cfg.tol)?
                .converged()
                .ok_or_else(|| CliError::Solver("minimal solution diverged".into()))?;
            let pz = pohozaev_fourth(&spec, &second, &minimal)?;
            items.push(tagged("identity", serde_json::to_value(pz.equality).expect("serializable")));
            items.push(tagged("identity", serde_json::to_value(pz.inequality).expect("serializable")));
            let lam = cfg.lambda.unwrap_or(fold.lambda_star / 100.0);
            let m = minimal_solution(&spec, lam, 1_000_000, cfg.tol)?
                .converged()
                .ok_or_else(|| CliError::Solver(format!("minimal solution diverged at lambda = {lam}")))?;
            let ts = t_scan(&spec, lam, &m, cfg.sigma_conv, cfg.c_sigma, (-5.0, 30.0), 701)?;
            items.push(tagged("scan", serde_json::to_value(&ts.t).expect("serializable")));
            items.push(tagged("scan", serde_json::to_value(&ts.s).expect("serializable")));
            items.push(json!({
                "kind": "t_scan_meta",
                "lambda": lam,
                "epsilon": ts.epsilon,
                "c_sigma": ts.c_sigma,
                "sigma_conv": ts.sigma_conv,
                "domination_violations": ts.domination_violations,
                "warnings": ts.warnings,
            }));
        }
    }
    emit(cfg.output.as_deref(), &document(cfg, "identities", items))
}

pub fn system_curve(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = system_spec(cfg)?;
    let curve = upsilon_curve(&spec, &cfg.sigmas, cfg.ds, cfg.steps);
    let bytes = match cfg.format {
        Format::Csv => {
            let mut out = format!("# config {}\nsigma,lambda_star,gamma_star\n", cfg.echo());
            for p in &curve.points {
                out += &format!(
                    "{},{},{}\n",
                    crate::output::fmt17(p.sigma),
                    crate::output::fmt17(p.lambda_star),
                    crate::output::fmt17(p.gamma_star)
                );
            }
            out.into_bytes()
        }
        Format::Json => document(cfg, "system-curve", &curve),
    };
    emit(cfg.output.as_deref(), &bytes)?;
    let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.lambda_star, p.gamma_star)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    write_plot(cfg, Diagram { title: "critical curve", x_label: "lambda", y_label: "gamma", points: pts, marker: None })?;
    if curve.points.is_empty() {
        return Err(CliError::Solver("no ray reached a fold".into()));
    }
    Ok(())
}

fn err_value<T: Serialize>(r: extremal_core::Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).expect("serializable"),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn lemma_check(cfg: &RunConfig) -> Result<(), CliError> {
    let nl = cfg.nonlinearity()?;
    let mut report = json!({
        "nonlinearity": nl.name(),
        "class": nl.class_tag().to_string(),
        "f0": nl.f(0.0),
        "f0_is_one": (nl.f(0.0) - 1.0).abs() <= 1e-12,
        "log_convex": nl.is_log_convex(),
    });
    match nl.class_tag() {
        ClassTag::R => {
            let samples = hybrid_grid(50.0, 2000);
            report["classification"] = err_value(classify(&nl, &samples));
            let ratios: Vec<Value> = [1.0, 10.0, 100.0, 1000.0]
                .iter()
                .map(|&t| json!({ "t": t, "ratio": err_value(superlinearity_ratio(&nl, t)) }))
                .collect();
            report["superlinearity"] = json!(ratios);
            let mu = find_mu_r(&nl, cfg.eps, &hybrid_grid(1e3, 4000));
            report["mu"] = err_value(mu.clone());
            if let Some(mu) = cfg.mu.or(mu.ok()) {
                report["k"] = json!({ "mu": mu, "n": cfg.dim, "k": err_value(find_k(&nl, mu, cfg.dim)) });
            }
            if cfg.dim >= 5 {
                let tail: Vec<f64> = (0..=40).map(|i| 10f64.powf(1.0 + 2.0 * i as f64 / 40.0)).collect();
                report["supercritical"] = err_value(supercritical_check(&nl, cfg.dim, &tail));
            }
        }
        ClassTag::S => {
            let samples: Vec<f64> = (0..1000).map(|i| 0.999 * i as f64 / 999.0).collect();
            report["classification"] = err_value(classify(&nl, &samples));
            report["strictly_convex"] = json!(strict_convexity_check(&nl, &samples));
            report["mu"] = err_value(find_mu_s(&nl, cfg.eps, &samples));
        }
    }
    report["cal_threshold"] = json!(cal_threshold());
    emit(cfg.output.as_deref(), &document(cfg, "lemma-check", report))
}
