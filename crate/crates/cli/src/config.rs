//! Run configuration: defaults, overridden by a config file (flat
//! `key=value` lines or a flat JSON object), overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use extremal_core::Nonlinearity;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Q,
    Navier,
    Dirichlet,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub nl: String,
    /// Second nonlinearity of a system; `nl` when absent.
    pub nl_g: Option<String>,
    pub dim: usize,
    pub grid: usize,
    pub lambda: Option<f64>,
    pub lambda_init: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub sigma: f64,
    pub sigmas: Vec<f64>,
    /// Continuation step; 0 picks the default.
    pub ds: f64,
    pub steps: usize,
    pub tol: f64,
    pub seed: u64,
    pub starts: usize,
    pub deltas: Vec<f64>,
    /// Run the fold-collapse probe instead of a search.
    pub collapse: bool,
    pub sigma_conv: f64,
    pub c_sigma: Option<f64>,
    pub nine_c: Option<f64>,
    pub eps: f64,
    /// Fixes mu for the k search instead of using the fitted one.
    pub mu: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub plot: Option<PathBuf>,
}

pub const KEYS: &[&str] = &[
    "problem",
    "nl",
    "nl_g",
    "dim",
    "grid",
    "lambda",
    "lambda_init",
    "lambdas",
    "sigma",
    "sigmas",
    "ds",
    "steps",
    "tol",
    "seed",
    "starts",
    "deltas",
    "collapse",
    "sigma_conv",
    "c_sigma",
    "nine_c",
    "eps",
    "mu",
    "output",
    "format",
    "plot",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Q,
            nl: "exp".into(),
            nl_g: None,
            dim: 2,
            grid: 128,
            lambda: None,
            lambda_init: None,
            lambdas: None,
            sigma: 1.0,
            sigmas: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            ds: 0.0,
            steps: 300,
            tol: 1e-13,
            seed: 1,
            starts: 20,
            deltas: vec![1e-2, 1e-3, 1e-4],
            collapse: false,
            sigma_conv: 0.9,
            c_sigma: None,
            nine_c: None,
            eps: 1.0,
            mu: None,
            output: None,
            format: Format::Csv,
            plot: None,
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key} = `{value}`: {why}"))
}

fn real(key: &str, v: &str) -> Result<f64, CliError> {
    let x: f64 = v.trim().parse().map_err(|e| bad(key, v, e))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, v, "not finite"))
    }
}

fn list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    let items: Result<Vec<f64>, CliError> =
        v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| real(key, s)).collect();
    let items = items?;
    if items.is_empty() {
        return Err(bad(key, v, "empty list"));
    }
    Ok(items)
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let int = |v: &str| v.trim().parse::<usize>().map_err(|e| bad(key, v, e));
        match key {
            "problem" => {
                self.problem = match v.trim().to_ascii_lowercase().as_str() {
                    "q" => ProblemKind::Q,
                    "navier" => ProblemKind::Navier,
                    "dirichlet" => ProblemKind::Dirichlet,
                    "system" => ProblemKind::System,
                    _ => return Err(bad(key, v, "expected q, navier, dirichlet or system")),
                }
            }
            "nl" => self.nl = v.trim().to_string(),
            "nl_g" => self.nl_g = Some(v.trim().to_string()),
            "dim" => self.dim = int(v)?,
            "grid" => self.grid = int(v)?,
            "lambda" => self.lambda = Some(real(key, v)?),
            "lambda_init" => self.lambda_init = Some(real(key, v)?),
            "lambdas" => self.lambdas = Some(list(key, v)?),
            "sigma" => self.sigma = real(key, v)?,
            "sigmas" => self.sigmas = list(key, v)?,
            "ds" => self.ds = real(key, v)?,
            "steps" => self.steps = int(v)?,
            "tol" => self.tol = real(key, v)?,
            "seed" => self.seed = v.trim().parse().map_err(|e| bad(key, v, e))?,
            "starts" => self.starts = int(v)?,
            "deltas" => self.deltas = list(key, v)?,
            "collapse" => self.collapse = v.trim().parse().map_err(|e| bad(key, v, e))?,
            "sigma_conv" => self.sigma_conv = real(key, v)?,
            "c_sigma" => self.c_sigma = Some(real(key, v)?),
            "nine_c" => self.nine_c = Some(real(key, v)?),
            "eps" => self.eps = real(key, v)?,
            "mu" => self.mu = Some(real(key, v)?),
            "output" => self.output = Some(PathBuf::from(v.trim())),
            "plot" => self.plot = Some(PathBuf::from(v.trim())),
            "format" => {
                self.format = match v.trim() {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad(key, v, "expected csv or json")),
                }
            }
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Defaults, then `file`, then `flags` in order.
    pub fn resolve(file: Option<&Path>, flags: &[(&str, String)]) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
            for (k, v) in parse_file(&text)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in flags {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.dim == 0 {
            return Err(CliError::Config("dim must be at least 1".into()));
        }
        if self.grid < 16 {
            return Err(CliError::Config("grid must be at least 16".into()));
        }
        self.nonlinearity()?;
        self.nonlinearity_g()?;
        if self.lambda.is_some_and(|l| l < 0.0) || self.lambda_init.is_some_and(|l| l <= 0.0) {
            return Err(CliError::Config("lambda must be >= 0 and lambda_init > 0".into()));
        }
        if !(self.sigma > 0.0) || self.sigmas.iter().any(|&s| !(s > 0.0)) {
            return Err(CliError::Config("sigma values must be positive".into()));
        }
        if self.ds < 0.0 || !(self.tol > 0.0) {
            return Err(CliError::Config("ds must be >= 0 and tol > 0".into()));
        }
        if self.starts == 0 {
            return Err(CliError::Config("starts must be at least 1".into()));
        }
        if self.deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(CliError::Config("deltas must lie in (0, 1)".into()));
        }
        if !(self.sigma_conv > 0.0 && self.sigma_conv < 1.0) {
            return Err(CliError::Config("sigma_conv must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, CliError> {
        self.nl.parse().map_err(|e: extremal_core::Error| CliError::Config(e.to_string()))
    }

    pub fn nonlinearity_g(&self) -> Result<Nonlinearity, CliError> {
        self.nl_g.as_deref().unwrap_or(&self.nl).parse().map_err(|e: extremal_core::Error| CliError::Config(e.to_string()))
    }

    /// One-line JSON echo of the effective configuration.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Flat `key=value` lines (`#` comments) or a flat JSON object whose values
/// are scalars or arrays of numbers.
pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config JSON: {e}")))?;
        let obj = v.as_object().ok_or_else(|| CliError::Config("config JSON must be an object".into()))?;
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::Array(items) => {
                    let parts: Option<Vec<String>> =
                        items.iter().map(|x| x.as_f64().map(|f| format!("{f:e}"))).collect();
                    parts.ok_or_else(|| CliError::Config(format!("{k}: arrays must hold numbers")))?.join(",")
                }
                _ => return Err(CliError::Config(format!("{k}: unsupported value {v}"))),
            };
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
            out.insert(k.clone(), s);
        }
        return Ok(out);
    }
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", n + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_file_and_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, "# comment\nproblem = navier\ndim=5\ngrid = 64\n").unwrap();
        let cfg = RunConfig::resolve(Some(&p), &[("grid", "96".into())]).unwrap();
        assert_eq!((cfg.problem, cfg.dim, cfg.grid), (ProblemKind::Navier, 5, 96));
        assert_eq!(cfg.steps, 300);
    }

    #[test]
    fn json_file() {
        let m = parse_file(r#"{"problem": "system", "sigmas": [0.5, 2], "dim": 3}"#).unwrap();
        let mut cfg = RunConfig::default();
        for (k, v) in &m {
            cfg.set(k, v).unwrap();
        }
        assert_eq!(cfg.sigmas, vec![0.5, 2.0]);
        assert_eq!(cfg.problem, ProblemKind::System);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse_file("colour = red"), Err(CliError::Config(_))));
        assert!(matches!(parse_file(r#"{"colour": 1}"#), Err(CliError::Config(_))));
        assert!(RunConfig::default().set("colour", "1").is_err());
    }

    #[test]
    fn validation() {
        let bad_nl = RunConfig::resolve(None, &[("nl", "sin".into())]);
        assert!(matches!(bad_nl, Err(CliError::Config(_))));
        assert!(RunConfig::resolve(None, &[("grid", "4".into())]).is_err());
        assert!(RunConfig::resolve(None, &[("nl", "mems:p=2".into())]).is_ok());
    }
}
