//! Command-line front end: configuration, dispatch and output.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<extremal_core::Error> for CliError {
    fn from(e: extremal_core::Error) -> Self {
        use extremal_core::Error as E;
        match e {
            E::InvalidInput(_) | E::Domain { .. } | E::WrongClass { .. } | E::NotLogConvex => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "extremal", version, about = "Continuation and verification for Gelfand-type problems on the unit ball")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Trace a solution branch and write it as CSV (or JSON).
    Branch(Flags),
    /// Locate the extremal parameter and cross-check it.
    LambdaStar(Flags),
    /// Enumerate solutions by deflated Newton.
    Probe(Flags),
    /// Evaluate the integral identities and scans on a computed pair.
    Identities(Flags),
    /// Trace the critical curve of the system over a slope grid.
    SystemCurve(Flags),
    /// Check the scalar inequalities of a nonlinearity.
    LemmaCheck(Flags),
}

/// Every configuration key as a flag; values are validated like file
/// entries.
#[derive(Debug, Args, Default)]
pub struct Flags {
    /// Config file: flat key=value lines or a flat JSON object.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// q, navier, dirichlet or system.
    #[arg(long)]
    pub problem: Option<String>,
    /// exp, power:p=<real> or mems:p=<real>.
    #[arg(long)]
    pub nl: Option<String>,
    #[arg(long)]
    pub nl_g: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    /// Interior grid size M.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub lambda_init: Option<String>,
    /// Comma-separated lambda grid.
    #[arg(long)]
    pub lambdas: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    /// Comma-separated slope grid.
    #[arg(long)]
    pub sigmas: Option<String>,
    #[arg(long)]
    pub ds: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub starts: Option<String>,
    #[arg(long)]
    pub deltas: Option<String>,
    #[arg(long)]
    pub collapse: Option<String>,
    #[arg(long)]
    pub sigma_conv: Option<String>,
    #[arg(long)]
    pub c_sigma: Option<String>,
    #[arg(long)]
    pub nine_c: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub output: Option<String>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// SVG diagram path.
    #[arg(long)]
    pub plot: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let all: [(&'static str, &Option<String>); 25] = [
            ("problem", &self.problem),
            ("nl", &self.nl),
            ("nl_g", &self.nl_g),
            ("dim", &self.dim),
            ("grid", &self.grid),
            ("lambda", &self.lambda),
            ("lambda_init", &self.lambda_init),
            ("lambdas", &self.lambdas),
            ("sigma", &self.sigma),
            ("sigmas", &self.sigmas),
            ("ds", &self.ds),
            ("steps", &self.steps),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("starts", &self.starts),
            ("deltas", &self.deltas),
            ("collapse", &self.collapse),
            ("sigma_conv", &self.sigma_conv),
            ("c_sigma", &self.c_sigma),
            ("nine_c", &self.nine_c),
            ("eps", &self.eps),
            ("mu", &self.mu),
            ("output", &self.output),
            ("format", &self.format),
            ("plot", &self.plot),
        ];
        all.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k, v))).collect()
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        RunConfig::resolve(self.config.as_deref(), &self.pairs())
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (flags, f): (&Flags, fn(&RunConfig) -> Result<(), CliError>) = match &cli.verb {
        Verb::Branch(x) => (x, commands::branch),
        Verb::LambdaStar(x) => (x, commands::lambda_star),
        Verb::Probe(x) => (x, commands::probe),
        Verb::Identities(x) => (x, commands::identities),
        Verb::SystemCurve(x) => (x, commands::system_curve),
        Verb::LemmaCheck(x) => (x, commands::lemma_check),
    };
    let cfg = flags.resolve()?;
    f(&cfg)
}
