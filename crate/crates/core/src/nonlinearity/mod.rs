//! Nonlinearities `f` of class (R) and (S) and the scalar inequalities they
//! must satisfy.
//!
//! Class (R): `f > 0` on the reals, smooth, increasing, convex, `f(0) = 1`,
//! superlinear at infinity. Class (S): the same on `(-inf, 1)` with
//! `f(1-) = inf`.

mod lemma;

pub use lemma::{
    classify, common_mu_k, find_k, find_mu_r, find_mu_s, hybrid_grid, mu_r_margin,
    mu_s_margin, strict_convexity_check, supercritical_check, supercritical_threshold,
    superlinearity_ratio, Classification, SupercriticalCheck, INEQUALITY_SLACK,
};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Which of the two admissible families a nonlinearity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ClassTag {
    R,
    S,
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassTag::R => write!(f, "R"),
            ClassTag::S => write!(f, "S"),
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Caller-supplied evaluators for a custom nonlinearity.
#[derive(Clone)]
pub struct CustomFns {
    pub f: ScalarFn,
    pub fprime: ScalarFn,
    pub fsecond: ScalarFn,
    /// `F(t) = int_0^t f`, with `F(0) = 0`.
    pub antiderivative: ScalarFn,
}

#[derive(Clone)]
pub enum Kind {
    /// `f(t) = e^t`.
    Exp,
    /// `f(t) = (1 + t)^p` for `t >= 0`, continued below zero by its
    /// second-order Taylor polynomial.
    PowerR { p: f64 },
    /// `f(t) = (1 - t)^(-p)` on `(-inf, 1)`.
    MemsS { p: f64 },
    Custom(Arc<CustomFns>),
}

impl fmt::Debug for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Exp => write!(f, "Exp"),
            Kind::PowerR { p } => write!(f, "PowerR {{ p: {p} }}"),
            Kind::MemsS { p } => write!(f, "MemsS {{ p: {p} }}"),
            Kind::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Nonlinearity {
    kind: Kind,
    class: ClassTag,
    log_convex: bool,
    name: String,
}

impl Nonlinearity {
    pub fn exp() -> Self {
        Self {
            kind: Kind::Exp,
            class: ClassTag::R,
            log_convex: true,
            name: "exp".into(),
        }
    }

    /// `(1+t)^p`, `p > 1`. Not log-convex: `p log(1+t)` is concave.
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("power nonlinearity needs p > 1, got {p}")));
        }
        Ok(Self {
            kind: Kind::PowerR { p },
            class: ClassTag::R,
            log_convex: false,
            name: format!("power:p={p}"),
        })
    }

    /// `(1-t)^(-p)`, `p > 0`; log-convex since `-p log(1-t)` is convex.
    pub fn mems(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("mems nonlinearity needs p > 0, got {p}")));
        }
        Ok(Self {
            kind: Kind::MemsS { p },
            class: ClassTag::S,
            log_convex: true,
            name: format!("mems:p={p}"),
        })
    }

    pub fn custom(name: impl Into<String>, class: ClassTag, log_convex: bool, fns: CustomFns) -> Self {
        Self {
            kind: Kind::Custom(Arc::new(fns)),
            class,
            log_convex,
            name: name.into(),
        }
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn class_tag(&self) -> ClassTag {
        self.class
    }

    pub fn is_log_convex(&self) -> bool {
        self.log_convex
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Supremum of the domain: `+inf` for class (R), `1` for class (S).
    pub fn domain_sup(&self) -> f64 {
        match self.class {
            ClassTag::R => f64::INFINITY,
            ClassTag::S => 1.0,
        }
    }

    pub fn in_domain(&self, t: f64) -> bool {
        t.is_finite() && t < self.domain_sup()
    }

    pub fn check_domain(&self, t: f64) -> Result<()> {
        if self.in_domain(t) {
            Ok(())
        } else {
            Err(Error::Domain { name: self.name.clone(), t })
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Exp => t.exp(),
            Kind::PowerR { p } => {
                if t >= 0.0 {
                    (1.0 + t).powf(*p)
                } else {
                    1.0 + p * t + 0.5 * p * (p - 1.0) * t * t
                }
            }
            Kind::MemsS { p } => (1.0 - t).powf(-p),
            Kind::Custom(c) => (c.f)(t),
        }
    }

    pub fn fprime(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Exp => t.exp(),
            Kind::PowerR { p } => {
                if t >= 0.0 {
                    p * (1.0 + t).powf(p - 1.0)
                } else {
                    p + p * (p - 1.0) * t
                }
            }
            Kind::MemsS { p } => p * (1.0 - t).powf(-p - 1.0),
            Kind::Custom(c) => (c.fprime)(t),
        }
    }

    pub fn fsecond(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Exp => t.exp(),
            Kind::PowerR { p } => {
                if t >= 0.0 {
                    p * (p - 1.0) * (1.0 + t).powf(p - 2.0)
                } else {
                    p * (p - 1.0)
                }
            }
            Kind::MemsS { p } => p * (p + 1.0) * (1.0 - t).powf(-p - 2.0),
            Kind::Custom(c) => (c.fsecond)(t),
        }
    }

    /// `F(t) = int_0^t f(s) ds`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Exp => t.exp_m1(),
            Kind::PowerR { p } => {
                if t >= 0.0 {
                    ((1.0 + t).powf(p + 1.0) - 1.0) / (p + 1.0)
                } else {
                    t + 0.5 * p * t * t + p * (p - 1.0) * t * t * t / 6.0
                }
            }
            Kind::MemsS { p } => {
                if (p - 1.0).abs() < 1e-14 {
                    -(-t).ln_1p()
                } else {
                    // ((1-t)^(1-p) - 1)/(p-1), written with expm1 for small t
                    ((1.0 - p) * (-t).ln_1p()).exp_m1() / (p - 1.0)
                }
            }
            Kind::Custom(c) => (c.antiderivative)(t),
        }
    }

    /// `ln f(t)`, finite where `f` itself would overflow.
    pub fn ln_f(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Exp => t,
            Kind::PowerR { p } if t >= 0.0 => p * t.ln_1p(),
            Kind::MemsS { p } => -p * (-t).ln_1p(),
            _ => self.f(t).ln(),
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    /// Parses `exp`, `power:p=<real>` or `mems:p=<real>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h.trim(), Some(r.trim())),
            None => (s, None),
        };
        let param = |rest: Option<&str>| -> Result<f64> {
            let rest = rest.ok_or_else(|| Error::InvalidInput(format!("`{s}` needs a parameter p=<real>")))?;
            let value = rest
                .strip_prefix("p=")
                .ok_or_else(|| Error::InvalidInput(format!("expected p=<real> in `{s}`")))?;
            value
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad parameter in `{s}`: {e}")))
        };
        match head.to_ascii_lowercase().as_str() {
            "exp" if rest.is_none() => Ok(Nonlinearity::exp()),
            "power" => Nonlinearity::power(param(rest)?),
            "mems" => Nonlinearity::mems(param(rest)?),
            _ => Err(Error::InvalidInput(format!("unknown nonlinearity `{s}`"))),
        }
    }
}
