//! Discrete nonlinear problems `G(x, lambda) = 0` shared by the Newton,
//! eigenvalue and continuation drivers.

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::nonlinearity::{ClassTag, Nonlinearity};
use crate::operators::{bilaplacian, laplacian, FourthOrderBc, OperatorMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    /// `-Lap u = lambda f(u)`, `u = 0` on the boundary.
    Second,
    /// `Lap^2 u = lambda f(u)`, `u = Lap u = 0`.
    FourthNavier,
    /// `Lap^2 u = lambda f(u)`, `u = du/dr = 0`.
    FourthDirichlet,
}

impl Order {
    pub fn degree(self) -> i32 {
        match self {
            Order::Second => 2,
            _ => 4,
        }
    }
}

/// A scalar problem on a radial grid.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    order: Order,
    nl: Nonlinearity,
    grid: RadialGrid,
    op: OperatorMatrix,
}

impl ProblemSpec {
    pub fn new(order: Order, nl: Nonlinearity, grid: RadialGrid) -> Result<Self> {
        let op = match order {
            Order::Second => laplacian(&grid),
            Order::FourthNavier => bilaplacian(&grid, FourthOrderBc::Navier)?,
            Order::FourthDirichlet => bilaplacian(&grid, FourthOrderBc::Dirichlet4)?,
        };
        Ok(Self { order, nl, grid, op })
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn nl(&self) -> &Nonlinearity {
        &self.nl
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

    /// Same problem on another grid.
    pub fn with_grid(&self, grid: RadialGrid) -> Result<Self> {
        Self::new(self.order, self.nl.clone(), grid)
    }

    /// Divergence cap for the monotone iteration.
    pub fn blow_up_cap(&self) -> f64 {
        match self.nl.class_tag() {
            ClassTag::R => 1e6,
            ClassTag::S => 1.0 - 1e-9,
        }
    }
}

/// `G(x, lambda) = 0` on `size()` unknowns with a banded Jacobian that is
/// self-adjoint in the inner product given by `weights()`.
pub trait DiscreteProblem: Sync {
    fn size(&self) -> usize;
    fn residual(&self, x: &[f64], lambda: f64) -> Vec<f64>;
    /// `dG/dlambda`.
    fn d_lambda(&self, x: &[f64], lambda: f64) -> Vec<f64>;
    fn jacobian(&self, x: &[f64], lambda: f64) -> BandMatrix;
    fn weights(&self) -> &[f64];
    /// Whether `x` lies in the nonlinearity's domain.
    fn admissible(&self, x: &[f64]) -> bool;
    /// Multiplier turning the residual into an O(1) quantity (`h^order`).
    fn residual_scale(&self) -> f64;
    /// Largest nodal value of the (first) solution component.
    fn sup(&self, x: &[f64]) -> f64;
    /// Largest jump between neighbouring nodes of any solution component.
    fn max_jump(&self, x: &[f64]) -> f64;
    /// Lower bound for the smallest eigenvalue of the Jacobian.
    fn spectrum_lower_bound(&self, x: &[f64], lambda: f64) -> f64;

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights().iter().zip(a).zip(b).map(|((w, p), q)| w * p * q).sum()
    }

    fn scaled_residual_norm(&self, r: &[f64]) -> f64 {
        self.residual_scale() * r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl DiscreteProblem for ProblemSpec {
    fn size(&self) -> usize {
        self.grid.unknowns()
    }

    fn residual(&self, x: &[f64], lambda: f64) -> Vec<f64> {
        let mut r = self.op.apply(x);
        for (ri, &xi) in r.iter_mut().zip(x) {
            *ri -= lambda * self.nl.f(xi);
        }
        r
    }

    fn d_lambda(&self, x: &[f64], _lambda: f64) -> Vec<f64> {
        x.iter().map(|&v| -self.nl.f(v)).collect()
    }

    fn jacobian(&self, x: &[f64], lambda: f64) -> BandMatrix {
        let mut j = self.op.band().clone();
        let d: Vec<f64> = x.iter().map(|&v| -lambda * self.nl.fprime(v)).collect();
        j.add_diagonal(&d);
        j
    }

    fn weights(&self) -> &[f64] {
        self.op.weights()
    }

    fn admissible(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| self.nl.in_domain(v))
    }

    fn residual_scale(&self) -> f64 {
        self.grid.h().powi(self.order.degree())
    }

    fn sup(&self, x: &[f64]) -> f64 {
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn max_jump(&self, x: &[f64]) -> f64 {
        let mut m = x[x.len() - 1].abs();
        for w in x.windows(2) {
            m = m.max((w[1] - w[0]).abs());
        }
        m
    }

    fn spectrum_lower_bound(&self, x: &[f64], lambda: f64) -> f64 {
        let fmax = x.iter().fold(0.0f64, |m, &v| m.max(self.nl.fprime(v)));
        -lambda * fmax - 1.0
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")))
    }
}
