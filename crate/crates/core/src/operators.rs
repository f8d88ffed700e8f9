//! Finite-volume discretizations of `-Lap` and `Lap^2` for radial functions.
//!
//! `(A u)_i = -[f_i (u_(i+1) - u_i) - f_(i-1) (u_i - u_(i-1))] / (h W_i)`
//! with `f_i = r_(i+1/2)^(N-1)` and `u_(M+1) = 0`. At the center this is
//! `-2N (u_1 - u_0)/h^2`, the symmetric limit `-N u''(0)`. The stencil is
//! exact on `a + b r^2`, self-adjoint in the `W`-weighted inner product and
//! an M-matrix in every dimension.

use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryCondition {
    /// `u = 0` for the second-order operator.
    Dirichlet2,
    /// `u = Lap u = 0`.
    Navier,
    /// `u = du/dr = 0`.
    Dirichlet4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FourthOrderBc {
    Navier,
    Dirichlet4,
}

/// `-Lap` on the full node range given the boundary value in `u[M+1]`;
/// returns rows `0..=M`.
pub fn neg_laplacian_rows(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let h = grid.h();
    let f = grid.face();
    let w = grid.weights();
    (0..=grid.m())
        .map(|i| {
            let right = f[i] * (u[i + 1] - u[i]);
            let left = if i == 0 { 0.0 } else { f[i - 1] * (u[i] - u[i - 1]) };
            -(right - left) / (h * w[i])
        })
        .collect()
}

/// `-Lap u` at `r = 1` for `u(1) = u'(1) = 0`, using the mirror ghost
/// `u_(M+2) = u_M` and a full control cell around the boundary node.
pub fn clamped_boundary_neg_laplacian(grid: &RadialGrid, u_m: f64) -> f64 {
    let (coef, _) = clamped_boundary_coefficients(grid);
    coef * u_m
}

/// Coefficient `c` with `w_(M+1) = c u_M`, and the boundary energy weight
/// that makes the clamped operator self-adjoint.
fn clamped_boundary_coefficients(grid: &RadialGrid) -> (f64, f64) {
    let n = grid.dim() as i32;
    let h = grid.h();
    let nf = grid.dim() as f64;
    let inner_face = grid.face()[grid.m()];
    let outer_face = (1.0 + 0.5 * h).powi(n - 1);
    let full_cell = ((1.0 + 0.5 * h).powi(n) - (1.0 - 0.5 * h).powi(n)) / nf;
    let coef = -(outer_face + inner_face) / (h * full_cell);
    let energy_weight = inner_face * full_cell / (outer_face + inner_face);
    (coef, energy_weight)
}

fn laplacian_band(grid: &RadialGrid) -> BandMatrix {
    let n = grid.unknowns();
    let h = grid.h();
    let f = grid.face();
    let w = grid.weights();
    let mut a = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        let s = 1.0 / (h * w[i]);
        a.set(i, i, (f[i] + if i > 0 { f[i - 1] } else { 0.0 }) * s);
        if i + 1 < n {
            a.set(i, i + 1, -f[i] * s);
        }
        if i > 0 {
            a.set(i, i - 1, -f[i - 1] * s);
        }
    }
    a
}

/// A discrete operator on the unknowns `u_0 ..= u_M`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    bc: BoundaryCondition,
    grid: RadialGrid,
    band: BandMatrix,
    /// The second-order factor, kept for split solves.
    second: BandMatrix,
}

impl OperatorMatrix {
    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn band(&self) -> &BandMatrix {
        &self.band
    }

    pub fn size(&self) -> usize {
        self.grid.unknowns()
    }

    /// Operator order, 2 or 4.
    pub fn order(&self) -> u32 {
        match self.bc {
            BoundaryCondition::Dirichlet2 => 2,
            _ => 4,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.band.apply(x)
    }

    /// Applies the operator to the interior of a field; the boundary entry
    /// of the result is zero.
    pub fn apply_field(&self, u: &RadialField) -> RadialField {
        RadialField::from_interior(&self.grid, &self.apply(u.interior()))
    }

    /// Weights making the operator symmetric: `W_i` per unknown.
    pub fn weights(&self) -> &[f64] {
        &self.grid.weights()[..self.size()]
    }

    /// `int (Lap u)^2`-type energy `<L u, u>_W` in radial units, using the
    /// boundary weight for clamped conditions.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let w = self.weights();
        self.apply(x).iter().zip(x).zip(w).map(|((a, b), c)| a * b * c).sum()
    }

    pub fn factor(&self) -> Result<OperatorFactor> {
        match self.bc {
            BoundaryCondition::Navier => Ok(OperatorFactor::Split(self.second.factor()?)),
            _ => Ok(OperatorFactor::Direct(self.band.factor()?)),
        }
    }
}

/// Factorization used for repeated solves with the pure operator.
#[derive(Debug, Clone)]
pub enum OperatorFactor {
    Direct(BandLu),
    /// `Lap^2` solved as two second-order solves.
    Split(BandLu),
}

impl OperatorFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            OperatorFactor::Direct(lu) => lu.solve(b),
            OperatorFactor::Split(lu) => lu.solve(&lu.solve(b)),
        }
    }
}

/// `-Lap` with `u(1) = 0`.
pub fn laplacian(grid: &RadialGrid) -> OperatorMatrix {
    let a = laplacian_band(grid);
    OperatorMatrix { bc: BoundaryCondition::Dirichlet2, grid: grid.clone(), band: a.clone(), second: a }
}

/// `Lap^2` with Navier or clamped conditions.
pub fn bilaplacian(grid: &RadialGrid, bc: FourthOrderBc) -> Result<OperatorMatrix> {
    if grid.m() < 5 {
        return Err(Error::InvalidInput("grid too small for the fourth-order stencil".into()));
    }
    let a = laplacian_band(grid);
    let mut band = a.matmul(&a);
    let bc = match bc {
        FourthOrderBc::Navier => BoundaryCondition::Navier,
        FourthOrderBc::Dirichlet4 => {
            // row M sees the nonzero boundary value w_(M+1) = c u_M
            let m = grid.m();
            let (c, _) = clamped_boundary_coefficients(grid);
            let coupling = -grid.face()[m] / (grid.h() * grid.weights()[m]);
            band.add(m, m, coupling * c);
            BoundaryCondition::Dirichlet4
        }
    };
    Ok(OperatorMatrix { bc, grid: grid.clone(), band, second: a })
}

/// Boundary energy weight for the clamped operator: with `w = -Lap_h u`,
/// `<B u, v>_W = sum_i W_i w_i (-Lap_h v)_i + What w_(M+1) (-Lap_h v)_(M+1)`.
pub fn clamped_energy_weight(grid: &RadialGrid) -> f64 {
    clamped_boundary_coefficients(grid).1
}
