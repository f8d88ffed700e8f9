//! Uniform radial mesh on the unit ball of R^N and nodal fields on it.
//!
//! Nodes are `r_i = i h`, `i = 0..=M+1`, `h = 1/(M+1)`. Node `i` owns the
//! control cell `[r_i - h/2, r_i + h/2]` clipped to `[0, 1]`; its radial
//! volume `W_i = int_cell r^(N-1) dr` is the quadrature weight.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_INTERIOR_NODES: usize = 16;

#[derive(Debug)]
struct GridData {
    dim: usize,
    m: usize,
    h: f64,
    weights: Vec<f64>,
    face: Vec<f64>,
    omega: f64,
}

/// Cheap to clone: the node data is shared.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    inner: Arc<GridData>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.m() == other.m()
    }
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    dim: usize,
    m: usize,
}

impl Serialize for RadialGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GridRepr { dim: self.dim(), m: self.m() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RadialGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GridRepr::deserialize(d)?;
        RadialGrid::new(r.dim, r.m).map_err(serde::de::Error::custom)
    }
}

/// `Gamma(x)` for `x` a positive integer or half-integer.
fn gamma_half_integer(x: f64) -> f64 {
    let mut g = if (x - x.floor()).abs() < 1e-12 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut y = if (x - x.floor()).abs() < 1e-12 { 1.0 } else { 0.5 };
    while y < x - 1e-12 {
        g *= y;
        y += 1.0;
    }
    g
}

/// Area of the unit sphere in R^N, `N pi^(N/2) / Gamma(N/2 + 1)`.
pub fn sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    n * std::f64::consts::PI.powf(0.5 * n) / gamma_half_integer(0.5 * n + 1.0)
}

impl RadialGrid {
    pub fn new(dim: usize, m: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if m < MIN_INTERIOR_NODES {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_INTERIOR_NODES} interior nodes, got {m}"
            )));
        }
        let n = dim as i32;
        let h = 1.0 / (m as f64 + 1.0);
        let nf = dim as f64;
        let mut weights = Vec::with_capacity(m + 2);
        weights.push((0.5 * h).powi(n) / nf);
        for i in 1..=m {
            let r = i as f64 * h;
            weights.push(((r + 0.5 * h).powi(n) - (r - 0.5 * h).powi(n)) / nf);
        }
        weights.push((1.0 - (1.0 - 0.5 * h).powi(n)) / nf);
        let face = (0..=m + 1).map(|i| ((i as f64 + 0.5) * h).powi(n - 1)).collect();
        Ok(Self {
            inner: Arc::new(GridData { dim, m, h, weights, face, omega: sphere_area(dim) }),
        })
    }

    /// Space dimension `N`.
    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Number of interior nodes `M`.
    pub fn m(&self) -> usize {
        self.inner.m
    }

    pub fn h(&self) -> f64 {
        self.inner.h
    }

    /// Total node count `M + 2`.
    pub fn len(&self) -> usize {
        self.inner.m + 2
    }

    /// Always false; present for the `len`/`is_empty` pairing.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of unknowns of a scalar field, nodes `0..=M`.
    pub fn unknowns(&self) -> usize {
        self.inner.m + 1
    }

    pub fn r(&self, i: usize) -> f64 {
        if i == self.inner.m + 1 {
            1.0
        } else {
            i as f64 * self.inner.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.r(i)).collect()
    }

    /// Radial cell volumes `W_i`, summing to `1/N`.
    pub fn weights(&self) -> &[f64] {
        &self.inner.weights
    }

    /// `r_(i+1/2)^(N-1)` for `i = 0..=M+1`.
    pub fn face(&self) -> &[f64] {
        &self.inner.face
    }

    /// Surface area of the unit sphere, the factor turning radial integrals
    /// into volume integrals.
    pub fn omega(&self) -> f64 {
        self.inner.omega
    }

    /// Volume integral of a nodal array over the ball.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.omega() * values.iter().zip(self.weights()).map(|(v, w)| v * w).sum::<f64>()
    }

    /// `int grad u . grad v` from first differences across cell faces.
    pub fn gradient_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let h = self.h();
        let s: f64 = (0..=self.m())
            .map(|i| self.face()[i] * (u[i + 1] - u[i]) * (v[i + 1] - v[i]))
            .sum();
        self.omega() * s / h
    }

    /// Finer grid with `2M + 1` interior nodes, so every node here is a node
    /// there.
    pub fn refined(&self) -> Self {
        Self::new(self.dim(), 2 * self.m() + 1).expect("refinement of a valid grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: grid.clone(), values: grid.nodes().into_iter().map(f).collect() }
    }

    /// Field from unknowns at nodes `0..=M`, boundary value zero.
    pub fn from_interior(grid: &RadialGrid, interior: &[f64]) -> Self {
        let mut values = interior.to_vec();
        values.resize(grid.len(), 0.0);
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[..self.grid.unknowns()]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// `(int u^2)^(1/2)` over the ball.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        self.grid.integrate(&sq).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }
}

/// Nodal `u'(r)`: zero at the center by symmetry, centered differences in
/// the interior, a second-order one-sided stencil at `r = 1`.
pub fn radial_derivative(field: &RadialField) -> RadialField {
    let g = field.grid();
    let u = field.values();
    let h = g.h();
    let last = g.len() - 1;
    let mut d = vec![0.0; g.len()];
    for i in 1..last {
        d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    d[last] = (3.0 * u[last] - 4.0 * u[last - 1] + u[last - 2]) / (2.0 * h);
    RadialField { grid: g.clone(), values: d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(RadialGrid::new(3, 15).is_err());
        assert!(RadialGrid::new(0, 32).is_err());
    }

    #[test]
    fn ball_volumes() {
        let g3 = RadialGrid::new(3, 40).unwrap();
        assert!((g3.integrate(&vec![1.0; g3.len()]) - 4.0 * PI / 3.0).abs() < 1e-10);
        let g2 = RadialGrid::new(2, 40).unwrap();
        assert!((g2.integrate(&vec![1.0; g2.len()]) - PI).abs() < 1e-10);
    }

    #[test]
    fn second_moment_is_second_order() {
        let err = |m| {
            let g = RadialGrid::new(3, m).unwrap();
            let f = RadialField::from_fn(&g, |r| r * r);
            (f.integrate() - 4.0 * PI / 5.0).abs()
        };
        let (e1, e2) = (err(63), err(127));
        assert!(e1 < 1e-2);
        assert!(e1 / e2 > 3.5);
    }

    #[test]
    fn derivative_examples() {
        let g = RadialGrid::new(3, 63).unwrap();
        let d = radial_derivative(&RadialField::from_fn(&g, |r| 1.0 - r * r));
        for (i, &r) in g.nodes().iter().enumerate() {
            assert!((d.values()[i] + 2.0 * r).abs() < 1e-10);
        }
        let c = radial_derivative(&RadialField::from_fn(&g, |_| 3.0));
        assert!(c.sup_abs() < 1e-12);
        let q = radial_derivative(&RadialField::from_fn(&g, |r| r.powi(4)));
        assert!((q.values()[32] - 0.5).abs() < 4.0 * g.h() * g.h());
    }

    #[test]
    fn gradient_inner_matches_exact_for_quadratics() {
        // int |grad (1-r^2)|^2 = omega int 4 r^2 r^(N-1) = 4 omega/(N+2)
        for n in 1..6 {
            let g = RadialGrid::new(n, 50).unwrap();
            let u = RadialField::from_fn(&g, |r| 1.0 - r * r);
            let exact = 4.0 * g.omega() / (n as f64 + 2.0);
            let got = g.gradient_inner(u.values(), u.values());
            assert!((got - exact).abs() < 2e-3 * exact, "N={n}");
        }
    }
}
