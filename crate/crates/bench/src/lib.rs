//! Shared fixtures for the benchmarks.

use extremal_core::{Nonlinearity, Order, ProblemSpec, RadialGrid, Result};

/// Second-order exponential problem on the unit ball in `dim` dimensions.
pub fn gelfand(dim: usize, m: usize) -> Result<ProblemSpec> {
    ProblemSpec::new(Order::Second, Nonlinearity::exp(), RadialGrid::new(dim, m)?)
}

/// Fourth-order Navier exponential problem.
pub fn navier(dim: usize, m: usize) -> Result<ProblemSpec> {
    ProblemSpec::new(Order::FourthNavier, Nonlinearity::exp(), RadialGrid::new(dim, m)?)
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_build() {
        assert!(super::gelfand(2, 64).is_ok());
        assert!(super::navier(5, 64).is_ok());
    }
}
