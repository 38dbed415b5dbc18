//! Monte Carlo pricing and delta estimation for a jump-diffusion whose jump
//! intensity follows a CIR process, with Malliavin-weight estimators.

pub mod cli;
pub mod convergence;
pub mod estimators;
pub mod malliavin;
pub mod model;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod stats;
