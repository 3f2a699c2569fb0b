//! Numerical methods for fractional problems whose order varies in time or
//! space: kernels, convolution quadrature weights, a P1 subdiffusion solver,
//! Abel equation solvers and a two-sided space-fractional BVP solver.

pub mod abel;
pub mod bvp;
pub mod error;
pub mod exponent;
pub mod fem2d;
pub mod kernels;
pub mod quadrature;
pub mod rules;
pub mod special;
pub mod study;
pub mod subdiffusion;

pub use abel::{AbelProblem, AbelSolution};
pub use bvp::{BvpCoefficients, BvpSolution};
pub use error::{Error, Result};
pub use exponent::{ExponentFunction, Regime};
pub use kernels::{IdentityFunction, KernelTable};
pub use quadrature::{TimeGrid, WeightSet};
pub use rules::{Grading, Rule};
pub use study::{Axis, ConvergenceTable, OrderFit};
pub use subdiffusion::{SolutionSeries, SolverConfig, Source, SubdiffusionProblem};
