//! Rearrangements, discrete fractional Laplacians, a nonlinear resolvent
//! solver and implicit time stepping for nonlocal diffusion, generic over `f32`
//! and `f64`.

// `!(a > b)` is the NaN-rejecting form used for argument checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod fractional_laplacian;
pub mod grid;
pub mod linalg;
pub mod nonlinearity;
pub mod parabolic;
pub mod quadrature;
pub mod rearrange;
pub mod scalar;

pub use elliptic::{solve_resolvent, NewtonControls, ResolventProblem, ResolventSolution};
pub use error::{Error, Result};
pub use fractional_laplacian::{assemble, DiscreteOperator, Method, OperatorSpec};
pub use grid::{Grid1D, GridFunction, Norm};
pub use nonlinearity::{Curvature, Nonlinearity};
pub use parabolic::{ItdSchedule, SourceTerm, Trajectory};
pub use rearrange::{compare_concentration, ConcentrationReport, Relation, StepRearrangement};
pub use scalar::Real;

pub type Grid64 = Grid1D<f64>;
pub type Grid32 = Grid1D<f32>;
pub type GridFunction64 = GridFunction<f64>;
pub type GridFunction32 = GridFunction<f32>;
pub type Operator64 = DiscreteOperator<f64>;
pub type Operator32 = DiscreteOperator<f32>;
pub type Nonlinearity64 = Nonlinearity<f64>;
pub type Nonlinearity32 = Nonlinearity<f32>;
pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
