//! Symplectic adapted exponential integrators for charged-particle dynamics
//!
//! ```text
//! ẍ = ẋ × B(x)/ε + F(x),   F = −∇U,
//! ```
//!
//! with continuous-stage exponential schemes for homogeneous fields,
//! frozen-field extensions for general fields, reference integrators
//! (Boris, implicit Runge–Kutta) and verification utilities.
//!
//! The core is generic over [`Real`] (`f32` or `f64`); the `*d`/`*f`
//! aliases below fix the scalar type.

// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod integrators;
pub mod problems;
pub mod reference;
pub mod scalar;
pub mod verification;

pub use error::{CpdError, Result};
pub use geometry::{phi_mat, phi_op, scalar_phi, Mat3, PhiOp, Skew3, Vec3};
pub use integrators::{FixedPointControls, Integrator, Method, SolveStats, Trajectory};
pub use problems::{make_problem, CpdProblem, FieldSpec, ForceSpec, ProblemId, State};
pub use reference::{oracle_solve, OracleConfig, OracleSolution};
pub use scalar::Real;

pub type Vec3d = Vec3<f64>;
pub type Mat3d = Mat3<f64>;
pub type Skew3d = Skew3<f64>;
pub type Stated = State<f64>;
pub type Problem = CpdProblem<f64>;
pub type Integratord = Integrator<f64>;

pub type Vec3f = Vec3<f32>;
pub type Mat3f = Mat3<f32>;
pub type Skew3f = Skew3<f32>;
pub type Statef = State<f32>;
pub type Problemf = CpdProblem<f32>;
pub type Integratorf = Integrator<f32>;
