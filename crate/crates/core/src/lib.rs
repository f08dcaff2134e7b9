//! Numerical laboratory for the hyperbolic geometric flow on conformally
//! flat surfaces `g = e^u (dx1^2 + dx2^2)`.
//!
//! The flow reduces to the quasilinear wave equation
//! `u_tt = e^{-u} Lap u - u_t^2`. The crate provides
//!
//! * [`wave_kernel`]: the linear wave equation in the plane, solved pointwise
//!   by the Poisson formula and independently on a periodic torus;
//! * [`decay_estimates`]: decay envelopes and bounded-constant probes of the
//!   linear estimates;
//! * [`vector_fields`]: the Klainerman generators, their commutators with
//!   the wave operator, and the weighted norms built from them;
//! * [`nonlinear_solver`]: a method-of-lines integrator with breakdown
//!   detection;
//! * [`geometry`]: conformal metrics and their curvature;
//! * [`harness`]: sweeps over the data size and life-span fits.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64` (and `f32` where noted).

pub mod data;
pub mod decay_estimates;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod io;
pub mod nonlinear_solver;
pub mod quadrature;
pub mod scalar;
pub mod stencil;
pub mod vector_fields;
pub mod wave_kernel;

pub use data::{DataFamily, DecayParams};
pub use decay_estimates::{Envelope, ProbeReport};
pub use error::{Error, Result};
pub use harness::{FitResult, LifespanRecord, SweepConfig};
pub use nonlinear_solver::{BreakdownInfo, BreakdownReason, RunConfig};
pub use scalar::Real;
pub use vector_fields::{FieldOp, MultiIndex, NormBundle};
pub use wave_kernel::{QuadratureSpec, RimSubstitution, TorusOracleSpec};

pub type Grid = grid::Grid<f64>;
pub type Field = grid::GridField<f64>;
pub type State = grid::WaveState<f64>;
pub type Data = data::InitialData<f64>;
pub type Metric = geometry::ConformalMetric<f64>;
pub type Solver = nonlinear_solver::Solver<f64>;
pub type RunOutput = nonlinear_solver::RunOutput<f64>;

pub type Grid32 = grid::Grid<f32>;
pub type Field32 = grid::GridField<f32>;
pub type State32 = grid::WaveState<f32>;
pub type Data32 = data::InitialData<f32>;
