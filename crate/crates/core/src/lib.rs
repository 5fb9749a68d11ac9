//! Planar whole-body QP control.
//!
//! The crate is split along the control pipeline:
//!
//! - [`model`]: planar floating-base rigid-body model (kinematics, mass matrix,
//!   bias forces, integration).
//! - [`tasks`]: task errors, critically damped PD targets, the square hand
//!   trajectory and velocity-damper bounds.
//! - [`qp`]: assembly of the canonical QP over `x = [qdd, f_c]`, vector-only
//!   refresh against frozen matrices and torque recovery.
//! - [`gisolver`]: dense Goldfarb-Idnani dual active-set solver with an explicit
//!   factorization cache that can be reused across control steps.
//! - [`sim`]: the closed loop tying everything together, with noise injection,
//!   accuracy metrics and solver timing.
//!
//! The crate is `no_std` and only needs `alloc`. Wall-clock time is injected
//! through [`sim::Clock`].

#![cfg_attr(not(test), no_std)]
// NaN-rejecting `!(x > 0.0)` checks and index loops over matrix storage are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod gisolver;
pub mod linalg;
pub(crate) mod math;
pub mod model;
pub mod qp;
pub mod sim;
pub mod tasks;

pub use gisolver::{FactorCache, QpProblem, QpSolution, SolveStatus, SolverConfig, SolverError};
pub use linalg::Matrix;
pub use model::{FrameId, RobotModel, RobotState};
pub use qp::{AssemblySnapshot, CanonicalQp};
pub use sim::{ControllerConfig, MetricsLog, SimResult};
pub use tasks::{TaskSet, TaskSpec};
