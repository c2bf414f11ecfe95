//! Minimum-time, collision-free trajectory planning for a quadrotor carrying a
//! cable-suspended payload.
//!
//! The robot is modeled as three independent polytopes (quadrotor body, cable,
//! payload) flying through an environment of convex polytopic obstacles.
//! Polytope separation is enforced through a smooth dual reformulation of the
//! signed-distance constraint inside a direct-transcription nonlinear program
//! over the payload's flat states (position/velocity/acceleration) and jerk
//! inputs, with free per-stage durations.
//!
//! Module map:
//! - [`geometry`]: H-representation polytopes, frame transforms, the dual
//!   distance machinery, and an independent signed-distance oracle.
//! - [`flatness`]: third-order integrator dynamics and the differential
//!   flatness map from payload states to full quadrotor states.
//! - [`environment`]: environment data model, per-stage robot component
//!   polytopes, JSON file format, and scenario generators.
//! - [`initializer`]: A* seed path, resampling, velocity seeding, and the
//!   initial decision vector.
//! - [`nlp`]: the optimal control problem (costs, defects, dual collision
//!   constraints) and an augmented-Lagrangian solver.
//! - [`validator`]: solver-independent certification of trajectories using
//!   only the geometric oracle.

pub mod ad;
pub mod jsonfmt;
pub mod environment;
pub mod flatness;
pub mod geometry;
pub mod initializer;
pub mod lp;
pub mod nlp;
pub mod validator;

pub use environment::{ComponentSet, Environment};
pub use flatness::{FlatInput, FlatState, QuadState, SystemParams};
pub use geometry::{DualPair, HPolytope, Pose};
pub use initializer::SeedPath;
pub use nlp::{DecisionVector, SolveReport, SolveStatus, Trajectory, Weights};
pub use validator::ValidationReport;
