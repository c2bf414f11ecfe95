//! Environment data model and per-stage robot component polytopes.
//!
//! An environment is a set of convex polytopic obstacles inside axis-aligned
//! workspace bounds, with a payload start, a payload goal, and a safety margin
//! `beta` every component-obstacle distance must respect. The robot itself is
//! modeled as three boxes: the quadrotor body posed at its reconstructed
//! attitude, a thin prism along the cable, and an axis-aligned payload box
//! (payload attitude is not part of the flat model; its extents absorb swing).

mod gen;
mod io;

pub use gen::{
    benchmark_suite, gen_corridor, gen_low_ceiling, gen_maze, gen_narrow_gap, MazeSpec,
};
pub use io::{environment_to_value, load_environment, save_environment};

use crate::ad;
use crate::flatness::{self, FlatInput, FlatState, QuadState, SystemParams};
use crate::geometry::{make_box, signed_distance_oracle, GeometryError, HPolytope, Pose};
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("cable segment is degenerate (endpoints coincide)")]
    DegenerateSegment,
    #[error("infeasible scenario spec: {0}")]
    InfeasibleSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flatness(#[from] flatness::FlatnessError),
}

/// Obstacle course with workspace bounds, endpoints, and safety margin.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub name: String,
    pub obstacles: Vec<HPolytope>,
    pub bounds_lo: Vector3<f64>,
    pub bounds_hi: Vector3<f64>,
    /// Payload start position [m].
    pub start: Vector3<f64>,
    /// Payload goal position [m].
    pub goal: Vector3<f64>,
    /// Required clearance between every robot component and obstacle [m].
    pub beta: f64,
}

impl Environment {
    /// Check the structural invariants: positive margin, endpoints strictly
    /// inside bounds, and hover-attitude clearance of at least `beta` for all
    /// three components at both endpoints.
    pub fn validate(&self, params: &SystemParams) -> Result<(), EnvError> {
        if !(self.beta > 0.0) {
            return Err(EnvError::InvalidEnvironment(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        for i in 0..3 {
            if !(self.bounds_lo[i] < self.bounds_hi[i]) {
                return Err(EnvError::InvalidEnvironment(
                    "bounds_lo must be strictly below bounds_hi".into(),
                ));
            }
        }
        for (label, p) in [("start", &self.start), ("goal", &self.goal)] {
            for i in 0..3 {
                if !(p[i] > self.bounds_lo[i] && p[i] < self.bounds_hi[i]) {
                    return Err(EnvError::InvalidEnvironment(format!(
                        "{label} is not strictly inside the workspace bounds"
                    )));
                }
            }
            let set = ComponentSet::hover(p, params)?;
            for (oi, obs) in self.obstacles.iter().enumerate() {
                let d = set.min_distance_to(obs);
                if d < self.beta - 1e-9 {
                    return Err(EnvError::InvalidEnvironment(format!(
                        "{label} hover clearance {d:.4} m to obstacle {oi} is below beta {}",
                        self.beta
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The three robot component polytopes at one configuration.
#[derive(Debug, Clone)]
pub struct ComponentSet {
    pub quad: HPolytope,
    pub cable: HPolytope,
    pub payload: HPolytope,
}

impl ComponentSet {
    /// Components for a reconstructed quadrotor state.
    pub fn from_quad_state(
        qs: &QuadState,
        x_l: &Vector3<f64>,
        params: &SystemParams,
    ) -> Result<Self, EnvError> {
        Ok(Self {
            quad: quad_polytope(qs, params)?,
            cable: cable_polytope(&qs.x_q, x_l, params)?,
            payload: payload_polytope(x_l, params)?,
        })
    }

    /// Components for a flat state and input, via the flatness map.
    pub fn from_flat(
        x: &FlatState,
        u: &FlatInput,
        params: &SystemParams,
    ) -> Result<Self, EnvError> {
        let qs = flatness::flat_to_quad(x, u, params)?;
        Self::from_quad_state(&qs, &x.x_l, params)
    }

    /// Components at hover: quadrotor directly above the payload at identity
    /// attitude with a vertical cable. This is the conservative configuration
    /// used by the seed search and environment validation.
    pub fn hover(x_l: &Vector3<f64>, params: &SystemParams) -> Result<Self, EnvError> {
        let x_q = x_l + Vector3::new(0.0, 0.0, params.cable_length);
        let qs = QuadState {
            x_q,
            v_q: Vector3::zeros(),
            a_q: Vector3::zeros(),
            r_q: Matrix3::identity(),
            q_cable: Vector3::new(0.0, 0.0, -1.0),
            qdot_cable: Vector3::zeros(),
        };
        Self::from_quad_state(&qs, x_l, params)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &HPolytope)> {
        [
            ("quad", &self.quad),
            ("cable", &self.cable),
            ("payload", &self.payload),
        ]
        .into_iter()
    }

    /// Smallest oracle distance from any component to `obstacle`.
    pub fn min_distance_to(&self, obstacle: &HPolytope) -> f64 {
        self.iter()
            .map(|(_, c)| signed_distance_oracle(obstacle, c))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Quadrotor body box posed at the reconstructed attitude and position.
pub fn quad_polytope(qs: &QuadState, params: &SystemParams) -> Result<HPolytope, EnvError> {
    let pose = Pose::new(qs.r_q, qs.x_q)?;
    Ok(make_box(params.quad_half_extents_vec(), &pose)?)
}

/// Rectangular prism of square cross-section along the cable segment,
/// capped exactly at the two endpoints.
pub fn cable_polytope(
    x_q: &Vector3<f64>,
    x_l: &Vector3<f64>,
    params: &SystemParams,
) -> Result<HPolytope, EnvError> {
    let d = x_q - x_l;
    let len = d.norm();
    if len < 1e-9 {
        return Err(EnvError::DegenerateSegment);
    }
    let dir = d / len;
    let r = cable_rotation(&dir);
    let mid = (x_q + x_l) / 2.0;
    let w = params.cable_halfwidth;
    let pose = Pose::new(r, mid)?;
    Ok(make_box(Vector3::new(w, w, len / 2.0), &pose)?)
}

/// Rotation mapping local +z onto the cable direction; antipodal fallback is
/// a half-turn about x.
pub(crate) fn cable_rotation(dir: &Vector3<f64>) -> Matrix3<f64> {
    match ad::align_z_rotation::<f64>([dir.x, dir.y, dir.z]) {
        Some(m) => Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ),
        None => Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0),
    }
}

/// Axis-aligned payload box centered at the payload position.
pub fn payload_polytope(x_l: &Vector3<f64>, params: &SystemParams) -> Result<HPolytope, EnvError> {
    Ok(make_box(
        params.payload_half_extents_vec(),
        &Pose::translation(*x_l),
    )?)
}

/// Single conservative box covering quadrotor, cable, and payload at hover
/// attitude; the stand-in for planners that over-approximate the system with
/// one shape. Returned as (half-extents, offset of the box center above the
/// payload position).
pub fn combined_box_geometry(params: &SystemParams) -> (Vector3<f64>, Vector3<f64>) {
    let q = params.quad_half_extents_vec();
    let p = params.payload_half_extents_vec();
    let l = params.cable_length;
    let w = params.cable_halfwidth;
    let half = Vector3::new(
        q.x.max(p.x).max(w),
        q.y.max(p.y).max(w),
        (l + q.z + p.z) / 2.0,
    );
    let offset = Vector3::new(0.0, 0.0, (l + q.z - p.z) / 2.0);
    (half, offset)
}

/// The combined conservative box placed for payload position `x_l`.
pub fn combined_polytope(x_l: &Vector3<f64>, params: &SystemParams) -> Result<HPolytope, EnvError> {
    let (half, offset) = combined_box_geometry(params);
    Ok(make_box(half, &Pose::translation(x_l + offset))?)
}
