//! Environment file format.
//!
//! A single JSON document:
//!
//! ```json
//! {
//!   "name": "...", "beta": 0.05,
//!   "bounds": {"lo": [x,y,z], "hi": [x,y,z]},
//!   "start": [x,y,z], "goal": [x,y,z],
//!   "obstacles": [
//!     {"A": [[nx,ny,nz], ...], "b": [...]},
//!     {"box": {"half_extents": [x,y,z], "origin": [x,y,z], "rpy": [r,p,y]}}
//!   ]
//! }
//! ```
//!
//! Lengths are meters, angles radians. Both obstacle forms are accepted on
//! load; the canonical writer always emits the half-space form with sorted
//! keys and shortest round-trip floats, so save -> load -> save is
//! byte-identical.

use super::{EnvError, Environment};
use crate::flatness::SystemParams;
use crate::geometry::{make_box, HPolytope, Pose};
use crate::jsonfmt;
use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct EnvFile {
    name: String,
    beta: f64,
    bounds: BoundsFile,
    start: [f64; 3],
    goal: [f64; 3],
    obstacles: Vec<ObstacleFile>,
}

#[derive(Serialize, Deserialize)]
struct BoundsFile {
    lo: [f64; 3],
    hi: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ObstacleFile {
    HRep {
        #[serde(rename = "A")]
        a: Vec<[f64; 3]>,
        b: Vec<f64>,
    },
    Box {
        #[serde(rename = "box")]
        spec: BoxFile,
    },
}

#[derive(Serialize, Deserialize)]
struct BoxFile {
    half_extents: [f64; 3],
    origin: [f64; 3],
    rpy: [f64; 3],
}

/// Load and validate an environment. `params` supplies the robot geometry for
/// the start/goal clearance invariant.
pub fn load_environment(path: &Path, params: &SystemParams) -> Result<Environment, EnvError> {
    let text = std::fs::read_to_string(path)?;
    let file: EnvFile = serde_json::from_str(&text).map_err(|e| EnvError::Parse {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let env = env_from_file(file, path)?;
    env.validate(params)?;
    Ok(env)
}

fn env_from_file(file: EnvFile, path: &Path) -> Result<Environment, EnvError> {
    let mut obstacles = Vec::with_capacity(file.obstacles.len());
    for (i, spec) in file.obstacles.into_iter().enumerate() {
        let poly = match spec {
            ObstacleFile::HRep { a, b } => {
                if a.len() != b.len() {
                    return Err(EnvError::Parse {
                        path: path.display().to_string(),
                        msg: format!("obstacle {i}: A has {} rows but b has {}", a.len(), b.len()),
                    });
                }
                let m = DMatrix::from_fn(a.len(), 3, |r, c| a[r][c]);
                HPolytope::new(m, DVector::from_vec(b)).map_err(|e| EnvError::Parse {
                    path: path.display().to_string(),
                    msg: format!("obstacle {i}: {e}"),
                })?
            }
            ObstacleFile::Box { spec } => make_box(
                Vector3::from(spec.half_extents),
                &Pose::from_rpy(Vector3::from(spec.rpy), Vector3::from(spec.origin)),
            )
            .map_err(|e| EnvError::Parse {
                path: path.display().to_string(),
                msg: format!("obstacle {i}: {e}"),
            })?,
        };
        obstacles.push(poly);
    }
    Ok(Environment {
        name: file.name,
        obstacles,
        bounds_lo: Vector3::from(file.bounds.lo),
        bounds_hi: Vector3::from(file.bounds.hi),
        start: Vector3::from(file.start),
        goal: Vector3::from(file.goal),
        beta: file.beta,
    })
}

/// Canonical JSON value for an environment (obstacles in half-space form).
pub fn environment_to_value(env: &Environment) -> Value {
    let file = EnvFile {
        name: env.name.clone(),
        beta: env.beta,
        bounds: BoundsFile {
            lo: env.bounds_lo.into(),
            hi: env.bounds_hi.into(),
        },
        start: env.start.into(),
        goal: env.goal.into(),
        obstacles: env
            .obstacles
            .iter()
            .map(|p| ObstacleFile::HRep {
                a: (0..p.n_faces())
                    .map(|i| [p.a()[(i, 0)], p.a()[(i, 1)], p.a()[(i, 2)]])
                    .collect(),
                b: p.b().iter().copied().collect(),
            })
            .collect(),
    };
    serde_json::to_value(file).expect("environment serialization")
}

/// Write the canonical form of `env` to `path`.
pub fn save_environment(path: &Path, env: &Environment) -> Result<(), EnvError> {
    std::fs::write(path, jsonfmt::canonical(&environment_to_value(env)))?;
    Ok(())
}
