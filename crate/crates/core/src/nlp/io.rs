//! Trajectory file format.
//!
//! ```json
//! {
//!   "env_name": "...", "n": 60, "mode": "component-wise", "seed": false,
//!   "states": [[[x],[v],[a]], ...], "inputs": [[jx,jy,jz], ...],
//!   "durations": [...],
//!   "duals": {"stages": [ [ [ {"lambda_m": [...], "lambda_n": [...]}, ..obstacles ], ..components ], ..stages ]},
//!   "report": { "status": ..., "iterations": ..., ... }
//! }
//! ```
//!
//! Written canonically (sorted keys, shortest round-trip floats) so identical
//! solves produce identical bytes.

use super::{DecisionVector, Mode, NlpError, SolveReport, Trajectory};
use crate::flatness::{FlatInput, FlatState};
use crate::geometry::DualPair;
use crate::jsonfmt;
use nalgebra::{DVector, Vector3};
use serde_json::{json, Value};
use std::path::Path;

pub fn trajectory_to_value(traj: &Trajectory) -> Value {
    let states: Vec<Value> = traj
        .states()
        .iter()
        .map(|s| {
            json!([
                [s.x_l.x, s.x_l.y, s.x_l.z],
                [s.v_l.x, s.v_l.y, s.v_l.z],
                [s.a_l.x, s.a_l.y, s.a_l.z]
            ])
        })
        .collect();
    let inputs: Vec<Value> = traj
        .inputs()
        .iter()
        .map(|u| json!([u.j_l.x, u.j_l.y, u.j_l.z]))
        .collect();
    let n = traj.n();
    let n_pairs = traj.decision.duals.len();
    let per_stage = if n_pairs > 0 { n_pairs / (n + 1) } else { 0 };
    let n_components = if per_stage > 0 {
        match traj.mode {
            Mode::ComponentWise => 3,
            Mode::SinglePolytope => 1,
        }
    } else {
        0
    };
    let n_obstacles = if n_components > 0 {
        per_stage / n_components
    } else {
        0
    };
    let stages: Vec<Value> = (0..=n)
        .map(|k| {
            let comps: Vec<Value> = (0..n_components)
                .map(|j| {
                    let obs: Vec<Value> = (0..n_obstacles)
                        .map(|i| {
                            let pair = &traj.decision.duals
                                [(k * n_components + j) * n_obstacles + i];
                            json!({
                                "lambda_m": pair.lambda_m.iter().copied().collect::<Vec<f64>>(),
                                "lambda_n": pair.lambda_n.iter().copied().collect::<Vec<f64>>(),
                            })
                        })
                        .collect();
                    Value::Array(obs)
                })
                .collect();
            Value::Array(comps)
        })
        .collect();
    json!({
        "env_name": traj.env_name,
        "n": n,
        "mode": traj.mode.as_str(),
        "seed": traj.seed,
        "states": states,
        "inputs": inputs,
        "durations": traj.durations(),
        "duals": {"stages": stages},
        "report": serde_json::to_value(&traj.report).expect("report serialization"),
    })
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<(), NlpError> {
    std::fs::write(path, jsonfmt::canonical(&trajectory_to_value(traj)))
        .map_err(|e| NlpError::TrajectoryFile(format!("{}: {e}", path.display())))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory, NlpError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| NlpError::TrajectoryFile(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| NlpError::TrajectoryFile(format!("{}: {e}", path.display())))?;
    trajectory_from_value(&v).map_err(|m| NlpError::TrajectoryFile(format!("{}: {m}", path.display())))
}

fn trajectory_from_value(v: &Value) -> Result<Trajectory, String> {
    let vec3 = |v: &Value, what: &str| -> Result<Vector3<f64>, String> {
        let arr = v.as_array().ok_or_else(|| format!("{what} must be an array"))?;
        if arr.len() != 3 {
            return Err(format!("{what} must have 3 entries"));
        }
        let mut out = Vector3::zeros();
        for (i, x) in arr.iter().enumerate() {
            out[i] = x.as_f64().ok_or_else(|| format!("{what} entry is not a number"))?;
        }
        Ok(out)
    };

    let states = v["states"]
        .as_array()
        .ok_or("missing states")?
        .iter()
        .map(|s| {
            let blocks = s.as_array().ok_or("state must be [[x],[v],[a]]")?;
            if blocks.len() != 3 {
                return Err("state must have 3 blocks".to_string());
            }
            Ok(FlatState {
                x_l: vec3(&blocks[0], "state position")?,
                v_l: vec3(&blocks[1], "state velocity")?,
                a_l: vec3(&blocks[2], "state acceleration")?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let inputs = v["inputs"]
        .as_array()
        .ok_or("missing inputs")?
        .iter()
        .map(|u| Ok(FlatInput { j_l: vec3(u, "input")? }))
        .collect::<Result<Vec<_>, String>>()?;
    let durations: Vec<f64> = v["durations"]
        .as_array()
        .ok_or("missing durations")?
        .iter()
        .map(|d| d.as_f64().ok_or("duration is not a number".to_string()))
        .collect::<Result<Vec<_>, String>>()?;
    if states.len() != durations.len() + 1 || inputs.len() != durations.len() {
        return Err("inconsistent stage counts".into());
    }

    let mut duals = Vec::new();
    if let Some(stages) = v["duals"]["stages"].as_array() {
        for stage in stages {
            for comp in stage.as_array().ok_or("dual stage must be an array")? {
                for pair in comp.as_array().ok_or("dual component must be an array")? {
                    let lm: Vec<f64> = pair["lambda_m"]
                        .as_array()
                        .ok_or("missing lambda_m")?
                        .iter()
                        .map(|x| x.as_f64().ok_or("lambda_m entry".to_string()))
                        .collect::<Result<_, _>>()?;
                    let ln: Vec<f64> = pair["lambda_n"]
                        .as_array()
                        .ok_or("missing lambda_n")?
                        .iter()
                        .map(|x| x.as_f64().ok_or("lambda_n entry".to_string()))
                        .collect::<Result<_, _>>()?;
                    duals.push(DualPair {
                        lambda_m: DVector::from_vec(lm),
                        lambda_n: DVector::from_vec(ln),
                    });
                }
            }
        }
    }

    let mode: Mode = v["mode"]
        .as_str()
        .unwrap_or("component-wise")
        .parse()
        .map_err(|e: String| e)?;
    let report: SolveReport = serde_json::from_value(v["report"].clone())
        .map_err(|e| format!("report: {e}"))?;
    Ok(Trajectory {
        env_name: v["env_name"].as_str().unwrap_or("").to_string(),
        decision: DecisionVector {
            states,
            inputs,
            durations,
            duals,
        },
        mode,
        report,
        seed: v["seed"].as_bool().unwrap_or(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::{GroupViolations, SolveStatus};

    #[test]
    fn trajectory_round_trip_is_byte_stable() {
        let n = 3;
        let decision = DecisionVector {
            states: (0..=n)
                .map(|k| FlatState::at_rest(Vector3::new(k as f64 * 0.3, 0.1, 1.0)))
                .collect(),
            inputs: vec![
                FlatInput {
                    j_l: Vector3::new(0.1, -0.2, 0.30000000000000004)
                };
                n
            ],
            durations: vec![0.13; n],
            duals: (0..(n + 1) * 3 * 2)
                .map(|i| DualPair::uniform(6, 6, i as f64 * 1e-3))
                .collect(),
        };
        let traj = Trajectory {
            env_name: "roundtrip".into(),
            decision,
            mode: Mode::ComponentWise,
            report: SolveReport {
                status: SolveStatus::Solved,
                iterations: 42,
                kkt_residual: 3.3e-5,
                constraint_violation: 1.1e-7,
                objective: 123.456,
                wall_time: 9.9,
                group_violations: GroupViolations::default(),
            },
            seed: false,
        };
        let dir = std::env::temp_dir().join(format!("polyfly-traj-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.json");
        save_trajectory(&path, &traj).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = load_trajectory(&path).unwrap();
        assert_eq!(loaded.decision, traj.decision);
        assert_eq!(loaded.mode, traj.mode);
        save_trajectory(&path, &loaded).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
        std::fs::remove_dir_all(&dir).ok();
    }
}
