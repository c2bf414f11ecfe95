//! Solver-independent trajectory certification.
//!
//! Everything here is computed from first principles: distances come from the
//! geometric oracle (never from dual variables), dynamics are re-integrated
//! with RK4 from the initial state, and the robot is always validated with
//! its true three-component geometry at the reconstructed attitude, whatever
//! collision model produced the trajectory. Between knots the trajectory is
//! sub-sampled through the constant-jerk closed form; a sub-sample distance
//! below zero is an actual collision and fails validation (dips below `beta`
//! between knots are reported but expected, since the margin is enforced at
//! knots only).

use crate::environment::{ComponentSet, Environment};
use crate::flatness::{rk4_step, SystemParams};
use crate::geometry::signed_distance_oracle;
use crate::nlp::{
    boundary_constraints, variable_bounds, Layout, SolveStatus, Trajectory, Weights,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub const COMPONENT_NAMES: [&str; 3] = ["quad", "cable", "payload"];

/// Number of sub-samples per interval.
pub const DEFAULT_SUBSAMPLES: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Per knot, per component (quad, cable, payload): min oracle distance
    /// over all obstacles [m].
    pub per_stage_min_distance: Vec<[f64; 3]>,
    /// Max deviation between the stored knots and the RK4 re-integration
    /// from the initial state.
    pub dynamics_defect_max: f64,
    pub boundary_residual_max: f64,
    pub bound_violation_max: f64,
    /// Smallest oracle distance seen between knots.
    pub subsample_min_distance: f64,
    /// True when a sub-sample actually collides (distance < 0).
    pub intersample_violation: bool,
    pub total_time: f64,
    pub path_length: f64,
    pub pass: bool,
    /// Human-readable descriptions of every failed check.
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn min_knot_clearance(&self) -> f64 {
        self.per_stage_min_distance
            .iter()
            .flat_map(|row| row.iter())
            .fold(f64::INFINITY, |a, v| a.min(*v))
    }
}

/// Validate a trajectory against an environment.
///
/// `subsamples` of 0 disables intersample checks; the spec default is 10.
pub fn validate(
    traj: &Trajectory,
    env: &Environment,
    params: &SystemParams,
    weights: &Weights,
    subsamples: usize,
) -> Result<ValidationReport, ValidationError> {
    let n = traj.n();
    if traj.states().len() != n + 1 || traj.inputs().len() != n {
        return Err(ValidationError::DimensionMismatch(format!(
            "{} states / {} inputs for {} durations",
            traj.states().len(),
            traj.inputs().len(),
            n
        )));
    }
    if n == 0 {
        return Err(ValidationError::DimensionMismatch("empty trajectory".into()));
    }

    let mut failures = Vec::new();

    // Oracle distances at the knots, true attitude, all three components.
    let mut per_stage = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let u = traj.inputs()[k.min(n - 1)];
        let mut row = [f64::INFINITY; 3];
        match ComponentSet::from_flat(&traj.states()[k], &u, params) {
            Ok(set) => {
                for (c, (name, poly)) in set.iter().enumerate() {
                    for (oi, obs) in env.obstacles.iter().enumerate() {
                        let d = signed_distance_oracle(obs, poly);
                        if d < row[c] {
                            row[c] = d;
                        }
                        if d < env.beta - 1e-4 {
                            failures.push(format!(
                                "stage {k}: {name} vs obstacle {oi} clearance {d:.5} m < beta {}",
                                env.beta
                            ));
                        }
                    }
                }
            }
            Err(e) => {
                failures.push(format!("stage {k}: reconstruction failed: {e}"));
                row = [f64::NEG_INFINITY; 3];
            }
        }
        per_stage.push(row);
    }

    // Re-integrate the dynamics from the initial state.
    let mut dynamics_defect_max = 0.0f64;
    let mut s = traj.states()[0];
    for k in 0..n {
        s = rk4_step(&s, &traj.inputs()[k], traj.durations()[k])
            .map_err(|e| ValidationError::DimensionMismatch(format!("stage {k}: {e}")))?;
        let stored = traj.states()[k + 1].to_array();
        let rolled = s.to_array();
        for t in 0..9 {
            dynamics_defect_max = dynamics_defect_max.max((stored[t] - rolled[t]).abs());
        }
    }
    if dynamics_defect_max > 1e-5 {
        failures.push(format!(
            "re-integration defect {dynamics_defect_max:.2e} exceeds 1e-5"
        ));
    }

    let boundary_residual_max = boundary_constraints(&traj.decision, env)
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if boundary_residual_max > 1e-5 {
        failures.push(format!(
            "boundary residual {boundary_residual_max:.2e} exceeds 1e-5"
        ));
    }

    // Box bounds, including dual nonnegativity.
    let layout = Layout::from_faces(
        n,
        traj.decision.duals.first().map_or(vec![6], |_| {
            match traj.mode {
                crate::nlp::Mode::ComponentWise => vec![6, 6, 6],
                crate::nlp::Mode::SinglePolytope => vec![6],
            }
        }),
        env.obstacles.iter().map(|o| o.n_faces()).collect(),
    );
    let mut bound_violation_max = 0.0f64;
    if traj.decision.duals.len() == layout.n_pairs() {
        let (lo, hi) = variable_bounds(env, weights, &layout);
        let flat = traj.decision.to_flat(&layout);
        for i in 0..flat.len() {
            bound_violation_max = bound_violation_max
                .max(lo[i] - flat[i])
                .max(flat[i] - hi[i]);
        }
        bound_violation_max = bound_violation_max.max(0.0);
    } else if !traj.decision.duals.is_empty() {
        failures.push(format!(
            "dual block count {} does not match layout {}",
            traj.decision.duals.len(),
            layout.n_pairs()
        ));
    }
    if bound_violation_max > 1e-8 {
        failures.push(format!(
            "bound violation {bound_violation_max:.2e} exceeds 1e-8"
        ));
    }

    // Intersample distances through the constant-jerk closed form.
    let mut subsample_min = f64::INFINITY;
    let mut intersample_violation = false;
    if subsamples > 0 && !env.obstacles.is_empty() {
        for k in 0..n {
            let u = traj.inputs()[k];
            for s_idx in 1..subsamples {
                let tau = traj.durations()[k] * s_idx as f64 / subsamples as f64;
                let state = rk4_step(&traj.states()[k], &u, tau)
                    .map_err(|e| ValidationError::DimensionMismatch(format!("stage {k}: {e}")))?;
                let Ok(set) = ComponentSet::from_flat(&state, &u, params) else {
                    failures.push(format!(
                        "intersample reconstruction failed in interval {k}"
                    ));
                    intersample_violation = true;
                    continue;
                };
                for obs in &env.obstacles {
                    let d = set.min_distance_to(obs);
                    if d < subsample_min {
                        subsample_min = d;
                    }
                    if d < 0.0 && !intersample_violation {
                        intersample_violation = true;
                        failures.push(format!(
                            "intersample_violation: collision between knots {k} and {} (distance {d:.5})",
                            k + 1
                        ));
                    }
                }
            }
        }
    }

    let knot_min = per_stage
        .iter()
        .flat_map(|row| row.iter())
        .fold(f64::INFINITY, |a, v| a.min(*v));
    let pass = knot_min >= env.beta - 1e-4
        && dynamics_defect_max <= 1e-5
        && boundary_residual_max <= 1e-5
        && bound_violation_max <= 1e-8
        && !intersample_violation;

    Ok(ValidationReport {
        per_stage_min_distance: per_stage,
        dynamics_defect_max,
        boundary_residual_max,
        bound_violation_max,
        subsample_min_distance: subsample_min,
        intersample_violation,
        total_time: traj.total_time(),
        path_length: traj.path_length(),
        pass,
        failures,
    })
}

/// Side-by-side diff of two runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSummary {
    pub status_a: SolveStatus,
    pub status_b: SolveStatus,
    pub time_a: f64,
    pub time_b: f64,
    pub time_diff: f64,
    pub path_a: f64,
    pub path_b: f64,
    pub path_diff: f64,
    pub clearance_a: f64,
    pub clearance_b: f64,
    pub clearance_diff: f64,
}

pub fn compare(
    a: &Trajectory,
    ra: &ValidationReport,
    b: &Trajectory,
    rb: &ValidationReport,
) -> CompareSummary {
    CompareSummary {
        status_a: a.report.status,
        status_b: b.report.status,
        time_a: a.total_time(),
        time_b: b.total_time(),
        time_diff: b.total_time() - a.total_time(),
        path_a: a.path_length(),
        path_b: b.path_length(),
        path_diff: b.path_length() - a.path_length(),
        clearance_a: ra.min_knot_clearance(),
        clearance_b: rb.min_knot_clearance(),
        clearance_diff: rb.min_knot_clearance() - ra.min_knot_clearance(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatness::{FlatInput, FlatState};
    use crate::nlp::{DecisionVector, GroupViolations, Mode, SolveReport};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn hover_line_trajectory(env: &Environment, n: usize) -> Trajectory {
        // Dynamically consistent rest-to-rest motion is not needed here; use
        // a rollout with zero inputs from a moving start to keep defects zero
        // for the re-integration check: all states identical at hover works
        // only when start == goal, so integrate zero jerk from the start and
        // accept the boundary residual it produces in tests that ignore it.
        let states = vec![FlatState::at_rest(env.start); n + 1];
        let decision = DecisionVector {
            states,
            inputs: vec![FlatInput::zeros(); n],
            durations: vec![0.1; n],
            duals: Vec::new(),
        };
        Trajectory {
            env_name: env.name.clone(),
            decision,
            mode: Mode::ComponentWise,
            report: SolveReport {
                status: SolveStatus::Solved,
                iterations: 0,
                kkt_residual: 0.0,
                constraint_violation: 0.0,
                objective: 0.0,
                wall_time: 0.0,
                group_violations: GroupViolations::default(),
            },
            seed: true,
        }
    }

    #[test]
    fn total_time_and_path_length_are_exact() {
        let env = Environment {
            name: "open".into(),
            obstacles: vec![],
            bounds_lo: Vector3::new(-1.0, -1.0, 0.0),
            bounds_hi: Vector3::new(3.0, 1.0, 3.0),
            start: Vector3::new(0.0, 0.0, 1.0),
            goal: Vector3::new(1.0, 0.0, 1.0),
            beta: 0.05,
        };
        let n = 10;
        let mut traj = hover_line_trajectory(&env, n);
        for (k, s) in traj.decision.states.iter_mut().enumerate() {
            s.x_l = Vector3::new(k as f64 / n as f64, 0.0, 1.0);
        }
        assert_relative_eq!(traj.path_length(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(traj.total_time(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn corrupted_knot_is_identified() {
        let params = SystemParams::default();
        let env = crate::environment::gen_corridor(&params).unwrap();
        let n = 8;
        let mut traj = hover_line_trajectory(&env, n);
        // Plant a knot inside the first wall.
        traj.decision.states[4].x_l = Vector3::new(3.0, 1.0, 1.5);
        let report = validate(&traj, &env, &params, &Weights::default(), 0).unwrap();
        assert!(!report.pass);
        assert!(report
            .failures
            .iter()
            .any(|f| f.contains("stage 4") && f.contains("obstacle 0")));
        assert!(report.per_stage_min_distance[4][2] <= 0.0);
    }

    #[test]
    fn hover_at_start_passes_clearance_but_fails_boundary() {
        let params = SystemParams::default();
        let env = crate::environment::gen_corridor(&params).unwrap();
        let traj = hover_line_trajectory(&env, 6);
        let report = validate(&traj, &env, &params, &Weights::default(), 5).unwrap();
        // Hovering at the start keeps full clearance and zero defects but
        // never reaches the goal.
        assert!(report.min_knot_clearance() >= env.beta);
        assert!(report.dynamics_defect_max < 1e-12);
        assert!(report.boundary_residual_max > 1.0);
        assert!(!report.pass);
        assert!(report.failures.iter().any(|f| f.contains("boundary")));
    }

    #[test]
    fn compare_of_identical_runs_is_zero_diff() {
        let params = SystemParams::default();
        let env = crate::environment::gen_corridor(&params).unwrap();
        let traj = hover_line_trajectory(&env, 6);
        let report = validate(&traj, &env, &params, &Weights::default(), 0).unwrap();
        let diff = compare(&traj, &report, &traj, &report);
        assert_eq!(diff.time_diff, 0.0);
        assert_eq!(diff.path_diff, 0.0);
        assert_eq!(diff.clearance_diff, 0.0);
    }
}
