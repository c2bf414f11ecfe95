//! The optimal control problem and its solver interface.
//!
//! Decision variables per solve: `N+1` flat states, `N` jerk inputs, `N`
//! per-stage durations, and one dual multiplier pair per (stage, robot
//! component, obstacle) triple. The objective is the sum of a time cost, an
//! input-rate regularizer, a guess-proximity regularizer, and a duration
//! smoothness regularizer. Constraints: RK4 defect equalities between
//! consecutive knots, endpoint rest conditions (handled as pinned variable
//! bounds), per-triple dual collision constraints (separation margin,
//! stationarity, multiplier norm cap, nonnegativity), and box bounds.
//!
//! Flat vector layout (fixed, also the order used in serialized duals):
//!
//! ```text
//! [ states (N+1)*9 | inputs N*3 | durations N |
//!   for k in 0..=N, for j in components, for i in obstacles:
//!     lambda_n (faces of component j), lambda_m (faces of obstacle i) ]
//! ```

mod collision;
pub mod gradcheck;
mod io;
mod solver;

pub use io::{load_trajectory, save_trajectory, trajectory_to_value};
pub use solver::{solve, solve_with, SolverOptions};

use crate::environment::Environment;
use crate::flatness::{rk4_step, FlatInput, FlatState};
use crate::geometry::DualPair;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NlpError {
    #[error("seed search found no path: {0}")]
    NoPath(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Env(#[from] crate::environment::EnvError),
    #[error(transparent)]
    Flatness(#[from] crate::flatness::FlatnessError),
    #[error("trajectory file error: {0}")]
    TrajectoryFile(String),
}

/// Collision-model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Quadrotor, cable, and payload as three independent polytopes.
    ComponentWise,
    /// One conservative hover-attitude box around the whole system.
    SinglePolytope,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::ComponentWise => "component-wise",
            Mode::SinglePolytope => "single-polytope",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "component-wise" | "component" => Ok(Mode::ComponentWise),
            "single-polytope" | "single" => Ok(Mode::SinglePolytope),
            other => Err(format!(
                "unknown mode '{other}' (expected component-wise or single-polytope)"
            )),
        }
    }
}

/// Cost weights, duration window, and state/input box bounds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Weights {
    pub alpha_to: f64,
    pub alpha_u: f64,
    pub alpha_g: f64,
    pub alpha_td: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// State bounds: position, velocity, acceleration blocks.
    pub x_lo: [f64; 9],
    pub x_hi: [f64; 9],
    pub u_lo: [f64; 3],
    pub u_hi: [f64; 3],
}

impl Default for Weights {
    fn default() -> Self {
        const P: f64 = 1e3;
        Self {
            alpha_to: 1e3,
            alpha_u: 1e-2,
            alpha_g: 5.0,
            alpha_td: 1e-1,
            dt_min: 0.01,
            dt_max: 0.25,
            x_lo: [-P, -P, -P, -4.0, -4.0, -4.0, -6.0, -6.0, -6.0],
            x_hi: [P, P, P, 4.0, 4.0, 4.0, 6.0, 6.0, 6.0],
            u_lo: [-30.0, -30.0, -30.0],
            u_hi: [30.0, 30.0, 30.0],
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), NlpError> {
        if !(self.alpha_to > 0.0) {
            return Err(NlpError::InvalidWeights("alpha_to must be positive".into()));
        }
        for (name, v) in [
            ("alpha_u", self.alpha_u),
            ("alpha_g", self.alpha_g),
            ("alpha_td", self.alpha_td),
        ] {
            if !(v >= 0.0) {
                return Err(NlpError::InvalidWeights(format!(
                    "{name} must be nonnegative"
                )));
            }
        }
        if !(self.dt_min > 0.0 && self.dt_max > self.dt_min) {
            return Err(NlpError::InvalidWeights(
                "duration window requires dt_max > dt_min > 0".into(),
            ));
        }
        for i in 0..9 {
            if !(self.x_lo[i] < self.x_hi[i]) {
                return Err(NlpError::InvalidWeights("state bounds are inverted".into()));
            }
        }
        for i in 0..3 {
            if !(self.u_lo[i] < self.u_hi[i]) {
                return Err(NlpError::InvalidWeights("input bounds are inverted".into()));
            }
        }
        Ok(())
    }
}

/// Index map for the flat decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n: usize,
    /// Face counts of the robot components, in constraint order.
    pub component_faces: Vec<usize>,
    /// Face counts of the obstacles, in environment order.
    pub obstacle_faces: Vec<usize>,
    dual_offset: usize,
    stage_block: usize,
    /// Offset of pair (j, i) within a stage block, pointing at lambda_n.
    pair_offsets: Vec<usize>,
}

impl Layout {
    pub fn new(n: usize, env: &Environment, mode: Mode) -> Self {
        let component_faces = match mode {
            Mode::ComponentWise => vec![6, 6, 6],
            Mode::SinglePolytope => vec![6],
        };
        let obstacle_faces: Vec<usize> = env.obstacles.iter().map(|o| o.n_faces()).collect();
        Self::from_faces(n, component_faces, obstacle_faces)
    }

    pub fn from_faces(n: usize, component_faces: Vec<usize>, obstacle_faces: Vec<usize>) -> Self {
        assert!(n >= 2, "need at least two stages");
        let mut pair_offsets = Vec::with_capacity(component_faces.len() * obstacle_faces.len());
        let mut off = 0usize;
        for cf in &component_faces {
            for of in &obstacle_faces {
                pair_offsets.push(off);
                off += cf + of;
            }
        }
        Self {
            n,
            dual_offset: 9 * (n + 1) + 3 * n + n,
            stage_block: off,
            component_faces,
            obstacle_faces,
            pair_offsets,
        }
    }

    pub fn n_components(&self) -> usize {
        self.component_faces.len()
    }

    pub fn n_obstacles(&self) -> usize {
        self.obstacle_faces.len()
    }

    pub fn n_pairs(&self) -> usize {
        (self.n + 1) * self.n_components() * self.n_obstacles()
    }

    pub fn total_len(&self) -> usize {
        self.dual_offset + (self.n + 1) * self.stage_block
    }

    #[inline]
    pub fn state_offset(&self, k: usize) -> usize {
        9 * k
    }

    #[inline]
    pub fn input_offset(&self, k: usize) -> usize {
        9 * (self.n + 1) + 3 * k
    }

    #[inline]
    pub fn duration_offset(&self, k: usize) -> usize {
        9 * (self.n + 1) + 3 * self.n + k
    }

    /// Offset of the dual block for (stage, component, obstacle); `lambda_n`
    /// first, `lambda_m` immediately after.
    #[inline]
    pub fn pair_offset(&self, k: usize, j: usize, i: usize) -> usize {
        self.dual_offset + k * self.stage_block + self.pair_offsets[j * self.n_obstacles() + i]
    }

    /// First index of the dual block (everything before is state/input/time).
    #[inline]
    pub fn dual_offset(&self) -> usize {
        self.dual_offset
    }
}

/// Structured decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    pub states: Vec<FlatState>,
    pub inputs: Vec<FlatInput>,
    pub durations: Vec<f64>,
    /// Dual pairs indexed `(k * n_components + j) * n_obstacles + i`.
    pub duals: Vec<DualPair>,
}

impl DecisionVector {
    pub fn dual(&self, layout: &Layout, k: usize, j: usize, i: usize) -> &DualPair {
        &self.duals[(k * layout.n_components() + j) * layout.n_obstacles() + i]
    }

    pub fn to_flat(&self, layout: &Layout) -> Vec<f64> {
        let mut z = vec![0.0; layout.total_len()];
        for (k, s) in self.states.iter().enumerate() {
            z[layout.state_offset(k)..layout.state_offset(k) + 9].copy_from_slice(&s.to_array());
        }
        for (k, u) in self.inputs.iter().enumerate() {
            let o = layout.input_offset(k);
            z[o] = u.j_l.x;
            z[o + 1] = u.j_l.y;
            z[o + 2] = u.j_l.z;
        }
        for (k, dt) in self.durations.iter().enumerate() {
            z[layout.duration_offset(k)] = *dt;
        }
        for k in 0..=layout.n {
            for j in 0..layout.n_components() {
                for i in 0..layout.n_obstacles() {
                    let pair = self.dual(layout, k, j, i);
                    let o = layout.pair_offset(k, j, i);
                    for (t, v) in pair.lambda_n.iter().enumerate() {
                        z[o + t] = *v;
                    }
                    let o = o + layout.component_faces[j];
                    for (t, v) in pair.lambda_m.iter().enumerate() {
                        z[o + t] = *v;
                    }
                }
            }
        }
        z
    }

    pub fn from_flat(z: &[f64], layout: &Layout) -> Self {
        assert_eq!(z.len(), layout.total_len());
        let states = (0..=layout.n)
            .map(|k| {
                let o = layout.state_offset(k);
                FlatState::from_array(z[o..o + 9].try_into().unwrap())
            })
            .collect();
        let inputs = (0..layout.n)
            .map(|k| {
                let o = layout.input_offset(k);
                FlatInput {
                    j_l: Vector3::new(z[o], z[o + 1], z[o + 2]),
                }
            })
            .collect();
        let durations = (0..layout.n)
            .map(|k| z[layout.duration_offset(k)])
            .collect();
        let mut duals = Vec::with_capacity(layout.n_pairs());
        for k in 0..=layout.n {
            for j in 0..layout.n_components() {
                for i in 0..layout.n_obstacles() {
                    let o = layout.pair_offset(k, j, i);
                    let cf = layout.component_faces[j];
                    let of = layout.obstacle_faces[i];
                    duals.push(DualPair {
                        lambda_n: nalgebra::DVector::from_column_slice(&z[o..o + cf]),
                        lambda_m: nalgebra::DVector::from_column_slice(&z[o + cf..o + cf + of]),
                    });
                }
            }
        }
        Self {
            states,
            inputs,
            durations,
            duals,
        }
    }
}

/// Outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Solved,
    MaxIter,
    Infeasible,
    Diverged,
}

/// Solve summary. `wall_time` is informational only and deliberately not
/// serialized, so written artifacts stay byte-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Total inner quasi-Newton iterations.
    pub iterations: usize,
    /// Scaled projected stationarity residual at the final iterate.
    pub kkt_residual: f64,
    /// Max constraint violation (defects, collision, boundary) at the end.
    pub constraint_violation: f64,
    pub objective: f64,
    #[serde(skip)]
    pub wall_time: f64,
    /// Per-group violation maxima.
    pub group_violations: GroupViolations,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroupViolations {
    pub dynamics: f64,
    pub margin: f64,
    pub stationarity: f64,
    pub norm_cap: f64,
}

/// A planned (or seeded) trajectory plus its provenance.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub env_name: String,
    pub decision: DecisionVector,
    pub mode: Mode,
    pub report: SolveReport,
    /// True when this is an initializer output rather than a solver output.
    pub seed: bool,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.durations().len()
    }

    pub fn states(&self) -> &[FlatState] {
        &self.decision.states
    }

    pub fn inputs(&self) -> &[FlatInput] {
        &self.decision.inputs
    }

    pub fn durations(&self) -> &[f64] {
        &self.decision.durations
    }

    pub fn total_time(&self) -> f64 {
        self.durations().iter().sum()
    }

    /// Polyline length of the payload path over the knots.
    pub fn path_length(&self) -> f64 {
        self.states()
            .windows(2)
            .map(|w| (w[1].x_l - w[0].x_l).norm())
            .sum()
    }
}

/// Time cost `(alpha_to / N) * sum(dt_k)`.
pub fn cost_time(durations: &[f64], alpha_to: f64) -> f64 {
    let n = durations.len() as f64;
    alpha_to / n * durations.iter().sum::<f64>()
}

/// Input-rate cost `(alpha_u / N) * sum ||u_i - u_{i-1}||^2`.
pub fn cost_input_rate(inputs: &[FlatInput], alpha_u: f64) -> f64 {
    let n = inputs.len() as f64;
    alpha_u / n
        * inputs
            .windows(2)
            .map(|w| (w[1].j_l - w[0].j_l).norm_squared())
            .sum::<f64>()
}

/// Guess-proximity cost `(alpha_g / (N-1)) * sum_{k=1}^{N-1} ||p_k - g_k||^2`
/// over the interior position blocks only.
pub fn cost_guess_proximity(states: &[FlatState], guess: &[FlatState], alpha_g: f64) -> f64 {
    assert_eq!(states.len(), guess.len(), "guess has wrong stage count");
    let n = states.len() - 1;
    alpha_g / (n as f64 - 1.0)
        * (1..n)
            .map(|k| (states[k].x_l - guess[k].x_l).norm_squared())
            .sum::<f64>()
}

/// Duration smoothness cost `(alpha_td / N) * sum ||dt_{k+1} - dt_k||^2`.
pub fn cost_dt_smoothness(durations: &[f64], alpha_td: f64) -> f64 {
    let n = durations.len() as f64;
    alpha_td / n
        * durations
            .windows(2)
            .map(|w| (w[1] - w[0]).powi(2))
            .sum::<f64>()
}

/// Sum of the four cost terms.
pub fn cost_total(z: &DecisionVector, guess_states: &[FlatState], w: &Weights) -> f64 {
    cost_time(&z.durations, w.alpha_to)
        + cost_input_rate(&z.inputs, w.alpha_u)
        + cost_guess_proximity(&z.states, guess_states, w.alpha_g)
        + cost_dt_smoothness(&z.durations, w.alpha_td)
}

/// Stagewise RK4 defects `x(k+1) - F(x(k), u(k), dt_k)`.
pub fn dynamics_defects(z: &DecisionVector) -> Vec<[f64; 9]> {
    let n = z.durations.len();
    (0..n)
        .map(|k| {
            let pred = rk4_step(&z.states[k], &z.inputs[k], z.durations[k])
                .expect("durations are positive within bounds");
            let mut d = [0.0; 9];
            let next = z.states[k + 1].to_array();
            let pred = pred.to_array();
            for t in 0..9 {
                d[t] = next[t] - pred[t];
            }
            d
        })
        .collect()
}

/// Endpoint residuals: start/goal position, zero endpoint velocity,
/// acceleration, and first/last input. The solver enforces these exactly by
/// pinning the variables; the residual form is used for reporting and
/// validation.
pub fn boundary_constraints(z: &DecisionVector, env: &Environment) -> Vec<f64> {
    let n = z.durations.len();
    let first = &z.states[0];
    let last = &z.states[n];
    let mut r = Vec::with_capacity(24);
    r.extend((first.x_l - env.start).iter());
    r.extend(first.v_l.iter());
    r.extend(first.a_l.iter());
    r.extend((last.x_l - env.goal).iter());
    r.extend(last.v_l.iter());
    r.extend(last.a_l.iter());
    r.extend(z.inputs[0].j_l.iter());
    r.extend(z.inputs[n - 1].j_l.iter());
    r
}

/// Box bounds for the flat vector: states clipped to the workspace, inputs
/// and durations from the weights, duals nonnegative, with the endpoint rest
/// conditions pinned (`lo == hi`).
pub fn variable_bounds(
    env: &Environment,
    weights: &Weights,
    layout: &Layout,
) -> (Vec<f64>, Vec<f64>) {
    let len = layout.total_len();
    let mut lo = vec![0.0; len];
    let mut hi = vec![f64::INFINITY; len];
    for k in 0..=layout.n {
        let o = layout.state_offset(k);
        for t in 0..9 {
            lo[o + t] = weights.x_lo[t];
            hi[o + t] = weights.x_hi[t];
        }
        for axis in 0..3 {
            lo[o + axis] = lo[o + axis].max(env.bounds_lo[axis]);
            hi[o + axis] = hi[o + axis].min(env.bounds_hi[axis]);
        }
    }
    for k in 0..layout.n {
        let o = layout.input_offset(k);
        for t in 0..3 {
            lo[o + t] = weights.u_lo[t];
            hi[o + t] = weights.u_hi[t];
        }
        let o = layout.duration_offset(k);
        lo[o] = weights.dt_min;
        hi[o] = weights.dt_max;
    }

    // Pin endpoint rest conditions.
    let pin = |lo: &mut [f64], hi: &mut [f64], off: usize, vals: &[f64]| {
        for (t, v) in vals.iter().enumerate() {
            lo[off + t] = *v;
            hi[off + t] = *v;
        }
    };
    let start_state = [
        env.start.x,
        env.start.y,
        env.start.z,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    let goal_state = [
        env.goal.x, env.goal.y, env.goal.z, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ];
    pin(&mut lo, &mut hi, layout.state_offset(0), &start_state);
    pin(&mut lo, &mut hi, layout.state_offset(layout.n), &goal_state);
    pin(&mut lo, &mut hi, layout.input_offset(0), &[0.0; 3]);
    pin(&mut lo, &mut hi, layout.input_offset(layout.n - 1), &[0.0; 3]);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatness::SystemParams;
    use approx::assert_relative_eq;

    fn uniform_decision(n: usize, dt: f64) -> DecisionVector {
        DecisionVector {
            states: vec![FlatState::zeros(); n + 1],
            inputs: vec![FlatInput::zeros(); n],
            durations: vec![dt; n],
            duals: Vec::new(),
        }
    }

    #[test]
    fn time_cost_examples() {
        assert_relative_eq!(cost_time(&[0.1; 10], 1000.0), 100.0, epsilon = 1e-12);
        assert_eq!(cost_time(&[0.0; 5], 1000.0), 0.0);
        // Doubling every duration doubles the cost exactly.
        let once = cost_time(&[0.07, 0.09, 0.2], 123.0);
        let twice = cost_time(&[0.14, 0.18, 0.4], 123.0);
        assert_relative_eq!(twice, 2.0 * once, epsilon = 1e-12);
    }

    #[test]
    fn input_rate_cost_examples() {
        let constant = vec![
            FlatInput {
                j_l: Vector3::new(1.0, -2.0, 0.5)
            };
            4
        ];
        assert_eq!(cost_input_rate(&constant, 3.0), 0.0);
        let two = vec![
            FlatInput {
                j_l: Vector3::zeros(),
            },
            FlatInput {
                j_l: Vector3::new(1.0, 0.0, 0.0),
            },
        ];
        assert_relative_eq!(cost_input_rate(&two, 2.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn guess_proximity_cost_examples() {
        let n = 10;
        let guess = vec![FlatState::zeros(); n + 1];
        let mut states = guess.clone();
        assert_eq!(cost_guess_proximity(&states, &guess, 5.0), 0.0);
        let d = Vector3::new(0.3, -0.1, 0.2);
        states[4].x_l = d;
        assert_relative_eq!(
            cost_guess_proximity(&states, &guess, 5.0),
            5.0 * d.norm_squared() / (n as f64 - 1.0),
            epsilon = 1e-12
        );
        // Velocity deviations are not penalized.
        states[4].x_l = Vector3::zeros();
        states[4].v_l = Vector3::new(9.0, 9.0, 9.0);
        assert_eq!(cost_guess_proximity(&states, &guess, 5.0), 0.0);
    }

    #[test]
    fn dt_smoothness_cost_examples() {
        assert_eq!(cost_dt_smoothness(&[0.1; 6], 7.0), 0.0);
        assert_relative_eq!(cost_dt_smoothness(&[0.1, 0.2], 2.0), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn total_cost_decomposes() {
        let n = 8;
        let mut z = uniform_decision(n, 0.1);
        for (k, s) in z.states.iter_mut().enumerate() {
            s.x_l = Vector3::new(k as f64 * 0.1, 0.0, 0.0);
            s.v_l = Vector3::new(1.0, 0.0, 0.0);
        }
        for (k, u) in z.inputs.iter_mut().enumerate() {
            u.j_l = Vector3::new(k as f64, 0.0, 0.0);
        }
        z.durations[3] = 0.17;
        let guess = vec![FlatState::zeros(); n + 1];
        let w = Weights::default();
        let total = cost_total(&z, &guess, &w);
        let sum = cost_time(&z.durations, w.alpha_to)
            + cost_input_rate(&z.inputs, w.alpha_u)
            + cost_guess_proximity(&z.states, &guess, w.alpha_g)
            + cost_dt_smoothness(&z.durations, w.alpha_td);
        assert_eq!(total, sum);

        // With zero inputs, uniform durations, and guess == states only the
        // time term survives.
        let z0 = uniform_decision(n, 0.1);
        let total0 = cost_total(&z0, &z0.states, &w);
        assert_relative_eq!(total0, w.alpha_to * 0.1, epsilon = 1e-12);
    }

    #[test]
    fn defects_vanish_on_integrated_rollout() {
        let n = 12;
        let mut z = uniform_decision(n, 0.08);
        for k in 0..n {
            z.inputs[k].j_l = Vector3::new((k as f64).sin(), 0.2, -0.1 * k as f64);
        }
        let mut s = FlatState::at_rest(Vector3::new(0.0, 0.0, 1.0));
        z.states[0] = s;
        for k in 0..n {
            s = rk4_step(&s, &z.inputs[k], z.durations[k]).unwrap();
            z.states[k + 1] = s;
        }
        for d in dynamics_defects(&z) {
            for v in d {
                assert!(v.abs() < 1e-12);
            }
        }
        // Perturbing one knot shows up as exactly that defect.
        let bump = Vector3::new(0.0, 0.01, 0.0);
        z.states[5].x_l += bump;
        let d = dynamics_defects(&z);
        assert_relative_eq!(d[4][1], 0.01, epsilon = 1e-12);
    }

    #[test]
    fn boundary_residuals_detect_motion_at_endpoints() {
        use crate::environment::gen_corridor;
        let env = gen_corridor(&SystemParams::default()).unwrap();
        let n = 6;
        let mut z = uniform_decision(n, 0.1);
        for s in z.states.iter_mut() {
            s.x_l = env.start;
        }
        z.states[n].x_l = env.goal;
        let r = boundary_constraints(&z, &env);
        assert_eq!(r.len(), 24);
        assert!(r.iter().all(|v| v.abs() < 1e-12));

        z.states[n].v_l = Vector3::new(0.0, 0.7, 0.0);
        let r = boundary_constraints(&z, &env);
        assert_relative_eq!(r[13], 0.7, epsilon = 1e-12);
    }

    #[test]
    fn layout_offsets_are_consistent() {
        let layout = Layout::from_faces(4, vec![6, 6, 6], vec![6, 8]);
        assert_eq!(layout.state_offset(0), 0);
        assert_eq!(layout.input_offset(0), 45);
        assert_eq!(layout.duration_offset(0), 45 + 12);
        // Stage block: 3 components x (6+6 and 6+8) = 3 * 26 = 78.
        assert_eq!(layout.total_len(), 45 + 12 + 4 + 5 * 78);
        assert_eq!(layout.pair_offset(0, 0, 0), 61);
        assert_eq!(layout.pair_offset(0, 0, 1), 61 + 12);
        assert_eq!(layout.pair_offset(0, 1, 0), 61 + 26);
        assert_eq!(layout.pair_offset(1, 0, 0), 61 + 78);
    }

    #[test]
    fn flat_round_trip_preserves_decision() {
        let layout = Layout::from_faces(3, vec![6], vec![6, 6]);
        let mut z = uniform_decision(3, 0.12);
        z.states[1].x_l = Vector3::new(0.5, -0.25, 1.5);
        z.inputs[2].j_l = Vector3::new(0.1, 0.2, 0.3);
        z.duals = (0..8)
            .map(|i| DualPair::uniform(6, 6, 0.01 * (i + 1) as f64))
            .collect();
        let flat = z.to_flat(&layout);
        assert_eq!(flat.len(), layout.total_len());
        let back = DecisionVector::from_flat(&flat, &layout);
        assert_eq!(back, z);
    }
}
