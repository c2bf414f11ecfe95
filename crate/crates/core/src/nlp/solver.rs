//! Augmented-Lagrangian solver with a projected quasi-Newton inner loop.
//!
//! The solver works on the flat decision vector under box bounds (endpoint
//! rest conditions are pinned bounds). Equalities (dynamics defects, dual
//! stationarity) and inequalities (separation margin, multiplier norm cap)
//! enter through an augmented Lagrangian; the inner minimizer is L-BFGS with
//! gradient projection and monotone backtracking. Two problem-specific moves
//! keep it effective and verifiable:
//!
//! - Certificate refresh: before each outer iteration every dual block is
//!   warm-started with the optimal separation certificate at the current
//!   states (closest-point direction plus support-function programs). The
//!   margin constraint then measures true distance and the inner loop mostly
//!   works on the trajectory variables.
//! - Defect restoration: after convergence the free inputs receive the
//!   minimum-norm correction that makes the rollout hit the pinned goal
//!   exactly (the defect system is linear in states and inputs for fixed
//!   durations) and the states are replaced by that rollout. Certificates are
//!   then refreshed and every margin re-verified against the geometric oracle
//!   before the solve is declared `Solved`.
//!
//! Internally the margin constraint is tightened by a small slack and finite
//! non-pinned bounds by 1e-6, so polished solutions satisfy the nominal
//! constraints with zero violation. Everything is single-threaded and
//! deterministic.

use super::collision::{
    components_for_mode, dstat_dln, eval_pair, obstacle_data, pair_lambda_jacobian, stage_poses,
    ComponentGeom, ObstacleData,
};
use super::{
    cost_total, DecisionVector, GroupViolations, Layout, Mode, NlpError, SolveReport, SolveStatus,
    Trajectory, Weights,
};
use crate::ad::Dual;
use crate::environment::Environment;
use crate::flatness::{rk4_step, FlatState, SystemParams};
use crate::geometry::{self, max_dual_bound, signed_distance_oracle, HPolytope};
use crate::nlp::variable_bounds;
use nalgebra::{DMatrix, Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::Instant;

/// Margin tightening so polished solutions satisfy the nominal margin with
/// zero violation.
const MARGIN_SLACK: f64 = 5e-5;
/// Interior tightening of finite, non-pinned, non-dual bounds.
const BOUND_SLACK: f64 = 1e-6;
const LBFGS_MEMORY: usize = 15;
const MAX_OUTER: usize = 80;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SolverOptions {
    /// Constraint violation tolerance.
    pub tol_feas: f64,
    /// Scaled stationarity tolerance.
    pub tol_kkt: f64,
    /// Budget of inner quasi-Newton iterations.
    pub max_iters: usize,
    pub rho_init: f64,
    pub rho_max: f64,
    /// Warm-start duals with optimal certificates each outer iteration.
    pub dual_refresh: bool,
    /// Restore exact dynamic feasibility after convergence.
    pub defect_polish: bool,
    /// Pose the quadrotor polytope at the reconstructed attitude (false
    /// freezes it to identity inside the constraints only).
    pub rotation_aware: bool,
    pub mode: Mode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-5,
            tol_kkt: 1e-4,
            max_iters: 3000,
            rho_init: 10.0,
            rho_max: 1e8,
            dual_refresh: true,
            defect_polish: true,
            rotation_aware: true,
            mode: Mode::ComponentWise,
        }
    }
}

/// Solve with default options (component-wise, rotation-aware).
pub fn solve(
    env: &Environment,
    params: &SystemParams,
    weights: &Weights,
    n: usize,
    guess: &DecisionVector,
) -> Result<(Trajectory, SolveReport), NlpError> {
    solve_with(env, params, weights, n, guess, &SolverOptions::default())
}

pub fn solve_with(
    env: &Environment,
    params: &SystemParams,
    weights: &Weights,
    n: usize,
    guess: &DecisionVector,
    opts: &SolverOptions,
) -> Result<(Trajectory, SolveReport), NlpError> {
    weights.validate()?;
    params.validate().map_err(NlpError::InvalidWeights)?;
    if n < 4 {
        return Err(NlpError::DimensionMismatch("need at least 4 stages".into()));
    }
    if guess.states.len() != n + 1 || guess.inputs.len() != n || guess.durations.len() != n {
        return Err(NlpError::DimensionMismatch(format!(
            "guess sized for {} stages, expected {}",
            guess.durations.len(),
            n
        )));
    }
    let layout = Layout::new(n, env, opts.mode);
    if guess.duals.len() != layout.n_pairs() {
        return Err(NlpError::DimensionMismatch(format!(
            "guess has {} dual pairs, layout needs {}",
            guess.duals.len(),
            layout.n_pairs()
        )));
    }
    let problem = Problem::new(env, params, weights, layout, opts);
    Ok(problem.run(guess))
}

struct Problem<'a> {
    env: &'a Environment,
    params: &'a SystemParams,
    weights: &'a Weights,
    opts: &'a SolverOptions,
    layout: Layout,
    /// Tightened bounds used by the projection.
    lo: Vec<f64>,
    hi: Vec<f64>,
    lo_raw: Vec<f64>,
    hi_raw: Vec<f64>,
    comps: Vec<ComponentGeom>,
    /// Body-frame component polytopes (for certificate refresh).
    comp_polys: Vec<HPolytope>,
    obstacles: Vec<ObstacleData>,
    beta_tight: f64,
}

#[derive(Clone)]
struct Multipliers {
    dynamics: Vec<f64>,
    stationarity: Vec<f64>,
    margin: Vec<f64>,
    norm: Vec<f64>,
}

struct ConstraintValues {
    /// 9 per stage.
    defects: Vec<f64>,
    /// `beta_tight - bound` per pair (feasible <= 0).
    margins: Vec<f64>,
    /// 3 per pair.
    stats: Vec<f64>,
    /// `||A_M' lambda_M||^2 - 1` per pair (feasible <= 0).
    norms: Vec<f64>,
}

impl ConstraintValues {
    fn max_violation(&self) -> f64 {
        let d = self.defects.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let m = self.margins.iter().fold(0.0f64, |a, v| a.max(*v));
        let s = self.stats.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let n = self.norms.iter().fold(0.0f64, |a, v| a.max(*v));
        d.max(m).max(s).max(n)
    }

    /// Violations reported against the nominal margin (tightening removed).
    fn groups(&self, slack: f64) -> GroupViolations {
        GroupViolations {
            dynamics: self.defects.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            margin: self
                .margins
                .iter()
                .fold(0.0f64, |a, v| a.max(v - slack)),
            stationarity: self.stats.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            norm_cap: self.norms.iter().fold(0.0f64, |a, v| a.max(*v)),
        }
    }
}

impl<'a> Problem<'a> {
    fn new(
        env: &'a Environment,
        params: &'a SystemParams,
        weights: &'a Weights,
        layout: Layout,
        opts: &'a SolverOptions,
    ) -> Self {
        let (lo_raw, hi_raw) = variable_bounds(env, weights, &layout);
        let mut lo = lo_raw.clone();
        let mut hi = hi_raw.clone();
        for idx in 0..layout.dual_offset() {
            if lo[idx] < hi[idx] {
                if lo[idx].is_finite() {
                    lo[idx] += BOUND_SLACK;
                }
                if hi[idx].is_finite() {
                    hi[idx] -= BOUND_SLACK;
                }
            }
        }
        let comps = components_for_mode(opts.mode, params);
        let comp_polys = comps.iter().map(|c| geometry::body_box(&c.b_n)).collect();
        Self {
            env,
            params,
            weights,
            opts,
            layout,
            lo,
            hi,
            lo_raw,
            hi_raw,
            comps,
            comp_polys,
            obstacles: obstacle_data(env),
            beta_tight: env.beta + MARGIN_SLACK,
        }
    }

    fn n(&self) -> usize {
        self.layout.n
    }

    fn project(&self, z: &mut [f64]) {
        for i in 0..z.len() {
            z[i] = z[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    fn state_at<'z>(&self, z: &'z [f64], k: usize) -> &'z [f64] {
        let o = self.layout.state_offset(k);
        &z[o..o + 9]
    }

    fn input_at<'z>(&self, z: &'z [f64], k: usize) -> &'z [f64] {
        let o = self.layout.input_offset(k.min(self.n() - 1));
        &z[o..o + 3]
    }

    /// Cost value and optional gradient accumulation.
    fn cost(&self, z: &[f64], guess: &[FlatState], mut grad: Option<&mut [f64]>) -> f64 {
        let n = self.n();
        let nf = n as f64;
        let w = self.weights;
        let mut f = 0.0;

        for k in 0..n {
            let dt = z[self.layout.duration_offset(k)];
            f += w.alpha_to / nf * dt;
            if let Some(g) = grad.as_deref_mut() {
                g[self.layout.duration_offset(k)] += w.alpha_to / nf;
            }
        }
        for k in 1..n {
            let a = self.layout.input_offset(k - 1);
            let b = self.layout.input_offset(k);
            for t in 0..3 {
                let d = z[b + t] - z[a + t];
                f += w.alpha_u / nf * d * d;
                if let Some(g) = grad.as_deref_mut() {
                    g[b + t] += 2.0 * w.alpha_u / nf * d;
                    g[a + t] -= 2.0 * w.alpha_u / nf * d;
                }
            }
        }
        let denom = nf - 1.0;
        for k in 1..n {
            let o = self.layout.state_offset(k);
            for t in 0..3 {
                let d = z[o + t] - guess[k].x_l[t];
                f += w.alpha_g / denom * d * d;
                if let Some(g) = grad.as_deref_mut() {
                    g[o + t] += 2.0 * w.alpha_g / denom * d;
                }
            }
        }
        for k in 0..n - 1 {
            let a = self.layout.duration_offset(k);
            let b = self.layout.duration_offset(k + 1);
            let d = z[b] - z[a];
            f += w.alpha_td / nf * d * d;
            if let Some(g) = grad.as_deref_mut() {
                g[b] += 2.0 * w.alpha_td / nf * d;
                g[a] -= 2.0 * w.alpha_td / nf * d;
            }
        }
        f
    }

    /// Stagewise defect of stage `k` (closed-form triple-integrator step).
    fn defect(&self, z: &[f64], k: usize) -> [f64; 9] {
        let x = self.state_at(z, k);
        let u = self.input_at(z, k);
        let dt = z[self.layout.duration_offset(k)];
        let nx = self.state_at(z, k + 1);
        let mut d = [0.0; 9];
        for t in 0..3 {
            let p = x[t] + dt * x[3 + t] + dt * dt / 2.0 * x[6 + t] + dt.powi(3) / 6.0 * u[t];
            let v = x[3 + t] + dt * x[6 + t] + dt * dt / 2.0 * u[t];
            let a = x[6 + t] + dt * u[t];
            d[t] = nx[t] - p;
            d[3 + t] = nx[3 + t] - v;
            d[6 + t] = nx[6 + t] - a;
        }
        d
    }

    /// Augmented Lagrangian value and optional gradient.
    fn eval(
        &self,
        z: &[f64],
        guess: &[FlatState],
        mul: &Multipliers,
        rho: f64,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut al = self.cost(z, guess, grad.as_deref_mut());
        let n = self.n();

        // Dynamics defects.
        for k in 0..n {
            let d = self.defect(z, k);
            let dt = z[self.layout.duration_offset(k)];
            let x = self.state_at(z, k);
            let u = self.input_at(z, k);
            let mut wvec = [0.0; 9];
            for t in 0..9 {
                let mu = mul.dynamics[9 * k + t];
                al += mu * d[t] + 0.5 * rho * d[t] * d[t];
                wvec[t] = mu + rho * d[t];
            }
            if let Some(g) = grad.as_deref_mut() {
                let ox1 = self.layout.state_offset(k + 1);
                let ox = self.layout.state_offset(k);
                let ou = self.layout.input_offset(k);
                let ot = self.layout.duration_offset(k);
                for t in 0..3 {
                    let (wp, wv, wa) = (wvec[t], wvec[3 + t], wvec[6 + t]);
                    // d defect / d x_{k+1} = I
                    g[ox1 + t] += wp;
                    g[ox1 + 3 + t] += wv;
                    g[ox1 + 6 + t] += wa;
                    // d defect / d x_k = -Phi, transposed application
                    g[ox + t] -= wp;
                    g[ox + 3 + t] -= dt * wp + wv;
                    g[ox + 6 + t] -= dt * dt / 2.0 * wp + dt * wv + wa;
                    // d defect / d u_k = -Gamma
                    g[ou + t] -= dt.powi(3) / 6.0 * wp + dt * dt / 2.0 * wv + dt * wa;
                    // d defect / d dt = -(v', a', j)
                    let vp = x[3 + t] + dt * x[6 + t] + dt * dt / 2.0 * u[t];
                    let ap = x[6 + t] + dt * u[t];
                    g[ot] -= wp * vp + wv * ap + wa * u[t];
                }
            }
        }

        // Collision constraint groups, stage by stage.
        let with_grad = grad.is_some();
        for k in 0..=n {
            if with_grad {
                let x = self.state_at(z, k);
                let u = self.input_at(z, k);
                let mut xd = [Dual::<12>::constant(0.0); 9];
                for t in 0..9 {
                    xd[t] = Dual::variable(x[t], t);
                }
                let mut ud = [Dual::<12>::constant(0.0); 3];
                for t in 0..3 {
                    ud[t] = Dual::variable(u[t], 9 + t);
                }
                match stage_poses(&xd, &ud, self.params, &self.comps, self.opts.rotation_aware) {
                    Ok(poses) => {
                        al += self.stage_terms(
                            z,
                            k,
                            &poses,
                            mul,
                            rho,
                            grad.as_deref_mut(),
                        );
                    }
                    Err(_) => return f64::INFINITY,
                }
            } else {
                let x: [f64; 9] = self.state_at(z, k).try_into().unwrap();
                let u: [f64; 3] = self.input_at(z, k).try_into().unwrap();
                match stage_poses(&x, &u, self.params, &self.comps, self.opts.rotation_aware) {
                    Ok(poses) => {
                        al += self.stage_terms(z, k, &poses, mul, rho, None);
                    }
                    Err(_) => return f64::INFINITY,
                }
            }
        }
        al
    }

    /// Collision AL terms of one stage. `S` carries tangents w.r.t. the 9
    /// state and 3 input slots of this stage when a gradient is requested.
    fn stage_terms<S: crate::ad::Scalar + TangentScatter>(
        &self,
        z: &[f64],
        k: usize,
        poses: &[(crate::ad::M3<S>, crate::ad::V3<S>)],
        mul: &Multipliers,
        rho: f64,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let n = self.n();
        let mut al = 0.0;
        let ox = self.layout.state_offset(k);
        let ou = self.layout.input_offset(k.min(n - 1));
        for j in 0..self.comps.len() {
            for i in 0..self.obstacles.len() {
                let pair_idx = (k * self.comps.len() + j) * self.obstacles.len() + i;
                let off = self.layout.pair_offset(k, j, i);
                let cf = self.layout.component_faces[j];
                let of = self.layout.obstacle_faces[i];
                let ln = &z[off..off + cf];
                let lm = &z[off + cf..off + cf + of];
                let pv = eval_pair(
                    &poses[j],
                    &self.comps[j],
                    &self.obstacles[i],
                    ln,
                    lm,
                    self.beta_tight,
                );

                // Margin inequality.
                let mu = mul.margin[pair_idx];
                let t = mu + rho * pv.margin.val();
                al += (t.max(0.0).powi(2) - mu * mu) / (2.0 * rho);
                let w_margin = t.max(0.0);

                // Stationarity equalities.
                let mut w_stat = [0.0; 3];
                for c in 0..3 {
                    let mu = mul.stationarity[3 * pair_idx + c];
                    let s = pv.stat[c].val();
                    al += mu * s + 0.5 * rho * s * s;
                    w_stat[c] = mu + rho * s;
                }

                // Norm cap inequality (multiplier-only).
                let mu = mul.norm[pair_idx];
                let tn = mu + rho * pv.norm_excess_sq;
                al += (tn.max(0.0).powi(2) - mu * mu) / (2.0 * rho);
                let w_norm = tn.max(0.0);

                if let Some(g) = grad.as_deref_mut() {
                    // State/input tangents.
                    pv.margin.scatter(w_margin, g, ox, ou);
                    for c in 0..3 {
                        pv.stat[c].scatter(w_stat[c], g, ox, ou);
                    }
                    // Multiplier partials.
                    let lj = pair_lambda_jacobian(&poses[j], &self.comps[j], &self.obstacles[i]);
                    for t in 0..cf {
                        g[off + t] += w_margin * lj.dmargin_dln[t];
                        let (axis, sign) = dstat_dln(t);
                        g[off + t] += w_stat[axis] * sign;
                    }
                    for r in 0..of {
                        let gi = off + cf + r;
                        g[gi] += w_margin * lj.dmargin_dlm[r];
                        for c in 0..3 {
                            g[gi] += w_stat[c] * lj.dstat_dlm[r][c];
                        }
                        // d norm^2 / d lambda_m[r] = 2 w_m . row_r
                        let row = &self.obstacles[i].rows[r];
                        let dn = 2.0 * (pv.w_m[0] * row[0] + pv.w_m[1] * row[1] + pv.w_m[2] * row[2]);
                        g[gi] += w_norm * dn;
                    }
                }
            }
        }
        al
    }

    /// All constraint values at `z` (plain pass, no gradients).
    fn constraints(&self, z: &[f64]) -> ConstraintValues {
        let n = self.n();
        let pairs = self.layout.n_pairs();
        let mut cv = ConstraintValues {
            defects: Vec::with_capacity(9 * n),
            margins: Vec::with_capacity(pairs),
            stats: Vec::with_capacity(3 * pairs),
            norms: Vec::with_capacity(pairs),
        };
        for k in 0..n {
            cv.defects.extend(self.defect(z, k));
        }
        for k in 0..=n {
            let x: [f64; 9] = self.state_at(z, k).try_into().unwrap();
            let u: [f64; 3] = self.input_at(z, k).try_into().unwrap();
            let poses = stage_poses(&x, &u, self.params, &self.comps, self.opts.rotation_aware)
                .expect("states within bounds avoid the taut-cable singularity");
            for j in 0..self.comps.len() {
                for i in 0..self.obstacles.len() {
                    let off = self.layout.pair_offset(k, j, i);
                    let cf = self.layout.component_faces[j];
                    let of = self.layout.obstacle_faces[i];
                    let pv = eval_pair(
                        &poses[j],
                        &self.comps[j],
                        &self.obstacles[i],
                        &z[off..off + cf],
                        &z[off + cf..off + cf + of],
                        self.beta_tight,
                    );
                    cv.margins.push(pv.margin);
                    cv.stats.extend(pv.stat);
                    cv.norms.push(pv.norm_excess_sq);
                }
            }
        }
        cv
    }

    /// Replace every dual block with the optimal certificate at the current
    /// states, where the pair is separated.
    fn refresh_duals(&self, z: &mut [f64]) {
        let n = self.n();
        for k in 0..=n {
            let x: [f64; 9] = self.state_at(z, k).try_into().unwrap();
            let u: [f64; 3] = self.input_at(z, k).try_into().unwrap();
            let Ok(poses) = stage_poses(&x, &u, self.params, &self.comps, self.opts.rotation_aware)
            else {
                return;
            };
            for (j, pose) in poses.iter().enumerate() {
                let (r_n, o_n) = pose;
                let r = Matrix3::from_fn(|a, b| r_n[a][b]);
                let o = Vector3::new(o_n[0], o_n[1], o_n[2]);
                let r_dyn = DMatrix::from_column_slice(3, 3, r.as_slice());
                for (i, obs) in self.env.obstacles.iter().enumerate() {
                    // Obstacle re-expressed in the component frame, with its
                    // vertices mapped instead of re-enumerated.
                    let a = obs.a() * &r_dyn;
                    let b = obs.b() - obs.a() * o;
                    let verts = obs
                        .vertices()
                        .iter()
                        .map(|v| r.transpose() * (v - o))
                        .collect();
                    let m_frame = HPolytope::from_valid_parts_with_vertices(a, b, verts);
                    if let Ok((_, duals)) = max_dual_bound(&m_frame, &self.comp_polys[j]) {
                        let off = self.layout.pair_offset(k, j, i);
                        let cf = self.layout.component_faces[j];
                        for t in 0..cf {
                            z[off + t] = duals.lambda_n[t];
                        }
                        for t in 0..self.layout.obstacle_faces[i] {
                            z[off + cf + t] = duals.lambda_m[t];
                        }
                    }
                }
            }
        }
    }

    /// Minimum-norm input correction so the rollout hits the pinned goal,
    /// then replace states by the rollout. Returns false (leaving `z`
    /// untouched) if bounds block the correction.
    fn polish(&self, z: &mut [f64]) -> bool {
        let n = self.n();
        let saved = z.to_vec();
        let goal: [f64; 9] = self.state_at(z, n).try_into().unwrap();

        let rollout = |z: &[f64]| -> Vec<FlatState> {
            let mut states = Vec::with_capacity(n + 1);
            let mut s = FlatState::from_array(&self.state_at(z, 0).try_into().unwrap());
            states.push(s);
            for k in 0..n {
                let u = self.input_at(z, k);
                let dt = z[self.layout.duration_offset(k)];
                s = rk4_step(
                    &s,
                    &crate::flatness::FlatInput {
                        j_l: Vector3::new(u[0], u[1], u[2]),
                    },
                    dt,
                )
                .expect("positive durations");
                states.push(s);
            }
            states
        };

        let states = rollout(z);
        let missed = states[n].to_array();
        let mut r = SMatrix::<f64, 9, 1>::zeros();
        for t in 0..9 {
            r[t] = goal[t] - missed[t];
        }
        if r.amax() > 1e-3 {
            return false;
        }

        // Sensitivities of x_N to each free input via backward products.
        let phi = |dt: f64| {
            let mut m = SMatrix::<f64, 9, 9>::identity();
            for t in 0..3 {
                m[(t, 3 + t)] = dt;
                m[(t, 6 + t)] = dt * dt / 2.0;
                m[(3 + t, 6 + t)] = dt;
            }
            m
        };
        let gamma = |dt: f64| {
            let mut m = SMatrix::<f64, 9, 3>::zeros();
            for t in 0..3 {
                m[(t, t)] = dt.powi(3) / 6.0;
                m[(3 + t, t)] = dt * dt / 2.0;
                m[(6 + t, t)] = dt;
            }
            m
        };
        let mut sens = vec![SMatrix::<f64, 9, 3>::zeros(); n];
        let mut p = SMatrix::<f64, 9, 9>::identity();
        for k in (0..n).rev() {
            let dt = z[self.layout.duration_offset(k)];
            sens[k] = p * gamma(dt);
            p *= phi(dt);
        }
        let free: Vec<usize> = (1..n - 1).collect();
        let mut cct = SMatrix::<f64, 9, 9>::zeros();
        for &k in &free {
            cct += sens[k] * sens[k].transpose();
        }
        cct += SMatrix::<f64, 9, 9>::identity() * 1e-12;
        let Some(y) = cct.lu().solve(&r) else {
            return false;
        };
        for &k in &free {
            let du = sens[k].transpose() * y;
            let o = self.layout.input_offset(k);
            for t in 0..3 {
                z[o + t] += du[t];
                if z[o + t] < self.lo_raw[o + t] || z[o + t] > self.hi_raw[o + t] {
                    z.copy_from_slice(&saved);
                    return false;
                }
            }
        }

        let states = rollout(z);
        let miss = {
            let got = states[n].to_array();
            (0..9).fold(0.0f64, |a, t| a.max((goal[t] - got[t]).abs()))
        };
        if miss > 5e-7 {
            z.copy_from_slice(&saved);
            return false;
        }
        for (k, s) in states.iter().enumerate().take(n).skip(1) {
            let arr = s.to_array();
            let o = self.layout.state_offset(k);
            for t in 0..9 {
                if arr[t] < self.lo_raw[o + t] - 1e-12 || arr[t] > self.hi_raw[o + t] + 1e-12 {
                    z.copy_from_slice(&saved);
                    return false;
                }
                z[o + t] = arr[t];
            }
        }
        true
    }

    /// Oracle-grade verification of a candidate solution: refreshed
    /// certificates, exact margins, tiny defects, and weak-duality soundness.
    fn verify_final(&self, z: &mut [f64]) -> bool {
        if self.opts.defect_polish && !self.polish(z) {
            return false;
        }
        self.refresh_duals(z);
        let cv = self.constraints(z);
        let g = cv.groups(MARGIN_SLACK);
        if g.dynamics > 1e-6 || g.margin > 1e-9 || g.stationarity > 1e-6 || g.norm_cap > 1e-9 {
            return false;
        }
        // Weak-duality soundness: every certified margin must be confirmed by
        // the independent oracle on the world-frame polytopes.
        let n = self.n();
        for k in 0..=n {
            let x: [f64; 9] = self.state_at(z, k).try_into().unwrap();
            let u: [f64; 3] = self.input_at(z, k).try_into().unwrap();
            let Ok(poses) =
                stage_poses(&x, &u, self.params, &self.comps, self.opts.rotation_aware)
            else {
                return false;
            };
            for (j, pose) in poses.iter().enumerate() {
                let r = Matrix3::from_fn(|a, b| pose.0[a][b]);
                let o = Vector3::new(pose.1[0], pose.1[1], pose.1[2]);
                let world = match geometry::make_box(
                    Vector3::new(self.comps[j].b_n[0], self.comps[j].b_n[2], self.comps[j].b_n[4]),
                    &geometry::Pose::new(r, o).expect("reconstructed rotation is orthonormal"),
                ) {
                    Ok(p) => p,
                    Err(_) => return false,
                };
                for obs in &self.env.obstacles {
                    if signed_distance_oracle(obs, &world) < self.env.beta - 1e-9 {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn run(&self, guess: &DecisionVector) -> (Trajectory, SolveReport) {
        let start = Instant::now();
        let guess_states = guess.states.clone();
        let mut z = guess.to_flat(&self.layout);
        self.project(&mut z);

        let pairs = self.layout.n_pairs();
        let mut mul = Multipliers {
            dynamics: vec![0.0; 9 * self.n()],
            stationarity: vec![0.0; 3 * pairs],
            margin: vec![0.0; pairs],
            norm: vec![0.0; pairs],
        };
        let mut rho = self.opts.rho_init;

        // Stationarity scale for the KKT measure: plain cost gradient.
        let mut g0 = vec![0.0; z.len()];
        self.cost(&z, &guess_states, Some(&mut g0));
        let s_d = g0.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let omega_floor = 0.5 * self.opts.tol_kkt * s_d;

        let mut eta = 1e-1f64;
        let mut total_iters = 0usize;
        let mut status = SolveStatus::MaxIter;
        let mut kkt = f64::INFINITY;
        let mut stall = 0usize;
        let mut best_viol = f64::INFINITY;

        for _outer in 0..MAX_OUTER {
            if self.opts.dual_refresh {
                self.refresh_duals(&mut z);
            }
            let budget = self.opts.max_iters.saturating_sub(total_iters).min(400);
            if budget == 0 {
                status = SolveStatus::MaxIter;
                break;
            }
            // Relative inner target: reduce the projected gradient by 10x,
            // never asking for less than the final tolerance.
            let mut g = vec![0.0; z.len()];
            let f_entry = self.eval(&z, &guess_states, &mul, rho, Some(&mut g));
            if !f_entry.is_finite() {
                status = SolveStatus::Diverged;
                break;
            }
            let pg_entry = self.projected_gradient_norm(&z, &g);
            let omega = (0.1 * pg_entry).max(omega_floor);

            let (used, pg, finite) = self.inner(&mut z, &guess_states, &mul, rho, omega, budget);
            total_iters += used;
            if !finite {
                status = SolveStatus::Diverged;
                break;
            }
            kkt = pg / s_d;
            let inner_converged = pg <= omega * 1.0001 || used == 0;

            let cv = self.constraints(&z);
            let viol = cv.max_violation();
            if std::env::var_os("POLYFLY_TRACE").is_some() {
                eprintln!(
                    "outer {_outer:3}: rho {rho:9.1e} viol {viol:9.2e} pg {pg:9.2e} kkt {kkt:9.2e} omega {omega:9.2e} eta {eta:9.2e} inner {used:4} total {total_iters:5}"
                );
                let (mut wi, mut wv) = (0usize, 0.0f64);
                for (t, d) in cv.defects.iter().enumerate() {
                    if d.abs() > wv {
                        wv = d.abs();
                        wi = t;
                    }
                }
                eprintln!(
                    "   worst defect {:.3e} at stage {} slot {}; worst margin {:.3e}",
                    wv,
                    wi / 9,
                    wi % 9,
                    cv.margins.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v)),
                );
            }

            if viol <= eta.max(self.opts.tol_feas) {
                for (t, d) in cv.defects.iter().enumerate() {
                    mul.dynamics[t] += rho * d;
                }
                for (t, s) in cv.stats.iter().enumerate() {
                    mul.stationarity[t] += rho * s;
                }
                for (t, m) in cv.margins.iter().enumerate() {
                    mul.margin[t] = (mul.margin[t] + rho * m).max(0.0);
                }
                for (t, nv) in cv.norms.iter().enumerate() {
                    mul.norm[t] = (mul.norm[t] + rho * nv).max(0.0);
                }
                if viol <= self.opts.tol_feas && kkt <= self.opts.tol_kkt {
                    if self.verify_final(&mut z) {
                        status = SolveStatus::Solved;
                        break;
                    }
                }
                eta = (eta * 0.2).max(0.5 * self.opts.tol_feas);
            } else if inner_converged {
                // Proper minimization at this rho did not reach the
                // violation target: raise the penalty.
                if rho >= self.opts.rho_max {
                    stall += 1;
                    if viol < best_viol * 0.9 {
                        stall = 0;
                    }
                    if stall >= 4 {
                        status = SolveStatus::Infeasible;
                        break;
                    }
                } else {
                    rho = (rho * 4.0).min(self.opts.rho_max);
                }
            }
            best_viol = best_viol.min(viol);
            if total_iters >= self.opts.max_iters {
                status = SolveStatus::MaxIter;
                break;
            }
        }

        let cv = self.constraints(&z);
        let groups = cv.groups(MARGIN_SLACK);
        let decision = DecisionVector::from_flat(&z, &self.layout);
        let objective = cost_total(&decision, &guess_states, self.weights);
        let report = SolveReport {
            status,
            iterations: total_iters,
            kkt_residual: kkt,
            constraint_violation: groups
                .dynamics
                .max(groups.margin)
                .max(groups.stationarity)
                .max(groups.norm_cap),
            objective,
            wall_time: start.elapsed().as_secs_f64(),
            group_violations: groups,
        };
        let traj = Trajectory {
            env_name: self.env.name.clone(),
            decision,
            mode: self.opts.mode,
            report: report.clone(),
            seed: false,
        };
        (traj, report)
    }

    /// Projected L-BFGS descent on the augmented Lagrangian. Returns
    /// (iterations used, final projected-gradient norm, finite?).
    fn inner(
        &self,
        z: &mut Vec<f64>,
        guess: &[FlatState],
        mul: &Multipliers,
        rho: f64,
        omega: f64,
        budget: usize,
    ) -> (usize, f64, bool) {
        let dim = z.len();
        let mut g = vec![0.0; dim];
        let mut f = self.eval(z, guess, mul, rho, Some(&mut g));
        if !f.is_finite() {
            return (0, f64::INFINITY, false);
        }
        let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        let mut used = 0usize;
        let mut pg_norm = self.projected_gradient_norm(z, &g);

        while used < budget {
            if pg_norm <= omega {
                break;
            }
            let mut d = two_loop(&g, &memory);
            for v in d.iter_mut() {
                *v = -*v;
            }
            // Descent safeguard.
            let gd: f64 = g.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
            if !gd.is_finite() || gd >= 0.0 {
                memory.clear();
                d = g.iter().map(|v| -v).collect();
            }

            let mut alpha = 1.0;
            let mut accepted = false;
            let mut z_new = vec![0.0; dim];
            let mut f_new = f;
            for _ in 0..30 {
                for i in 0..dim {
                    z_new[i] = (z[i] + alpha * d[i]).clamp(self.lo[i], self.hi[i]);
                }
                let step_sq: f64 = z_new
                    .iter()
                    .zip(z.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if step_sq == 0.0 {
                    break;
                }
                f_new = self.eval(&z_new, guess, mul, rho, None);
                let dir: f64 = g
                    .iter()
                    .zip(z_new.iter().zip(z.iter()))
                    .map(|(gi, (a, b))| gi * (a - b))
                    .sum();
                if f_new.is_finite() && f_new <= f + 1e-4 * dir.min(0.0) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                if memory.is_empty() {
                    break;
                }
                memory.clear();
                continue;
            }

            let mut g_new = vec![0.0; dim];
            let f_check = self.eval(&z_new, guess, mul, rho, Some(&mut g_new));
            if !f_check.is_finite() {
                return (used, pg_norm, false);
            }
            let s: Vec<f64> = z_new.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(g.iter()).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|v| v * v).sum();
            let yy: f64 = y.iter().map(|v| v * v).sum();
            if sy > 1e-10 * ss.sqrt() * yy.sqrt() {
                if memory.len() == LBFGS_MEMORY {
                    memory.pop_front();
                }
                memory.push_back((s, y, 1.0 / sy));
            }
            z.copy_from_slice(&z_new);
            f = f_new;
            g = g_new;
            used += 1;
            pg_norm = self.projected_gradient_norm(z, &g);
        }
        (used, pg_norm, true)
    }

    fn projected_gradient_norm(&self, z: &[f64], g: &[f64]) -> f64 {
        let mut norm = 0.0f64;
        for i in 0..z.len() {
            let step = (z[i] - g[i]).clamp(self.lo[i], self.hi[i]);
            norm = norm.max((z[i] - step).abs());
        }
        norm
    }
}

/// L-BFGS two-loop recursion; returns `H g`.
fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    if memory.is_empty() {
        return q;
    }
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, r) in memory.iter().rev() {
        let a = r * s.iter().zip(q.iter()).map(|(a, b)| a * b).sum::<f64>();
        for (qi, yi) in q.iter_mut().zip(y.iter()) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let (s_last, y_last, _) = memory.back().unwrap();
    let sy: f64 = s_last.iter().zip(y_last.iter()).map(|(a, b)| a * b).sum();
    let yy: f64 = y_last.iter().map(|v| v * v).sum();
    let gamma = (sy / yy).max(1e-12);
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, r), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = r * y.iter().zip(q.iter()).map(|(a, b)| a * b).sum::<f64>();
        for (qi, si) in q.iter_mut().zip(s.iter()) {
            *qi += (a - b) * si;
        }
    }
    q
}

/// Scatter of per-stage tangents into the flat gradient. `f64` carries no
/// tangents; `Dual<12>` maps slots 0..9 to the stage's state block and 9..12
/// to its input block.
pub(crate) trait TangentScatter {
    fn scatter(&self, weight: f64, grad: &mut [f64], state_off: usize, input_off: usize);
}

impl TangentScatter for f64 {
    #[inline]
    fn scatter(&self, _weight: f64, _grad: &mut [f64], _state_off: usize, _input_off: usize) {}
}

impl TangentScatter for Dual<12> {
    #[inline]
    fn scatter(&self, weight: f64, grad: &mut [f64], state_off: usize, input_off: usize) {
        for t in 0..9 {
            grad[state_off + t] += weight * self.dx[t];
        }
        for t in 0..3 {
            grad[input_off + t] += weight * self.dx[9 + t];
        }
    }
}
