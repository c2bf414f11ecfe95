//! Seed generation: A* path under the vertical-cable assumption, arclength
//! resampling, velocity seeding, and a bound-feasible initial decision vector.
//!
//! The grid search ignores the nonlinear dynamics entirely: the cable is
//! assumed vertical (quadrotor exactly one cable length above the payload,
//! identity attitude) and a node is traversable when all three component
//! polytopes keep at least `beta` oracle distance from every obstacle. Edge
//! costs are Euclidean step lengths in fixed-point units (1e12 per grid
//! step), so optimal path costs are exact integers and independent of the
//! expansion order.

use crate::environment::{ComponentSet, EnvError, Environment};
use crate::flatness::{FlatInput, FlatState, SystemParams};
use crate::geometry::DualPair;
use crate::nlp::{variable_bounds, DecisionVector, Layout, Mode, Weights};
use nalgebra::Vector3;
use std::collections::{BinaryHeap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InitError {
    #[error("no collision-free grid path from start to goal")]
    NoPath,
    #[error("velocity seeding needs dt_max > dt_min")]
    DegenerateDtRange,
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Integer cost of one grid step, per unit step length.
pub const COST_SCALE: u64 = 1_000_000_000_000;
/// Step costs for moves touching 1, 2, or 3 axes (sqrt scaled by 1e12).
pub const STEP_COSTS: [u64; 3] = [1_000_000_000_000, 1_414_213_562_373, 1_732_050_807_569];

/// Collision-free payload waypoint chain on the search grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedPath {
    pub waypoints: Vec<Vector3<f64>>,
    pub grid_resolution: f64,
    /// Grid path cost in meters (integer cost times resolution).
    pub cost: f64,
}

impl SeedPath {
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }
}

/// 26-connected A* between grid nodes. `blocked` marks untraversable nodes;
/// bounds are inclusive index ranges. Returns the node chain and its exact
/// integer cost. Ties are broken lexicographically, so the result is
/// deterministic.
pub fn astar_grid(
    dims: [i64; 3],
    blocked: &mut dyn FnMut([i64; 3]) -> bool,
    start: [i64; 3],
    goal: [i64; 3],
) -> Option<(Vec<[i64; 3]>, u64)> {
    let in_bounds =
        |n: [i64; 3]| n.iter().zip(dims.iter()).all(|(v, d)| *v >= 0 && v < d);
    if !in_bounds(start) || !in_bounds(goal) {
        return None;
    }
    let mut block_cache: HashMap<[i64; 3], bool> = HashMap::new();
    let mut is_blocked = |n: [i64; 3], cache: &mut HashMap<[i64; 3], bool>| -> bool {
        *cache.entry(n).or_insert_with(|| blocked(n))
    };
    if is_blocked(start, &mut block_cache) || is_blocked(goal, &mut block_cache) {
        return None;
    }

    // Admissible heuristic: Euclidean distance in scaled units with a slack
    // subtracted to absorb the rounding of the diagonal step constants.
    let h = |n: [i64; 3]| -> u64 {
        let dx = (n[0] - goal[0]) as f64;
        let dy = (n[1] - goal[1]) as f64;
        let dz = (n[2] - goal[2]) as f64;
        let d = (dx * dx + dy * dy + dz * dz).sqrt() * COST_SCALE as f64;
        (d as u64).saturating_sub(1_000_000)
    };

    // Max-heap on Reverse((f, node)): lexicographic node order breaks f ties.
    let mut open: BinaryHeap<std::cmp::Reverse<(u64, [i64; 3])>> = BinaryHeap::new();
    let mut g_score: HashMap<[i64; 3], u64> = HashMap::new();
    let mut parent: HashMap<[i64; 3], [i64; 3]> = HashMap::new();
    g_score.insert(start, 0);
    open.push(std::cmp::Reverse((h(start), start)));

    while let Some(std::cmp::Reverse((f, node))) = open.pop() {
        let g = g_score[&node];
        if f > g.saturating_add(h(node)) {
            continue; // stale entry
        }
        if node == goal {
            let mut chain = vec![node];
            let mut cur = node;
            while let Some(p) = parent.get(&cur) {
                cur = *p;
                chain.push(cur);
            }
            chain.reverse();
            return Some((chain, g));
        }
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                for dz in -1..=1i64 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let next = [node[0] + dx, node[1] + dy, node[2] + dz];
                    if !in_bounds(next) || is_blocked(next, &mut block_cache) {
                        continue;
                    }
                    let axes = (dx.abs() + dy.abs() + dz.abs()) as usize;
                    let tentative = g + STEP_COSTS[axes - 1];
                    if g_score.get(&next).map_or(true, |old| tentative < *old) {
                        g_score.insert(next, tentative);
                        parent.insert(next, node);
                        open.push(std::cmp::Reverse((tentative + h(next), next)));
                    }
                }
            }
        }
    }
    None
}

fn grid_dims(env: &Environment, resolution: f64) -> [i64; 3] {
    let mut dims = [0i64; 3];
    for i in 0..3 {
        dims[i] = ((env.bounds_hi[i] - env.bounds_lo[i]) / resolution).floor() as i64 + 1;
    }
    dims
}

fn node_position(env: &Environment, resolution: f64, n: [i64; 3]) -> Vector3<f64> {
    Vector3::new(
        env.bounds_lo.x + n[0] as f64 * resolution,
        env.bounds_lo.y + n[1] as f64 * resolution,
        env.bounds_lo.z + n[2] as f64 * resolution,
    )
}

fn nearest_node(env: &Environment, resolution: f64, p: &Vector3<f64>, dims: [i64; 3]) -> [i64; 3] {
    let mut n = [0i64; 3];
    for i in 0..3 {
        let idx = ((p[i] - env.bounds_lo[i]) / resolution).round() as i64;
        n[i] = idx.clamp(0, dims[i] - 1);
    }
    n
}

/// Hover-model clearance predicate for one payload position.
pub fn hover_clear(env: &Environment, params: &SystemParams, x_l: &Vector3<f64>) -> bool {
    let Ok(set) = ComponentSet::hover(x_l, params) else {
        return false;
    };
    env.obstacles
        .iter()
        .all(|obs| set.min_distance_to(obs) >= env.beta - 1e-9)
}

/// Conservative single-box clearance predicate (for the single-polytope mode).
pub fn combined_clear(env: &Environment, params: &SystemParams, x_l: &Vector3<f64>) -> bool {
    let Ok(poly) = crate::environment::combined_polytope(x_l, params) else {
        return false;
    };
    env.obstacles
        .iter()
        .all(|obs| crate::geometry::signed_distance_oracle(obs, &poly) >= env.beta - 1e-9)
}

/// A* seed path at the given grid resolution. The exact start and goal are
/// prepended/appended to the snapped grid chain.
pub fn astar_seed(
    env: &Environment,
    params: &SystemParams,
    resolution: f64,
) -> Result<SeedPath, InitError> {
    astar_seed_with(env, params, resolution, &mut |p| hover_clear(env, params, p))
}

/// Seed search with a custom traversability predicate on payload positions.
pub fn astar_seed_with(
    env: &Environment,
    params: &SystemParams,
    resolution: f64,
    clear: &mut dyn FnMut(&Vector3<f64>) -> bool,
) -> Result<SeedPath, InitError> {
    let _ = params;
    assert!(resolution > 0.0);
    let dims = grid_dims(env, resolution);
    let start_node = nearest_node(env, resolution, &env.start, dims);
    let goal_node = nearest_node(env, resolution, &env.goal, dims);
    let mut blocked = |n: [i64; 3]| !clear(&node_position(env, resolution, n));
    let (chain, cost) =
        astar_grid(dims, &mut blocked, start_node, goal_node).ok_or(InitError::NoPath)?;

    let mut waypoints = Vec::with_capacity(chain.len() + 2);
    let first = node_position(env, resolution, chain[0]);
    if (first - env.start).norm() > 1e-12 {
        waypoints.push(env.start);
    }
    waypoints.extend(chain.iter().map(|n| node_position(env, resolution, *n)));
    let last = *waypoints.last().unwrap();
    if (last - env.goal).norm() > 1e-12 {
        waypoints.push(env.goal);
    }
    Ok(SeedPath {
        waypoints,
        grid_resolution: resolution,
        cost: cost as f64 / COST_SCALE as f64 * resolution,
    })
}

/// `count + 1` points at equal arclength along the polyline, endpoints exact.
pub fn resample(path: &SeedPath, count: usize) -> Vec<Vector3<f64>> {
    assert!(count >= 2, "need at least two segments");
    let pts = &path.waypoints;
    let mut cumulative = vec![0.0];
    for w in pts.windows(2) {
        let d = (w[1] - w[0]).norm();
        cumulative.push(cumulative.last().unwrap() + d);
    }
    let total = *cumulative.last().unwrap();
    if total <= 0.0 {
        return vec![pts[0]; count + 1];
    }
    let mut out = Vec::with_capacity(count + 1);
    out.push(pts[0]);
    let mut seg = 0usize;
    for i in 1..count {
        let target = total * i as f64 / count as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let t = (target - cumulative[seg]) / (cumulative[seg + 1] - cumulative[seg]);
        out.push(pts[seg] + t * (pts[seg + 1] - pts[seg]));
    }
    out.push(*pts.last().unwrap());
    out
}

/// Velocity seed `v_k = (x_{k+1} - x_k) / (dt_max - dt_min)`, with rest at
/// the final knot.
pub fn seed_velocities(
    points: &[Vector3<f64>],
    dt_min: f64,
    dt_max: f64,
) -> Result<Vec<Vector3<f64>>, InitError> {
    if dt_max <= dt_min {
        return Err(InitError::DegenerateDtRange);
    }
    let denom = dt_max - dt_min;
    let mut v: Vec<Vector3<f64>> = points.windows(2).map(|w| (w[1] - w[0]) / denom).collect();
    v.push(Vector3::zeros());
    Ok(v)
}

/// Uniform dual multiplier seed.
pub const EPS_LAMBDA: f64 = 0.01;

/// Complete, bound-feasible initial decision vector: resampled A* positions,
/// velocity seeding (optional), zero accelerations and inputs, mid-window
/// durations, and uniform small duals. Every variable is clamped into its
/// box bounds afterwards (which zeroes the pinned endpoint velocities).
pub fn seed_all(
    env: &Environment,
    params: &SystemParams,
    weights: &Weights,
    n: usize,
    mode: Mode,
    velocity_init: bool,
) -> Result<DecisionVector, InitError> {
    let resolution = default_resolution(env);
    let path = match mode {
        Mode::ComponentWise => astar_seed(env, params, resolution)?,
        Mode::SinglePolytope => {
            astar_seed_with(env, params, resolution, &mut |p| combined_clear(env, params, p))?
        }
    };
    seed_from_path(env, params, weights, n, mode, velocity_init, &path)
}

/// Default grid resolution: fine enough to resolve the margin band.
pub fn default_resolution(env: &Environment) -> f64 {
    (env.beta * 2.0).clamp(0.05, 0.1)
}

pub fn seed_from_path(
    env: &Environment,
    params: &SystemParams,
    weights: &Weights,
    n: usize,
    mode: Mode,
    velocity_init: bool,
    path: &SeedPath,
) -> Result<DecisionVector, InitError> {
    let _ = params;
    let positions = resample(path, n);
    let velocities = if velocity_init {
        seed_velocities(&positions, weights.dt_min, weights.dt_max)?
    } else {
        vec![Vector3::zeros(); n + 1]
    };
    let states: Vec<FlatState> = positions
        .iter()
        .zip(velocities.iter())
        .map(|(p, v)| FlatState {
            x_l: *p,
            v_l: *v,
            a_l: Vector3::zeros(),
        })
        .collect();
    let layout = Layout::new(n, env, mode);
    let mut guess = DecisionVector {
        states,
        inputs: vec![FlatInput::zeros(); n],
        durations: vec![(weights.dt_min + weights.dt_max) / 2.0; n],
        duals: (0..layout.n_pairs())
            .map(|idx| {
                let pair_in_stage = idx % (layout.n_components() * layout.n_obstacles());
                let j = pair_in_stage / layout.n_obstacles().max(1);
                let i = pair_in_stage % layout.n_obstacles().max(1);
                DualPair::uniform(
                    layout.obstacle_faces.get(i).copied().unwrap_or(0),
                    layout.component_faces[j],
                    EPS_LAMBDA,
                )
            })
            .collect(),
    };

    // Clamp into the box bounds (pins the endpoint rest conditions).
    let (lo, hi) = variable_bounds(env, weights, &layout);
    let mut flat = guess.to_flat(&layout);
    for i in 0..flat.len() {
        flat[i] = flat[i].clamp(lo[i], hi[i]);
    }
    guess = DecisionVector::from_flat(&flat, &layout);
    Ok(guess)
}
