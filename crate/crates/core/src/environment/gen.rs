//! Deterministic scenario generators.
//!
//! Every generator returns a validated [`Environment`] with a corridor the
//! seed search can traverse at hover attitude (checked before returning).
//! Obstacles are axis-aligned or z-rotated boxes; seeded generators use
//! ChaCha so the same seed reproduces the same scene on any platform.

use super::{EnvError, Environment};
use crate::flatness::SystemParams;
use crate::geometry::{make_box, HPolytope, Pose};
use crate::initializer;
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn slab(lo: Vector3<f64>, hi: Vector3<f64>) -> HPolytope {
    let half = (hi - lo) / 2.0;
    let center = (hi + lo) / 2.0;
    make_box(half, &Pose::translation(center)).expect("slab extents are positive")
}

/// Straight corridor between two walls that span the workspace sides.
pub fn gen_corridor(params: &SystemParams) -> Result<Environment, EnvError> {
    let env = Environment {
        name: "corridor".into(),
        obstacles: vec![
            slab(Vector3::new(1.0, 0.7, 0.0), Vector3::new(5.0, 2.0, 3.0)),
            slab(Vector3::new(1.0, -2.0, 0.0), Vector3::new(5.0, -0.7, 3.0)),
        ],
        bounds_lo: Vector3::new(-1.0, -2.0, 0.0),
        bounds_hi: Vector3::new(7.0, 2.0, 3.0),
        start: Vector3::new(0.0, 0.0, 1.0),
        goal: Vector3::new(6.0, 0.0, 1.0),
        beta: 0.05,
    };
    env.validate(params)?;
    Ok(env)
}

/// A beam across the workspace whose only opening is a vertical slot of
/// `gap_width`, covering exactly the cable's altitude band: the quadrotor
/// passes above the beam, the payload below it, and the cable threads the
/// slot. A ceiling closes the escape route over the beam so that a single
/// conservative bounding box cannot pass anywhere.
pub fn gen_narrow_gap(gap_width: f64, params: &SystemParams) -> Result<Environment, EnvError> {
    if gap_width <= 2.0 * params.cable_halfwidth {
        return Err(EnvError::InfeasibleSpec(format!(
            "gap width {gap_width} does not exceed the cable width {}",
            2.0 * params.cable_halfwidth
        )));
    }
    let beta = 0.03;
    let l = params.cable_length;
    let qh = params.quad_half_extents_vec();
    let ph = params.payload_half_extents_vec();

    let z_payload = 0.65;
    let z_quad = z_payload + l;
    // Beam band leaves slack above the payload box and below the quadrotor box.
    let z1 = z_payload + ph.z + beta + 0.10;
    let z2 = z_quad - qh.z - beta - 0.10;
    if z2 - z1 < 0.15 {
        return Err(EnvError::InfeasibleSpec(
            "cable too short to span a usable beam band".into(),
        ));
    }
    let (y_lo, y_hi) = (-1.4, 1.4);
    let (bx0, bx1) = (1.9, 2.1);
    let ceil_lo = z_quad + qh.z + beta + 0.15;

    let env = Environment {
        name: "narrow-gap".into(),
        obstacles: vec![
            slab(
                Vector3::new(bx0, y_lo, z1),
                Vector3::new(bx1, -gap_width / 2.0, z2),
            ),
            slab(
                Vector3::new(bx0, gap_width / 2.0, z1),
                Vector3::new(bx1, y_hi, z2),
            ),
            slab(
                Vector3::new(-0.8, y_lo, ceil_lo),
                Vector3::new(4.8, y_hi, ceil_lo + 0.4),
            ),
        ],
        bounds_lo: Vector3::new(-0.8, y_lo, 0.2),
        bounds_hi: Vector3::new(4.8, y_hi, ceil_lo + 0.5),
        start: Vector3::new(0.0, 0.0, z_payload),
        goal: Vector3::new(4.0, 0.0, z_payload),
        beta,
    };
    env.validate(params)?;
    Ok(env)
}

/// Flat tunnel: raised floor and low ceiling with just enough headroom for
/// the hover stack plus a small vertical band. Flying fast means tilting, and
/// tilting swings the rotor-arm corners toward the ceiling, so attitude-aware
/// collision modeling matters here.
pub fn gen_low_ceiling(params: &SystemParams) -> Result<Environment, EnvError> {
    let beta = 0.03;
    let l = params.cable_length;
    let qh = params.quad_half_extents_vec();
    let ph = params.payload_half_extents_vec();

    let floor_top = 1.0;
    let p_min = floor_top + ph.z + beta;
    let band = 0.12;
    let ceil_lo = p_min + band + l + qh.z + beta;
    let mid = p_min + band / 2.0;
    let (x_lo, x_hi) = (-0.7, 5.7);
    let (y_lo, y_hi) = (-1.2, 1.2);

    let env = Environment {
        name: "low-ceiling".into(),
        obstacles: vec![
            slab(
                Vector3::new(x_lo, y_lo, floor_top - 0.45),
                Vector3::new(x_hi, y_hi, floor_top),
            ),
            slab(
                Vector3::new(x_lo, y_lo, ceil_lo),
                Vector3::new(x_hi, y_hi, ceil_lo + 0.4),
            ),
        ],
        bounds_lo: Vector3::new(x_lo, y_lo, floor_top - 0.05),
        bounds_hi: Vector3::new(x_hi, y_hi, ceil_lo + 0.5),
        start: Vector3::new(0.0, 0.0, mid),
        goal: Vector3::new(5.0, 0.0, mid),
        beta,
    };
    env.validate(params)?;
    Ok(env)
}

/// Parameters for the maze generator.
#[derive(Debug, Clone)]
pub struct MazeSpec {
    /// Number of full-height walls, each pierced by one door.
    pub n_walls: usize,
    /// Number of full-height pillars scattered between the walls.
    pub n_pillars: usize,
    /// Door opening width [m].
    pub door_width: f64,
    pub beta: f64,
}

impl Default for MazeSpec {
    fn default() -> Self {
        Self {
            n_walls: 3,
            n_pillars: 1,
            door_width: 1.1,
            beta: 0.05,
        }
    }
}

/// Seeded maze: walls with doors on alternating sides plus pillars, with a
/// guaranteed hover-feasible corridor (the seed search is run as a self-check,
/// retrying deterministically derived layouts until one is traversable).
pub fn gen_maze(seed: u64, spec: &MazeSpec, params: &SystemParams) -> Result<Environment, EnvError> {
    for attempt in 0..30u64 {
        let env = build_maze(seed, attempt, spec, params);
        if env.validate(params).is_err() {
            continue;
        }
        if initializer::astar_seed(&env, params, 0.15).is_ok() {
            return Ok(env);
        }
    }
    Err(EnvError::InfeasibleSpec(format!(
        "no traversable maze layout found for seed {seed}"
    )))
}

fn build_maze(seed: u64, attempt: u64, spec: &MazeSpec, _params: &SystemParams) -> Environment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1024).wrapping_add(attempt));
    let bounds_lo = Vector3::new(-0.8, -2.2, 0.0);
    let bounds_hi = Vector3::new(6.8, 2.2, 3.0);
    let mut obstacles = Vec::new();

    let n_walls = spec.n_walls.max(1);
    let flip: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    for k in 0..n_walls {
        let x = if n_walls == 1 {
            3.0
        } else {
            1.2 + 3.6 * k as f64 / (n_walls - 1) as f64
        };
        let side = flip * if k % 2 == 0 { 1.0 } else { -1.0 };
        let door_center = side * rng.gen_range(0.5..1.4);
        let door_lo = door_center - spec.door_width / 2.0;
        let door_hi = door_center + spec.door_width / 2.0;
        let (x0, x1) = (x - 0.1, x + 0.1);
        if door_lo - bounds_lo.y > 0.05 {
            obstacles.push(slab(
                Vector3::new(x0, bounds_lo.y, 0.0),
                Vector3::new(x1, door_lo, 3.0),
            ));
        }
        if bounds_hi.y - door_hi > 0.05 {
            obstacles.push(slab(
                Vector3::new(x0, door_hi, 0.0),
                Vector3::new(x1, bounds_hi.y, 3.0),
            ));
        }
    }

    for _ in 0..spec.n_pillars {
        let cx = rng.gen_range(1.0..5.0);
        let cy = rng.gen_range(-1.4..1.4);
        let hx = rng.gen_range(0.12..0.25);
        let hy = rng.gen_range(0.12..0.25);
        obstacles.push(slab(
            Vector3::new(cx - hx, cy - hy, 0.0),
            Vector3::new(cx + hx, cy + hy, 3.0),
        ));
    }

    Environment {
        name: format!("maze-{seed}"),
        obstacles,
        bounds_lo,
        bounds_hi,
        start: Vector3::new(0.0, 0.0, 0.8),
        goal: Vector3::new(6.0, 0.0, 0.8),
        beta: spec.beta,
    }
}

/// The eight-scenario benchmark set: six mazes of increasing difficulty, the
/// narrow gap, and a dense maze.
pub fn benchmark_suite(params: &SystemParams) -> Result<Vec<Environment>, EnvError> {
    let spec = |walls, pillars, door| MazeSpec {
        n_walls: walls,
        n_pillars: pillars,
        door_width: door,
        beta: 0.05,
    };
    let mut envs = vec![
        gen_maze(1, &spec(2, 1, 1.2), params)?,
        gen_maze(2, &spec(3, 1, 1.0), params)?,
        gen_maze(3, &spec(3, 2, 0.9), params)?,
        gen_maze(4, &spec(4, 1, 0.9), params)?,
        gen_maze(5, &spec(2, 3, 1.1), params)?,
        gen_maze(6, &spec(4, 2, 0.8), params)?,
        gen_narrow_gap(0.10, params)?,
        gen_maze(8, &spec(5, 2, 0.9), params)?,
    ];
    for (i, env) in envs.iter_mut().enumerate() {
        env.name = format!("env-{}", i + 1);
    }
    Ok(envs)
}
