//! Per-(stage, component, obstacle) dual collision constraints.
//!
//! Each robot component is a box in its own body frame, so its `(A_N, b_N)`
//! are constants and all state dependence enters through the transform of the
//! obstacle into the component frame: `A_M^N = A_M R_N(x)`,
//! `B_M^N = b_M - A_M O_N(x)`. The three constraint groups per triple:
//!
//! ```text
//!   margin:       beta - (-lambda_N' b_N - lambda_M' B_M^N(x)) <= 0
//!   stationarity: A_N' lambda_N + R_N(x)' A_M' lambda_M         = 0
//!   norm cap:     ||A_M' lambda_M||^2 - 1                       <= 0
//! ```
//!
//! plus `lambda >= 0` handled as variable bounds. Evaluation is generic over
//! the scalar: `f64` for values, dual numbers for state/input tangents. The
//! multiplier partials are closed-form and supplied alongside.

use super::Mode;
use crate::ad::{self, Scalar, M3, V3};
use crate::environment::{self, Environment};
use crate::flatness::{self, FlatnessError, SystemParams};
use nalgebra::Vector3;

/// Constant body-frame geometry of one robot component (a box).
#[derive(Debug, Clone)]
pub(crate) struct ComponentGeom {
    pub kind: ComponentKind,
    /// Face offsets in the body frame, order `+x,-x,+y,-y,+z,-z`.
    pub b_n: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ComponentKind {
    Quad,
    Cable,
    Payload,
    /// Conservative hover-attitude box around the whole system.
    Combined,
}

fn box_geom(kind: ComponentKind, half: Vector3<f64>) -> ComponentGeom {
    ComponentGeom {
        kind,
        b_n: [half.x, half.x, half.y, half.y, half.z, half.z],
    }
}

pub(crate) fn components_for_mode(mode: Mode, params: &SystemParams) -> Vec<ComponentGeom> {
    match mode {
        Mode::ComponentWise => vec![
            box_geom(ComponentKind::Quad, params.quad_half_extents_vec()),
            box_geom(
                ComponentKind::Cable,
                Vector3::new(
                    params.cable_halfwidth,
                    params.cable_halfwidth,
                    params.cable_length / 2.0,
                ),
            ),
            box_geom(ComponentKind::Payload, params.payload_half_extents_vec()),
        ],
        Mode::SinglePolytope => {
            let (half, _) = environment::combined_box_geometry(params);
            vec![box_geom(ComponentKind::Combined, half)]
        }
    }
}

/// Obstacle in raw row form (unit normals and offsets).
#[derive(Debug, Clone)]
pub(crate) struct ObstacleData {
    pub rows: Vec<[f64; 3]>,
    pub b: Vec<f64>,
}

pub(crate) fn obstacle_data(env: &Environment) -> Vec<ObstacleData> {
    env.obstacles
        .iter()
        .map(|p| ObstacleData {
            rows: (0..p.n_faces())
                .map(|i| [p.a()[(i, 0)], p.a()[(i, 1)], p.a()[(i, 2)]])
                .collect(),
            b: p.b().iter().copied().collect(),
        })
        .collect()
}

/// World poses `(R_N, O_N)` of every component at one stage, in the same
/// order as [`components_for_mode`].
pub(crate) fn stage_poses<S: Scalar>(
    x: &[S; 9],
    u: &[S; 3],
    params: &SystemParams,
    components: &[ComponentGeom],
    rotation_aware: bool,
) -> Result<Vec<(M3<S>, V3<S>)>, FlatnessError> {
    let x_l: V3<S> = [x[0], x[1], x[2]];
    let needs_chain = components
        .iter()
        .any(|c| matches!(c.kind, ComponentKind::Quad | ComponentKind::Cable));
    let chain = if needs_chain {
        Some(flatness::reconstruct(x, u, params)?)
    } else {
        None
    };
    let mut poses = Vec::with_capacity(components.len());
    for comp in components {
        let pose = match comp.kind {
            ComponentKind::Quad => {
                let c = chain.as_ref().unwrap();
                let r = if rotation_aware {
                    c.r_q
                } else {
                    ad::mat_identity()
                };
                (r, c.x_q)
            }
            ComponentKind::Cable => {
                let c = chain.as_ref().unwrap();
                // Direction payload -> quadrotor is -q; midpoint is the origin.
                let d = [-c.q[0], -c.q[1], -c.q[2]];
                let r = ad::align_z_rotation(d).unwrap_or_else(|| {
                    // Cable pointing straight down in body terms (quadrotor
                    // below payload): fall back to a half-turn about x.
                    let o = S::one();
                    let z = S::zero();
                    [[o, z, z], [z, -o, z], [z, z, -o]]
                });
                let half = S::from_f64(0.5);
                let mid = [
                    half * (x_l[0] + c.x_q[0]),
                    half * (x_l[1] + c.x_q[1]),
                    half * (x_l[2] + c.x_q[2]),
                ];
                (r, mid)
            }
            ComponentKind::Payload => (ad::mat_identity(), x_l),
            ComponentKind::Combined => {
                let (_, offset) = environment::combined_box_geometry(params);
                let o = [
                    x_l[0] + S::from_f64(offset.x),
                    x_l[1] + S::from_f64(offset.y),
                    x_l[2] + S::from_f64(offset.z),
                ];
                (ad::mat_identity(), o)
            }
        };
        poses.push(pose);
    }
    Ok(poses)
}

/// Values of the margin and stationarity constraints for one triple, with
/// state/input dependence carried by the scalar type.
pub(crate) struct PairValues<S: Scalar> {
    /// `beta - bound`; feasible when <= 0.
    pub margin: S,
    /// `A_N' lambda_N + R_N' A_M' lambda_M`; feasible when = 0.
    pub stat: V3<S>,
    /// `||A_M' lambda_M||^2 - 1`; feasible when <= 0 (multiplier-only).
    pub norm_excess_sq: f64,
    /// `A_M' lambda_M` for multiplier partials.
    pub w_m: [f64; 3],
}

pub(crate) fn eval_pair<S: Scalar>(
    pose: &(M3<S>, V3<S>),
    geom: &ComponentGeom,
    obstacle: &ObstacleData,
    lambda_n: &[f64],
    lambda_m: &[f64],
    beta: f64,
) -> PairValues<S> {
    let (r_n, o_n) = pose;

    // margin = beta + lambda_N . b_N + lambda_M . (b_M - A_M O_N)
    let mut const_part = beta;
    for t in 0..6 {
        const_part += lambda_n[t] * geom.b_n[t];
    }
    let mut margin = S::from_f64(const_part);
    for (row, (&bm, &lm)) in obstacle
        .rows
        .iter()
        .zip(obstacle.b.iter().zip(lambda_m.iter()))
    {
        let proj = ad::dot(ad::v3::<S>(row[0], row[1], row[2]), *o_n);
        margin = margin + (S::from_f64(bm) - proj) * S::from_f64(lm);
    }

    // w_m = A_M' lambda_M (constant in x).
    let mut w_m = [0.0f64; 3];
    for (row, &lm) in obstacle.rows.iter().zip(lambda_m.iter()) {
        for c in 0..3 {
            w_m[c] += row[c] * lm;
        }
    }
    // A_N' lambda_N for the +/- axis box rows.
    let a_n_t_ln = [
        lambda_n[0] - lambda_n[1],
        lambda_n[2] - lambda_n[3],
        lambda_n[4] - lambda_n[5],
    ];
    let rot_w = ad::mat_tvec(r_n, ad::v3::<S>(w_m[0], w_m[1], w_m[2]));
    let stat = [
        rot_w[0] + S::from_f64(a_n_t_ln[0]),
        rot_w[1] + S::from_f64(a_n_t_ln[1]),
        rot_w[2] + S::from_f64(a_n_t_ln[2]),
    ];

    let norm_excess_sq = w_m.iter().map(|v| v * v).sum::<f64>() - 1.0;

    PairValues {
        margin,
        stat,
        norm_excess_sq,
        w_m,
    }
}

/// Multiplier partials of the pair constraints (closed form).
pub(crate) struct PairLambdaJacobian {
    /// d margin / d lambda_n\[t\] = b_n\[t\].
    pub dmargin_dln: [f64; 6],
    /// d margin / d lambda_m\[r\] = B_M^N\[r\] (value part).
    pub dmargin_dlm: Vec<f64>,
    /// d stat\[c\] / d lambda_m\[r\] = (A_M R_N)\[r\]\[c\] (value part).
    pub dstat_dlm: Vec<[f64; 3]>,
}

pub(crate) fn pair_lambda_jacobian<S: Scalar>(
    pose: &(M3<S>, V3<S>),
    geom: &ComponentGeom,
    obstacle: &ObstacleData,
) -> PairLambdaJacobian {
    let (r_n, o_n) = pose;
    let o_val = [o_n[0].val(), o_n[1].val(), o_n[2].val()];
    let mut r_val = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            r_val[r][c] = r_n[r][c].val();
        }
    }
    let dmargin_dlm = obstacle
        .rows
        .iter()
        .zip(obstacle.b.iter())
        .map(|(row, &bm)| bm - (row[0] * o_val[0] + row[1] * o_val[1] + row[2] * o_val[2]))
        .collect();
    let dstat_dlm = obstacle
        .rows
        .iter()
        .map(|row| {
            let mut out = [0.0f64; 3];
            for c in 0..3 {
                out[c] = row[0] * r_val[0][c] + row[1] * r_val[1][c] + row[2] * r_val[2][c];
            }
            out
        })
        .collect();
    PairLambdaJacobian {
        dmargin_dln: geom.b_n,
        dmargin_dlm,
        dstat_dlm,
    }
}

/// `d stat[c] / d lambda_n[t]`: the box rows are +/- axis vectors, so the
/// partial is `+-1` on axis `t / 2`.
#[inline]
pub(crate) fn dstat_dln(t: usize) -> (usize, f64) {
    (t / 2, if t % 2 == 0 { 1.0 } else { -1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::gen_corridor;
    use crate::flatness::FlatState;
    use approx::assert_relative_eq;

    #[test]
    fn margin_matches_direct_dual_objective() {
        // Compare against the geometry module on a hover configuration.
        let params = SystemParams::default();
        let env = gen_corridor(&params).unwrap();
        let comps = components_for_mode(Mode::ComponentWise, &params);
        let obstacles = obstacle_data(&env);
        let x = FlatState::at_rest(Vector3::new(0.0, 0.0, 1.0)).to_array();
        let u = [0.0; 3];
        let poses = stage_poses::<f64>(&x, &u, &params, &comps, true).unwrap();

        // Payload component vs obstacle 0 with the optimal certificate.
        let payload_world =
            environment::payload_polytope(&Vector3::new(0.0, 0.0, 1.0), &params).unwrap();
        let (bound, duals) =
            crate::geometry::max_dual_bound(&env.obstacles[0], &payload_world).unwrap();

        // In the body frame the same multipliers must produce the same bound:
        // margin constraint value = beta - bound.
        let ln: Vec<f64> = duals.lambda_n.iter().copied().collect();
        let lm: Vec<f64> = duals.lambda_m.iter().copied().collect();
        let pv = eval_pair(&poses[2], &comps[2], &obstacles[0], &ln, &lm, env.beta);
        assert_relative_eq!(pv.margin, env.beta - bound, epsilon = 1e-9);
        // Certificate is feasible: stationarity ~ 0, norm cap respected.
        for c in 0..3 {
            assert!(pv.stat[c].abs() < 1e-8);
        }
        assert!(pv.norm_excess_sq <= 1e-8);
    }

    #[test]
    fn single_polytope_pose_is_state_independent_in_attitude() {
        let params = SystemParams::default();
        let comps = components_for_mode(Mode::SinglePolytope, &params);
        assert_eq!(comps.len(), 1);
        let x = FlatState {
            x_l: Vector3::new(1.0, 2.0, 3.0),
            v_l: Vector3::new(1.0, 0.0, 0.0),
            a_l: Vector3::new(4.0, -2.0, 1.0),
        }
        .to_array();
        let poses = stage_poses::<f64>(&x, &[5.0, 1.0, -2.0], &params, &comps, true).unwrap();
        let (r, o) = &poses[0];
        for c in 0..3 {
            for d in 0..3 {
                assert_eq!(r[c][d], if c == d { 1.0 } else { 0.0 });
            }
        }
        let (_, offset) = environment::combined_box_geometry(&params);
        assert_relative_eq!(o[2], 3.0 + offset.z, epsilon = 1e-12);
    }
}
