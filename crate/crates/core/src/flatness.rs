//! Flat-state dynamics and the differential-flatness reconstruction.
//!
//! The planner's state is the payload's position, velocity, and acceleration;
//! the input is payload jerk. The induced dynamics are a third-order
//! integrator, discretized with RK4 over per-stage durations (RK4 is exact for
//! these polynomial flows). Given a flat state and input, the full
//! quadrotor-and-cable configuration (cable direction and rate, quadrotor
//! position, velocity, acceleration, attitude, collective thrust vector) is an
//! algebraic function of the pair, reconstructed here under the taut-cable
//! model with yaw fixed to zero.

use crate::ad::{self, Scalar, M3, V3};
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FlatnessError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("taut-cable model invalid: |a_L + g e3| = {0:.3e} below threshold")]
    FreefallSingularity(f64),
    #[error("attitude is degenerate (thrust direction parallel to the yaw reference)")]
    DegenerateAttitude,
}

/// Payload flat state: position, velocity, acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatState {
    pub x_l: Vector3<f64>,
    pub v_l: Vector3<f64>,
    pub a_l: Vector3<f64>,
}

impl FlatState {
    pub fn zeros() -> Self {
        Self {
            x_l: Vector3::zeros(),
            v_l: Vector3::zeros(),
            a_l: Vector3::zeros(),
        }
    }

    pub fn at_rest(x_l: Vector3<f64>) -> Self {
        Self {
            x_l,
            v_l: Vector3::zeros(),
            a_l: Vector3::zeros(),
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.x_l.x, self.x_l.y, self.x_l.z, self.v_l.x, self.v_l.y, self.v_l.z, self.a_l.x,
            self.a_l.y, self.a_l.z,
        ]
    }

    pub fn from_array(v: &[f64; 9]) -> Self {
        Self {
            x_l: Vector3::new(v[0], v[1], v[2]),
            v_l: Vector3::new(v[3], v[4], v[5]),
            a_l: Vector3::new(v[6], v[7], v[8]),
        }
    }
}

/// Payload jerk input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatInput {
    pub j_l: Vector3<f64>,
}

impl FlatInput {
    pub fn zeros() -> Self {
        Self {
            j_l: Vector3::zeros(),
        }
    }
}

/// Physical parameters of the quadrotor-cable-payload system plus the
/// component box geometry used for collision modeling.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Quadrotor mass [kg].
    pub m_q: f64,
    /// Payload mass [kg].
    pub m_l: f64,
    /// Cable length [m].
    pub cable_length: f64,
    /// Gravity [m/s^2].
    pub gravity: f64,
    /// Quadrotor body box half-extents [m].
    pub quad_half_extents: [f64; 3],
    /// Payload box half-extents [m].
    pub payload_half_extents: [f64; 3],
    /// Half-width of the square cable cross-section [m].
    pub cable_halfwidth: f64,
    /// Minimum |a_L + g e3| for the taut-cable model [m/s^2].
    pub eps_taut: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            m_q: 0.9,
            m_l: 0.3,
            cable_length: 1.0,
            gravity: 9.81,
            quad_half_extents: [0.3, 0.3, 0.1],
            payload_half_extents: [0.06, 0.06, 0.06],
            cable_halfwidth: 0.01,
            eps_taut: 1e-3,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("m_q", self.m_q),
            ("m_l", self.m_l),
            ("cable_length", self.cable_length),
            ("gravity", self.gravity),
            ("cable_halfwidth", self.cable_halfwidth),
            ("eps_taut", self.eps_taut),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        for h in self.quad_half_extents.iter().chain(&self.payload_half_extents) {
            if !(*h > 0.0) {
                return Err(format!("box half-extents must be positive, got {h}"));
            }
        }
        Ok(())
    }

    pub fn quad_half_extents_vec(&self) -> Vector3<f64> {
        Vector3::from(self.quad_half_extents)
    }

    pub fn payload_half_extents_vec(&self) -> Vector3<f64> {
        Vector3::from(self.payload_half_extents)
    }
}

/// Full quadrotor configuration reconstructed from a flat state and input.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadState {
    pub x_q: Vector3<f64>,
    pub v_q: Vector3<f64>,
    pub a_q: Vector3<f64>,
    pub r_q: Matrix3<f64>,
    /// Unit vector from the quadrotor to the payload.
    pub q_cable: Vector3<f64>,
    pub qdot_cable: Vector3<f64>,
}

/// Reconstruction including the quantities that do not live in [`QuadState`]
/// but are needed to evaluate the coupled dynamics equations directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub quad: QuadState,
    /// Collective thrust vector `f R_Q e3` in the world frame [N].
    pub thrust: Vector3<f64>,
    /// Second derivative of the cable direction [1/s^2].
    pub qddot_cable: Vector3<f64>,
}

/// One RK4 step of the third-order integrator with constant jerk over `dt`.
pub fn rk4_step(x: &FlatState, u: &FlatInput, dt: f64) -> Result<FlatState, FlatnessError> {
    if !(dt > 0.0) {
        return Err(FlatnessError::NonPositiveDt(dt));
    }
    let f = |s: &FlatState| (s.v_l, s.a_l, u.j_l);
    let advance = |s: &FlatState, k: &(Vector3<f64>, Vector3<f64>, Vector3<f64>), h: f64| {
        FlatState {
            x_l: s.x_l + h * k.0,
            v_l: s.v_l + h * k.1,
            a_l: s.a_l + h * k.2,
        }
    };
    let k1 = f(x);
    let k2 = f(&advance(x, &k1, dt / 2.0));
    let k3 = f(&advance(x, &k2, dt / 2.0));
    let k4 = f(&advance(x, &k3, dt));
    Ok(FlatState {
        x_l: x.x_l + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        v_l: x.v_l + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        a_l: x.a_l + dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
    })
}

/// Cable direction (robot to payload) from payload acceleration.
pub fn cable_direction(
    a_l: &Vector3<f64>,
    params: &SystemParams,
) -> Result<Vector3<f64>, FlatnessError> {
    let t = a_l + Vector3::new(0.0, 0.0, params.gravity);
    let n = t.norm();
    if n < params.eps_taut {
        return Err(FlatnessError::FreefallSingularity(n));
    }
    Ok(-t / n)
}

/// Rotation whose third column is `f / |f|`, completed with zero yaw.
pub fn attitude_from_thrust(f: &Vector3<f64>, yaw: f64) -> Result<Matrix3<f64>, FlatnessError> {
    let n = f.norm();
    if n < 1e-12 {
        return Err(FlatnessError::DegenerateAttitude);
    }
    let b3 = f / n;
    let c1 = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    let w = b3.cross(&c1);
    let wn = w.norm();
    if wn < 1e-6 {
        return Err(FlatnessError::DegenerateAttitude);
    }
    let b2 = w / wn;
    let b1 = b2.cross(&b3);
    Ok(Matrix3::from_columns(&[b1, b2, b3]))
}

/// Differential-flatness map from `(x, u)` to the quadrotor state.
pub fn flat_to_quad(
    x: &FlatState,
    u: &FlatInput,
    params: &SystemParams,
) -> Result<QuadState, FlatnessError> {
    Ok(reconstruct_full(x, u, params)?.quad)
}

/// Flatness map including thrust vector and cable acceleration.
pub fn reconstruct_full(
    x: &FlatState,
    u: &FlatInput,
    params: &SystemParams,
) -> Result<Reconstruction, FlatnessError> {
    let chain = reconstruct::<f64>(&x.to_array(), &[u.j_l.x, u.j_l.y, u.j_l.z], params)?;
    let to_v = |v: V3<f64>| Vector3::new(v[0], v[1], v[2]);
    let to_m = |m: M3<f64>| {
        Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        )
    };
    Ok(Reconstruction {
        quad: QuadState {
            x_q: to_v(chain.x_q),
            v_q: to_v(chain.v_q),
            a_q: to_v(chain.a_q),
            r_q: to_m(chain.r_q),
            q_cable: to_v(chain.q),
            qdot_cable: to_v(chain.q_dot),
        },
        thrust: to_v(chain.thrust),
        qddot_cable: to_v(chain.q_ddot),
    })
}

/// Reconstruction chain, generic over the scalar so the planner can push dual
/// numbers through it.
pub(crate) struct Chain<S: Scalar> {
    pub q: V3<S>,
    pub q_dot: V3<S>,
    pub q_ddot: V3<S>,
    pub x_q: V3<S>,
    pub v_q: V3<S>,
    pub a_q: V3<S>,
    pub thrust: V3<S>,
    pub r_q: M3<S>,
}

/// Evaluate the reconstruction chain at a flat state `x = [x_L, v_L, a_L]`
/// and input `u = j_L`.
///
/// The chain in order: apparent acceleration `T = a_L + g e3` (taut-cable
/// guard on `|T|`); cable direction `q = -T/|T|` and rate
/// `q_dot = -(I - q q') j / |T|`; quadrotor position and velocity through the
/// rigid cable; cable acceleration under piecewise-constant jerk
/// `q_ddot = 2 (q . j)/|T| q_dot - |q_dot|^2 q`; thrust from the coupled
/// translational dynamics (component along `q` balancing the payload, the
/// orthogonal component driving the cable swing); quadrotor acceleration
/// `a_Q = a_L - l q_ddot`; attitude from the thrust direction with zero yaw.
pub(crate) fn reconstruct<S: Scalar>(
    x: &[S; 9],
    u: &[S; 3],
    params: &SystemParams,
) -> Result<Chain<S>, FlatnessError> {
    let x_l: V3<S> = [x[0], x[1], x[2]];
    let v_l: V3<S> = [x[3], x[4], x[5]];
    let a_l: V3<S> = [x[6], x[7], x[8]];
    let j: V3<S> = [u[0], u[1], u[2]];
    let l = S::from_f64(params.cable_length);

    let t = ad::add(a_l, ad::v3(0.0, 0.0, params.gravity));
    let n = ad::norm(t);
    if n.val() < params.eps_taut {
        return Err(FlatnessError::FreefallSingularity(n.val()));
    }
    let q = ad::smul(-S::one() / n, t);

    // q_dot = -(I - q q') j / n
    let qj = ad::dot(q, j);
    let q_dot = ad::smul(-S::one() / n, ad::sub(j, ad::smul(qj, q)));

    let x_q = ad::sub(x_l, ad::smul(l, q));
    let v_q = ad::sub(v_l, ad::smul(l, q_dot));

    let qd2 = ad::dot(q_dot, q_dot);
    let two = S::from_f64(2.0);
    let q_ddot = ad::sub(ad::smul(two * qj / n, q_dot), ad::smul(qd2, q));

    let m_total = S::from_f64(params.m_q + params.m_l);
    let mql = S::from_f64(params.m_q * params.cable_length);
    // F = (m_Q + m_L) T + m_Q l |q_dot|^2 q - m_Q l (q_ddot + |q_dot|^2 q)
    let swing = ad::add(q_ddot, ad::smul(qd2, q));
    let thrust = ad::sub(
        ad::add(ad::smul(m_total, t), ad::smul(mql * qd2, q)),
        ad::smul(mql, swing),
    );

    let a_q = ad::sub(a_l, ad::smul(l, q_ddot));
    let r_q = attitude_generic(thrust)?;

    Ok(Chain {
        q,
        q_dot,
        q_ddot,
        x_q,
        v_q,
        a_q,
        thrust,
        r_q,
    })
}

/// Zero-yaw attitude from a thrust vector, generic scalar version.
pub(crate) fn attitude_generic<S: Scalar>(f: V3<S>) -> Result<M3<S>, FlatnessError> {
    let n = ad::norm(f);
    if n.val() < 1e-12 {
        return Err(FlatnessError::DegenerateAttitude);
    }
    let inv = S::one() / n;
    let b3 = ad::smul(inv, f);
    // w = b3 x e1 = (0, b3_z, -b3_y)
    let w: V3<S> = [S::zero(), b3[2], -b3[1]];
    let wn = ad::norm(w);
    if wn.val() < 1e-6 {
        return Err(FlatnessError::DegenerateAttitude);
    }
    let b2 = ad::smul(S::one() / wn, w);
    let b1 = ad::cross(b2, b3);
    Ok(ad::mat_from_cols(b1, b2, b3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Closed-form triple-integrator update for constant jerk.
    fn closed_form(x: &FlatState, u: &FlatInput, dt: f64) -> FlatState {
        FlatState {
            x_l: x.x_l + dt * x.v_l + dt * dt / 2.0 * x.a_l + dt.powi(3) / 6.0 * u.j_l,
            v_l: x.v_l + dt * x.a_l + dt * dt / 2.0 * u.j_l,
            a_l: x.a_l + dt * u.j_l,
        }
    }

    /// Residuals of the two coupled translational dynamics equations with the
    /// reconstructed quantities plugged in.
    fn dynamics_residuals(x: &FlatState, u: &FlatInput, p: &SystemParams) -> (f64, f64) {
        let rec = reconstruct_full(x, u, p).unwrap();
        let g_vec = Vector3::new(0.0, 0.0, p.gravity);
        let q = rec.quad.q_cable;
        let qd = rec.quad.qdot_cable;
        let f = rec.thrust;
        let lhs2 = (p.m_q + p.m_l) * (x.a_l + g_vec);
        let rhs2 = (q.dot(&f) - p.m_q * p.cable_length * qd.norm_squared()) * q;
        let lhs3 = p.m_q * p.cable_length * (rec.qddot_cable + qd.norm_squared() * q);
        let rhs3 = q.cross(&q.cross(&f));
        ((lhs2 - rhs2).norm(), (lhs3 - rhs3).norm())
    }

    #[test]
    fn rk4_fixed_point_at_origin() {
        let x = FlatState::zeros();
        let out = rk4_step(&x, &FlatInput::zeros(), 0.37).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn rk4_matches_cubic_flow_exactly() {
        let x = FlatState::zeros();
        let u = FlatInput {
            j_l: Vector3::new(6.0, 0.0, 0.0),
        };
        let out = rk4_step(&x, &u, 1.0).unwrap();
        assert_relative_eq!(out.x_l.x, 1.0, epsilon = 1e-14);
        assert_relative_eq!(out.v_l.x, 3.0, epsilon = 1e-14);
        assert_relative_eq!(out.a_l.x, 6.0, epsilon = 1e-14);
    }

    #[test]
    fn rk4_equals_closed_form_on_random_inputs() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..200 {
            let x = FlatState {
                x_l: Vector3::from_fn(|_, _| rng.gen_range(-5.0..5.0)),
                v_l: Vector3::from_fn(|_, _| rng.gen_range(-3.0..3.0)),
                a_l: Vector3::from_fn(|_, _| rng.gen_range(-5.0..5.0)),
            };
            let u = FlatInput {
                j_l: Vector3::from_fn(|_, _| rng.gen_range(-20.0..20.0)),
            };
            let got = rk4_step(&x, &u, 0.05).unwrap();
            let want = closed_form(&x, &u, 0.05);
            assert_relative_eq!(got.x_l, want.x_l, max_relative = 1e-12, epsilon = 1e-14);
            assert_relative_eq!(got.v_l, want.v_l, max_relative = 1e-12, epsilon = 1e-14);
            assert_relative_eq!(got.a_l, want.a_l, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn rk4_rejects_nonpositive_dt() {
        let r = rk4_step(&FlatState::zeros(), &FlatInput::zeros(), 0.0);
        assert!(matches!(r, Err(FlatnessError::NonPositiveDt(_))));
    }

    #[test]
    fn cable_hangs_down_at_hover() {
        let p = SystemParams::default();
        let q = cable_direction(&Vector3::zeros(), &p).unwrap();
        assert_relative_eq!(q, Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-15);
    }

    #[test]
    fn cable_swings_45_degrees_under_g_acceleration() {
        let p = SystemParams::default();
        let q = cable_direction(&Vector3::new(p.gravity, 0.0, 0.0), &p).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(q, Vector3::new(-s, 0.0, -s), epsilon = 1e-12);
    }

    #[test]
    fn taut_threshold_boundary() {
        let mut p = SystemParams::default();
        p.eps_taut = 1e-6;
        // Slightly above free fall: valid and pointing straight down.
        let q = cable_direction(&Vector3::new(0.0, 0.0, -p.gravity + 1e-4), &p).unwrap();
        assert_relative_eq!(q, Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-12);
        // Exact free fall: singular for any threshold.
        let r = cable_direction(&Vector3::new(0.0, 0.0, -p.gravity), &p);
        assert!(matches!(r, Err(FlatnessError::FreefallSingularity(_))));
    }

    #[test]
    fn hover_reconstruction_is_static_equilibrium() {
        let p = SystemParams::default();
        let x = FlatState::at_rest(Vector3::new(1.0, 2.0, 3.0));
        let rec = reconstruct_full(&x, &FlatInput::zeros(), &p).unwrap();
        assert_relative_eq!(
            rec.quad.x_q,
            x.x_l + Vector3::new(0.0, 0.0, p.cable_length),
            epsilon = 1e-12
        );
        assert_relative_eq!(rec.quad.v_q, Vector3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(rec.quad.a_q, Vector3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(rec.quad.r_q, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(
            rec.thrust.norm(),
            (p.m_q + p.m_l) * p.gravity,
            epsilon = 1e-9
        );
        assert_relative_eq!(rec.quad.q_cable, Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-12);
    }

    #[test]
    fn lateral_acceleration_reconstruction() {
        let p = SystemParams {
            m_q: 1.0,
            m_l: 0.2,
            cable_length: 1.0,
            ..SystemParams::default()
        };
        let x = FlatState {
            x_l: Vector3::zeros(),
            v_l: Vector3::zeros(),
            a_l: Vector3::new(p.gravity, 0.0, 0.0),
        };
        let rec = reconstruct_full(&x, &FlatInput::zeros(), &p).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(rec.quad.q_cable, Vector3::new(-s, 0.0, -s), epsilon = 1e-12);
        assert_relative_eq!(rec.quad.qdot_cable, Vector3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(
            rec.thrust,
            1.2 * Vector3::new(p.gravity, 0.0, p.gravity),
            epsilon = 1e-9
        );
        let b3 = rec.quad.r_q.column(2);
        assert_relative_eq!(Vector3::new(b3[0], b3[1], b3[2]), Vector3::new(s, 0.0, s), epsilon = 1e-12);
    }

    #[test]
    fn dynamics_residuals_vanish_on_smooth_trajectory() {
        // x_L(t) = (sin t, 0, 0)
        let p = SystemParams::default();
        for i in 0..100 {
            let t = i as f64 * 0.06;
            let x = FlatState {
                x_l: Vector3::new(t.sin(), 0.0, 0.0),
                v_l: Vector3::new(t.cos(), 0.0, 0.0),
                a_l: Vector3::new(-t.sin(), 0.0, 0.0),
            };
            let u = FlatInput {
                j_l: Vector3::new(-t.cos(), 0.0, 0.0),
            };
            let (r2, r3) = dynamics_residuals(&x, &u, &p);
            assert!(r2 < 1e-8 && r3 < 1e-8, "t={t}: r2={r2:.2e} r3={r3:.2e}");
        }
    }

    #[test]
    fn cable_constraint_and_orthogonality_invariants() {
        let p = SystemParams::default();
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..200 {
            let x = FlatState {
                x_l: Vector3::from_fn(|_, _| rng.gen_range(-3.0..3.0)),
                v_l: Vector3::from_fn(|_, _| rng.gen_range(-2.0..2.0)),
                a_l: Vector3::new(
                    rng.gen_range(-6.0..6.0),
                    rng.gen_range(-6.0..6.0),
                    rng.gen_range(-6.0..6.0),
                ),
            };
            let u = FlatInput {
                j_l: Vector3::from_fn(|_, _| rng.gen_range(-20.0..20.0)),
            };
            let rec = reconstruct_full(&x, &u, &p).unwrap();
            let q = rec.quad.q_cable;
            let qd = rec.quad.qdot_cable;
            assert_relative_eq!((rec.quad.x_q - x.x_l).norm(), p.cable_length, epsilon = 1e-9);
            assert!(q.dot(&qd).abs() < 1e-9);
            assert!((q.dot(&rec.qddot_cable) + qd.norm_squared()).abs() < 1e-8);
            let (r2, r3) = dynamics_residuals(&x, &u, &p);
            assert!(r2 < 1e-8 && r3 < 1e-8);
        }
    }

    #[test]
    fn quad_kinematics_match_finite_differences() {
        // Along a constant-jerk flat trajectory, v_Q and a_Q from the map
        // must match central differences of x_Q at second order.
        let p = SystemParams::default();
        let x0 = FlatState {
            x_l: Vector3::new(0.0, 0.0, 1.0),
            v_l: Vector3::new(0.5, -0.2, 0.1),
            a_l: Vector3::new(1.5, 0.8, -0.5),
        };
        let u = FlatInput {
            j_l: Vector3::new(2.0, -1.0, 0.5),
        };
        let state_at = |t: f64| {
            if t == 0.0 {
                x0
            } else {
                rk4_step(&x0, &u, t).unwrap()
            }
        };
        let xq_at = |t: f64| flat_to_quad(&state_at(t), &u, &p).unwrap().x_q;

        // Step sizes large enough that truncation dominates roundoff in the
        // second difference (which divides by h^2).
        let t0 = 0.1;
        let center = flat_to_quad(&state_at(t0), &u, &p).unwrap();
        let mut err_v = Vec::new();
        let mut err_a = Vec::new();
        for h in [2e-2, 1e-2] {
            let plus = xq_at(t0 + h);
            let minus = xq_at(t0 - h);
            let mid = xq_at(t0);
            let v_fd = (plus - minus) / (2.0 * h);
            let a_fd = (plus - 2.0 * mid + minus) / (h * h);
            err_v.push((v_fd - center.v_q).norm());
            err_a.push((a_fd - center.a_q).norm());
        }
        let order_v = (err_v[0] / err_v[1]).log2();
        let order_a = (err_a[0] / err_a[1]).log2();
        assert!(order_v >= 1.9, "velocity FD order {order_v}, errors {err_v:?}");
        assert!(order_a >= 1.9, "acceleration FD order {order_a}, errors {err_a:?}");
    }

    #[test]
    fn attitude_from_thrust_cases() {
        let r = attitude_from_thrust(&Vector3::new(0.0, 0.0, 9.81), 0.0).unwrap();
        assert_relative_eq!(r, Matrix3::identity(), epsilon = 1e-12);

        let f = Vector3::new(1.0, 0.0, 1.0);
        let r1 = attitude_from_thrust(&f, 0.0).unwrap();
        let r10 = attitude_from_thrust(&(10.0 * f), 0.0).unwrap();
        assert_relative_eq!(r1, r10, epsilon = 1e-12);
        assert_relative_eq!(r1.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(r1.transpose() * r1, Matrix3::identity(), epsilon = 1e-12);

        let bad = attitude_from_thrust(&Vector3::new(1.0, 0.0, 1e-9), 0.0);
        assert!(matches!(bad, Err(FlatnessError::DegenerateAttitude)));
    }
}
