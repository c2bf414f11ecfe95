//! Convex polytopes in half-space form and the dual distance machinery.
//!
//! A polytope is `{y : A y <= b}` with unit-norm face rows, so that offsets in
//! `b` are metric (meters) and the dual norm cap is scale-consistent. Distance
//! between two polytopes `M` and `N` can be bounded from below by any feasible
//! point of the Lagrangian dual of the closest-point program:
//!
//! ```text
//!   maximize   -lambda_N' b_N - lambda_M' b_M
//!   subject to  lambda_N' A_N + lambda_M' A_M = 0
//!               ||A_M' lambda_M||_2 <= 1,   lambda >= 0
//! ```
//!
//! Weak duality makes every feasible pair a separation certificate; strong
//! duality holds, so the optimum attains the true distance. The planner embeds
//! these constraints per stage; this module provides the standalone versions
//! plus an independent signed-distance oracle (vertex hulls + GJK, penetration
//! via an LP) used for validation and testing only.

mod gjk;

pub(crate) use gjk::closest_between_hulls;

use crate::lp;
use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use std::sync::OnceLock;
use thiserror::Error;

/// Feasibility tolerance for accepting a dual pair as a certificate.
pub const DUAL_FEAS_TOL: f64 = 1e-6;

const VERTEX_DEDUP_TOL: f64 = 1e-8;
const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("box half-extents must be strictly positive")]
    NonPositiveExtent,
    #[error("degenerate polytope: {0}")]
    DegeneratePolytope(&'static str),
    #[error("polytopes are not separated (oracle distance <= 0)")]
    NotSeparated,
    #[error(
        "dual pair is infeasible (stationarity {stationarity:.3e}, norm excess {norm_excess:.3e}, negativity {neg_violation:.3e})"
    )]
    InfeasibleDuals {
        stationarity: f64,
        norm_excess: f64,
        neg_violation: f64,
    },
    #[error("rotation matrix is not orthonormal within 1e-9")]
    InvalidRotation,
}

/// Rigid pose: rotation `R` and origin `O`, mapping body points `y` to world
/// points `R y + O`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    r: Matrix3<f64>,
    o: Vector3<f64>,
}

impl Pose {
    pub fn new(r: Matrix3<f64>, o: Vector3<f64>) -> Result<Self, GeometryError> {
        let ortho = (r.transpose() * r - Matrix3::identity()).norm();
        if ortho > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self { r, o })
    }

    pub fn identity() -> Self {
        Self {
            r: Matrix3::identity(),
            o: Vector3::zeros(),
        }
    }

    pub fn translation(o: Vector3<f64>) -> Self {
        Self {
            r: Matrix3::identity(),
            o,
        }
    }

    /// Pose from roll-pitch-yaw (XYZ convention, `R = Rz Ry Rx`) and origin.
    pub fn from_rpy(rpy: Vector3<f64>, o: Vector3<f64>) -> Self {
        Self {
            r: *Rotation3::from_euler_angles(rpy.x, rpy.y, rpy.z).matrix(),
            o,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn origin(&self) -> &Vector3<f64> {
        &self.o
    }
}

/// Pair of dual multipliers for one obstacle/robot-component polytope pair.
///
/// `lambda_m` has one entry per obstacle face, `lambda_n` one per robot face.
/// Feasible certificates are componentwise nonnegative; [`dual_residuals`]
/// reports by how much an arbitrary pair misses feasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    pub lambda_m: DVector<f64>,
    pub lambda_n: DVector<f64>,
}

impl DualPair {
    pub fn zeros(n_obstacle_faces: usize, n_robot_faces: usize) -> Self {
        Self {
            lambda_m: DVector::zeros(n_obstacle_faces),
            lambda_n: DVector::zeros(n_robot_faces),
        }
    }

    pub fn uniform(n_obstacle_faces: usize, n_robot_faces: usize, value: f64) -> Self {
        Self {
            lambda_m: DVector::from_element(n_obstacle_faces, value),
            lambda_n: DVector::from_element(n_robot_faces, value),
        }
    }
}

/// Convex polytope `{y : A y <= b}` with unit-norm rows.
///
/// Construction guarantees the set is nonempty and bounded; the vertex list is
/// computed lazily and cached (the value is immutable afterwards, so sharing
/// across threads stays safe).
#[derive(Debug)]
pub struct HPolytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    verts: OnceLock<Vec<Vector3<f64>>>,
}

impl Clone for HPolytope {
    fn clone(&self) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            verts: self.verts.clone(),
        }
    }
}

impl PartialEq for HPolytope {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

impl HPolytope {
    /// Validated constructor: normalizes face rows, rejects fewer than four
    /// faces, zero normals, and empty or unbounded sets (LP probes along
    /// every +/- axis direction).
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, GeometryError> {
        assert_eq!(a.nrows(), b.len(), "face count mismatch between A and b");
        assert_eq!(a.ncols(), 3, "face normals must be 3-dimensional");
        if a.nrows() < 4 {
            return Err(GeometryError::DegeneratePolytope(
                "fewer than 4 faces cannot bound a 3D volume",
            ));
        }
        let mut a = a;
        let mut b = b;
        for i in 0..a.nrows() {
            let norm = a.row(i).norm();
            if norm < 1e-12 {
                return Err(GeometryError::DegeneratePolytope(
                    "face normal has zero length",
                ));
            }
            for j in 0..3 {
                a[(i, j)] /= norm;
            }
            b[i] /= norm;
        }
        let poly = Self {
            a,
            b,
            verts: OnceLock::new(),
        };
        poly.probe_bounded()?;
        Ok(poly)
    }

    /// Constructor for callers that can prove validity (unit rows, bounded,
    /// nonempty), e.g. boxes and rigid transforms of valid polytopes.
    pub(crate) fn from_valid_parts(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        Self {
            a,
            b,
            verts: OnceLock::new(),
        }
    }

    /// Valid parts plus an externally computed vertex list (e.g. rigidly
    /// transformed vertices of an already-enumerated polytope).
    pub(crate) fn from_valid_parts_with_vertices(
        a: DMatrix<f64>,
        b: DVector<f64>,
        verts: Vec<Vector3<f64>>,
    ) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(verts);
        Self { a, b, verts: cell }
    }

    fn probe_bounded(&self) -> Result<(), GeometryError> {
        let rows: Vec<Vec<f64>> = (0..self.a.nrows())
            .map(|i| vec![self.a[(i, 0)], self.a[(i, 1)], self.a[(i, 2)]])
            .collect();
        let b: Vec<f64> = self.b.iter().copied().collect();
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; 3];
                c[axis] = sign;
                match lp::solve_max_inequality(&c, &rows, &b) {
                    Ok(_) => {}
                    Err(lp::LpError::Unbounded) => {
                        return Err(GeometryError::DegeneratePolytope("set is unbounded"))
                    }
                    Err(_) => return Err(GeometryError::DegeneratePolytope("set is empty")),
                }
            }
        }
        Ok(())
    }

    pub fn n_faces(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn contains(&self, y: &Vector3<f64>, tol: f64) -> bool {
        (0..self.a.nrows()).all(|i| self.a.row(i).transpose().dot(y) <= self.b[i] + tol)
    }

    /// Cached vertex list (see [`vertex_enumeration`]).
    pub fn vertices(&self) -> &[Vector3<f64>] {
        self.verts.get_or_init(|| {
            vertex_enumeration(self).expect("validated polytope has vertices")
        })
    }
}

/// Body-frame box polytope from face offsets in `+x,-x,+y,-y,+z,-z` order,
/// with its eight corners precomputed.
pub(crate) fn body_box(b_n: &[f64; 6]) -> HPolytope {
    let mut a = DMatrix::zeros(6, 3);
    for axis in 0..3 {
        a[(2 * axis, axis)] = 1.0;
        a[(2 * axis + 1, axis)] = -1.0;
    }
    let b = DVector::from_column_slice(b_n);
    let mut verts = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                verts.push(Vector3::new(sx * b_n[0], sy * b_n[2], sz * b_n[4]));
            }
        }
    }
    HPolytope::from_valid_parts_with_vertices(a, b, verts)
}

/// Box with the given half-extents, posed rigidly in the world frame.
///
/// Face order is `+x, -x, +y, -y, +z, -z` in the body frame; this order is
/// stable and part of the dual-variable layout.
pub fn make_box(half_extents: Vector3<f64>, pose: &Pose) -> Result<HPolytope, GeometryError> {
    if half_extents.min() <= 0.0 {
        return Err(GeometryError::NonPositiveExtent);
    }
    let mut a = DMatrix::zeros(6, 3);
    let mut b = DVector::zeros(6);
    for axis in 0..3 {
        for (slot, sign) in [(2 * axis, 1.0), (2 * axis + 1, -1.0)] {
            // Body row sign * e_axis maps to world row sign * R e_axis (row of
            // A R^T); the offset picks up the origin term.
            let world_row = sign * pose.r.column(axis);
            for j in 0..3 {
                a[(slot, j)] = world_row[j];
            }
            b[slot] = half_extents[axis] + world_row.dot(&pose.o);
        }
    }
    Ok(HPolytope::from_valid_parts(a, b))
}

/// Re-express `obstacle` in the body frame of `frame`.
///
/// The result contains exactly the body-frame points `y` with
/// `R y + O` inside `obstacle`: `A' = A R`, `b' = b - A O`.
pub fn transform_into_frame(obstacle: &HPolytope, frame: &Pose) -> HPolytope {
    let r_dyn = DMatrix::from_column_slice(3, 3, frame.r.as_slice());
    let a = &obstacle.a * r_dyn;
    let b = &obstacle.b - &obstacle.a * frame.o;
    HPolytope::from_valid_parts(a, b)
}

/// Enumerate the vertices of `p` by intersecting every triple of face planes
/// and keeping the feasible, deduplicated intersections, sorted
/// lexicographically.
pub fn vertex_enumeration(p: &HPolytope) -> Result<Vec<Vector3<f64>>, GeometryError> {
    let n = p.n_faces();
    debug_assert!(n <= 30, "vertex enumeration is meant for desk-scale inputs");
    let mut found: Vec<Vector3<f64>> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let m = Matrix3::new(
                    p.a[(i, 0)],
                    p.a[(i, 1)],
                    p.a[(i, 2)],
                    p.a[(j, 0)],
                    p.a[(j, 1)],
                    p.a[(j, 2)],
                    p.a[(k, 0)],
                    p.a[(k, 1)],
                    p.a[(k, 2)],
                );
                let rhs = Vector3::new(p.b[i], p.b[j], p.b[k]);
                let Some(inv) = m.try_inverse() else {
                    continue;
                };
                if m.determinant().abs() < 1e-10 {
                    continue;
                }
                let y = inv * rhs;
                if !p.contains(&y, MEMBERSHIP_TOL) {
                    continue;
                }
                if !found
                    .iter()
                    .any(|v| (v - y).norm_squared() < VERTEX_DEDUP_TOL * VERTEX_DEDUP_TOL)
                {
                    found.push(y);
                }
            }
        }
    }
    if found.is_empty() {
        return Err(GeometryError::DegeneratePolytope(
            "no vertices: set is empty or unbounded",
        ));
    }
    found.sort_by(|a, b| {
        (a.x, a.y, a.z)
            .partial_cmp(&(b.x, b.y, b.z))
            .expect("finite vertex coordinates")
    });
    Ok(found)
}

/// Signed distance between two polytopes, independent of any dual variables.
///
/// Disjoint: the Euclidean distance between the vertex hulls (GJK). Touching
/// or intersecting: the negated maximal uniform face shrink that keeps a
/// common point (an LP); this is nonpositive, monotone in penetration, and
/// cheap, which is all the planner's validation needs from negative values.
pub fn signed_distance_oracle(m: &HPolytope, n: &HPolytope) -> f64 {
    let pair = closest_between_hulls(m.vertices(), n.vertices());
    if !pair.intersecting && pair.distance > 1e-9 {
        return pair.distance;
    }
    // max eps s.t. A_m y + 1 eps <= b_m, A_n y + 1 eps <= b_n over (y, eps)
    let rows: Vec<Vec<f64>> = (0..m.n_faces())
        .map(|i| vec![m.a[(i, 0)], m.a[(i, 1)], m.a[(i, 2)], 1.0])
        .chain((0..n.n_faces()).map(|i| vec![n.a[(i, 0)], n.a[(i, 1)], n.a[(i, 2)], 1.0]))
        .collect();
    let h: Vec<f64> = m.b.iter().chain(n.b.iter()).copied().collect();
    let sol = lp::solve_max_inequality(&[0.0, 0.0, 0.0, 1.0], &rows, &h)
        .expect("shrink program is feasible and bounded for valid polytopes");
    -sol.objective
}

/// Feasibility residuals of a dual pair for the polytope pair `(m, n)`:
/// the stationarity vector `A_n' lambda_n + A_m' lambda_m`, the excess of
/// `||A_m' lambda_m||` over 1, and the largest negative entry.
pub fn dual_residuals(m: &HPolytope, n: &HPolytope, duals: &DualPair) -> (Vector3<f64>, f64, f64) {
    assert_eq!(duals.lambda_m.len(), m.n_faces(), "lambda_m dimension");
    assert_eq!(duals.lambda_n.len(), n.n_faces(), "lambda_n dimension");
    let am_t_lm = m.a.transpose() * &duals.lambda_m;
    let stationarity = n.a.transpose() * &duals.lambda_n + &am_t_lm;
    let norm_excess = (am_t_lm.norm() - 1.0).max(0.0);
    let neg = duals
        .lambda_m
        .iter()
        .chain(duals.lambda_n.iter())
        .fold(0.0f64, |acc, &v| acc.max(-v));
    (Vector3::new(stationarity[0], stationarity[1], stationarity[2]), norm_excess, neg)
}

/// Dual separation margin `-lambda_n' b_n - lambda_m' b_m` of a feasible pair.
///
/// By weak duality the value never exceeds [`signed_distance_oracle`], so a
/// feasible pair with margin `>= beta` certifies separation by `beta`.
pub fn dual_margin(m: &HPolytope, n: &HPolytope, duals: &DualPair) -> Result<f64, GeometryError> {
    let (stationarity, norm_excess, neg_violation) = dual_residuals(m, n, duals);
    let s = stationarity.norm();
    if s > DUAL_FEAS_TOL || norm_excess > DUAL_FEAS_TOL || neg_violation > DUAL_FEAS_TOL {
        return Err(GeometryError::InfeasibleDuals {
            stationarity: s,
            norm_excess,
            neg_violation,
        });
    }
    Ok(-duals.lambda_n.dot(&n.b) - duals.lambda_m.dot(&m.b))
}

/// Best dual lower bound and the certificate attaining it.
///
/// The optimal separating direction comes from the closest points of the two
/// hulls; the multipliers are then recovered by the two support-function
/// programs `min b' lambda s.t. A' lambda = +/- nu, lambda >= 0`, which are
/// feasible for any bounded polytope (its face normals positively span R^3).
/// By strong duality the value matches the oracle distance.
pub fn max_dual_bound(m: &HPolytope, n: &HPolytope) -> Result<(f64, DualPair), GeometryError> {
    let pair = closest_between_hulls(m.vertices(), n.vertices());
    if pair.intersecting || pair.distance <= 1e-9 {
        return Err(GeometryError::NotSeparated);
    }
    let nu = (pair.point_a - pair.point_b) / pair.distance;
    // Tiny deterministic perturbations in case a support program hits a
    // numerically defective basis.
    let perturbations = [
        Vector3::zeros(),
        Vector3::new(1e-9, -1e-9, 1e-9),
        Vector3::new(-1e-9, 1e-9, 1e-9),
    ];
    for d in perturbations {
        let nu_try = (nu + d).normalize();
        let lm = support_multipliers(m, &(-nu_try));
        let ln = support_multipliers(n, &nu_try);
        if let (Ok(lambda_m), Ok(lambda_n)) = (lm, ln) {
            let duals = DualPair { lambda_m, lambda_n };
            let value = -duals.lambda_n.dot(&n.b) - duals.lambda_m.dot(&m.b);
            return Ok((value, duals));
        }
    }
    Err(GeometryError::DegeneratePolytope(
        "dual certificate construction failed",
    ))
}

/// `argmin b' lambda s.t. A' lambda = v, lambda >= 0`.
fn support_multipliers(p: &HPolytope, v: &Vector3<f64>) -> Result<DVector<f64>, lp::LpError> {
    let n = p.n_faces();
    let a_t: Vec<Vec<f64>> = (0..3)
        .map(|r| (0..n).map(|i| p.a[(i, r)]).collect())
        .collect();
    let b: Vec<f64> = p.b.iter().copied().collect();
    let sol = lp::solve_standard(&b, &a_t, &[v.x, v.y, v.z])?;
    Ok(DVector::from_vec(sol.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn unit_cube_at(c: Vector3<f64>) -> HPolytope {
        make_box(Vector3::new(1.0, 1.0, 1.0), &Pose::translation(c)).unwrap()
    }

    fn rot_z(angle: f64) -> Matrix3<f64> {
        *Rotation3::from_axis_angle(&Vector3::z_axis(), angle).matrix()
    }

    #[test]
    fn make_box_unit_cube_is_axis_rows() {
        let cube = unit_cube_at(Vector3::zeros());
        assert_eq!(cube.n_faces(), 6);
        for i in 0..6 {
            assert_relative_eq!(cube.b()[i], 1.0, epsilon = 1e-15);
            assert_relative_eq!(cube.a().row(i).norm(), 1.0, epsilon = 1e-15);
        }
        assert_eq!(cube.a()[(0, 0)], 1.0);
        assert_eq!(cube.a()[(1, 0)], -1.0);
        assert_eq!(cube.a()[(4, 2)], 1.0);
    }

    #[test]
    fn make_box_rejects_nonpositive_extent() {
        let r = make_box(Vector3::new(1.0, 0.0, 1.0), &Pose::identity());
        assert!(matches!(r, Err(GeometryError::NonPositiveExtent)));
    }

    #[test]
    fn rotated_cube_has_same_vertex_set() {
        let cube = unit_cube_at(Vector3::zeros());
        let rotated = make_box(
            Vector3::new(1.0, 1.0, 1.0),
            &Pose::new(rot_z(std::f64::consts::FRAC_PI_2), Vector3::zeros()).unwrap(),
        )
        .unwrap();
        let va = vertex_enumeration(&cube).unwrap();
        let vb = vertex_enumeration(&rotated).unwrap();
        assert_eq!(va.len(), 8);
        assert_eq!(vb.len(), 8);
        for (a, b) in va.iter().zip(vb.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn box_vertices_match_transformed_corners() {
        let h = Vector3::new(0.5, 0.2, 0.1);
        let o = Vector3::new(2.0, 0.0, 0.0);
        let poly = make_box(h, &Pose::translation(o)).unwrap();
        let mut expected: Vec<Vector3<f64>> = Vec::new();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    expected.push(o + Vector3::new(sx * h.x, sy * h.y, sz * h.z));
                }
            }
        }
        let got = vertex_enumeration(&poly).unwrap();
        assert_eq!(got.len(), 8);
        for e in &expected {
            assert!(got.iter().any(|g| (g - e).norm() < 1e-12));
        }
    }

    #[test]
    fn transform_identity_is_bit_exact() {
        let cube = unit_cube_at(Vector3::new(0.3, -0.2, 1.0));
        let out = transform_into_frame(&cube, &Pose::identity());
        assert_eq!(out.a(), cube.a());
        assert_eq!(out.b(), cube.b());
    }

    #[test]
    fn transform_translation_shifts_offsets() {
        let cube = unit_cube_at(Vector3::zeros());
        let frame = Pose::translation(Vector3::new(3.0, 0.0, 0.0));
        let out = transform_into_frame(&cube, &frame);
        // b' = b - A O
        assert_relative_eq!(out.b()[0], 1.0 - 3.0, epsilon = 1e-15);
        assert_relative_eq!(out.b()[1], 1.0 + 3.0, epsilon = 1e-15);
        // (-3, 0, 0) in the frame maps to the origin, which is inside.
        assert!(out.contains(&Vector3::new(-3.0, 0.0, 0.0), 1e-12));
        assert!(!out.contains(&Vector3::new(0.0, 0.0, 0.0), 1e-12));
    }

    #[test]
    fn transform_preserves_membership_under_point_map() {
        let mut rng = StdRng::seed_from_u64(7);
        let cube = unit_cube_at(Vector3::zeros());
        let frame = Pose::new(rot_z(0.7), Vector3::new(0.4, -1.2, 0.3)).unwrap();
        let out = transform_into_frame(&cube, &frame);
        for _ in 0..100 {
            let y = Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let world = frame.rotation() * y + frame.origin();
            assert_eq!(out.contains(&y, 1e-9), cube.contains(&world, 1e-9));
        }
    }

    #[test]
    fn oracle_on_identical_cubes_is_nonpositive() {
        let a = unit_cube_at(Vector3::zeros());
        let b = unit_cube_at(Vector3::zeros());
        assert!(signed_distance_oracle(&a, &b) <= 0.0);
    }

    #[test]
    fn oracle_on_separated_cubes() {
        let a = unit_cube_at(Vector3::zeros());
        let b = unit_cube_at(Vector3::new(3.0, 0.0, 0.0));
        assert_relative_eq!(signed_distance_oracle(&a, &b), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn oracle_against_dense_boundary_sampling() {
        // Cube face vs the edge of a cube rotated 45 degrees about z: the
        // exact gap is 1.5 - sqrt(2).
        let a = unit_cube_at(Vector3::zeros());
        let b = make_box(
            Vector3::new(1.0, 1.0, 1.0),
            &Pose::new(rot_z(std::f64::consts::FRAC_PI_4), Vector3::new(0.0, 2.5, 0.0)).unwrap(),
        )
        .unwrap();
        let d = signed_distance_oracle(&a, &b);
        assert_relative_eq!(d, 1.5 - 2.0f64.sqrt(), epsilon = 1e-9);

        // Brute-force cross-check: sample both boundaries densely and take the
        // minimum pairwise distance, which can only overestimate.
        let mut rng = StdRng::seed_from_u64(11);
        let sample = |p: &HPolytope, rng: &mut StdRng| -> Vec<Vector3<f64>> {
            let vs = p.vertices();
            (0..1000)
                .map(|_| {
                    // Random convex combination of a face's corners stays on the hull
                    // only for pairs; pairs of vertices span edges which suffice here.
                    let i = rng.gen_range(0..vs.len());
                    let j = rng.gen_range(0..vs.len());
                    let t: f64 = rng.gen();
                    vs[i] * t + vs[j] * (1.0 - t)
                })
                .collect()
        };
        let pa = sample(&a, &mut rng);
        let pb = sample(&b, &mut rng);
        let mut best = f64::INFINITY;
        for p in &pa {
            for q in &pb {
                best = best.min((p - q).norm());
            }
        }
        assert!(d <= best + 1e-9);
        assert!(best - d < 0.05, "sampled {best}, oracle {d}");
    }

    #[test]
    fn zero_duals_are_feasible_with_zero_margin() {
        let a = unit_cube_at(Vector3::zeros());
        let b = unit_cube_at(Vector3::new(3.0, 0.0, 0.0));
        let duals = DualPair::zeros(6, 6);
        assert_eq!(dual_margin(&a, &b, &duals).unwrap(), 0.0);
    }

    #[test]
    fn dual_residuals_on_antiparallel_unit_faces() {
        let m = unit_cube_at(Vector3::zeros());
        let n = unit_cube_at(Vector3::new(3.0, 0.0, 0.0));
        let mut duals = DualPair::zeros(6, 6);
        duals.lambda_m[0] = 1.0; // +x face of m
        duals.lambda_n[1] = 1.0; // -x face of n
        let (s, excess, neg) = dual_residuals(&m, &n, &duals);
        assert!(s.norm() < 1e-15);
        assert_eq!(excess, 0.0);
        assert_eq!(neg, 0.0);

        duals.lambda_m[0] = 2.0;
        let (_, excess, _) = dual_residuals(&m, &n, &duals);
        assert_relative_eq!(excess, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn max_dual_bound_matches_face_gap() {
        let m = unit_cube_at(Vector3::zeros());
        let n = unit_cube_at(Vector3::new(3.0, 0.0, 0.0));
        let (bound, duals) = max_dual_bound(&m, &n).unwrap();
        assert_relative_eq!(bound, 1.0, epsilon = 1e-4);
        assert_relative_eq!(dual_margin(&m, &n, &duals).unwrap(), bound, epsilon = 1e-12);
    }

    #[test]
    fn max_dual_bound_near_contact() {
        let m = unit_cube_at(Vector3::zeros());
        let n = unit_cube_at(Vector3::new(2.0 + 1e-3, 0.0, 0.0));
        let (bound, _) = max_dual_bound(&m, &n).unwrap();
        assert_relative_eq!(bound, 1e-3, epsilon = 1e-5);
    }

    #[test]
    fn max_dual_bound_rejects_overlap() {
        let m = unit_cube_at(Vector3::zeros());
        let n = unit_cube_at(Vector3::new(0.5, 0.0, 0.0));
        assert!(matches!(
            max_dual_bound(&m, &n),
            Err(GeometryError::NotSeparated)
        ));
    }

    #[test]
    fn random_configurations_satisfy_strong_duality() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let c = Vector3::new(
                rng.gen_range(2.5..6.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let n = make_box(
                Vector3::new(
                    rng.gen_range(0.2..1.0),
                    rng.gen_range(0.2..1.0),
                    rng.gen_range(0.2..1.0),
                ),
                &Pose::new(rot_z(rng.gen_range(0.0..6.28)), c).unwrap(),
            )
            .unwrap();
            let m = unit_cube_at(Vector3::zeros());
            let oracle = signed_distance_oracle(&m, &n);
            if oracle <= 1e-6 {
                continue;
            }
            let (bound, duals) = max_dual_bound(&m, &n).unwrap();
            assert!((bound - oracle).abs() <= 1e-4, "bound {bound} oracle {oracle}");
            let (s, excess, neg) = dual_residuals(&m, &n, &duals);
            assert!(s.norm() <= 1e-6 && excess <= 1e-6 && neg <= 1e-6);
        }
    }

    #[test]
    fn random_feasible_duals_respect_weak_duality() {
        let mut rng = StdRng::seed_from_u64(5);
        let m = unit_cube_at(Vector3::zeros());
        for _ in 0..50 {
            let n = unit_cube_at(Vector3::new(
                rng.gen_range(2.2..8.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ));
            let oracle = signed_distance_oracle(&m, &n);
            for _ in 0..20 {
                let mut nu = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                if nu.norm() < 1e-3 {
                    continue;
                }
                nu *= rng.gen_range(0.0..1.0) / nu.norm();
                let lambda_m = support_multipliers(&m, &(-nu)).unwrap();
                let lambda_n = support_multipliers(&n, &nu).unwrap();
                let duals = DualPair { lambda_m, lambda_n };
                let margin = dual_margin(&m, &n, &duals).unwrap();
                assert!(margin <= oracle + 1e-9, "margin {margin} oracle {oracle}");
            }
        }
    }

    #[test]
    fn vertex_enumeration_regular_tetrahedron() {
        let s = 3.0f64.sqrt();
        let corners = [
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, -1.0, -1.0),
            Vector3::new(-1.0, 1.0, -1.0),
            Vector3::new(-1.0, -1.0, 1.0),
        ];
        let mut a = DMatrix::zeros(4, 3);
        let mut b = DVector::zeros(4);
        for (i, c) in corners.iter().enumerate() {
            for j in 0..3 {
                a[(i, j)] = -c[j] / s;
            }
            b[i] = 1.0 / s;
        }
        let poly = HPolytope::new(a, b).unwrap();
        let verts = vertex_enumeration(&poly).unwrap();
        assert_eq!(verts.len(), 4);
        for c in &corners {
            assert!(verts.iter().any(|v| (v - c).norm() < 1e-9));
        }
    }

    #[test]
    fn vertex_enumeration_cut_corner_cube() {
        // Unit cube plus the plane x + y + z <= 2.5 slicing off one corner:
        // 7 original corners plus a triangular cut = 10 vertices.
        let cube = unit_cube_at(Vector3::zeros());
        let mut a = DMatrix::zeros(7, 3);
        let mut b = DVector::zeros(7);
        for i in 0..6 {
            for j in 0..3 {
                a[(i, j)] = cube.a()[(i, j)];
            }
            b[i] = cube.b()[i];
        }
        let s = 3.0f64.sqrt();
        a[(6, 0)] = 1.0 / s;
        a[(6, 1)] = 1.0 / s;
        a[(6, 2)] = 1.0 / s;
        b[6] = 2.5 / s;
        let poly = HPolytope::new(a, b).unwrap();
        assert_eq!(vertex_enumeration(&poly).unwrap().len(), 10);
    }

    #[test]
    fn constructor_rejects_unbounded_and_empty() {
        // Slab: only z is bounded.
        let mut a = DMatrix::zeros(4, 3);
        let mut b = DVector::zeros(4);
        a[(0, 2)] = 1.0;
        a[(1, 2)] = -1.0;
        a[(2, 0)] = 1.0;
        a[(3, 0)] = 1.0;
        b[0] = 1.0;
        b[1] = 1.0;
        b[2] = 1.0;
        b[3] = 2.0;
        assert!(matches!(
            HPolytope::new(a.clone(), b.clone()),
            Err(GeometryError::DegeneratePolytope(_))
        ));

        // Empty: x <= -1 and -x <= -2.
        let mut a = DMatrix::zeros(6, 3);
        let b = DVector::from_vec(vec![-1.0, -2.0, 1.0, 1.0, 1.0, 1.0]);
        a[(0, 0)] = 1.0;
        a[(1, 0)] = -1.0;
        a[(2, 1)] = 1.0;
        a[(3, 1)] = -1.0;
        a[(4, 2)] = 1.0;
        a[(5, 2)] = -1.0;
        assert!(matches!(
            HPolytope::new(a, b),
            Err(GeometryError::DegeneratePolytope(_))
        ));
    }
}
