//! Closest points between convex vertex hulls.
//!
//! GJK on the Minkowski difference, with the simplex subproblem solved by
//! exhaustive face enumeration (at most 15 subsets of a tetrahedron). Support
//! points are plain argmax scans over the vertex lists, so the routine is
//! independent of the H-representation machinery it is used to cross-check.

use nalgebra::Vector3;

#[derive(Debug, Clone, Copy)]
pub struct ClosestPair {
    /// Euclidean distance between the hulls; 0 when intersecting.
    pub distance: f64,
    pub point_a: Vector3<f64>,
    pub point_b: Vector3<f64>,
    pub intersecting: bool,
}

struct CsoVertex {
    z: Vector3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
}

const REL_TOL: f64 = 1e-12;
const CONTACT_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 128;

/// Closest points between `conv(va)` and `conv(vb)`.
///
/// Both vertex lists must be nonempty. Ties in the support scan are broken by
/// the first index, so the result is deterministic for a fixed vertex order.
pub fn closest_between_hulls(va: &[Vector3<f64>], vb: &[Vector3<f64>]) -> ClosestPair {
    assert!(!va.is_empty() && !vb.is_empty());

    let support = |d: Vector3<f64>| -> CsoVertex {
        let a = *argmax_dot(va, d);
        let b = *argmax_dot(vb, -d);
        CsoVertex { z: a - b, a, b }
    };

    let mut simplex: Vec<CsoVertex> = vec![support(vb[0] - va[0] + Vector3::new(1e-3, 2e-3, 3e-3))];
    let mut v = simplex[0].z;
    let mut coeffs = vec![1.0];

    for _ in 0..MAX_ITERS {
        let vv = v.norm_squared();
        if vv < CONTACT_TOL * CONTACT_TOL {
            return contact_result(&simplex, &coeffs);
        }
        let s = support(-v);
        // No closer point in the support direction: converged.
        if vv - v.dot(&s.z) <= REL_TOL * vv.max(1.0) {
            break;
        }
        // Support point already in the simplex: converged.
        if simplex.iter().any(|w| (w.z - s.z).norm_squared() < 1e-28) {
            break;
        }
        simplex.push(s);
        let Some((nv, keep, gamma)) = closest_on_simplex(&simplex) else {
            break;
        };
        simplex = keep
            .into_iter()
            .map(|i| CsoVertex {
                z: simplex[i].z,
                a: simplex[i].a,
                b: simplex[i].b,
            })
            .collect();
        coeffs = gamma;
        // Stalled: accept the current witness.
        if nv.norm_squared() > vv - 1e-16 {
            v = nv;
            break;
        }
        v = nv;
    }

    if v.norm() < CONTACT_TOL {
        return contact_result(&simplex, &coeffs);
    }
    let (pa, pb) = witness_points(&simplex, &coeffs);
    ClosestPair {
        distance: v.norm(),
        point_a: pa,
        point_b: pb,
        intersecting: false,
    }
}

fn contact_result(simplex: &[CsoVertex], coeffs: &[f64]) -> ClosestPair {
    let (pa, pb) = witness_points(simplex, coeffs);
    ClosestPair {
        distance: 0.0,
        point_a: pa,
        point_b: pb,
        intersecting: true,
    }
}

fn witness_points(simplex: &[CsoVertex], coeffs: &[f64]) -> (Vector3<f64>, Vector3<f64>) {
    let mut pa = Vector3::zeros();
    let mut pb = Vector3::zeros();
    for (w, &g) in simplex.iter().zip(coeffs.iter()) {
        pa += g * w.a;
        pb += g * w.b;
    }
    (pa, pb)
}

fn argmax_dot(verts: &[Vector3<f64>], d: Vector3<f64>) -> &Vector3<f64> {
    let mut best = &verts[0];
    let mut best_dot = best.dot(&d);
    for v in &verts[1..] {
        let dv = v.dot(&d);
        if dv > best_dot {
            best_dot = dv;
            best = v;
        }
    }
    best
}

/// Closest point to the origin on a simplex with up to 4 vertices.
///
/// Enumerates every nonempty vertex subset, solves the affine least-squares
/// system on each, and keeps the best subset whose barycentric coordinates are
/// nonnegative. Returns `(point, kept indices, coefficients)`.
fn closest_on_simplex(simplex: &[CsoVertex]) -> Option<(Vector3<f64>, Vec<usize>, Vec<f64>)> {
    let n = simplex.len();
    let mut best: Option<(f64, Vector3<f64>, Vec<usize>, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let m = idx.len();
        // KKT system for min ||Z gamma||^2 s.t. sum gamma = 1.
        let dim = m + 1;
        let mut mat = [[0.0f64; 5]; 5];
        let mut rhs = [0.0f64; 5];
        for r in 0..m {
            for c in 0..m {
                mat[r][c] = 2.0 * simplex[idx[r]].z.dot(&simplex[idx[c]].z);
            }
            mat[r][m] = 1.0;
            mat[m][r] = 1.0;
        }
        rhs[m] = 1.0;
        let Some(sol) = solve_small(dim, &mut mat, &mut rhs) else {
            continue;
        };
        let gamma = &sol[..m];
        if gamma.iter().any(|&g| g < -1e-12) {
            continue;
        }
        let mut p = Vector3::zeros();
        for (k, &i) in idx.iter().enumerate() {
            p += gamma[k] * simplex[i].z;
        }
        let d2 = p.norm_squared();
        let better = match &best {
            None => true,
            Some((bd2, ..)) => d2 < bd2 - 1e-18,
        };
        if better {
            best = Some((d2, p, idx, gamma.to_vec()));
        }
    }
    best.map(|(_, p, idx, g)| (p, idx, g))
}

/// Gaussian elimination with partial pivoting on an `n x n` system (n <= 5).
fn solve_small(n: usize, mat: &mut [[f64; 5]; 5], rhs: &mut [f64; 5]) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if mat[r][col].abs() > mat[piv][col].abs() {
                piv = r;
            }
        }
        if mat[piv][col].abs() < 1e-13 {
            return None;
        }
        mat.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = mat[r][col] / mat[col][col];
            for c in col..n {
                mat[r][c] -= f * mat[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in r + 1..n {
            s -= mat[r][c] * x[c];
        }
        x[r] = s / mat[r][r];
    }
    Some(x)
}
