//! Forward-mode dual numbers and small fixed-size linear algebra.
//!
//! The collision constraints depend on the flat state through the flatness
//! reconstruction (cable direction, quadrotor pose), so their Jacobians need
//! derivatives of a moderately deep algebraic chain. The chain is written once,
//! generic over [`Scalar`], and instantiated with `f64` for plain evaluation
//! and with [`Dual`] for evaluation with tangents.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar abstraction for the generic evaluation chains.
///
/// Only the operations the chains actually use: field arithmetic and square
/// root. Comparisons for singularity guards go through [`Scalar::val`] so that
/// branching is on the value part only (tangents follow the taken branch).
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// Value part (the primal value for duals, identity for `f64`).
    fn val(self) -> f64;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// First-order dual number carrying `N` tangent directions.
#[derive(Clone, Copy, Debug)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub dx: [f64; N],
}

impl<const N: usize> Dual<N> {
    #[inline]
    pub fn constant(v: f64) -> Self {
        Self { re: v, dx: [0.0; N] }
    }

    /// Seed the `i`-th tangent direction with unit rate.
    #[inline]
    pub fn variable(v: f64, i: usize) -> Self {
        let mut dx = [0.0; N];
        dx[i] = 1.0;
        Self { re: v, dx }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let mut dx = self.dx;
        for (d, r) in dx.iter_mut().zip(rhs.dx.iter()) {
            *d += r;
        }
        Self { re: self.re + rhs.re, dx }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let mut dx = self.dx;
        for (d, r) in dx.iter_mut().zip(rhs.dx.iter()) {
            *d -= r;
        }
        Self { re: self.re - rhs.re, dx }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut dx = [0.0; N];
        for i in 0..N {
            dx[i] = self.dx[i] * rhs.re + self.re * rhs.dx[i];
        }
        Self { re: self.re * rhs.re, dx }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.re;
        let re = self.re * inv;
        let mut dx = [0.0; N];
        for i in 0..N {
            dx[i] = (self.dx[i] - re * rhs.dx[i]) * inv;
        }
        Self { re, dx }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut dx = self.dx;
        for d in dx.iter_mut() {
            *d = -*d;
        }
        Self { re: -self.re, dx }
    }
}

impl<const N: usize> Scalar for Dual<N> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    #[inline]
    fn val(self) -> f64 {
        self.re
    }
    #[inline]
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        let scale = 0.5 / r;
        let mut dx = [0.0; N];
        for i in 0..N {
            dx[i] = self.dx[i] * scale;
        }
        Self { re: r, dx }
    }
}

/// 3-vector over a generic scalar.
pub type V3<S> = [S; 3];
/// Row-major 3x3 matrix over a generic scalar.
pub type M3<S> = [[S; 3]; 3];

#[inline]
pub fn v3<S: Scalar>(x: f64, y: f64, z: f64) -> V3<S> {
    [S::from_f64(x), S::from_f64(y), S::from_f64(z)]
}

#[inline]
pub fn add<S: Scalar>(a: V3<S>, b: V3<S>) -> V3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<S: Scalar>(a: V3<S>, b: V3<S>) -> V3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn smul<S: Scalar>(s: S, a: V3<S>) -> V3<S> {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn dot<S: Scalar>(a: V3<S>, b: V3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<S: Scalar>(a: V3<S>, b: V3<S>) -> V3<S> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<S: Scalar>(a: V3<S>) -> S {
    dot(a, a).sqrt()
}

#[inline]
pub fn mat_vec<S: Scalar>(m: &M3<S>, v: V3<S>) -> V3<S> {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// `m^T v`.
#[inline]
pub fn mat_tvec<S: Scalar>(m: &M3<S>, v: V3<S>) -> V3<S> {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
pub fn mat_identity<S: Scalar>() -> M3<S> {
    let o = S::one();
    let z = S::zero();
    [[o, z, z], [z, o, z], [z, z, o]]
}

/// Matrix with the given columns.
#[inline]
pub fn mat_from_cols<S: Scalar>(c0: V3<S>, c1: V3<S>, c2: V3<S>) -> M3<S> {
    [
        [c0[0], c1[0], c2[0]],
        [c0[1], c1[1], c2[1]],
        [c0[2], c1[2], c2[2]],
    ]
}

/// Rotation taking `+z` to the unit direction `d` along the geodesic,
/// `R = I + [w]x + [w]x^2 / (1 + c)` with `w = e3 x d`, `c = e3 . d`.
///
/// Smooth everywhere except `d = -e3`; returns `None` there (the caller picks
/// a convention for the antipodal case).
pub fn align_z_rotation<S: Scalar>(d: V3<S>) -> Option<M3<S>> {
    let c = d[2];
    if c.val() <= -1.0 + 1e-9 {
        return None;
    }
    let wx = -d[1];
    let wy = d[0];
    let inv = S::one() / (S::one() + c);
    // I + K + K^2/(1+c) with K = skew(wx, wy, 0), written out.
    let o = S::one();
    Some([
        [o - wy * wy * inv, wx * wy * inv, wy],
        [wx * wy * inv, o - wx * wx * inv, -wx],
        [-wy, wx, o - (wx * wx + wy * wy) * inv],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_arithmetic_matches_finite_differences() {
        // f(x, y) = x * y + sqrt(x) / y at (4, 2)
        let f = |x: f64, y: f64| x * y + x.sqrt() / y;
        let x = Dual::<2>::variable(4.0, 0);
        let y = Dual::<2>::variable(2.0, 1);
        let r = x * y + x.sqrt() / y;
        assert!((r.re - f(4.0, 2.0)).abs() < 1e-14);
        let h = 1e-6;
        let dfdx = (f(4.0 + h, 2.0) - f(4.0 - h, 2.0)) / (2.0 * h);
        let dfdy = (f(4.0, 2.0 + h) - f(4.0, 2.0 - h)) / (2.0 * h);
        assert!((r.dx[0] - dfdx).abs() < 1e-8);
        assert!((r.dx[1] - dfdy).abs() < 1e-8);
    }

    #[test]
    fn cross_product_is_orthogonal() {
        let a: V3<f64> = [1.0, 2.0, 3.0];
        let b: V3<f64> = [-2.0, 0.5, 1.0];
        let c = cross(a, b);
        assert!(dot(a, c).abs() < 1e-14);
        assert!(dot(b, c).abs() < 1e-14);
    }

    #[test]
    fn mat_tvec_is_transpose_product() {
        let m: M3<f64> = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 10.0]];
        let v: V3<f64> = [1.0, -1.0, 2.0];
        let t = mat_tvec(&m, v);
        assert_eq!(t, [1.0 - 4.0 + 14.0, 2.0 - 5.0 + 16.0, 3.0 - 6.0 + 20.0]);
    }

    #[test]
    fn align_z_maps_z_axis_onto_direction() {
        let dirs: [V3<f64>; 4] = [
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.6, -0.64, 0.48],
            [0.0, 0.8, -0.6],
        ];
        for d in dirs {
            let r = align_z_rotation(d).unwrap();
            let e3 = [0.0, 0.0, 1.0];
            let got = mat_vec(&r, e3);
            for i in 0..3 {
                assert!((got[i] - d[i]).abs() < 1e-12, "{d:?} -> {got:?}");
            }
            // Orthonormality: R' R = I.
            for i in 0..3 {
                for j in 0..3 {
                    let col_i = [r[0][i], r[1][i], r[2][i]];
                    let col_j = [r[0][j], r[1][j], r[2][j]];
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(col_i, col_j) - want).abs() < 1e-12);
                }
            }
        }
        assert!(align_z_rotation([0.0f64, 0.0, -1.0]).is_none());
    }
}
