//! Small dense linear programs via two-phase simplex.
//!
//! Everything in this crate that needs an LP is desk scale (tens of variables,
//! tens of constraints): polytope boundedness probes, the penetration-depth
//! program of the signed-distance oracle, and the support-function programs
//! that recover optimal dual certificates. A dense tableau with Bland's rule
//! keeps the solver deterministic and cycle-free at these sizes.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone, Copy)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 20_000;

/// Solution of a linear program.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Minimize `c^T x` subject to `a x = b`, `x >= 0`.
///
/// `a` is row-major with `m` rows of length `n`. Rows with negative `b` are
/// sign-flipped internally; redundant rows are tolerated.
pub fn solve_standard(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let m = a.len();
    let n = c.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), m);

    // Tableau columns: n structural + m artificial + 1 rhs.
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    for (i, row) in a.iter().enumerate() {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * row[j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = flip * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase 1: minimize the sum of artificials.
    let mut phase1_cost = vec![0.0; width - 1];
    for j in n..n + m {
        phase1_cost[j] = 1.0;
    }
    run_simplex(&mut t, &mut basis, &phase1_cost, n + m)?;
    let phase1_obj: f64 = basis
        .iter()
        .enumerate()
        .map(|(i, &bv)| if bv >= n { t[i][width - 1] } else { 0.0 })
        .sum();
    if phase1_obj > FEAS_TOL {
        return Err(LpError::Infeasible);
    }

    // Drive any residual artificials out of the basis.
    for i in 0..m {
        if basis[i] >= n {
            let pivot_col = (0..n).find(|&j| t[i][j].abs() > PIVOT_TOL);
            match pivot_col {
                Some(j) => pivot(&mut t, &mut basis, i, j),
                // Row is all zeros in structural columns: redundant constraint.
                None => t[i][width - 1] = 0.0,
            }
        }
    }

    // Phase 2 on the structural columns only (artificials frozen out).
    let mut phase2_cost = vec![0.0; width - 1];
    phase2_cost[..n].copy_from_slice(c);
    run_simplex(&mut t, &mut basis, &phase2_cost, n)?;

    let mut x = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][width - 1];
        }
    }
    let objective = c.iter().zip(x.iter()).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, objective })
}

/// Maximize `c^T y` subject to `g y <= h` with `y` free.
///
/// Split into `y = y+ - y-` plus slacks and solved in standard form.
pub fn solve_max_inequality(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Result<LpSolution, LpError> {
    let n = c.len();
    let m = g.len();
    let n_std = 2 * n + m;
    let mut cost = vec![0.0; n_std];
    for j in 0..n {
        cost[j] = -c[j];
        cost[n + j] = c[j];
    }
    let mut a = vec![vec![0.0; n_std]; m];
    for i in 0..m {
        for j in 0..n {
            a[i][j] = g[i][j];
            a[i][n + j] = -g[i][j];
        }
        a[i][2 * n + i] = 1.0;
    }
    let sol = solve_standard(&cost, &a, h)?;
    let mut y = vec![0.0; n];
    for j in 0..n {
        y[j] = sol.x[j] - sol.x[n + j];
    }
    let objective = c.iter().zip(y.iter()).map(|(ci, yi)| ci * yi).sum();
    Ok(LpSolution { x: y, objective })
}

/// Simplex iterations with Bland's rule, restricted to columns `< allowed`.
fn run_simplex(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    allowed: usize,
) -> Result<(), LpError> {
    let m = t.len();
    if m == 0 {
        return Ok(());
    }
    let width = t[0].len();
    for _ in 0..MAX_PIVOTS {
        // Reduced costs: r_j = c_j - c_B^T B^{-1} A_j, computed from the tableau.
        let mut entering = None;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let mut r = cost[j];
            for i in 0..m {
                r -= cost[basis[i]] * t[i][j];
            }
            if r < -1e-9 {
                entering = Some(j);
                break; // Bland: smallest index.
            }
        }
        let Some(col) = entering else {
            return Ok(());
        };

        // Ratio test; Bland tie-break on smallest basis variable.
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][col] > PIVOT_TOL {
                let ratio = t[i][width - 1] / t[i][col];
                match leaving {
                    None => leaving = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12
                            || (ratio < lr + 1e-12 && basis[i] < basis[li])
                        {
                            leaving = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((row, _)) = leaving else {
            return Err(LpError::Unbounded);
        };
        pivot(t, basis, row, col);
    }
    Err(LpError::IterationLimit)
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let width = t[0].len();
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    for i in 0..t.len() {
        if i != row && t[i][col].abs() > 0.0 {
            let factor = t[i][col];
            for j in 0..width {
                t[i][j] -= factor * t[row][j];
            }
        }
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_over_triangle() {
        // max x + y s.t. x <= 1, y <= 2, x + y <= 2.5
        let sol = solve_max_inequality(
            &[1.0, 1.0],
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            &[1.0, 2.0, 2.5],
        )
        .unwrap();
        assert!((sol.objective - 2.5).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // x <= -1 and -x <= -2 (x >= 2)
        let r = solve_max_inequality(&[1.0], &[vec![1.0], vec![-1.0]], &[-1.0, -2.0]);
        assert_eq!(r.unwrap_err(), LpError::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        // max x s.t. -x <= 0
        let r = solve_max_inequality(&[1.0], &[vec![-1.0]], &[0.0]);
        assert_eq!(r.unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn standard_form_known_solution() {
        // min -x1 - 2 x2 s.t. x1 + x2 = 4, x1 - x2 = 0  =>  x = (2, 2), obj -6
        let sol = solve_standard(
            &[-1.0, -2.0],
            &[vec![1.0, 1.0], vec![1.0, -1.0]],
            &[4.0, 0.0],
        )
        .unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
        assert!((sol.objective + 6.0).abs() < 1e-9);
    }

    #[test]
    fn support_function_of_unit_cube() {
        // min b^T lambda s.t. A^T lambda = v, lambda >= 0 with A = +/- axis rows
        // equals the support function h(v) = sum |v_i| for the unit cube.
        let a_t = vec![
            vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0, -1.0],
        ];
        let b = vec![1.0; 6];
        for v in [[1.0, 0.0, 0.0], [1.0, 1.0, 1.0], [-0.5, 2.0, -1.0]] {
            let sol = solve_standard(&b, &a_t, &v).unwrap();
            let h: f64 = v.iter().map(|x| x.abs()).sum();
            assert!((sol.objective - h).abs() < 1e-9, "v = {v:?}");
        }
    }

    #[test]
    fn inequality_and_standard_duals_agree() {
        // Strong duality between max c^T y s.t. G y <= h and
        // min h^T l s.t. G^T l = c, l >= 0 on randomized bounded instances.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..50 {
            // Box-like constraints keep the primal bounded and feasible at 0.
            let mut g = Vec::new();
            let mut h = Vec::new();
            for j in 0..3 {
                let mut row = vec![0.0; 3];
                row[j] = 1.0;
                g.push(row.clone());
                h.push(1.0 + next().abs());
                row[j] = -1.0;
                g.push(row);
                h.push(1.0 + next().abs());
            }
            // A couple of random extra cuts through the origin neighborhood.
            for _ in 0..2 {
                g.push(vec![next(), next(), next()]);
                h.push(0.5 + next().abs());
            }
            let c = vec![next(), next(), next()];
            let primal = solve_max_inequality(&c, &g, &h).unwrap();
            let g_t: Vec<Vec<f64>> = (0..3)
                .map(|j| g.iter().map(|row| row[j]).collect())
                .collect();
            let dual = solve_standard(&h, &g_t, &c).unwrap();
            assert!(
                (primal.objective - dual.objective).abs() < 1e-7,
                "primal {} dual {}",
                primal.objective,
                dual.objective
            );
        }
    }
}
