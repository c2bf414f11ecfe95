//! Central-difference derivative checking.
//!
//! Used by the test suites to validate every analytic cost and constraint
//! derivative against an independent finite-difference estimate.

/// Max relative mismatch between an analytic gradient and central finite
/// differences of `f` over the index set `idx`.
///
/// The denominator floors at `1.0` so tiny entries are compared absolutely.
pub fn max_rel_gradient_error<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    analytic: &[f64],
    idx: &[usize],
    h: f64,
) -> f64 {
    let mut xbuf = x.to_vec();
    let mut worst = 0.0f64;
    for &i in idx {
        let x0 = xbuf[i];
        xbuf[i] = x0 + h;
        let fp = f(&xbuf);
        xbuf[i] = x0 - h;
        let fm = f(&xbuf);
        xbuf[i] = x0;
        let fd = (fp - fm) / (2.0 * h);
        let denom = analytic[i].abs().max(fd.abs()).max(1.0);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    worst
}

/// Like [`max_rel_gradient_error`] for a vector-valued function: checks row
/// `row` of the Jacobian `d f_row / d x_i` over `idx`.
pub fn max_rel_jacobian_row_error<F: FnMut(&[f64]) -> Vec<f64>>(
    mut f: F,
    x: &[f64],
    analytic_row: &[f64],
    row: usize,
    idx: &[usize],
    h: f64,
) -> f64 {
    let mut xbuf = x.to_vec();
    let mut worst = 0.0f64;
    for (slot, &i) in idx.iter().enumerate() {
        let x0 = xbuf[i];
        xbuf[i] = x0 + h;
        let fp = f(&xbuf)[row];
        xbuf[i] = x0 - h;
        let fm = f(&xbuf)[row];
        xbuf[i] = x0;
        let fd = (fp - fm) / (2.0 * h);
        let denom = analytic_row[slot].abs().max(fd.abs()).max(1.0);
        worst = worst.max((analytic_row[slot] - fd).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catches_a_wrong_gradient() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[1];
        let x = [2.0, 5.0];
        let good = [4.0, 3.0];
        let bad = [4.0, 2.5];
        let idx = [0, 1];
        assert!(max_rel_gradient_error(f, &x, &good, &idx, 1e-6) < 1e-8);
        assert!(max_rel_gradient_error(f, &x, &bad, &idx, 1e-6) > 0.1);
    }
}
