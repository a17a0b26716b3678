//! Dense bounded-variable primal simplex for small packing LPs:
//!
//! ```text
//! maximize    c.x
//! subject to  A x <= b        (b >= 0)
//!             0 <= x <= u     (u may be infinite)
//! ```
//!
//! With `b >= 0` the origin is feasible, so no phase one is needed. Row duals
//! are read off the slack columns of the final reduced-cost row.

use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-11;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone)]
pub(crate) struct PackingLp {
    /// Row-major `m x n`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    /// Row duals, all nonnegative.
    pub y: Vec<f64>,
    pub value: f64,
}

pub(crate) fn solve(lp: &PackingLp) -> Result<LpSolution> {
    let m = lp.b.len();
    let n = lp.c.len();
    if lp.a.len() != m || lp.upper.len() != n || lp.a.iter().any(|r| r.len() != n) {
        return Err(Error::Numerical("inconsistent LP dimensions".into()));
    }
    if lp.b.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || lp.upper.iter().any(|&u| !(u >= 0.0)) {
        return Err(Error::Numerical("LP requires finite b >= 0 and u >= 0".into()));
    }
    let width = n + m;
    let mut t = vec![0.0; m * width];
    for i in 0..m {
        t[i * width..i * width + n].copy_from_slice(&lp.a[i]);
        t[i * width + n + i] = 1.0;
    }
    let upper: Vec<f64> = lp.upper.iter().copied().chain(std::iter::repeat(f64::INFINITY).take(m)).collect();
    let mut basis: Vec<usize> = (n..width).collect();
    let mut is_basic = vec![false; width];
    basis.iter().for_each(|&v| is_basic[v] = true);
    let mut at_upper = vec![false; width];
    let mut beta = lp.b.clone();
    let mut r: Vec<f64> = lp.c.iter().copied().chain(std::iter::repeat(0.0).take(m)).collect();

    let max_iter = 20_000 + 50 * width;
    let mut degenerate_run = 0;
    for _ in 0..max_iter {
        let bland = degenerate_run >= DEGENERATE_LIMIT;
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..width {
            if is_basic[j] {
                continue;
            }
            let score = if at_upper[j] { -r[j] } else { r[j] };
            if score > COST_TOL && entering.map_or(true, |(_, s)| !bland && score > s) {
                entering = Some((j, score));
            }
        }
        let Some((j, _)) = entering else {
            let mut x: Vec<f64> = (0..n).map(|k| if at_upper[k] { upper[k] } else { 0.0 }).collect();
            for (i, &v) in basis.iter().enumerate() {
                if v < n {
                    x[v] = beta[i];
                }
            }
            let y = (0..m).map(|i| (-r[n + i]).max(0.0)).collect();
            let value = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
            return Ok(LpSolution { x, y, value });
        };
        let dir = if at_upper[j] { -1.0 } else { 1.0 };

        // ratio test; `None` leaving row means the entering variable flips bound
        let mut step = upper[j];
        let mut leaving: Option<(usize, bool)> = None;
        for i in 0..m {
            let a = dir * t[i * width + j];
            let (limit, to_upper) = if a > PIVOT_TOL {
                (beta[i].max(0.0) / a, false)
            } else if a < -PIVOT_TOL && upper[basis[i]].is_finite() {
                ((upper[basis[i]] - beta[i]).max(0.0) / -a, true)
            } else {
                continue;
            };
            let better = match leaving {
                _ if limit < step - 1e-13 => true,
                Some((p, _)) => limit <= step + 1e-13 && basis[i] < basis[p],
                None => false,
            };
            if better {
                step = limit;
                leaving = Some((i, to_upper));
            }
        }
        if !step.is_finite() {
            return Err(Error::Numerical("unbounded packing LP".into()));
        }
        degenerate_run = if step < 1e-12 { degenerate_run + 1 } else { 0 };
        for i in 0..m {
            beta[i] -= step * dir * t[i * width + j];
        }
        let Some((p, to_upper)) = leaving else {
            at_upper[j] = !at_upper[j];
            continue;
        };
        let entering_value = if at_upper[j] { upper[j] - step } else { step };
        let out = basis[p];
        is_basic[out] = false;
        at_upper[out] = to_upper;
        is_basic[j] = true;
        at_upper[j] = false;
        basis[p] = j;
        beta[p] = entering_value;

        let pivot = t[p * width + j];
        for k in 0..width {
            t[p * width + k] /= pivot;
        }
        let (before, rest) = t.split_at_mut(p * width);
        let (prow, after) = rest.split_at_mut(width);
        for row in before.chunks_exact_mut(width).chain(after.chunks_exact_mut(width)) {
            let f = row[j];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(a, &b)| *a -= f * b);
            }
        }
        let f = r[j];
        r.iter_mut().zip(prow.iter()).for_each(|(a, &b)| *a -= f * b);
    }
    Err(Error::Numerical(format!("simplex did not converge within {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 7, x <= 3
        let lp = PackingLp {
            a: vec![vec![1.0, 1.0], vec![1.0, 3.0]],
            b: vec![4.0, 7.0],
            c: vec![3.0, 2.0],
            upper: vec![3.0, f64::INFINITY],
        };
        let s = solve(&lp).unwrap();
        assert!((s.value - 11.0).abs() < 1e-12);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        // dual: y1 = 2 on the first row, second row slack
        assert!((s.y[0] - 2.0).abs() < 1e-12 && s.y[1].abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_and_empty() {
        let lp = PackingLp { a: vec![vec![1.0, 1.0]], b: vec![0.0], c: vec![1.0, 1.0], upper: vec![1.0, 1.0] };
        let s = solve(&lp).unwrap();
        assert_eq!(s.value, 0.0);
        let empty = PackingLp { a: vec![vec![]; 2], b: vec![1.0, 2.0], c: vec![], upper: vec![] };
        let s = solve(&empty).unwrap();
        assert_eq!((s.value, s.y.clone()), (0.0, vec![0.0, 0.0]));
    }

    #[test]
    fn rejects_negative_rhs() {
        let lp = PackingLp { a: vec![vec![1.0]], b: vec![-1.0], c: vec![1.0], upper: vec![1.0] };
        assert!(solve(&lp).is_err());
    }
}
