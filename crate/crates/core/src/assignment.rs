//! Rectangular min-cost assignment (Hungarian method with potentials).

use crate::error::{Error, Result};
use crate::model::Matrix;

/// Optimal row-to-column assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `cols[r]` is the column given to row `r`.
    pub cols: Vec<usize>,
    /// Sum of the assigned entries, accumulated in row order.
    pub cost: f64,
}

/// Assign every row to a distinct column minimizing the total cost.
///
/// Requires `rows <= cols`. Runs in `O(rows^2 * cols)`; columns are scanned in
/// index order so ties resolve deterministically.
pub fn solve_assignment(c: &Matrix) -> Result<Assignment> {
    let (n, m) = (c.rows(), c.cols());
    if n > m {
        return Err(Error::Dimension(format!("assignment needs rows <= cols, got {n} x {m}")));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("assignment costs must be finite".into()));
    }
    if n == 0 {
        return Ok(Assignment { cols: Vec::new(), cost: 0.0 });
    }

    // 1-based potentials; column 0 is the virtual root of each augmenting search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = c[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut cols = vec![0usize; n];
    for j in 1..=m {
        if owner[j] > 0 {
            cols[owner[j] - 1] = j - 1;
        }
    }
    let cost = cols.iter().enumerate().map(|(r, &col)| c[(r, col)]).sum();
    Ok(Assignment { cols, cost })
}
