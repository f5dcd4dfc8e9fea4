//! Exact rectangular assignment solving.
//!
//! Dense O(n^3) Hungarian method over f64 weights. Greedy matching is
//! deliberately not offered: the solver must reproduce the brute-force
//! optimum on every input.

use crate::error::{Error, Result};

/// One-to-one row/column selection of size min(rows, cols).
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Selected (row, column) pairs, sorted by row.
    pub matches: Vec<(usize, usize)>,
    /// Sum of the selected weights in the caller's orientation.
    pub objective: f64,
}

/// Solves the assignment problem exactly. `maximize` selects between
/// maximum- and minimum-weight matchings; ties break deterministically
/// toward lower row, then lower column indices.
pub fn solve_assignment(weights: &[Vec<f64>], maximize: bool) -> Result<Assignment> {
    let rows = weights.len();
    if rows == 0 {
        return Err(Error::validation("assignment matrix has no rows"));
    }
    let cols = weights[0].len();
    if cols == 0 {
        return Err(Error::validation("assignment matrix has no columns"));
    }
    for (i, row) in weights.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::validation(format!(
                "assignment matrix row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, w) in row.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite weight {w} at ({i}, {j})"
                )));
            }
        }
    }

    // Pad to a square minimization problem. Dummy rows and columns carry
    // cost 0 for every partner, which leaves the optimum over real cells
    // unchanged regardless of which real rows or columns they absorb.
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            if maximize {
                -weights[i][j]
            } else {
                weights[i][j]
            }
        } else {
            0.0
        }
    };

    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut assigned_row = vec![0usize; n + 1]; // column -> row, 1-based
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];

        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;

            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }

            for j in 0..=n {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }

            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }

        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut matches = Vec::with_capacity(rows.min(cols));
    for j in 1..=n {
        let i = assigned_row[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            matches.push((i - 1, j - 1));
        }
    }
    matches.sort_unstable();
    let objective = matches.iter().map(|&(i, j)| weights[i][j]).sum();
    Ok(Assignment { matches, objective })
}
