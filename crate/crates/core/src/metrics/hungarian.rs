//! Minimum-cost assignment (Kuhn-Munkres with potentials, O(n^3)).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each input row; `None` when the row was matched to
    /// a zero-cost padding column.
    pub row_to_col: Vec<Option<usize>>,
    pub total_cost: f64,
}

/// Solves the assignment problem for a `rows x cols` cost matrix.
///
/// Rectangular inputs are padded to square with zero-cost dummy rows or
/// columns. Among optimal matchings the lexicographically smallest column
/// vector (over the padded square) is returned.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Result<Assignment> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid_argument("cost matrix rows differ in length"));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::invalid_argument(
            "cost matrix contains NaN or infinite entries",
        ));
    }
    if rows == 0 || cols == 0 {
        return Ok(Assignment {
            row_to_col: vec![None; rows],
            total_cost: 0.0,
        });
    }
    let n = rows.max(cols);
    let at = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            cost[i][j]
        } else {
            0.0
        }
    };

    // 1-indexed potentials; p[j] is the row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    let mut col_to_row = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
        col_to_row[j - 1] = p[j] - 1;
    }

    // Any perfect matching on zero-reduced-cost edges is optimal; walk rows
    // in order and move each to the smallest tight column that still leaves
    // a perfect tight matching for the remaining rows.
    let scale = cost.iter().flatten().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * scale;
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| at(i, j) - u[i + 1] - v[j + 1] <= tol)
                .collect()
        })
        .collect();
    for i in 0..n {
        let current = row_to_col[i];
        for j in 0..current {
            if !tight[i][j] || col_to_row[j] < i {
                continue;
            }
            let owner = col_to_row[j];
            let mut visited = vec![false; n];
            visited[j] = true;
            let mut path = Vec::new();
            if reroute(
                owner,
                current,
                i,
                &tight,
                &col_to_row,
                &mut visited,
                &mut path,
            ) {
                // path holds (row, new column) pairs, starting with `owner`
                for &(r, c) in &path {
                    row_to_col[r] = c;
                    col_to_row[c] = r;
                }
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
    }

    let total_cost = (0..rows).map(|i| at(i, row_to_col[i])).sum();
    Ok(Assignment {
        row_to_col: (0..rows)
            .map(|i| (row_to_col[i] < cols).then_some(row_to_col[i]))
            .collect(),
        total_cost,
    })
}

/// Finds an alternating path that gives `row` a new tight column, ending at
/// the column `target` being released. Rows `<= fixed` are never moved.
fn reroute(
    row: usize,
    target: usize,
    fixed: usize,
    tight: &[Vec<bool>],
    col_to_row: &[usize],
    visited: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    for c in 0..tight.len() {
        if visited[c] || !tight[row][c] {
            continue;
        }
        visited[c] = true;
        if c == target {
            path.push((row, c));
            return true;
        }
        let next = col_to_row[c];
        if next <= fixed {
            continue;
        }
        path.push((row, c));
        if reroute(next, target, fixed, tight, col_to_row, visited, path) {
            return true;
        }
        path.pop();
    }
    false
}
