//! Rectangular minimum-cost assignment (Kuhn-Munkres with potentials).
//!
//! Forbidden (`+∞` or NaN) entries are replaced by a sentinel large enough
//! that any assignment using fewer forbidden cells is strictly cheaper, so
//! the solver first maximises the number of admissible pairs and then
//! minimises their cost. Sentinel pairs are reported as unmatched.

use super::CostMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `row_to_col[r]` is the column matched to row `r`, if any.
    pub row_to_col: Vec<Option<usize>>,
    /// Sum of matched entries, accumulated in row order.
    pub total_cost: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, c)))
    }

    pub fn matched(&self) -> usize {
        self.row_to_col.iter().filter(|c| c.is_some()).count()
    }
}

/// Optimal partial injection rows → columns over admissible entries.
/// `O(n² m)` for `n = min(rows, cols)`, `m = max(rows, cols)`.
pub fn hungarian_assign(costs: &CostMatrix) -> Assignment {
    let (rows, cols) = (costs.rows(), costs.cols());
    let mut row_to_col = vec![None; rows];
    if rows == 0 || cols == 0 {
        return Assignment {
            row_to_col,
            total_cost: 0.0,
        };
    }

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in 0..rows {
        for &v in costs.row(r) {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if lo > hi {
        // every pair forbidden
        return Assignment {
            row_to_col,
            total_cost: 0.0,
        };
    }
    let n = rows.min(cols);
    let sentinel = lo + (n as f64 + 1.0) * (hi - lo + 1.0);
    let cell = |r: usize, c: usize| {
        let v = costs.get(r, c);
        if v.is_finite() {
            v
        } else {
            sentinel
        }
    };

    if rows <= cols {
        let matched = solve(rows, cols, cell);
        for (r, c) in matched.into_iter().enumerate() {
            row_to_col[r] = Some(c);
        }
    } else {
        let matched = solve(cols, rows, |r, c| cell(c, r));
        for (c, r) in matched.into_iter().enumerate() {
            row_to_col[r] = Some(c);
        }
    }

    let mut total_cost = 0.0;
    for (r, slot) in row_to_col.iter_mut().enumerate() {
        if let Some(c) = *slot {
            let v = costs.get(r, c);
            if v.is_finite() {
                total_cost += v;
            } else {
                *slot = None;
            }
        }
    }
    Assignment {
        row_to_col,
        total_cost,
    }
}

/// Shortest-augmenting-path Hungarian for `n <= m`. Returns the column
/// assigned to each row.
fn solve(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    debug_assert!(n <= m);
    // 1-based with index 0 as the virtual root
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
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

    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}
