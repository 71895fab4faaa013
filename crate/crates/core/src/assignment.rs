//! Minimum-cost one-to-one assignment (Hungarian method).
//!
//! Rectangular problems are padded to square with [`FORBIDDEN_COST`], solved
//! with shortest augmenting paths over dual potentials, and any pair that
//! lands on a forbidden cell is demoted to unassigned. Among equal-cost optima
//! the row-major lexicographically smallest permutation is returned.

use crate::affinity::{CostMatrix, FORBIDDEN_COST};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unassigned_rows: Vec<usize>,
    pub unassigned_cols: Vec<usize>,
}

impl Assignment {
    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    /// Sum of the costs of the surviving pairs, accumulated in row order.
    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| costs.get(i, j)).sum()
    }
}

/// Solves the assignment problem on `costs`.
pub fn solve(costs: &CostMatrix) -> Assignment {
    let (rows, cols) = (costs.rows(), costs.cols());
    let n = rows.max(cols);
    if n == 0 {
        return Assignment::default();
    }
    let padded: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i < rows && j < cols {
                costs.get(i, j)
            } else {
                FORBIDDEN_COST
            }
        })
        .collect();
    let perm = solve_square_lexmin(&padded, n);

    let mut out = Assignment::default();
    let mut col_used = vec![false; cols];
    for (i, &j) in perm.iter().enumerate().take(rows) {
        if j < cols && costs.get(i, j) < FORBIDDEN_COST {
            out.pairs.push((i, j));
            col_used[j] = true;
        } else {
            out.unassigned_rows.push(i);
        }
    }
    out.unassigned_cols = (0..cols).filter(|&j| !col_used[j]).collect();
    out
}

/// Optimal permutation `row -> col` of a square matrix, lexicographically
/// smallest among optima.
pub fn solve_square_lexmin(c: &[f64], n: usize) -> Vec<usize> {
    let (mut row_to_col, u, v) = hungarian(c, n);
    let scale = c.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let eps = 1e-9 * scale;
    // every optimal permutation uses only edges that are tight under an
    // optimal dual, so the lexicographic search stays inside that subgraph
    let tight = |i: usize, j: usize| c[i * n + j] - u[i] - v[j] <= eps;
    let mut col_to_row = vec![usize::MAX; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    for i in 0..n {
        for j in 0..n {
            if row_to_col[i] == j {
                break;
            }
            let owner = col_to_row[j];
            if owner < i || !tight(i, j) {
                continue;
            }
            // try giving column j to row i; the displaced owner must then
            // reach the column i gives up along tight edges among rows > i
            let freed = row_to_col[i];
            let mut trial_r2c = row_to_col.clone();
            let mut trial_c2r = col_to_row.clone();
            trial_r2c[i] = j;
            trial_c2r[j] = i;
            trial_c2r[freed] = usize::MAX;
            let mut seen = vec![false; n];
            if augment(owner, i, n, &tight, &mut trial_r2c, &mut trial_c2r, &mut seen) {
                row_to_col = trial_r2c;
                col_to_row = trial_c2r;
                break;
            }
        }
    }
    row_to_col
}

fn augment(
    row: usize,
    fixed_upto: usize,
    n: usize,
    tight: &impl Fn(usize, usize) -> bool,
    r2c: &mut [usize],
    c2r: &mut [usize],
    seen: &mut [bool],
) -> bool {
    for j in 0..n {
        if seen[j] || !tight(row, j) {
            continue;
        }
        let owner = c2r[j];
        if owner != usize::MAX && owner <= fixed_upto {
            continue;
        }
        seen[j] = true;
        if owner == usize::MAX || augment(owner, fixed_upto, n, tight, r2c, c2r, seen) {
            r2c[row] = j;
            c2r[j] = row;
            return true;
        }
    }
    false
}

/// Shortest-augmenting-path Hungarian algorithm, O(n^3). Returns the
/// assignment and the row/column potentials.
fn hungarian(c: &[f64], n: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based internally; index 0 is the virtual root column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
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
                let cur = c[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(c: &[f64], n: usize) -> (f64, Vec<usize>) {
        fn rec(
            c: &[f64],
            n: usize,
            row: usize,
            used: &mut Vec<bool>,
            cur: &mut Vec<usize>,
            best: &mut (f64, Vec<usize>),
        ) {
            if row == n {
                let total: f64 = cur.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum();
                if total < best.0 {
                    *best = (total, cur.clone());
                }
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    cur.push(j);
                    rec(c, n, row + 1, used, cur, best);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = (f64::INFINITY, vec![]);
        rec(c, n, 0, &mut vec![false; n], &mut vec![], &mut best);
        best
    }

    #[test]
    fn diagonal_zeros() {
        let f = FORBIDDEN_COST;
        let m = CostMatrix::from_rows(&[vec![0.0, f, f], vec![f, 0.0, f], vec![f, f, 0.0]]).unwrap();
        let a = solve(&m);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert!(a.unassigned_rows.is_empty() && a.unassigned_cols.is_empty());
    }

    #[test]
    fn two_by_two() {
        let m = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let a = solve(&m);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost(&m), 2.0);
        assert_eq!(brute_force(m.values(), 2).0, 2.0);
    }

    #[test]
    fn all_forbidden() {
        let m = CostMatrix::new(2, 3, vec![FORBIDDEN_COST; 6]).unwrap();
        let a = solve(&m);
        assert!(a.pairs.is_empty());
        assert_eq!(a.unassigned_rows, vec![0, 1]);
        assert_eq!(a.unassigned_cols, vec![0, 1, 2]);
    }

    #[test]
    fn empty_matrix() {
        let m = CostMatrix::new(0, 0, vec![]).unwrap();
        assert_eq!(solve(&m), Assignment::default());
        let m = CostMatrix::new(0, 3, vec![]).unwrap();
        assert_eq!(solve(&m).unassigned_cols, vec![0, 1, 2]);
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        let m = CostMatrix::from_rows(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]).unwrap();
        assert_eq!(solve(&m).pairs, vec![(0, 0), (1, 1), (2, 2)]);
        let m = CostMatrix::from_rows(&[vec![5.0, 1.0, 1.0], vec![1.0, 1.0, 5.0]]).unwrap();
        // optima: (0,1),(1,0) and (0,2),(1,0) and (0,2),(1,1); smallest first
        assert_eq!(solve(&m).pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn rectangular_counts_reconcile() {
        let m = CostMatrix::from_rows(&[vec![3.0, 1.0, 7.0, 2.0], vec![4.0, 4.0, 1.0, 9.0]]).unwrap();
        let a = solve(&m);
        assert_eq!(a.pairs, vec![(0, 1), (1, 2)]);
        assert_eq!(a.unassigned_cols, vec![0, 3]);
    }

    proptest! {
        #[test]
        fn integer_costs_match_brute_force(n in 1usize..6, vals in proptest::collection::vec(0u32..6, 36)) {
            let c: Vec<f64> = vals[..n * n].iter().map(|&v| f64::from(v)).collect();
            let perm = solve_square_lexmin(&c, n);
            let (best, best_perm) = brute_force(&c, n);
            let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum();
            prop_assert_eq!(total, best);
            prop_assert_eq!(perm, best_perm);
        }
    }
}
