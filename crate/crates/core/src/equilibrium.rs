//! Exact-by-construction solver for two-player zero-sum matrix games.
//!
//! The game is shifted to a strictly positive matrix and solved as the
//! standard pair of linear programs: the column player's program
//! `max 1'w  s.t.  A w <= 1, w >= 0` is run through a dense simplex with
//! Bland's rule, which makes the pivot sequence (and therefore the
//! returned equilibrium) deterministic; the row player's mix is read off
//! the optimal duals. Empirical games stay small, so exactness and
//! reproducibility matter more than speed here.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("matrix rows must all have the same length")]
    Ragged,
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("mix length {got} does not match {want}")]
    MixLength { got: usize, want: usize },
}

/// Row-player utility matrix of a zero-sum game.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl MatrixGame {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<MatrixGame, MatrixError> {
        let rows = matrix.len();
        if rows == 0 || matrix[0].is_empty() {
            return Err(MatrixError::Empty);
        }
        let cols = matrix[0].len();
        let mut entries = Vec::with_capacity(rows * cols);
        for row in &matrix {
            if row.len() != cols {
                return Err(MatrixError::Ragged);
            }
            for &e in row {
                if !e.is_finite() {
                    return Err(MatrixError::NonFinite);
                }
                entries.push(e);
            }
        }
        Ok(MatrixGame { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    /// Row player's payoff for each pure row against a column mix.
    pub fn pure_row_payoffs(&self, col_mix: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if col_mix.len() != self.cols {
            return Err(MatrixError::MixLength {
                got: col_mix.len(),
                want: self.cols,
            });
        }
        Ok((0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.entry(r, c) * col_mix[c]).sum())
            .collect())
    }

    /// Row player's payoff for each pure column against a row mix; the
    /// column player best-responds by minimizing over this vector.
    pub fn pure_col_payoffs(&self, row_mix: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if row_mix.len() != self.rows {
            return Err(MatrixError::MixLength {
                got: row_mix.len(),
                want: self.rows,
            });
        }
        Ok((0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.entry(r, c) * row_mix[r]).sum())
            .collect())
    }
}

/// An optimal mixed-strategy pair and the game value for the row player.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub value: f64,
}

const EPS: f64 = 1e-9;

/// Solves the matrix game exactly (up to f64 round-off).
pub fn solve_zero_sum(game: &MatrixGame) -> Equilibrium {
    let m = game.rows;
    let n = game.cols;
    let min_entry = game.entries.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = if min_entry <= 0.0 { 1.0 - min_entry } else { 0.0 };

    // Tableau for max 1'w s.t. (A + shift) w <= 1, w >= 0.
    // Columns: n decision vars, m slacks, rhs. Rows: m constraints + objective.
    let width = n + m + 1;
    let mut t = vec![vec![0.0f64; width]; m + 1];
    for r in 0..m {
        for c in 0..n {
            t[r][c] = game.entry(r, c) + shift;
        }
        t[r][n + r] = 1.0;
        t[r][n + m] = 1.0;
    }
    for c in 0..n {
        t[m][c] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        // Bland's rule: lowest-index improving column.
        let Some(pivot_col) = (0..n + m).find(|&c| t[m][c] < -EPS) else {
            break;
        };
        // Minimum ratio; ties broken by lowest basic-variable index.
        let mut pivot_row: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..m {
            if t[r][pivot_col] > EPS {
                let ratio = t[r][n + m] / t[r][pivot_col];
                let take = match pivot_row {
                    None => true,
                    Some(prev) => {
                        ratio < best_ratio - EPS
                            || (ratio < best_ratio + EPS && basis[r] < basis[prev])
                    }
                };
                if take {
                    best_ratio = best_ratio.min(ratio);
                    pivot_row = Some(r);
                }
            }
        }
        let pr = pivot_row.expect("the positive shift keeps the program bounded");
        let scale = t[pr][pivot_col];
        for c in 0..width {
            t[pr][c] /= scale;
        }
        for r in 0..=m {
            if r != pr {
                let factor = t[r][pivot_col];
                if factor != 0.0 {
                    for c in 0..width {
                        t[r][c] -= factor * t[pr][c];
                    }
                }
            }
        }
        basis[pr] = pivot_col;
    }

    let mut w = vec![0.0f64; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            w[b] = t[r][n + m].max(0.0);
        }
    }
    let mut duals = vec![0.0f64; m];
    for (i, dual) in duals.iter_mut().enumerate() {
        *dual = t[m][n + i].max(0.0);
    }

    let w_total: f64 = w.iter().sum();
    let dual_total: f64 = duals.iter().sum();
    debug_assert!(w_total > 0.0 && dual_total > 0.0);
    let col: Vec<f64> = w.iter().map(|v| v / w_total).collect();
    let row: Vec<f64> = duals.iter().map(|v| v / dual_total).collect();
    Equilibrium {
        row,
        col,
        value: 1.0 / w_total - shift,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn game(rows: &[&[f64]]) -> MatrixGame {
        MatrixGame::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    // ----- exact enumeration oracle over square kernels -----
    //
    // Every matrix game has an optimal pair carried by a square submatrix
    // B with sum-of-adjugate s != 0, value det(B)/s, row weights the
    // column sums of adj(B), and column weights its row sums. Enumerating
    // all square submatrices and checking optimality with integer
    // arithmetic gives an exact, solver-independent value.

    fn determinant(b: &[Vec<i64>]) -> i64 {
        let k = b.len();
        if k == 1 {
            return b[0][0];
        }
        let mut det = 0i64;
        for (j, &lead) in b[0].iter().enumerate() {
            if lead == 0 {
                continue;
            }
            let minor: Vec<Vec<i64>> = b[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(c, _)| *c != j)
                        .map(|(_, &v)| v)
                        .collect()
                })
                .collect();
            let sign = if j % 2 == 0 { 1 } else { -1 };
            det += sign * lead * determinant(&minor);
        }
        det
    }

    fn adjugate(b: &[Vec<i64>]) -> Vec<Vec<i64>> {
        let k = b.len();
        if k == 1 {
            return vec![vec![1]];
        }
        let mut adj = vec![vec![0i64; k]; k];
        for i in 0..k {
            for j in 0..k {
                let minor: Vec<Vec<i64>> = (0..k)
                    .filter(|&r| r != j)
                    .map(|r| (0..k).filter(|&c| c != i).map(|c| b[r][c]).collect())
                    .collect();
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                adj[i][j] = sign * determinant(&minor);
            }
        }
        adj
    }

    fn combinations(pool: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut current = Vec::new();
        fn rec(start: usize, pool: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if current.len() == k {
                out.push(current.clone());
                return;
            }
            for i in start..pool {
                current.push(i);
                rec(i + 1, pool, k, current, out);
                current.pop();
            }
        }
        rec(0, pool, k, &mut current, &mut out);
        out
    }

    fn oracle_value(a: &[Vec<i64>]) -> f64 {
        let m = a.len();
        let n = a[0].len();
        for k in 1..=m.min(n) {
            for rows in combinations(m, k) {
                'cols: for cols in combinations(n, k) {
                    let b: Vec<Vec<i64>> = rows
                        .iter()
                        .map(|&r| cols.iter().map(|&c| a[r][c]).collect())
                        .collect();
                    let adj = adjugate(&b);
                    let s: i64 = adj.iter().flatten().sum();
                    if s == 0 {
                        continue;
                    }
                    let det = determinant(&b);
                    let sign = s.signum();
                    // Row weights (column sums) and column weights (row sums)
                    // must be non-negative after dividing by s.
                    let xt: Vec<i64> = (0..k).map(|r| (0..k).map(|i| adj[i][r]).sum()).collect();
                    let yt: Vec<i64> = (0..k).map(|c| adj[c].iter().sum()).collect();
                    if xt.iter().any(|&v| v * sign < 0) || yt.iter().any(|&v| v * sign < 0) {
                        continue;
                    }
                    // Optimality against every pure strategy of the full game.
                    for j in 0..n {
                        let payoff: i64 = (0..k).map(|r| xt[r] * a[rows[r]][j]).sum();
                        if (payoff - det) * sign < 0 {
                            continue 'cols;
                        }
                    }
                    for i in 0..m {
                        let payoff: i64 = (0..k).map(|c| yt[c] * a[i][cols[c]]).sum();
                        if (payoff - det) * sign > 0 {
                            continue 'cols;
                        }
                    }
                    return det as f64 / s as f64;
                }
            }
        }
        panic!("no optimal kernel found; the enumeration is incomplete");
    }

    fn check_equilibrium(g: &MatrixGame, eq: &Equilibrium, tol: f64) {
        let row_sum: f64 = eq.row.iter().sum();
        let col_sum: f64 = eq.col.iter().sum();
        assert!((row_sum - 1.0).abs() < tol && (col_sum - 1.0).abs() < tol);
        assert!(eq.row.iter().chain(&eq.col).all(|&p| p >= -tol));
        for payoff in g.pure_row_payoffs(&eq.col).unwrap() {
            assert!(payoff <= eq.value + tol, "row deviation beats the value");
        }
        for payoff in g.pure_col_payoffs(&eq.row).unwrap() {
            assert!(payoff >= eq.value - tol, "column deviation beats the value");
        }
    }

    #[test]
    fn fixture_game_pins_the_losing_side() {
        let g = game(&[
            &[-1.0, -1.0, -1.0],
            &[1.0, -1.0, -1.0],
            &[1.0, 1.0, -1.0],
        ]);
        let eq = solve_zero_sum(&g);
        assert!((eq.value - -1.0).abs() < 1e-9);
        assert!((eq.col[0]).abs() < 1e-9);
        assert!((eq.col[1]).abs() < 1e-9);
        assert!((eq.col[2] - 1.0).abs() < 1e-9);
        check_equilibrium(&g, &eq, 1e-9);
    }

    #[test]
    fn cyclic_game_mixes_uniformly() {
        let g = game(&[
            &[0.0, -1.0, 1.0],
            &[1.0, 0.0, -1.0],
            &[-1.0, 1.0, 0.0],
        ]);
        let eq = solve_zero_sum(&g);
        assert!(eq.value.abs() < 1e-9);
        for p in eq.row.iter().chain(&eq.col) {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
        check_equilibrium(&g, &eq, 1e-9);
    }

    #[test]
    fn single_entry_game_is_its_own_value() {
        for u in [-1.0, 0.0, 0.75] {
            let g = game(&[&[u]]);
            let eq = solve_zero_sum(&g);
            assert!((eq.value - u).abs() < 1e-9);
            assert_eq!(eq.row, vec![1.0]);
            assert_eq!(eq.col, vec![1.0]);
        }
    }

    #[test]
    fn matches_kernel_enumeration_oracle_on_random_games() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..100 {
            let a: Vec<Vec<i64>> = (0..4)
                .map(|_| (0..4).map(|_| rng.random_range(-1..=1i64)).collect())
                .collect();
            let g = MatrixGame::new(
                a.iter()
                    .map(|row| row.iter().map(|&v| v as f64).collect())
                    .collect(),
            )
            .unwrap();
            let eq = solve_zero_sum(&g);
            let expected = oracle_value(&a);
            assert!(
                (eq.value - expected).abs() < 1e-7,
                "value {} vs oracle {expected} for {a:?}",
                eq.value
            );
            check_equilibrium(&g, &eq, 1e-9);
        }
    }

    #[test]
    fn value_is_simultaneously_maxmin_and_minmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        for _ in 0..50 {
            let rows = rng.random_range(1..=5usize);
            let cols = rng.random_range(1..=5usize);
            let g = MatrixGame::new(
                (0..rows)
                    .map(|_| (0..cols).map(|_| rng.random_range(-1..=1) as f64).collect())
                    .collect(),
            )
            .unwrap();
            let eq = solve_zero_sum(&g);
            let worst_col = g
                .pure_col_payoffs(&eq.row)
                .unwrap()
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            let best_row = g
                .pure_row_payoffs(&eq.col)
                .unwrap()
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((worst_col - eq.value).abs() < 1e-9);
            assert!((best_row - eq.value).abs() < 1e-9);
        }
    }

    #[test]
    fn strictly_dominated_column_never_changes_the_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        for _ in 0..50 {
            let rows = rng.random_range(2..=4usize);
            let cols = rng.random_range(2..=4usize);
            let base: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(-1..=1) as f64).collect())
                .collect();
            let dominated = rng.random_range(0..cols);
            let mut extended = base.clone();
            for row in &mut extended {
                // Strictly larger row payoffs are strictly worse for the
                // minimizing column player.
                let worse = row[dominated] + 0.5;
                row.push(worse);
            }
            let v1 = solve_zero_sum(&MatrixGame::new(base).unwrap()).value;
            let v2 = solve_zero_sum(&MatrixGame::new(extended).unwrap()).value;
            assert!((v1 - v2).abs() < 1e-9);
        }
    }

    #[test]
    fn negated_transpose_negates_the_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for _ in 0..50 {
            let rows = rng.random_range(1..=4usize);
            let cols = rng.random_range(1..=4usize);
            let a: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(-1..=1) as f64).collect())
                .collect();
            let transposed: Vec<Vec<f64>> = (0..cols)
                .map(|c| (0..rows).map(|r| -a[r][c]).collect())
                .collect();
            let v = solve_zero_sum(&MatrixGame::new(a).unwrap()).value;
            let vt = solve_zero_sum(&MatrixGame::new(transposed).unwrap()).value;
            assert!((v + vt).abs() < 1e-9);
        }
    }

    #[test]
    fn mix_payoffs_match_direct_products() {
        let g = game(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        assert_eq!(g.pure_col_payoffs(&[0.5, 0.5]).unwrap(), vec![0.0, 0.0]);

        let fixture = game(&[
            &[-1.0, -1.0, -1.0],
            &[1.0, -1.0, -1.0],
            &[1.0, 1.0, -1.0],
        ]);
        assert_eq!(
            fixture.pure_col_payoffs(&[1.0, 0.0, 0.0]).unwrap(),
            vec![-1.0, -1.0, -1.0]
        );

        let mut rng = ChaCha8Rng::seed_from_u64(505);
        for _ in 0..50 {
            let mix = {
                let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / total).collect::<Vec<_>>()
            };
            let m = game(&[
                &[0.0, 1.0, -1.0],
                &[1.0, 0.0, 0.0],
                &[-1.0, 0.0, 1.0],
            ]);
            let got = m.pure_row_payoffs(&mix).unwrap();
            for (r, &g_r) in got.iter().enumerate() {
                let manual: f64 = (0..3).map(|c| m.entry(r, c) * mix[c]).sum();
                assert!((g_r - manual).abs() < 1e-12);
            }
        }
        assert!(g.pure_row_payoffs(&[1.0]).is_err());
    }
}
