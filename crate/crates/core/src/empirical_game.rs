//! The empirical game: growing strategy sets, the payoff table between
//! them, and mixed meta-strategies with explicit supports.
//!
//! Strategies are appended in insertion order and never removed; pruning
//! only ever shrinks a meta-strategy's support.

use thiserror::Error;

use crate::equilibrium::MatrixGame;
use crate::games::{self, GameError, GameSpec, Player};
use crate::grammar::Program;

#[derive(Debug, Error, PartialEq)]
pub enum EmpiricalError {
    #[error("player {0} has no strategies yet")]
    Empty(Player),
    #[error("support must not be empty")]
    EmptySupport,
    #[error("strategy index {index} out of range for player {player}")]
    BadIndex { player: Player, index: usize },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// A strategy's identity inside the empirical game.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyHandle {
    pub player: Player,
    pub index: usize,
    pub program: Program,
}

/// Utility matrix between the two players' strategy lists. Entry `(r, c)`
/// is the first player's utility when row `r` meets column `c`; every
/// entry is filled as soon as a strategy is added.
#[derive(Debug, Clone, Default)]
pub struct PayoffTable {
    rows: Vec<Program>,
    cols: Vec<Program>,
    /// Row-major, `rows.len() * cols.len()` entries.
    utilities: Vec<i8>,
}

impl PayoffTable {
    pub fn new() -> PayoffTable {
        PayoffTable::default()
    }

    pub fn count(&self, player: Player) -> usize {
        match player {
            Player::One => self.rows.len(),
            Player::Two => self.cols.len(),
        }
    }

    pub fn strategies(&self, player: Player) -> &[Program] {
        match player {
            Player::One => &self.rows,
            Player::Two => &self.cols,
        }
    }

    pub fn strategy(&self, player: Player, index: usize) -> Result<&Program, EmpiricalError> {
        self.strategies(player)
            .get(index)
            .ok_or(EmpiricalError::BadIndex { player, index })
    }

    /// First player's utility for the matchup `(row, col)`.
    pub fn utility(&self, row: usize, col: usize) -> i8 {
        self.utilities[row * self.cols.len() + col]
    }

    /// Utility from `player`'s own perspective for (own, opponent) indices.
    pub fn utility_for(&self, player: Player, own: usize, opp: usize) -> i8 {
        match player {
            Player::One => self.utility(own, opp),
            Player::Two => -self.utility(opp, own),
        }
    }

    /// Appends a strategy and fills its row or column by playing every
    /// opposing strategy exactly once. Returns the handle and the number
    /// of games consumed, for budget accounting by the caller.
    pub fn add_strategy(
        &mut self,
        player: Player,
        program: Program,
        spec: &GameSpec,
    ) -> Result<(StrategyHandle, u64), EmpiricalError> {
        let games_played;
        let index;
        match player {
            Player::One => {
                let mut filled = Vec::with_capacity(self.cols.len());
                for col in &self.cols {
                    filled.push(games::play(spec, &program, col)?.utility);
                }
                games_played = filled.len() as u64;
                index = self.rows.len();
                self.rows.push(program.clone());
                self.utilities.extend(filled);
            }
            Player::Two => {
                let mut filled = Vec::with_capacity(self.rows.len());
                for row in &self.rows {
                    filled.push(games::play(spec, row, &program)?.utility);
                }
                games_played = filled.len() as u64;
                index = self.cols.len();
                let old_cols = self.cols.len();
                self.cols.push(program.clone());
                // Re-stitch the row-major storage with the widened stride.
                let mut widened = Vec::with_capacity(self.rows.len() * self.cols.len());
                for (r, utility) in filled.iter().enumerate() {
                    widened.extend_from_slice(&self.utilities[r * old_cols..(r + 1) * old_cols]);
                    widened.push(*utility);
                }
                self.utilities = widened;
            }
        }
        Ok((
            StrategyHandle {
                player,
                index,
                program,
            },
            games_played,
        ))
    }

    /// The most recently added strategy for a player.
    pub fn last_strategy(&self, player: Player) -> Result<StrategyHandle, EmpiricalError> {
        let list = self.strategies(player);
        let index = list.len().checked_sub(1).ok_or(EmpiricalError::Empty(player))?;
        Ok(StrategyHandle {
            player,
            index,
            program: list[index].clone(),
        })
    }

    /// The table as a first-player matrix game.
    pub fn matrix_game(&self) -> MatrixGame {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, _)| {
                (0..self.cols.len())
                    .map(|c| f64::from(self.utility(r, c)))
                    .collect()
            })
            .collect();
        MatrixGame::new(rows).expect("a filled payoff table is a valid matrix")
    }

    /// CSV dump with rendered programs as headers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row\\col");
        for col in &self.cols {
            out.push(',');
            out.push_str(&col.render());
        }
        out.push('\n');
        for (r, row) in self.rows.iter().enumerate() {
            out.push_str(&row.render());
            for c in 0..self.cols.len() {
                out.push(',');
                out.push_str(&self.utility(r, c).to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// A mixed strategy over one player's empirical-game strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaStrategy {
    pub player: Player,
    probs: Vec<f64>,
}

impl MetaStrategy {
    /// Uniform probability over `support`, zero elsewhere.
    pub fn uniform(
        player: Player,
        strategy_count: usize,
        support: &[usize],
    ) -> Result<MetaStrategy, EmpiricalError> {
        if support.is_empty() {
            return Err(EmpiricalError::EmptySupport);
        }
        let mut probs = vec![0.0; strategy_count];
        for &index in support {
            if index >= strategy_count {
                return Err(EmpiricalError::BadIndex { player, index });
            }
            probs[index] = 1.0 / support.len() as f64;
        }
        Ok(MetaStrategy { player, probs })
    }

    /// Wraps an explicit probability vector (e.g. an equilibrium mix),
    /// zeroing entries below `1e-9` and renormalizing.
    pub fn from_probs(player: Player, probs: Vec<f64>) -> Result<MetaStrategy, EmpiricalError> {
        let mut probs = probs;
        for p in &mut probs {
            if *p < 1e-9 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(EmpiricalError::EmptySupport);
        }
        for p in &mut probs {
            *p /= total;
        }
        Ok(MetaStrategy { player, probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices with positive probability, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }

    /// Extends the vector to a grown strategy list, new entries at zero.
    pub fn pad_to(&mut self, strategy_count: usize) {
        while self.probs.len() < strategy_count {
            self.probs.push(0.0);
        }
    }

    /// The `(program, probability)` pairs of the support, in index order;
    /// this is the opponent list a best-response search evaluates against.
    pub fn support_programs(&self, table: &PayoffTable) -> Vec<(Program, f64)> {
        self.support()
            .into_iter()
            .map(|i| (table.strategies(self.player)[i].clone(), self.probs[i]))
            .collect()
    }
}

/// Uniform meta-strategy over `support` for one player of `table`.
pub fn uniform_meta(
    table: &PayoffTable,
    player: Player,
    support: &[usize],
) -> Result<MetaStrategy, EmpiricalError> {
    MetaStrategy::uniform(player, table.count(player), support)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{gate_program, GameSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_one_game() -> (GameSpec, PayoffTable) {
        // The 3x3 gate-defense fixture: rows defend[2], defend[1,2,4],
        // defend[1,2,3] vs columns attack[1], attack[1,2,3], attack[1,2,5].
        let spec = GameSpec::poachers_rangers(5);
        let rangers = spec.grammar_for(Player::One);
        let poachers = spec.grammar_for(Player::Two);
        let mut table = PayoffTable::new();
        for gates in [vec![2], vec![1, 2, 4], vec![1, 2, 3]] {
            let p = gate_program(&rangers, "defend", &gates).unwrap();
            table.add_strategy(Player::One, p, &spec).unwrap();
        }
        for gates in [vec![1], vec![1, 2, 3], vec![1, 2, 5]] {
            let p = gate_program(&poachers, "attack", &gates).unwrap();
            table.add_strategy(Player::Two, p, &spec).unwrap();
        }
        (spec, table)
    }

    #[test]
    fn fixture_table_matches_published_payoffs() {
        let (_, table) = table_one_game();
        let expected = [[-1, -1, -1], [1, -1, -1], [1, 1, -1]];
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(table.utility(r, c), expected[r][c], "entry ({r},{c})");
            }
        }
    }

    #[test]
    fn adding_a_row_fills_it_against_every_column() {
        let (spec, mut table) = table_one_game();
        let rangers = spec.grammar_for(Player::One);
        let p = gate_program(&rangers, "defend", &[1, 2, 3]).unwrap();
        let (handle, games) = table.add_strategy(Player::One, p, &spec).unwrap();
        assert_eq!(handle.index, 3);
        assert_eq!(games, 3);
        assert_eq!(
            (0..3).map(|c| table.utility(3, c)).collect::<Vec<_>>(),
            vec![1, 1, -1]
        );
    }

    #[test]
    fn adding_against_empty_opposition_costs_nothing() {
        let spec = GameSpec::poachers_rangers(2);
        let rangers = spec.grammar_for(Player::One);
        let mut table = PayoffTable::new();
        let p = gate_program(&rangers, "defend", &[1]).unwrap();
        let (handle, games) = table.add_strategy(Player::One, p, &spec).unwrap();
        assert_eq!(games, 0);
        assert_eq!(handle.index, 0);
    }

    #[test]
    fn table_entries_match_direct_replay() {
        let spec = GameSpec::blotto(3, 4);
        let g = spec.grammar_for(Player::One);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut table = PayoffTable::new();
        for i in 0..100 {
            let player = if i % 2 == 0 { Player::One } else { Player::Two };
            let p = g.sample_program(8, &mut rng).unwrap();
            table.add_strategy(player, p, &spec).unwrap();
        }
        for r in 0..table.count(Player::One) {
            for c in 0..table.count(Player::Two) {
                let replayed = games::play(
                    &spec,
                    &table.strategies(Player::One)[r],
                    &table.strategies(Player::Two)[c],
                )
                .unwrap()
                .utility;
                assert_eq!(table.utility(r, c), replayed);
            }
        }
    }

    #[test]
    fn uniform_meta_spreads_mass_over_support() {
        let (_, table) = table_one_game();
        let meta = uniform_meta(&table, Player::Two, &[0, 1]).unwrap();
        assert_eq!(meta.probs(), &[0.5, 0.5, 0.0]);
        assert_eq!(meta.support(), vec![0, 1]);

        let singleton = uniform_meta(&table, Player::Two, &[2]).unwrap();
        assert_eq!(singleton.probs(), &[0.0, 0.0, 1.0]);

        assert_eq!(
            uniform_meta(&table, Player::Two, &[]),
            Err(EmpiricalError::EmptySupport)
        );
    }

    #[test]
    fn uniform_meta_sums_to_one_for_all_support_sizes() {
        for size in 1..=50usize {
            let support: Vec<usize> = (0..size).collect();
            let meta = MetaStrategy::uniform(Player::One, 50, &support).unwrap();
            let total: f64 = meta.probs().iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "size {size} sums to {total}");
        }
    }

    #[test]
    fn last_strategy_tracks_insertion_order() {
        let spec = GameSpec::poachers_rangers(3);
        let rangers = spec.grammar_for(Player::One);
        let mut table = PayoffTable::new();
        assert_eq!(
            table.last_strategy(Player::One),
            Err(EmpiricalError::Empty(Player::One))
        );
        let a = gate_program(&rangers, "defend", &[1]).unwrap();
        let b = gate_program(&rangers, "defend", &[2]).unwrap();
        table.add_strategy(Player::One, a.clone(), &spec).unwrap();
        assert_eq!(table.last_strategy(Player::One).unwrap().program, a);
        table.add_strategy(Player::One, b.clone(), &spec).unwrap();
        let last = table.last_strategy(Player::One).unwrap();
        assert_eq!(last.index, 1);
        assert_eq!(last.program, b);
    }

    #[test]
    fn last_strategy_matches_shadow_log_on_random_sequences() {
        let spec = GameSpec::blotto(2, 2);
        let g = spec.grammar_for(Player::One);
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let mut table = PayoffTable::new();
        let mut shadow: Vec<Vec<Program>> = vec![Vec::new(), Vec::new()];
        for i in 0..1000 {
            let player = if (i * 7 + i / 3) % 3 == 0 { Player::Two } else { Player::One };
            let p = g.sample_program(5, &mut rng).unwrap();
            shadow[player.index()].push(p.clone());
            table.add_strategy(player, p, &spec).unwrap();
            for player in [Player::One, Player::Two] {
                if let Some(expected) = shadow[player.index()].last() {
                    assert_eq!(&table.last_strategy(player).unwrap().program, expected);
                }
            }
        }
    }

    #[test]
    fn zero_sum_view_is_consistent() {
        let (_, table) = table_one_game();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(
                    table.utility_for(Player::One, r, c),
                    -table.utility_for(Player::Two, c, r)
                );
            }
        }
    }

    #[test]
    fn csv_headers_are_rendered_programs() {
        let (_, table) = table_one_game();
        let csv = table.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.contains("attack[1] attack[2] attack[3]"));
        assert_eq!(lines.count(), 3);
    }
}
