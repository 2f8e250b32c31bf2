//! The response-oracle driver and its meta-strategy learners.
//!
//! One half-iteration: compute the opponent-side meta-strategy with the
//! configured learner, hill-climb a best response to it starting from the
//! responder's last strategy, then append the result to the empirical
//! game. The local learner additionally verifies the response against the
//! whole empirical game (re-searching when a pruned opponent still beats
//! it) and prunes redundant support strategies with a greedy set cover
//! over the search trace.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::empirical_game::{EmpiricalError, MetaStrategy, PayoffTable};
use crate::equilibrium::solve_zero_sum;
use crate::games::{self, GameError, GameSpec, Player};
use crate::grammar::{Grammar, GrammarError, Program, SizeLimits};
use crate::search::{self, hill_climb, SearchBudget, SearchError, SearchResult, SearchTrace};

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("budget of {0} games cannot cover initialization")]
    BudgetTooSmall(u64),
    #[error("cover instance contains an element no set covers")]
    Uncoverable,
    #[error(transparent)]
    Empirical(#[from] EmpiricalError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// The available meta-strategy learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    /// Only the last strategy added is in the support.
    Ibr,
    /// All strategies, uniformly.
    Fp,
    /// The equilibrium of the empirical game.
    DoubleOracle,
    /// Uniform over a maintained support, pruned by trace evidence.
    LocalLearner,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::Ibr,
        LearnerKind::Fp,
        LearnerKind::DoubleOracle,
        LearnerKind::LocalLearner,
    ];

    pub fn parse(name: &str) -> Option<LearnerKind> {
        match name.to_ascii_lowercase().as_str() {
            "ibr" => Some(LearnerKind::Ibr),
            "fp" => Some(LearnerKind::Fp),
            "do" => Some(LearnerKind::DoubleOracle),
            "2l" => Some(LearnerKind::LocalLearner),
            _ => None,
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            LearnerKind::Ibr => "ibr",
            LearnerKind::Fp => "fp",
            LearnerKind::DoubleOracle => "do",
            LearnerKind::LocalLearner => "2l",
        };
        f.write_str(name)
    }
}

/// Knobs of one driver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// Total games the run may play, across searches, table fill-in and
    /// response verification.
    pub budget: u64,
    /// Games granted to each individual search call.
    pub games_per_search: u64,
    pub limits: SizeLimits,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            budget: 100_000,
            games_per_search: 10_000,
            limits: SizeLimits::default(),
        }
    }
}

/// One half-iteration in the per-iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: u64,
    pub player: Player,
    pub support_before: usize,
    pub support_after: usize,
    /// Games charged during this half-iteration.
    pub games: u64,
    /// Searches run (1 plus any verification re-searches).
    pub searches: u32,
    pub added: String,
    /// Expected utility of the added strategy against its target meta.
    pub value: f64,
}

/// Everything the driver accumulates across a run.
#[derive(Debug, Clone)]
pub struct PpsroState {
    pub table: PayoffTable,
    /// Current meta-strategy per player. Authoritative for the local
    /// learner; for the other learners this mirrors the last target used.
    pub metas: [MetaStrategy; 2],
    pub games_played: u64,
    pub iteration: u64,
    pub log: Vec<IterationRecord>,
}

impl PpsroState {
    /// Wraps an existing table; both players start with every strategy in
    /// their support, uniformly.
    pub fn from_table(table: PayoffTable) -> Result<PpsroState, LearnerError> {
        let metas = [Player::One, Player::Two].map(|player| {
            let count = table.count(player);
            let support: Vec<usize> = (0..count).collect();
            MetaStrategy::uniform(player, count, &support)
        });
        let [one, two] = metas;
        Ok(PpsroState {
            table,
            metas: [one?, two?],
            games_played: 0,
            iteration: 0,
            log: Vec::new(),
        })
    }
}

/// One strategy appended to the empirical game, stamped with the games
/// counter right after its table fill-in.
#[derive(Debug, Clone, PartialEq)]
pub struct Addition {
    pub games_played: u64,
    pub player: Player,
    pub program: Program,
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Last strategy added per player.
    pub final_programs: [Program; 2],
    pub state: PpsroState,
    pub additions: Vec<Addition>,
}

/// Computes the meta-strategy the given learner assigns to `player`'s
/// side of the empirical game.
pub fn meta_for(
    kind: LearnerKind,
    state: &PpsroState,
    player: Player,
) -> Result<MetaStrategy, LearnerError> {
    let count = state.table.count(player);
    if count == 0 {
        return Err(EmpiricalError::Empty(player).into());
    }
    let meta = match kind {
        LearnerKind::Ibr => MetaStrategy::uniform(player, count, &[count - 1])?,
        LearnerKind::Fp => {
            let all: Vec<usize> = (0..count).collect();
            MetaStrategy::uniform(player, count, &all)?
        }
        LearnerKind::DoubleOracle => {
            let equilibrium = solve_zero_sum(&state.table.matrix_game());
            let probs = match player {
                Player::One => equilibrium.row,
                Player::Two => equilibrium.col,
            };
            MetaStrategy::from_probs(player, probs)?
        }
        LearnerKind::LocalLearner => {
            let mut meta = state.metas[player.index()].clone();
            meta.pad_to(count);
            meta
        }
    };
    Ok(meta)
}

/// A set-cover instance over trace candidates: the universe is the set of
/// best-responded candidates, and each support strategy covers the
/// candidates it best responds to.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverInstance {
    universe: BTreeSet<usize>,
    sets: Vec<BTreeSet<usize>>,
}

impl CoverInstance {
    pub fn new(universe: BTreeSet<usize>, sets: Vec<BTreeSet<usize>>) -> CoverInstance {
        let sets = sets
            .into_iter()
            .map(|s| s.intersection(&universe).copied().collect())
            .collect();
        CoverInstance { universe, sets }
    }

    pub fn universe(&self) -> &BTreeSet<usize> {
        &self.universe
    }

    pub fn sets(&self) -> &[BTreeSet<usize>] {
        &self.sets
    }
}

/// Greedy set cover: repeatedly select the set covering the most
/// still-uncovered elements, breaking ties towards the lowest index.
pub fn greedy_cover(instance: &CoverInstance) -> Result<Vec<usize>, LearnerError> {
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    let mut selected: Vec<usize> = Vec::new();
    while covered.len() < instance.universe.len() {
        let mut best: Option<(usize, usize)> = None;
        for (idx, set) in instance.sets.iter().enumerate() {
            if selected.contains(&idx) {
                continue;
            }
            let gain = set.difference(&covered).count();
            if gain > 0 && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, idx));
            }
        }
        let Some((_, idx)) = best else {
            return Err(LearnerError::Uncoverable);
        };
        covered.extend(instance.sets[idx].iter().copied());
        selected.push(idx);
    }
    Ok(selected)
}

/// Builds the cover instance a trace induces over a support of the given
/// size: candidate `c` is covered by support position `j` when the
/// support strategy at `j` best responds to `c`.
pub fn cover_from_trace(
    trace: &SearchTrace,
    support_size: usize,
) -> Result<CoverInstance, SearchError> {
    let universe = search::best_responded_candidates(trace, support_size)?;
    let mut sets = vec![BTreeSet::new(); support_size];
    for (candidate, record) in trace.records.iter().enumerate() {
        for (position, &utility) in record.utilities.iter().enumerate() {
            if utility == -1 {
                sets[position].insert(candidate);
            }
        }
    }
    Ok(CoverInstance::new(universe, sets))
}

/// Shrinks `meta`'s support to the helpful strategies the trace exposes:
/// the greedy cover of the best-responded candidates. A trace with no
/// best-responded candidate leaves the support unchanged. Strategies are
/// only removed from the support, never from the empirical game.
pub fn prune_redundant(
    meta: &MetaStrategy,
    trace: &SearchTrace,
) -> Result<MetaStrategy, LearnerError> {
    let support = meta.support();
    let instance = cover_from_trace(trace, support.len())?;
    if instance.universe().is_empty() {
        return Ok(meta.clone());
    }
    let helpful_positions = greedy_cover(&instance)?;
    let mut helpful: Vec<usize> = helpful_positions.into_iter().map(|p| support[p]).collect();
    helpful.sort_unstable();
    Ok(MetaStrategy::uniform(meta.player, meta.len(), &helpful)?)
}

/// The iterate-and-respond driver.
pub struct Ppsro {
    spec: GameSpec,
    grammars: [Grammar; 2],
    kind: LearnerKind,
    config: RunConfig,
    rng: ChaCha8Rng,
    state: PpsroState,
    additions: Vec<Addition>,
    /// Games counter at the start of the current half-iteration.
    half_start_counter: u64,
}

impl Ppsro {
    /// Initializes both strategy sets with one random program each and
    /// fills the 1x1 payoff table.
    pub fn new(
        spec: GameSpec,
        grammar_one: Grammar,
        grammar_two: Grammar,
        kind: LearnerKind,
        config: RunConfig,
        seed: u64,
    ) -> Result<Ppsro, LearnerError> {
        if config.budget < 1 {
            return Err(LearnerError::BudgetTooSmall(config.budget));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = PayoffTable::new();
        let mut games_played = 0u64;
        let mut additions = Vec::new();
        for (player, grammar) in [(Player::One, &grammar_one), (Player::Two, &grammar_two)] {
            let program = grammar.sample_program(config.limits.depth_cap, &mut rng)?;
            let (_, games) = table.add_strategy(player, program.clone(), &spec)?;
            games_played += games;
            additions.push(Addition {
                games_played,
                player,
                program,
            });
        }
        let metas = [
            MetaStrategy::uniform(Player::One, 1, &[0])?,
            MetaStrategy::uniform(Player::Two, 1, &[0])?,
        ];
        Ok(Ppsro {
            spec,
            grammars: [grammar_one, grammar_two],
            kind,
            config,
            rng,
            state: PpsroState {
                table,
                metas,
                games_played,
                iteration: 0,
                log: Vec::new(),
            },
            additions,
            half_start_counter: 0,
        })
    }

    pub fn state(&self) -> &PpsroState {
        &self.state
    }

    #[cfg(test)]
    pub(crate) fn state_mut(&mut self) -> &mut PpsroState {
        &mut self.state
    }

    fn remaining(&self) -> u64 {
        self.config.budget.saturating_sub(self.state.games_played)
    }

    /// Plays `program` against every opposing strategy in the empirical
    /// game, charging one game each.
    fn verify_against_all(
        &mut self,
        responder: Player,
        program: &Program,
    ) -> Result<Vec<i8>, LearnerError> {
        let opponent = responder.opponent();
        let opponents: Vec<&Program> = self.state.table.strategies(opponent).iter().collect();
        let utilities = games::utility_profile(&self.spec, responder, program, &opponents)?;
        self.state.games_played += opponents.len() as u64;
        Ok(utilities)
    }

    /// The local learner's response verification: while some empirical
    /// strategy outside the current support best responds to the result,
    /// restore it to the support and search again from the result. Runs
    /// at most once per opponent strategy.
    fn enhancement_check(
        &mut self,
        responder: Player,
        mut result: SearchResult,
        mut meta: MetaStrategy,
    ) -> Result<(SearchResult, MetaStrategy, u32), LearnerError> {
        let opponent = responder.opponent();
        let mut extra_searches = 0u32;
        loop {
            let all_count = self.state.table.count(opponent) as u64;
            if self.remaining() < all_count {
                break;
            }
            let utilities = self.verify_against_all(responder, &result.best)?;
            let support: BTreeSet<usize> = meta.support().into_iter().collect();
            let mistaken: Vec<usize> = utilities
                .iter()
                .enumerate()
                .filter(|&(idx, &u)| u == -1 && !support.contains(&idx))
                .map(|(idx, _)| idx)
                .collect();
            if mistaken.is_empty() {
                break;
            }
            let mut widened: Vec<usize> = support.into_iter().collect();
            widened.extend(mistaken);
            widened.sort_unstable();
            meta = MetaStrategy::uniform(opponent, self.state.table.count(opponent), &widened)?;
            let support_programs = meta.support_programs(&self.state.table);
            let slice = self.remaining().min(self.config.games_per_search);
            if slice < support_programs.len() as u64 {
                break;
            }
            result = hill_climb(
                &self.spec,
                &self.grammars[responder.index()],
                responder,
                Some(result.best.clone()),
                &support_programs,
                SearchBudget::games(slice),
                &self.config.limits,
                &mut self.rng,
            )?;
            self.state.games_played += result.games;
            extra_searches += 1;
        }
        Ok((result, meta, extra_searches))
    }

    /// One half-iteration for `responder`. Returns false when the budget
    /// stopped the run before a strategy could be added.
    fn half_iteration(&mut self, responder: Player) -> Result<bool, LearnerError> {
        let opponent = responder.opponent();
        let meta = meta_for(self.kind, &self.state, opponent)?;
        let support_before = meta.support().len();
        let support_programs = meta.support_programs(&self.state.table);
        let slice = self.remaining().min(self.config.games_per_search);
        if slice < support_programs.len() as u64 {
            return Ok(false);
        }
        let start = self.state.table.last_strategy(responder)?.program;
        let mut result = hill_climb(
            &self.spec,
            &self.grammars[responder.index()],
            responder,
            Some(start),
            &support_programs,
            SearchBudget::games(slice),
            &self.config.limits,
            &mut self.rng,
        )?;
        self.state.games_played += result.games;
        let mut searches = 1u32;
        let mut target_meta = meta;
        if self.kind == LearnerKind::LocalLearner {
            let (enhanced, widened_meta, extra) =
                self.enhancement_check(responder, result, target_meta)?;
            result = enhanced;
            target_meta = widened_meta;
            searches += extra;
        }

        let fill_cost = self.state.table.count(opponent) as u64;
        if self.remaining() < fill_cost {
            return Ok(false);
        }
        let (handle, fill_games) =
            self.state
                .table
                .add_strategy(responder, result.best.clone(), &self.spec)?;
        self.state.games_played += fill_games;
        self.additions.push(Addition {
            games_played: self.state.games_played,
            player: responder,
            program: result.best.clone(),
        });

        let support_after;
        match self.kind {
            LearnerKind::LocalLearner => {
                // The new strategy always enters its own side's support.
                let own_count = self.state.table.count(responder);
                let mut own = self.state.metas[responder.index()].clone();
                own.pad_to(own_count);
                let mut own_support = own.support();
                own_support.push(handle.index);
                self.state.metas[responder.index()] =
                    MetaStrategy::uniform(responder, own_count, &own_support)?;
                // Prune the target side with the evidence of the last search.
                let pruned = prune_redundant(&target_meta, &result.trace)?;
                support_after = pruned.support().len();
                self.state.metas[opponent.index()] = pruned;
            }
            _ => {
                let mut own = meta_for(self.kind, &self.state, responder)?;
                own.pad_to(self.state.table.count(responder));
                self.state.metas[responder.index()] = own;
                let mut target = target_meta;
                target.pad_to(self.state.table.count(opponent));
                support_after = target.support().len();
                self.state.metas[opponent.index()] = target;
            }
        }

        let games_this_half = self
            .state
            .games_played
            .saturating_sub(self.half_start_counter);
        self.state.log.push(IterationRecord {
            iteration: self.state.iteration,
            player: responder,
            support_before,
            support_after,
            games: games_this_half,
            searches,
            added: result.best.render(),
            value: result.best_value,
        });
        Ok(true)
    }

    /// Runs half-iterations, alternating players, until the budget is
    /// spent, then returns the last strategy added per player.
    pub fn run(mut self) -> Result<RunOutcome, LearnerError> {
        'outer: while self.state.games_played < self.config.budget {
            self.state.iteration += 1;
            for responder in [Player::One, Player::Two] {
                if self.state.games_played >= self.config.budget {
                    break 'outer;
                }
                self.half_start_counter = self.state.games_played;
                if !self.half_iteration(responder)? {
                    break 'outer;
                }
            }
        }
        let final_programs = [
            self.state.table.last_strategy(Player::One)?.program,
            self.state.table.last_strategy(Player::Two)?.program,
        ];
        Ok(RunOutcome {
            final_programs,
            state: self.state,
            additions: self.additions,
        })
    }
}

/// Convenience wrapper: build a driver and run it to completion.
pub fn ppsro_run(
    spec: GameSpec,
    grammar_one: Grammar,
    grammar_two: Grammar,
    kind: LearnerKind,
    config: RunConfig,
    seed: u64,
) -> Result<RunOutcome, LearnerError> {
    Ppsro::new(spec, grammar_one, grammar_two, kind, config, seed)?.run()
}
