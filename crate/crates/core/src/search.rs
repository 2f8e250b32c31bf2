//! Hill-climbing best-response search over a program space.
//!
//! The search walks the mutation neighborhood of a candidate program,
//! accepting a neighbor only on a strict improvement of the expected
//! utility against the target mixed strategy, and records every
//! evaluation so learners can mine the trace afterwards.

use std::collections::BTreeSet;

use rand::Rng;
use thiserror::Error;

use crate::games::{self, GameError, GameSpec, Player};
use crate::grammar::{Grammar, GrammarError, Program, SizeLimits};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("budget of {budget} games cannot cover one evaluation of {cost} games")]
    BudgetTooSmall { budget: u64, cost: u64 },
    #[error("the target mixed strategy has no support")]
    EmptyMeta,
    #[error("trace records carry {got} utilities but the support has {want} strategies")]
    Misaligned { got: usize, want: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

/// Limits on one search call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    /// Games the search may play; each candidate evaluation costs one game
    /// per support strategy.
    pub max_games: u64,
    pub max_evaluations: Option<u64>,
}

impl SearchBudget {
    pub fn games(max_games: u64) -> SearchBudget {
        SearchBudget {
            max_games,
            max_evaluations: None,
        }
    }
}

/// One evaluated candidate: its utility against each support strategy
/// (in support order) and the probability-weighted total.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub candidate: Program,
    pub utilities: Vec<i8>,
    pub expected: f64,
}

/// Every evaluation of one search, in evaluation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchTrace {
    pub records: Vec<TraceRecord>,
}

/// The outcome of a hill-climbing run.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// The candidate with the highest expected utility seen anywhere in
    /// the search; on ties, the earliest one.
    pub best: Program,
    pub best_value: f64,
    /// Games actually played, for the caller's budget accounting.
    pub games: u64,
    pub trace: SearchTrace,
}

/// Searches for a best response to `meta` for `player`, starting from
/// `start` (or a random program when absent).
#[allow(clippy::too_many_arguments)]
pub fn hill_climb<R: Rng + ?Sized>(
    spec: &GameSpec,
    grammar: &Grammar,
    player: Player,
    start: Option<Program>,
    meta: &[(Program, f64)],
    budget: SearchBudget,
    limits: &SizeLimits,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    if meta.is_empty() {
        return Err(SearchError::EmptyMeta);
    }
    let cost = meta.len() as u64;
    if budget.max_games < cost {
        return Err(SearchError::BudgetTooSmall {
            budget: budget.max_games,
            cost,
        });
    }
    debug_assert!((meta.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-9);
    let opponents: Vec<&Program> = meta.iter().map(|(p, _)| p).collect();

    let evaluate = |candidate: Program| -> Result<TraceRecord, SearchError> {
        let utilities = games::utility_profile(spec, player, &candidate, &opponents)?;
        let expected = utilities
            .iter()
            .zip(meta)
            .map(|(&u, (_, p))| p * f64::from(u))
            .sum();
        Ok(TraceRecord {
            candidate,
            utilities,
            expected,
        })
    };

    let current = match start {
        Some(p) => p,
        None => grammar.sample_program(limits.depth_cap, rng)?,
    };
    let mut records = vec![evaluate(current)?];
    let mut games_used = cost;
    let mut incumbent = 0usize;
    let mut best = 0usize;
    let max_evaluations = budget.max_evaluations.unwrap_or(u64::MAX);
    let mut evaluations = 1u64;

    while games_used + cost <= budget.max_games && evaluations < max_evaluations {
        let neighbor = grammar.mutate(&records[incumbent].candidate, limits, rng);
        let record = evaluate(neighbor)?;
        games_used += cost;
        evaluations += 1;
        records.push(record);
        let last = records.len() - 1;
        if records[last].expected > records[best].expected {
            best = last;
        }
        if records[last].expected > records[incumbent].expected {
            incumbent = last;
        }
    }

    Ok(SearchResult {
        best: records[best].candidate.clone(),
        best_value: records[best].expected,
        games: games_used,
        trace: SearchTrace { records },
    })
}

/// Indices of trace candidates that at least one support strategy best
/// responds to, i.e. candidates that lost some support matchup. The
/// best-response convention is a utility of exactly +1 for the responder.
pub fn best_responded_candidates(
    trace: &SearchTrace,
    support_size: usize,
) -> Result<BTreeSet<usize>, SearchError> {
    let mut hit = BTreeSet::new();
    for (idx, record) in trace.records.iter().enumerate() {
        if record.utilities.len() != support_size {
            return Err(SearchError::Misaligned {
                got: record.utilities.len(),
                want: support_size,
            });
        }
        if record.utilities.iter().any(|&u| u == -1) {
            hit.insert(idx);
        }
    }
    Ok(hit)
}
