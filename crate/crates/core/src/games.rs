//! Deterministic two-player zero-sum game evaluators.
//!
//! Programs are instruction sequences; each game interprets the terminal
//! leaves of a program and scores the matchup with a utility in
//! `{-1, 0, +1}` for the first player.

use std::cell::Cell;
use std::fmt;

use thiserror::Error;

use crate::grammar::{Grammar, Program};

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("instruction `{0}` does not belong to this game's grammar")]
    WrongGrammar(String),
    #[error("expected utility needs at least one opponent")]
    NoOpponents,
    #[error("internal grammar construction failed: {0}")]
    Grammar(String),
}

/// One of the two seats in a match. `One` is the row player of the
/// empirical game; utilities are reported from its perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::One => f.write_str("one"),
            Player::Two => f.write_str("two"),
        }
    }
}

/// Which game is played and its size parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GameKind {
    /// Gate defense: the defending side wins iff every attacked gate is
    /// also defended. Never ties.
    PoachersRangers { gates: u32 },
    /// Branch climbing: `climb[k]` raises height from `k-1` to `k` and is
    /// a no-op otherwise; the higher final height wins.
    ClimbingMonkeys { branches: u32 },
    /// Troop allocation: `add[b]` places one troop on battlefield `b`
    /// until the budget is spent; most battlefields won takes the match.
    Blotto { battlefields: u32, troops: u32 },
}

/// A game plus its role binding: for the gate-defense game, which seat
/// plays the defending side. The other two games are seat-symmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameSpec {
    pub kind: GameKind,
    pub rangers: Player,
}

impl GameSpec {
    pub fn new(kind: GameKind) -> GameSpec {
        GameSpec {
            kind,
            rangers: Player::One,
        }
    }

    pub fn poachers_rangers(gates: u32) -> GameSpec {
        GameSpec::new(GameKind::PoachersRangers { gates })
    }

    pub fn climbing_monkeys(branches: u32) -> GameSpec {
        GameSpec::new(GameKind::ClimbingMonkeys { branches })
    }

    pub fn blotto(battlefields: u32, troops: u32) -> GameSpec {
        GameSpec::new(GameKind::Blotto { battlefields, troops })
    }

    /// The instruction-sequence grammar for `player` under this spec:
    /// `S -> I | I S` over the game's instruction terminals.
    pub fn grammar_for(&self, player: Player) -> Grammar {
        let (name, count) = match self.kind {
            GameKind::PoachersRangers { gates } => {
                if player == self.rangers {
                    ("defend", gates)
                } else {
                    ("attack", gates)
                }
            }
            GameKind::ClimbingMonkeys { branches } => ("climb", branches),
            GameKind::Blotto { battlefields, .. } => ("add", battlefields),
        };
        instruction_grammar(name, count)
    }
}

/// Builds `S -> I | I S; I -> name[1] | ... | name[count]` through the
/// grammar parser, so the generated text also exercises the file format.
pub fn instruction_grammar(name: &str, count: u32) -> Grammar {
    assert!(count >= 1, "instruction count must be at least 1");
    let alternatives: Vec<String> = (1..=count).map(|i| format!("{name}[{i}]")).collect();
    let text = format!("S -> I | I S\nI -> {}\n", alternatives.join(" | "));
    Grammar::parse(&text).expect("generated grammar is well-formed")
}

/// What a program meant once interpreted for its game and role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionSummary {
    /// Distinct gates defended or attacked, sorted.
    Gates(Vec<u32>),
    /// Final height reached.
    Height(u32),
    /// Troops per battlefield after the budget cut-off.
    Allocation(Vec<u32>),
}

/// Outcome of one deterministic matchup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// Utility for the first seat; the second seat receives its negation.
    pub utility: i8,
    pub summary_one: ActionSummary,
    pub summary_two: ActionSummary,
}

thread_local! {
    static PLAYS: Cell<u64> = const { Cell::new(0) };
}

/// Total number of `play` calls made on this thread. Budget-conservation
/// tests compare this shadow counter against the charges a run reports.
pub fn plays_on_this_thread() -> u64 {
    PLAYS.with(Cell::get)
}

fn parse_instruction(leaf: &str, name: &str, count: u32) -> Result<u32, GameError> {
    let inner = leaf
        .strip_prefix(name)
        .and_then(|rest| rest.strip_prefix('['))
        .and_then(|rest| rest.strip_suffix(']'))
        .ok_or_else(|| GameError::WrongGrammar(leaf.to_string()))?;
    let value: u32 = inner
        .parse()
        .map_err(|_| GameError::WrongGrammar(leaf.to_string()))?;
    if value < 1 || value > count {
        return Err(GameError::WrongGrammar(leaf.to_string()));
    }
    Ok(value)
}

/// Interprets `program` for the given seat: the instruction leaves are
/// folded into the game-specific action summary.
pub fn interpret(spec: &GameSpec, player: Player, program: &Program) -> Result<ActionSummary, GameError> {
    match spec.kind {
        GameKind::PoachersRangers { gates } => {
            let name = if player == spec.rangers { "defend" } else { "attack" };
            let mut chosen: Vec<u32> = Vec::new();
            for leaf in program.leaves() {
                let gate = parse_instruction(leaf, name, gates)?;
                if !chosen.contains(&gate) {
                    chosen.push(gate);
                }
            }
            chosen.sort_unstable();
            Ok(ActionSummary::Gates(chosen))
        }
        GameKind::ClimbingMonkeys { branches } => {
            let mut height = 0u32;
            for leaf in program.leaves() {
                let branch = parse_instruction(leaf, "climb", branches)?;
                if branch == height + 1 {
                    height = branch;
                }
            }
            Ok(ActionSummary::Height(height))
        }
        GameKind::Blotto { battlefields, troops } => {
            let mut alloc = vec![0u32; battlefields as usize];
            let mut placed = 0u32;
            for leaf in program.leaves() {
                if placed == troops {
                    break;
                }
                let field = parse_instruction(leaf, "add", battlefields)?;
                alloc[(field - 1) as usize] += 1;
                placed += 1;
            }
            Ok(ActionSummary::Allocation(alloc))
        }
    }
}

fn score(spec: &GameSpec, one: &ActionSummary, two: &ActionSummary) -> i8 {
    match (&spec.kind, one, two) {
        (GameKind::PoachersRangers { .. }, ActionSummary::Gates(a), ActionSummary::Gates(b)) => {
            let (defended, attacked) = if spec.rangers == Player::One { (a, b) } else { (b, a) };
            let protected = attacked.iter().all(|g| defended.contains(g));
            let rangers_utility = if protected { 1 } else { -1 };
            if spec.rangers == Player::One {
                rangers_utility
            } else {
                -rangers_utility
            }
        }
        (GameKind::ClimbingMonkeys { .. }, ActionSummary::Height(a), ActionSummary::Height(b)) => {
            match a.cmp(b) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Less => -1,
            }
        }
        (GameKind::Blotto { .. }, ActionSummary::Allocation(a), ActionSummary::Allocation(b)) => {
            let mut won = 0i32;
            for (x, y) in a.iter().zip(b) {
                match x.cmp(y) {
                    std::cmp::Ordering::Greater => won += 1,
                    std::cmp::Ordering::Less => won -= 1,
                    std::cmp::Ordering::Equal => {}
                }
            }
            won.signum() as i8
        }
        _ => unreachable!("summaries always match the spec that produced them"),
    }
}

/// Plays one deterministic match. `prog_one` sits in seat `Player::One`.
pub fn play(spec: &GameSpec, prog_one: &Program, prog_two: &Program) -> Result<MatchResult, GameError> {
    let summary_one = interpret(spec, Player::One, prog_one)?;
    let summary_two = interpret(spec, Player::Two, prog_two)?;
    PLAYS.with(|c| c.set(c.get() + 1));
    let utility = score(spec, &summary_one, &summary_two);
    Ok(MatchResult {
        utility,
        summary_one,
        summary_two,
    })
}

/// Utility of `program` (seated as `player`) against each opponent in turn.
pub fn utility_profile(
    spec: &GameSpec,
    player: Player,
    program: &Program,
    opponents: &[&Program],
) -> Result<Vec<i8>, GameError> {
    opponents
        .iter()
        .map(|opp| {
            let result = match player {
                Player::One => play(spec, program, opp)?.utility,
                Player::Two => -play(spec, opp, program)?.utility,
            };
            Ok(result)
        })
        .collect()
}

/// Probability-weighted utility of `program` against a mixed opponent.
/// Each deterministic matchup is played exactly once; the returned count
/// is the number of games the caller must charge against its budget.
pub fn expected_utility(
    spec: &GameSpec,
    player: Player,
    program: &Program,
    opponents: &[(Program, f64)],
) -> Result<(f64, u64), GameError> {
    if opponents.is_empty() {
        return Err(GameError::NoOpponents);
    }
    debug_assert!(
        (opponents.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-9,
        "opponent probabilities must sum to 1"
    );
    let mut value = 0.0;
    for (opponent, prob) in opponents {
        let utility = match player {
            Player::One => play(spec, program, opponent)?.utility,
            Player::Two => -play(spec, opponent, program)?.utility,
        };
        value += prob * f64::from(utility);
    }
    Ok((value, opponents.len() as u64))
}

/// Builds the right-leaning instruction chain `S(I, S(I, ... S(I)))` for
/// the given instruction terminals under an `S -> I | I S` grammar.
pub fn sequence_program(grammar: &Grammar, instructions: &[&str]) -> Result<Program, GameError> {
    use crate::grammar::Node;
    assert!(!instructions.is_empty(), "a program needs at least one instruction");
    for instr in instructions {
        let known = grammar
            .productions("I")
            .iter()
            .any(|rhs| rhs.len() == 1 && rhs[0] == *instr);
        if !known {
            return Err(GameError::WrongGrammar((*instr).to_string()));
        }
    }
    let mut node = Node::internal(
        "S",
        vec![Node::internal("I", vec![Node::leaf(instructions[instructions.len() - 1])])],
    );
    for instr in instructions.iter().rev().skip(1) {
        node = Node::internal(
            "S",
            vec![Node::internal("I", vec![Node::leaf(instr)]), node],
        );
    }
    let program = Program { root: node };
    grammar
        .check_program(&program)
        .map_err(|e| GameError::Grammar(e.to_string()))?;
    Ok(program)
}

/// Convenience for fixtures: `defend[1] defend[3]` from gate numbers.
pub fn gate_program(grammar: &Grammar, name: &str, gates: &[u32]) -> Result<Program, GameError> {
    let instructions: Vec<String> = gates.iter().map(|g| format!("{name}[{g}]")).collect();
    let refs: Vec<&str> = instructions.iter().map(String::as_str).collect();
    sequence_program(grammar, &refs)
}
