//! Synthesis of programmatic strategies for two-player zero-sum games.
//!
//! Strategies are programs drawn from a context-free grammar. An empirical
//! game over the strategies discovered so far guides a hill-climbing search
//! for approximate best responses; pluggable meta-strategy learners (IBR,
//! FP, double oracle, and the support-pruning local learner) decide which
//! opponents the search is evaluated against.

pub mod empirical_game;
pub mod equilibrium;
pub mod games;
pub mod grammar;
pub mod learners;
pub mod search;

pub use games::Player;
