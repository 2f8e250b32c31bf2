//! Context-free grammars and the programs (ASTs) they derive.
//!
//! A grammar file is plain UTF-8 text, one non-terminal per line:
//!
//! ```text
//! # instruction sequences
//! S -> I | I S
//! I -> climb[1] | climb[2]
//! ```
//!
//! Symbols are whitespace-separated; alternatives are separated by `|`;
//! `#` starts a comment. Symbols starting with an uppercase ASCII letter
//! are non-terminal references and must have a production; every other
//! symbol is a terminal. The left-hand side of the first rule is the
//! start symbol.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: undefined symbol `{symbol}`")]
    UndefinedSymbol { line: usize, symbol: String },
    #[error("non-terminal `{0}` has no production")]
    NoProduction(String),
    #[error("no production for `{symbol}` can terminate within depth {depth_cap}")]
    InfeasibleDepth { symbol: String, depth_cap: usize },
    #[error("program is invalid under this grammar: {0}")]
    InvalidProgram(String),
}

/// Size limits applied when sampling and mutating programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeLimits {
    /// Maximum AST height, counting the root as depth 0.
    pub depth_cap: usize,
    /// Maximum number of AST nodes; mutation retries and then keeps the
    /// original subtree when a regeneration would exceed it.
    pub node_cap: usize,
}

impl Default for SizeLimits {
    fn default() -> Self {
        SizeLimits {
            depth_cap: 12,
            node_cap: 512,
        }
    }
}

/// How many times a mutation re-rolls a subtree that blew the node cap
/// before giving up and returning the input unchanged.
const MUTATION_RETRIES: usize = 10;

/// A context-free grammar: non-terminals, terminals, productions, start.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct Grammar {
    start: String,
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    productions: HashMap<String, Vec<Vec<String>>>,
    /// Minimum derivation height per non-terminal (a terminal has height 0).
    min_height: HashMap<String, usize>,
}

fn is_nonterminal_symbol(sym: &str) -> bool {
    sym.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

impl Grammar {
    /// Parses the grammar file format described in the module docs.
    pub fn parse(text: &str) -> Result<Grammar, GrammarError> {
        let mut order: Vec<String> = Vec::new();
        let mut productions: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        let mut rhs_symbols: Vec<(usize, String)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (lhs, rhs) = line.split_once("->").ok_or_else(|| GrammarError::Parse {
                line: line_no,
                msg: "expected `<NT> -> rhs | rhs`".into(),
            })?;
            let lhs = lhs.trim();
            if lhs.split_whitespace().count() != 1 {
                return Err(GrammarError::Parse {
                    line: line_no,
                    msg: "left-hand side must be a single symbol".into(),
                });
            }
            if !is_nonterminal_symbol(lhs) {
                return Err(GrammarError::Parse {
                    line: line_no,
                    msg: format!("non-terminal `{lhs}` must start with an uppercase letter"),
                });
            }
            let entry = productions.entry(lhs.to_string()).or_default();
            if !order.iter().any(|s| s == lhs) {
                order.push(lhs.to_string());
            }
            for alt in rhs.split('|') {
                let symbols: Vec<String> = alt.split_whitespace().map(String::from).collect();
                if symbols.is_empty() {
                    return Err(GrammarError::Parse {
                        line: line_no,
                        msg: "empty alternative".into(),
                    });
                }
                for sym in &symbols {
                    rhs_symbols.push((line_no, sym.clone()));
                }
                entry.push(symbols);
            }
        }

        let start = order.first().cloned().ok_or(GrammarError::Parse {
            line: 0,
            msg: "grammar has no rules".into(),
        })?;

        let mut terminals: Vec<String> = Vec::new();
        for (line, sym) in &rhs_symbols {
            if is_nonterminal_symbol(sym) {
                if !productions.contains_key(sym) {
                    return Err(GrammarError::UndefinedSymbol {
                        line: *line,
                        symbol: sym.clone(),
                    });
                }
            } else if !terminals.iter().any(|t| t == sym) {
                terminals.push(sym.clone());
            }
        }

        let min_height = compute_min_heights(&order, &productions)?;
        Ok(Grammar {
            start,
            nonterminals: order,
            terminals,
            productions,
            min_height,
        })
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn is_nonterminal(&self, sym: &str) -> bool {
        self.productions.contains_key(sym)
    }

    /// Ordered right-hand sides for a non-terminal.
    pub fn productions(&self, nonterminal: &str) -> &[Vec<String>] {
        self.productions
            .get(nonterminal)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Checks the structural invariants: disjoint symbol sets, a start
    /// symbol with productions, and every referenced symbol defined.
    pub fn check_invariants(&self) -> Result<(), GrammarError> {
        if !self.productions.contains_key(&self.start) {
            return Err(GrammarError::NoProduction(self.start.clone()));
        }
        for nt in &self.nonterminals {
            if self.productions.get(nt).is_none_or(Vec::is_empty) {
                return Err(GrammarError::NoProduction(nt.clone()));
            }
            if self.terminals.iter().any(|t| t == nt) {
                return Err(GrammarError::InvalidProgram(format!(
                    "symbol `{nt}` is both terminal and non-terminal"
                )));
            }
        }
        for rhs_list in self.productions.values() {
            for rhs in rhs_list {
                for sym in rhs {
                    let known = self.is_nonterminal(sym) || self.terminals.iter().any(|t| t == sym);
                    if !known {
                        return Err(GrammarError::UndefinedSymbol {
                            line: 0,
                            symbol: sym.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn min_height(&self, sym: &str) -> usize {
        self.min_height.get(sym).copied().unwrap_or(0)
    }

    /// Samples a complete program by expanding from the start symbol.
    ///
    /// Each expansion picks uniformly among the productions that can still
    /// terminate within the remaining depth.
    pub fn sample_program<R: Rng + ?Sized>(
        &self,
        depth_cap: usize,
        rng: &mut R,
    ) -> Result<Program, GrammarError> {
        if self.min_height(&self.start) > depth_cap {
            return Err(GrammarError::InfeasibleDepth {
                symbol: self.start.clone(),
                depth_cap,
            });
        }
        let root = self.expand(&self.start, depth_cap, rng);
        Ok(Program { root })
    }

    /// Expands `sym` into a subtree of height at most `remaining`.
    /// Callers must ensure `min_height(sym) <= remaining`.
    fn expand<R: Rng + ?Sized>(&self, sym: &str, remaining: usize, rng: &mut R) -> Node {
        if !self.is_nonterminal(sym) {
            return Node::leaf(sym);
        }
        let rhs_list = self.productions(sym);
        let eligible: Vec<usize> = (0..rhs_list.len())
            .filter(|&i| {
                remaining >= 1 && rhs_list[i].iter().all(|s| self.min_height(s) <= remaining - 1)
            })
            .collect();
        debug_assert!(!eligible.is_empty(), "expand called below min height");
        let pick = eligible[rng.random_range(0..eligible.len())];
        let children = rhs_list[pick]
            .iter()
            .map(|s| self.expand(s, remaining - 1, rng))
            .collect();
        Node {
            symbol: sym.to_string(),
            children,
        }
    }

    /// Returns a mutated copy of `program`: one non-terminal node chosen
    /// uniformly (the root included) has its subtree regenerated. The input
    /// is never modified, and the result may equal it.
    pub fn mutate<R: Rng + ?Sized>(
        &self,
        program: &Program,
        limits: &SizeLimits,
        rng: &mut R,
    ) -> Program {
        let paths = program.nonterminal_paths();
        debug_assert!(!paths.is_empty(), "complete programs have a non-terminal root");
        let path = &paths[rng.random_range(0..paths.len())];
        self.mutate_at(program, path, limits, rng)
    }

    /// Regenerates the subtree at `path`, retrying when the node cap is
    /// exceeded and falling back to an unchanged copy.
    fn mutate_at<R: Rng + ?Sized>(
        &self,
        program: &Program,
        path: &[usize],
        limits: &SizeLimits,
        rng: &mut R,
    ) -> Program {
        let target = program.node_at(path);
        let remaining = limits.depth_cap.saturating_sub(path.len());
        let outside = program.root.count() - target.count();
        for _ in 0..=MUTATION_RETRIES {
            let subtree = self.expand(&target.symbol, remaining, rng);
            if outside + subtree.count() <= limits.node_cap {
                return Program {
                    root: program.root.replaced(path, subtree),
                };
            }
        }
        program.clone()
    }

    /// Validates that `program` is a complete derivation of this grammar.
    pub fn check_program(&self, program: &Program) -> Result<(), GrammarError> {
        if program.root.symbol != self.start {
            return Err(GrammarError::InvalidProgram(format!(
                "root is `{}`, expected start symbol `{}`",
                program.root.symbol, self.start
            )));
        }
        self.check_node(&program.root)
    }

    fn check_node(&self, node: &Node) -> Result<(), GrammarError> {
        if node.children.is_empty() {
            if self.is_nonterminal(&node.symbol) {
                return Err(GrammarError::InvalidProgram(format!(
                    "leaf `{}` is a non-terminal",
                    node.symbol
                )));
            }
            if !self.terminals.iter().any(|t| t == &node.symbol) {
                return Err(GrammarError::InvalidProgram(format!(
                    "unknown terminal `{}`",
                    node.symbol
                )));
            }
            return Ok(());
        }
        let shape: Vec<&str> = node.children.iter().map(|c| c.symbol.as_str()).collect();
        let matches = self
            .productions(&node.symbol)
            .iter()
            .any(|rhs| rhs.len() == shape.len() && rhs.iter().zip(&shape).all(|(a, b)| a == b));
        if !matches {
            return Err(GrammarError::InvalidProgram(format!(
                "children of `{}` match no production: {:?}",
                node.symbol, shape
            )));
        }
        for child in &node.children {
            self.check_node(child)?;
        }
        Ok(())
    }
}

fn compute_min_heights(
    order: &[String],
    productions: &HashMap<String, Vec<Vec<String>>>,
) -> Result<HashMap<String, usize>, GrammarError> {
    // Fixed point from "unknown" (usize::MAX) downwards.
    let mut height: HashMap<String, usize> = HashMap::new();
    let symbol_height = |height: &HashMap<String, usize>, sym: &str| -> usize {
        if productions.contains_key(sym) {
            height.get(sym).copied().unwrap_or(usize::MAX)
        } else {
            0
        }
    };
    loop {
        let mut changed = false;
        for nt in order {
            let mut best = usize::MAX;
            for rhs in &productions[nt] {
                let worst_child = rhs
                    .iter()
                    .map(|s| symbol_height(&height, s))
                    .max()
                    .unwrap_or(0);
                if worst_child != usize::MAX {
                    best = best.min(worst_child + 1);
                }
            }
            if best < symbol_height(&height, nt) {
                height.insert(nt.clone(), best);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for nt in order {
        if !height.contains_key(nt) {
            // Only self-referential rules: no finite derivation exists.
            return Err(GrammarError::NoProduction(nt.clone()));
        }
    }
    Ok(height)
}

/// One AST node: a symbol plus ordered children. Terminal leaves have none.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Node {
    pub(crate) symbol: String,
    pub(crate) children: Vec<Node>,
}

impl Node {
    pub(crate) fn leaf(symbol: &str) -> Node {
        Node {
            symbol: symbol.to_string(),
            children: Vec::new(),
        }
    }

    pub(crate) fn internal(symbol: &str, children: Vec<Node>) -> Node {
        Node {
            symbol: symbol.to_string(),
            children,
        }
    }

    fn count(&self) -> usize {
        1 + self.children.iter().map(Node::count).sum::<usize>()
    }

    fn replaced(&self, path: &[usize], subtree: Node) -> Node {
        match path.split_first() {
            None => subtree,
            Some((&idx, rest)) => {
                let mut children = self.children.clone();
                children[idx] = children[idx].replaced(rest, subtree);
                Node {
                    symbol: self.symbol.clone(),
                    children,
                }
            }
        }
    }

    fn leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.children.is_empty() {
            out.push(&self.symbol);
        } else {
            for child in &self.children {
                child.leaves(out);
            }
        }
    }
}

/// A complete program: an AST whose leaves are all terminals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub(crate) root: Node,
}

impl Program {
    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    /// Terminal symbols, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.leaves(&mut out);
        out
    }

    /// Deterministic human-readable form: the leaf sequence joined by
    /// spaces, e.g. `if b1 then c1`.
    pub fn render(&self) -> String {
        self.leaves().join(" ")
    }

    /// Paths (child-index sequences from the root) of every node that has
    /// children, i.e. every non-terminal in a complete program.
    fn nonterminal_paths(&self) -> Vec<Vec<usize>> {
        let mut paths = Vec::new();
        let mut stack = vec![(Vec::new(), &self.root)];
        while let Some((path, node)) = stack.pop() {
            if !node.children.is_empty() {
                for (i, child) in node.children.iter().enumerate().rev() {
                    let mut p = path.clone();
                    p.push(i);
                    stack.push((p, child));
                }
                paths.push(path);
            }
        }
        paths
    }

    fn node_at(&self, path: &[usize]) -> &Node {
        let mut node = &self.root;
        for &idx in path {
            node = &node.children[idx];
        }
        node
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
