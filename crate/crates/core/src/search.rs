//! Options, statistics and outcomes shared by the search engines.

use std::time::{Duration, Instant};

use crate::preinterp::PreInterpretation;

/// Order in which newly derived clauses are processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedOrder {
    #[default]
    Fifo,
    Lifo,
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Backjump to the deepest choice point of a conflict instead of the
    /// most recent one.
    pub intelligent_backtracking: bool,
    /// Least-number value ordering plus isomorphic-conflict rejection.
    pub symmetry: bool,
    pub seed_order: SeedOrder,
    pub deadline: Option<Instant>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { intelligent_backtracking: true, symmetry: true, seed_order: SeedOrder::Fifo, deadline: None }
    }
}

impl SearchOptions {
    pub fn with_timeout(mut self, t: Duration) -> Self {
        self.deadline = Some(Instant::now() + t);
        self
    }

    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Values refuted by a conflict plus jumps out of exhausted choice points.
    pub backtracks: u64,
    pub primary_conflicts: u64,
    pub secondary_conflicts: u64,
    pub symmetry_rejections: u64,
    /// Function-table entries chosen by the search.
    pub abductions: u64,
    pub clauses: u64,
    pub max_depth: u64,
    /// Constraint engine: backtracks inside the constraint solver.
    pub solver_backtracks: u64,
    /// Constraint engine: backtracks into subsumption choice points.
    pub rule5_backtracks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// A (possibly partial) pre-interpretation every completion of which
    /// makes the query fail.
    Solution(PreInterpretation),
    /// No pre-interpretation of this size makes the query fail.
    Exhausted,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub outcome: Outcome,
    pub stats: SearchStats,
}
