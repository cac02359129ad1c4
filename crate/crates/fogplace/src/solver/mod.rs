//! Placement solvers: exhaustive oracle, branch-and-bound, greedy
//! construction, local search, and an LP-file exporter for independent
//! verification.

mod bnb;
mod brute;
mod context;
mod greedy;
mod lp;

pub use bnb::branch_and_bound;
pub use brute::{brute_force, brute_force_with_cap, DEFAULT_BRUTE_CAP};
pub use greedy::{greedy, local_search};
pub use lp::export_lp;

use serde::{Deserialize, Serialize};

use crate::placement::Placement;

/// Relative tolerance for objective comparisons. All inputs are small exact
/// decimals and the model is linear, so anything beyond this is noise.
pub(crate) const REL_TOL: f64 = 1e-9;

/// `a` is better than `b` by more than the relative tolerance.
pub(crate) fn improves(a: f64, b: f64) -> bool {
    a < b - REL_TOL * b.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Objective proven optimal: lower bound meets it within tolerance.
    Optimal,
    /// Feasible placement without an optimality proof (heuristics, or exact
    /// solvers interrupted before the proof closed).
    FeasibleWithGap,
    Infeasible,
    /// Search stopped on a node or wall-time budget.
    BudgetExhausted,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleWithGap => "feasible_with_gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// Limits for the branch-and-bound search. Node budgets are deterministic;
/// wall-time budgets are not and are meant for interactive use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveBudget {
    pub max_nodes: Option<u64>,
    pub max_seconds: Option<f64>,
}

impl SolveBudget {
    pub fn unlimited() -> Self {
        SolveBudget::default()
    }

    pub fn nodes(max_nodes: u64) -> Self {
        SolveBudget {
            max_nodes: Some(max_nodes),
            max_seconds: None,
        }
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Best placement found; `None` when the instance is infeasible or no
    /// incumbent appeared before the budget ran out.
    pub placement: Option<Placement>,
    /// Objective of `placement`, re-evaluated through the public power model.
    pub objective: Option<f64>,
    /// Proven global lower bound on the optimum; infinity when infeasible.
    pub lower_bound: f64,
    pub status: SolveStatus,
    /// Search effort: leaves for the oracle, expanded nodes for
    /// branch-and-bound, evaluations for the heuristics.
    pub nodes_explored: u64,
    pub wall_time: f64,
}

impl SolveResult {
    pub(crate) fn infeasible(nodes_explored: u64, wall_time: f64) -> Self {
        SolveResult {
            placement: None,
            objective: None,
            lower_bound: f64::INFINITY,
            status: SolveStatus::Infeasible,
            nodes_explored,
            wall_time,
        }
    }
}
