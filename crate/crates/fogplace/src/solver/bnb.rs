//! Depth-first branch-and-bound over free-VM assignments.
//!
//! VMs branch in descending demand order, candidate hosts in ascending
//! incremental-power order. The bound below a partial assignment is the
//! power already committed plus, for each unassigned VM, the cheapest
//! proportional processing power any capacity-feasible host could charge.
//! That bound never exceeds the true completion cost, so pruning is safe.

use std::time::Instant;

use crate::error::Result;
use crate::placement::Placement;
use crate::power::evaluate;
use crate::solver::context::{EvalContext, SearchState};
use crate::solver::greedy::{greedy, local_search};
use crate::solver::{improves, SolveBudget, SolveResult, SolveStatus};
use crate::topology::NodeIdx;
use crate::workload::Scenario;

const LOCAL_SEARCH_ITERS: u64 = 200;
const TIME_CHECK_MASK: u64 = 0x3ff;

pub fn branch_and_bound(
    scenario: &Scenario,
    budget: &SolveBudget,
    warm_start: Option<&Placement>,
) -> Result<SolveResult> {
    let start = Instant::now();
    let ctx = EvalContext::new(scenario)?;
    let mut state = match SearchState::new(&ctx) {
        Ok(state) => state,
        Err(_) => return Ok(SolveResult::infeasible(0, start.elapsed().as_secs_f64())),
    };

    let mut search = Search {
        ctx: &ctx,
        budget,
        start,
        nodes: 0,
        budget_hit: false,
        abandoned_min: f64::INFINITY,
        incumbent_obj: None,
        incumbent: None,
    };

    // Seed the incumbent so pruning bites from the first node. The warm
    // start may come from a neighbouring parameter cell and can be
    // infeasible here; it is re-checked before use.
    let mut seeds: Vec<Placement> = Vec::new();
    if let Ok(result) = greedy(scenario) {
        if let Some(placement) = result.placement {
            if let Ok(result) = local_search(scenario, &placement, LOCAL_SEARCH_ITERS) {
                if let Some(improved) = result.placement {
                    seeds.push(improved);
                }
            }
            // local_search errors only on an infeasible start, which
            // greedy never produces; the push above covers the rest.
        }
    }
    if let Some(placement) = warm_start {
        seeds.push(placement.clone());
    }
    for placement in seeds {
        if let Ok(breakdown) = evaluate(scenario, &placement) {
            let snapshot = snapshot_of(&ctx, &placement);
            let better = match search.incumbent_obj {
                None => true,
                Some(cur) => breakdown.total < cur,
            };
            if better {
                search.incumbent_obj = Some(breakdown.total);
                search.incumbent = Some(snapshot);
            }
        }
    }

    search.dfs(&mut state, 0);

    let wall_time = start.elapsed().as_secs_f64();
    let exhausted = search.abandoned_min.is_finite() || search.budget_hit;
    match search.incumbent {
        None => {
            if exhausted {
                Ok(SolveResult {
                    placement: None,
                    objective: None,
                    lower_bound: search.abandoned_min,
                    status: SolveStatus::BudgetExhausted,
                    nodes_explored: search.nodes,
                    wall_time,
                })
            } else {
                Ok(SolveResult::infeasible(search.nodes, wall_time))
            }
        }
        Some(snapshot) => {
            let placement = placement_of(&ctx, &snapshot);
            // Report the objective through the public evaluator so callers
            // can reproduce it from the placement alone.
            let objective = evaluate(scenario, &placement)?.total;
            let (status, lower_bound) = if exhausted {
                (
                    SolveStatus::BudgetExhausted,
                    search.abandoned_min.min(objective),
                )
            } else {
                (SolveStatus::Optimal, objective)
            };
            Ok(SolveResult {
                placement: Some(placement),
                objective: Some(objective),
                lower_bound,
                status,
                nodes_explored: search.nodes,
                wall_time,
            })
        }
    }
}

fn snapshot_of(ctx: &EvalContext, placement: &Placement) -> Vec<NodeIdx> {
    ctx.vms
        .iter()
        .map(|vm| placement.get(vm.request, vm.vm).expect("total placement"))
        .collect()
}

fn placement_of(ctx: &EvalContext, snapshot: &[NodeIdx]) -> Placement {
    let mut placement = Placement::pinned(ctx.scenario).expect("context built from scenario");
    for (flat, vm) in ctx.vms.iter().enumerate() {
        placement.set(vm.request, vm.vm, Some(snapshot[flat]));
    }
    placement
}

struct Search<'a, 'b> {
    ctx: &'a EvalContext<'b>,
    budget: &'a SolveBudget,
    start: Instant,
    nodes: u64,
    budget_hit: bool,
    abandoned_min: f64,
    incumbent_obj: Option<f64>,
    incumbent: Option<Vec<NodeIdx>>,
}

impl Search<'_, '_> {
    fn dfs(&mut self, state: &mut SearchState, depth: usize) {
        let committed = state.committed_power(self.ctx);
        let remaining = &self.ctx.free_desc[depth..];
        let Some(tail) = state.completion_bound(self.ctx, remaining) else {
            // Some VM has no capacity-feasible host left on this branch.
            return;
        };
        let bound = committed + tail;

        if !self.budget_hit {
            if let Some(max_nodes) = self.budget.max_nodes {
                if self.nodes >= max_nodes {
                    self.budget_hit = true;
                }
            }
            if let Some(max_seconds) = self.budget.max_seconds {
                if self.nodes & TIME_CHECK_MASK == 0
                    && self.start.elapsed().as_secs_f64() > max_seconds
                {
                    self.budget_hit = true;
                }
            }
        }
        if self.budget_hit {
            self.abandoned_min = self.abandoned_min.min(bound);
            return;
        }
        self.nodes += 1;

        if let Some(inc) = self.incumbent_obj {
            if !improves(bound, inc) {
                return;
            }
        }

        if depth == self.ctx.free_desc.len() {
            let snapshot: Vec<NodeIdx> = state
                .assignment
                .iter()
                .map(|slot| slot.expect("leaf state is total"))
                .collect();
            let replace = match (&self.incumbent_obj, &self.incumbent) {
                (None, _) => true,
                (Some(inc), Some(cur)) => {
                    committed < *inc || (committed == *inc && snapshot < *cur)
                }
                (Some(inc), None) => committed < *inc,
            };
            if replace {
                self.incumbent_obj = Some(committed);
                self.incumbent = Some(snapshot);
            }
            return;
        }

        let vm = self.ctx.free_desc[depth];
        let mut scored: Vec<(f64, NodeIdx)> = Vec::new();
        for node in state.symmetry_filtered_candidates(self.ctx) {
            let mark = state.mark();
            if state.try_assign(self.ctx, vm, node) {
                scored.push((state.committed_power(self.ctx), node));
                state.undo_to(mark);
            }
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        for (_, node) in scored {
            let mark = state.mark();
            let ok = state.try_assign(self.ctx, vm, node);
            debug_assert!(ok, "candidate vanished between scoring and branching");
            if ok {
                self.dfs(state, depth + 1);
            }
            state.undo_to(mark);
            if self.budget_hit {
                // Unexplored siblings all bound at least as high as this
                // node; folding the node bound keeps the reported lower
                // bound valid.
                self.abandoned_min = self.abandoned_min.min(bound);
                return;
            }
        }
    }
}
