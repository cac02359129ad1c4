//! Exhaustive oracle: enumerates every assignment of the free VMs to
//! processing nodes, filters by the public constraint checker and minimizes
//! the publicly-evaluated objective. Slow and obviously correct; the
//! branch-and-bound solver is validated against it.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::placement::{check_constraints, Placement};
use crate::power::evaluate;
use crate::solver::{SolveResult, SolveStatus};
use crate::topology::NodeIdx;
use crate::workload::Scenario;

pub const DEFAULT_BRUTE_CAP: f64 = 1e7;

/// Number of enumeration shards. Sharding splits the leading VM's candidate
/// range; the merge rule keeps results identical to a serial run.
fn shard_count() -> usize {
    std::env::var("FOGPLACE_THREADS")
        .ok()
        .and_then(|value| value.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

pub fn brute_force(scenario: &Scenario) -> Result<SolveResult> {
    brute_force_with_cap(scenario, DEFAULT_BRUTE_CAP)
}

pub fn brute_force_with_cap(scenario: &Scenario, cap: f64) -> Result<SolveResult> {
    let start = Instant::now();
    let base = Placement::pinned(scenario)?;
    let candidates = scenario.topology.processing_nodes();

    // Free VMs in (request, vm) order; enumeration is therefore
    // lexicographic and the first optimum found is the smallest one.
    let mut free: Vec<(usize, usize)> = Vec::new();
    for (r, request) in scenario.requests.iter().enumerate() {
        for (v, vm) in request.vms.iter().enumerate() {
            if !vm.is_input {
                free.push((r, v));
            }
        }
    }

    let space = (candidates.len() as f64).powi(free.len() as i32);
    if space > cap {
        return Err(Error::SearchSpaceExceeded { size: space, cap });
    }

    if free.is_empty() {
        let leaves = 1;
        return Ok(match evaluate(scenario, &base) {
            Ok(breakdown) => SolveResult {
                placement: Some(base),
                objective: Some(breakdown.total),
                lower_bound: breakdown.total,
                status: SolveStatus::Optimal,
                nodes_explored: leaves,
                wall_time: start.elapsed().as_secs_f64(),
            },
            Err(_) => SolveResult::infeasible(leaves, start.elapsed().as_secs_f64()),
        });
    }
    if candidates.is_empty() {
        return Ok(SolveResult::infeasible(0, start.elapsed().as_secs_f64()));
    }

    let shards = shard_count().min(candidates.len());
    let chunk = candidates.len().div_ceil(shards);
    let ranges: Vec<(usize, usize)> = (0..shards)
        .map(|s| (s * chunk, ((s + 1) * chunk).min(candidates.len())))
        .filter(|(lo, hi)| lo < hi)
        .collect();

    // Each shard owns a contiguous range of the leading digit, so shard
    // order is lexicographic order; merging by (objective, shard index)
    // reproduces the serial result.
    let outcomes: Vec<ShardOutcome> = if ranges.len() == 1 {
        vec![enumerate(scenario, &base, &free, &candidates, ranges[0])]
    } else {
        let base = &base;
        let free = &free;
        let candidates = &candidates;
        std::thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .iter()
                .map(|&range| {
                    scope.spawn(move || enumerate(scenario, base, free, candidates, range))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    };

    let mut leaves = 0;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (shard_best, shard_leaves) in outcomes {
        leaves += shard_leaves;
        if let Some((obj, digits)) = shard_best {
            let replace = match &best {
                None => true,
                Some((cur, _)) => obj < *cur,
            };
            if replace {
                best = Some((obj, digits));
            }
        }
    }

    let wall_time = start.elapsed().as_secs_f64();
    match best {
        None => Ok(SolveResult::infeasible(leaves, wall_time)),
        Some((_, digits)) => {
            let mut placement = base;
            for (slot, &(r, v)) in free.iter().enumerate() {
                placement.set(r, v, Some(candidates[digits[slot]]));
            }
            let objective = evaluate(scenario, &placement)?.total;
            Ok(SolveResult {
                placement: Some(placement),
                objective: Some(objective),
                lower_bound: objective,
                status: SolveStatus::Optimal,
                nodes_explored: leaves,
                wall_time,
            })
        }
    }
}

/// Best (objective, digit string) seen by one shard, with its leaf count.
type ShardOutcome = (Option<(f64, Vec<usize>)>, u64);

/// Enumerates all leaves whose leading digit lies in `lead`; returns the
/// best (objective, digits) and the number of leaves visited. Ties keep the
/// earlier leaf, which is the lexicographically smaller assignment.
fn enumerate(
    scenario: &Scenario,
    base: &Placement,
    free: &[(usize, usize)],
    candidates: &[NodeIdx],
    lead: (usize, usize),
) -> ShardOutcome {
    let mut digits = vec![0usize; free.len()];
    digits[0] = lead.0;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut leaves = 0u64;
    let mut placement = base.clone();
    loop {
        for (slot, &(r, v)) in free.iter().enumerate() {
            placement.set(r, v, Some(candidates[digits[slot]]));
        }
        leaves += 1;
        if let Ok(violations) = check_constraints(scenario, &placement) {
            if violations.is_empty() {
                if let Ok(breakdown) = evaluate(scenario, &placement) {
                    let replace = match &best {
                        None => true,
                        Some((cur, _)) => breakdown.total < *cur,
                    };
                    if replace {
                        best = Some((breakdown.total, digits.clone()));
                    }
                }
            }
        }
        // Odometer bump, least-significant digit last.
        let mut slot = free.len();
        loop {
            if slot == 0 {
                return (best, leaves);
            }
            slot -= 1;
            digits[slot] += 1;
            let limit = if slot == 0 { lead.1 } else { candidates.len() };
            if digits[slot] < limit {
                break;
            }
            digits[slot] = if slot == 0 { lead.0 } else { 0 };
            if slot == 0 {
                return (best, leaves);
            }
        }
    }
}
