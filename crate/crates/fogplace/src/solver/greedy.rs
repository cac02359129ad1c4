//! Constructive heuristic plus a local-search polish. Neither proves
//! optimality; both report `FeasibleWithGap` with a trivial lower bound.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::placement::{check_constraints, Placement, Violation};
use crate::power::{evaluate, evaluate_partial};
use crate::solver::{improves, SolveResult, SolveStatus};
use crate::topology::NodeIdx;
use crate::workload::Scenario;

/// Violations other than unassigned slots; a partial placement is still on
/// track as long as this is empty.
fn hard_violations(violations: &[Violation]) -> bool {
    violations
        .iter()
        .any(|v| !matches!(v, Violation::UnassignedVm { .. }))
}

/// Places free VMs one at a time, largest demand first, each on the node
/// that increases total power the least.
pub fn greedy(scenario: &Scenario) -> Result<SolveResult> {
    let start = Instant::now();
    let mut placement = Placement::pinned(scenario)?;
    if hard_violations(&check_constraints(scenario, &placement)?) {
        return Ok(SolveResult::infeasible(0, start.elapsed().as_secs_f64()));
    }

    let mut free: Vec<(usize, usize, f64)> = Vec::new();
    for (r, request) in scenario.requests.iter().enumerate() {
        for (v, vm) in request.vms.iter().enumerate() {
            if !vm.is_input {
                free.push((r, v, vm.cpu_demand));
            }
        }
    }
    free.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then((a.0, a.1).cmp(&(b.0, b.1)))
    });

    let candidates = scenario.topology.processing_nodes();
    let mut evaluations = 0u64;
    for (r, v, _) in free {
        let mut best: Option<(f64, NodeIdx)> = None;
        for &node in &candidates {
            placement.set(r, v, Some(node));
            let violations = check_constraints(scenario, &placement)?;
            if !hard_violations(&violations) {
                let total = evaluate_partial(scenario, &placement)?.total;
                evaluations += 1;
                let replace = match best {
                    None => true,
                    Some((cur, _)) => total < cur,
                };
                if replace {
                    best = Some((total, node));
                }
            }
            placement.set(r, v, None);
        }
        match best {
            Some((_, node)) => placement.set(r, v, Some(node)),
            None => {
                return Ok(SolveResult::infeasible(
                    evaluations,
                    start.elapsed().as_secs_f64(),
                ))
            }
        }
    }

    let objective = evaluate(scenario, &placement)?.total;
    Ok(SolveResult {
        placement: Some(placement),
        objective: Some(objective),
        lower_bound: 0.0,
        status: SolveStatus::FeasibleWithGap,
        nodes_explored: evaluations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

enum Step {
    Relocate { r: usize, v: usize, node: NodeIdx },
    Swap { a: (usize, usize), b: (usize, usize) },
}

/// Best-improvement descent over single relocations and pairwise swaps of
/// free VMs. Stops at a local optimum or after `max_iters` accepted steps.
/// Errors if `start` is not feasible.
pub fn local_search(
    scenario: &Scenario,
    start: &Placement,
    max_iters: u64,
) -> Result<SolveResult> {
    let clock = Instant::now();
    let violations = check_constraints(scenario, start)?;
    if !violations.is_empty() {
        return Err(Error::Infeasible(violations));
    }
    let mut placement = start.clone();
    let mut current = evaluate(scenario, &placement)?.total;

    let mut free: Vec<(usize, usize)> = Vec::new();
    for (r, request) in scenario.requests.iter().enumerate() {
        for (v, vm) in request.vms.iter().enumerate() {
            if !vm.is_input {
                free.push((r, v));
            }
        }
    }
    let candidates = scenario.topology.processing_nodes();

    let mut evaluations = 0u64;
    for _ in 0..max_iters {
        let mut best: Option<(f64, Step)> = None;
        let consider = |total: f64, step: Step, best: &mut Option<(f64, Step)>| {
            let replace = match best {
                None => true,
                Some((cur, _)) => total < *cur,
            };
            if replace {
                *best = Some((total, step));
            }
        };

        for &(r, v) in &free {
            let home = placement.get(r, v);
            for &node in &candidates {
                if Some(node) == home {
                    continue;
                }
                placement.set(r, v, Some(node));
                if check_constraints(scenario, &placement)?.is_empty() {
                    let total = evaluate(scenario, &placement)?.total;
                    evaluations += 1;
                    consider(total, Step::Relocate { r, v, node }, &mut best);
                }
                placement.set(r, v, home);
            }
        }
        for i in 0..free.len() {
            for j in (i + 1)..free.len() {
                let (ra, va) = free[i];
                let (rb, vb) = free[j];
                let na = placement.get(ra, va);
                let nb = placement.get(rb, vb);
                if na == nb {
                    continue;
                }
                placement.set(ra, va, nb);
                placement.set(rb, vb, na);
                if check_constraints(scenario, &placement)?.is_empty() {
                    let total = evaluate(scenario, &placement)?.total;
                    evaluations += 1;
                    consider(
                        total,
                        Step::Swap {
                            a: (ra, va),
                            b: (rb, vb),
                        },
                        &mut best,
                    );
                }
                placement.set(ra, va, na);
                placement.set(rb, vb, nb);
            }
        }

        match best {
            Some((total, step)) if improves(total, current) => {
                match step {
                    Step::Relocate { r, v, node } => placement.set(r, v, Some(node)),
                    Step::Swap { a, b } => {
                        let na = placement.get(a.0, a.1);
                        let nb = placement.get(b.0, b.1);
                        placement.set(a.0, a.1, nb);
                        placement.set(b.0, b.1, na);
                    }
                }
                current = total;
            }
            _ => break,
        }
    }

    let objective = evaluate(scenario, &placement)?.total;
    Ok(SolveResult {
        placement: Some(placement),
        objective: Some(objective),
        lower_bound: 0.0,
        status: SolveStatus::FeasibleWithGap,
        nodes_explored: evaluations,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{build_reference_topology, ReferenceConfig};
    use crate::solver::brute::brute_force;
    use crate::workload::{generate_requests, RequestParams};

    fn scenario(seed: u64, k: u32) -> Scenario {
        let cfg = ReferenceConfig {
            zones: 2,
            iot_per_zone: 2,
            delta: 0.06,
            ..ReferenceConfig::default()
        };
        let topo = build_reference_topology(&cfg).unwrap();
        let params = RequestParams {
            count: 2,
            vm_count_range: (2, 3),
            ..RequestParams::default()
        };
        let requests = generate_requests(&topo, seed, &params).unwrap();
        Scenario::new(topo, requests, k, None).unwrap()
    }

    #[test]
    fn greedy_yields_a_feasible_placement() {
        let s = scenario(2, 2);
        let result = greedy(&s).unwrap();
        assert_eq!(result.status, SolveStatus::FeasibleWithGap);
        let placement = result.placement.unwrap();
        assert!(check_constraints(&s, &placement).unwrap().is_empty());
        let objective = result.objective.unwrap();
        assert!((evaluate(&s, &placement).unwrap().total - objective).abs() < 1e-12);
    }

    #[test]
    fn greedy_never_beats_the_exact_optimum() {
        for seed in 0..8 {
            let s = scenario(seed, 2);
            let exact = brute_force(&s).unwrap().objective.unwrap();
            let heuristic = greedy(&s).unwrap().objective.unwrap();
            assert!(
                heuristic >= exact - 1e-9 * exact.max(1.0),
                "seed {seed}: greedy {heuristic} below optimum {exact}"
            );
        }
    }

    #[test]
    fn local_search_only_improves() {
        for seed in 0..8 {
            let s = scenario(seed, 2);
            let start = greedy(&s).unwrap();
            let from = start.objective.unwrap();
            let polished = local_search(&s, &start.placement.unwrap(), 50).unwrap();
            let to = polished.objective.unwrap();
            assert!(to <= from + 1e-12, "seed {seed}: {from} -> {to}");
            let placement = polished.placement.unwrap();
            assert!(check_constraints(&s, &placement).unwrap().is_empty());
        }
    }

    #[test]
    fn local_search_rejects_an_infeasible_start() {
        let s = scenario(0, 2);
        let partial = Placement::pinned(&s).unwrap();
        assert!(matches!(
            local_search(&s, &partial, 10),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn greedy_reports_infeasible_scenarios() {
        let cfg = ReferenceConfig {
            zones: 1,
            iot_per_zone: 1,
            ..ReferenceConfig::default()
        };
        let topo = build_reference_topology(&cfg).unwrap();
        let params = RequestParams {
            count: 1,
            vm_count_range: (2, 2),
            demand_range_gflops: (9000.0, 9001.0),
            ..RequestParams::default()
        };
        let requests = generate_requests(&topo, 1, &params).unwrap();
        let s = Scenario::new(topo, requests, 2, None).unwrap();
        let result = greedy(&s).unwrap();
        assert_eq!(result.status, SolveStatus::Infeasible);
    }
}
