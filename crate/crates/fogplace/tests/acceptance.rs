//! Acceptance gate: one test per release criterion, each printing a single
//! `criterion N (<label>): pass|skip|fail` line (visible with
//! `cargo test --test acceptance -- --nocapture`).

mod common;

use std::sync::OnceLock;
use std::time::Instant;

use fogplace::experiments::{compute_savings, run_sweep, SolverKind, SweepRecord, SweepSpec};
use fogplace::placement::{check_constraints, derive_state, Placement};
use fogplace::power::evaluate;
use fogplace::reference::{
    build_reference_topology, ReferenceConfig, CPU_ROWS, IP_WDM_NODE, NET_ROWS,
};
use fogplace::solver::{branch_and_bound, brute_force, export_lp, SolveBudget, SolveStatus};
use fogplace::topology::{audit_flow_conservation, NodeTier};
use fogplace::workload::{Scenario, VirtualLink, VirtualMachine, VirtualRequest};

use common::{
    external_milp_available, rel_close, small_scenario, solve_lp_externally, ExternalSolve,
};

/// Node budget for branch-and-bound on the full reference scenario. Chosen
/// deterministic (no wall-clock cutoff) and empirically past the point where
/// the incumbent stops moving; the bound gap that remains is reported, not
/// hidden.
const REFERENCE_NODE_BUDGET: u64 = 200_000;

enum Outcome {
    Pass(String),
    Skip(String),
}

fn criterion(number: u32, label: &str, body: impl FnOnce() -> Result<Outcome, String>) {
    match body() {
        Ok(Outcome::Pass(detail)) if detail.is_empty() => {
            println!("criterion {number} ({label}): pass");
        }
        Ok(Outcome::Pass(detail)) => println!("criterion {number} ({label}): pass [{detail}]"),
        Ok(Outcome::Skip(why)) => println!("criterion {number} ({label}): skip - {why}"),
        Err(why) => {
            println!("criterion {number} ({label}): fail - {why}");
            panic!("criterion {number} ({label}) failed: {why}");
        }
    }
}

fn pass(detail: impl Into<String>) -> Result<Outcome, String> {
    Ok(Outcome::Pass(detail.into()))
}

fn ensure(cond: bool, why: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why.into())
    }
}

/// 10-node topology (1 zone x 2 IoT devices) carrying one two-VM request:
/// the pinned input streams `rate` Gb/s to a worker of `demand` GFLOPS.
fn two_vm_scenario(delta: f64, demand: f64, rate: f64) -> Scenario {
    let cfg = ReferenceConfig {
        zones: 1,
        iot_per_zone: 2,
        ..ReferenceConfig::default()
    };
    let topology = build_reference_topology(&cfg).expect("valid minimal config");
    let request = VirtualRequest {
        id: 0,
        vms: vec![
            VirtualMachine {
                cpu_demand: 0.0,
                is_input: true,
            },
            VirtualMachine {
                cpu_demand: demand,
                is_input: false,
            },
        ],
        links: vec![VirtualLink {
            from_vm: 0,
            to_vm: 1,
            data_rate: rate,
        }],
        source_node: "iot_z1_d1".into(),
    };
    Scenario::new(topology, vec![request], 1, Some(delta)).expect("consistent scenario")
}

fn place_worker(scenario: &Scenario, node: &str) -> Placement {
    let mut placement = Placement::pinned(scenario).expect("pin input VMs");
    let idx = scenario
        .topology
        .require_node(node)
        .expect("known node id");
    placement.set(0, 1, Some(idx));
    placement
}

#[test]
fn criterion_1_power_fixtures() {
    criterion(1, "hand-derived power fixtures", || {
        let started = Instant::now();
        let tol = 1e-9;

        // Worker colocated with the input on the source device: no traffic,
        // no network gear wakes up, one CPU carries 10 GFLOPS.
        let scenario = two_vm_scenario(1.0, 10.0, 0.5);
        let colocated = evaluate(&scenario, &place_worker(&scenario, "iot_z1_d1"))
            .map_err(|e| format!("colocated fixture rejected: {e}"))?;
        ensure(
            colocated.net_proportional == 0.0 && colocated.net_idle == 0.0,
            format!(
                "colocation must not activate the network, got {} + {} W",
                colocated.net_proportional, colocated.net_idle
            ),
        )?;
        let iot_cpu = 0.35 * 10.0 + 2.56;
        ensure(
            rel_close(colocated.total, iot_cpu, tol),
            format!("colocated total {} vs hand value {iot_cpu}", colocated.total),
        )?;

        // Worker on the neighbouring device: 1 Gb/s crosses the zone's AP
        // (0.6 W/Gbps, 9 W idle, its idle share is never split), and the
        // same single CPU runs remotely.
        let scenario = two_vm_scenario(1.0, 10.0, 1.0);
        let one_hop = evaluate(&scenario, &place_worker(&scenario, "iot_z1_d2"))
            .map_err(|e| format!("one-hop fixture rejected: {e}"))?;
        ensure(
            rel_close(one_hop.net_proportional, 0.6, tol),
            format!("one-hop net proportional {}", one_hop.net_proportional),
        )?;
        ensure(
            rel_close(one_hop.net_idle, 9.0, tol),
            format!("one-hop net idle {}", one_hop.net_idle),
        )?;
        ensure(
            rel_close(one_hop.total, 0.6 + 9.0 + iot_cpu, tol),
            format!("one-hop total {}", one_hop.total),
        )?;

        // Worker in the cloud at an idle share of 3%: the full transport
        // chain activates (AP at its own full idle, OLT 60 W, metro switch
        // 423 W, metro router port 27 W, one core node 790 W, all x 0.03)
        // and one cloud CPU carries the 10 GFLOPS.
        let scenario = two_vm_scenario(0.03, 10.0, 1.0);
        let in_cloud = evaluate(&scenario, &place_worker(&scenario, "cloud"))
            .map_err(|e| format!("cloud fixture rejected: {e}"))?;
        let net_prop = 0.6 + 0.22 + 0.08 + 0.08 + 0.14;
        let net_idle = 9.0 + (60.0 + 423.0 + 27.0 + 790.0) * 0.03;
        let cloud_cpu = 0.55 * 10.0 + 58.7;
        ensure(
            rel_close(in_cloud.net_proportional, net_prop, tol),
            format!("cloud net proportional {}", in_cloud.net_proportional),
        )?;
        ensure(
            rel_close(in_cloud.net_idle, net_idle, tol),
            format!("cloud net idle {} vs {net_idle}", in_cloud.net_idle),
        )?;
        ensure(
            rel_close(in_cloud.proc_proportional + in_cloud.proc_idle, cloud_cpu, tol),
            format!(
                "cloud processing {} vs {cloud_cpu}",
                in_cloud.proc_proportional + in_cloud.proc_idle
            ),
        )?;
        ensure(
            rel_close(in_cloud.total, net_prop + net_idle + cloud_cpu, tol),
            format!("cloud total {}", in_cloud.total),
        )?;

        // No requests at all: nothing draws power.
        let topology = build_reference_topology(&ReferenceConfig::default()).expect("valid");
        let empty = Scenario::new(topology, Vec::new(), 1, Some(0.03)).expect("empty scenario");
        let idle = evaluate(&empty, &Placement::pinned(&empty).expect("nothing to pin"))
            .map_err(|e| format!("empty fixture rejected: {e}"))?;
        ensure(idle.total == 0.0, format!("empty total {}", idle.total))?;

        let elapsed = started.elapsed().as_secs_f64();
        ensure(elapsed < 1.0, format!("fixtures took {elapsed:.3}s"))?;
        pass(format!("4 fixtures in {elapsed:.3}s"))
    });
}

#[test]
fn criterion_2_datasheet_consistency() {
    criterion(2, "datasheet consistency", || {
        for (name, row) in CPU_ROWS {
            let derived = (row.max_watts - row.idle_watts) / row.gflops;
            ensure(
                (derived - row.efficiency).abs() <= 0.01,
                format!(
                    "{name}: (max-idle)/gflops = {derived:.4} vs efficiency {}",
                    row.efficiency
                ),
            )?;
        }
        let ip_wdm =
            (IP_WDM_NODE.max_watts - IP_WDM_NODE.idle_watts) / IP_WDM_NODE.bitrate_gbps;
        ensure(
            (ip_wdm - IP_WDM_NODE.efficiency).abs() > 0.01,
            "the core-node row unexpectedly satisfies the efficiency identity".to_string(),
        )?;
        ensure(
            NET_ROWS.iter().any(|(name, _)| *name == "ip_wdm_node"),
            "core-node row missing from the datasheet table".to_string(),
        )?;
        pass(format!(
            "4 CPU rows consistent within 0.01; known discrepancy kept verbatim: \
             core node (max-idle)/bitrate = {ip_wdm:.2} W/Gbps vs efficiency column {}",
            IP_WDM_NODE.efficiency
        ))
    });
}

#[test]
fn criterion_3_oracle_equivalence() {
    criterion(3, "branch-and-bound equals brute force", || {
        let started = Instant::now();
        let mut compared = 0u32;
        let mut infeasible = 0u32;
        for (zones, iot) in [(1, 2), (1, 3), (2, 2)] {
            for requests in [1, 2] {
                for k in [1, 2] {
                    for delta in [0.03, 1.0] {
                        for seed in 0..9 {
                            let scenario =
                                small_scenario(zones, iot, requests, (2, 3), seed, k, delta);
                            let brute = brute_force(&scenario)
                                .map_err(|e| format!("brute force errored: {e}"))?;
                            let bnb =
                                branch_and_bound(&scenario, &SolveBudget::unlimited(), None)
                                    .map_err(|e| format!("branch and bound errored: {e}"))?;
                            if brute.status == SolveStatus::Infeasible {
                                ensure(
                                    bnb.status == SolveStatus::Infeasible,
                                    format!("disagreement on infeasibility at seed {seed}"),
                                )?;
                                infeasible += 1;
                                continue;
                            }
                            ensure(
                                brute.status == SolveStatus::Optimal
                                    && bnb.status == SolveStatus::Optimal,
                                format!(
                                    "expected two optima, got {:?} / {:?}",
                                    brute.status, bnb.status
                                ),
                            )?;
                            let (a, b) = (
                                brute.objective.expect("optimal has an objective"),
                                bnb.objective.expect("optimal has an objective"),
                            );
                            ensure(
                                rel_close(b, a, 1e-9),
                                format!(
                                    "objectives differ at zones {zones} iot {iot} requests \
                                     {requests} k {k} delta {delta} seed {seed}: brute {a} \
                                     vs bnb {b}"
                                ),
                            )?;
                            compared += 1;
                        }
                    }
                }
            }
        }
        ensure(
            compared + infeasible >= 200,
            format!("only {compared} + {infeasible} scenarios covered"),
        )?;
        let elapsed = started.elapsed().as_secs_f64();
        ensure(elapsed < 300.0, format!("equivalence sweep took {elapsed:.1}s"))?;
        pass(format!(
            "{compared} optima matched to 1e-9 ({infeasible} infeasible agreed) in {elapsed:.1}s"
        ))
    });
}

#[test]
fn criterion_4_external_milp_crosscheck() {
    criterion(4, "external MILP cross-check", || {
        if !external_milp_available() {
            return Ok(Outcome::Skip(
                "python3 with scipy not available on this machine".into(),
            ));
        }
        let mut matched = 0u32;
        for (zones, iot) in [(1, 2), (1, 3), (2, 2)] {
            for k in [1, 2] {
                for (seed, delta) in [(11, 0.03), (12, 0.1)] {
                    let scenario = small_scenario(zones, iot, 2, (2, 3), seed, k, delta);
                    let bnb = branch_and_bound(&scenario, &SolveBudget::unlimited(), None)
                        .map_err(|e| format!("branch and bound errored: {e}"))?;
                    let model = export_lp(&scenario).map_err(|e| format!("export failed: {e}"))?;
                    let external = solve_lp_externally(&model);
                    match (bnb.status, external) {
                        (SolveStatus::Infeasible, ExternalSolve::Infeasible) => {}
                        (SolveStatus::Optimal, ExternalSolve::Optimal(value)) => {
                            let own = bnb.objective.expect("optimal has an objective");
                            ensure(
                                rel_close(value, own, 1e-6),
                                format!(
                                    "zones {zones} iot {iot} k {k} seed {seed}: \
                                     external {value} vs bnb {own}"
                                ),
                            )?;
                        }
                        (status, other) => {
                            return Err(format!(
                                "status disagreement: bnb {status:?} vs external {other:?}"
                            ));
                        }
                    }
                    matched += 1;
                }
            }
        }
        ensure(matched >= 10, format!("only {matched} instances cross-checked"))?;
        pass(format!("{matched} instances matched to 1e-6"))
    });
}

static SWEEP: OnceLock<Vec<SweepRecord>> = OnceLock::new();

/// One shared sweep over delta x k with the exact solver; criteria 5 and 6
/// both read it.
fn reference_sweep() -> &'static [SweepRecord] {
    SWEEP.get_or_init(|| {
        let mut spec = SweepSpec::new(common::reference_scenario(1, 1.0));
        spec.delta_values = vec![0.03, 0.06, 0.10];
        spec.k_values = vec![1, 2];
        spec.solvers = vec![SolverKind::BranchAndBound];
        spec.budget = SolveBudget::nodes(REFERENCE_NODE_BUDGET);
        run_sweep(&spec).expect("sweep over the reference scenario")
    })
}

fn record_at(delta: f64, k: u32) -> Result<&'static SweepRecord, String> {
    reference_sweep()
        .iter()
        .find(|r| r.delta == delta && r.k == k)
        .ok_or_else(|| format!("no sweep record for delta {delta} k {k}"))
}

#[test]
fn criterion_5_iot_only_at_k2() {
    criterion(5, "k=2 keeps all workload on the IoT layer", || {
        let mut detail = Vec::new();
        for delta in [0.03, 0.06, 0.10] {
            let record = record_at(delta, 2)?;
            let breakdown = record
                .breakdown
                .as_ref()
                .ok_or_else(|| format!("no incumbent at delta {delta}"))?;
            let share = breakdown.tier_workload_share[&NodeTier::IoTDevice];
            ensure(
                (share - 1.0).abs() <= 1e-12,
                format!("IoT share {share} at delta {delta}"),
            )?;
            for tier in [NodeTier::AccessFog, NodeTier::MetroFog, NodeTier::CloudDc] {
                let other = breakdown.tier_workload_share[&tier];
                ensure(
                    other == 0.0,
                    format!("{} share {other} at delta {delta}", tier.label()),
                )?;
            }
            detail.push(format!(
                "delta {delta}: share 1.0, {} W ({})",
                breakdown.total,
                record.status.label()
            ));
        }
        pass(detail.join("; "))
    });
}

#[test]
fn criterion_6_savings_and_monotonicity() {
    criterion(6, "k=2 saves power, totals rise with delta", || {
        let records = reference_sweep();
        for record in records {
            ensure(
                record.wall_time <= 600.0,
                format!(
                    "cell delta {} k {} took {:.1}s",
                    record.delta, record.k, record.wall_time
                ),
            )?;
        }
        let savings = compute_savings(records, SolverKind::BranchAndBound, 1, 2)
            .map_err(|e| format!("savings computation failed: {e}"))?;
        ensure(
            savings.len() == 3,
            format!("expected one savings row per delta, got {}", savings.len()),
        )?;
        let mut detail = Vec::new();
        for row in &savings {
            ensure(
                row.percent > 0.0,
                format!("savings {}% at delta {}", row.percent, row.delta),
            )?;
            detail.push(format!("delta {}: {:.1}% saved", row.delta, row.percent));
        }
        for k in [1, 2] {
            let totals: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.k == k)
                .map(|r| (r.delta, r.objective.expect("incumbent in every cell")))
                .collect();
            ensure(totals.len() == 3, format!("missing cells for k {k}"))?;
            for pair in totals.windows(2) {
                ensure(
                    pair[0].0 < pair[1].0,
                    "sweep records out of delta order".to_string(),
                )?;
                ensure(
                    pair[0].1 <= pair[1].1 + 1e-9,
                    format!(
                        "total power fell from {} W to {} W between delta {} and {} at k {k}",
                        pair[0].1, pair[1].1, pair[0].0, pair[1].0
                    ),
                )?;
            }
        }
        let worst_gap = records
            .iter()
            .filter_map(|r| r.gap())
            .fold(0.0f64, f64::max);
        detail.push(format!(
            "worst proven-bound gap {:.1}% over {} cells",
            worst_gap * 100.0,
            records.len()
        ));
        pass(detail.join("; "))
    });
}

#[test]
fn criterion_7_property_spot_checks() {
    criterion(7, "property suite spot checks", || {
        // Randomised versions of each property live in the `properties`
        // target; here every family is pinned once on fixed inputs.
        let scenario = small_scenario(2, 2, 2, (2, 3), 42, 2, 0.06);
        let solved = branch_and_bound(&scenario, &SolveBudget::unlimited(), None)
            .map_err(|e| format!("solver errored: {e}"))?;
        let placement = solved.placement.as_ref().ok_or("no incumbent")?;
        let state = derive_state(&scenario, placement).map_err(|e| e.to_string())?;
        audit_flow_conservation(&scenario.topology, &state.traffic)
            .map_err(|e| format!("flow conservation broken: {e}"))?;

        let allocated: f64 = state.omega_p.iter().sum();
        ensure(
            rel_close(allocated, scenario.total_demand(), 1e-9),
            format!(
                "allocated {} GFLOPS vs demanded {}",
                allocated,
                scenario.total_demand()
            ),
        )?;
        ensure(
            check_constraints(&scenario, placement)
                .map_err(|e| e.to_string())?
                .is_empty(),
            "solver output violates its own constraints".to_string(),
        )?;

        // Pinning: the input VM may only sit on its source.
        let mut off_source = placement.clone();
        let elsewhere = scenario.topology.require_node("afn").map_err(|e| e.to_string())?;
        off_source.set(0, scenario.requests[0].input_vm(), Some(elsewhere));
        ensure(
            !check_constraints(&scenario, &off_source)
                .map_err(|e| e.to_string())?
                .is_empty(),
            "input VM accepted away from its source".to_string(),
        )?;

        // Per-device cap: two VMs on one non-source device at k=1.
        let crowded_scenario = small_scenario(1, 2, 2, (2, 2), 9, 1, 0.1);
        let mut crowded = Placement::pinned(&crowded_scenario).map_err(|e| e.to_string())?;
        let spare = crowded_scenario
            .topology
            .require_node("iot_z1_d2")
            .map_err(|e| e.to_string())?;
        for (request, vm) in [(0usize, 1usize), (1, 1)] {
            crowded.set(request, vm, Some(spare));
        }
        ensure(
            !check_constraints(&crowded_scenario, &crowded)
                .map_err(|e| e.to_string())?
                .is_empty(),
            "k=1 device accepted two VMs".to_string(),
        )?;

        // CPU capacity: one VM bigger than a whole IoT device.
        let big = two_vm_scenario(1.0, 100.0, 0.1);
        ensure(
            !check_constraints(&big, &place_worker(&big, "iot_z1_d2"))
                .map_err(|e| e.to_string())?
                .is_empty(),
            "100 GFLOPS accepted on a 54 GFLOPS device".to_string(),
        )?;

        // Relaxing the cap can only help.
        let tight = brute_force(&small_scenario(1, 3, 2, (2, 3), 5, 1, 0.1))
            .map_err(|e| e.to_string())?;
        let relaxed = brute_force(&small_scenario(1, 3, 2, (2, 3), 5, 2, 0.1))
            .map_err(|e| e.to_string())?;
        let (t, r) = (
            tight.objective.ok_or("tight instance infeasible")?,
            relaxed.objective.ok_or("relaxed instance infeasible")?,
        );
        ensure(
            r <= t + 1e-12,
            format!("optimum rose from {t} to {r} when k went 1 -> 2"),
        )?;

        // Reported objective is exactly the public evaluation.
        let re_evaluated = evaluate(&scenario, placement).map_err(|e| e.to_string())?;
        ensure(
            solved.objective == Some(re_evaluated.total),
            format!(
                "solver said {:?}, re-evaluation {}",
                solved.objective, re_evaluated.total
            ),
        )?;

        // Emitting the same sweep twice gives byte-identical reports.
        let mut spec = SweepSpec::new(small_scenario(1, 2, 2, (2, 3), 8, 1, 0.1));
        spec.delta_values = vec![0.03, 0.1];
        spec.k_values = vec![1, 2];
        spec.solvers = vec![SolverKind::Greedy];
        let records = run_sweep(&spec).map_err(|e| e.to_string())?;
        let savings = compute_savings(&records, SolverKind::Greedy, 1, 2)
            .map_err(|e| e.to_string())?;
        let dirs = (
            tempfile::tempdir().map_err(|e| e.to_string())?,
            tempfile::tempdir().map_err(|e| e.to_string())?,
        );
        fogplace::experiments::emit_report(&records, &savings, dirs.0.path())
            .map_err(|e| e.to_string())?;
        fogplace::experiments::emit_report(&records, &savings, dirs.1.path())
            .map_err(|e| e.to_string())?;
        for file in ["power.csv", "workload_share.csv", "savings.csv"] {
            let a = std::fs::read(dirs.0.path().join(file)).map_err(|e| e.to_string())?;
            let b = std::fs::read(dirs.1.path().join(file)).map_err(|e| e.to_string())?;
            ensure(a == b, format!("{file} differs between identical runs"))?;
        }
        pass("flow and workload conservation, constraint enforcement, cap dominance, \
              re-evaluation identity, deterministic CSVs")
    });
}
