//! Parameter sweeps over the idle-share factor delta and the per-device VM
//! cap k, with CSV reports.
//!
//! Cells of one solver are solved in decreasing-delta, increasing-k order
//! and each solve is warm-started with the placements of the neighbouring
//! cells already done. A placement's feasibility does not depend on delta,
//! and relaxing k only widens the feasible set, so the reported totals are
//! monotone: non-decreasing in delta for fixed k, non-increasing in k for
//! fixed delta.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::placement::Placement;
use crate::power::{evaluate, PowerBreakdown};
use crate::solver::{
    branch_and_bound, brute_force, greedy, local_search, SolveBudget, SolveStatus,
};
use crate::topology::NodeTier;
use crate::workload::Scenario;

const LOCAL_SEARCH_ITERS: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SolverKind {
    Brute,
    BranchAndBound,
    Greedy,
    LocalSearch,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Brute => "brute",
            SolverKind::BranchAndBound => "bnb",
            SolverKind::Greedy => "greedy",
            SolverKind::LocalSearch => "local",
        }
    }

    pub fn parse(label: &str) -> Result<Self> {
        match label {
            "brute" => Ok(SolverKind::Brute),
            "bnb" => Ok(SolverKind::BranchAndBound),
            "greedy" => Ok(SolverKind::Greedy),
            "local" => Ok(SolverKind::LocalSearch),
            other => Err(Error::InvalidConfig(format!(
                "unknown solver `{other}` (expected brute, bnb, greedy or local)"
            ))),
        }
    }
}

pub struct SweepSpec {
    pub scenario: Scenario,
    pub delta_values: Vec<f64>,
    pub k_values: Vec<u32>,
    pub solvers: Vec<SolverKind>,
    pub budget: SolveBudget,
}

impl SweepSpec {
    pub fn new(scenario: Scenario) -> Self {
        SweepSpec {
            scenario,
            delta_values: vec![0.03, 0.06, 0.10],
            k_values: vec![1, 2],
            solvers: vec![SolverKind::BranchAndBound],
            budget: SolveBudget::unlimited(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub delta: f64,
    pub k: u32,
    pub solver: SolverKind,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub lower_bound: f64,
    pub breakdown: Option<PowerBreakdown>,
    pub nodes_explored: u64,
    pub wall_time: f64,
}

impl SweepRecord {
    /// Relative optimality gap, when both an incumbent and a finite bound
    /// exist.
    pub fn gap(&self) -> Option<f64> {
        let objective = self.objective?;
        if !self.lower_bound.is_finite() || objective <= 0.0 {
            return None;
        }
        Some((objective - self.lower_bound).max(0.0) / objective)
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    if spec.delta_values.is_empty() || spec.k_values.is_empty() || spec.solvers.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one delta, one k and one solver".into(),
        ));
    }
    let mut deltas = spec.delta_values.clone();
    deltas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    deltas.dedup();
    let mut ks = spec.k_values.clone();
    ks.sort_unstable();
    ks.dedup();

    let mut records = Vec::new();
    for &solver in &spec.solvers {
        // Best placement found per cell, reused to warm-start neighbours.
        let mut carried: BTreeMap<(usize, u32), Placement> = BTreeMap::new();
        for (di, &delta) in deltas.iter().enumerate() {
            for &k in &ks {
                let cell = Scenario::new(
                    spec.scenario.topology.clone(),
                    spec.scenario.requests.clone(),
                    k,
                    Some(delta),
                )?;

                // Neighbours: same k at the previously solved (larger)
                // delta, and the next-smaller k at this delta.
                let mut warm: Option<(f64, Placement)> = None;
                let neighbours = [
                    di.checked_sub(1).map(|p| (p, k)),
                    ks.iter()
                        .rev()
                        .find(|&&other| other < k)
                        .map(|&other| (di, other)),
                ];
                for key in neighbours.into_iter().flatten() {
                    if let Some(placement) = carried.get(&key) {
                        if let Ok(b) = evaluate(&cell, placement) {
                            let better = match &warm {
                                None => true,
                                Some((cur, _)) => b.total < *cur,
                            };
                            if better {
                                warm = Some((b.total, placement.clone()));
                            }
                        }
                    }
                }

                let mut result = match solver {
                    SolverKind::Brute => brute_force(&cell)?,
                    SolverKind::BranchAndBound => {
                        branch_and_bound(&cell, &spec.budget, warm.as_ref().map(|(_, p)| p))?
                    }
                    SolverKind::Greedy => greedy(&cell)?,
                    SolverKind::LocalSearch => {
                        let seed = greedy(&cell)?;
                        match seed.placement {
                            Some(p) => local_search(&cell, &p, LOCAL_SEARCH_ITERS)?,
                            None => seed,
                        }
                    }
                };

                // Heuristics do not see the warm start; take the carried
                // placement instead whenever it is strictly better, so each
                // solver's own trend stays monotone.
                if matches!(solver, SolverKind::Greedy | SolverKind::LocalSearch) {
                    if let Some((warm_total, placement)) = &warm {
                        let worse = match result.objective {
                            None => true,
                            Some(own) => *warm_total < own,
                        };
                        if worse {
                            result.objective = Some(*warm_total);
                            result.placement = Some(placement.clone());
                            result.status = SolveStatus::FeasibleWithGap;
                        }
                    }
                }

                let breakdown = match &result.placement {
                    Some(placement) => Some(evaluate(&cell, placement)?),
                    None => None,
                };
                if let Some(placement) = &result.placement {
                    carried.insert((di, k), placement.clone());
                }
                records.push(SweepRecord {
                    delta,
                    k,
                    solver,
                    status: result.status,
                    objective: result.objective,
                    lower_bound: result.lower_bound,
                    breakdown,
                    nodes_explored: result.nodes_explored,
                    wall_time: result.wall_time,
                });
            }
        }
    }

    records.sort_by(|a, b| {
        a.delta
            .partial_cmp(&b.delta)
            .unwrap()
            .then(a.k.cmp(&b.k))
            .then(a.solver.label().cmp(b.solver.label()))
    });
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsRow {
    pub solver: SolverKind,
    pub delta: f64,
    pub baseline_k: u32,
    pub improved_k: u32,
    pub percent: f64,
}

/// Power saved by raising the cap from `baseline_k` to `improved_k`, as a
/// percentage of the baseline, per delta.
pub fn compute_savings(
    records: &[SweepRecord],
    solver: SolverKind,
    baseline_k: u32,
    improved_k: u32,
) -> Result<Vec<SavingsRow>> {
    let cell = |delta: f64, k: u32| -> Result<f64> {
        records
            .iter()
            .find(|r| r.solver == solver && r.delta == delta && r.k == k)
            .and_then(|r| r.objective)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "no solved cell for solver {} delta {delta} k {k}",
                    solver.label()
                ))
            })
    };

    let mut deltas: Vec<f64> = records
        .iter()
        .filter(|r| r.solver == solver)
        .map(|r| r.delta)
        .collect();
    if deltas.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no records for solver {}",
            solver.label()
        )));
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    deltas.dedup();

    let mut rows = Vec::new();
    for delta in deltas {
        let baseline = cell(delta, baseline_k)?;
        let improved = cell(delta, improved_k)?;
        if baseline <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "baseline power at delta {delta} is {baseline}, savings undefined"
            )));
        }
        rows.push(SavingsRow {
            solver,
            delta,
            baseline_k,
            improved_k,
            percent: 100.0 * (baseline - improved) / baseline,
        });
    }
    Ok(rows)
}

/// Writes power.csv, workload_share.csv and savings.csv under `dir`. Output
/// depends only on the records, so repeated runs are byte-identical.
pub fn emit_report(records: &[SweepRecord], savings: &[SavingsRow], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut power = csv::Writer::from_path(dir.join("power.csv"))?;
    power.write_record([
        "delta",
        "k",
        "solver",
        "status",
        "total_w",
        "net_proportional_w",
        "net_idle_w",
        "proc_proportional_w",
        "proc_idle_w",
        "lan_proportional_w",
        "lan_idle_w",
    ])?;
    for r in records {
        let b = r.breakdown.as_ref();
        let field = |value: Option<f64>| value.map(|v| v.to_string()).unwrap_or_default();
        power.write_record([
            r.delta.to_string(),
            r.k.to_string(),
            r.solver.label().to_string(),
            r.status.label().to_string(),
            field(b.map(|b| b.total)),
            field(b.map(|b| b.net_proportional)),
            field(b.map(|b| b.net_idle)),
            field(b.map(|b| b.proc_proportional)),
            field(b.map(|b| b.proc_idle)),
            field(b.map(|b| b.lan_proportional)),
            field(b.map(|b| b.lan_idle)),
        ])?;
    }
    power.flush()?;

    let mut shares = csv::Writer::from_path(dir.join("workload_share.csv"))?;
    shares.write_record([
        "delta",
        "k",
        "solver",
        "iot_share",
        "access_fog_share",
        "metro_fog_share",
        "cloud_share",
    ])?;
    for r in records {
        let share = |tier: NodeTier| {
            r.breakdown
                .as_ref()
                .and_then(|b| b.tier_workload_share.get(&tier))
                .map(|v| v.to_string())
                .unwrap_or_default()
        };
        shares.write_record([
            r.delta.to_string(),
            r.k.to_string(),
            r.solver.label().to_string(),
            share(NodeTier::IoTDevice),
            share(NodeTier::AccessFog),
            share(NodeTier::MetroFog),
            share(NodeTier::CloudDc),
        ])?;
    }
    shares.flush()?;

    let mut sav = csv::Writer::from_path(dir.join("savings.csv"))?;
    sav.write_record([
        "solver",
        "delta",
        "baseline_k",
        "improved_k",
        "savings_percent",
    ])?;
    for row in savings {
        sav.write_record([
            row.solver.label().to_string(),
            row.delta.to_string(),
            row.baseline_k.to_string(),
            row.improved_k.to_string(),
            row.percent.to_string(),
        ])?;
    }
    sav.flush()?;
    Ok(())
}
