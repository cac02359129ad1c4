//! Power objective: proportional and idle network power plus proportional,
//! idle and LAN power of the processing layers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{check_constraints, derive_state, DerivedState, Placement};
use crate::topology::{NodeTier, Topology};
use crate::workload::Scenario;

/// The objective value and its six additive terms, in watts, plus the share
/// of total workload each processing tier carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub net_proportional: f64,
    pub net_idle: f64,
    pub proc_proportional: f64,
    pub proc_idle: f64,
    pub lan_proportional: f64,
    pub lan_idle: f64,
    pub total: f64,
    /// Fraction of all placed GFLOPS per processing tier; zero map values
    /// when nothing is placed.
    pub tier_workload_share: BTreeMap<NodeTier, f64>,
}

/// Network term: sum of per-Gb/s cost over carried traffic, plus idle power
/// of every active network node scaled by its idle-share factor.
pub fn network_power(topology: &Topology, state: &DerivedState) -> Result<(f64, f64)> {
    let mut proportional = 0.0;
    let mut idle = 0.0;
    for (idx, node) in topology.nodes() {
        let lambda = state.lambda_n[idx.0];
        match &node.network {
            Some(net) => {
                proportional += net.energy_per_gbps * lambda;
                if state.beta_n[idx.0] {
                    idle += net.idle_power * net.delta;
                }
            }
            None if lambda > 0.0 => {
                return Err(Error::MissingNetworkProfile(node.id.clone()));
            }
            None => {}
        }
    }
    Ok((proportional, idle))
}

/// Processing terms: proportional and per-CPU idle server power, plus
/// proportional and idle LAN power. LAN idle is scaled by the hosting node's
/// idle-share factor.
pub fn processing_power(
    topology: &Topology,
    state: &DerivedState,
) -> Result<(f64, f64, f64, f64)> {
    let mut proportional = 0.0;
    let mut idle = 0.0;
    let mut lan_proportional = 0.0;
    let mut lan_idle = 0.0;
    for (idx, node) in topology.nodes() {
        let i = idx.0;
        match &node.processor {
            Some(proc) => {
                proportional += proc.energy_per_gflops * state.omega_p[i];
                idle += state.n_servers[i] as f64 * proc.cpu_idle_power;
                lan_proportional += proc.lan_energy_per_gbps * state.theta_p[i];
                if state.phi_p[i] {
                    let delta = node.network.as_ref().map(|net| net.delta).unwrap_or(1.0);
                    lan_idle += proc.lan_idle_power * delta;
                }
            }
            None if state.omega_p[i] > 0.0 || state.phi_p[i] => {
                return Err(Error::MissingProcessorProfile(node.id.clone()));
            }
            None => {}
        }
    }
    Ok((proportional, idle, lan_proportional, lan_idle))
}

/// Assembles the breakdown for an already-derived state.
pub fn breakdown_from_state(topology: &Topology, state: &DerivedState) -> Result<PowerBreakdown> {
    let (net_proportional, net_idle) = network_power(topology, state)?;
    let (proc_proportional, proc_idle, lan_proportional, lan_idle) =
        processing_power(topology, state)?;
    let placed: f64 = state.omega_p.iter().sum();
    let mut tier_workload_share: BTreeMap<NodeTier, f64> = [
        (NodeTier::IoTDevice, 0.0),
        (NodeTier::AccessFog, 0.0),
        (NodeTier::MetroFog, 0.0),
        (NodeTier::CloudDc, 0.0),
    ]
    .into_iter()
    .collect();
    if placed > 0.0 {
        for (idx, node) in topology.nodes() {
            if node.tier.can_process() {
                *tier_workload_share.entry(node.tier).or_insert(0.0) +=
                    state.omega_p[idx.0] / placed;
            }
        }
    }
    Ok(PowerBreakdown {
        net_proportional,
        net_idle,
        proc_proportional,
        proc_idle,
        lan_proportional,
        lan_idle,
        total: net_proportional
            + net_idle
            + proc_proportional
            + proc_idle
            + lan_proportional
            + lan_idle,
        tier_workload_share,
    })
}

/// Evaluates the objective for a feasible, total placement. Any constraint
/// violation is an error carrying the full violation list; no partial number
/// is ever returned.
pub fn evaluate(scenario: &Scenario, placement: &Placement) -> Result<PowerBreakdown> {
    let violations = check_constraints(scenario, placement)?;
    if !violations.is_empty() {
        return Err(Error::Infeasible(violations));
    }
    let state = derive_state(scenario, placement)?;
    breakdown_from_state(&scenario.topology, &state)
}

/// Evaluates a partial placement: unassigned VMs and their links are simply
/// absent from the sums. No feasibility gate beyond per-node CPU capacity.
pub fn evaluate_partial(scenario: &Scenario, placement: &Placement) -> Result<PowerBreakdown> {
    let state = derive_state(scenario, placement)?;
    breakdown_from_state(&scenario.topology, &state)
}
