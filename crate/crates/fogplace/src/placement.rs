//! Placement representation, feasibility checking and derivation of all
//! per-node quantities (traffic, workload, server counts, activation flags)
//! that the power model consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{aggregate_node_traffic, NodeIdx, NodeTier, TrafficMatrix};
use crate::workload::Scenario;

/// Assignment of every VM to a processing node. Entries are positional:
/// outer index follows `scenario.requests`, inner index the request's VMs.
/// `None` marks a VM not yet assigned (solvers work on partial placements;
/// a feasible placement has no `None` left).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    assignment: Vec<Vec<Option<NodeIdx>>>,
}

impl Placement {
    /// All VMs unassigned except input VMs, which are pinned to their
    /// request's source node.
    pub fn pinned(scenario: &Scenario) -> Result<Placement> {
        let mut assignment = Vec::with_capacity(scenario.requests.len());
        for request in &scenario.requests {
            let source = scenario.topology.require_node(&request.source_node)?;
            let mut row = vec![None; request.vms.len()];
            for (v, vm) in request.vms.iter().enumerate() {
                if vm.is_input {
                    row[v] = Some(source);
                }
            }
            assignment.push(row);
        }
        Ok(Placement { assignment })
    }

    pub fn get(&self, request: usize, vm: usize) -> Option<NodeIdx> {
        self.assignment[request][vm]
    }

    pub fn set(&mut self, request: usize, vm: usize, node: Option<NodeIdx>) {
        self.assignment[request][vm] = node;
    }

    pub fn is_total(&self) -> bool {
        self.assignment
            .iter()
            .all(|row| row.iter().all(|slot| slot.is_some()))
    }

    /// All assigned (request, vm, node) triples in request/vm order.
    pub fn iter_assigned(&self) -> impl Iterator<Item = (usize, usize, NodeIdx)> + '_ {
        self.assignment.iter().enumerate().flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(v, slot)| slot.map(|n| (r, v, n)))
        })
    }

    /// Flat host list for reports and placement files.
    pub fn to_rows(&self, scenario: &Scenario) -> Vec<PlacementRow> {
        self.iter_assigned()
            .map(|(r, v, n)| PlacementRow {
                request: scenario.requests[r].id,
                vm: v,
                node: scenario.topology.node(n).id.clone(),
            })
            .collect()
    }

    pub fn from_rows(scenario: &Scenario, rows: &[PlacementRow]) -> Result<Placement> {
        let mut assignment: Vec<Vec<Option<NodeIdx>>> = scenario
            .requests
            .iter()
            .map(|r| vec![None; r.vms.len()])
            .collect();
        for row in rows {
            let r = scenario
                .requests
                .iter()
                .position(|req| req.id == row.request)
                .ok_or_else(|| Error::Document(format!("unknown request id {}", row.request)))?;
            if row.vm >= scenario.requests[r].vms.len() {
                return Err(Error::Document(format!(
                    "request {} has no vm {}",
                    row.request, row.vm
                )));
            }
            let node = scenario.topology.require_node(&row.node)?;
            assignment[r][row.vm] = Some(node);
        }
        Ok(Placement { assignment })
    }
}

/// One line of a placement document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRow {
    pub request: u32,
    pub vm: usize,
    pub node: String,
}

/// A feasibility defect. Violations are data: checking never fails, it
/// reports.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("vm {vm} of request {request} is unassigned")]
    UnassignedVm { request: u32, vm: usize },

    #[error("input vm {vm} of request {request} sits on `{node}` instead of its source `{source_node}`")]
    InputNotAtSource {
        request: u32,
        vm: usize,
        node: String,
        source_node: String,
    },

    #[error("vm {vm} of request {request} is placed on `{node}`, which cannot host VMs")]
    NonProcessingHost { request: u32, vm: usize, node: String },

    #[error("IoT node `{node}` holds {placed} VMs, cap is {cap}")]
    VmCapExceeded { node: String, placed: usize, cap: u32 },

    #[error("`{node}` needs {needed} CPUs for its workload, only {max} deployed")]
    CpuCapacityExceeded { node: String, needed: u32, max: u32 },

    #[error("`{node}` carries {carried:.3} Gb/s, capacity {capacity:.3} Gb/s")]
    NodeTrafficExceeded {
        node: String,
        carried: f64,
        capacity: f64,
    },

    #[error("link `{a}` - `{b}` carries {carried:.3} Gb/s, capacity {capacity:.3} Gb/s")]
    LinkTrafficExceeded {
        a: String,
        b: String,
        carried: f64,
        capacity: f64,
    },
}

/// Everything the power model needs, derived from one placement. All vectors
/// are indexed by node; entries for tiers a quantity does not apply to are
/// zero/false.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedState {
    pub traffic: TrafficMatrix,
    /// Gb/s aggregated by each node (every flow counts once per node on its
    /// route, endpoints included).
    pub lambda_n: Vec<f64>,
    /// Network-activation flags.
    pub beta_n: Vec<bool>,
    /// GFLOPS allocated per processing node.
    pub omega_p: Vec<f64>,
    /// Gb/s entering plus leaving each processing node.
    pub theta_p: Vec<f64>,
    /// Activated CPUs per processing node.
    pub n_servers: Vec<u32>,
    /// Processing-activation flags (any VM placed, even zero-demand).
    pub phi_p: Vec<bool>,
}

/// Aggregates virtual-link rates into node-pair demands. Links between
/// colocated VMs contribute nothing; links with an unassigned endpoint are
/// skipped (they belong to no traffic yet).
pub fn traffic_from_placement(scenario: &Scenario, placement: &Placement) -> Result<TrafficMatrix> {
    let mut traffic = TrafficMatrix::new();
    for (r, request) in scenario.requests.iter().enumerate() {
        for link in &request.links {
            let (Some(b), Some(e)) = (
                placement.get(r, link.from_vm),
                placement.get(r, link.to_vm),
            ) else {
                continue;
            };
            if b != e {
                traffic.add(b, e, link.data_rate)?;
            }
        }
    }
    Ok(traffic)
}

/// Per-node GFLOPS for the assigned VMs.
fn workload_per_node(scenario: &Scenario, placement: &Placement) -> Vec<f64> {
    let mut omega = vec![0.0; scenario.topology.len()];
    for (r, v, node) in placement.iter_assigned() {
        omega[node.0] += scenario.requests[r].vms[v].cpu_demand;
    }
    omega
}

fn servers_needed(omega: f64, cpu_capacity: f64) -> u32 {
    if omega <= 0.0 {
        0
    } else {
        (omega / cpu_capacity).ceil() as u32
    }
}

/// Computes all derived quantities. Errors on hosts without processor
/// profiles and on CPU over-allocation; bitrate overloads are reported by
/// `check_constraints`, not here.
pub fn derive_state(scenario: &Scenario, placement: &Placement) -> Result<DerivedState> {
    let topo = &scenario.topology;
    let n = topo.len();
    let mut phi_p = vec![false; n];
    for (_, _, node) in placement.iter_assigned() {
        if topo.node(node).processor.is_none() {
            return Err(Error::MissingProcessorProfile(topo.node(node).id.clone()));
        }
        phi_p[node.0] = true;
    }
    let omega_p = workload_per_node(scenario, placement);
    let mut n_servers = vec![0u32; n];
    for (idx, node) in topo.nodes() {
        if let Some(proc) = &node.processor {
            let needed = servers_needed(omega_p[idx.0], proc.cpu_capacity_gflops);
            if needed > proc.max_cpus {
                return Err(Error::CapacityExceeded {
                    node: node.id.clone(),
                    needed,
                    max: proc.max_cpus,
                });
            }
            n_servers[idx.0] = needed;
        }
    }
    let traffic = traffic_from_placement(scenario, placement)?;
    let lambda_n = aggregate_node_traffic(topo, &traffic)?;
    let mut theta_p = vec![0.0; n];
    for (b, e, rate) in traffic.iter() {
        theta_p[b.0] += rate;
        theta_p[e.0] += rate;
    }
    let mut beta_n = vec![false; n];
    for (idx, node) in topo.nodes() {
        beta_n[idx.0] = lambda_n[idx.0] > 0.0
            || (phi_p[idx.0] && theta_p[idx.0] > 0.0)
            || node.is_source;
    }
    Ok(DerivedState {
        traffic,
        lambda_n,
        beta_n,
        omega_p,
        theta_p,
        n_servers,
        phi_p,
    })
}

/// Checks every placement rule and capacity limit. Empty result means
/// feasible.
pub fn check_constraints(scenario: &Scenario, placement: &Placement) -> Result<Vec<Violation>> {
    let topo = &scenario.topology;
    let mut violations = Vec::new();

    // Totality, input pinning, host eligibility.
    for (r, request) in scenario.requests.iter().enumerate() {
        let source = topo.require_node(&request.source_node)?;
        for (v, vm) in request.vms.iter().enumerate() {
            match placement.get(r, v) {
                None => violations.push(Violation::UnassignedVm {
                    request: request.id,
                    vm: v,
                }),
                Some(node) => {
                    if vm.is_input && node != source {
                        violations.push(Violation::InputNotAtSource {
                            request: request.id,
                            vm: v,
                            node: topo.node(node).id.clone(),
                            source_node: request.source_node.clone(),
                        });
                    }
                    if !topo.node(node).tier.can_process() {
                        violations.push(Violation::NonProcessingHost {
                            request: request.id,
                            vm: v,
                            node: topo.node(node).id.clone(),
                        });
                    }
                }
            }
        }
    }

    // Per-IoT VM cap; source devices are exempt.
    let mut vm_counts = vec![0usize; topo.len()];
    for (_, _, node) in placement.iter_assigned() {
        vm_counts[node.0] += 1;
    }
    for (idx, node) in topo.nodes() {
        if node.tier == NodeTier::IoTDevice
            && !node.is_source
            && vm_counts[idx.0] > scenario.k as usize
        {
            violations.push(Violation::VmCapExceeded {
                node: node.id.clone(),
                placed: vm_counts[idx.0],
                cap: scenario.k,
            });
        }
    }

    // CPU capacity.
    let omega = workload_per_node(scenario, placement);
    for (idx, node) in topo.nodes() {
        if let Some(proc) = &node.processor {
            let needed = servers_needed(omega[idx.0], proc.cpu_capacity_gflops);
            if needed > proc.max_cpus {
                violations.push(Violation::CpuCapacityExceeded {
                    node: node.id.clone(),
                    needed,
                    max: proc.max_cpus,
                });
            }
        }
    }

    // Bitrate capacities, per node and per link. Link capacity is the
    // smaller endpoint capacity (port speed bounds the span). Skipped when
    // a VM sits on a non-processing node: no route is defined for it.
    if violations
        .iter()
        .any(|v| matches!(v, Violation::NonProcessingHost { .. }))
    {
        return Ok(violations);
    }
    let traffic = traffic_from_placement(scenario, placement)?;
    let lambda = aggregate_node_traffic(topo, &traffic)?;
    for (idx, node) in topo.nodes() {
        let capacity = node
            .network
            .as_ref()
            .map(|net| net.bitrate_capacity)
            .unwrap_or(0.0);
        if lambda[idx.0] > capacity {
            violations.push(Violation::NodeTrafficExceeded {
                node: node.id.clone(),
                carried: lambda[idx.0],
                capacity,
            });
        }
    }
    let mut link_load = std::collections::BTreeMap::new();
    for (b, e, rate) in traffic.iter() {
        for pair in topo.route(b, e)?.windows(2) {
            let key = if pair[0] <= pair[1] {
                (pair[0], pair[1])
            } else {
                (pair[1], pair[0])
            };
            *link_load.entry(key).or_insert(0.0) += rate;
        }
    }
    for ((a, b), load) in link_load {
        let cap = |idx: NodeIdx| {
            topo.node(idx)
                .network
                .as_ref()
                .map(|net| net.bitrate_capacity)
        };
        let capacity = match (cap(a), cap(b)) {
            (Some(x), Some(y)) => x.min(y),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => continue,
        };
        if load > capacity {
            violations.push(Violation::LinkTrafficExceeded {
                a: topo.node(a).id.clone(),
                b: topo.node(b).id.clone(),
                carried: load,
                capacity,
            });
        }
    }

    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{build_reference_topology, ReferenceConfig};
    use crate::topology::Topology;
    use crate::workload::{VirtualLink, VirtualMachine, VirtualRequest};

    fn topo() -> Topology {
        build_reference_topology(&ReferenceConfig::default()).unwrap()
    }

    /// One request: input plus `demands`, chained at 0.1 Gb/s.
    fn chain_request(id: u32, demands: &[f64]) -> VirtualRequest {
        let mut vms = vec![VirtualMachine {
            cpu_demand: 0.0,
            is_input: true,
        }];
        vms.extend(demands.iter().map(|&d| VirtualMachine {
            cpu_demand: d,
            is_input: false,
        }));
        let links = (1..vms.len())
            .map(|i| VirtualLink {
                from_vm: i - 1,
                to_vm: i,
                data_rate: 0.1,
            })
            .collect();
        VirtualRequest {
            id,
            vms,
            links,
            source_node: "iot_z1_d1".to_string(),
        }
    }

    fn scenario(k: u32, requests: Vec<VirtualRequest>) -> Scenario {
        Scenario::new(topo(), requests, k, None).unwrap()
    }

    #[test]
    fn single_vm_on_iot_derives_one_server() {
        let s = scenario(2, vec![chain_request(0, &[10.0])]);
        let mut p = Placement::pinned(&s).unwrap();
        p.set(0, 1, s.topology.node_index("iot_z1_d1"));
        let state = derive_state(&s, &p).unwrap();
        let src = s.topology.node_index("iot_z1_d1").unwrap();
        assert_eq!(state.omega_p[src.0], 10.0);
        assert_eq!(state.n_servers[src.0], 1);
        assert!(state.phi_p[src.0]);
    }

    #[test]
    fn workload_beyond_cpu_count_is_a_capacity_error() {
        let mut cfg = ReferenceConfig::default();
        cfg.profiles.iot_cpu.max_cpus = 1;
        let topology = build_reference_topology(&cfg).unwrap();
        let s = Scenario::new(topology, vec![chain_request(0, &[10.0, 10.0])], 5, None).unwrap();
        let mut p = Placement::pinned(&s).unwrap();
        let src = s.topology.node_index("iot_z1_d1");
        p.set(0, 1, src);
        p.set(0, 2, src);
        // ceil(20 / 13.5) = 2 CPUs needed, 1 deployed.
        assert!(matches!(
            derive_state(&s, &p),
            Err(Error::CapacityExceeded { needed: 2, max: 1, .. })
        ));
        let violations = check_constraints(&s, &p).unwrap();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::CpuCapacityExceeded { needed: 2, max: 1, .. })));
    }

    #[test]
    fn zero_demand_input_activates_without_servers() {
        let s = scenario(1, vec![chain_request(0, &[])]);
        let p = Placement::pinned(&s).unwrap();
        let state = derive_state(&s, &p).unwrap();
        let src = s.topology.node_index("iot_z1_d1").unwrap();
        assert_eq!(state.omega_p[src.0], 0.0);
        assert_eq!(state.n_servers[src.0], 0);
        assert!(state.phi_p[src.0]);
        assert!(state.beta_n[src.0], "source stays active");
        assert!(state.traffic.is_empty());
    }

    #[test]
    fn colocated_request_produces_no_traffic() {
        let s = scenario(5, vec![chain_request(0, &[1.0, 2.0])]);
        let mut p = Placement::pinned(&s).unwrap();
        let src = s.topology.node_index("iot_z1_d1");
        p.set(0, 1, src);
        p.set(0, 2, src);
        let traffic = traffic_from_placement(&s, &p).unwrap();
        assert!(traffic.is_empty());
    }

    #[test]
    fn split_chain_yields_single_pair_demand() {
        let s = scenario(1, vec![chain_request(0, &[1.0, 2.0])]);
        let mut p = Placement::pinned(&s).unwrap();
        let afn = s.topology.node_index("afn");
        p.set(0, 1, afn);
        p.set(0, 2, afn);
        let traffic = traffic_from_placement(&s, &p).unwrap();
        // input -> vm1 crosses IoT -> AFN; vm1 -> vm2 is colocated.
        assert_eq!(traffic.len(), 1);
        let src = s.topology.node_index("iot_z1_d1").unwrap();
        assert!((traffic.get(src, afn.unwrap()) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn parallel_links_add_their_rates() {
        let mut request = chain_request(0, &[1.0]);
        request.links.push(VirtualLink {
            from_vm: 0,
            to_vm: 1,
            data_rate: 0.25,
        });
        let s = scenario(1, vec![request]);
        let mut p = Placement::pinned(&s).unwrap();
        let afn = s.topology.node_index("afn");
        p.set(0, 1, afn);
        let traffic = traffic_from_placement(&s, &p).unwrap();
        let src = s.topology.node_index("iot_z1_d1").unwrap();
        assert!((traffic.get(src, afn.unwrap()) - 0.35).abs() < 1e-12);
    }

    #[test]
    fn theta_counts_both_directions() {
        let s = scenario(
            1,
            vec![{
                let mut r = chain_request(0, &[1.0, 2.0]);
                // input -> vm1 -> vm2 with vm1 remote: vm1 sees both links.
                r.links[0].data_rate = 0.4;
                r.links[1].data_rate = 0.3;
                r
            }],
        );
        let mut p = Placement::pinned(&s).unwrap();
        let src = s.topology.node_index("iot_z1_d1");
        let afn = s.topology.node_index("afn");
        p.set(0, 1, afn);
        p.set(0, 2, src);
        let state = derive_state(&s, &p).unwrap();
        assert!((state.theta_p[afn.unwrap().0] - 0.7).abs() < 1e-12);
        assert!((state.theta_p[src.unwrap().0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn unassigned_vm_is_reported() {
        let s = scenario(1, vec![chain_request(0, &[5.0])]);
        let p = Placement::pinned(&s).unwrap();
        let violations = check_constraints(&s, &p).unwrap();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::UnassignedVm { request: 0, vm: 1 })));
    }

    #[test]
    fn iot_cap_binds_non_source_devices_only() {
        let s = scenario(1, vec![chain_request(0, &[1.0, 1.0])]);
        let mut p = Placement::pinned(&s).unwrap();
        let other = s.topology.node_index("iot_z2_d1");
        p.set(0, 1, other);
        p.set(0, 2, other);
        let violations = check_constraints(&s, &p).unwrap();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::VmCapExceeded { placed: 2, cap: 1, .. })));

        // Same load on the source device: exempt from the cap.
        let mut p = Placement::pinned(&s).unwrap();
        let src = s.topology.node_index("iot_z1_d1");
        p.set(0, 1, src);
        p.set(0, 2, src);
        let violations = check_constraints(&s, &p).unwrap();
        assert!(violations.is_empty(), "violations: {violations:?}");
    }

    #[test]
    fn input_vm_off_source_is_reported() {
        let s = scenario(1, vec![chain_request(0, &[5.0])]);
        let mut p = Placement::pinned(&s).unwrap();
        p.set(0, 0, s.topology.node_index("afn"));
        p.set(0, 1, s.topology.node_index("afn"));
        let violations = check_constraints(&s, &p).unwrap();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::InputNotAtSource { request: 0, vm: 0, .. })));
    }

    #[test]
    fn non_processing_host_is_reported() {
        let s = scenario(1, vec![chain_request(0, &[5.0])]);
        let mut p = Placement::pinned(&s).unwrap();
        p.set(0, 1, s.topology.node_index("olt"));
        let violations = check_constraints(&s, &p).unwrap();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::NonProcessingHost { .. })));
    }

    #[test]
    fn workload_is_conserved_across_nodes() {
        let s = scenario(
            2,
            vec![chain_request(0, &[4.0, 7.5]), chain_request(1, &[2.5])],
        );
        let mut p = Placement::pinned(&s).unwrap();
        p.set(0, 1, s.topology.node_index("afn"));
        p.set(0, 2, s.topology.node_index("cloud"));
        p.set(1, 1, s.topology.node_index("mfn"));
        let state = derive_state(&s, &p).unwrap();
        let placed: f64 = state.omega_p.iter().sum();
        assert!((placed - s.total_demand()).abs() < 1e-12);
    }

    #[test]
    fn placement_rows_round_trip() {
        let s = scenario(2, vec![chain_request(0, &[4.0, 7.5])]);
        let mut p = Placement::pinned(&s).unwrap();
        p.set(0, 1, s.topology.node_index("afn"));
        p.set(0, 2, s.topology.node_index("mfn"));
        let rows = p.to_rows(&s);
        assert_eq!(rows.len(), 3);
        let back = Placement::from_rows(&s, &rows).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn node_bitrate_overload_is_reported() {
        let mut cfg = ReferenceConfig::default();
        cfg.profiles.onu.bitrate_capacity = 0.05;
        let topology = build_reference_topology(&cfg).unwrap();
        let s = Scenario::new(topology, vec![chain_request(0, &[5.0])], 1, None).unwrap();
        let mut p = Placement::pinned(&s).unwrap();
        p.set(0, 1, s.topology.node_index("afn"));
        let violations = check_constraints(&s, &p).unwrap();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::NodeTrafficExceeded { .. })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::LinkTrafficExceeded { .. })));
    }
}
