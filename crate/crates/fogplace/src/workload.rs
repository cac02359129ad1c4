//! Virtual requests: chains of VMs with CPU demands and data-rate links,
//! plus the scenario container that ties them to a topology.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NodeTier, Topology};

/// One VM of a request. Identity is positional: (request id, vm index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualMachine {
    /// GFLOPS required to run this VM.
    pub cpu_demand: f64,
    /// Input-layer flag: pinned to the request's source node.
    #[serde(default)]
    pub is_input: bool,
}

/// Directed data exchange between two VMs of the same request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualLink {
    pub from_vm: usize,
    pub to_vm: usize,
    /// Gb/s.
    pub data_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualRequest {
    pub id: u32,
    pub vms: Vec<VirtualMachine>,
    pub links: Vec<VirtualLink>,
    /// IoT node that generates this request's input data.
    pub source_node: String,
}

impl VirtualRequest {
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::InvalidRequest {
            request: self.id,
            message,
        };
        if self.vms.is_empty() {
            return Err(fail("request has no VMs".into()));
        }
        let inputs = self.vms.iter().filter(|vm| vm.is_input).count();
        if inputs != 1 {
            return Err(fail(format!("expected exactly one input VM, found {inputs}")));
        }
        for (i, vm) in self.vms.iter().enumerate() {
            if !vm.cpu_demand.is_finite() || vm.cpu_demand < 0.0 {
                return Err(fail(format!(
                    "vm {i} has invalid cpu_demand {}",
                    vm.cpu_demand
                )));
            }
        }
        for link in &self.links {
            if link.from_vm >= self.vms.len() || link.to_vm >= self.vms.len() {
                return Err(fail(format!(
                    "link {} -> {} references a VM outside 0..{}",
                    link.from_vm,
                    link.to_vm,
                    self.vms.len()
                )));
            }
            if link.from_vm == link.to_vm {
                return Err(fail(format!("link joins vm {} to itself", link.from_vm)));
            }
            if !link.data_rate.is_finite() || link.data_rate < 0.0 {
                return Err(fail(format!(
                    "link {} -> {} has invalid data_rate {}",
                    link.from_vm, link.to_vm, link.data_rate
                )));
            }
        }
        if !self.is_connected() {
            return Err(fail("link graph does not connect all VMs".into()));
        }
        Ok(())
    }

    /// Connectivity of the undirected link graph over all VMs.
    fn is_connected(&self) -> bool {
        let n = self.vms.len();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for link in &self.links {
                for (a, b) in [(link.from_vm, link.to_vm), (link.to_vm, link.from_vm)] {
                    if a == v && !seen[b] {
                        seen[b] = true;
                        count += 1;
                        stack.push(b);
                    }
                }
            }
        }
        count == n
    }

    pub fn input_vm(&self) -> usize {
        self.vms
            .iter()
            .position(|vm| vm.is_input)
            .expect("validated request has an input VM")
    }
}

/// Parameters of the random request generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RequestParams {
    pub count: u32,
    pub vm_count_range: (u32, u32),
    pub demand_range_gflops: (f64, f64),
    pub default_data_rate: f64,
    pub source: String,
    /// Demand assigned to input VMs.
    pub input_demand: f64,
}

impl Default for RequestParams {
    fn default() -> Self {
        RequestParams {
            count: 15,
            vm_count_range: (4, 5),
            demand_range_gflops: (0.6, 10.0),
            default_data_rate: 0.1,
            source: "iot_z1_d1".to_string(),
            input_demand: 0.0,
        }
    }
}

/// Deterministically generates `params.count` chain requests: vm 0 is the
/// input layer at the source, the rest carry uniform demands and are joined
/// input -> vm1 -> ... -> last at the default data rate.
pub fn generate_requests(
    topology: &Topology,
    seed: u64,
    params: &RequestParams,
) -> Result<Vec<VirtualRequest>> {
    if params.count < 1 {
        return Err(Error::InvalidConfig("request count must be at least 1".into()));
    }
    let (vm_lo, vm_hi) = params.vm_count_range;
    if vm_lo < 1 || vm_lo > vm_hi {
        return Err(Error::InvalidConfig(format!(
            "vm count range [{vm_lo}, {vm_hi}] is empty or starts below 1"
        )));
    }
    let (d_lo, d_hi) = params.demand_range_gflops;
    if !d_lo.is_finite() || !d_hi.is_finite() || d_lo <= 0.0 || d_lo > d_hi {
        return Err(Error::InvalidConfig(format!(
            "demand range [{d_lo}, {d_hi}] is empty or starts at or below 0"
        )));
    }
    if !params.default_data_rate.is_finite() || params.default_data_rate < 0.0 {
        return Err(Error::InvalidConfig(
            "default data rate must be non-negative".into(),
        ));
    }
    let source_idx = topology.require_node(&params.source)?;
    if topology.node(source_idx).tier != NodeTier::IoTDevice {
        return Err(Error::InvalidConfig(format!(
            "source `{}` is not an IoT device",
            params.source
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut requests = Vec::with_capacity(params.count as usize);
    for id in 0..params.count {
        let n = rng.gen_range(vm_lo..=vm_hi) as usize;
        let mut vms = Vec::with_capacity(n);
        vms.push(VirtualMachine {
            cpu_demand: params.input_demand,
            is_input: true,
        });
        for _ in 1..n {
            vms.push(VirtualMachine {
                cpu_demand: rng.gen_range(d_lo..=d_hi),
                is_input: false,
            });
        }
        let links = (1..n)
            .map(|i| VirtualLink {
                from_vm: i - 1,
                to_vm: i,
                data_rate: params.default_data_rate,
            })
            .collect();
        let request = VirtualRequest {
            id,
            vms,
            links,
            source_node: params.source.clone(),
        };
        request.validate()?;
        requests.push(request);
    }
    Ok(requests)
}

/// Sum of all non-input CPU demands, GFLOPS.
pub fn total_demand(requests: &[VirtualRequest]) -> f64 {
    requests
        .iter()
        .flat_map(|r| r.vms.iter())
        .filter(|vm| !vm.is_input)
        .map(|vm| vm.cpu_demand)
        .sum()
}

/// A topology plus the requests to embed on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "ScenarioDoc")]
pub struct Scenario {
    pub topology: Topology,
    pub requests: Vec<VirtualRequest>,
    /// Per-IoT VM cap for non-source devices.
    pub k: u32,
    /// Idle-share factor to force onto shared tiers, if set.
    pub delta_override: Option<f64>,
}

impl Scenario {
    /// Validates requests against the topology and applies the delta
    /// override. Application is idempotent, so reloading a saved scenario
    /// reproduces it exactly.
    pub fn new(
        topology: Topology,
        requests: Vec<VirtualRequest>,
        k: u32,
        delta_override: Option<f64>,
    ) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidScenario {
                field: "k".into(),
                message: "per-IoT VM cap must be at least 1".into(),
            });
        }
        let topology = match delta_override {
            Some(delta) => topology.with_delta(delta).map_err(|e| Error::InvalidScenario {
                field: "delta_override".into(),
                message: e.to_string(),
            })?,
            None => topology,
        };
        let mut seen_ids = std::collections::BTreeSet::new();
        for request in &requests {
            request.validate()?;
            if !seen_ids.insert(request.id) {
                return Err(Error::InvalidScenario {
                    field: "requests".into(),
                    message: format!("duplicate request id {}", request.id),
                });
            }
            let idx = topology.require_node(&request.source_node)?;
            if !topology.node(idx).is_source {
                return Err(Error::InvalidScenario {
                    field: "requests".into(),
                    message: format!(
                        "request {} names source `{}` which is not flagged as a source node",
                        request.id, request.source_node
                    ),
                });
            }
        }
        Ok(Scenario {
            topology,
            requests,
            k,
            delta_override,
        })
    }

    pub fn total_demand(&self) -> f64 {
        total_demand(&self.requests)
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    topology: Topology,
    requests: Vec<VirtualRequest>,
    k: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta_override: Option<f64>,
}

impl From<Scenario> for ScenarioDoc {
    fn from(s: Scenario) -> Self {
        ScenarioDoc {
            topology: s.topology,
            requests: s.requests,
            k: s.k,
            delta_override: s.delta_override,
        }
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = ScenarioDoc::deserialize(deserializer)?;
        Scenario::new(doc.topology, doc.requests, doc.k, doc.delta_override)
            .map_err(serde::de::Error::custom)
    }
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(scenario)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
