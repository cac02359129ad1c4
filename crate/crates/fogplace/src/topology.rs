//! Physical network model: typed nodes with power profiles, tree routing and
//! per-node traffic aggregation.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a node sits in the IoT-to-cloud hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeTier {
    IoTDevice,
    OnuAp,
    Olt,
    AccessFog,
    MetroSwitch,
    MetroRouter,
    MetroFog,
    CoreNode,
    CloudDc,
}

impl NodeTier {
    /// Tiers that may host VMs.
    pub fn can_process(self) -> bool {
        matches!(
            self,
            NodeTier::IoTDevice | NodeTier::AccessFog | NodeTier::MetroFog | NodeTier::CloudDc
        )
    }

    /// Tiers whose idle-power share scales with the configured proportion
    /// factor (highly shared transport gear, plus cloud/metro-fog LAN).
    pub fn delta_shared(self) -> bool {
        matches!(
            self,
            NodeTier::Olt
                | NodeTier::MetroSwitch
                | NodeTier::MetroRouter
                | NodeTier::CoreNode
                | NodeTier::MetroFog
                | NodeTier::CloudDc
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            NodeTier::IoTDevice => "iot",
            NodeTier::OnuAp => "onu_ap",
            NodeTier::Olt => "olt",
            NodeTier::AccessFog => "access_fog",
            NodeTier::MetroSwitch => "metro_switch",
            NodeTier::MetroRouter => "metro_router",
            NodeTier::MetroFog => "metro_fog",
            NodeTier::CoreNode => "core",
            NodeTier::CloudDc => "cloud",
        }
    }
}

/// Power and capacity figures for a node's networking equipment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    /// Proportional energy cost, W per Gb/s carried.
    pub energy_per_gbps: f64,
    /// Idle power drawn while the node is active, W.
    pub idle_power: f64,
    /// Traffic the node can carry, Gb/s.
    pub bitrate_capacity: f64,
    /// Fraction of the idle power attributed to this application, in (0, 1].
    pub delta: f64,
}

impl NetworkProfile {
    pub fn validate(&self) -> Result<()> {
        if self.energy_per_gbps < 0.0 || self.idle_power < 0.0 {
            return Err(Error::InvalidConfig(
                "network power figures must be non-negative".into(),
            ));
        }
        if self.bitrate_capacity <= 0.0 {
            return Err(Error::InvalidConfig(
                "bitrate capacity must be positive".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Power and capacity figures for a node's CPUs and server-side LAN gear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessorProfile {
    /// Proportional energy cost, W per GFLOPS of allocated workload.
    pub energy_per_gflops: f64,
    /// Idle power per activated CPU, W.
    pub cpu_idle_power: f64,
    /// Capacity of a single CPU, GFLOPS.
    pub cpu_capacity_gflops: f64,
    /// Number of CPUs deployed at the node.
    pub max_cpus: u32,
    /// Proportional LAN energy cost, W per Gb/s entering or leaving.
    #[serde(default)]
    pub lan_energy_per_gbps: f64,
    /// Idle power of the node's LAN equipment, W.
    #[serde(default)]
    pub lan_idle_power: f64,
}

impl ProcessorProfile {
    pub fn total_capacity_gflops(&self) -> f64 {
        self.max_cpus as f64 * self.cpu_capacity_gflops
    }

    pub fn validate(&self) -> Result<()> {
        if self.energy_per_gflops < 0.0
            || self.cpu_idle_power < 0.0
            || self.lan_energy_per_gbps < 0.0
            || self.lan_idle_power < 0.0
        {
            return Err(Error::InvalidConfig(
                "processor power figures must be non-negative".into(),
            ));
        }
        if self.cpu_capacity_gflops <= 0.0 {
            return Err(Error::InvalidConfig(
                "CPU capacity must be positive".into(),
            ));
        }
        if self.max_cpus < 1 {
            return Err(Error::InvalidConfig("max_cpus must be at least 1".into()));
        }
        Ok(())
    }
}

/// A physical node. Processing nodes carry a processor profile; anything that
/// can carry traffic carries a network profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub tier: NodeTier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub processor: Option<ProcessorProfile>,
    #[serde(default)]
    pub is_source: bool,
}

impl Node {
    fn validate(&self) -> Result<()> {
        if self.processor.is_some() != self.tier.can_process() {
            return Err(Error::InvalidTopology(format!(
                "node `{}` ({:?}): processor profile present iff tier is a processing tier",
                self.id, self.tier
            )));
        }
        if self.is_source && self.tier != NodeTier::IoTDevice {
            return Err(Error::InvalidTopology(format!(
                "node `{}` is flagged as a source but is not an IoT device",
                self.id
            )));
        }
        if self.zone.is_some()
            && !matches!(self.tier, NodeTier::IoTDevice | NodeTier::OnuAp)
        {
            return Err(Error::InvalidTopology(format!(
                "node `{}` carries a zone index but is not an IoT device or ONU AP",
                self.id
            )));
        }
        if let Some(net) = &self.network {
            net.validate()?;
        }
        if let Some(proc) = &self.processor {
            proc.validate()?;
        }
        Ok(())
    }
}

/// Index of a node within its topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeIdx(pub usize);

/// Traffic demands between ordered pairs of processing nodes, Gb/s.
///
/// Entries are strictly positive; a zero-rate or colocated exchange simply has
/// no entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficMatrix {
    rates: BTreeMap<(NodeIdx, NodeIdx), f64>,
}

impl TrafficMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `rate` to the demand from `b` to `e`. Zero rates are dropped.
    pub fn add(&mut self, b: NodeIdx, e: NodeIdx, rate: f64) -> Result<()> {
        if b == e {
            return Err(Error::InvalidConfig(format!(
                "traffic demand must join distinct nodes (got index {} twice)",
                b.0
            )));
        }
        if rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "traffic rate must be non-negative, got {rate}"
            )));
        }
        if rate > 0.0 {
            *self.rates.entry((b, e)).or_insert(0.0) += rate;
        }
        Ok(())
    }

    pub fn get(&self, b: NodeIdx, e: NodeIdx) -> f64 {
        self.rates.get(&(b, e)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx, f64)> + '_ {
        self.rates.iter().map(|(&(b, e), &r)| (b, e, r))
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    /// Total demand incident to `p` (entering plus leaving).
    pub fn incident(&self, p: NodeIdx) -> f64 {
        self.iter()
            .filter(|&(b, e, _)| b == p || e == p)
            .map(|(_, _, r)| r)
            .sum()
    }
}

/// The physical graph. Immutable after construction; all operations are
/// read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<(NodeIdx, NodeIdx)>,
    adjacency: Vec<Vec<NodeIdx>>,
    index: HashMap<String, NodeIdx>,
    unique_path: bool,
}

impl Topology {
    /// Builds a topology from nodes and undirected links, checking node
    /// invariants and connectivity. With `unique_path` set the graph must be
    /// a tree.
    pub fn new(nodes: Vec<Node>, links: Vec<(String, String)>, unique_path: bool) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidTopology("topology has no nodes".into()));
        }
        let mut index = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            node.validate()?;
            if index.insert(node.id.clone(), NodeIdx(i)).is_some() {
                return Err(Error::InvalidTopology(format!(
                    "duplicate node id `{}`",
                    node.id
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut resolved = Vec::with_capacity(links.len());
        for (a, b) in &links {
            let ai = *index.get(a).ok_or_else(|| Error::UnknownNode(a.clone()))?;
            let bi = *index.get(b).ok_or_else(|| Error::UnknownNode(b.clone()))?;
            if ai == bi {
                return Err(Error::InvalidTopology(format!("self-link at `{a}`")));
            }
            adjacency[ai.0].push(bi);
            adjacency[bi.0].push(ai);
            resolved.push((ai, bi));
        }
        let topo = Topology {
            nodes,
            links: resolved,
            adjacency,
            index,
            unique_path,
        };
        if !topo.is_connected() {
            return Err(Error::InvalidTopology("graph is not connected".into()));
        }
        if unique_path && topo.links.len() != topo.nodes.len() - 1 {
            return Err(Error::InvalidTopology(format!(
                "unique-path flag set but graph is not a tree ({} links, {} nodes)",
                topo.links.len(),
                topo.nodes.len()
            )));
        }
        Ok(topo)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, idx: NodeIdx) -> &Node {
        &self.nodes[idx.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeIdx, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeIdx(i), n))
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIdx> {
        self.index.get(id).copied()
    }

    pub fn require_node(&self, id: &str) -> Result<NodeIdx> {
        self.node_index(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn links(&self) -> &[(NodeIdx, NodeIdx)] {
        &self.links
    }

    pub fn neighbors(&self, idx: NodeIdx) -> &[NodeIdx] {
        &self.adjacency[idx.0]
    }

    /// Indices of all nodes that may host VMs, in node order.
    pub fn processing_nodes(&self) -> Vec<NodeIdx> {
        self.nodes()
            .filter(|(_, n)| n.tier.can_process())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn source_nodes(&self) -> Vec<NodeIdx> {
        self.nodes()
            .filter(|(_, n)| n.is_source)
            .map(|(i, _)| i)
            .collect()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([NodeIdx(0)]);
        seen[0] = true;
        let mut count = 1;
        while let Some(m) = queue.pop_front() {
            for &n in self.neighbors(m) {
                if !seen[n.0] {
                    seen[n.0] = true;
                    count += 1;
                    queue.push_back(n);
                }
            }
        }
        count == self.nodes.len()
    }

    /// Unique simple path from `b` to `e`, endpoints included.
    pub fn route(&self, b: NodeIdx, e: NodeIdx) -> Result<Vec<NodeIdx>> {
        if b.0 >= self.nodes.len() {
            return Err(Error::UnknownNode(format!("#{}", b.0)));
        }
        if e.0 >= self.nodes.len() {
            return Err(Error::UnknownNode(format!("#{}", e.0)));
        }
        if b == e {
            return Err(Error::DegenerateRoute(self.nodes[b.0].id.clone()));
        }
        // BFS from b; on a tree this yields the unique simple path.
        let mut parent: Vec<Option<NodeIdx>> = vec![None; self.nodes.len()];
        let mut seen = vec![false; self.nodes.len()];
        seen[b.0] = true;
        let mut queue = VecDeque::from([b]);
        while let Some(m) = queue.pop_front() {
            if m == e {
                break;
            }
            for &n in self.neighbors(m) {
                if !seen[n.0] {
                    seen[n.0] = true;
                    parent[n.0] = Some(m);
                    queue.push_back(n);
                }
            }
        }
        let mut path = vec![e];
        let mut cur = e;
        while let Some(p) = parent[cur.0] {
            path.push(p);
            cur = p;
        }
        if cur != b {
            return Err(Error::InvalidTopology(format!(
                "no path between `{}` and `{}`",
                self.nodes[b.0].id, self.nodes[e.0].id
            )));
        }
        path.reverse();
        Ok(path)
    }

    /// Same path as node ids, for reports.
    pub fn route_ids(&self, b: &str, e: &str) -> Result<Vec<String>> {
        let bi = self.require_node(b)?;
        let ei = self.require_node(e)?;
        Ok(self
            .route(bi, ei)?
            .into_iter()
            .map(|i| self.nodes[i.0].id.clone())
            .collect())
    }

    /// Returns a copy with the idle-share factor replaced on every
    /// delta-shared tier (transport gear plus cloud/metro-fog LAN). Access
    /// tiers keep their factor of 1.
    pub fn with_delta(&self, delta: f64) -> Result<Topology> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0, 1], got {delta}"
            )));
        }
        let mut topo = self.clone();
        for node in &mut topo.nodes {
            if node.tier.delta_shared() {
                if let Some(net) = &mut node.network {
                    net.delta = delta;
                }
            }
        }
        Ok(topo)
    }
}

/// Sums each demand onto every node along its route: source, intermediates
/// and destination each count the flow once.
pub fn aggregate_node_traffic(topo: &Topology, demands: &TrafficMatrix) -> Result<Vec<f64>> {
    let mut node_traffic = vec![0.0; topo.len()];
    for (b, e, rate) in demands.iter() {
        for &p in [b, e].iter() {
            if !topo.node(p).tier.can_process() {
                return Err(Error::NonProcessingEndpoint(topo.node(p).id.clone()));
            }
        }
        for idx in topo.route(b, e)? {
            node_traffic[idx.0] += rate;
        }
    }
    Ok(node_traffic)
}

/// Per-flow conservation audit: decomposes every demand over its route and
/// checks that the net divergence is +rate at the origin, -rate at the
/// destination and zero at intermediate nodes.
pub fn audit_flow_conservation(topo: &Topology, demands: &TrafficMatrix) -> Result<()> {
    for (b, e, rate) in demands.iter() {
        let path = topo.route(b, e)?;
        let mut divergence = vec![0.0; topo.len()];
        for pair in path.windows(2) {
            divergence[pair[0].0] += rate;
            divergence[pair[1].0] -= rate;
        }
        for (i, &div) in divergence.iter().enumerate() {
            let expected = if NodeIdx(i) == b {
                rate
            } else if NodeIdx(i) == e {
                -rate
            } else {
                0.0
            };
            if (div - expected).abs() > 1e-12 * rate.max(1.0) {
                return Err(Error::InvalidTopology(format!(
                    "flow {} -> {} violates conservation at `{}`: divergence {div}, expected {expected}",
                    topo.node(b).id,
                    topo.node(e).id,
                    topo.node(NodeIdx(i)).id
                )));
            }
        }
    }
    Ok(())
}

// Serialization goes through a flat document so links stay as id pairs.

#[derive(Serialize, Deserialize)]
struct TopologyDoc {
    nodes: Vec<Node>,
    links: Vec<(String, String)>,
    #[serde(default)]
    unique_path: bool,
}

impl Serialize for Topology {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = TopologyDoc {
            nodes: self.nodes.clone(),
            links: self
                .links
                .iter()
                .map(|&(a, b)| (self.nodes[a.0].id.clone(), self.nodes[b.0].id.clone()))
                .collect(),
            unique_path: self.unique_path,
        };
        doc.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Topology {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = TopologyDoc::deserialize(deserializer)?;
        Topology::new(doc.nodes, doc.links, doc.unique_path).map_err(serde::de::Error::custom)
    }
}
