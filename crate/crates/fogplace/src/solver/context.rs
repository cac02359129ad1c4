//! Shared solver machinery: a flattened view of the scenario with
//! precomputed routes, and an incrementally-maintained search state whose
//! journal allows bitwise-exact backtracking.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
#[cfg(test)]
use crate::placement::Placement;
use crate::topology::{NodeIdx, NodeTier};
use crate::workload::Scenario;

/// One VM with its links flattened to global indices.
#[derive(Debug, Clone)]
pub(crate) struct FlatVm {
    pub request: usize,
    pub vm: usize,
    pub demand: f64,
    pub is_input: bool,
    /// (other flat vm, data rate); undirected, both endpoints list the link.
    pub links: Vec<(usize, f64)>,
}

/// Immutable per-scenario data every solver shares.
pub(crate) struct EvalContext<'a> {
    pub scenario: &'a Scenario,
    pub vms: Vec<FlatVm>,
    /// Input VMs and their pinned source node.
    pub pinned: Vec<(usize, NodeIdx)>,
    /// Non-input VMs in descending-demand order (ties by flat index).
    pub free_desc: Vec<usize>,
    /// Nodes that may host VMs, ascending index.
    pub candidates: Vec<NodeIdx>,
    pub k: u32,
    // Per-node scalars, indexed by NodeIdx.0.
    pub eps: Vec<f64>,
    pub net_idle_delta: Vec<f64>,
    pub e_gflops: Vec<f64>,
    pub cpu_idle: Vec<f64>,
    pub cpu_cap: Vec<f64>,
    pub max_cpus: Vec<u32>,
    pub lan_eps: Vec<f64>,
    pub lan_idle_delta: Vec<f64>,
    pub bitrate_cap: Vec<f64>,
    pub can_process: Vec<bool>,
    pub is_source: Vec<bool>,
    pub iot_capped: Vec<bool>,
    /// routes[a][b]: unique path between processing nodes a and b.
    routes: Vec<Vec<Vec<NodeIdx>>>,
    /// Interchangeability classes for empty non-source IoT devices.
    pub sym_group: Vec<Option<usize>>,
}

impl<'a> EvalContext<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let topo = &scenario.topology;
        let n = topo.len();

        let mut vms = Vec::new();
        let mut offsets = Vec::with_capacity(scenario.requests.len());
        for (r, request) in scenario.requests.iter().enumerate() {
            offsets.push(vms.len());
            for (v, vm) in request.vms.iter().enumerate() {
                vms.push(FlatVm {
                    request: r,
                    vm: v,
                    demand: vm.cpu_demand,
                    is_input: vm.is_input,
                    links: Vec::new(),
                });
            }
        }
        for (r, request) in scenario.requests.iter().enumerate() {
            for link in &request.links {
                let a = offsets[r] + link.from_vm;
                let b = offsets[r] + link.to_vm;
                vms[a].links.push((b, link.data_rate));
                vms[b].links.push((a, link.data_rate));
            }
        }

        let mut pinned = Vec::new();
        for (flat, vm) in vms.iter().enumerate() {
            if vm.is_input {
                let source = topo.require_node(&scenario.requests[vm.request].source_node)?;
                pinned.push((flat, source));
            }
        }
        let mut free_desc: Vec<usize> = (0..vms.len()).filter(|&i| !vms[i].is_input).collect();
        free_desc.sort_by(|&a, &b| {
            vms[b]
                .demand
                .partial_cmp(&vms[a].demand)
                .unwrap()
                .then(a.cmp(&b))
        });

        let candidates = topo.processing_nodes();

        let mut eps = vec![0.0; n];
        let mut net_idle_delta = vec![0.0; n];
        let mut e_gflops = vec![0.0; n];
        let mut cpu_idle = vec![0.0; n];
        let mut cpu_cap = vec![1.0; n];
        let mut max_cpus = vec![0u32; n];
        let mut lan_eps = vec![0.0; n];
        let mut lan_idle_delta = vec![0.0; n];
        let mut bitrate_cap = vec![0.0; n];
        let mut can_process = vec![false; n];
        let mut is_source = vec![false; n];
        let mut iot_capped = vec![false; n];
        for (idx, node) in topo.nodes() {
            let i = idx.0;
            if let Some(net) = &node.network {
                eps[i] = net.energy_per_gbps;
                net_idle_delta[i] = net.idle_power * net.delta;
                bitrate_cap[i] = net.bitrate_capacity;
            }
            if let Some(proc) = &node.processor {
                let delta = node.network.as_ref().map(|net| net.delta).unwrap_or(1.0);
                e_gflops[i] = proc.energy_per_gflops;
                cpu_idle[i] = proc.cpu_idle_power;
                cpu_cap[i] = proc.cpu_capacity_gflops;
                max_cpus[i] = proc.max_cpus;
                lan_eps[i] = proc.lan_energy_per_gbps;
                lan_idle_delta[i] = proc.lan_idle_power * delta;
            }
            can_process[i] = node.tier.can_process();
            is_source[i] = node.is_source;
            iot_capped[i] = node.tier == NodeTier::IoTDevice && !node.is_source;
        }

        let mut routes = vec![vec![Vec::new(); n]; n];
        for &a in &candidates {
            for &b in &candidates {
                if a != b {
                    routes[a.0][b.0] = topo.route(a, b)?;
                }
            }
        }

        // Empty non-source IoT devices of one zone with identical profiles
        // are interchangeable: group them so branching can skip clones.
        let mut sym_group = vec![None; n];
        let mut groups: Vec<(Option<u32>, &crate::topology::Node)> = Vec::new();
        for (idx, node) in topo.nodes() {
            if node.tier != NodeTier::IoTDevice || node.is_source {
                continue;
            }
            let found = groups.iter().position(|(zone, probe)| {
                *zone == node.zone
                    && probe.network == node.network
                    && probe.processor == node.processor
            });
            let group = match found {
                Some(g) => g,
                None => {
                    groups.push((node.zone, node));
                    groups.len() - 1
                }
            };
            sym_group[idx.0] = Some(group);
        }

        Ok(EvalContext {
            scenario,
            vms,
            pinned,
            free_desc,
            candidates,
            k: scenario.k,
            eps,
            net_idle_delta,
            e_gflops,
            cpu_idle,
            cpu_cap,
            max_cpus,
            lan_eps,
            lan_idle_delta,
            bitrate_cap,
            can_process,
            is_source,
            iot_capped,
            routes,
            sym_group,
        })
    }

    pub fn route(&self, a: NodeIdx, b: NodeIdx) -> &[NodeIdx] {
        &self.routes[a.0][b.0]
    }

    pub fn node_count(&self) -> usize {
        self.eps.len()
    }
}

enum Change {
    Assign(usize, Option<NodeIdx>),
    Omega(usize, f64),
    VmCount(usize, u32),
    Lambda(usize, f64, u32),
    Theta(usize, f64),
    LinkLoad((usize, usize), Option<f64>),
}

/// Mutable search state. Every mutation is journaled; `undo_to` restores any
/// earlier watermark bit for bit, so deep backtracking accumulates no
/// floating-point drift.
pub(crate) struct SearchState {
    pub assignment: Vec<Option<NodeIdx>>,
    omega: Vec<f64>,
    vm_count: Vec<u32>,
    lambda: Vec<f64>,
    lambda_flows: Vec<u32>,
    theta: Vec<f64>,
    link_load: BTreeMap<(usize, usize), f64>,
    journal: Vec<Change>,
}

fn servers_needed(omega: f64, cpu_capacity: f64) -> u32 {
    if omega <= 0.0 {
        0
    } else {
        (omega / cpu_capacity).ceil() as u32
    }
}

impl SearchState {
    /// Fresh state with only the input VMs pinned. Errors if even the pinned
    /// assignments violate a capacity.
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        let mut state = SearchState {
            assignment: vec![None; ctx.vms.len()],
            omega: vec![0.0; ctx.node_count()],
            vm_count: vec![0; ctx.node_count()],
            lambda: vec![0.0; ctx.node_count()],
            lambda_flows: vec![0; ctx.node_count()],
            theta: vec![0.0; ctx.node_count()],
            link_load: BTreeMap::new(),
            journal: Vec::new(),
        };
        for &(vm, source) in &ctx.pinned {
            if !state.try_assign(ctx, vm, source) {
                return Err(Error::Infeasible(vec![]));
            }
        }
        state.journal.clear();
        Ok(state)
    }

    pub fn mark(&self) -> usize {
        self.journal.len()
    }

    pub fn undo_to(&mut self, mark: usize) {
        while self.journal.len() > mark {
            match self.journal.pop().unwrap() {
                Change::Assign(vm, old) => self.assignment[vm] = old,
                Change::Omega(node, old) => self.omega[node] = old,
                Change::VmCount(node, old) => self.vm_count[node] = old,
                Change::Lambda(node, old, old_flows) => {
                    self.lambda[node] = old;
                    self.lambda_flows[node] = old_flows;
                }
                Change::Theta(node, old) => self.theta[node] = old,
                Change::LinkLoad(key, old) => match old {
                    Some(value) => {
                        self.link_load.insert(key, value);
                    }
                    None => {
                        self.link_load.remove(&key);
                    }
                },
            }
        }
    }

    /// Capacity pre-check for assigning `vm` to `node`, without traffic.
    pub fn fits_node(&self, ctx: &EvalContext, vm: usize, node: NodeIdx) -> bool {
        let i = node.0;
        if !ctx.can_process[i] {
            return false;
        }
        if ctx.iot_capped[i] && self.vm_count[i] >= ctx.k {
            return false;
        }
        let needed = servers_needed(self.omega[i] + ctx.vms[vm].demand, ctx.cpu_cap[i]);
        needed <= ctx.max_cpus[i]
    }

    /// Attempts the assignment, checking node/link capacities for the new
    /// traffic. On success all accumulators are updated (journaled); on
    /// failure the state is untouched.
    pub fn try_assign(&mut self, ctx: &EvalContext, vm: usize, node: NodeIdx) -> bool {
        debug_assert!(self.assignment[vm].is_none());
        if !self.fits_node(ctx, vm, node) {
            return false;
        }

        // New traffic this assignment realizes: links to already-placed
        // peers on other nodes.
        let mut node_add: BTreeMap<usize, f64> = BTreeMap::new();
        let mut link_add: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut flows: Vec<(NodeIdx, f64)> = Vec::new();
        for &(other, rate) in &ctx.vms[vm].links {
            let Some(peer) = self.assignment[other] else {
                continue;
            };
            if peer == node || rate <= 0.0 {
                continue;
            }
            flows.push((peer, rate));
            let path = ctx.route(node, peer);
            for x in path {
                *node_add.entry(x.0).or_insert(0.0) += rate;
            }
            for w in path.windows(2) {
                let key = if w[0] <= w[1] {
                    (w[0].0, w[1].0)
                } else {
                    (w[1].0, w[0].0)
                };
                *link_add.entry(key).or_insert(0.0) += rate;
            }
        }
        for (&i, &add) in &node_add {
            if self.lambda[i] + add > ctx.bitrate_cap[i] {
                return false;
            }
        }
        for (&(a, b), &add) in &link_add {
            let cap = ctx.bitrate_cap[a].min(ctx.bitrate_cap[b]);
            if self.link_load.get(&(a, b)).copied().unwrap_or(0.0) + add > cap {
                return false;
            }
        }

        // Commit.
        self.journal.push(Change::Assign(vm, self.assignment[vm]));
        self.assignment[vm] = Some(node);
        let i = node.0;
        self.journal.push(Change::Omega(i, self.omega[i]));
        self.omega[i] += ctx.vms[vm].demand;
        self.journal.push(Change::VmCount(i, self.vm_count[i]));
        self.vm_count[i] += 1;
        for (peer, rate) in flows {
            let path = ctx.route(node, peer);
            for x in path {
                self.journal
                    .push(Change::Lambda(x.0, self.lambda[x.0], self.lambda_flows[x.0]));
                self.lambda[x.0] += rate;
                self.lambda_flows[x.0] += 1;
            }
            for &p in [node, peer].iter() {
                self.journal.push(Change::Theta(p.0, self.theta[p.0]));
                self.theta[p.0] += rate;
            }
        }
        for (key, add) in link_add {
            let old = self.link_load.get(&key).copied();
            self.journal.push(Change::LinkLoad(key, old));
            *self.link_load.entry(key).or_insert(0.0) += add;
        }
        true
    }

    /// Exact objective of everything assigned so far: one sweep over the
    /// per-node accumulators, mirroring the public power model term by term.
    pub fn committed_power(&self, ctx: &EvalContext) -> f64 {
        let mut total = 0.0;
        for i in 0..ctx.node_count() {
            total += ctx.eps[i] * self.lambda[i];
            if self.lambda_flows[i] > 0 || ctx.is_source[i] {
                total += ctx.net_idle_delta[i];
            }
            if ctx.can_process[i] {
                total += ctx.e_gflops[i] * self.omega[i];
                total +=
                    servers_needed(self.omega[i], ctx.cpu_cap[i]) as f64 * ctx.cpu_idle[i];
                total += ctx.lan_eps[i] * self.theta[i];
                if self.vm_count[i] > 0 {
                    total += ctx.lan_idle_delta[i];
                }
            }
        }
        total
    }

    /// Admissible lower bound for completing the VMs listed in `remaining`,
    /// added on top of `committed_power`. Two tails are computed per VM over
    /// the nodes that still fit it, and `None` means some VM has nowhere
    /// left to go (the partial assignment is a dead end):
    ///
    /// - proportional: min of `energy_per_gflops x demand`;
    /// - amortised: min of `(energy_per_gflops + cpu_idle/cpu_capacity) x
    ///   demand`, valid because `N_p = ceil(omega/cap) >= omega/cap`.
    ///
    /// Committed power already charges whole servers, so the amortised tail
    /// must first refund the idle share of paid-but-unused capacity before
    /// it may exceed the proportional tail; the max of the two is returned.
    pub fn completion_bound(&self, ctx: &EvalContext, remaining: &[usize]) -> Option<f64> {
        let mut prop_tail = 0.0;
        let mut amort_tail = 0.0;
        for &vm in remaining {
            let demand = ctx.vms[vm].demand;
            let mut best_prop = f64::INFINITY;
            let mut best_amort = f64::INFINITY;
            for &node in &ctx.candidates {
                if !self.fits_node(ctx, vm, node) {
                    continue;
                }
                let i = node.0;
                let prop = ctx.e_gflops[i] * demand;
                let amort = prop + ctx.cpu_idle[i] / ctx.cpu_cap[i] * demand;
                best_prop = best_prop.min(prop);
                best_amort = best_amort.min(amort);
            }
            if best_prop.is_infinite() {
                return None;
            }
            prop_tail += best_prop;
            amort_tail += best_amort;
        }
        let mut slack_credit = 0.0;
        for &node in &ctx.candidates {
            let i = node.0;
            if self.omega[i] > 0.0 {
                let paid = f64::from(servers_needed(self.omega[i], ctx.cpu_cap[i]));
                let slack = paid * ctx.cpu_cap[i] - self.omega[i];
                slack_credit += ctx.cpu_idle[i] / ctx.cpu_cap[i] * slack;
            }
        }
        Some(prop_tail.max(amort_tail - slack_credit))
    }

    /// Candidate filter that skips interchangeable empty IoT clones: among
    /// empty devices of one symmetry group only the lowest-indexed one is
    /// kept.
    pub fn symmetry_filtered_candidates(&self, ctx: &EvalContext) -> Vec<NodeIdx> {
        let mut seen_groups = Vec::new();
        let mut out = Vec::with_capacity(ctx.candidates.len());
        for &node in &ctx.candidates {
            if let (Some(group), 0) = (ctx.sym_group[node.0], self.vm_count[node.0]) {
                if seen_groups.contains(&group) {
                    continue;
                }
                seen_groups.push(group);
            }
            out.push(node);
        }
        out
    }

    #[cfg(test)]
    pub fn to_placement(&self, ctx: &EvalContext) -> Placement {
        let mut placement = Placement::pinned(ctx.scenario).expect("context built from scenario");
        for (flat, slot) in self.assignment.iter().enumerate() {
            if let Some(node) = slot {
                let fv = &ctx.vms[flat];
                placement.set(fv.request, fv.vm, Some(*node));
            }
        }
        placement
    }
}
