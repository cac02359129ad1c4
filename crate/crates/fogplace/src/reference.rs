//! Reference device profiles and the default IoT-to-cloud tree.
//!
//! Power figures come from vendor-style datasheet rows: peak draw, idle draw,
//! capacity and a proportional-efficiency coefficient. CPU rows satisfy
//! `(max - idle) / capacity = efficiency` up to rounding; the IP/WDM row does
//! not, and is used verbatim anyway.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NetworkProfile, Node, NodeTier, ProcessorProfile, Topology};

/// Datasheet row for a CPU class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpuRow {
    pub max_watts: f64,
    pub idle_watts: f64,
    pub gflops: f64,
    /// Proportional coefficient, W per GFLOPS.
    pub efficiency: f64,
}

/// Datasheet row for a networking device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetRow {
    pub max_watts: f64,
    pub idle_watts: f64,
    pub bitrate_gbps: f64,
    /// Proportional coefficient, W per Gb/s.
    pub efficiency: f64,
}

pub const IOT_CPU: CpuRow = CpuRow {
    max_watts: 7.3,
    idle_watts: 2.56,
    gflops: 13.5,
    efficiency: 0.35,
};

pub const AFN_CPU: CpuRow = CpuRow {
    max_watts: 37.2,
    idle_watts: 13.8,
    gflops: 34.5,
    efficiency: 0.67,
};

pub const MFN_CPU: CpuRow = CpuRow {
    max_watts: 37.2,
    idle_watts: 13.8,
    gflops: 34.5,
    efficiency: 0.67,
};

pub const CLOUD_CPU: CpuRow = CpuRow {
    max_watts: 298.0,
    idle_watts: 58.7,
    gflops: 428.0,
    efficiency: 0.55,
};

pub const CPU_ROWS: [(&str, CpuRow); 4] = [
    ("iot_cpu", IOT_CPU),
    ("afn_cpu", AFN_CPU),
    ("mfn_cpu", MFN_CPU),
    ("cloud_cpu", CLOUD_CPU),
];

pub const ONU_WIFI_AP: NetRow = NetRow {
    max_watts: 15.0,
    idle_watts: 9.0,
    bitrate_gbps: 10.0,
    efficiency: 0.6,
};

pub const OLT: NetRow = NetRow {
    max_watts: 1940.0,
    idle_watts: 60.0,
    bitrate_gbps: 8600.0,
    efficiency: 0.22,
};

pub const METRO_ROUTER_PORT: NetRow = NetRow {
    max_watts: 30.0,
    idle_watts: 27.0,
    bitrate_gbps: 40.0,
    efficiency: 0.08,
};

pub const METRO_SWITCH: NetRow = NetRow {
    max_watts: 470.0,
    idle_watts: 423.0,
    bitrate_gbps: 600.0,
    efficiency: 0.08,
};

pub const IP_WDM_NODE: NetRow = NetRow {
    max_watts: 878.0,
    idle_watts: 790.0,
    bitrate_gbps: 40.0,
    efficiency: 0.14,
};

pub const NET_ROWS: [(&str, NetRow); 5] = [
    ("onu_wifi_ap", ONU_WIFI_AP),
    ("olt", OLT),
    ("metro_router_port", METRO_ROUTER_PORT),
    ("metro_switch", METRO_SWITCH),
    ("ip_wdm_node", IP_WDM_NODE),
];

/// Nominal capacity for nodes whose own forwarding gear is not modelled
/// (IoT radios and fog/cloud uplinks are folded into the access devices).
pub const ATTACHMENT_CAPACITY_GBPS: f64 = 10_000.0;

fn attachment_network(delta: f64) -> NetworkProfile {
    NetworkProfile {
        energy_per_gbps: 0.0,
        idle_power: 0.0,
        bitrate_capacity: ATTACHMENT_CAPACITY_GBPS,
        delta,
    }
}

fn net_profile(row: NetRow, delta: f64) -> NetworkProfile {
    NetworkProfile {
        energy_per_gbps: row.efficiency,
        idle_power: row.idle_watts,
        bitrate_capacity: row.bitrate_gbps,
        delta,
    }
}

fn cpu_profile(row: CpuRow, max_cpus: u32) -> ProcessorProfile {
    ProcessorProfile {
        energy_per_gflops: row.efficiency,
        cpu_idle_power: row.idle_watts,
        cpu_capacity_gflops: row.gflops,
        max_cpus,
        lan_energy_per_gbps: 0.0,
        lan_idle_power: 0.0,
    }
}

/// Per-tier device profiles used by the reference builder. Defaults follow
/// the datasheet rows; LAN figures default to zero and CPU counts to values
/// that give every processing layer enough headroom for the reference
/// workload (metro fog slightly larger than access fog).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceProfiles {
    pub iot_cpu: ProcessorProfile,
    pub afn_cpu: ProcessorProfile,
    pub mfn_cpu: ProcessorProfile,
    pub cloud_cpu: ProcessorProfile,
    pub onu: NetworkProfile,
    pub olt: NetworkProfile,
    pub metro_switch: NetworkProfile,
    pub metro_router: NetworkProfile,
    pub core: NetworkProfile,
}

impl Default for DeviceProfiles {
    fn default() -> Self {
        DeviceProfiles {
            iot_cpu: cpu_profile(IOT_CPU, 4),
            afn_cpu: cpu_profile(AFN_CPU, 18),
            mfn_cpu: cpu_profile(MFN_CPU, 24),
            cloud_cpu: cpu_profile(CLOUD_CPU, 16),
            onu: net_profile(ONU_WIFI_AP, 1.0),
            olt: net_profile(OLT, 1.0),
            metro_switch: net_profile(METRO_SWITCH, 1.0),
            metro_router: net_profile(METRO_ROUTER_PORT, 1.0),
            core: net_profile(IP_WDM_NODE, 1.0),
        }
    }
}

/// Shape and parameters of the reference tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    pub zones: u32,
    pub iot_per_zone: u32,
    /// Number of core transit nodes between the metro router and the cloud.
    pub core_hops: u32,
    /// Idle-share factor applied to highly shared equipment (OLT, metro
    /// switch/router, core, and the fog/cloud LAN terms).
    pub delta: f64,
    /// IoT node that generates the input data streams.
    pub source: String,
    pub profiles: DeviceProfiles,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            zones: 4,
            iot_per_zone: 5,
            core_hops: 1,
            delta: 1.0,
            source: "iot_z1_d1".to_string(),
            profiles: DeviceProfiles::default(),
        }
    }
}

pub fn iot_id(zone: u32, device: u32) -> String {
    format!("iot_z{zone}_d{device}")
}

pub fn onu_id(zone: u32) -> String {
    format!("onu_z{zone}")
}

/// Builds the reference tree: per-zone IoT devices behind their ONU AP, ONUs
/// behind one OLT with the access fog beside it, then metro switch (with the
/// metro fog), metro router, `core_hops` transit nodes and the cloud.
pub fn build_reference_topology(cfg: &ReferenceConfig) -> Result<Topology> {
    if cfg.zones == 0 || cfg.iot_per_zone == 0 {
        return Err(Error::InvalidConfig(
            "reference topology needs at least one zone and one IoT device per zone".into(),
        ));
    }
    if cfg.core_hops == 0 {
        return Err(Error::InvalidConfig(
            "reference topology needs at least one core hop".into(),
        ));
    }
    if !(cfg.delta > 0.0 && cfg.delta <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "delta must lie in (0, 1], got {}",
            cfg.delta
        )));
    }
    let p = &cfg.profiles;
    let mut nodes = Vec::new();
    let mut links = Vec::new();

    // IoT devices first so low indices favor them in lexicographic ties.
    for z in 1..=cfg.zones {
        for d in 1..=cfg.iot_per_zone {
            let id = iot_id(z, d);
            nodes.push(Node {
                id: id.clone(),
                tier: NodeTier::IoTDevice,
                zone: Some(z),
                network: Some(attachment_network(1.0)),
                processor: Some(p.iot_cpu.clone()),
                is_source: id == cfg.source,
            });
            links.push((id, onu_id(z)));
        }
    }
    for z in 1..=cfg.zones {
        nodes.push(Node {
            id: onu_id(z),
            tier: NodeTier::OnuAp,
            zone: Some(z),
            network: Some(p.onu.clone()),
            processor: None,
            is_source: false,
        });
        links.push((onu_id(z), "olt".to_string()));
    }
    nodes.push(Node {
        id: "olt".to_string(),
        tier: NodeTier::Olt,
        zone: None,
        network: Some(NetworkProfile { delta: cfg.delta, ..p.olt.clone() }),
        processor: None,
        is_source: false,
    });
    nodes.push(Node {
        id: "afn".to_string(),
        tier: NodeTier::AccessFog,
        zone: None,
        network: Some(attachment_network(1.0)),
        processor: Some(p.afn_cpu.clone()),
        is_source: false,
    });
    links.push(("afn".to_string(), "olt".to_string()));
    nodes.push(Node {
        id: "metro_switch".to_string(),
        tier: NodeTier::MetroSwitch,
        zone: None,
        network: Some(NetworkProfile { delta: cfg.delta, ..p.metro_switch.clone() }),
        processor: None,
        is_source: false,
    });
    links.push(("olt".to_string(), "metro_switch".to_string()));
    nodes.push(Node {
        id: "mfn".to_string(),
        tier: NodeTier::MetroFog,
        zone: None,
        network: Some(attachment_network(cfg.delta)),
        processor: Some(p.mfn_cpu.clone()),
        is_source: false,
    });
    links.push(("mfn".to_string(), "metro_switch".to_string()));
    nodes.push(Node {
        id: "metro_router".to_string(),
        tier: NodeTier::MetroRouter,
        zone: None,
        network: Some(NetworkProfile { delta: cfg.delta, ..p.metro_router.clone() }),
        processor: None,
        is_source: false,
    });
    links.push(("metro_switch".to_string(), "metro_router".to_string()));
    let mut upstream = "metro_router".to_string();
    for i in 1..=cfg.core_hops {
        let id = format!("core_{i}");
        nodes.push(Node {
            id: id.clone(),
            tier: NodeTier::CoreNode,
            zone: None,
            network: Some(NetworkProfile { delta: cfg.delta, ..p.core.clone() }),
            processor: None,
            is_source: false,
        });
        links.push((upstream, id.clone()));
        upstream = id;
    }
    nodes.push(Node {
        id: "cloud".to_string(),
        tier: NodeTier::CloudDc,
        zone: None,
        network: Some(attachment_network(cfg.delta)),
        processor: Some(p.cloud_cpu.clone()),
        is_source: false,
    });
    links.push((upstream, "cloud".to_string()));

    let source_is_iot = nodes
        .iter()
        .any(|n| n.id == cfg.source && n.tier == NodeTier::IoTDevice);
    if !source_is_iot {
        return Err(Error::InvalidConfig(format!(
            "source `{}` is not an IoT device of this topology",
            cfg.source
        )));
    }
    Topology::new(nodes, links, true)
}
