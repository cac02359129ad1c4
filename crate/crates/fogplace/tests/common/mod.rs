//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

use fogplace::reference::{build_reference_topology, ReferenceConfig};
use fogplace::workload::{generate_requests, RequestParams, Scenario};

/// Seed that fixes the canonical 15-request workload.
pub const REFERENCE_SEED: u64 = 7;

/// Scenario on a reduced topology, sized so brute force stays tractable:
/// `zones * iot_per_zone + 3` processing nodes.
pub fn small_scenario(
    zones: u32,
    iot_per_zone: u32,
    requests: u32,
    vm_range: (u32, u32),
    seed: u64,
    k: u32,
    delta: f64,
) -> Scenario {
    let cfg = ReferenceConfig {
        zones,
        iot_per_zone,
        ..ReferenceConfig::default()
    };
    let topology = build_reference_topology(&cfg).expect("valid reduced config");
    let params = RequestParams {
        count: requests,
        vm_count_range: vm_range,
        ..RequestParams::default()
    };
    let requests = generate_requests(&topology, seed, &params).expect("valid request params");
    Scenario::new(topology, requests, k, Some(delta)).expect("consistent scenario")
}

/// The canonical experiment input: 4 zones x 5 IoT devices, 15 chain
/// requests seeded for reproducibility, demands 0.6-10 GFLOPS.
pub fn reference_scenario(k: u32, delta: f64) -> Scenario {
    let cfg = ReferenceConfig::default();
    let topology = build_reference_topology(&cfg).expect("valid reference config");
    let requests = generate_requests(&topology, REFERENCE_SEED, &RequestParams::default())
        .expect("valid request params");
    Scenario::new(topology, requests, k, Some(delta)).expect("consistent scenario")
}

fn crosscheck_script() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scripts")
        .join("crosscheck_lp.py")
}

/// True when an external MILP stack (python3 + scipy) is present.
pub fn external_milp_available() -> bool {
    Command::new("python3")
        .args(["-c", "import numpy, scipy.optimize, scipy.sparse"])
        .output()
        .map(|out| out.status.success())
        .is_ok_and(|ok| ok)
}

/// Outcome of handing an exported model to the external solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExternalSolve {
    Optimal(f64),
    Infeasible,
}

/// Writes `lp_text` to a temp file and solves it with the scipy-backed
/// script. Panics on harness trouble (missing python, parse failure) so the
/// caller never mistakes tooling breakage for model agreement.
pub fn solve_lp_externally(lp_text: &str) -> ExternalSolve {
    let dir = tempfile::tempdir().expect("create temp dir");
    let path = dir.path().join("model.lp");
    std::fs::write(&path, lp_text).expect("write model file");
    let out = Command::new("python3")
        .arg(crosscheck_script())
        .arg(&path)
        .output()
        .expect("run external solver");
    let stdout = String::from_utf8_lossy(&out.stdout);
    match out.status.code() {
        Some(0) => {
            let value = stdout
                .lines()
                .find_map(|line| line.strip_prefix("objective "))
                .and_then(|rest| rest.trim().parse::<f64>().ok())
                .unwrap_or_else(|| panic!("unparseable solver output: {stdout}"));
            ExternalSolve::Optimal(value)
        }
        Some(3) => ExternalSolve::Infeasible,
        code => panic!(
            "external solver failed (exit {code:?}): {stdout} {}",
            String::from_utf8_lossy(&out.stderr)
        ),
    }
}

/// |a - b| within `tol` relative to magnitude (absolute near zero).
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
