//! Command-line front end: generate scenarios, solve placements, sweep the
//! delta/k grid, export MILP files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fogplace::experiments::{compute_savings, emit_report, run_sweep, SolverKind, SweepSpec};
use fogplace::placement::PlacementRow;
use fogplace::reference::{build_reference_topology, ReferenceConfig};
use fogplace::solver::{
    branch_and_bound, brute_force, export_lp, greedy, local_search, SolveBudget, SolveResult,
    SolveStatus,
};
use fogplace::workload::{generate_requests, load_scenario, save_scenario, RequestParams, Scenario};
use fogplace::Result;

#[derive(Parser)]
#[command(
    name = "fogplace",
    about = "Power-minimal placement of interconnected VMs on an IoT/fog/cloud hierarchy",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a scenario on the reference topology and save it as JSON.
    Generate(GenerateArgs),
    /// Solve one scenario and print the result as JSON.
    Solve(SolveArgs),
    /// Solve a delta x k grid and write power, workload-share and savings
    /// CSVs.
    Sweep(SweepArgs),
    /// Write the scenario's placement problem as a CPLEX-LP file.
    ExportLp(ExportLpArgs),
}

#[derive(Args)]
struct ScenarioShape {
    /// Access zones in the reference topology.
    #[arg(long, default_value_t = 4)]
    zones: u32,
    /// IoT devices per zone.
    #[arg(long, default_value_t = 5)]
    iot_per_zone: u32,
    /// Core routers between metro and cloud.
    #[arg(long, default_value_t = 1)]
    core_hops: u32,
    /// Number of VM requests.
    #[arg(long, default_value_t = 15)]
    requests: u32,
    /// RNG seed for request generation.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Source device for every request.
    #[arg(long, default_value = "iot_z1_d1")]
    source: String,
    /// Smallest VMs per request.
    #[arg(long, default_value_t = 4)]
    vm_min: u32,
    /// Largest VMs per request.
    #[arg(long, default_value_t = 5)]
    vm_max: u32,
    /// Smallest CPU demand per VM, GFLOPS.
    #[arg(long, default_value_t = 0.6)]
    demand_min: f64,
    /// Largest CPU demand per VM, GFLOPS.
    #[arg(long, default_value_t = 10.0)]
    demand_max: f64,
    /// Data rate of every VM-to-VM link, Gb/s.
    #[arg(long, default_value_t = 0.1)]
    data_rate: f64,
}

impl ScenarioShape {
    fn build(&self, k: u32, delta: Option<f64>) -> Result<Scenario> {
        let cfg = ReferenceConfig {
            zones: self.zones,
            iot_per_zone: self.iot_per_zone,
            core_hops: self.core_hops,
            source: self.source.clone(),
            ..ReferenceConfig::default()
        };
        let topology = build_reference_topology(&cfg)?;
        let params = RequestParams {
            count: self.requests,
            vm_count_range: (self.vm_min, self.vm_max),
            demand_range_gflops: (self.demand_min, self.demand_max),
            default_data_rate: self.data_rate,
            source: self.source.clone(),
            ..RequestParams::default()
        };
        let requests = generate_requests(&topology, self.seed, &params)?;
        Scenario::new(topology, requests, k, delta)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    shape: ScenarioShape,
    /// Per-device VM cap for non-source IoT devices.
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Idle-share factor forced onto shared tiers.
    #[arg(long)]
    delta: Option<f64>,
    /// Output scenario file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario file produced by `generate`.
    #[arg(long)]
    scenario: PathBuf,
    /// brute, bnb, greedy or local.
    #[arg(long, default_value = "bnb")]
    solver: String,
    /// Wall-time budget in seconds (bnb only; non-deterministic).
    #[arg(long)]
    budget_seconds: Option<f64>,
    /// Search-node budget (bnb only; deterministic).
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Where to write the placement as JSON rows, if anywhere.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario file; omit to build the reference scenario below.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    shape: ScenarioShape,
    /// Idle-share factors to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0.03, 0.06, 0.10])]
    deltas: Vec<f64>,
    /// Per-device VM caps to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
    ks: Vec<u32>,
    /// Solvers to run: brute, bnb, greedy, local.
    #[arg(long, value_delimiter = ',', default_values_t = [String::from("bnb")])]
    solvers: Vec<String>,
    #[arg(long)]
    budget_seconds: Option<f64>,
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Directory for power.csv, workload_share.csv and savings.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExportLpArgs {
    /// Scenario file; omit to build the reference scenario below.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    shape: ScenarioShape,
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long)]
    delta: Option<f64>,
    /// Output LP file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(args) => {
            let scenario = args.shape.build(args.k, args.delta)?;
            save_scenario(&scenario, &args.out)?;
            eprintln!(
                "wrote {} ({} requests, {:.1} GFLOPS total demand)",
                args.out.display(),
                scenario.requests.len(),
                scenario.total_demand()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve(args) => {
            let scenario = load_scenario(&args.scenario)?;
            let kind = SolverKind::parse(&args.solver)?;
            let budget = SolveBudget {
                max_nodes: args.max_nodes,
                max_seconds: args.budget_seconds,
            };
            let result = solve_one(&scenario, kind, &budget)?;
            print_result(&scenario, &result)?;
            if let (Some(path), Some(placement)) = (&args.out, &result.placement) {
                let rows = placement.to_rows(&scenario);
                std::fs::write(path, serde_json::to_string_pretty(&rows)?)?;
                eprintln!("wrote placement to {}", path.display());
            }
            Ok(match result.status {
                SolveStatus::Optimal | SolveStatus::FeasibleWithGap => ExitCode::SUCCESS,
                SolveStatus::BudgetExhausted if result.placement.is_some() => ExitCode::SUCCESS,
                _ => ExitCode::FAILURE,
            })
        }
        Command::Sweep(args) => {
            let scenario = match &args.scenario {
                Some(path) => load_scenario(path)?,
                None => args.shape.build(1, None)?,
            };
            let mut spec = SweepSpec::new(scenario);
            spec.delta_values = args.deltas.clone();
            spec.k_values = args.ks.clone();
            spec.solvers = args
                .solvers
                .iter()
                .map(|s| SolverKind::parse(s))
                .collect::<Result<Vec<_>>>()?;
            spec.budget = SolveBudget {
                max_nodes: args.max_nodes,
                max_seconds: args.budget_seconds,
            };
            let records = run_sweep(&spec)?;

            let mut all_solved = true;
            for record in &records {
                let gap = record
                    .gap()
                    .map(|g| format!("{:.3}%", 100.0 * g))
                    .unwrap_or_else(|| "n/a".into());
                eprintln!(
                    "delta {:>5} k {} {:<7} {:<17} total {:>10} W  gap {}  ({} nodes, {:.2}s)",
                    record.delta,
                    record.k,
                    record.solver.label(),
                    record.status.label(),
                    record
                        .objective
                        .map(|o| format!("{o:.3}"))
                        .unwrap_or_else(|| "-".into()),
                    gap,
                    record.nodes_explored,
                    record.wall_time,
                );
                let solved = match record.status {
                    SolveStatus::Optimal | SolveStatus::FeasibleWithGap => true,
                    SolveStatus::BudgetExhausted => record.objective.is_some(),
                    SolveStatus::Infeasible => false,
                };
                all_solved &= solved;
            }

            let mut savings = Vec::new();
            let mut sorted_ks = spec.k_values.clone();
            sorted_ks.sort_unstable();
            sorted_ks.dedup();
            if sorted_ks.len() >= 2 {
                let baseline = sorted_ks[0];
                for &improved in &sorted_ks[1..] {
                    for &solver in &spec.solvers {
                        savings.extend(compute_savings(&records, solver, baseline, improved)?);
                    }
                }
            }
            emit_report(&records, &savings, &args.out_dir)?;
            eprintln!("wrote CSV reports to {}", args.out_dir.display());
            Ok(if all_solved {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::ExportLp(args) => {
            let scenario = match &args.scenario {
                Some(path) => load_scenario(path)?,
                None => args.shape.build(args.k, args.delta)?,
            };
            let lp = export_lp(&scenario)?;
            std::fs::write(&args.out, lp)?;
            eprintln!("wrote {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn solve_one(scenario: &Scenario, kind: SolverKind, budget: &SolveBudget) -> Result<SolveResult> {
    Ok(match kind {
        SolverKind::Brute => brute_force(scenario)?,
        SolverKind::BranchAndBound => branch_and_bound(scenario, budget, None)?,
        SolverKind::Greedy => greedy(scenario)?,
        SolverKind::LocalSearch => {
            let seed = greedy(scenario)?;
            match seed.placement {
                Some(ref p) => local_search(scenario, p, 200)?,
                None => seed,
            }
        }
    })
}

fn print_result(scenario: &Scenario, result: &SolveResult) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Doc {
        status: &'static str,
        objective_w: Option<f64>,
        lower_bound_w: Option<f64>,
        nodes_explored: u64,
        wall_time_s: f64,
        tier_workload_share: Option<std::collections::BTreeMap<String, f64>>,
        placement: Option<Vec<PlacementRow>>,
    }
    let breakdown = match &result.placement {
        Some(placement) => Some(fogplace::evaluate(scenario, placement)?),
        None => None,
    };
    let doc = Doc {
        status: result.status.label(),
        objective_w: result.objective,
        lower_bound_w: result.lower_bound.is_finite().then_some(result.lower_bound),
        nodes_explored: result.nodes_explored,
        wall_time_s: result.wall_time,
        tier_workload_share: breakdown.as_ref().map(|b| {
            b.tier_workload_share
                .iter()
                .map(|(tier, share)| (tier.label().to_string(), *share))
                .collect()
        }),
        placement: result
            .placement
            .as_ref()
            .map(|p| p.to_rows(scenario)),
    };
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}
