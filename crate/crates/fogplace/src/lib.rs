//! Power modelling and power-minimal placement of interconnected VMs on an
//! IoT / fog / cloud hierarchy.
//!
//! The pipeline: build a [`topology::Topology`] (or the canonical one from
//! [`mod@reference`]), generate or load a [`workload::Scenario`], assign VMs to
//! nodes with a [`placement::Placement`], evaluate the total power draw with
//! [`power::evaluate`], and search for the minimum with the solvers in
//! [`solver`]. [`experiments`] sweeps the idle-share factor delta and the
//! per-device cap k and writes CSV reports.

pub mod error;
pub mod experiments;
pub mod placement;
pub mod power;
pub mod reference;
pub mod solver;
pub mod topology;
pub mod workload;

pub use error::{Error, Result};
pub use placement::{check_constraints, derive_state, DerivedState, Placement, Violation};
pub use power::{evaluate, evaluate_partial, PowerBreakdown};
pub use solver::{
    branch_and_bound, brute_force, export_lp, greedy, local_search, SolveBudget, SolveResult,
    SolveStatus,
};
pub use topology::{NetworkProfile, Node, NodeIdx, NodeTier, ProcessorProfile, Topology};
pub use workload::{Scenario, VirtualLink, VirtualMachine, VirtualRequest};
