//! Simulator for recurrence entanglement purification (BBPSSW, DEJMPS)
//! between two network nodes whose stored qubits decohere during the
//! classical-latency coordination window.
//!
//! The crate is organized bottom-up:
//!
//! - [`qstate`]: density operators, Bell/Werner states, fidelities, Haar
//!   sampling, pair embedding and partial traces;
//! - [`purify`]: twirling plus the BBPSSW and DEJMPS round kernels on exact
//!   two-pair (16-dimensional) states;
//! - [`decoherence`]: the amplitude-damping + dephasing Lindblad model and
//!   its fixed-step RK4 integrator;
//! - [`network`]: empirical latency distributions and the optical link loss
//!   model;
//! - [`experiments`]: round-loop trajectories, expected pair consumption
//!   E(F_th), fidelity-vs-budget grids, and distillable rates R(F_th);
//! - [`contour`]: marching-squares iso-line extraction;
//! - [`config`] / [`cli`]: the JSON-configured command-line frontend.

pub mod cli;
pub mod config;
pub mod contour;
pub mod decoherence;
pub mod experiments;
pub mod network;
pub mod purify;
pub mod qstate;

pub use config::{DQC_THRESHOLD, QKD_THRESHOLD};
pub use decoherence::{evolve, IntegratorConfig, MemoryParams};
pub use experiments::{
    distillable_rate_sweep, expected_pair_consumption, fidelity_vs_budget_grid, run_trajectory,
    EpcResult, RateCurve, Trajectory,
};
pub use network::{pair_rate, LatencyDistribution, LinkConfig};
pub use purify::{analytic_bbpssw, Protocol};
pub use qstate::{singlet_fidelity, werner_state, DensityOperator};
