//! Optimal unambiguous filtering of one pure quantum state out of a known ensemble.
//!
//! Given states `|ψ₁⟩, …, |ψ_N⟩` with priors `η₁, …, η_N`, the task is to decide
//! without ever erring whether a system was prepared in `|ψ₁⟩` (the α set) or in
//! one of the remaining states (the β set), at the price of an inconclusive
//! outcome. This crate provides:
//!
//! - [`ensemble`]: problem instances, input parsing, overlaps and subspace projectors.
//! - [`analytic`]: the closed-form optimum and its three regimes.
//! - [`povm`]: the detection operators `Π₁`, `Π₂`, `Π₀` realizing the optimum.
//! - [`neumark`]: a unitary on system ⊗ 3-level ancilla implementing the same measurement.
//! - [`simulate`]: seeded Monte Carlo sampling of the measurement.
//! - [`verify`]: independent numerical oracles and the density-matrix view.

pub mod analytic;
pub mod ensemble;
mod error;
pub mod linalg;
pub mod neumark;
pub mod povm;
pub mod simulate;
pub mod verify;

pub use analytic::{branch_values, s_value, solve, BranchValues, FilteringSolution, Regime};
pub use ensemble::{
    decompose, gram, parse_problem, FilteringProblem, PureState, SubspaceDecomposition,
};
pub use error::{Error, Result};
pub use neumark::{build_dilation, verify_dilation, DilationReport, NeumarkDilation};
pub use povm::{build_povm, validate_povm, Povm, PovmReport};
pub use simulate::{run_simulation, run_simulation_chunked, SimulationReport};
pub use verify::{
    check_rudolph_bound, mixed_state_view, numeric_oracle, positivity_matrix, MixedStateView,
    OracleResult, PositivityReport, RudolphReport,
};
