//! Finite-difference discretization and numerical continuation of stationary states.

pub mod banded;
pub mod branch;
pub mod grid;
pub mod io;
pub mod newton;
pub mod stability;
pub mod system;

pub use banded::{BandedLu, BandedMatrix};
pub use branch::{
    branch_switch, branch_switch_observed, continue_branch, continue_branch_observed, homogeneous_state, Branch,
    BranchPoint, BranchPointEvent, ContinuationSettings, Direction, EigenInfo, EventKind, Parent, SeedSide, Termination,
};
pub use grid::{Grid, Measures, StateVector};
pub use io::{diagram_csv, read_branch_json, read_states, write_atomic, write_branch_json, write_states, BranchFile};
pub use newton::{newton_solve, NewtonSettings, NewtonSolution};
pub use stability::{spectrum_of, stability_summary, summarize, StabilitySummary};
pub use system::{d_derivative, jacobian, jacobian_interleaved, residual, residual_into};
