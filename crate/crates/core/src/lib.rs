//! Bifurcation toolkit for the one-dimensional SKT cross-diffusion competition model.

// `!(x > 0.0)` is used deliberately so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `is_multiple_of` postdates the minimum supported toolchain.
#![allow(clippy::manual_is_multiple_of)]

pub mod continuation;
pub mod ddp_hopf;
pub mod error;
pub mod landau;
pub mod linear;
pub mod model;
pub mod params;
pub mod timestepper;

pub use error::{Error, Result};
pub use linear::{
    critical_d, find_ddp, laplacian_eigenvalue, mode_quadratic, neutral_curve_d12, neutral_curve_d21,
    sweep_neutral_curves, CriticalValue, DWindow, DoublyDegeneratePoint, Mode, ModeQuadratic, NeutralCurveSample,
    Plane,
};
pub use model::{
    classify_regime, coexistence_equilibrium, diffusion_matrix, homogeneous_equilibria, linearize, Equilibrium,
    EquilibriumKind, Linearization, Regime,
};
pub use params::{ModelParams, TAU_REG};
pub use continuation::{
    branch_switch, continue_branch, homogeneous_state, newton_solve, stability_summary, Branch, BranchPoint,
    BranchPointEvent, ContinuationSettings, EventKind, Grid, Measures, NewtonSettings, SeedSide, StabilitySummary,
    StateVector, Termination,
};
pub use ddp_hopf::{hopf_necessary, hopf_necessity_sweep, B1Reading, DdpFrame, HopfNecessity, HopfSweep};
pub use landau::{landau, landau_for_mode, landau_sign_map, Axis, CriticalMode, LandauResult, Pitchfork, SignMapGrid};
pub use timestepper::{evolve, perturb, step, AsymptoticsReport, EvolveSettings, Perturbation, Trajectory, Verdict};
