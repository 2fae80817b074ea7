use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("singular denominator in {what} (|value| = {value:e})")]
    SingularDenominator { what: &'static str, value: f64 },

    #[error("coexistence state is not positive: (u*, v*) = ({u}, {v})")]
    NoCoexistence { u: f64, v: f64 },

    #[error("analytic formulas require d11 = d22 = 0 (got d11 = {d11}, d22 = {d22})")]
    SelfDiffusion { d11: f64, d22: f64 },

    #[error("no crossing of the neutral curves for modes ({j}, {k}) in the scanned window")]
    NoCrossing { j: u32, k: u32 },

    #[error("d = {d} is not critical for mode {k} (scaled |det| = {det:e})")]
    NotCritical { k: u32, d: f64, det: f64 },

    #[error("both rows of the characteristic matrix are degenerate; kernel undefined")]
    DegenerateKernel,

    #[error("2k_c resonance: |det(K - 4 lambda D)| = {det:e} (invalid near a doubly degenerate point)")]
    Resonance { det: f64 },

    #[error("vanishing projection <rho, psi> = {value:e}")]
    VanishingProjection { value: f64 },

    #[error("diagonalising matrix T{k} is singular (det = {det:e})")]
    SingularFrame { k: u32, det: f64 },

    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian (zero pivot at column {column})")]
    SingularJacobian { column: usize },

    #[error("continuation step collapsed at d = {d} (ds = {ds:e})")]
    StepCollapse { d: f64, ds: f64 },

    #[error("branch switching failed to converge for every trial offset")]
    SeedNonConvergence,

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
