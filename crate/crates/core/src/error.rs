use thiserror::Error;

/// Errors across the library. Messages name the violated contract, not the
/// internal routine that noticed it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty support")]
    EmptySupport,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("degenerate selection: mean fitness is zero")]
    DegenerateSelection,

    #[error("selection annihilates support")]
    SelectionAnnihilatesSupport,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("z outside domain: z*x = {zx} exceeds 1 at an atom")]
    OutsideDomain { zx: f64 },

    #[error("matrix has divergent entries at z = {z}")]
    DivergentMatrix { z: f64 },

    #[error("psi undefined at pole (z = {z})")]
    PsiUndefinedAtPole { z: f64 },

    #[error("gamma2 requires a period-2 cycle, got k = {k}")]
    RequiresPeriodTwo { k: usize },

    #[error("minor degenerate: |N_0| = {n0} below threshold (numerical failure)")]
    MinorDegenerate { n0: f64 },

    #[error("z = {z} outside convergence disk [0, {z_c})")]
    OutsideConvergenceDisk { z: f64, z_c: f64 },

    #[error("conjecture hypotheses unmet: {0}")]
    ConjectureHypothesesUnmet(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
