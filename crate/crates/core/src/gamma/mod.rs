//! The gap functional `f(ξ) = Σ (1 - cos 2πξ_x)` on `Z^2`, the nonlinear
//! programs bounding it from below, and the pipeline computing its minimum over
//! nonzero frequencies.

mod functional;
mod pipeline;
mod program;

pub use functional::{f_functional, parseval_norm_sq, FValue};
pub use pipeline::{
    brute_force_supports, compute_gamma, enumerate_supports, program_properties_check, Evaluation,
    GammaAudit, GammaReport, ProgramCase, PropertiesReport, SupportEnumeration,
    SupportSurvivor, DEFAULT_THRESHOLD,
};
pub use program::{
    enlargement, solve_program, solve_program_below, solve_restricted_from, Bounded, NLPResult,
    ProgramKind, ProgramSpec, FEASIBILITY_TOLERANCE, KKT_TOLERANCE, MAX_SUPPORT, OPTIMALITY_GAP,
};
