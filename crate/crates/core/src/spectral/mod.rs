//! The dual of the sandpile group: frequencies, eigenvalues of the sandpile
//! chain, savings, prevectors, the spectral gap and mixing profiles.

mod cluster;
mod cutoff;
mod frequency;
mod oracle;
mod search;

pub use cluster::{r_cluster, r_reduce, REMOVABLE_TOLERANCE};
pub use cutoff::{
    additivity_fit, cutoff_grid, cutoff_profile, cutoff_profile_classes, separated_additivity,
    AdditivityFit, CutoffProfile, CutoffRow, SeparatedAdditivity,
};
pub use frequency::{
    distinguished_prevector, frequency_from_prevector, frequency_from_prevector_with,
    harmonic_defect, mu_hat, mu_hat_field, potential, potential_norm_sq, savings, set_savings,
    total_savings, Frequency, SavingsReport, HARMONIC_TOLERANCE, PREVECTOR_TOLERANCE,
};
pub use oracle::{
    dual_group_oracle, recurrent_states, sampled_tv_distance, DualFrequency, DualOracle,
    ORACLE_MAX_M,
};
pub use search::{
    candidate_classes, delta12_entries, gap_search, gap_search_classes, laplacian_descent,
    prevector_set_savings,
    CandidateClass, ClassEval, GapSearch, DEFAULT_B, DEFAULT_R,
};
