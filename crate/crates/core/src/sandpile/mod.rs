//! Sandpiles on the torus with a sink at the origin, and on `Z^2` windows.

pub(crate) mod chain;
mod group;
mod state;
mod window;

pub use chain::{
    group_add, hitting_time_trial, identity, is_recurrent, markov_step, markov_step_at,
    HittingTime,
};
pub use group::{determinant_reduced_laplacian, group_structure, GroupStructure};
pub use state::{stabilize, stabilize_with, Odometer, Policy, Sandpile, Stabilized};
pub use window::{parallel_stabilize, parallel_topple, ParallelRun, WindowPile};

/// Neighbour indices (row-major) of every site of `T_m`.
pub fn torus_neighbors(m: usize) -> Vec<[usize; 4]> {
    state::neighbor_table(m)
}
