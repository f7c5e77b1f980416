//! Experiments on `Z^2` windows: the pairing with a function harmonic modulo 1,
//! its small-value tail, characteristic functions of i.i.d. piles, and
//! stabilization trials.

mod law;
mod pairing;
mod trials;

pub use law::{HeightDistribution, HeightSampler, LAW_TOLERANCE};
pub use pairing::{
    boundary_losses, pairing, pairing_invariance, pairing_with_losses, xi_d1_cubed, xi_tail_scan,
    PairingInvariance, TailScan,
};
pub use trials::{
    characteristic_function, iid_trial, iid_trials, xi_window_values, CharMode, IidSummary, IidTrial,
};
