//! Rate analysis for frequency-time multiplexing of heralded single photons.
//!
//! Heralded photons appear at random in a grid of frequency and time bins.
//! Each frequency owns a batch of `m` time bins; a switchable delay loop moves
//! one photon per batch to the batch's last bin, and a grating array then
//! lines all frequencies up in a single output bin.
//!
//! - [`config`]: experiment description and presets
//! - [`loss`]: per-photon survival through the apparatus
//! - [`rates`]: closed-form rates and the batch-size optimizer
//! - [`schedule`]: photon grids, switching schedules and an exact enumeration oracle
//! - [`montecarlo`]: sampling estimates, including the 2n-bin variant

pub mod config;
pub mod error;
pub mod loss;
pub mod montecarlo;
pub mod rates;
pub mod schedule;
pub mod stream;

pub use config::{LossTable, Occupancy, Preset, SetupConfig, Variant};
pub use error::{Error, Result};
pub use loss::{
    db_to_survival, decompose_delay, path_loss_db, survival_prob, DelayAssignment, SurvivalTable,
};
pub use montecarlo::{mc_estimate, mc_optimal_m, McEstimate, McSettings};
pub use rates::{
    epsilon_m, epsilon_rate, improvement_ratio, lossless_rate, lossless_success, lossy_rate,
    lossy_success, optimal_m, Objective, RateResult,
};
pub use schedule::{
    brute_force_success, sample_grid, schedule_fixed, schedule_partial, schedule_survival,
    ExactSuccess, PhotonGrid, Schedule,
};
