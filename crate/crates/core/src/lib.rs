//! Software twin of a real-time omnidirectional mmWave channel sounder.
//!
//! The receiver sweeps a 200-beam hexagonal codebook with four phased arrays
//! (one per 90° sector) while correlating a periodic Zadoff-Chu sounding
//! signal. This crate simulates that measurement loop through a ray-based
//! vehicular channel and implements the analysis applied to the captures:
//! best-beam and boresight-beam path loss, close-in model fits and
//! best-beam elevation statistics.
//!
//! Module map:
//!
//! - [`waveform`]: ZC generation and circular correlation
//! - [`codebook`]: hexagonal tessellation, sector assignment, beam patterns
//! - [`channel`]: free-space loss, ray construction, channel application, noise
//! - [`sounder`]: per-dwell PDPs, sweeps and full runs
//! - [`geo`]: trajectories, GPS interpolation, heading, local-square averaging
//! - [`analysis`]: path loss extraction, CI fit, histograms, heatmaps
//! - [`scenario`], [`capture`], [`report`]: configuration and file formats

// `!(x >= lo)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod capture;
pub mod channel;
pub mod codebook;
pub mod geo;
pub mod report;
pub mod scenario;
pub mod sounder;
pub mod verify;
pub mod waveform;

pub use analysis::{fit_ci, CiFit, PathLossSample};
pub use codebook::{BeamType, Codebook};
pub use scenario::Scenario;
pub use sounder::{run_sweep, simulate_run, SweepRecord};
pub use waveform::{generate_zc, ZcConfig};
