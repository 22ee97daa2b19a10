//! Simulation and dimensioning toolkit for downlinks assisted by a
//! reconfigurable intelligent surface (RIS).
//!
//! A base station with `M` antennas serves `K` single-antenna users through a
//! passive reflecting panel of `N` elements. The crate covers the full chain
//! from deployment geometry to achievable rates:
//!
//! - [`geometry`]: layout construction, per-element and aggregate path gains,
//!   the large-panel asymptotic gain and a quadrature oracle for it.
//! - [`channel`]: fading synthesis, either by exact per-element summation or
//!   by the Gaussian shortcut valid for large panels.
//! - [`precoding`]: zero-forcing precoder, per-user SNR (direct and via the
//!   Gram matrix), water-filling and uniform power allocation.
//! - [`rates`]: Monte Carlo sum-rate and capacity estimators plus the
//!   closed-form capacity bounds and rate-ratio expressions.
//! - [`planner`]: minimum element count to reach a target fraction of the
//!   asymptotic capacity, by closed form and by exact search.
//! - [`harness`]: seeded, reproducible experiment runner with deterministic
//!   parallel aggregation.
//! - [`selfcheck`]: the self-validation suite behind `validate`.

pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod planner;
pub mod precoding;
pub mod rates;
pub mod selfcheck;
pub mod stats;

pub use error::{Result, RisError};
