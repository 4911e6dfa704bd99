//! Secure energy-efficient downlink power allocation for a single-cell massive
//! MIMO system overheard by one eavesdropper.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! core:
//!
//! * [`channel`]: user layouts, large-scale fading, Rayleigh channels with
//!   imperfect CSI, and MRT / ZF precoders.
//! * [`metrics`]: closed-form SINRs, lower-bound rates, eavesdropper rate,
//!   secure rate and secure energy efficiency.
//! * [`power_alloc`]: Lagrange-dual power allocation with a Dinkelbach
//!   efficiency update, plus the equal-power baseline.
//! * [`cell_division`]: the same solver with the power budget split between
//!   central and edge users.
//! * [`antenna_selection`]: the outer loop that picks the number of active
//!   antennas, with or without cell division.
//!
//! Everything is a pure function of its inputs and an explicit random source,
//! so independent Monte-Carlo trials can run in parallel.
//!
//! ```
//! use see_mimo_core::{power_alloc, Precoder, SystemConfig};
//!
//! let cfg = SystemConfig::default();
//! let equal = power_alloc::equal_power_baseline(&cfg, Precoder::Zf).unwrap();
//! let tuned = power_alloc::solve_algorithm1(&cfg, Precoder::Zf).unwrap();
//! assert!(tuned.report.ee_sec >= equal.report.ee_sec);
//! ```
#![no_std]
#![warn(missing_docs)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod antenna_selection;
pub mod cell_division;
pub mod channel;
pub mod cmatrix;
pub mod config;
pub mod error;
pub mod metrics;
pub mod power_alloc;
mod response;

pub use config::{AntennaRule, GroupRule, Precoder, SystemConfig, UpdateOrder};
pub use error::{Error, Result};
pub use metrics::RateReport;
pub use power_alloc::{DualState, PowerSolution, TraceEntry};
