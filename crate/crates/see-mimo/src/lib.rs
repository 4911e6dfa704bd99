//! Monte-Carlo harness and command-line front end for `see-mimo-core`.
//!
//! ```no_run
//! use see_mimo::harness::{builtin_figure, run_sweep};
//!
//! let mut spec = builtin_figure("fig2").unwrap();
//! spec.trials = 10;
//! let table = run_sweep(&spec).unwrap();
//! println!("{} rows", table.records.len());
//! ```

#![warn(missing_docs)]
// `!(x > y)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod harness;
