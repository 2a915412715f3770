//! Subcommand implementations. Each takes its parsed configuration and an
//! output directory, writes a report, and returns whether every enabled
//! check passed.

pub mod activation_hist;
pub mod bound_check;
pub mod gmm_phase;
pub mod stats_verify;
pub mod train;
