//! Library side of the `snowfrost` command: analysis reports, presets,
//! seed sweeps and replay.

pub mod analyze;
pub mod error;
pub mod presets;
pub mod simulate;

pub use error::CliError;

/// Exit code for a clean result.
pub const EXIT_OK: i32 = 0;
/// Exit code when a monitor flags a violation or a recomputed value
/// disagrees with its published counterpart.
pub const EXIT_VIOLATION: i32 = 1;
/// Exit code for bad arguments, configs or traces.
pub const EXIT_USAGE: i32 = 2;
