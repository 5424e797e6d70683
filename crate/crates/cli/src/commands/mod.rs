//! Subcommand implementations.

mod benchmark;
mod calibrate;
mod diagnose;
mod gen_moons;
mod support;

pub use benchmark::cmd_benchmark;
pub use calibrate::cmd_calibrate;
pub use diagnose::cmd_diagnose;
pub use gen_moons::cmd_gen_moons;
pub use support::cmd_support;
