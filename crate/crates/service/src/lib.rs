//! Command-line tools and the HTTP instrument service.
//!
//! [`cli`] holds one function per subcommand; each returns a JSON summary
//! that the `doci` binary prints. [`server`] exposes a simulated instrument
//! over HTTP: mode switching, long-polled frames, configuration and
//! classification.

pub mod cli;
pub mod error;
pub mod server;

pub use error::{ErrorBody, Result, ServiceError};

/// Environment variable naming the default output root.
pub const DATA_DIR_ENV: &str = "DOCI_DATA_DIR";

/// Compact UTC timestamp usable as a directory name.
pub fn timestamp_dir_name() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string()
}

pub fn rfc3339_now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
