//! Files, configuration, parallel execution and command-line front end for
//! [`reram_dse_core`].

pub mod config;
pub mod error;
pub mod parallel;
pub mod store;
pub mod workspace;

pub use config::ToolkitConfig;
pub use error::{CliError, Result};
pub use workspace::Workspace;
