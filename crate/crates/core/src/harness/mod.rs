//! Configuration, batch execution, manifests and the acceptance suite.

pub mod config;
pub mod manifest;
pub mod run;
pub mod verify;

pub use config::{ExperimentConfig, Scenario};
pub use manifest::RunManifest;
pub use run::run;
