//! Command-line and HTTP front end for the dynamic assurance engine.
//!
//! A project file ties together a safety architecture, a safety
//! measurement basis (SMB), an assurance argument and the persistent run
//! store. The same [`documents`] back both the JSON API and the CLI
//! `report`, so the two never disagree for a given snapshot.

pub mod api;
pub mod documents;
pub mod error;
pub mod project;
pub mod render;
pub mod sources;

pub use error::ServiceError;
pub use project::{Project, ProjectConfig, Snapshot};
