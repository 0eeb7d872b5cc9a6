//! Test support: random micro-projects and brute-force reference
//! implementations.
//!
//! Nothing in [`oracle`] calls into the computational parts of
//! `trtm-core`; only its plain data types cross the boundary.

pub mod oracle;
pub mod project;

use std::path::PathBuf;

/// The hand-built micro-project shipped with the core crate's tests.
pub fn micro_fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/micro")
}
