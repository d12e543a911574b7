//! IO formats, experiment harness, and selftest suites behind the `modelmix`
//! binary. Exposed as a library so integration tests can drive the harness
//! directly.

pub mod csvio;
pub mod experiments;
pub mod selftest;
