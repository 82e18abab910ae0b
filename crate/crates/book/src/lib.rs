//! The guide under `book/`, compiled so that every listing runs as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/control-law.md")]
pub mod control_law {}

#[doc = include_str!("../../../book/src/plants.md")]
pub mod plants {}

#[doc = include_str!("../../../book/src/integration.md")]
pub mod integration {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
