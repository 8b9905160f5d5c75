//! The chapters of the guide in `book/src`, included here so that every
//! snippet runs as a doc-test.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/concentration.md")]
pub mod concentration {}

#[doc = include_str!("../../../book/src/smoothing.md")]
pub mod smoothing {}

#[doc = include_str!("../../../book/src/progressions.md")]
pub mod progressions {}

#[doc = include_str!("../../../book/src/structure.md")]
pub mod structure {}

#[doc = include_str!("../../../book/src/reports.md")]
pub mod reports {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
