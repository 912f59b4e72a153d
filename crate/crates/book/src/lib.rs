//! Guide chapters, compiled so their examples run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/sources.md")]
pub mod sources {}

#[doc = include_str!("../../../book/src/quantizers.md")]
pub mod quantizers {}

#[doc = include_str!("../../../book/src/schemes.md")]
pub mod schemes {}

#[doc = include_str!("../../../book/src/lattice.md")]
pub mod lattice {}

#[doc = include_str!("../../../book/src/control_loop.md")]
pub mod control_loop {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

