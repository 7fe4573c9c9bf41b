//! The book under `book/` rendered as rustdoc modules.
//!
//! Each module embeds one chapter, so `cargo test --doc` compiles and runs
//! every code block in the guide against the current `steinflow` API. A
//! broken snippet fails the build here, not a reader's afternoon.
//!
//! Render the browsable version with `mdbook build book/`.

#![doc = include_str!("../../../book/src/introduction.md")]

#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}

#[doc = include_str!("../../../book/src/potentials.md")]
pub mod potentials {}

#[doc = include_str!("../../../book/src/particles.md")]
pub mod particles {}

#[doc = include_str!("../../../book/src/meanfield.md")]
pub mod meanfield {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
