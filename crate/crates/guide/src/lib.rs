//! Compile-checks the guide's code snippets as doc-tests. Each chapter of
//! `book/` is included as the documentation of an empty module, so
//! `cargo test -p guide` runs every fenced Rust block in the book.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/mood-blocks.md")]
pub mod mood_blocks {}

#[doc = include_str!("../../../book/src/drift-fusion.md")]
pub mod drift_fusion {}

#[doc = include_str!("../../../book/src/liquid-clocks.md")]
pub mod liquid_clocks {}

#[doc = include_str!("../../../book/src/curation.md")]
pub mod curation {}

#[doc = include_str!("../../../book/src/mesh.md")]
pub mod mesh {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
