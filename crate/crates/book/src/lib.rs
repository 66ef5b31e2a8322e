//! The guide in `book/` is plain mdbook; its listings run here as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/channels.md")]
pub mod channels {}
#[doc = include_str!("../../../book/src/typicality.md")]
pub mod typicality {}
#[doc = include_str!("../../../book/src/decoder.md")]
pub mod decoder {}
#[doc = include_str!("../../../book/src/bounds.md")]
pub mod bounds {}
#[doc = include_str!("../../../book/src/pgm.md")]
pub mod pgm {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
