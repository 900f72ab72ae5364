//! The guide's chapters, included as documentation so that `cargo test`
//! compiles and runs every snippet in them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/channels.md")]
pub mod channels {}
#[doc = include_str!("../../../book/src/link.md")]
pub mod link {}
#[doc = include_str!("../../../book/src/positions.md")]
pub mod positions {}
#[doc = include_str!("../../../book/src/joint.md")]
pub mod joint {}
#[doc = include_str!("../../../book/src/mixtures.md")]
pub mod mixtures {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
