//! Compiles every code listing of the guide in `book/` as a doc-test, one
//! module per chapter so failures point at their chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/splines.md")]
pub mod splines {}
#[doc = include_str!("../../../book/src/estimation.md")]
pub mod estimation {}
#[doc = include_str!("../../../book/src/gcv.md")]
pub mod gcv {}
#[doc = include_str!("../../../book/src/noisy-curves.md")]
pub mod noisy_curves {}
#[doc = include_str!("../../../book/src/prediction.md")]
pub mod prediction {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/files-and-cli.md")]
pub mod files_and_cli {}
