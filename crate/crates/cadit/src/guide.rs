//! The book chapters, embedded as rustdoc so their code blocks run as
//! doc-tests. `book/src/*.md` is the single source; this module only
//! includes it.

#[doc = include_str!("../../../book/src/autodiff.md")]
pub mod autodiff_chapter {}
