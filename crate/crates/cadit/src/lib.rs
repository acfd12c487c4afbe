//! Conditional adversarial image translation for unsupervised domain
//! adaptation, at desk scale.
//!
//! The crate trains a pair of cycle-consistent generators against two
//! tri-headed discriminators (real/fake, classifier, joint sample-label
//! authenticity) so that both the marginal and the joint sample-label
//! distributions of two domains line up after translation. Pseudo-labels on
//! the unlabeled target domain are weighted by an entropy confidence score.
//! Everything runs on a self-contained reverse-mode autodiff engine in
//! double precision, on synthetic cross-domain datasets.
//!
//! See the guide in `book/` (mirrored under [`guide`]) for a narrative tour,
//! and the `cadit-cli` crate for the experiment runner.

pub mod autodiff;
pub mod eval;
pub mod losses;
pub mod nn;
pub mod synthdata;
pub mod train;

mod util;

pub mod guide;
