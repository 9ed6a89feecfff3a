// SPDX-License-Identifier: MIT OR Apache-2.0

//! Modal difference vectors over language-model activation archives.
//!
//! The crate reads per-layer final-token hidden states from a portable
//! archive format ([`archive`]), estimates contrastive difference vectors
//! between modal categories and selects their layer by cross-validation
//! ([`diffvec`]), compares against log-probability, principal-component and
//! random-direction classifiers ([`baselines`]), fits soft-label logistic
//! models of human category judgements ([`behavior`]), correlates
//! projections with human feature ratings ([`interpret`]), and runs
//! checkpoint/layer/scale sweeps ([`develop`]). [`synth`] generates archives
//! with planted structure for testing.

pub mod archive;
pub mod baselines;
pub mod behavior;
pub mod category;
pub mod develop;
pub mod diffvec;
pub mod error;
pub mod interpret;
pub mod numerics;
pub mod plot;
pub mod synth;

pub use category::{Category, CategoryPair};
pub use error::{Error, Result};
