//! Compact polyhedral conic classification.
//!
//! Each class owns an extended polyhedral conic function (EPCF)
//!
//! ```text
//! f(x) = wᵀ(x − s) + γᵀ|x − s| − b
//! ```
//!
//! whose sublevel set `f ≤ 0` is a bounded "kite" polytope whenever `b > 0`,
//! `γ > 0` and `|wᵢ| < γᵢ` on every axis. A small fully connected network maps
//! inputs to features and a multi-class conic head scores them in the
//! SVM-style tilde form `g = −f`; training minimizes a multi-class hinge loss
//! plus a compactness hinge that keeps every class region bounded with slack
//! `κ`.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `dcepcc` companion crate.
//!
//! Modules:
//! - [`geometry`]: EPCF/PCF evaluation and acceptance-region analysis
//!   (boundedness, axis extents, Monte Carlo volume, half-space oracle).
//! - [`model`]: feature network, conic head, soft-max baseline head.
//! - [`training`]: loss, subgradients, momentum SGD, center updates, `fit`.
//! - [`evaluation`]: accuracy, AP, AU-ROC, score scaling, open-set protocol.
//! - [`data`]: in-memory datasets, synthetic generators, splits, z-scoring.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod data;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod model;
pub mod training;

mod util;

pub use error::{Error, Result};
