//! Core algorithms for supercritical branching Lévy processes whose spatial
//! motion has regularly varying tails.
//!
//! The crate is `no_std` (with `alloc`). Every random operation takes an
//! explicit [`rand::Rng`]; nothing here touches the filesystem, threads or
//! the clock. The `bralev` companion crate supplies configuration, parallel
//! replication and file output on top of this.
//!
//! Module map:
//!
//! * [`motion`]: strictly stable, composite and asymmetric 1-stable motions.
//! * [`branching`]: continuous-time Galton–Watson skeleton, `W`, `ϑ`, the
//!   cluster-size law.
//! * [`normalization`]: the scale `h_t`, the tail weights `(q₁, q₂)` and the
//!   power-law measure `v_α`.
//! * [`tree`]: the full genealogy and the point measures read off it.
//! * [`limit`]: the Cox cluster limit process and its closed-form laws.
//! * [`kpp`]: Laplace-functional estimates `u_g(t, x)` and front positions.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod branching;
pub mod error;
pub mod kpp;
pub mod limit;
pub mod measure;
pub mod motion;
pub mod normalization;
pub mod rng;
pub mod special;
pub mod stats;
pub mod tree;

pub use branching::{BranchingConfig, OffspringLaw, ThetaMode};
pub use error::{Error, Result};
pub use limit::{ClusterLaw, LimitSpec, WLaw};
pub use measure::{PointMeasure, TestFunction};
pub use motion::{ComplexExponent, MotionSpec};
pub use normalization::{SlowlyVarying, TailScale};
pub use stats::Estimate;
pub use tree::ParticleTree;
