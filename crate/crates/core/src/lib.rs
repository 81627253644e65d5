//! Distribution-free K-sample hypothesis tests based on optimal matching.
//!
//! The pooled sample is paired up by a minimum-weight non-bipartite matching
//! (or connected by a minimum spanning tree), and the number of edges joining
//! points from different groups is used to judge whether the group
//! distributions coincide. Because the null distribution of the resulting
//! count matrix depends only on the group sizes, the tests calibrate exactly
//! without any reference to the data distribution.
//!
//! The crate is `no_std` (with `alloc`); all floating-point math goes through
//! `libm` so results are identical across platforms. IO, file formats and the
//! command line live in the companion `crossmatch-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod alternative;
pub mod counts;
pub mod error;
pub mod geometry;
pub mod ksample;
pub mod linalg;
pub mod null_dist;
pub mod rng;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
