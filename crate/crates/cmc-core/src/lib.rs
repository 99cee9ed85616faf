//! Candidate multi-cut segmentation.
//!
//! Segment candidates from a merge-tree are jointly *selected* (foreground
//! vs. background) and *clustered* (adjacent candidates merged into one
//! object) by an exact integer program. The crate covers the full chain:
//!
//! * [`hierarchy`]: seeded watershed, greedy merge-tree, candidate extraction
//! * [`crag`]: the candidate region adjacency graph and constraint checking
//! * [`features`]: node and edge feature vectors
//! * [`costmodel`]: training targets, random forests, costs
//! * [`solver`]: branch-and-bound with lazily separated path constraints
//! * [`eval`]: variation of information, Rand index, detection score
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod costmodel;
pub mod crag;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod forest;
pub mod hierarchy;
pub mod image;
pub mod solver;
pub mod stats;
mod unionfind;

pub use costmodel::CostTable;
pub use crag::{CandidateId, Crag, Edge, Solution};
pub use image::{BoundaryMap, LabelImage, Raster};
pub use solver::Mode;
pub use unionfind::UnionFind;
