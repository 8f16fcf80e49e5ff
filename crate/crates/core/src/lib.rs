//! Fill-reducing reordering of sparse symmetric patterns.
//!
//! The crate is organised around the elimination graph of a sparsity pattern:
//!
//! - [`sparsity`]: patterns, orderings and their text formats (Matrix Market, ordering files).
//! - [`symbolic`]: the elimination environment, symbolic Cholesky and a fill-path oracle.
//! - [`features`]: per-node degree and collective-influence features.
//! - [`policy`]: the multi-hop graph-convolution actor–critic with a hand-written reverse pass.
//! - [`trainer`]: episode rollouts, saturated returns, losses and the training loop.
//! - [`orderings`]: natural, random and greedy minimum-degree baselines.
//! - [`datagen`]: Delaunay training graphs.
//! - [`eval`]: fill-in ratio and benchmark reports.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod features;
pub mod orderings;
pub mod policy;
pub mod sparsity;
pub mod symbolic;
pub mod trainer;

pub use error::{Error, Result};
pub use sparsity::{Ordering, SparsityPattern};
pub use symbolic::{EliminationGraph, EliminationTrace};
