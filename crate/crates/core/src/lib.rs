//! Tree search over mixtures of training datasets.
//!
//! Given `K` training sources and a small validation set drawn from an
//! unknown mixture of them, [`treesearch::mix_and_match`] searches the
//! simplex of mixture weights with an optimistic tree search. Each node of
//! the tree is a simplicial cell; evaluating a node means warm-starting SGD
//! from its parent's model, training on samples drawn from the cell's
//! representative mixture, and scoring the result on the validation set.
//!
//! The crate also ships the pieces needed to check the method on problems
//! with known ground truth: synthetic suites with a latent feature
//! ([`problems`]), an SGD engine with a last-iterate concentration bound
//! calculator ([`sgd`]), reference training policies ([`baselines`]), and
//! regret, ingestion, and verification drivers ([`harness`]).

pub mod baselines;
pub mod error;
pub mod harness;
mod linalg;
pub mod problems;
pub mod rng;
pub mod sgd;
pub mod simplex;
pub mod treesearch;

pub use error::{Error, Result};
pub use simplex::{MixtureWeights, PartitionStrategy, SimplexCell};
