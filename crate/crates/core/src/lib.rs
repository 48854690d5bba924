//! Sentence embedding training with contrastive, ranking-consistency, and
//! listwise ranking-distillation objectives.
//!
//! The pieces, bottom up:
//!
//! - [`vectors`]: cosine similarity and its gradient, batch similarity matrices
//! - [`rankprob`]: top-one and permutation probabilities of score lists
//! - [`losses`]: InfoNCE, JS consistency, ListNet, ListMLE, and their weighted sum
//! - [`encoder`]: embedding-table encoder with dropout views, Adam, checkpoints, training loop
//! - [`teacher`]: frozen teacher embeddings and the two-teacher blend
//! - [`metrics`]: Spearman, Kendall tau-b, NDCG, alignment, uniformity
//! - [`data_io`]: corpus and STS loading, vocabulary, batching

pub mod data_io;
pub mod encoder;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod rankprob;
pub mod seeding;
pub mod teacher;
pub mod toy;
pub mod vectors;

pub use error::{Error, Result};
