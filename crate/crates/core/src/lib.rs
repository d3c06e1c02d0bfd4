//! Polarized-topic detection between two partisan text corpora.
//!
//! The pipeline trains an LDA topic model on the combined corpus, encodes
//! documents with a partisanship-aware contextual encoder, aggregates keyword
//! embeddings into per-document and per-corpus topic embeddings, and ranks
//! topics by the cosine distance between the two sides' corpus embeddings.
//! The leave-out estimator baseline and an annotation-driven evaluation
//! harness live alongside.

pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod io;
pub mod loe;
pub mod polarization;
pub mod topics;
