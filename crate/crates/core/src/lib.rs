//! Sentiment classification workbench for Indonesian product reviews.
//!
//! The pipeline runs raw review text through normalization ([`text_prep`]),
//! turns it into TF-IDF rows ([`tfidf`]) or id sequences ([`bilstm`]), trains
//! one of five model families, and scores them ([`metrics`]). Trained models
//! are written to a versioned binary file ([`model_store`]); [`bench`] drives
//! cross-validated comparison and tuning, and [`serve`] exposes prediction
//! over HTTP.

pub mod bilstm;
pub mod bench;
pub mod corpus;
pub mod error;
pub mod gbdt;
pub mod label;
pub mod linear;
pub mod math;
pub mod metrics;
pub mod model_store;
pub mod rng;
pub mod serve;
pub mod text_prep;
pub mod tfidf;

pub use error::{Error, Result};
pub use label::{Label, NUM_CLASSES};
