//! Variable-length Markov chain models of web navigation.
//!
//! Sessions of page requests are turned into a first-order Markov model
//! whose states are pages, then into a variable-order model by cloning the
//! states whose transition probabilities disagree with higher-order n-gram
//! estimates. The resulting models are used to rank long navigation trails
//! (compared against n-gram frequencies) and to predict the next page of a
//! session.
//!
//! The numeric core is generic over [`Scalar`]; [`Exact`] is an arbitrary
//! precision rational for when ties and thresholds must be decided exactly.

pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod ngram;
pub mod scalar;
pub mod token;
pub mod trails;

#[cfg(test)]
mod testutil;

use num_rational::BigRational;

pub use error::{Error, Result};
pub use eval::{footrule, overlap, predict_next, FoldPlan, PredictionReport};
pub use model::{
    build_first_order, build_vlmc, build_vlmc_orders, BuildParams, GammaMode, ModelGraph, ModelGraphBuilder, State,
    StateId, VlmcBuilder,
};
pub use ngram::{count_ngrams, top_m_ngrams, NGramIndex, NGramTable, RankedList};
pub use scalar::Scalar;
pub use token::{PageId, Token};
pub use trails::{extract_trails, top_m_trails, LengthMode, TrailQuery};

/// Exact rational probabilities.
pub type Exact = BigRational;

pub type DivergenceTable = model::DivergenceTable<f64>;
pub type ExactDivergenceTable = model::DivergenceTable<Exact>;
pub type Trail = trails::Trail<f64>;
pub type ExactTrail = trails::Trail<Exact>;
pub type ListComparison = eval::ListComparison<f64>;
pub type ExactListComparison = eval::ListComparison<Exact>;
pub type PredictionOutcome = eval::PredictionOutcome<f64>;
