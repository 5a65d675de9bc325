//! Toxic span detection and evaluation.
//!
//! Spans are sets of character offsets ([`spanops::SpanSet`]). Predictions
//! come from induced or off-the-shelf lexicons ([`lexicon`]), from
//! thresholded per-token attribution scores ([`rationale`]), or from any
//! external system via the span-prediction file format ([`inferred`]).
//! [`metrics`] scores them with the per-sample F1⁺ and its macro average
//! over toxic and non-toxic texts, [`harness`] runs grid searches and
//! in-domain / cross-domain experiments, and [`errsample`] builds
//! error-analysis annotation sheets.

pub mod corpus;
pub mod error;
pub mod errsample;
pub mod harness;
pub mod inferred;
pub mod lexicon;
pub mod metrics;
pub mod rationale;
pub mod spanops;
pub mod synthetic;

use std::collections::BTreeMap;

pub use error::{Error, Result};
pub use spanops::{Span, SpanSet};

/// Span predictions keyed by sample id.
pub type Predictions = BTreeMap<String, SpanSet>;
