//! Negation- and speculation-aware filtering of adverse drug event (ADE)
//! predictions on social-media text.
//!
//! The pieces compose into one pipeline:
//!
//! 1. [`extractor`] produces candidate ADE spans for a text, either from a
//!    lexicon or from an external model's prediction file.
//! 2. [`scope`] detects negation and speculation scopes with a cue-lexicon
//!    rule engine.
//! 3. [`algebra`] discards every ADE span that intersects a scope.
//! 4. [`metrics`] scores the result with relaxed (partial-match) precision,
//!    recall and F1 and breaks false positives down by sample class.
//!
//! [`corpus`] holds the file formats and training-set composition, and
//! [`text`] the shared span, token and BIO types.

pub mod algebra;
pub mod corpus;
pub mod extractor;
pub mod metrics;
mod phrase;
pub mod scope;
pub mod text;

pub use algebra::{combine, filter_by_scopes, overlaps, EntitySet, FilterReport, FilterSelection};
pub use corpus::{CorpusFormat, CorpusPartition, PredictionFile};
pub use extractor::{AdeExtractor, AdeLexicon, LexiconExtractor, PredictionExtractor};
pub use metrics::{evaluate_corpus, match_spans, relaxed_scores, MatchReport, Scores};
pub use scope::{CueLexicon, Phenomenon, ScopeConfig, ScopeDetector, ScopeSet, ScopeSpan};
pub use text::{LabeledSample, RawText, SampleClass, Span, Token};
