//! Concept alignment for the units of a character-level convolutional text
//! classifier.
//!
//! The pipeline trains a [`Model`] on a [`Corpus`], ranks candidate
//! concepts per unit by the activation of a replicated probe sentence
//! ([`Aligner`]), then analyses the alignments ([`Evaluator`],
//! [`clustering`]).

pub mod alignment;
pub mod charcnn;
pub mod clustering;
pub mod concepts;
pub mod corpus;
mod error;
pub mod evaluation;
pub mod report;

pub use alignment::{AlignmentConfig, Aligner, DoaMetric, Interpretability, ScoredConcept, TopSentence, UnitAlignment};
pub use charcnn::{EpochStats, LayerSpec, Model, ModelConfig, Pooling, TrainConfig};
pub use clustering::{Dendrogram, EmbeddingTable};
pub use concepts::{Concept, ConceptKind, Segmenter};
pub use corpus::{Alphabet, AlphabetSpec, Corpus, Sentence, SyntheticSpec};
pub use error::{Error, Result};
pub use evaluation::{Evaluator, SelectivityMode};
