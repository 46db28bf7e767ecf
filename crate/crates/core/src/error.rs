use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: label {label} out of range for {num_classes} classes")]
    LabelOutOfRange {
        line: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sentence {0} has no label")]
    MissingLabel(usize),

    #[error("training diverged at epoch {epoch}, step {step}: loss is {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint checksum mismatch (file truncated or corrupted)")]
    CheckpointChecksum,

    #[error("malformed checkpoint: {0}")]
    CheckpointFormat(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("model alphabet does not match corpus alphabet")]
    AlphabetMismatch,

    #[error("no unit {unit} in layer {layer}")]
    InvalidUnit { layer: usize, unit: usize },

    #[error("layer {layer} unit {unit}: every corpus sentence contains an aligned concept, negative set is empty")]
    DegenerateNegativeSet { layer: usize, unit: usize },

    #[error("zero variance input to correlation")]
    ZeroVariance,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least {needed} concepts, found {found}")]
    TooFewConcepts { needed: usize, found: usize },

    #[error("concept {0:?} is out of vocabulary")]
    OutOfVocabulary(String),

    #[error("line {line}: expected {expected} vector components, found {found}")]
    EmbeddingArity {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("empty embedding file")]
    EmptyEmbeddings,

    #[error("no unit in layer {0} has two embeddable aligned concepts")]
    NoEligibleUnit(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
