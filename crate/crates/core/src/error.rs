use crate::graph::ClassId;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("class {class} has {count} instances but the vocabulary allows {max}")]
    VocabularyOverflow { class: ClassId, count: usize, max: u32 },

    #[error("unknown {kind} label `{label}`")]
    UnknownLabel { kind: &'static str, label: String },

    #[error("{kind} index {index} is outside the vocabulary")]
    IndexOutOfRange { kind: &'static str, index: u32 },

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("tree search exceeded {limit} completed branches")]
    BranchBudgetExceeded { limit: usize },

    #[error("exhaustive search space of {size} mappings exceeds the limit of {limit} (per-class gt/pred instance counts: {})", format_counts(.counts))]
    SearchSpaceTooLarge {
        size: f64,
        limit: f64,
        counts: Vec<(ClassId, usize, usize)>,
    },

    #[error("could not generate an adversarial case after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("prediction for unknown image id `{0}`")]
    UnknownImageId(String),

    #[error("image id `{0}` occurs more than once")]
    DuplicateImageId(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// The underlying error, with line context removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLine { source, .. } => source.root(),
            other => other,
        }
    }
}

fn format_counts(counts: &[(ClassId, usize, usize)]) -> String {
    counts
        .iter()
        .map(|(c, g, p)| format!("class {c}: {g}/{p}"))
        .collect::<Vec<_>>()
        .join(", ")
}
