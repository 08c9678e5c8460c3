use thiserror::Error;

use crate::catalog::ObjectClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate push direction")]
    DegeneratePushDirection,

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },

    #[error("unknown action target: {0}")]
    UnknownActionTarget(ObjectClass),

    #[error("empty description")]
    EmptyDescription,

    #[error("unparseable action: {0}")]
    Unparseable(String),

    #[error("unknown target")]
    UnknownTarget,

    #[error("insufficient class coverage: no training example for {0}")]
    InsufficientCoverage(String),

    #[error("no training data")]
    NoTrainingData,

    #[error("no trajectory for removed object {0}")]
    RemovedTrajectory(ObjectClass),

    #[error("degenerate labels: grid search needs both affected and unaffected examples")]
    DegenerateLabels,

    #[error("subject is the acted object ({0})")]
    SubjectIsActedObject(ObjectClass),

    #[error("subject {0} is not part of the simulation")]
    UnknownSubject(ObjectClass),

    #[error("no examples")]
    NoExamples,

    #[error("cannot place scene after {0} rejections")]
    CannotPlaceScene(usize),

    #[error("dataset has {0} batches, at least 15 are needed for the train/test split")]
    TooFewBatches(usize),

    #[error("missing model: {0}")]
    MissingModel(&'static str),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Whether the error is caused by bad input data rather than a fault in
    /// the program itself.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Diverged { .. })
    }
}
