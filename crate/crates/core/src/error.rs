use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dataset declares no modalities")]
    EmptyDataset,

    #[error("{n} modalities exceed the combinatorial limit of {limit}")]
    CombinatorialLimit { n: usize, limit: usize },

    #[error("invalid modality profile `{name}`: {reason}")]
    InvalidProfile { name: String, reason: String },

    #[error("unknown modality `{0}`")]
    UnknownModality(String),

    #[error("empty intact set has no combination label")]
    EmptyLabel,

    #[error("invalid combination label `{label}`: {reason}")]
    InvalidLabel { label: String, reason: String },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid scenario `{id}`: {reason}")]
    InvalidScenario { id: String, reason: String },

    #[error("tensor shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("value {value} outside [{min}, {max}] for modality `{modality}`")]
    OutOfRange {
        modality: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("class id {id} out of range for {classes} classes at pixel {index}")]
    ClassOutOfRange { id: u16, classes: usize, index: usize },

    #[error("prediction uses ignore index at scored pixel {index}")]
    IgnoredPrediction { index: usize },

    #[error("class count mismatch: {0} vs {1}")]
    ClassCountMismatch(usize, usize),

    #[error("every class has zero union; mIoU is undefined")]
    EmptyEvaluation,

    #[error("metric record is missing combinations: {}", .0.join(", "))]
    MissingCombinations(Vec<String>),

    #[error("p = 1 leaves no surviving combination to normalize over")]
    DegenerateNormalization,

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("predictor for manifest {manifest} exited with {status}: {diagnostics}")]
    PredictorFailed {
        manifest: PathBuf,
        status: String,
        diagnostics: String,
    },

    #[error("predictor for manifest {manifest} timed out after {secs} s")]
    PredictorTimeout { manifest: PathBuf, secs: u64 },

    #[error("no prediction for sample `{sample}` in {dir}")]
    MissingPrediction { sample: String, dir: PathBuf },

    #[error("scenario `{id}`: {source}")]
    Scenario {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_scenario(self, id: &str) -> Self {
        match self {
            e @ Error::Scenario { .. } => e,
            e => Error::Scenario {
                id: id.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by invalid user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parameter { .. } | Error::InvalidLabel { .. }
        )
    }
}

pub(crate) fn check_fraction(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Parameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}
