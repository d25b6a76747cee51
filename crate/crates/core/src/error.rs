use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("topic `{topic}` carries {expected} payloads, got {got}")]
    KindMismatch { topic: String, expected: String, got: String },
    #[error("subscriber `{subscriber}` already subscribed to `{topic}`")]
    DuplicateSubscription { topic: String, subscriber: String },
    #[error("publisher `{publisher}` went back in time ({time} < {last})")]
    TimeRegression { publisher: String, time: u64, last: u64 },

    #[error("object `{0}` is off table")]
    OffTable(String),
    #[error("duplicate object id `{0}`")]
    DuplicateObject(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("object `{0}` is already held")]
    AlreadyHeld(String),
    #[error("invalid hand: {0}")]
    InvalidHand(String),

    #[error("grid dimension mismatch: {0:?} vs {1:?}")]
    DimMismatch((usize, usize), (usize, usize)),
    #[error("unknown color channel `{0}`")]
    UnknownColor(String),

    #[error("no table intersection")]
    NoTableIntersection,

    #[error("empty utterance")]
    EmptyUtterance,
    #[error("uninterpretable")]
    Uninterpretable,
    #[error("lexicon line {line}: {msg}")]
    Lexicon { line: usize, msg: String },

    #[error("no visual objects")]
    NoVisualObjects,
    #[error("no consistent interpretation")]
    NoConsistentInterpretation,
    #[error("invalid CPT: {0}")]
    Cpt(String),

    #[error("unresolvable reference")]
    UnresolvableReference,

    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("manipulation fault: {0}")]
    ManipFault(String),

    #[error("scenario: {0}")]
    Scenario(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
