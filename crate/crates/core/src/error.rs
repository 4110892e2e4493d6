use std::fmt;

/// Byte range into a query or native-query text.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

// Spans are positional metadata; two trees parsed from differently spaced
// text are the same tree.
impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _state: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("syntax error at {span}: {message}")]
    Syntax {
        span: Span,
        message: String,
        expected: Vec<String>,
    },

    #[error("unknown engine `{0}`")]
    UnknownEngine(String),

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("object `{name}` already exists on engine `{engine}`")]
    DuplicateObject { name: String, engine: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("ambiguous column `{0}`")]
    AmbiguousColumn(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("coordinate out of bounds: {0}")]
    OutOfBounds(String),

    #[error("unknown island `{0}`")]
    UnknownIsland(String),

    #[error("operator `{operator}` is not part of island `{island}`")]
    OperatorNotInIsland { island: String, operator: String },

    #[error("island `{island}` has no shim for operator `{operator}` on engine `{engine}`")]
    Unsupported {
        island: String,
        engine: String,
        operator: String,
    },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("cast error: {0}")]
    Cast(String),

    #[error("planning error: {0}")]
    Plan(String),

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("monitor: {0}")]
    Monitor(String),

    #[error("CIF error at line {line}: {message}")]
    Cif { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn syntax(span: Span, message: impl Into<String>, expected: Vec<String>) -> Self {
        Error::Syntax {
            span,
            message: message.into(),
            expected,
        }
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            Error::Syntax { span, .. } => Some(*span),
            Error::Step { source, .. } => source.span(),
            _ => None,
        }
    }

    /// Errors caused by the query itself, as opposed to the environment or
    /// an internal invariant breaking.
    pub fn is_query_error(&self) -> bool {
        !matches!(self, Error::Consistency(_) | Error::Io(_) | Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
