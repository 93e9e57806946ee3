use thiserror::Error;

/// A parse failure at a byte offset of the source text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{context}at offset {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
    /// Prefix naming where the text came from, e.g. `g[2] `.
    pub context: String,
}

impl ParseError {
    pub fn new(pos: usize, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
            context: String::new(),
        }
    }

    pub fn within(mut self, context: impl Into<String>) -> Self {
        self.context = format!("{} ", context.into());
        self
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error {0}")]
    Parse(#[from] ParseError),
    #[error("malformed document: {0}")]
    Document(String),
    #[error("invalid system: {0}")]
    Shape(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(
        "mu-sequence did not stabilize by k = {cap} ({mode} ranks, mu = {mu:?}); \
         the right-hand sides g are probably not differentially algebraically independent"
    )]
    NotStabilized {
        cap: u32,
        mode: String,
        mu: Vec<u32>,
    },
    #[error("rank failure or hypothesis violation: {0}")]
    RankFailure(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::Document(_)
            | Error::Shape(_)
            | Error::Precondition(_)
            | Error::Io(_) => 2,
            Error::NotStabilized { .. } | Error::RankFailure(_) => 3,
            Error::ResourceCap(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
