use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: expected `key = value`, got `{text}`")]
    Syntax { origin: String, line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` = `{value}` is not {expected}")]
    Parse {
        key: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("`{key}` = {value} is out of range: expected {range}")]
    Range {
        key: &'static str,
        value: String,
        range: &'static str,
    },
    #[error("`{key}`: {reason}")]
    Conflict { key: &'static str, reason: &'static str },
    #[error(transparent)]
    Invalid(svadi_core::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] svadi_core::Error),
    #[error("{0} is not available for the zero model")]
    NeedsFamily(&'static str),
    #[error("non-finite result: {0}")]
    NonFinite(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
    #[error("cannot set up worker threads: {0}")]
    Threads(String),
}
