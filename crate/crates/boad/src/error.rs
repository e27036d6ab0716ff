//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants are grouped by the
//! surface they guard: argument preconditions, archive integrity, snapshot and
//! run-log persistence, model-response parsing, and transport.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition (empty input, zero round,
    /// out-of-range probability, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An arm with this id is already present in the archive.
    #[error("duplicate arm id: {0}")]
    DuplicateArm(String),

    /// The referenced arm does not exist where it was expected to.
    #[error("unknown arm: {0}")]
    UnknownArm(String),

    /// A sub-agent spec failed one of its structural invariants.
    #[error("invalid spec for arm {arm}: {reason}")]
    SpecInvariant { arm: String, reason: String },

    /// A snapshot could not be decoded or failed integrity checks.
    #[error("snapshot rejected: {0}")]
    Snapshot(String),

    /// A snapshot declared a schema version this build does not understand.
    #[error("unsupported snapshot version {found} (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },

    /// A model response could not be parsed even after the retry.
    #[error("unparseable {what}: {detail}")]
    Parse { what: String, detail: String },

    /// Template rendering was given the wrong binding set.
    #[error("template {asset}: {detail}")]
    Template { asset: String, detail: String },

    /// A judge call failed for a specific (arm, instance) pair.
    #[error("judge failed for arm {arm} on instance {instance}: {detail}")]
    Judge {
        arm: String,
        instance: String,
        detail: String,
    },

    /// Transport-level failure that survived the retry budget.
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },

    /// The endpoint answered with a non-2xx status.
    #[error("provider returned HTTP {status}: {body}")]
    Protocol { status: u16, body: String },

    /// An evaluation backend failed in a way that is not retryable.
    #[error("evaluation backend: {0}")]
    Backend(String),

    /// The event log is unreadable or internally inconsistent.
    #[error("corrupt run log ({detail}); last valid sequence number: {last_valid_seq}")]
    CorruptLog { detail: String, last_valid_seq: u64 },

    /// Run configuration is invalid or incomplete for the requested mode.
    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand for the most common precondition failure.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
