use thiserror::Error;

use crate::skill_model::SubSkillId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("sub-skill {0} is not calibrated")]
    Uncalibrated(SubSkillId),

    #[error("no calibrated sub-skill to select from")]
    NoCalibratedSubSkill,

    #[error("illegal action `{given}`; legal actions: {legal:?}")]
    InvalidAction { given: String, legal: Vec<String> },

    /// The request does not fit the current phase of a session.
    #[error("conflict: {0}")]
    Conflict(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
