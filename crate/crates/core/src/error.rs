use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // submission validation
    #[error("annotator {annotator} already judged image {image}")]
    DuplicateJudgment { annotator: String, image: String },
    #[error("a yes verdict requires a comment")]
    MissingComment,
    #[error("a no verdict must not carry a comment")]
    UnexpectedComment,
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("comment text is empty")]
    EmptyCommentText,
    #[error("comment text has {len} characters, the limit is {max}")]
    CommentTooLong { len: usize, max: usize },

    // lookups and lifecycle
    #[error("unknown campaign {0}")]
    UnknownCampaign(String),
    #[error("unknown image {0}")]
    UnknownImage(String),
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error("campaign is {0}, not active")]
    CampaignClosed(String),
    #[error("campaign is {0}; images can only be added to a draft campaign")]
    CampaignActive(String),
    #[error("invalid status transition from {from} to {to}")]
    InvalidTransition { from: String, to: String },
    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("annotator count must be at least 1")]
    InvalidCount,
    #[error("unknown subject {0:?}, expected one of Females, Males, Mixed, Nobody")]
    UnknownSubject(String),
    #[error("unknown language {0:?}")]
    UnknownLanguage(String),

    // analytics
    #[error("no unit has two or more values")]
    NoPairableUnits,
    #[error("all pairable values fall into one category; expected disagreement is zero")]
    DegenerateMarginals,
    #[error("contingency table has an empty {axis} {label:?}")]
    ZeroMarginal { axis: &'static str, label: String },
    #[error("no-sample image {0} has a comment")]
    SampleContainsCommentedImage(String),
    #[error("image {0} has no subject label")]
    MissingSubject(String),

    // dataset io
    #[error("manifest has no entries")]
    EmptyManifest,
    #[error("feature row {row}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("feature row {row}: unknown image id {id:?}")]
    UnknownImageId { row: usize, id: String },
    #[error("campaign has no judgments to export")]
    NothingToExport,
    #[error("line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
    #[error("malformed input: {0}")]
    Malformed(String),

    // service
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("missing, expired or revoked credentials")]
    Unauthorized,
    #[error("image {0} is not the currently offered image")]
    StaleImage(String),
    #[error("unknown report {0:?}")]
    UnknownReport(String),
    #[error("message catalog {language:?} lacks key {key:?}")]
    IncompleteCatalog { language: String, key: String },

    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code, used in JSON error payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateJudgment { .. } => "duplicate_judgment",
            Error::MissingComment => "missing_comment",
            Error::UnexpectedComment => "unexpected_comment",
            Error::UnknownCategory(_) => "unknown_category",
            Error::EmptyCommentText => "empty_comment_text",
            Error::CommentTooLong { .. } => "comment_too_long",
            Error::UnknownCampaign(_) => "unknown_campaign",
            Error::UnknownImage(_) => "unknown_image",
            Error::UnknownAnnotator(_) => "unknown_annotator",
            Error::CampaignClosed(_) => "campaign_closed",
            Error::CampaignActive(_) => "campaign_active",
            Error::InvalidTransition { .. } => "invalid_transition",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::InvalidCount => "invalid_count",
            Error::UnknownSubject(_) => "unknown_subject",
            Error::UnknownLanguage(_) => "unknown_language",
            Error::NoPairableUnits => "no_pairable_units",
            Error::DegenerateMarginals => "degenerate_marginals",
            Error::ZeroMarginal { .. } => "zero_marginal",
            Error::SampleContainsCommentedImage(_) => "sample_contains_commented_image",
            Error::MissingSubject(_) => "missing_subject",
            Error::EmptyManifest => "empty_manifest",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UnknownImageId { .. } => "unknown_image_id",
            Error::NothingToExport => "nothing_to_export",
            Error::SchemaViolation { .. } => "schema_violation",
            Error::Malformed(_) => "malformed",
            Error::InvalidCredentials => "invalid_credentials",
            Error::Unauthorized => "unauthorized",
            Error::StaleImage(_) => "stale_image",
            Error::UnknownReport(_) => "unknown_report",
            Error::IncompleteCatalog { .. } => "incomplete_catalog",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// The offending input field, when the error is about one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::InvalidConfig { field, .. } => Some(field),
            Error::MissingComment | Error::UnexpectedComment => Some("comment"),
            Error::EmptyCommentText | Error::CommentTooLong { .. } => Some("comment.text"),
            Error::UnknownCategory(_) => Some("comment.trigger"),
            Error::InvalidCount => Some("count"),
            Error::StaleImage(_) => Some("image_id"),
            _ => None,
        }
    }

    /// True for errors caused by caller input rather than the environment.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
