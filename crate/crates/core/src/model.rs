//! Campaign, image, annotator and judgment types plus the submission rules
//! every recorded judgment satisfies.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::auth::CredentialHash;
use crate::error::{Error, Result};

/// Trigger categories offered when a campaign does not configure its own.
pub const DEFAULT_CATEGORIES: [&str; 7] = [
    "Body",
    "Clothing",
    "Pose",
    "Facial expression",
    "Location",
    "Activity",
    "Other",
];

pub const DEFAULT_PROMPT_KEY: &str = "prompt.default";
pub const DEFAULT_FEATURE_DIM: usize = 512;
pub const MAX_COMMENT_CHARS: usize = 2000;

macro_rules! prefixed_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }

        impl $name {
            pub const PREFIX: &'static str = $prefix;

            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0)
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                s.strip_prefix($prefix)
                    .and_then(|n| n.parse().ok())
                    .map($name)
                    .ok_or_else(|| Error::Malformed(format!("{s:?} is not a {} id", $prefix)))
            }
        }
    };
}

prefixed_id!(
    /// Installation-wide campaign identifier, rendered `cmp_<n>`.
    CampaignId,
    "cmp_"
);
prefixed_id!(
    /// Campaign-local image identifier, rendered `img_<n>`. Dense from zero.
    ImageId,
    "img_"
);
prefixed_id!(
    /// Installation-wide annotator identifier, rendered `ann_<n>`.
    AnnotatorId,
    "ann_"
);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignStatus {
    Draft,
    Active,
    Closed,
}

impl fmt::Display for CampaignStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CampaignStatus::Draft => "draft",
            CampaignStatus::Active => "active",
            CampaignStatus::Closed => "closed",
        })
    }
}

impl FromStr for CampaignStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "draft" => Ok(CampaignStatus::Draft),
            "active" => Ok(CampaignStatus::Active),
            "closed" => Ok(CampaignStatus::Closed),
            other => Err(Error::Malformed(format!("unknown status {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub id: CampaignId,
    pub name: String,
    pub prompt_key: String,
    pub categories: Vec<String>,
    /// Target number of judgments per image. Soft: see the assignment engine.
    pub quota: u32,
    pub default_language: String,
    pub languages: Vec<String>,
    pub status: CampaignStatus,
    /// Feature dimension, fixed by the first attached feature file.
    pub feature_dim: Option<usize>,
    pub seed: u64,
}

impl Campaign {
    pub fn has_category(&self, label: &str) -> bool {
        self.categories.iter().any(|c| c == label)
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    /// Checks the quota and category-set invariants.
    pub fn check(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(config_error("name", "must not be empty"));
        }
        if self.quota < 1 {
            return Err(config_error("quota", "must be at least 1"));
        }
        check_categories(&self.categories)?;
        if !self.languages.contains(&self.default_language) {
            return Err(config_error(
                "default_language",
                "must be one of the campaign languages",
            ));
        }
        Ok(())
    }

    pub fn transition(&mut self, to: CampaignStatus) -> Result<()> {
        use CampaignStatus::*;
        match (self.status, to) {
            (Draft, Active) | (Active, Closed) | (Draft, Closed) => {
                self.status = to;
                Ok(())
            }
            (from, to) if from == to => Ok(()),
            (from, to) => Err(Error::InvalidTransition {
                from: from.to_string(),
                to: to.to_string(),
            }),
        }
    }
}

pub(crate) fn config_error(field: &str, message: &str) -> Error {
    Error::InvalidConfig {
        field: field.to_owned(),
        message: message.to_owned(),
    }
}

pub fn check_categories(categories: &[String]) -> Result<()> {
    if categories.is_empty() {
        return Err(config_error(
            "categories",
            "at least one category is required",
        ));
    }
    let mut seen = HashSet::new();
    for c in categories {
        if c.trim().is_empty() {
            return Err(config_error("categories", "labels must be non-empty"));
        }
        if !seen.insert(c.as_str()) {
            return Err(config_error(
                "categories",
                &format!("duplicate label {c:?}"),
            ));
        }
    }
    Ok(())
}

/// Where an image lives. External URLs are recognised by their scheme.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageSource {
    Path(String),
    Url(String),
}

impl ImageSource {
    pub fn parse(raw: &str) -> Self {
        let lower = raw.to_ascii_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") {
            ImageSource::Url(raw.to_owned())
        } else {
            ImageSource::Path(raw.to_owned())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            ImageSource::Path(s) | ImageSource::Url(s) => s,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubjectLabel {
    Females,
    Males,
    Mixed,
    Nobody,
}

impl SubjectLabel {
    pub const ALL: [SubjectLabel; 4] = [
        SubjectLabel::Females,
        SubjectLabel::Males,
        SubjectLabel::Mixed,
        SubjectLabel::Nobody,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SubjectLabel::Females => "Females",
            SubjectLabel::Males => "Males",
            SubjectLabel::Mixed => "Mixed",
            SubjectLabel::Nobody => "Nobody",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SubjectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubjectLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        SubjectLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownSubject(s.to_owned()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageItem {
    pub id: ImageId,
    pub campaign_id: CampaignId,
    pub source: ImageSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<SubjectLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_labeled_at: Option<DateTime<Utc>>,
}

impl ImageItem {
    /// Last write wins; the timestamp records when the label last changed.
    pub fn set_subject(&mut self, label: SubjectLabel, at: DateTime<Utc>) {
        self.subject = Some(label);
        self.subject_labeled_at = Some(at);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotator {
    pub id: AnnotatorId,
    pub campaign_id: CampaignId,
    pub username: String,
    pub credential: CredentialHash,
    pub language: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
        })
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yes" => Ok(Verdict::Yes),
            "no" => Ok(Verdict::No),
            other => Err(Error::Malformed(format!("unknown verdict {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub text: String,
    pub trigger: String,
}

/// Unvalidated comment input, as typed by an annotator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentDraft {
    pub text: String,
    pub trigger: String,
}

impl CommentDraft {
    pub fn new(text: impl Into<String>, trigger: impl Into<String>) -> Self {
        CommentDraft {
            text: text.into(),
            trigger: trigger.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub id: u32,
    pub annotator: AnnotatorId,
    pub image: ImageId,
    pub verdict: Verdict,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<Comment>,
}

/// Answers whether an annotator already judged an image.
pub trait JudgmentLedger {
    fn has_judged(&self, annotator: AnnotatorId, image: ImageId) -> bool;
}

/// A submission that passed every judgment and comment rule.
/// Only [`validate_submission`] constructs one.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedSubmission {
    annotator: AnnotatorId,
    image: ImageId,
    verdict: Verdict,
    comment: Option<Comment>,
}

impl ValidatedSubmission {
    pub fn annotator(&self) -> AnnotatorId {
        self.annotator
    }

    pub fn image(&self) -> ImageId {
        self.image
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn comment(&self) -> Option<&Comment> {
        self.comment.as_ref()
    }

    pub fn into_judgment(self, id: u32, timestamp: DateTime<Utc>) -> Judgment {
        Judgment {
            id,
            annotator: self.annotator,
            image: self.image,
            verdict: self.verdict,
            timestamp,
            comment: self.comment,
        }
    }
}

pub fn validate_submission(
    campaign: &Campaign,
    annotator: &Annotator,
    image: &ImageItem,
    verdict: Verdict,
    comment: Option<CommentDraft>,
    ledger: &impl JudgmentLedger,
) -> Result<ValidatedSubmission> {
    if campaign.status != CampaignStatus::Active {
        return Err(Error::CampaignClosed(campaign.status.to_string()));
    }
    if annotator.campaign_id != campaign.id {
        return Err(Error::UnknownAnnotator(annotator.id.to_string()));
    }
    if image.campaign_id != campaign.id {
        return Err(Error::UnknownImage(image.id.to_string()));
    }
    if ledger.has_judged(annotator.id, image.id) {
        return Err(Error::DuplicateJudgment {
            annotator: annotator.id.to_string(),
            image: image.id.to_string(),
        });
    }
    let comment = match (verdict, comment) {
        (Verdict::No, None) => None,
        (Verdict::No, Some(_)) => return Err(Error::UnexpectedComment),
        (Verdict::Yes, None) => return Err(Error::MissingComment),
        (Verdict::Yes, Some(draft)) => Some(validate_comment(campaign, draft)?),
    };
    Ok(ValidatedSubmission {
        annotator: annotator.id,
        image: image.id,
        verdict,
        comment,
    })
}

fn validate_comment(campaign: &Campaign, draft: CommentDraft) -> Result<Comment> {
    if !campaign.has_category(&draft.trigger) {
        return Err(Error::UnknownCategory(draft.trigger));
    }
    let text = draft.text.trim();
    if text.is_empty() {
        return Err(Error::EmptyCommentText);
    }
    let len = text.chars().count();
    if len > MAX_COMMENT_CHARS {
        return Err(Error::CommentTooLong {
            len,
            max: MAX_COMMENT_CHARS,
        });
    }
    Ok(Comment {
        text: text.to_owned(),
        trigger: draft.trigger,
    })
}
