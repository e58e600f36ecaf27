//! Read-only, analytics-ready view of a campaign.
//!
//! Built either from a live campaign or from an imported release file, so
//! every statistic runs identically on both.

use serde::{Deserialize, Serialize};

use crate::model::{Comment, SubjectLabel, Verdict, DEFAULT_CATEGORIES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSnapshot {
    pub categories: Vec<String>,
    pub images: Vec<SnapshotImage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotImage {
    pub id: String,
    pub feature: Option<Vec<f32>>,
    pub subject: Option<SubjectLabel>,
    pub judgments: Vec<SnapshotJudgment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotJudgment {
    pub annotator: String,
    pub verdict: Verdict,
    pub comment: Option<Comment>,
}

impl SnapshotImage {
    pub fn comments(&self) -> impl Iterator<Item = &Comment> {
        self.judgments.iter().filter_map(|j| j.comment.as_ref())
    }

    pub fn comment_count(&self) -> usize {
        self.comments().count()
    }

    pub fn has_comment(&self) -> bool {
        self.comments().next().is_some()
    }
}

impl CampaignSnapshot {
    pub fn with_default_categories(images: Vec<SnapshotImage>) -> Self {
        CampaignSnapshot {
            categories: DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            images,
        }
    }

    pub fn comment_count(&self) -> usize {
        self.images.iter().map(SnapshotImage::comment_count).sum()
    }

    pub fn judgment_count(&self) -> usize {
        self.images.iter().map(|i| i.judgments.len()).sum()
    }

    pub fn image(&self, id: &str) -> Option<&SnapshotImage> {
        self.images.iter().find(|i| i.id == id)
    }
}
