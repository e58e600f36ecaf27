//! Release files: JSON lines, one record per judged image.
//!
//! Records carry the feature vector, subject label and every judgment with
//! a per-export annotator pseudonym. Usernames, credentials and image
//! sources are never written.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnnotatorId, Comment, SubjectLabel, Verdict, DEFAULT_CATEGORIES};
use crate::snapshot::{CampaignSnapshot, SnapshotImage, SnapshotJudgment};
use crate::store::CampaignState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportRecord {
    pub image_id: String,
    #[serde(default)]
    pub feature: Option<Vec<f32>>,
    #[serde(default)]
    pub subject: Option<SubjectLabel>,
    pub judgments: Vec<ExportJudgment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportJudgment {
    pub annotator: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<Comment>,
}

/// Maps annotator ids to `a<n>` codes in an order shuffled by `seed`.
pub fn pseudonyms(
    ids: impl IntoIterator<Item = AnnotatorId>,
    seed: u64,
) -> BTreeMap<AnnotatorId, String> {
    let mut ids: Vec<AnnotatorId> = ids.into_iter().collect();
    ids.sort();
    ids.dedup();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids.into_iter()
        .enumerate()
        .map(|(n, id)| (id, format!("a{}", n + 1)))
        .collect()
}

fn records<'a>(
    state: &'a CampaignState,
    names: &'a BTreeMap<AnnotatorId, String>,
) -> impl Iterator<Item = ExportRecord> + 'a {
    state.images().iter().filter_map(move |img| {
        let judgments: Vec<ExportJudgment> = state
            .judgments_on(img.id)
            .map(|j| ExportJudgment {
                annotator: names[&j.annotator].clone(),
                verdict: j.verdict,
                comment: j.comment.clone(),
            })
            .collect();
        (!judgments.is_empty()).then(|| ExportRecord {
            image_id: img.id.to_string(),
            feature: img.feature.clone(),
            subject: img.subject,
            judgments,
        })
    })
}

/// Writes one line per judged image, in image order. Output is a pure
/// function of the campaign contents and `seed`.
pub fn export_release<W: Write>(state: &CampaignState, mut out: W, seed: u64) -> Result<usize> {
    if state.judgments().is_empty() {
        return Err(Error::NothingToExport);
    }
    let names = pseudonyms(state.judgments().iter().map(|j| j.annotator), seed);
    let mut n = 0;
    for record in records(state, &names) {
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

/// Writes the exported feature vectors as a little-endian f32 matrix, in
/// the same order as the release records that carry one.
pub fn export_feature_matrix<W: Write>(state: &CampaignState, out: W) -> Result<usize> {
    let judged: Vec<&[f32]> = state
        .images()
        .iter()
        .filter(|img| state.judgments_on(img.id).next().is_some())
        .filter_map(|img| img.feature.as_deref())
        .collect();
    let dim = state.campaign().feature_dim.unwrap_or(0);
    super::sidecar::write_matrix(out, dim, &judged)?;
    Ok(judged.len())
}

/// Streams validated records out of a release file.
pub struct ReleaseReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
    categories: Vec<String>,
    seen_ids: HashSet<String>,
    dim: Option<usize>,
}

impl<R: BufRead> ReleaseReader<R> {
    pub fn new(reader: R, categories: Vec<String>) -> Self {
        ReleaseReader {
            lines: reader.lines(),
            line: 0,
            categories,
            seen_ids: HashSet::new(),
            dim: None,
        }
    }

    fn violation(&self, message: impl Into<String>) -> Error {
        Error::SchemaViolation {
            line: self.line,
            message: message.into(),
        }
    }

    fn check(&mut self, record: &ExportRecord) -> Result<()> {
        if record.image_id.is_empty() {
            return Err(self.violation("empty image_id"));
        }
        if !self.seen_ids.insert(record.image_id.clone()) {
            return Err(self.violation(format!("duplicate image_id {:?}", record.image_id)));
        }
        if let Some(f) = &record.feature {
            let dim = *self.dim.get_or_insert(f.len());
            if f.len() != dim {
                return Err(self.violation(format!(
                    "feature has {} values, earlier records have {dim}",
                    f.len()
                )));
            }
        }
        if record.judgments.is_empty() {
            return Err(self.violation("record has no judgments"));
        }
        let mut annotators = HashSet::new();
        for j in &record.judgments {
            if !annotators.insert(j.annotator.as_str()) {
                return Err(self.violation(format!("annotator {:?} judged twice", j.annotator)));
            }
            match (j.verdict, &j.comment) {
                (Verdict::No, Some(_)) => return Err(self.violation("comment on a no verdict")),
                (Verdict::Yes, None) => return Err(self.violation("yes verdict without comment")),
                (Verdict::Yes, Some(c)) => {
                    if c.text.trim().is_empty() {
                        return Err(self.violation("empty comment text"));
                    }
                    if !self.categories.contains(&c.trigger) {
                        return Err(self.violation(format!("unknown trigger {:?}", c.trigger)));
                    }
                }
                (Verdict::No, None) => {}
            }
        }
        Ok(())
    }
}

impl<R: BufRead> Iterator for ReleaseReader<R> {
    type Item = Result<ExportRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: ExportRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => return Some(Err(self.violation(e.to_string()))),
            };
            return Some(self.check(&record).map(|()| record));
        }
    }
}

/// Reads a release into an analytics snapshot. Triggers must belong to
/// `categories` (the default set when `None`).
pub fn import_release<R: BufRead>(
    reader: R,
    categories: Option<Vec<String>>,
) -> Result<CampaignSnapshot> {
    let categories =
        categories.unwrap_or_else(|| DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect());
    let images = ReleaseReader::new(reader, categories.clone())
        .map(|r| r.map(SnapshotImage::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignSnapshot { categories, images })
}

impl From<ExportRecord> for SnapshotImage {
    fn from(r: ExportRecord) -> Self {
        SnapshotImage {
            id: r.image_id,
            feature: r.feature,
            subject: r.subject,
            judgments: r
                .judgments
                .into_iter()
                .map(|j| SnapshotJudgment {
                    annotator: j.annotator,
                    verdict: j.verdict,
                    comment: j.comment,
                })
                .collect(),
        }
    }
}
