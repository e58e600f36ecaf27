//! Corpus tables: judgment depth, trigger distribution and the subject
//! cross-tabulations.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::chisq::ContingencyTable;
use crate::error::{Error, Result};
use crate::model::{SubjectLabel, Verdict};
use crate::snapshot::CampaignSnapshot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DepthRow {
    pub min_judgments: usize,
    pub images_with_comment: u64,
    pub total_comments: u64,
    pub images_without_comment: u64,
}

/// For every n from 1 to the deepest image, counts the images with at
/// least n judgments, split by whether they carry a comment.
pub fn judgment_depth_table(snapshot: &CampaignSnapshot) -> Vec<DepthRow> {
    let max_depth = snapshot
        .images
        .iter()
        .map(|i| i.judgments.len())
        .max()
        .unwrap_or(0);
    let mut rows: Vec<DepthRow> = (1..=max_depth)
        .map(|n| DepthRow {
            min_judgments: n,
            images_with_comment: 0,
            total_comments: 0,
            images_without_comment: 0,
        })
        .collect();
    for image in &snapshot.images {
        let depth = image.judgments.len();
        let comments = image.comment_count() as u64;
        for row in rows.iter_mut().take(depth) {
            if comments > 0 {
                row.images_with_comment += 1;
                row.total_comments += comments;
            } else {
                row.images_without_comment += 1;
            }
        }
    }
    rows
}

/// Comments per trigger category, in category order. Every category is
/// listed, including those with no comments.
pub fn trigger_distribution(snapshot: &CampaignSnapshot) -> Result<Vec<(String, u64)>> {
    let mut counts: Vec<(String, u64)> =
        snapshot.categories.iter().map(|c| (c.clone(), 0)).collect();
    for image in &snapshot.images {
        for comment in image.comments() {
            let slot = counts
                .iter_mut()
                .find(|(c, _)| *c == comment.trigger)
                .ok_or_else(|| Error::UnknownCategory(comment.trigger.clone()))?;
            slot.1 += 1;
        }
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubjectTriggerTable {
    /// Trigger rows by subject columns.
    pub table: ContingencyTable,
    /// Comments on images without a subject label.
    pub excluded: u64,
}

fn subject_labels() -> Vec<String> {
    SubjectLabel::ALL.iter().map(|s| s.to_string()).collect()
}

pub fn subject_trigger_crosstab(snapshot: &CampaignSnapshot) -> Result<SubjectTriggerTable> {
    let mut table = ContingencyTable::zeros(snapshot.categories.clone(), subject_labels());
    let mut excluded = 0;
    for image in &snapshot.images {
        for comment in image.comments() {
            let Some(subject) = image.subject else {
                excluded += 1;
                continue;
            };
            let row = snapshot
                .categories
                .iter()
                .position(|c| *c == comment.trigger)
                .ok_or_else(|| Error::UnknownCategory(comment.trigger.clone()))?;
            table.counts[row][subject.index()] += 1;
        }
    }
    Ok(SubjectTriggerTable { table, excluded })
}

/// Subject rows by `Yes`/`No` columns. `Yes` counts commented images;
/// `No` counts the supplied sample of uncommented images.
pub fn subject_verdict_distribution(
    snapshot: &CampaignSnapshot,
    no_sample: &BTreeSet<String>,
) -> Result<ContingencyTable> {
    let mut table =
        ContingencyTable::zeros(subject_labels(), vec!["Yes".to_owned(), "No".to_owned()]);
    let mut found = 0;
    for image in &snapshot.images {
        let sampled = no_sample.contains(&image.id);
        let commented = image.has_comment();
        if sampled && commented {
            return Err(Error::SampleContainsCommentedImage(image.id.clone()));
        }
        if !sampled && !commented {
            continue;
        }
        found += usize::from(sampled);
        let subject = image
            .subject
            .ok_or_else(|| Error::MissingSubject(image.id.clone()))?;
        table.counts[subject.index()][usize::from(sampled)] += 1;
    }
    if found != no_sample.len() {
        let missing = no_sample
            .iter()
            .find(|id| snapshot.image(id).is_none())
            .cloned()
            .unwrap_or_default();
        return Err(Error::UnknownImage(missing));
    }
    Ok(table)
}

/// Draws `n` images that were judged only with `no`, without replacement.
pub fn sample_uncommented(snapshot: &CampaignSnapshot, n: usize, seed: u64) -> Vec<String> {
    let pool: Vec<&str> = snapshot
        .images
        .iter()
        .filter(|i| !i.judgments.is_empty() && i.judgments.iter().all(|j| j.verdict == Verdict::No))
        .map(|i| i.id.as_str())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.choose_multiple(&mut rng, n.min(pool.len()))
        .map(|s| s.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Comment;
    use crate::snapshot::{SnapshotImage, SnapshotJudgment};

    fn judgment(trigger: Option<&str>) -> SnapshotJudgment {
        SnapshotJudgment {
            annotator: "a".into(),
            verdict: if trigger.is_some() {
                Verdict::Yes
            } else {
                Verdict::No
            },
            comment: trigger.map(|t| Comment {
                text: "x".into(),
                trigger: t.into(),
            }),
        }
    }

    fn image(id: &str, subject: Option<SubjectLabel>, js: Vec<Option<&str>>) -> SnapshotImage {
        SnapshotImage {
            id: id.into(),
            feature: None,
            subject,
            judgments: js.into_iter().map(judgment).collect(),
        }
    }

    fn demo() -> CampaignSnapshot {
        use SubjectLabel::*;
        CampaignSnapshot::with_default_categories(vec![
            image(
                "img_0",
                Some(Females),
                vec![Some("Pose"), None, Some("Pose")],
            ),
            image("img_1", Some(Nobody), vec![Some("Location")]),
            image("img_2", Some(Males), vec![None, None]),
            image("img_3", None, vec![None]),
            image("img_4", None, vec![]),
        ])
    }

    #[test]
    fn depth_table() {
        let rows = judgment_depth_table(&demo());
        assert_eq!(rows.len(), 3);
        assert_eq!(
            rows[0],
            DepthRow {
                min_judgments: 1,
                images_with_comment: 2,
                total_comments: 3,
                images_without_comment: 2
            }
        );
        assert_eq!(
            (rows[1].images_with_comment, rows[1].images_without_comment),
            (1, 1)
        );
        assert_eq!(
            (rows[2].images_with_comment, rows[2].total_comments),
            (1, 2)
        );
        assert!(
            judgment_depth_table(&CampaignSnapshot::with_default_categories(vec![])).is_empty()
        );
    }

    #[test]
    fn trigger_counts_cover_every_category() {
        let d = trigger_distribution(&demo()).unwrap();
        assert_eq!(d.len(), 7);
        assert_eq!(d.iter().map(|(_, n)| n).sum::<u64>(), 3);
        assert_eq!(d[2], ("Pose".into(), 2));
        assert_eq!(d[6], ("Other".into(), 0));
    }

    #[test]
    fn crosstab_excludes_unlabeled() {
        let mut snap = demo();
        snap.images[3].judgments = vec![judgment(Some("Other"))];
        let t = subject_trigger_crosstab(&snap).unwrap();
        assert_eq!(t.table.get("Pose", "Females"), Some(2));
        assert_eq!(t.table.get("Location", "Nobody"), Some(1));
        assert_eq!(t.excluded, 1);
        assert_eq!(t.table.total() + t.excluded, snap.comment_count() as u64);
    }

    #[test]
    fn crosstab_without_labels_is_empty() {
        let mut snap = demo();
        snap.images.iter_mut().for_each(|i| i.subject = None);
        let t = subject_trigger_crosstab(&snap).unwrap();
        assert_eq!(t.table.total(), 0);
        assert_eq!(t.excluded, 3);
    }

    #[test]
    fn verdict_distribution() {
        let snap = demo();
        let sample: BTreeSet<String> = ["img_2".to_string()].into();
        let t = subject_verdict_distribution(&snap, &sample).unwrap();
        assert_eq!(t.get("Females", "Yes"), Some(1));
        assert_eq!(t.get("Nobody", "Yes"), Some(1));
        assert_eq!(t.get("Males", "No"), Some(1));
        let empty = subject_verdict_distribution(&snap, &BTreeSet::new()).unwrap();
        assert_eq!(empty.col_sums()[1], 0);
        let bad: BTreeSet<String> = ["img_0".to_string()].into();
        assert!(matches!(
            subject_verdict_distribution(&snap, &bad),
            Err(Error::SampleContainsCommentedImage(_))
        ));
        let unlabeled: BTreeSet<String> = ["img_3".to_string()].into();
        assert!(matches!(
            subject_verdict_distribution(&snap, &unlabeled),
            Err(Error::MissingSubject(_))
        ));
        let unknown: BTreeSet<String> = ["img_77".to_string()].into();
        assert!(matches!(
            subject_verdict_distribution(&snap, &unknown),
            Err(Error::UnknownImage(_))
        ));
    }

    #[test]
    fn sampling_is_seeded_and_restricted_to_no_only_images() {
        let snap = demo();
        let s = sample_uncommented(&snap, 10, 3);
        let mut sorted = s.clone();
        sorted.sort();
        assert_eq!(sorted, vec!["img_2".to_string(), "img_3".to_string()]);
        assert_eq!(
            sample_uncommented(&snap, 1, 3),
            sample_uncommented(&snap, 1, 3)
        );
    }
}
