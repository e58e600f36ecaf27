//! Randomized campaigns shared by the integration tests.

#![allow(dead_code)]

use annocamp::config::CampaignConfig;
use annocamp::model::{
    CampaignId, CampaignStatus, CommentDraft, ImageId, SubjectLabel, Verdict, DEFAULT_CATEGORIES,
};
use annocamp::store::{FeatureRow, Installation, IssuedCredential};
use proptest::prelude::*;

/// `(text, category index)` of a comment.
pub type PlannedComment = Option<(String, usize)>;

#[derive(Clone, Debug)]
pub struct Plan {
    pub images: usize,
    pub annotators: usize,
    pub features: Option<Vec<Vec<f32>>>,
    pub subjects: Vec<Option<usize>>,
    /// `(annotator, image, comment)`; a comment makes the verdict yes.
    pub judgments: Vec<(usize, usize, PlannedComment)>,
}

pub struct Built {
    pub store: Installation,
    pub id: CampaignId,
    pub credentials: Vec<IssuedCredential>,
    pub sources: Vec<String>,
}

fn finite() -> impl Strategy<Value = f32> {
    prop::num::f32::NORMAL | prop::num::f32::SUBNORMAL | prop::num::f32::ZERO
}

pub fn plan() -> impl Strategy<Value = Plan> {
    (1usize..24, 1usize..7, 0usize..5).prop_flat_map(|(images, annotators, dim)| {
        let features = prop::option::of(prop::collection::vec(
            prop::collection::vec(finite(), dim..=dim),
            images..=images,
        ));
        let subjects = prop::collection::vec(prop::option::of(0usize..4), images..=images);
        let comment = prop::option::weighted(
            0.3,
            (
                "[A-Za-z][A-Za-z ,.!?'\"\\\\é]{0,30}",
                0..DEFAULT_CATEGORIES.len(),
            ),
        );
        let judgments = prop::collection::vec((0..annotators, 0..images, comment), 0..60);
        (features, subjects, judgments).prop_map(move |(features, subjects, judgments)| Plan {
            images,
            annotators,
            features: features.filter(|_| dim > 0),
            subjects,
            judgments,
        })
    })
}

/// Builds an active campaign from `plan`. Repeated (annotator, image)
/// pairs in the plan are skipped.
pub fn build(plan: &Plan) -> Built {
    let store = Installation::new();
    let id = store
        .create_campaign(&CampaignConfig::new("random", 3))
        .unwrap()
        .id;
    let credentials = store
        .generate_annotators(id, plan.annotators as i64, None)
        .unwrap();
    let sources: Vec<String> = (0..plan.images)
        .map(|i| format!("https://private-host.example/secret/{i}.jpg"))
        .collect();
    {
        let shared = store.campaign(id).unwrap();
        let mut state = shared.lock();
        state.ingest_images(&sources).unwrap();
        if let Some(rows) = &plan.features {
            let rows = rows
                .iter()
                .enumerate()
                .map(|(i, values)| FeatureRow {
                    row: i + 1,
                    image: ImageId(i as u32).to_string(),
                    values: values.clone(),
                })
                .collect();
            state.attach_features(rows).unwrap();
        }
        for (i, s) in plan.subjects.iter().enumerate() {
            if let Some(s) = s {
                let label = SubjectLabel::ALL[*s];
                state.set_subject_label(ImageId(i as u32), label).unwrap();
            }
        }
        state.set_status(CampaignStatus::Active).unwrap();
        let mut seen = std::collections::HashSet::new();
        for (a, img, comment) in &plan.judgments {
            if !seen.insert((*a, *img)) {
                continue;
            }
            let (verdict, draft) = match comment {
                Some((text, t)) => (
                    Verdict::Yes,
                    Some(CommentDraft::new(text.clone(), DEFAULT_CATEGORIES[*t])),
                ),
                None => (Verdict::No, None),
            };
            state
                .submit(
                    credentials[*a].annotator,
                    ImageId(*img as u32),
                    verdict,
                    draft,
                )
                .unwrap();
        }
    }
    Built {
        store,
        id,
        credentials,
        sources,
    }
}
