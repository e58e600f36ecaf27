//! Least-assigned-first image assignment.
//!
//! An image's load is its judgment count plus the number of offers for it
//! still waiting on an answer. Images sit in buckets keyed by load, and an
//! annotator is offered a uniformly random image from the lowest bucket
//! that still holds an image they have not judged. Counting open offers
//! keeps annotators who ask at the same time from piling onto the same
//! image. Because the lowest eligible load is below the quota whenever an
//! unseen under-quota image exists, over-quota images are only ever served
//! as a fallback.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Annotator, AnnotatorId, Campaign, CampaignStatus, ImageId, JudgmentLedger, ValidatedSubmission,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Offer {
    Image {
        image: ImageId,
        /// Judgment count of the image when the offer was returned.
        count: u32,
        /// The image's load had already reached the quota when selected.
        fallback: bool,
    },
    Exhausted,
}

impl Offer {
    pub fn image(&self) -> Option<ImageId> {
        match self {
            Offer::Image { image, .. } => Some(*image),
            Offer::Exhausted => None,
        }
    }
}

#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
struct OpenOffer {
    image: ImageId,
    fallback: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssignmentState {
    seed: u64,
    rng: ChaCha8Rng,
    counts: Vec<u32>,
    load: Vec<u32>,
    buckets: Vec<IndexSet<u32>>,
    seen: BTreeMap<AnnotatorId, BTreeSet<ImageId>>,
    offers: BTreeMap<AnnotatorId, OpenOffer>,
}

impl AssignmentState {
    pub fn new(seed: u64) -> Self {
        AssignmentState {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counts: Vec::new(),
            load: Vec::new(),
            buckets: vec![IndexSet::new()],
            seen: BTreeMap::new(),
            offers: BTreeMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Restarts the random stream. Counts, seen-sets and offers are kept.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Registers the next image; ids are dense, so the returned id equals
    /// the number of images registered before.
    pub fn add_image(&mut self) -> ImageId {
        let id = self.counts.len() as u32;
        self.counts.push(0);
        self.load.push(0);
        self.buckets[0].insert(id);
        ImageId(id)
    }

    pub fn image_count(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, image: ImageId) -> Option<u32> {
        self.counts.get(image.index()).copied()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Judgments plus open offers, per image.
    pub fn loads(&self) -> &[u32] {
        &self.load
    }

    pub fn seen_by(&self, annotator: AnnotatorId) -> impl Iterator<Item = ImageId> + '_ {
        self.seen.get(&annotator).into_iter().flatten().copied()
    }

    pub fn seen_count(&self, annotator: AnnotatorId) -> usize {
        self.seen.get(&annotator).map_or(0, BTreeSet::len)
    }

    /// The image currently offered to an annotator, if any.
    pub fn current_offer(&self, annotator: AnnotatorId) -> Option<ImageId> {
        self.offers.get(&annotator).map(|o| o.image)
    }

    pub fn next_image(&mut self, campaign: &Campaign, annotator: &Annotator) -> Result<Offer> {
        if campaign.status != CampaignStatus::Active {
            return Err(Error::CampaignClosed(campaign.status.to_string()));
        }
        if annotator.campaign_id != campaign.id {
            return Err(Error::UnknownAnnotator(annotator.id.to_string()));
        }
        let open = match self.offers.get(&annotator.id) {
            Some(&open) => open,
            None => {
                let Some(image) = self.pick(annotator.id) else {
                    return Ok(Offer::Exhausted);
                };
                let open = OpenOffer {
                    image,
                    fallback: self.load[image.index()] >= campaign.quota,
                };
                self.raise_load(image);
                self.offers.insert(annotator.id, open);
                open
            }
        };
        Ok(Offer::Image {
            image: open.image,
            count: self.counts[open.image.index()],
            fallback: open.fallback,
        })
    }

    fn raise_load(&mut self, image: ImageId) {
        let load = self.load[image.index()] as usize;
        self.buckets[load].swap_remove(&image.0);
        if self.buckets.len() == load + 1 {
            self.buckets.push(IndexSet::new());
        }
        self.buckets[load + 1].insert(image.0);
        self.load[image.index()] += 1;
    }

    fn pick(&mut self, annotator: AnnotatorId) -> Option<ImageId> {
        let empty = BTreeSet::new();
        let seen = self.seen.get(&annotator).unwrap_or(&empty);
        for (load, bucket) in self.buckets.iter().enumerate() {
            if bucket.is_empty() {
                continue;
            }
            let seen_here = seen
                .iter()
                .filter(|i| self.load[i.index()] as usize == load)
                .count();
            let eligible = bucket.len() - seen_here;
            if eligible == 0 {
                continue;
            }
            let rng = &mut self.rng;
            let chosen = if seen_here == 0 {
                bucket[rng.random_range(0..bucket.len())]
            } else if eligible * 2 >= bucket.len() {
                // rejection sampling stays uniform over the unseen members
                loop {
                    let candidate = bucket[rng.random_range(0..bucket.len())];
                    if !seen.contains(&ImageId(candidate)) {
                        break candidate;
                    }
                }
            } else {
                let nth = rng.random_range(0..eligible);
                bucket
                    .iter()
                    .copied()
                    .filter(|i| !seen.contains(&ImageId(*i)))
                    .nth(nth)
                    .expect("eligible count matches bucket contents")
            };
            return Some(ImageId(chosen));
        }
        None
    }

    /// Applies a validated submission: bumps the image's count and marks it
    /// seen by the annotator. A judgment on the annotator's open offer
    /// turns the reservation into a judgment; any other judgment adds load.
    pub fn record(&mut self, submission: &ValidatedSubmission) -> Result<()> {
        let (annotator, image) = (submission.annotator(), submission.image());
        if image.index() >= self.counts.len() {
            return Err(Error::UnknownImage(image.to_string()));
        }
        if !self.seen.entry(annotator).or_default().insert(image) {
            return Err(Error::DuplicateJudgment {
                annotator: annotator.to_string(),
                image: image.to_string(),
            });
        }
        self.counts[image.index()] += 1;
        if self.current_offer(annotator) == Some(image) {
            self.offers.remove(&annotator);
        } else {
            self.raise_load(image);
        }
        Ok(())
    }
}

impl JudgmentLedger for AssignmentState {
    fn has_judged(&self, annotator: AnnotatorId, image: ImageId) -> bool {
        self.seen
            .get(&annotator)
            .is_some_and(|s| s.contains(&image))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::auth::CredentialHash;
    use crate::model::*;

    pub(crate) fn campaign(quota: u32) -> Campaign {
        Campaign {
            id: CampaignId(0),
            name: "t".into(),
            prompt_key: DEFAULT_PROMPT_KEY.into(),
            categories: DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            quota,
            default_language: "en".into(),
            languages: vec!["en".into()],
            status: CampaignStatus::Active,
            feature_dim: None,
            seed: 0,
        }
    }

    pub(crate) fn annotator(id: u32) -> Annotator {
        Annotator {
            id: AnnotatorId(id),
            campaign_id: CampaignId(0),
            username: format!("u{id}"),
            credential: CredentialHash::new("x"),
            language: "en".into(),
        }
    }

    fn image(id: ImageId) -> ImageItem {
        ImageItem {
            id,
            campaign_id: CampaignId(0),
            source: ImageSource::parse(&format!("p/{id}.jpg")),
            feature: None,
            subject: None,
            subject_labeled_at: None,
        }
    }

    fn judge(state: &mut AssignmentState, c: &Campaign, a: &Annotator, i: ImageId) -> Result<()> {
        let sub = validate_submission(c, a, &image(i), Verdict::No, None, state)?;
        state.record(&sub)
    }

    /// Brute-force eligibility: under-quota unseen images if any exist,
    /// else all unseen; then those with the minimum load.
    fn oracle_eligible(counts: &[u32], seen: &[ImageId], quota: u32) -> Vec<ImageId> {
        let unseen: Vec<usize> = (0..counts.len())
            .filter(|i| !seen.contains(&ImageId(*i as u32)))
            .collect();
        let under: Vec<usize> = unseen
            .iter()
            .copied()
            .filter(|&i| counts[i] < quota)
            .collect();
        let pool = if under.is_empty() { unseen } else { under };
        let Some(min) = pool.iter().map(|&i| counts[i]).min() else {
            return vec![];
        };
        pool.into_iter()
            .filter(|&i| counts[i] == min)
            .map(|i| ImageId(i as u32))
            .collect()
    }

    #[test]
    fn prefers_least_annotated_under_quota_image() {
        // quota 2; A has 2 judgments, B has 1
        let c = campaign(2);
        let mut s = AssignmentState::new(1);
        let a_img = s.add_image();
        let b_img = s.add_image();
        judge(&mut s, &c, &annotator(10), a_img).unwrap();
        judge(&mut s, &c, &annotator(11), a_img).unwrap();
        judge(&mut s, &c, &annotator(12), b_img).unwrap();
        assert_eq!(oracle_eligible(s.loads(), &[], 2), vec![b_img]);
        let offer = s.next_image(&c, &annotator(1)).unwrap();
        assert_eq!(offer.image(), Some(b_img));
    }

    #[test]
    fn open_offers_count_as_load() {
        let c = campaign(1);
        let mut s = AssignmentState::new(3);
        let x = s.add_image();
        let y = s.add_image();
        let first = s.next_image(&c, &annotator(1)).unwrap();
        let second = s.next_image(&c, &annotator(2)).unwrap();
        assert_ne!(first.image(), second.image());
        assert_eq!(s.loads(), &[1, 1]);
        assert_eq!(s.counts(), &[0, 0]);
        let third = s.next_image(&c, &annotator(3)).unwrap();
        assert!(matches!(
            third,
            Offer::Image {
                fallback: true,
                count: 0,
                ..
            }
        ));
        judge(&mut s, &c, &annotator(1), first.image().unwrap()).unwrap();
        assert_eq!(s.loads().iter().sum::<u32>(), 3);
        assert_eq!(s.counts().iter().sum::<u32>(), 1);
        // a judgment without an offer adds load directly
        judge(&mut s, &c, &annotator(4), x).unwrap();
        judge(&mut s, &c, &annotator(4), y).unwrap();
        assert_eq!(s.loads().iter().sum::<u32>(), 5);
    }

    #[test]
    fn offer_is_stable_until_recorded() {
        let c = campaign(3);
        let mut s = AssignmentState::new(9);
        for _ in 0..50 {
            s.add_image();
        }
        let a = annotator(1);
        let first = s.next_image(&c, &a).unwrap();
        for _ in 0..5 {
            assert_eq!(s.next_image(&c, &a).unwrap(), first);
        }
        judge(&mut s, &c, &a, first.image().unwrap()).unwrap();
        assert_ne!(s.next_image(&c, &a).unwrap().image(), first.image());
    }

    #[test]
    fn exhausted_after_judging_everything() {
        let c = campaign(1);
        let mut s = AssignmentState::new(2);
        for _ in 0..4 {
            s.add_image();
        }
        let a = annotator(1);
        for _ in 0..4 {
            let i = s.next_image(&c, &a).unwrap().image().unwrap();
            judge(&mut s, &c, &a, i).unwrap();
        }
        assert_eq!(s.next_image(&c, &a).unwrap(), Offer::Exhausted);
    }

    #[test]
    fn no_and_yes_count_alike() {
        let c = campaign(4);
        let mut s = AssignmentState::new(2);
        let i = s.add_image();
        judge(&mut s, &c, &annotator(1), i).unwrap();
        let yes = validate_submission(
            &c,
            &annotator(2),
            &image(i),
            Verdict::Yes,
            Some(CommentDraft::new("Copriti", "Clothing")),
            &s,
        )
        .unwrap();
        s.record(&yes).unwrap();
        assert_eq!(s.count(i), Some(2));
    }

    #[test]
    fn duplicate_record_is_rejected() {
        let c = campaign(2);
        let mut s = AssignmentState::new(0);
        let i = s.add_image();
        let a = annotator(1);
        let sub = validate_submission(&c, &a, &image(i), Verdict::No, None, &s).unwrap();
        s.record(&sub).unwrap();
        assert!(matches!(
            s.record(&sub),
            Err(Error::DuplicateJudgment { .. })
        ));
        assert_eq!(s.count(i), Some(1));
    }

    #[test]
    fn three_annotators_five_images_quota_two() {
        let c = campaign(2);
        let mut s = AssignmentState::new(5);
        for _ in 0..5 {
            s.add_image();
        }
        for id in 0..3 {
            let a = annotator(id);
            while let Offer::Image { image, .. } = s.next_image(&c, &a).unwrap() {
                judge(&mut s, &c, &a, image).unwrap();
            }
        }
        assert!(s.counts().iter().all(|&n| n == 3));
    }

    #[test]
    fn closed_campaign_refuses_offers() {
        let mut c = campaign(2);
        c.status = CampaignStatus::Closed;
        let mut s = AssignmentState::new(5);
        s.add_image();
        assert!(matches!(
            s.next_image(&c, &annotator(0)),
            Err(Error::CampaignClosed(_))
        ));
        let mut other = annotator(0);
        other.campaign_id = CampaignId(4);
        assert!(matches!(
            s.next_image(&campaign(2), &other),
            Err(Error::UnknownAnnotator(_))
        ));
    }

    #[test]
    fn same_seed_same_sequence() {
        let run = |seed| {
            let c = campaign(2);
            let mut s = AssignmentState::new(seed);
            for _ in 0..30 {
                s.add_image();
            }
            let mut seq = vec![];
            for step in 0..60 {
                let a = annotator(step % 4);
                if let Offer::Image { image, .. } = s.next_image(&c, &a).unwrap() {
                    judge(&mut s, &c, &a, image).unwrap();
                    seq.push(image);
                }
            }
            seq
        };
        assert_eq!(run(77), run(77));
        assert_ne!(run(77), run(78));
    }

    #[test]
    fn ties_are_broken_uniformly() {
        // six fresh images, many independent seeds: every image gets picked
        let c = campaign(2);
        let mut hits = [0u32; 6];
        for seed in 0..600 {
            let mut s = AssignmentState::new(seed);
            for _ in 0..6 {
                s.add_image();
            }
            let i = s.next_image(&c, &annotator(0)).unwrap().image().unwrap();
            hits[i.index()] += 1;
        }
        // expected 100 each; a 5-sigma band is roughly 100 +/- 46
        assert!(hits.iter().all(|&h| (54..=146).contains(&h)), "{hits:?}");
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pick_matches_eligibility_oracle(
            seed in any::<u64>(),
            quota in 1u32..4,
            n_images in 1usize..12,
            history in proptest::collection::vec((0u32..5, 0u32..12), 0..40),
            waiting in proptest::collection::vec(5u32..9, 0..4),
        ) {
            let c = campaign(quota);
            let mut s = AssignmentState::new(seed);
            for _ in 0..n_images {
                s.add_image();
            }
            for (a, i) in history {
                let i = ImageId(i % n_images as u32);
                let _ = judge(&mut s, &c, &annotator(a), i);
            }
            for a in waiting {
                s.next_image(&c, &annotator(a)).unwrap();
            }
            let probe = annotator(0);
            let seen: Vec<ImageId> = s.seen_by(probe.id).collect();
            let loads = s.loads().to_vec();
            let expected = oracle_eligible(&loads, &seen, quota);
            match s.next_image(&c, &probe).unwrap() {
                Offer::Exhausted => prop_assert!(expected.is_empty()),
                Offer::Image { image, count, fallback } => {
                    prop_assert!(expected.contains(&image));
                    prop_assert!(!seen.contains(&image));
                    prop_assert_eq!(fallback, loads[image.index()] >= quota);
                    prop_assert_eq!(count, s.counts()[image.index()]);
                    prop_assert_eq!(s.loads()[image.index()], loads[image.index()] + 1);
                }
            }
        }
    }
}
