//! In-process campaign store.
//!
//! Every campaign sits behind its own mutex, which is the single write
//! serialization point for validation, assignment updates and judgment
//! persistence. The whole installation can be checkpointed to a JSON file;
//! the file is replaced atomically.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use chrono::Utc;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::assign::{AssignmentState, Offer};
use crate::auth::{self, CredentialHash};
use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::model::{
    validate_submission, Annotator, AnnotatorId, Campaign, CampaignId, CampaignStatus,
    CommentDraft, ImageId, ImageItem, ImageSource, Judgment, SubjectLabel, Verdict,
};
use crate::snapshot::{CampaignSnapshot, SnapshotImage, SnapshotJudgment};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub registered: usize,
    /// `(entry number, source)` of rejected duplicates, 1-based.
    pub duplicates: Vec<(usize, String)>,
}

/// Credentials handed out once at generation time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedCredential {
    pub annotator: AnnotatorId,
    pub username: String,
    pub password: String,
}

#[derive(Clone, Debug)]
pub struct FeatureRow {
    /// 1-based data row number in the source file.
    pub row: usize,
    pub image: String,
    pub values: Vec<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CampaignState {
    campaign: Campaign,
    images: Vec<ImageItem>,
    annotators: BTreeMap<AnnotatorId, Annotator>,
    judgments: Vec<Judgment>,
    assignment: AssignmentState,
    #[serde(skip)]
    sources: HashSet<String>,
    #[serde(skip)]
    by_image: Vec<Vec<u32>>,
}

impl CampaignState {
    pub fn new(campaign: Campaign) -> Self {
        let assignment = AssignmentState::new(campaign.seed);
        CampaignState {
            campaign,
            images: Vec::new(),
            annotators: BTreeMap::new(),
            judgments: Vec::new(),
            assignment,
            sources: HashSet::new(),
            by_image: Vec::new(),
        }
    }

    fn rebuild_indexes(&mut self) {
        self.sources = self
            .images
            .iter()
            .map(|i| i.source.as_str().to_owned())
            .collect();
        self.by_image = vec![Vec::new(); self.images.len()];
        for (n, j) in self.judgments.iter().enumerate() {
            self.by_image[j.image.index()].push(n as u32);
        }
    }

    pub fn campaign(&self) -> &Campaign {
        &self.campaign
    }

    pub fn images(&self) -> &[ImageItem] {
        &self.images
    }

    pub fn image(&self, id: ImageId) -> Result<&ImageItem> {
        self.images
            .get(id.index())
            .ok_or_else(|| Error::UnknownImage(id.to_string()))
    }

    pub fn annotators(&self) -> impl Iterator<Item = &Annotator> {
        self.annotators.values()
    }

    pub fn annotator(&self, id: AnnotatorId) -> Result<&Annotator> {
        self.annotators
            .get(&id)
            .ok_or_else(|| Error::UnknownAnnotator(id.to_string()))
    }

    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    /// Judgments on one image, in submission order.
    pub fn judgments_on(&self, image: ImageId) -> impl Iterator<Item = &Judgment> {
        self.by_image
            .get(image.index())
            .into_iter()
            .flatten()
            .map(|&n| &self.judgments[n as usize])
    }

    pub fn assignment(&self) -> &AssignmentState {
        &self.assignment
    }

    pub fn set_status(&mut self, status: CampaignStatus) -> Result<()> {
        self.campaign.transition(status)
    }

    pub fn reseed(&mut self, seed: u64) {
        self.assignment.reseed(seed);
    }

    /// Registers one image per source, rejecting sources already present.
    pub fn ingest_images<I, S>(&mut self, sources: I) -> Result<IngestReport>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if self.campaign.status != CampaignStatus::Draft {
            return Err(Error::CampaignActive(self.campaign.status.to_string()));
        }
        let mut report = IngestReport::default();
        let mut entries = 0;
        for source in sources {
            entries += 1;
            let source = source.as_ref();
            if !self.sources.insert(source.to_owned()) {
                report.duplicates.push((entries, source.to_owned()));
                continue;
            }
            let id = self.assignment.add_image();
            debug_assert_eq!(id.index(), self.images.len());
            self.images.push(ImageItem {
                id,
                campaign_id: self.campaign.id,
                source: ImageSource::parse(source),
                feature: None,
                subject: None,
                subject_labeled_at: None,
            });
            self.by_image.push(Vec::new());
            report.registered += 1;
        }
        if entries == 0 {
            return Err(Error::EmptyManifest);
        }
        Ok(report)
    }

    /// Attaches feature vectors. All rows are checked before any is applied.
    pub fn attach_features(&mut self, rows: Vec<FeatureRow>) -> Result<usize> {
        let mut dim = self.campaign.feature_dim;
        let mut resolved = Vec::with_capacity(rows.len());
        for row in &rows {
            let expected = *dim.get_or_insert(row.values.len());
            if row.values.len() != expected {
                return Err(Error::DimensionMismatch {
                    row: row.row,
                    expected,
                    found: row.values.len(),
                });
            }
            let id = row
                .image
                .parse::<ImageId>()
                .ok()
                .filter(|id| id.index() < self.images.len())
                .ok_or_else(|| Error::UnknownImageId {
                    row: row.row,
                    id: row.image.clone(),
                })?;
            resolved.push(id);
        }
        let n = rows.len();
        for (id, row) in resolved.into_iter().zip(rows) {
            self.images[id.index()].feature = Some(row.values);
        }
        self.campaign.feature_dim = dim;
        Ok(n)
    }

    pub fn set_subject_label(&mut self, image: ImageId, label: SubjectLabel) -> Result<&ImageItem> {
        let item = self
            .images
            .get_mut(image.index())
            .ok_or_else(|| Error::UnknownImage(image.to_string()))?;
        item.set_subject(label, Utc::now());
        Ok(item)
    }

    fn add_annotator(&mut self, id: AnnotatorId, language: String) -> IssuedCredential {
        let username = auth::generate_username();
        let password = auth::generate_password();
        self.annotators.insert(
            id,
            Annotator {
                id,
                campaign_id: self.campaign.id,
                username: username.clone(),
                credential: CredentialHash::new(&password),
                language,
            },
        );
        IssuedCredential {
            annotator: id,
            username,
            password,
        }
    }

    pub fn set_annotator_language(&mut self, id: AnnotatorId, language: &str) -> Result<()> {
        if !self.campaign.languages.iter().any(|l| l == language) {
            return Err(Error::UnknownLanguage(language.to_owned()));
        }
        let a = self
            .annotators
            .get_mut(&id)
            .ok_or_else(|| Error::UnknownAnnotator(id.to_string()))?;
        a.language = language.to_owned();
        Ok(())
    }

    pub fn next_image(&mut self, annotator: AnnotatorId) -> Result<Offer> {
        let a = self
            .annotators
            .get(&annotator)
            .ok_or_else(|| Error::UnknownAnnotator(annotator.to_string()))?;
        self.assignment.next_image(&self.campaign, a)
    }

    /// Validates, updates assignment counts and stores the judgment as one
    /// step under the campaign lock.
    pub fn submit(
        &mut self,
        annotator: AnnotatorId,
        image: ImageId,
        verdict: Verdict,
        comment: Option<CommentDraft>,
    ) -> Result<&Judgment> {
        let a = self.annotator(annotator)?;
        let i = self.image(image)?;
        let submission =
            validate_submission(&self.campaign, a, i, verdict, comment, &self.assignment)?;
        self.assignment.record(&submission)?;
        let id = self.judgments.len() as u32;
        self.judgments
            .push(submission.into_judgment(id, Utc::now()));
        self.by_image[image.index()].push(id);
        Ok(&self.judgments[id as usize])
    }

    pub fn snapshot(&self) -> CampaignSnapshot {
        let images = self
            .images
            .iter()
            .map(|img| SnapshotImage {
                id: img.id.to_string(),
                feature: img.feature.clone(),
                subject: img.subject,
                judgments: self
                    .judgments_on(img.id)
                    .map(|j| SnapshotJudgment {
                        annotator: j.annotator.to_string(),
                        verdict: j.verdict,
                        comment: j.comment.clone(),
                    })
                    .collect(),
            })
            .collect();
        CampaignSnapshot {
            categories: self.campaign.categories.clone(),
            images,
        }
    }
}

pub type SharedCampaign = Arc<Mutex<CampaignState>>;

#[derive(Default)]
pub struct Installation {
    campaigns: RwLock<BTreeMap<CampaignId, SharedCampaign>>,
    logins: RwLock<HashMap<String, (CampaignId, AnnotatorId)>>,
    counters: Mutex<Counters>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
struct Counters {
    next_campaign: u32,
    next_annotator: u32,
}

#[derive(Serialize, Deserialize)]
struct Persisted {
    counters: Counters,
    campaigns: Vec<CampaignState>,
}

impl Installation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_campaign(&self, config: &CampaignConfig) -> Result<Campaign> {
        let mut counters = self.counters.lock();
        let campaign = config.build(CampaignId(counters.next_campaign))?;
        counters.next_campaign += 1;
        self.campaigns.write().insert(
            campaign.id,
            Arc::new(Mutex::new(CampaignState::new(campaign.clone()))),
        );
        Ok(campaign)
    }

    pub fn campaign(&self, id: CampaignId) -> Result<SharedCampaign> {
        self.campaigns
            .read()
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::UnknownCampaign(id.to_string()))
    }

    pub fn campaign_ids(&self) -> Vec<CampaignId> {
        self.campaigns.read().keys().copied().collect()
    }

    /// Creates `count` annotators with fresh opaque credentials. Passwords
    /// are only returned here; the store keeps salted hashes.
    pub fn generate_annotators(
        &self,
        campaign: CampaignId,
        count: i64,
        language: Option<&str>,
    ) -> Result<Vec<IssuedCredential>> {
        if count < 1 {
            return Err(Error::InvalidCount);
        }
        let shared = self.campaign(campaign)?;
        let mut state = shared.lock();
        if state.campaign.status == CampaignStatus::Closed {
            return Err(Error::CampaignClosed(state.campaign.status.to_string()));
        }
        let language = language
            .map(str::to_owned)
            .unwrap_or_else(|| state.campaign.default_language.clone());
        if !state.campaign.languages.contains(&language) {
            return Err(Error::UnknownLanguage(language));
        }
        let mut logins = self.logins.write();
        let mut counters = self.counters.lock();
        let mut issued = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let id = AnnotatorId(counters.next_annotator);
            counters.next_annotator += 1;
            let mut cred = state.add_annotator(id, language.clone());
            while logins.contains_key(&cred.username) {
                state.annotators.remove(&id);
                cred = state.add_annotator(id, language.clone());
            }
            logins.insert(cred.username.clone(), (campaign, id));
            issued.push(cred);
        }
        Ok(issued)
    }

    pub fn find_login(&self, username: &str) -> Option<(CampaignId, AnnotatorId)> {
        self.logins.read().get(username).copied()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let campaigns: Vec<SharedCampaign> = self.campaigns.read().values().cloned().collect();
        let guards: Vec<_> = campaigns.iter().map(|c| c.lock()).collect();
        let counters = *self.counters.lock();
        let tmp = path.with_extension("tmp");
        {
            let mut out = BufWriter::new(fs::File::create(&tmp)?);
            #[derive(Serialize)]
            struct View<'a> {
                counters: Counters,
                campaigns: Vec<&'a CampaignState>,
            }
            serde_json::to_writer(
                &mut out,
                &View {
                    counters,
                    campaigns: guards.iter().map(|g| &**g).collect(),
                },
            )?;
            out.flush()?;
            out.get_ref().sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let persisted: Persisted = serde_json::from_slice(&fs::read(path)?)?;
        let inst = Installation::new();
        *inst.counters.lock() = persisted.counters;
        {
            let mut campaigns = inst.campaigns.write();
            let mut logins = inst.logins.write();
            for mut state in persisted.campaigns {
                state.rebuild_indexes();
                for a in state.annotators.values() {
                    logins.insert(a.username.clone(), (state.campaign.id, a.id));
                }
                campaigns.insert(state.campaign.id, Arc::new(Mutex::new(state)));
            }
        }
        Ok(inst)
    }

    /// Loads `path` if it exists, otherwise starts empty.
    pub fn open(path: &Path) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn active(inst: &Installation, images: usize) -> CampaignId {
        let c = inst.create_campaign(&CampaignConfig::new("t", 2)).unwrap();
        let shared = inst.campaign(c.id).unwrap();
        let mut s = shared.lock();
        s.ingest_images((0..images).map(|i| format!("img/{i}.jpg")))
            .unwrap();
        s.set_status(CampaignStatus::Active).unwrap();
        c.id
    }

    #[test]
    fn ingest_reports_duplicates() {
        let inst = Installation::new();
        let c = inst.create_campaign(&CampaignConfig::new("t", 2)).unwrap();
        let shared = inst.campaign(c.id).unwrap();
        let mut s = shared.lock();
        let r = s
            .ingest_images(["https://a/1.jpg", "https://a/2.jpg", "https://a/3.jpg"])
            .unwrap();
        assert_eq!(r.registered, 3);
        let r = s.ingest_images(["https://a/2.jpg"]).unwrap();
        assert_eq!(r.registered, 0);
        assert_eq!(r.duplicates, vec![(1, "https://a/2.jpg".to_string())]);
        assert!(matches!(
            s.ingest_images(Vec::<String>::new()),
            Err(Error::EmptyManifest)
        ));
        s.set_status(CampaignStatus::Active).unwrap();
        assert!(matches!(
            s.ingest_images(["https://a/4.jpg"]),
            Err(Error::CampaignActive(_))
        ));
    }

    #[test]
    fn features_are_checked_before_applying() {
        let inst = Installation::new();
        let id = active(&inst, 5);
        let shared = inst.campaign(id).unwrap();
        let mut s = shared.lock();
        let rows = |dims: &[usize]| {
            dims.iter()
                .enumerate()
                .map(|(n, &d)| FeatureRow {
                    row: n + 1,
                    image: format!("img_{n}"),
                    values: vec![0.5; d],
                })
                .collect::<Vec<_>>()
        };
        assert!(matches!(
            s.attach_features(rows(&[512, 256])),
            Err(Error::DimensionMismatch {
                row: 2,
                expected: 512,
                found: 256
            })
        ));
        assert!(s.images().iter().all(|i| i.feature.is_none()));
        assert!(s.campaign().feature_dim.is_none());
        assert_eq!(s.attach_features(rows(&[512; 5])).unwrap(), 5);
        assert_eq!(s.campaign().feature_dim, Some(512));
        let bad = vec![FeatureRow {
            row: 1,
            image: "img_99".into(),
            values: vec![0.0; 512],
        }];
        assert!(matches!(
            s.attach_features(bad),
            Err(Error::UnknownImageId { row: 1, ref id }) if id == "img_99"
        ));
    }

    #[test]
    fn subject_labels() {
        let inst = Installation::new();
        let id = active(&inst, 2);
        let shared = inst.campaign(id).unwrap();
        let mut s = shared.lock();
        s.set_subject_label(ImageId(1), SubjectLabel::Females)
            .unwrap();
        s.set_subject_label(ImageId(1), SubjectLabel::Nobody)
            .unwrap();
        assert_eq!(
            s.image(ImageId(1)).unwrap().subject,
            Some(SubjectLabel::Nobody)
        );
        assert!(s.image(ImageId(1)).unwrap().subject_labeled_at.is_some());
        assert!(matches!(
            s.set_subject_label(ImageId(7), SubjectLabel::Males),
            Err(Error::UnknownImage(_))
        ));
    }

    #[test]
    fn annotator_generation() {
        let inst = Installation::new();
        let id = active(&inst, 2);
        assert!(matches!(
            inst.generate_annotators(id, 0, None),
            Err(Error::InvalidCount)
        ));
        let creds = inst.generate_annotators(id, 95, None).unwrap();
        assert_eq!(creds.len(), 95);
        let names: HashSet<_> = creds.iter().map(|c| &c.username).collect();
        assert_eq!(names.len(), 95);
        let shared = inst.campaign(id).unwrap();
        let s = shared.lock();
        for c in &creds {
            assert_eq!(inst.find_login(&c.username), Some((id, c.annotator)));
            let stored = s.annotator(c.annotator).unwrap();
            assert!(stored.credential.verify(&c.password));
        }
        drop(s);
        assert!(matches!(
            inst.generate_annotators(id, 1, Some("de")),
            Err(Error::UnknownLanguage(_))
        ));
    }

    #[test]
    fn campaigns_do_not_share_judgments() {
        let inst = Installation::new();
        let a = active(&inst, 3);
        let b = active(&inst, 3);
        let cred = inst.generate_annotators(a, 1, None).unwrap().remove(0);
        let shared_b = inst.campaign(b).unwrap();
        assert!(matches!(
            shared_b
                .lock()
                .submit(cred.annotator, ImageId(0), Verdict::No, None),
            Err(Error::UnknownAnnotator(_))
        ));
        let shared_a = inst.campaign(a).unwrap();
        shared_a
            .lock()
            .submit(cred.annotator, ImageId(0), Verdict::No, None)
            .unwrap();
        assert_eq!(shared_a.lock().judgments().len(), 1);
        assert!(shared_b.lock().judgments().is_empty());
    }

    #[test]
    fn save_and_load_preserve_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let inst = Installation::new();
        let id = active(&inst, 4);
        let cred = inst.generate_annotators(id, 1, None).unwrap().remove(0);
        {
            let shared = inst.campaign(id).unwrap();
            let mut s = shared.lock();
            let img = s.next_image(cred.annotator).unwrap().image().unwrap();
            s.submit(
                cred.annotator,
                img,
                Verdict::Yes,
                Some(CommentDraft::new("Che schifo di foto", "Other")),
            )
            .unwrap();
        }
        inst.save(&path).unwrap();
        let back = Installation::load(&path).unwrap();
        assert_eq!(back.find_login(&cred.username), Some((id, cred.annotator)));
        let orig = inst.campaign(id).unwrap().lock().snapshot();
        let shared = back.campaign(id).unwrap();
        assert_eq!(shared.lock().snapshot(), orig);
        // indexes rebuilt: duplicate sources still rejected, per-image lookup works
        let s = shared.lock();
        let judged = s.judgments()[0].image;
        assert_eq!(s.judgments_on(judged).count(), 1);
        let next = back
            .create_campaign(&CampaignConfig::new("later", 1))
            .unwrap();
        assert_ne!(next.id, id);
    }
}
