//! The annotation service: sessions, the annotator workflow and admin
//! operations over an [`Installation`].
//!
//! Transport-independent; [`http`] maps it onto HTTP + JSON and the CLI
//! calls it directly in embedded mode.

pub mod http;

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytics::{run_report, Report, ReportName, ReportOptions};
use crate::assign::Offer;
use crate::auth::{self, CredentialHash};
use crate::config::CampaignConfig;
use crate::dataset::{export_release, read_feature_csv};
use crate::error::{Error, Result};
use crate::i18n::{category_key, MessageCatalogs};
use crate::model::{
    config_error, AnnotatorId, Campaign, CampaignId, CampaignStatus, CommentDraft, ImageId,
    SubjectLabel, Verdict,
};
use crate::store::{CampaignState, IngestReport, Installation, IssuedCredential};

pub const DEFAULT_SESSION_TTL_HOURS: i64 = 12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoginResponse {
    pub token: String,
    pub expires_at: DateTime<Utc>,
    pub language: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryOption {
    /// Value to send back as the comment trigger.
    pub value: String,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Task {
    Image {
        image_id: ImageId,
        source: String,
        prompt: String,
        categories: Vec<CategoryOption>,
        language: String,
    },
    Exhausted {
        message: String,
        language: String,
    },
}

impl Task {
    pub fn image_id(&self) -> Option<ImageId> {
        match self {
            Task::Image { image_id, .. } => Some(*image_id),
            Task::Exhausted { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub image_id: ImageId,
    pub verdict: Verdict,
    #[serde(default)]
    pub comment: Option<CommentDraft>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub judgment_id: u32,
    pub next: Task,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubjectRow {
    pub image_id: String,
    pub subject: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based position in the submitted rows.
    pub row: usize,
    pub image_id: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SubjectReport {
    pub labeled: usize,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub campaign: Campaign,
    pub images: usize,
    pub annotators: usize,
    pub judgments: usize,
    pub comments: usize,
}

struct Session {
    campaign: CampaignId,
    annotator: AnnotatorId,
    expires_at: DateTime<Utc>,
}

#[derive(Default)]
struct Sessions {
    by_token: HashMap<String, Session>,
    by_annotator: HashMap<AnnotatorId, String>,
}

type IdempotencySlot = Arc<Mutex<Option<Value>>>;

pub struct Service {
    store: Arc<Installation>,
    catalogs: MessageCatalogs,
    admin_token: Option<String>,
    session_ttl: Duration,
    sessions: Mutex<Sessions>,
    idempotency: Mutex<HashMap<String, IdempotencySlot>>,
    state_path: Option<PathBuf>,
    dummy_credential: CredentialHash,
}

impl Service {
    /// Fails when a stored campaign refers to a language, prompt or
    /// category the catalogs cannot render.
    pub fn new(store: Arc<Installation>, catalogs: MessageCatalogs) -> Result<Self> {
        let service = Service {
            store,
            catalogs,
            admin_token: None,
            session_ttl: Duration::hours(DEFAULT_SESSION_TTL_HOURS),
            sessions: Mutex::default(),
            idempotency: Mutex::default(),
            state_path: None,
            dummy_credential: CredentialHash::new(&auth::generate_password()),
        };
        for id in service.store.campaign_ids() {
            let shared = service.store.campaign(id)?;
            let state = shared.lock();
            service.check_renderable(state.campaign())?;
        }
        Ok(service)
    }

    pub fn with_admin_token(mut self, token: impl Into<String>) -> Self {
        self.admin_token = Some(token.into());
        self
    }

    pub fn with_session_ttl(mut self, ttl: Duration) -> Self {
        self.session_ttl = ttl;
        self
    }

    /// File written by [`checkpoint`](Self::checkpoint).
    pub fn with_state_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.state_path = Some(path.into());
        self
    }

    pub fn store(&self) -> &Installation {
        &self.store
    }

    pub fn catalogs(&self) -> &MessageCatalogs {
        &self.catalogs
    }

    pub fn checkpoint(&self) -> Result<()> {
        match &self.state_path {
            Some(path) => self.store.save(path),
            None => Ok(()),
        }
    }

    fn check_renderable(&self, campaign: &Campaign) -> Result<()> {
        for lang in &campaign.languages {
            if !self.catalogs.has_language(lang) {
                return Err(config_error(
                    "languages",
                    &format!("no message catalog for {lang:?}"),
                ));
            }
        }
        if !self.catalogs.has_key(&campaign.prompt_key) {
            return Err(config_error(
                "prompt_key",
                &format!("no catalog entry {:?}", campaign.prompt_key),
            ));
        }
        for c in &campaign.categories {
            let key = category_key(c);
            if !self.catalogs.has_key(&key) {
                return Err(config_error(
                    "categories",
                    &format!("no catalog entry {key:?}"),
                ));
            }
        }
        Ok(())
    }

    // ---- annotator side ----

    /// Uniform failure for unknown users and wrong passwords. A new login
    /// revokes the annotator's previous token.
    pub fn login(&self, username: &str, password: &str) -> Result<LoginResponse> {
        let Some((campaign, annotator)) = self.store.find_login(username) else {
            self.dummy_credential.verify(password);
            return Err(Error::InvalidCredentials);
        };
        let shared = self.store.campaign(campaign)?;
        let language = {
            let state = shared.lock();
            let a = state
                .annotator(annotator)
                .map_err(|_| Error::InvalidCredentials)?;
            if !a.credential.verify(password) {
                return Err(Error::InvalidCredentials);
            }
            a.language.clone()
        };
        let token = auth::generate_token();
        let expires_at = Utc::now() + self.session_ttl;
        let mut sessions = self.sessions.lock();
        if let Some(old) = sessions.by_annotator.insert(annotator, token.clone()) {
            sessions.by_token.remove(&old);
        }
        sessions.by_token.insert(
            token.clone(),
            Session {
                campaign,
                annotator,
                expires_at,
            },
        );
        Ok(LoginResponse {
            token,
            expires_at,
            language,
        })
    }

    pub fn logout(&self, token: &str) {
        let mut sessions = self.sessions.lock();
        if let Some(s) = sessions.by_token.remove(token) {
            sessions.by_annotator.remove(&s.annotator);
        }
    }

    fn authenticate(&self, token: &str) -> Result<(CampaignId, AnnotatorId)> {
        let mut sessions = self.sessions.lock();
        let Some(s) = sessions.by_token.get(token) else {
            return Err(Error::Unauthorized);
        };
        if s.expires_at <= Utc::now() {
            let annotator = s.annotator;
            sessions.by_token.remove(token);
            sessions.by_annotator.remove(&annotator);
            return Err(Error::Unauthorized);
        }
        Ok((s.campaign, s.annotator))
    }

    fn render(&self, state: &CampaignState, annotator: AnnotatorId, offer: Offer) -> Result<Task> {
        let language = state.annotator(annotator)?.language.clone();
        let catalogs = &self.catalogs;
        Ok(match offer {
            Offer::Image { image, .. } => Task::Image {
                image_id: image,
                source: state.image(image)?.source.as_str().to_owned(),
                prompt: catalogs
                    .get(&language, &state.campaign().prompt_key)?
                    .to_owned(),
                categories: state
                    .campaign()
                    .categories
                    .iter()
                    .map(|c| {
                        Ok(CategoryOption {
                            value: c.clone(),
                            label: catalogs.get(&language, &category_key(c))?.to_owned(),
                        })
                    })
                    .collect::<Result<_>>()?,
                language,
            },
            Offer::Exhausted => Task::Exhausted {
                message: catalogs.get(&language, "task.exhausted")?.to_owned(),
                language,
            },
        })
    }

    /// The annotator's current image, stable until it is judged.
    pub fn next_task(&self, token: &str) -> Result<Task> {
        let (campaign, annotator) = self.authenticate(token)?;
        let shared = self.store.campaign(campaign)?;
        let mut state = shared.lock();
        let offer = state.next_image(annotator)?;
        self.render(&state, annotator, offer)
    }

    /// Records a judgment on the currently offered image and returns the
    /// next task.
    pub fn submit_judgment(&self, token: &str, request: SubmitRequest) -> Result<SubmitResponse> {
        let (campaign, annotator) = self.authenticate(token)?;
        let shared = self.store.campaign(campaign)?;
        let mut state = shared.lock();
        if state.campaign().status != CampaignStatus::Active {
            return Err(Error::CampaignClosed(state.campaign().status.to_string()));
        }
        if state.assignment().current_offer(annotator) != Some(request.image_id) {
            return Err(Error::StaleImage(request.image_id.to_string()));
        }
        let judgment_id = state
            .submit(
                annotator,
                request.image_id,
                request.verdict,
                request.comment,
            )?
            .id;
        let offer = state.next_image(annotator)?;
        let next = self.render(&state, annotator, offer)?;
        Ok(SubmitResponse { judgment_id, next })
    }

    pub fn set_language(&self, token: &str, language: &str) -> Result<()> {
        let (campaign, annotator) = self.authenticate(token)?;
        let shared = self.store.campaign(campaign)?;
        let mut state = shared.lock();
        state.set_annotator_language(annotator, language)
    }

    /// Runs `f` once per key; later calls with the same key get the first
    /// successful result back. Failures are not remembered.
    pub fn idempotent<T, F>(&self, scope: &str, key: Option<&str>, f: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        let Some(key) = key else {
            return f();
        };
        let slot = self
            .idempotency
            .lock()
            .entry(format!("{scope}\u{0}{key}"))
            .or_default()
            .clone();
        let mut slot = slot.lock();
        if let Some(stored) = slot.as_ref() {
            return Ok(serde_json::from_value(stored.clone())?);
        }
        let result = f()?;
        *slot = Some(serde_json::to_value(&result)?);
        Ok(result)
    }

    /// Scope for idempotency keys sent with an annotator token.
    pub fn annotator_scope(&self, token: &str) -> Result<String> {
        let (_, annotator) = self.authenticate(token)?;
        Ok(annotator.to_string())
    }

    // ---- admin side ----

    /// Without a configured admin token every admin call is refused.
    pub fn authorize_admin(&self, token: &str) -> Result<()> {
        match &self.admin_token {
            Some(t) if auth::constant_time_eq(t.as_bytes(), token.as_bytes()) => Ok(()),
            _ => Err(Error::Unauthorized),
        }
    }

    pub fn create_campaign(&self, config: &CampaignConfig) -> Result<Campaign> {
        // validate against the catalogs before allocating an id
        self.check_renderable(&config.build(CampaignId(0))?)?;
        self.store.create_campaign(config)
    }

    pub fn generate_annotators(
        &self,
        campaign: CampaignId,
        count: i64,
        language: Option<&str>,
    ) -> Result<Vec<IssuedCredential>> {
        self.store.generate_annotators(campaign, count, language)
    }

    pub fn add_images(&self, campaign: CampaignId, sources: &[String]) -> Result<IngestReport> {
        let shared = self.store.campaign(campaign)?;
        let mut state = shared.lock();
        state.ingest_images(sources)
    }

    /// Attaches features from CSV text (`image_id,f0,f1,...`).
    pub fn attach_features_csv(&self, campaign: CampaignId, csv: &[u8]) -> Result<usize> {
        let rows = read_feature_csv(csv)?;
        let shared = self.store.campaign(campaign)?;
        let mut state = shared.lock();
        state.attach_features(rows)
    }

    /// Applies every valid row; invalid rows are reported, not fatal.
    pub fn label_subjects(
        &self,
        campaign: CampaignId,
        rows: &[SubjectRow],
    ) -> Result<SubjectReport> {
        let shared = self.store.campaign(campaign)?;
        let mut state = shared.lock();
        let mut report = SubjectReport::default();
        for (n, row) in rows.iter().enumerate() {
            let applied = row.subject.parse::<SubjectLabel>().and_then(|label| {
                let image = row
                    .image_id
                    .parse::<ImageId>()
                    .map_err(|_| Error::UnknownImage(row.image_id.clone()))?;
                state.set_subject_label(image, label).map(|_| ())
            });
            match applied {
                Ok(()) => report.labeled += 1,
                Err(e) => report.rejected.push(RejectedRow {
                    row: n + 1,
                    image_id: row.image_id.clone(),
                    message: e.to_string(),
                }),
            }
        }
        Ok(report)
    }

    pub fn set_status(&self, campaign: CampaignId, status: CampaignStatus) -> Result<Campaign> {
        let shared = self.store.campaign(campaign)?;
        let mut state = shared.lock();
        state.set_status(status)?;
        Ok(state.campaign().clone())
    }

    pub fn summary(&self, campaign: CampaignId) -> Result<CampaignSummary> {
        let shared = self.store.campaign(campaign)?;
        let state = shared.lock();
        Ok(CampaignSummary {
            campaign: state.campaign().clone(),
            images: state.images().len(),
            annotators: state.annotators().count(),
            judgments: state.judgments().len(),
            comments: state
                .judgments()
                .iter()
                .filter(|j| j.comment.is_some())
                .count(),
        })
    }

    pub fn report(
        &self,
        campaign: CampaignId,
        name: ReportName,
        options: &ReportOptions,
    ) -> Result<Report> {
        let snapshot = {
            let shared = self.store.campaign(campaign)?;
            let state = shared.lock();
            state.snapshot()
        };
        run_report(&snapshot, name, options)
    }

    /// The release as JSON lines.
    pub fn export(&self, campaign: CampaignId, seed: u64) -> Result<Vec<u8>> {
        let shared = self.store.campaign(campaign)?;
        let state = shared.lock();
        let mut out = Vec::new();
        export_release(&state, &mut out, seed)?;
        Ok(out)
    }
}

/// Parses a comma- or newline-separated id list, as used for no-sample
/// files and query parameters.
pub fn parse_id_list(text: &str) -> BTreeSet<String> {
    text.split([',', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty() && !s.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(images: usize, annotators: i64) -> (Service, CampaignId, Vec<IssuedCredential>) {
        let svc = Service::new(Arc::new(Installation::new()), MessageCatalogs::shipped())
            .unwrap()
            .with_admin_token("secret");
        let mut cfg = CampaignConfig::new("t", 2);
        cfg.languages = Some(vec!["en".into(), "it".into()]);
        let c = svc.create_campaign(&cfg).unwrap();
        let sources: Vec<String> = (0..images).map(|i| format!("p/{i}.jpg")).collect();
        svc.add_images(c.id, &sources).unwrap();
        let creds = svc.generate_annotators(c.id, annotators, None).unwrap();
        svc.set_status(c.id, CampaignStatus::Active).unwrap();
        (svc, c.id, creds)
    }

    #[test]
    fn login_is_uniform_and_single_session() {
        let (svc, _, creds) = setup(2, 1);
        let c = &creds[0];
        assert!(matches!(
            svc.login(&c.username, "nope"),
            Err(Error::InvalidCredentials)
        ));
        assert!(matches!(
            svc.login("nobody", &c.password),
            Err(Error::InvalidCredentials)
        ));
        let first = svc.login(&c.username, &c.password).unwrap().token;
        let second = svc.login(&c.username, &c.password).unwrap().token;
        assert!(matches!(svc.next_task(&first), Err(Error::Unauthorized)));
        assert!(svc.next_task(&second).is_ok());
    }

    #[test]
    fn expired_sessions_are_rejected() {
        let (svc, _, creds) = setup(2, 1);
        let svc = svc.with_session_ttl(Duration::zero());
        let t = svc
            .login(&creds[0].username, &creds[0].password)
            .unwrap()
            .token;
        assert!(matches!(svc.next_task(&t), Err(Error::Unauthorized)));
    }

    #[test]
    fn workflow_in_italian() {
        let (svc, id, creds) = setup(2, 1);
        let t = svc
            .login(&creds[0].username, &creds[0].password)
            .unwrap()
            .token;
        svc.set_language(&t, "it").unwrap();
        let task = svc.next_task(&t).unwrap();
        assert_eq!(svc.next_task(&t).unwrap(), task);
        let Task::Image {
            image_id,
            prompt,
            categories,
            ..
        } = task
        else {
            panic!("expected an image")
        };
        assert_eq!(prompt, svc.catalogs().get("it", "prompt.default").unwrap());
        assert_eq!(categories.len(), 7);

        let r = svc
            .submit_judgment(
                &t,
                SubmitRequest {
                    image_id,
                    verdict: Verdict::Yes,
                    comment: Some(CommentDraft::new("Inquietante", "Other")),
                },
            )
            .unwrap();
        let second = r.next.image_id().unwrap();
        assert!(matches!(
            svc.submit_judgment(
                &t,
                SubmitRequest {
                    image_id,
                    verdict: Verdict::No,
                    comment: None
                }
            ),
            Err(Error::StaleImage(_))
        ));
        let r = svc
            .submit_judgment(
                &t,
                SubmitRequest {
                    image_id: second,
                    verdict: Verdict::No,
                    comment: None,
                },
            )
            .unwrap();
        assert!(
            matches!(r.next, Task::Exhausted { ref message, .. } if message == svc.catalogs().get("it", "task.exhausted").unwrap())
        );
        assert_eq!(svc.summary(id).unwrap().judgments, 2);
    }

    #[test]
    fn idempotency_key_replays_the_first_result() {
        let (svc, id, creds) = setup(3, 1);
        let t = svc
            .login(&creds[0].username, &creds[0].password)
            .unwrap()
            .token;
        let image_id = svc.next_task(&t).unwrap().image_id().unwrap();
        let req = SubmitRequest {
            image_id,
            verdict: Verdict::No,
            comment: None,
        };
        let scope = svc.annotator_scope(&t).unwrap();
        let a: SubmitResponse = svc
            .idempotent(&scope, Some("k1"), || svc.submit_judgment(&t, req.clone()))
            .unwrap();
        let b: SubmitResponse = svc
            .idempotent(&scope, Some("k1"), || svc.submit_judgment(&t, req.clone()))
            .unwrap();
        assert_eq!(a.judgment_id, b.judgment_id);
        assert_eq!(svc.summary(id).unwrap().judgments, 1);
    }

    #[test]
    fn campaigns_must_be_renderable() {
        let svc = Service::new(Arc::new(Installation::new()), MessageCatalogs::shipped()).unwrap();
        let mut cfg = CampaignConfig::new("t", 4);
        cfg.prompt_key = Some("prompt.missing".into());
        assert!(
            matches!(svc.create_campaign(&cfg), Err(Error::InvalidConfig { ref field, .. }) if field == "prompt_key")
        );
        let mut cfg = CampaignConfig::new("t", 4);
        cfg.categories = Some(vec!["Hair".into()]);
        assert!(
            matches!(svc.create_campaign(&cfg), Err(Error::InvalidConfig { ref field, .. }) if field == "categories")
        );
        let mut cfg = CampaignConfig::new("t", 4);
        cfg.languages = Some(vec!["en".into(), "de".into()]);
        assert!(
            matches!(svc.create_campaign(&cfg), Err(Error::InvalidConfig { ref field, .. }) if field == "languages")
        );
    }

    #[test]
    fn subject_rows_are_reported_individually() {
        let (svc, id, _) = setup(3, 1);
        let rows: Vec<SubjectRow> = [
            ("img_0", "Females"),
            ("img_1", "Animals"),
            ("img_9", "Males"),
        ]
        .iter()
        .map(|(i, s)| SubjectRow {
            image_id: i.to_string(),
            subject: s.to_string(),
        })
        .collect();
        let r = svc.label_subjects(id, &rows).unwrap();
        assert_eq!(r.labeled, 1);
        assert_eq!(r.rejected.len(), 2);
        assert_eq!(r.rejected[0].row, 2);
        assert!(r.rejected[0]
            .message
            .contains("Females, Males, Mixed, Nobody"));
    }

    #[test]
    fn admin_token_is_required() {
        let (svc, _, _) = setup(1, 1);
        assert!(svc.authorize_admin("secret").is_ok());
        assert!(svc.authorize_admin("secreT").is_err());
        let bare = Service::new(Arc::new(Installation::new()), MessageCatalogs::shipped()).unwrap();
        assert!(bare.authorize_admin("").is_err());
    }
}
