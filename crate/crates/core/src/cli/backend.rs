//! The two ways the CLI reaches a campaign store: linked in (embedded) or
//! over HTTP (client).

use std::path::PathBuf;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use super::CliError;
use crate::analytics::{Format, ReportName, ReportOptions};
use crate::config::CampaignConfig;
use crate::i18n::MessageCatalogs;
use crate::model::{Campaign, CampaignId, CampaignStatus};
use crate::service::http::ReportBody;
use crate::service::{CampaignSummary, Service, SubjectReport, SubjectRow};
use crate::store::{IngestReport, Installation, IssuedCredential};

pub trait Backend {
    fn create_campaign(&self, config: &CampaignConfig) -> Result<Campaign, CliError>;
    fn add_images(&self, id: CampaignId, sources: &[String]) -> Result<IngestReport, CliError>;
    fn attach_features(&self, id: CampaignId, csv: Vec<u8>) -> Result<usize, CliError>;
    fn generate_annotators(
        &self,
        id: CampaignId,
        count: i64,
        language: Option<&str>,
    ) -> Result<Vec<IssuedCredential>, CliError>;
    fn set_status(&self, id: CampaignId, status: CampaignStatus) -> Result<Campaign, CliError>;
    fn summary(&self, id: CampaignId) -> Result<CampaignSummary, CliError>;
    fn label_subjects(
        &self,
        id: CampaignId,
        rows: &[SubjectRow],
    ) -> Result<SubjectReport, CliError>;
    fn report(
        &self,
        id: CampaignId,
        name: ReportName,
        options: &ReportOptions,
        format: Format,
    ) -> Result<String, CliError>;
    fn export(&self, id: CampaignId, seed: u64) -> Result<Vec<u8>, CliError>;
    /// Persists changes; a no-op for remote stores.
    fn finish(&self) -> Result<(), CliError>;
}

pub struct Embedded {
    pub service: Service,
    path: PathBuf,
}

impl Embedded {
    pub fn open(path: PathBuf, catalogs: MessageCatalogs) -> Result<Self, CliError> {
        let store = Installation::open(&path)?;
        let service = Service::new(Arc::new(store), catalogs)?.with_state_path(&path);
        Ok(Embedded { service, path })
    }

    pub fn into_service(self) -> (Service, PathBuf) {
        (self.service, self.path)
    }
}

impl Backend for Embedded {
    fn create_campaign(&self, config: &CampaignConfig) -> Result<Campaign, CliError> {
        Ok(self.service.create_campaign(config)?)
    }

    fn add_images(&self, id: CampaignId, sources: &[String]) -> Result<IngestReport, CliError> {
        Ok(self.service.add_images(id, sources)?)
    }

    fn attach_features(&self, id: CampaignId, csv: Vec<u8>) -> Result<usize, CliError> {
        Ok(self.service.attach_features_csv(id, &csv)?)
    }

    fn generate_annotators(
        &self,
        id: CampaignId,
        count: i64,
        language: Option<&str>,
    ) -> Result<Vec<IssuedCredential>, CliError> {
        Ok(self.service.generate_annotators(id, count, language)?)
    }

    fn set_status(&self, id: CampaignId, status: CampaignStatus) -> Result<Campaign, CliError> {
        Ok(self.service.set_status(id, status)?)
    }

    fn summary(&self, id: CampaignId) -> Result<CampaignSummary, CliError> {
        Ok(self.service.summary(id)?)
    }

    fn label_subjects(
        &self,
        id: CampaignId,
        rows: &[SubjectRow],
    ) -> Result<SubjectReport, CliError> {
        Ok(self.service.label_subjects(id, rows)?)
    }

    fn report(
        &self,
        id: CampaignId,
        name: ReportName,
        options: &ReportOptions,
        format: Format,
    ) -> Result<String, CliError> {
        Ok(self.service.report(id, name, options)?.render(format))
    }

    fn export(&self, id: CampaignId, seed: u64) -> Result<Vec<u8>, CliError> {
        Ok(self.service.export(id, seed)?)
    }

    fn finish(&self) -> Result<(), CliError> {
        Ok(self.service.checkpoint()?)
    }
}

pub struct Remote {
    client: reqwest::blocking::Client,
    base: String,
    token: String,
}

impl Remote {
    pub fn new(base: &str, token: String) -> Self {
        Remote {
            client: reqwest::blocking::Client::new(),
            base: base.trim_end_matches('/').to_owned(),
            token,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/api/admin/campaigns{path}", self.base)
    }

    fn send(&self, request: reqwest::blocking::RequestBuilder) -> Result<Vec<u8>, CliError> {
        let response = request
            .bearer_auth(&self.token)
            .send()
            .map_err(|e| CliError::runtime(format!("request failed: {e}")))?;
        let status = response.status();
        let body = response
            .bytes()
            .map_err(|e| CliError::runtime(format!("reading response: {e}")))?
            .to_vec();
        if status.is_success() {
            return Ok(body);
        }
        let message = serde_json::from_slice::<Value>(&body)
            .ok()
            .and_then(|v| v.get("message").and_then(Value::as_str).map(str::to_owned))
            .unwrap_or_else(|| String::from_utf8_lossy(&body).into_owned());
        if status.is_client_error() {
            Err(CliError::usage(message))
        } else {
            Err(CliError::runtime(format!(
                "server error {status}: {message}"
            )))
        }
    }

    fn post<T: DeserializeOwned>(&self, path: &str, body: &impl Serialize) -> Result<T, CliError> {
        let bytes = self.send(self.client.post(self.url(path)).json(body))?;
        decode(&bytes)
    }
}

fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::runtime(format!("bad response: {e}")))
}

impl Backend for Remote {
    fn create_campaign(&self, config: &CampaignConfig) -> Result<Campaign, CliError> {
        self.post("", config)
    }

    fn add_images(&self, id: CampaignId, sources: &[String]) -> Result<IngestReport, CliError> {
        self.post(&format!("/{id}/images"), &json!({ "sources": sources }))
    }

    fn attach_features(&self, id: CampaignId, csv: Vec<u8>) -> Result<usize, CliError> {
        let bytes = self.send(
            self.client
                .post(self.url(&format!("/{id}/features")))
                .header(reqwest::header::CONTENT_TYPE, "text/csv")
                .body(csv),
        )?;
        let v: Value = decode(&bytes)?;
        Ok(v["attached"].as_u64().unwrap_or(0) as usize)
    }

    fn generate_annotators(
        &self,
        id: CampaignId,
        count: i64,
        language: Option<&str>,
    ) -> Result<Vec<IssuedCredential>, CliError> {
        let mut v: Value = self.post(
            &format!("/{id}/annotators"),
            &json!({ "count": count, "language": language }),
        )?;
        decode(v["credentials"].take().to_string().as_bytes())
    }

    fn set_status(&self, id: CampaignId, status: CampaignStatus) -> Result<Campaign, CliError> {
        self.post(&format!("/{id}/status"), &json!({ "status": status }))
    }

    fn summary(&self, id: CampaignId) -> Result<CampaignSummary, CliError> {
        decode(&self.send(self.client.get(self.url(&format!("/{id}"))))?)
    }

    fn label_subjects(
        &self,
        id: CampaignId,
        rows: &[SubjectRow],
    ) -> Result<SubjectReport, CliError> {
        self.post(&format!("/{id}/subjects"), &json!({ "rows": rows }))
    }

    fn report(
        &self,
        id: CampaignId,
        name: ReportName,
        options: &ReportOptions,
        format: Format,
    ) -> Result<String, CliError> {
        let body = ReportBody {
            format: Some(format.as_str().to_owned()),
            exclude: options.exclude.clone(),
            no_sample: options
                .no_sample
                .as_ref()
                .map(|s| s.iter().cloned().collect()),
        };
        let bytes = self.send(
            self.client
                .post(self.url(&format!("/{id}/reports/{}", name.as_str())))
                .json(&body),
        )?;
        let text = String::from_utf8_lossy(&bytes).into_owned();
        Ok(match format {
            // re-render so output matches embedded mode byte for byte
            Format::Json => {
                let v: Value = decode(&bytes)?;
                serde_json::to_string_pretty(&v).map_or(text, |s| s + "\n")
            }
            Format::Csv => text,
        })
    }

    fn export(&self, id: CampaignId, seed: u64) -> Result<Vec<u8>, CliError> {
        self.send(
            self.client
                .get(self.url(&format!("/{id}/export?seed={seed}"))),
        )
    }

    fn finish(&self) -> Result<(), CliError> {
        Ok(())
    }
}
