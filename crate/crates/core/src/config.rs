use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    check_categories, config_error, Campaign, CampaignId, CampaignStatus, DEFAULT_CATEGORIES,
    DEFAULT_PROMPT_KEY,
};

/// Parameters for a new campaign. Everything but `name` and `quota` has a
/// default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub name: String,
    pub quota: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub languages: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CampaignConfig {
    pub fn new(name: impl Into<String>, quota: i64) -> Self {
        CampaignConfig {
            name: name.into(),
            quota,
            ..Default::default()
        }
    }

    /// Builds a draft campaign, reporting the first invalid field.
    pub fn build(&self, id: CampaignId) -> Result<Campaign> {
        if self.name.trim().is_empty() {
            return Err(config_error("name", "must not be empty"));
        }
        if self.quota < 1 {
            return Err(config_error("quota", "must be at least 1"));
        }
        let quota = u32::try_from(self.quota).map_err(|_| config_error("quota", "too large"))?;
        let categories = match &self.categories {
            Some(c) => c.clone(),
            None => DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
        };
        check_categories(&categories)?;
        let prompt_key = self
            .prompt_key
            .clone()
            .unwrap_or_else(|| DEFAULT_PROMPT_KEY.to_owned());
        if prompt_key.trim().is_empty() {
            return Err(config_error("prompt_key", "must not be empty"));
        }
        let default_language = self.default_language.clone().unwrap_or_else(|| "en".into());
        let languages = self
            .languages
            .clone()
            .unwrap_or_else(|| vec![default_language.clone()]);
        if languages.is_empty() {
            return Err(config_error(
                "languages",
                "at least one language is required",
            ));
        }
        let campaign = Campaign {
            id,
            name: self.name.trim().to_owned(),
            prompt_key,
            categories,
            quota,
            default_language,
            languages,
            status: CampaignStatus::Draft,
            feature_dim: None,
            seed: self.seed.unwrap_or_else(rand::random),
        };
        campaign.check()?;
        Ok(campaign)
    }
}
