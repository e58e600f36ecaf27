//! Per-language message catalogs.
//!
//! A catalog is a UTF-8 file of `key = value` lines; `#` starts a comment
//! line. English, French and Italian are compiled in, and more languages
//! (or overrides) can be loaded from a directory of `<lang>.catalog` files.
//! Every language must define every key the default language defines.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_LANGUAGE: &str = "en";

const SHIPPED: [(&str, &str); 3] = [
    ("en", include_str!("../catalogs/en.catalog")),
    ("fr", include_str!("../catalogs/fr.catalog")),
    ("it", include_str!("../catalogs/it.catalog")),
];

pub type Catalog = BTreeMap<String, String>;

#[derive(Clone, Debug)]
pub struct MessageCatalogs {
    default_language: String,
    languages: BTreeMap<String, Catalog>,
}

/// Catalog key holding the display label of a trigger category.
pub fn category_key(label: &str) -> String {
    let slug: String = label
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect();
    format!("category.{slug}")
}

pub fn parse_catalog(text: &str) -> Result<Catalog> {
    let mut catalog = Catalog::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Malformed(format!(
                "catalog line {}: expected key = value",
                n + 1
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Malformed(format!(
                "catalog line {}: empty key",
                n + 1
            )));
        }
        catalog.insert(key.to_owned(), value.trim().replace("\\n", "\n"));
    }
    Ok(catalog)
}

impl MessageCatalogs {
    /// The compiled-in catalogs, already checked for completeness.
    pub fn shipped() -> Self {
        let mut languages = BTreeMap::new();
        for (lang, text) in SHIPPED {
            languages.insert(
                lang.to_owned(),
                parse_catalog(text).expect("shipped catalog parses"),
            );
        }
        let catalogs = MessageCatalogs {
            default_language: DEFAULT_LANGUAGE.to_owned(),
            languages,
        };
        catalogs.check().expect("shipped catalogs are complete");
        catalogs
    }

    pub fn from_catalogs(
        default_language: &str,
        languages: BTreeMap<String, Catalog>,
    ) -> Result<Self> {
        let catalogs = MessageCatalogs {
            default_language: default_language.to_owned(),
            languages,
        };
        catalogs.check()?;
        Ok(catalogs)
    }

    /// Adds or extends languages from `<lang>.catalog` files in `dir`, then
    /// re-checks completeness.
    pub fn load_dir(mut self, dir: &Path) -> Result<Self> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("catalog") {
                continue;
            }
            let Some(lang) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let parsed = parse_catalog(&fs::read_to_string(&path)?)?;
            self.languages
                .entry(lang.to_owned())
                .or_default()
                .extend(parsed);
        }
        self.check()?;
        Ok(self)
    }

    /// Fails on the first key of the default language missing elsewhere.
    pub fn check(&self) -> Result<()> {
        let default = self
            .languages
            .get(&self.default_language)
            .ok_or_else(|| Error::UnknownLanguage(self.default_language.clone()))?;
        for (lang, catalog) in &self.languages {
            if let Some(key) = default.keys().find(|k| !catalog.contains_key(*k)) {
                return Err(Error::IncompleteCatalog {
                    language: lang.clone(),
                    key: key.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn default_language(&self) -> &str {
        &self.default_language
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.languages.keys().map(String::as_str)
    }

    pub fn has_language(&self, lang: &str) -> bool {
        self.languages.contains_key(lang)
    }

    /// True when the default language defines `key` (and so, after
    /// [`check`](Self::check), every language does).
    pub fn has_key(&self, key: &str) -> bool {
        self.languages
            .get(&self.default_language)
            .is_some_and(|c| c.contains_key(key))
    }

    pub fn catalog(&self, lang: &str) -> Result<&Catalog> {
        self.languages
            .get(lang)
            .ok_or_else(|| Error::UnknownLanguage(lang.to_owned()))
    }

    pub fn get(&self, lang: &str, key: &str) -> Result<&str> {
        self.catalog(lang)?
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::IncompleteCatalog {
                language: lang.to_owned(),
                key: key.to_owned(),
            })
    }
}
