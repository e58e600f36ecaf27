pub mod analytics;
pub mod assign;
pub mod auth;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod i18n;
pub mod model;
pub mod service;
pub mod sim;
pub mod snapshot;
pub mod store;

pub use error::{Error, Result};
