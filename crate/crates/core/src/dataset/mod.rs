//! Image manifests, feature files and the anonymized release format.

pub mod features;
pub mod manifest;
pub mod release;
pub mod sidecar;

pub use features::{read_feature_csv, write_feature_csv};
pub use manifest::{ingest_manifest, manifest_entries};
pub use release::{
    export_feature_matrix, export_release, import_release, pseudonyms, ExportJudgment,
    ExportRecord, ReleaseReader,
};
