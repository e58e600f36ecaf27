//! Campaign statistics: agreement, association testing and corpus tables.
//!
//! Everything here is a pure function of a [`CampaignSnapshot`], so it runs
//! the same way on a live campaign and on an imported release.
//!
//! [`CampaignSnapshot`]: crate::snapshot::CampaignSnapshot

pub mod agreement;
pub mod chisq;
pub mod gamma;
pub mod report;
pub mod tables;

pub use agreement::{
    alpha_details, build_units, krippendorff_alpha, AgreementUnits, AlphaResult, CoincidenceMatrix,
    Unit,
};
pub use chisq::{
    chi_square_p_value, chi_square_statistic, chi_square_test, ChiSquareResult, ContingencyTable,
};
pub use report::{run_report, Format, Report, ReportName, ReportOptions};
pub use tables::{
    judgment_depth_table, sample_uncommented, subject_trigger_crosstab,
    subject_verdict_distribution, trigger_distribution, DepthRow, SubjectTriggerTable,
};
