//! Krippendorff's alpha over trigger categories.
//!
//! Each image with two or more comments is a unit; its values are the
//! trigger categories the commenters picked.
//!
//! ```bash
//! cargo run --example agreement
//! ```

use annocamp::analytics::{alpha_details, build_units, krippendorff_alpha, AgreementUnits};
use annocamp::model::{Comment, Verdict};
use annocamp::snapshot::{CampaignSnapshot, SnapshotImage, SnapshotJudgment};

fn image(id: &str, triggers: &[&str]) -> SnapshotImage {
    SnapshotImage {
        id: id.into(),
        feature: None,
        subject: None,
        judgments: triggers
            .iter()
            .enumerate()
            .map(|(n, t)| SnapshotJudgment {
                annotator: format!("a{n}"),
                verdict: Verdict::Yes,
                comment: Some(Comment {
                    text: "x".into(),
                    trigger: t.to_string(),
                }),
            })
            .collect(),
    }
}

pub fn run_example() -> annocamp::Result<()> {
    // two perfectly agreeing units
    let units = AgreementUnits::from_labels(
        &["A", "B"],
        &[("u1", vec!["A", "A"]), ("u2", vec!["B", "B"])],
    )?;
    assert_eq!(krippendorff_alpha(&units)?, 1.0);
    // systematic swap: below chance
    let units = AgreementUnits::from_labels(
        &["A", "B"],
        &[("u1", vec!["A", "B"]), ("u2", vec!["B", "A"])],
    )?;
    assert_eq!(krippendorff_alpha(&units)?, -0.5);

    let snapshot = CampaignSnapshot::with_default_categories(vec![
        image("img_0", &["Pose", "Pose", "Other"]),
        image("img_1", &["Body", "Body"]),
        image("img_2", &["Clothing", "Other"]),
        image("img_3", &["Location"]),
        image("img_4", &["Facial expression", "Facial expression", "Pose"]),
    ]);
    let all = alpha_details(&build_units(&snapshot, None)?)?;
    println!(
        "alpha {:.4} over {} units ({} values), D_o {:.4}, D_e {:.4}",
        all.alpha,
        all.pairable_units,
        all.pairable_values,
        all.observed_disagreement,
        all.expected_disagreement
    );
    let without_other = alpha_details(&build_units(&snapshot, Some("Other"))?)?;
    println!("alpha {:.4} without Other", without_other.alpha);
    assert!(without_other.alpha > all.alpha);
    Ok(())
}

fn main() -> annocamp::Result<()> {
    run_example()
}
