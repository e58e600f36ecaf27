//! Is the subject of a picture associated with it drawing comments?
//!
//! Commented images and an equally labeled random sample of uncommented
//! images form a subject x verdict table, tested with Pearson's chi-square.
//!
//! ```bash
//! cargo run --example subject_association
//! ```

use annocamp::analytics::{
    chi_square_p_value, chi_square_test, sample_uncommented, subject_verdict_distribution,
    ContingencyTable,
};
use annocamp::model::{Comment, SubjectLabel, Verdict};
use annocamp::snapshot::{CampaignSnapshot, SnapshotImage, SnapshotJudgment};

pub fn run_example() -> annocamp::Result<()> {
    // a table given directly
    let table = ContingencyTable::from_rows(
        &["Females", "Males", "Mixed", "Nobody"],
        &["Yes", "No"],
        vec![vec![60, 40], vec![30, 45], vec![5, 15], vec![25, 80]],
    )?;
    let r = chi_square_test(&table)?;
    println!(
        "chi2 = {:.3}, dof = {}, p = {:.3e}",
        r.statistic, r.dof, r.p_value
    );
    assert!(r.p_value < 0.001);
    // 3.841459 is the 95th percentile of chi-square with one degree of freedom
    assert!((chi_square_p_value(3.841459, 1) - 0.05).abs() < 1e-6);

    // the same pipeline on campaign data: commented images are compared
    // against a seeded sample of uncommented ones
    let subjects = SubjectLabel::ALL;
    let images: Vec<SnapshotImage> = (0..400)
        .map(|i| {
            let subject = subjects[i % 4];
            let yes = match subject {
                SubjectLabel::Females => i % 3 == 0,
                SubjectLabel::Nobody => i % 20 == 3,
                _ => i % 7 == 1,
            };
            SnapshotImage {
                id: format!("img_{i}"),
                feature: None,
                subject: Some(subject),
                judgments: vec![SnapshotJudgment {
                    annotator: "a1".into(),
                    verdict: if yes { Verdict::Yes } else { Verdict::No },
                    comment: yes.then(|| Comment {
                        text: "x".into(),
                        trigger: "Other".into(),
                    }),
                }],
            }
        })
        .collect();
    let snapshot = CampaignSnapshot::with_default_categories(images);
    let commented = snapshot.images.iter().filter(|i| i.has_comment()).count();
    let sample = sample_uncommented(&snapshot, commented, 42)
        .into_iter()
        .collect();
    let table = subject_verdict_distribution(&snapshot, &sample)?;
    for (label, row) in table.row_labels.iter().zip(&table.counts) {
        println!("{label:<8} yes {:>3}  no {:>3}", row[0], row[1]);
    }
    let r = chi_square_test(&table)?;
    println!(
        "chi2 = {:.3}, dof = {}, p = {:.3e}, n = {}",
        r.statistic, r.dof, r.p_value, r.n
    );
    Ok(())
}

fn main() -> annocamp::Result<()> {
    run_example()
}
