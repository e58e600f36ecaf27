//! A whole campaign in one process: configure, register images, hand out
//! credentials, annotate through the service and print a report.
//!
//! ```bash
//! cargo run --example quickstart
//! ```

use std::sync::Arc;

use annocamp::analytics::{Format, ReportName, ReportOptions};
use annocamp::config::CampaignConfig;
use annocamp::i18n::MessageCatalogs;
use annocamp::model::{CampaignStatus, CommentDraft, Verdict};
use annocamp::service::{Service, SubmitRequest, Task};
use annocamp::store::Installation;

pub fn run_example() -> annocamp::Result<()> {
    let service = Service::new(Arc::new(Installation::new()), MessageCatalogs::shipped())?;

    let mut config = CampaignConfig::new("class 3B", 2);
    config.languages = Some(vec!["en".into(), "it".into()]);
    let campaign = service.create_campaign(&config)?;
    let sources: Vec<String> = (1..=6).map(|i| format!("pictures/{i:03}.jpg")).collect();
    service.add_images(campaign.id, &sources)?;
    let credentials = service.generate_annotators(campaign.id, 3, None)?;
    service.set_status(campaign.id, CampaignStatus::Active)?;
    println!(
        "{} with {} images, quota {}",
        campaign.id,
        sources.len(),
        campaign.quota
    );

    for (n, cred) in credentials.iter().enumerate() {
        let token = service.login(&cred.username, &cred.password)?.token;
        let mut task = service.next_task(&token)?;
        let mut judged = 0;
        while let Task::Image { image_id, .. } = task {
            // the second annotator finds every third picture mockable
            let request = if n == 1 && image_id.0 % 3 == 0 {
                SubmitRequest {
                    image_id,
                    verdict: Verdict::Yes,
                    comment: Some(CommentDraft::new("that pose", "Pose")),
                }
            } else {
                SubmitRequest {
                    image_id,
                    verdict: Verdict::No,
                    comment: None,
                }
            };
            task = service.submit_judgment(&token, request)?.next;
            judged += 1;
        }
        println!("{} judged {judged} images", cred.annotator);
    }

    let depth = service.report(
        campaign.id,
        ReportName::JudgmentDepth,
        &ReportOptions::default(),
    )?;
    print!("{}", depth.render(Format::Csv));
    let summary = service.summary(campaign.id)?;
    assert_eq!(summary.judgments, 18);
    assert_eq!(summary.comments, 2);
    Ok(())
}

fn main() -> annocamp::Result<()> {
    run_example()
}
