//! Least-judged-first assignment with a soft quota.
//!
//! Every request gets a uniformly chosen image among the annotator's unseen
//! images with the fewest judgments. Once every unseen image has reached
//! the quota the engine keeps offering images anyway (flagged as fallback)
//! until the annotator has seen everything.
//!
//! ```bash
//! cargo run --example assignment_policy
//! ```

use annocamp::assign::Offer;
use annocamp::config::CampaignConfig;
use annocamp::model::{AnnotatorId, CampaignStatus, Verdict};
use annocamp::store::{CampaignState, Installation};

pub fn run_example() -> annocamp::Result<()> {
    let store = Installation::new();
    let mut config = CampaignConfig::new("policy", 2);
    config.seed = Some(7);
    let id = store.create_campaign(&config)?.id;
    let creds = store.generate_annotators(id, 4, None)?;
    let shared = store.campaign(id)?;
    let mut state = shared.lock();
    state.ingest_images(["a.jpg", "b.jpg", "c.jpg"])?;
    state.set_status(CampaignStatus::Active)?;

    let annotators: Vec<AnnotatorId> = creds.iter().map(|c| c.annotator).collect();
    let mut fallbacks = 0;
    loop {
        let mut progressed = false;
        for &a in &annotators {
            let Offer::Image {
                image,
                count,
                fallback,
            } = state.next_image(a)?
            else {
                continue;
            };
            // offers are stable until judged
            assert_eq!(state.next_image(a)?.image(), Some(image));
            println!(
                "{a} <- {image} (judged {count} times{})",
                if fallback { ", over quota" } else { "" }
            );
            fallbacks += usize::from(fallback);
            state.submit(a, image, Verdict::No, None)?;
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
    print_counts(&state);
    // 4 annotators x 3 images, quota 2: 6 judgments fill the quota, the
    // other 6 are fallback offers
    assert_eq!(fallbacks, 6);
    assert!(state.assignment().counts().iter().all(|&c| c == 4));
    Ok(())
}

fn print_counts(state: &CampaignState) {
    for img in state.images() {
        println!(
            "{} {:<6} {}",
            img.id,
            img.source.as_str(),
            state.assignment().count(img.id).unwrap_or(0)
        );
    }
}

fn main() -> annocamp::Result<()> {
    run_example()
}
