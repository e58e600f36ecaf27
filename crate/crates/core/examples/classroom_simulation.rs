//! Synthetic annotators working through a campaign, with the invariant
//! checks the simulator runs along the way.
//!
//! ```bash
//! cargo run --release --example classroom_simulation
//! ```

use std::sync::Arc;

use annocamp::config::CampaignConfig;
use annocamp::i18n::MessageCatalogs;
use annocamp::model::CampaignStatus;
use annocamp::service::Service;
use annocamp::sim::{simulate, SimConfig};
use annocamp::store::Installation;

pub fn run_example() -> annocamp::Result<()> {
    let service = Service::new(Arc::new(Installation::new()), MessageCatalogs::shipped())?;
    let id = service
        .create_campaign(&CampaignConfig::new("classroom", 4))?
        .id;
    let sources: Vec<String> = (0..2_000).map(|i| format!("pool/{i:05}.jpg")).collect();
    service.add_images(id, &sources)?;
    service.set_status(id, CampaignStatus::Active)?;

    // a class of 24 spends 3,000 judgments on the pool
    let config = SimConfig {
        seed: 2024,
        yes_rate: 0.06,
        annotators: 24,
        steps: Some(3_000),
        parallelism: 1,
    };
    let summary = simulate(&service, id, &config)?;
    println!("{summary}");
    assert_eq!(summary.checks.violations(), 0);
    assert!(summary.checks.balanced());

    // a second class, in parallel, finishes the pool
    let config = SimConfig {
        seed: 2025,
        annotators: 8,
        steps: Some(5_000),
        parallelism: 4,
        ..config
    };
    let summary = simulate(&service, id, &config)?;
    println!("\n{summary}");
    assert_eq!(summary.checks.violations(), 0);
    Ok(())
}

fn main() -> annocamp::Result<()> {
    run_example()
}
