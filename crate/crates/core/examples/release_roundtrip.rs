//! Export a campaign as an anonymized release and read it back.
//!
//! The release carries feature vectors, subject labels and judgments with
//! per-export pseudonyms. Image sources and usernames never leave the
//! store, so the pictures themselves need not be shared.
//!
//! ```bash
//! cargo run --example release_roundtrip
//! ```

use annocamp::analytics::judgment_depth_table;
use annocamp::config::CampaignConfig;
use annocamp::dataset::{
    export_feature_matrix, export_release, import_release, read_feature_csv, sidecar,
};
use annocamp::model::{CampaignStatus, CommentDraft, ImageId, SubjectLabel, Verdict};
use annocamp::store::Installation;

pub fn run_example() -> annocamp::Result<()> {
    let store = Installation::new();
    let id = store
        .create_campaign(&CampaignConfig::new("release", 2))?
        .id;
    let creds = store.generate_annotators(id, 2, None)?;
    let shared = store.campaign(id)?;
    let mut state = shared.lock();
    state.ingest_images(["https://cdn.example/p/1.jpg", "https://cdn.example/p/2.jpg"])?;
    let csv = "image_id,f0,f1,f2\nimg_0,0.125,-1.5,3.0e-7\nimg_1,1,2,0.1\n";
    state.attach_features(read_feature_csv(csv.as_bytes())?)?;
    state.set_subject_label(ImageId(0), SubjectLabel::Mixed)?;
    state.set_status(CampaignStatus::Active)?;
    let (a, b) = (creds[0].annotator, creds[1].annotator);
    state.submit(
        a,
        ImageId(0),
        Verdict::Yes,
        Some(CommentDraft::new("Inquietante", "Other")),
    )?;
    state.submit(b, ImageId(0), Verdict::No, None)?;
    state.submit(b, ImageId(1), Verdict::No, None)?;

    let mut release = Vec::new();
    export_release(&state, &mut release, 11)?;
    let text = String::from_utf8(release.clone()).expect("utf-8");
    print!("{text}");
    assert!(!text.contains("cdn.example"));
    assert!(creds.iter().all(|c| !text.contains(&c.username)));

    let imported = import_release(release.as_slice(), None)?;
    assert_eq!(imported.images.len(), 2);
    assert_eq!(
        imported.images[0].feature.as_deref(),
        Some(&[0.125, -1.5, 3.0e-7][..])
    );
    assert_eq!(
        judgment_depth_table(&imported),
        judgment_depth_table(&state.snapshot())
    );

    let mut matrix = Vec::new();
    export_feature_matrix(&state, &mut matrix)?;
    let (dim, rows) = sidecar::read_matrix(matrix.as_slice())?;
    println!("feature matrix: {} rows x {dim}", rows.len());
    Ok(())
}

fn main() -> annocamp::Result<()> {
    run_example()
}
