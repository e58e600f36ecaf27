use std::io::BufRead;

use crate::error::Result;
use crate::store::{CampaignState, IngestReport};

/// Yields manifest entries: one source per line, blank lines and `#`
/// comments skipped, surrounding whitespace trimmed.
pub fn manifest_entries<R: BufRead>(reader: R) -> impl Iterator<Item = std::io::Result<String>> {
    reader.lines().filter_map(|line| match line {
        Ok(l) => {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| Ok(t.to_owned()))
        }
        Err(e) => Some(Err(e)),
    })
}

/// Streams a manifest into a draft campaign.
pub fn ingest_manifest<R: BufRead>(state: &mut CampaignState, reader: R) -> Result<IngestReport> {
    let mut failure = None;
    let entries = manifest_entries(reader).map_while(|e| match e {
        Ok(s) => Some(s),
        Err(e) => {
            failure = Some(e);
            None
        }
    });
    let report = state.ingest_images(entries);
    if let Some(e) = failure {
        return Err(e.into());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks_are_skipped() {
        let text = "# pool A\nhttps://x/1.jpg\n\n  photos/2.jpg  \n#https://x/3.jpg\n";
        let entries: Vec<String> = manifest_entries(text.as_bytes())
            .map(|e| e.unwrap())
            .collect();
        assert_eq!(entries, ["https://x/1.jpg", "photos/2.jpg"]);
    }
}
