//! Feature files: CSV with header `image_id,f0,...,f{d-1}`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::store::FeatureRow;

pub fn read_feature_csv<R: Read>(reader: R) -> Result<Vec<FeatureRow>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    if header.get(0) != Some("image_id") {
        return Err(Error::Malformed(
            "feature file header must start with image_id".into(),
        ));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{i}") {
            return Err(Error::Malformed(format!(
                "feature column {} is named {name:?}, expected \"f{i}\"",
                i + 1
            )));
        }
    }
    let dim = header.len() - 1;
    if dim == 0 {
        return Err(Error::Malformed(
            "feature file declares no feature columns".into(),
        ));
    }
    let mut rows = Vec::new();
    for (n, record) in csv.records().enumerate() {
        let row = n + 1;
        let record = record?;
        let found = record.len().saturating_sub(1);
        if found != dim {
            return Err(Error::DimensionMismatch {
                row,
                expected: dim,
                found,
            });
        }
        let values = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f32>().map_err(|_| {
                    Error::Malformed(format!("feature row {row}: {v:?} is not a number"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow {
            row,
            image: record[0].to_owned(),
            values,
        });
    }
    Ok(rows)
}

pub fn write_feature_csv<'a, W, I>(writer: W, dim: usize, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a [f32])>,
{
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["image_id".to_owned()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    csv.write_record(&header)?;
    for (id, values) in rows {
        let mut rec = vec![id.to_owned()];
        rec.extend(values.iter().map(f32::to_string));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}
