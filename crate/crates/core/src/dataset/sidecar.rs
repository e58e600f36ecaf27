//! Binary feature matrix: a 16-byte header (magic `ACFV`, u32 dimension,
//! u64 row count, all little-endian) followed by row-major f32 values.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ACFV";

pub fn write_matrix<W: Write>(mut out: W, dim: usize, rows: &[&[f32]]) -> Result<()> {
    let dim32 = u32::try_from(dim).map_err(|_| Error::Malformed("dimension too large".into()))?;
    out.write_all(&MAGIC)?;
    out.write_all(&dim32.to_le_bytes())?;
    out.write_all(&(rows.len() as u64).to_le_bytes())?;
    for (n, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                row: n + 1,
                expected: dim,
                found: row.len(),
            });
        }
        for v in *row {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut input: R) -> Result<(usize, Vec<Vec<f32>>)> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if header[..4] != MAGIC {
        return Err(Error::Malformed("not a feature matrix".into()));
    }
    let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let mut rows = Vec::with_capacity(count.min(1 << 20));
    let mut buf = vec![0u8; dim * 4];
    for _ in 0..count {
        input.read_exact(&mut buf)?;
        rows.push(
            buf.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        );
    }
    Ok((dim, rows))
}
