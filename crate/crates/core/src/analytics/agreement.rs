//! Nominal Krippendorff's alpha over comment trigger categories.
//!
//! A unit is one image with the trigger categories of all its comments.
//! Raters are not aligned across units; the coincidence matrix handles
//! unequal and missing raters directly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::snapshot::CampaignSnapshot;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Unit {
    pub image: String,
    /// Indices into [`AgreementUnits::categories`].
    pub values: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgreementUnits {
    pub categories: Vec<String>,
    pub units: Vec<Unit>,
}

impl AgreementUnits {
    /// Builds units from category labels; unknown labels are an error.
    pub fn from_labels<S: AsRef<str>>(
        categories: &[S],
        units: &[(&str, Vec<&str>)],
    ) -> Result<Self> {
        let categories: Vec<String> = categories.iter().map(|c| c.as_ref().to_owned()).collect();
        let units = units
            .iter()
            .map(|(image, labels)| {
                let values = labels
                    .iter()
                    .map(|l| {
                        categories
                            .iter()
                            .position(|c| c == l)
                            .ok_or_else(|| Error::UnknownCategory(l.to_string()))
                    })
                    .collect::<Result<_>>()?;
                Ok(Unit {
                    image: image.to_string(),
                    values,
                })
            })
            .collect::<Result<_>>()?;
        Ok(AgreementUnits { categories, units })
    }

    pub fn pairable(&self) -> impl Iterator<Item = &Unit> {
        self.units.iter().filter(|u| u.values.len() >= 2)
    }

    pub fn pairable_count(&self) -> usize {
        self.pairable().count()
    }
}

/// One unit per commented image. Values equal to `exclude` are dropped
/// before pairability is decided, so `[Other, Pose]` becomes a
/// single-value unit when `Other` is excluded.
pub fn build_units(snapshot: &CampaignSnapshot, exclude: Option<&str>) -> Result<AgreementUnits> {
    let excluded = match exclude {
        Some(label) => Some(
            snapshot
                .categories
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| Error::UnknownCategory(label.to_owned()))?,
        ),
        None => None,
    };
    let mut units = Vec::new();
    for image in &snapshot.images {
        if !image.has_comment() {
            continue;
        }
        let mut values = Vec::new();
        for comment in image.comments() {
            let idx = snapshot
                .categories
                .iter()
                .position(|c| *c == comment.trigger)
                .ok_or_else(|| Error::UnknownCategory(comment.trigger.clone()))?;
            if Some(idx) != excluded {
                values.push(idx);
            }
        }
        units.push(Unit {
            image: image.id.clone(),
            values,
        });
    }
    Ok(AgreementUnits {
        categories: snapshot.categories.clone(),
        units,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoincidenceMatrix {
    pub categories: Vec<String>,
    /// Symmetric; `o[c][k]` sums the weighted within-unit value pairs.
    pub o: Vec<Vec<f64>>,
    /// Number of pairable values per category.
    pub marginals: Vec<u64>,
    /// Total number of pairable values.
    pub n: u64,
}

impl CoincidenceMatrix {
    /// Each unit with m ≥ 2 values adds 1/(m−1) per ordered pair of
    /// distinct value slots.
    pub fn from_units(units: &AgreementUnits) -> Result<Self> {
        let k = units.categories.len();
        let mut o = vec![vec![0.0; k]; k];
        let mut marginals = vec![0u64; k];
        let mut any = false;
        let mut tally = vec![0u64; k];
        for unit in units.pairable() {
            any = true;
            tally.iter_mut().for_each(|t| *t = 0);
            for &v in &unit.values {
                tally[v] += 1;
            }
            let weight = 1.0 / (unit.values.len() - 1) as f64;
            for c in 0..k {
                if tally[c] == 0 {
                    continue;
                }
                marginals[c] += tally[c];
                for j in 0..k {
                    let pairs = if c == j {
                        tally[c] * (tally[c] - 1)
                    } else {
                        tally[c] * tally[j]
                    };
                    if pairs > 0 {
                        o[c][j] += pairs as f64 * weight;
                    }
                }
            }
        }
        if !any {
            return Err(Error::NoPairableUnits);
        }
        let n = marginals.iter().sum();
        Ok(CoincidenceMatrix {
            categories: units.categories.clone(),
            o,
            marginals,
            n,
        })
    }

    fn off_diagonal_sum(&self) -> f64 {
        let mut s = 0.0;
        for (c, row) in self.o.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if c != j {
                    s += v;
                }
            }
        }
        s
    }

    /// Σ_{c≠k} n_c·n_k, exact in integers.
    fn expected_pairs(&self) -> u128 {
        let n = u128::from(self.n);
        let sq: u128 = self
            .marginals
            .iter()
            .map(|&m| u128::from(m) * u128::from(m))
            .sum();
        n * n - sq
    }

    pub fn observed_disagreement(&self) -> f64 {
        self.off_diagonal_sum() / self.n as f64
    }

    pub fn expected_disagreement(&self) -> f64 {
        self.expected_pairs() as f64 / (self.n as f64 * (self.n as f64 - 1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub observed_disagreement: f64,
    pub expected_disagreement: f64,
    pub pairable_values: u64,
    pub pairable_units: usize,
}

pub fn krippendorff_alpha(units: &AgreementUnits) -> Result<f64> {
    alpha_details(units).map(|r| r.alpha)
}

pub fn alpha_details(units: &AgreementUnits) -> Result<AlphaResult> {
    let m = CoincidenceMatrix::from_units(units)?;
    let expected_pairs = m.expected_pairs();
    if expected_pairs == 0 {
        return Err(Error::DegenerateMarginals);
    }
    let off = m.off_diagonal_sum();
    // 1 − D_o/D_e with the n factors cancelled
    let alpha = if off == 0.0 {
        1.0
    } else {
        1.0 - (m.n as f64 - 1.0) * off / expected_pairs as f64
    };
    Ok(AlphaResult {
        alpha,
        observed_disagreement: m.observed_disagreement(),
        expected_disagreement: m.expected_disagreement(),
        pairable_values: m.n,
        pairable_units: units.pairable_count(),
    })
}
