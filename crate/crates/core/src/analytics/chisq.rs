use serde::Serialize;

use super::gamma::gamma_q;
use crate::error::{Error, Result};

/// Observed counts for an association test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn zeros(row_labels: Vec<String>, col_labels: Vec<String>) -> Self {
        let counts = vec![vec![0; col_labels.len()]; row_labels.len()];
        ContingencyTable {
            row_labels,
            col_labels,
            counts,
        }
    }

    pub fn from_rows(
        row_labels: &[&str],
        col_labels: &[&str],
        counts: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if counts.len() != row_labels.len() || counts.iter().any(|r| r.len() != col_labels.len()) {
            return Err(Error::Malformed(
                "table shape does not match its labels".into(),
            ));
        }
        Ok(ContingencyTable {
            row_labels: row_labels.iter().map(|s| s.to_string()).collect(),
            col_labels: col_labels.iter().map(|s| s.to_string()).collect(),
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.col_labels.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// Each column normalized to percentages; empty columns stay at zero.
    pub fn column_percentages(&self) -> Vec<Vec<f64>> {
        let cols = self.col_sums();
        self.counts
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&cols)
                    .map(|(&c, &s)| {
                        if s == 0 {
                            0.0
                        } else {
                            100.0 * c as f64 / s as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn get(&self, row: &str, col: &str) -> Option<u64> {
        let i = self.row_labels.iter().position(|r| r == row)?;
        let j = self.col_labels.iter().position(|c| c == col)?;
        Some(self.counts[i][j])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    pub n: u64,
}

/// Pearson's statistic Σ (observed − expected)² / expected.
pub fn chi_square_statistic(table: &ContingencyTable) -> Result<f64> {
    let rows = table.row_sums();
    let cols = table.col_sums();
    for (label, &s) in table.row_labels.iter().zip(&rows) {
        if s == 0 {
            return Err(Error::ZeroMarginal {
                axis: "row",
                label: label.clone(),
            });
        }
    }
    for (label, &s) in table.col_labels.iter().zip(&cols) {
        if s == 0 {
            return Err(Error::ZeroMarginal {
                axis: "column",
                label: label.clone(),
            });
        }
    }
    let n = table.total() as f64;
    let mut stat = 0.0;
    for (row, &rs) in table.counts.iter().zip(&rows) {
        for (&obs, &cs) in row.iter().zip(&cols) {
            let expected = rs as f64 * cs as f64 / n;
            let diff = obs as f64 - expected;
            stat += diff * diff / expected;
        }
    }
    Ok(stat)
}

/// Upper-tail probability of the χ² distribution: Q(dof/2, statistic/2).
pub fn chi_square_p_value(statistic: f64, dof: u32) -> f64 {
    gamma_q(f64::from(dof) / 2.0, statistic / 2.0)
}

pub fn chi_square_test(table: &ContingencyTable) -> Result<ChiSquareResult> {
    let statistic = chi_square_statistic(table)?;
    let r = table.row_labels.len() as u32;
    let c = table.col_labels.len() as u32;
    if r < 2 || c < 2 {
        return Err(Error::Malformed(
            "a chi-square test needs at least two rows and two columns".into(),
        ));
    }
    let dof = (r - 1) * (c - 1);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_p_value(statistic, dof),
        n: table.total(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(counts: Vec<Vec<u64>>) -> ContingencyTable {
        let rows: Vec<String> = (0..counts.len()).map(|i| format!("r{i}")).collect();
        let cols: Vec<String> = (0..counts[0].len()).map(|j| format!("c{j}")).collect();
        ContingencyTable {
            row_labels: rows,
            col_labels: cols,
            counts,
        }
    }

    #[test]
    fn proportional_rows_give_zero() {
        assert_eq!(
            chi_square_statistic(&t(vec![vec![10, 20], vec![20, 40]])).unwrap(),
            0.0
        );
    }

    #[test]
    fn diagonal_table() {
        // every expected cell is 5; four cells each contribute 25/5
        assert_eq!(
            chi_square_statistic(&t(vec![vec![10, 0], vec![0, 10]])).unwrap(),
            20.0
        );
    }

    #[test]
    fn zero_marginal_is_an_error() {
        let err = chi_square_statistic(&t(vec![vec![0, 0], vec![3, 4]])).unwrap_err();
        assert!(matches!(err, Error::ZeroMarginal { axis: "row", .. }));
        let err = chi_square_statistic(&t(vec![vec![0, 1], vec![0, 4]])).unwrap_err();
        assert!(matches!(err, Error::ZeroMarginal { axis: "column", .. }));
    }

    #[test]
    fn p_value_at_zero_is_one() {
        for k in 1..=10 {
            assert_eq!(chi_square_p_value(0.0, k), 1.0);
        }
    }

    #[test]
    fn dof_follows_shape() {
        let r = chi_square_test(&t(vec![vec![5, 9], vec![7, 3], vec![2, 8], vec![6, 6]])).unwrap();
        assert_eq!(r.dof, 3);
        assert_eq!(r.n, 46);
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
    }

    #[test]
    fn percentages() {
        let p = t(vec![vec![1, 0], vec![3, 0]]).column_percentages();
        assert_eq!(p, vec![vec![25.0, 0.0], vec![75.0, 0.0]]);
    }
}
