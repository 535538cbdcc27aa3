//! Pearson chi-square test of independence on contingency tables.

use serde::{Deserialize, Serialize};

use super::special::chi_square_sf;
use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Row-major counts.
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, StatsError> {
        if row_labels.len() < 2 || col_labels.len() < 2 {
            return Err(StatsError::TableTooSmall(row_labels.len(), col_labels.len()));
        }
        if counts.len() != row_labels.len() || counts.iter().any(|r| r.len() != col_labels.len()) {
            return Err(StatsError::RaggedTable);
        }
        Ok(ContingencyTable { row_labels, col_labels, counts })
    }

    /// Unlabeled table; rows and columns are numbered.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, StatsError> {
        let rows = (0..counts.len()).map(|i| format!("r{i}")).collect();
        let cols = (0..counts.first().map_or(0, Vec::len)).map(|j| format!("c{j}")).collect();
        Self::new(rows, cols, counts)
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.col_labels.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// `(observed - expected) / sqrt(expected)` per cell, row-major.
    pub residuals: Vec<Vec<f64>>,
}

pub fn chi_square(table: &ContingencyTable) -> Result<ChiSquareResult, StatsError> {
    let rows = table.row_totals();
    let cols = table.col_totals();
    if rows.contains(&0) || cols.contains(&0) {
        return Err(StatsError::ZeroMarginal);
    }
    let total: u64 = rows.iter().sum();
    let total = total as f64;
    let mut statistic = 0.0;
    let mut residuals = Vec::with_capacity(rows.len());
    for (i, row) in table.counts.iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (j, &o) in row.iter().enumerate() {
            let expected = rows[i] as f64 * cols[j] as f64 / total;
            let diff = o as f64 - expected;
            statistic += diff * diff / expected;
            out.push(diff / expected.sqrt());
        }
        residuals.push(out);
    }
    let dof = (rows.len() - 1) * (cols.len() - 1);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof as f64),
        residuals,
    })
}
