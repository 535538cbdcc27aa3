//! Least-squares regression of an outcome on indicator columns.

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Relative residual norm under which a column counts as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub intercept: f64,
    /// `(column name, coefficient)` for every retained column.
    pub coefficients: Vec<(String, f64)>,
    /// Columns removed because they were collinear with earlier ones.
    pub dropped: Vec<String>,
    pub residuals: Vec<f64>,
    pub residual_sum_squares: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficients.iter().find(|(n, _)| n == name).map(|(_, b)| *b)
    }
}

/// Fits `y = intercept + X beta` by QR (modified Gram-Schmidt with one
/// re-orthogonalization pass) on the design with a leading ones column.
/// Columns that are linear combinations of the intercept and earlier columns
/// are dropped and listed in the result.
pub fn ols_regress(names: &[String], rows: &[Vec<f64>], outcome: &[f64]) -> Result<RegressionResult, StatsError> {
    let n = rows.len();
    if outcome.len() != n {
        return Err(StatsError::LengthMismatch(n, outcome.len()));
    }
    if rows.iter().any(|r| r.len() != names.len()) {
        return Err(StatsError::RaggedTable);
    }
    if rows.iter().flatten().chain(outcome).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let mut candidates: Vec<(Option<usize>, Vec<f64>)> = vec![(None, vec![1.0; n])];
    candidates.extend((0..names.len()).map(|j| (Some(j), rows.iter().map(|r| r[j]).collect())));

    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<Option<usize>> = Vec::new();
    let mut dropped = Vec::new();
    for (idx, col) in candidates {
        let norm0 = dot(&col, &col).sqrt();
        let mut v = col;
        let mut coeffs = vec![0.0; q.len()];
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let proj = dot(qk, &v);
                coeffs[k] += proj;
                axpy(-proj, qk, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm0 == 0.0 || norm <= COLLINEAR_TOL * norm0.max(1.0) {
            match idx {
                Some(j) => dropped.push(names[j].clone()),
                None => return Err(StatsError::TooFewObservations { needed: 1, got: 0 }),
            }
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        coeffs.push(norm);
        q.push(v);
        r_cols.push(coeffs);
        kept.push(idx);
    }
    let k = q.len();
    if n <= k {
        return Err(StatsError::TooFewObservations { needed: k + 1, got: n });
    }

    // Solve R beta = Q^T y; r_cols[j][i] holds R[i][j].
    let qty: Vec<f64> = q.iter().map(|qk| dot(qk, outcome)).collect();
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = qty[i];
        for j in i + 1..k {
            s -= r_cols[j][i] * beta[j];
        }
        beta[i] = s / r_cols[i][i];
    }

    let intercept = beta[0];
    let mut fitted = vec![intercept; n];
    let mut coefficients = Vec::with_capacity(k - 1);
    for (b, idx) in beta.iter().zip(&kept).skip(1) {
        let j = idx.expect("only the intercept has no index");
        for (f, row) in fitted.iter_mut().zip(rows) {
            *f += b * row[j];
        }
        coefficients.push((names[j].clone(), *b));
    }
    let residuals: Vec<f64> = outcome.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let rss = dot(&residuals, &residuals);
    let mean = outcome.iter().sum::<f64>() / n as f64;
    let tss: f64 = outcome.iter().map(|y| (y - mean) * (y - mean)).sum();
    Ok(RegressionResult {
        intercept,
        coefficients,
        dropped,
        residuals,
        residual_sum_squares: rss,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
        n,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_linear_fit() {
        let rows: Vec<Vec<f64>> = (1..=6).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (1..=6).map(|i| 2.0 * i as f64).collect();
        let r = ols_regress(&names(&["x"]), &rows, &y).unwrap();
        assert!((r.coefficient("x").unwrap() - 2.0).abs() < 1e-12);
        assert!(r.intercept.abs() < 1e-12);
        assert!(r.residual_sum_squares < 1e-20);
    }

    #[test]
    fn exhaustive_indicators_recover_group_difference() {
        // group a mean 0.3, group b mean 0.7; a and b together cover every row
        let rows = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let y = vec![0.2, 0.4, 0.6, 0.8];
        let r = ols_regress(&names(&["a", "b"]), &rows, &y).unwrap();
        assert_eq!(r.dropped, vec!["b".to_string()]);
        assert!((r.intercept - 0.7).abs() < 1e-12);
        assert!((r.coefficient("a").unwrap() - (0.3 - 0.7)).abs() < 1e-12);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let rows = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ];
        let y = vec![0.1, 0.5, 0.9, 0.2, 0.15, 0.4];
        let r = ols_regress(&names(&["a", "b"]), &rows, &y).unwrap();
        for j in 0..2 {
            let d: f64 = rows.iter().zip(&r.residuals).map(|(row, e)| row[j] * e).sum();
            assert!(d.abs() < 1e-9);
        }
        assert!(r.residuals.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn zero_and_duplicate_columns_dropped() {
        let rows = vec![vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 0.0]];
        let r = ols_regress(&names(&["z", "a", "a2"]), &rows, &[1.0, 2.0, 1.5, 2.5]).unwrap();
        assert_eq!(r.dropped, names(&["z", "a2"]));
        assert_eq!(r.coefficients.len(), 1);
    }

    #[test]
    fn too_few_rows() {
        let rows = vec![vec![1.0], vec![0.0]];
        assert!(matches!(
            ols_regress(&names(&["a"]), &rows, &[1.0, 2.0]),
            Err(StatsError::TooFewObservations { .. })
        ));
    }
}
