//! Spearman and Pearson correlation with significance.

use serde::{Deserialize, Serialize};

use super::special::student_t_two_sided;
use super::StatsError;

/// Largest sample for which exact permutation p-values are enumerated.
pub const MAX_EXACT_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// `t = rho * sqrt((n-2)/(1-rho^2))` with `n-2` degrees of freedom.
    #[default]
    TApproximation,
    /// Enumerates every permutation of the second series (`n <= MAX_EXACT_N`).
    ExactPermutation,
}

/// Ranks starting at 1, tied values sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn check_lengths(x: &[f64], y: &[f64], min: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min {
        return Err(StatsError::TooFewObservations { needed: min, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Product-moment correlation computed in two passes (means first).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_lengths(x, y, 2)?;
    pearson_unchecked(x, y)
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantSeries);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson coefficient together with its t-test p-value.
pub fn pearson_test(x: &[f64], y: &[f64]) -> Result<RankCorrelation, StatsError> {
    check_lengths(x, y, 3)?;
    let r = pearson_unchecked(x, y)?;
    Ok(RankCorrelation {
        rho: r,
        p_value: t_approximation_p(r, x.len()),
        n: x.len(),
    })
}

pub fn t_approximation_p(rho: f64, n: usize) -> f64 {
    let dof = n as f64 - 2.0;
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let t = rho * (dof / (1.0 - rho * rho)).sqrt();
    student_t_two_sided(t, dof).clamp(0.0, 1.0)
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<RankCorrelation, StatsError> {
    spearman_with(x, y, PValueMethod::TApproximation)
}

pub fn spearman_with(x: &[f64], y: &[f64], method: PValueMethod) -> Result<RankCorrelation, StatsError> {
    check_lengths(x, y, 3)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let rho = pearson_unchecked(&rx, &ry)?;
    let p_value = match method {
        PValueMethod::TApproximation => t_approximation_p(rho, x.len()),
        PValueMethod::ExactPermutation => exact_permutation_p(&rx, &ry, rho)?,
    };
    Ok(RankCorrelation { rho, p_value, n: x.len() })
}

/// Two-sided permutation p-value: share of orderings of `ry` whose rank
/// correlation with `rx` is at least as extreme as `rho`.
fn exact_permutation_p(rx: &[f64], ry: &[f64], rho: f64) -> Result<f64, StatsError> {
    let n = rx.len();
    if n > MAX_EXACT_N {
        return Err(StatsError::TooLargeForExact(n));
    }
    let threshold = rho.abs() - 1e-12;
    let mut perm = ry.to_vec();
    let mut extreme = 0usize;
    let mut total = 0usize;
    let mut visit = |p: &[f64]| {
        total += 1;
        if let Ok(r) = pearson_unchecked(rx, p) {
            if r.abs() >= threshold {
                extreme += 1;
            }
        }
    };
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(extreme as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_orderings() {
        let r = spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(r.rho, 1.0);
        assert_eq!(r.p_value, 0.0);
        let r = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.rho, -1.0);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn errors() {
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err(), StatsError::LengthMismatch(2, 3));
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err(), StatsError::ConstantSeries);
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFewObservations { .. })));
        assert_eq!(pearson(&[1.0, 2.0], &[3.0, 3.0]).unwrap_err(), StatsError::ConstantSeries);
        let big: Vec<f64> = (0..11).map(f64::from).collect();
        assert_eq!(
            spearman_with(&big, &big, PValueMethod::ExactPermutation).unwrap_err(),
            StatsError::TooLargeForExact(11)
        );
    }

    #[test]
    fn pearson_linear() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let z: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &z).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_p_for_perfect_n4() {
        let r = spearman_with(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0], PValueMethod::ExactPermutation).unwrap();
        assert!((r.p_value - 2.0 / 24.0).abs() < 1e-15);
    }
}
