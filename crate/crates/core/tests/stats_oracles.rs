//! Statistics checked against independent oracles: brute-force ranking,
//! statrs distributions, nalgebra least squares and values frozen from a
//! reference scientific stack.

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use persona_bargain::stats::{
    average_ranks, chi_square, ols_regress, pearson, pearson_test, special, spearman, spearman_with,
    t_approximation_p, ContingencyTable, PValueMethod,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Rank of each value as 1 + (#smaller) + (#equal - 1)/2, by direct counting.
fn brute_force_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let smaller = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Textbook single-formula Pearson: (nΣxy - ΣxΣy) / sqrt((nΣx² - (Σx)²)(nΣy² - (Σy)²)).
fn raw_sum_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

fn random_series(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if ties {
                f64::from(rng.random_range(0..4u8))
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect()
}

#[test]
fn ranks_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..200 {
        let v = random_series(&mut rng, 3 + i % 15, i % 2 == 0);
        assert_eq!(average_ranks(&v), brute_force_ranks(&v));
    }
}

#[test]
fn spearman_matches_rank_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(3..30);
        let ties = checked % 2 == 0;
        let x = random_series(&mut rng, n, ties);
        let y = random_series(&mut rng, n, ties);
        let (rx, ry) = (brute_force_ranks(&x), brute_force_ranks(&y));
        let Ok(r) = spearman(&x, &y) else { continue };
        let oracle = raw_sum_pearson(&rx, &ry);
        assert_abs_diff_eq!(r.rho, oracle, epsilon = 1e-9);
        checked += 1;
    }
}

#[test]
fn spearman_tied_example() {
    let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    let oracle = raw_sum_pearson(&[1.0, 2.5, 2.5, 4.0], &[1.0, 3.0, 2.0, 4.0]);
    assert_abs_diff_eq!(r.rho, oracle, epsilon = 1e-12);
    // 0.9 / sqrt(0.9) reduces to 3/sqrt(10)
    assert_abs_diff_eq!(r.rho, 3.0 / 10f64.sqrt(), epsilon = 1e-12);
    assert_abs_diff_eq!(r.p_value, 0.051_316_701_949_486_12, epsilon = 1e-9);
}

#[test]
fn frozen_reference_values() {
    let x = [3.1, 1.2, 5.5, 2.2, 4.8, 0.3, 2.2, 6.0, 1.9, 3.3];
    let y = [2.0, 1.0, 4.0, 3.5, 5.0, 0.5, 2.5, 4.5, 1.5, 2.0];
    let s = spearman(&x, &y).unwrap();
    assert_abs_diff_eq!(s.rho, 0.859_756_097_560_975_7, epsilon = 1e-12);
    assert_abs_diff_eq!(s.p_value, 0.001_423_927_416_987_747, epsilon = 1e-10);
    let p = pearson_test(&x, &y).unwrap();
    assert_abs_diff_eq!(p.rho, 0.868_269_610_875_454_7, epsilon = 1e-12);
    assert_abs_diff_eq!(p.p_value, 0.001_120_376_396_526_622_5, epsilon = 1e-10);

    let t = ContingencyTable::from_counts(vec![vec![12, 5], vec![7, 14], vec![9, 9]]).unwrap();
    let c = chi_square(&t).unwrap();
    assert_abs_diff_eq!(c.statistic, 5.215_686_274_509_804, epsilon = 1e-12);
    assert_abs_diff_eq!(c.p_value, 0.073_693_318_847_457_04, epsilon = 1e-10);
    assert_eq!(c.dof, 2);

    assert_abs_diff_eq!(special::chi_square_sf(7.5, 3.0), 0.057_558_451_972_636_4, epsilon = 1e-12);
    assert_abs_diff_eq!(special::student_t_two_sided(2.1, 7.0), 0.073_871_196_212_922_6, epsilon = 1e-12);
    assert_abs_diff_eq!(special::chi_square_sf(100.0, 50.0), 3.454_931_382_984_871e-5, epsilon = 1e-15);
}

#[test]
fn pearson_matches_sum_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.random_range(2..40);
        let x = random_series(&mut rng, n, false);
        let y = random_series(&mut rng, n, false);
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), raw_sum_pearson(&x, &y), epsilon = 1e-9);
    }
}

#[test]
fn p_values_match_statrs() {
    for dof in [1.0, 2.0, 3.5, 8.0, 30.0, 498.0] {
        let dist = StudentsT::new(0.0, 1.0, dof).unwrap();
        for t in [0.0, 0.1, 0.7, 1.5, 2.2, 4.0, 9.0] {
            let oracle = 2.0 * (1.0 - dist.cdf(t));
            assert_abs_diff_eq!(special::student_t_two_sided(t, dof), oracle, epsilon = 1e-9);
        }
        let chi = ChiSquared::new(dof).unwrap();
        for x in [0.01, 0.5, 1.0, 3.0, 10.0, 50.0, 400.0] {
            assert_abs_diff_eq!(special::chi_square_sf(x, dof), 1.0 - chi.cdf(x), epsilon = 1e-9);
        }
    }
    for x in [0.3, 1.0, 2.5, 7.0, 33.3, 120.0] {
        assert_abs_diff_eq!(special::ln_gamma(x), statrs::function::gamma::ln_gamma(x), epsilon = 1e-10);
    }
}

#[test]
fn t_approximation_matches_statrs_for_spearman() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..60 {
        let n = rng.random_range(5..200);
        let rho: f64 = rng.random_range(-0.99..0.99);
        let dof = n as f64 - 2.0;
        let t = rho * (dof / (1.0 - rho * rho)).sqrt();
        let oracle = 2.0 * StudentsT::new(0.0, 1.0, dof).unwrap().sf(t.abs());
        assert_abs_diff_eq!(t_approximation_p(rho, n), oracle, epsilon = 1e-9);
    }
}

/// Chi-square by recomputing expected counts from the definition.
fn chi_square_oracle(counts: &[Vec<u64>]) -> (f64, Vec<Vec<f64>>) {
    let total: f64 = counts.iter().flatten().map(|&c| c as f64).sum();
    let mut stat = 0.0;
    let mut residuals = vec![];
    for (i, row) in counts.iter().enumerate() {
        let mut out = vec![];
        for (j, &o) in row.iter().enumerate() {
            let ri: f64 = counts[i].iter().map(|&c| c as f64).sum();
            let cj: f64 = counts.iter().map(|r| r[j] as f64).sum();
            let e = ri * cj / total;
            stat += (o as f64 - e).powi(2) / e;
            out.push((o as f64 - e) / e.sqrt());
        }
        residuals.push(out);
    }
    (stat, residuals)
}

#[test]
fn chi_square_matches_expected_count_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 100 {
        let rows = rng.random_range(2..6);
        let cols = rng.random_range(2..4);
        let counts: Vec<Vec<u64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0..30)).collect()).collect();
        let Ok(r) = chi_square(&ContingencyTable::from_counts(counts.clone()).unwrap()) else { continue };
        let (stat, residuals) = chi_square_oracle(&counts);
        assert_abs_diff_eq!(r.statistic, stat, epsilon = 1e-9);
        for (a, b) in r.residuals.iter().flatten().zip(residuals.iter().flatten()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        let chi = ChiSquared::new(r.dof as f64).unwrap();
        assert_abs_diff_eq!(r.p_value, 1.0 - chi.cdf(stat), epsilon = 1e-9);
        checked += 1;
    }
}

#[test]
fn ols_matches_pseudo_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..60 {
        let k = rng.random_range(1..5);
        let n = rng.random_range(k + 3..40);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let names: Vec<String> = (0..k).map(|j| format!("s{j}")).collect();
        let fit = ols_regress(&names, &rows, &y).unwrap();

        let design = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
        if design.rank(1e-9) < k + 1 {
            // collinear draw: the fit must have dropped something
            assert!(!fit.dropped.is_empty());
            continue;
        }
        assert!(fit.dropped.is_empty());
        let beta = design.clone().pseudo_inverse(1e-12).unwrap() * DVector::from_vec(y.clone());
        assert_abs_diff_eq!(fit.intercept, beta[0], epsilon = 1e-9);
        for j in 0..k {
            assert_abs_diff_eq!(fit.coefficients[j].1, beta[j + 1], epsilon = 1e-9);
        }
    }
}

#[test]
fn ols_frozen_reference_fit() {
    let rows = vec![
        vec![1.0, 0.0, 1.0],
        vec![0.0, 1.0, 0.0],
        vec![1.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 1.0],
        vec![1.0, 1.0, 1.0],
        vec![0.0, 0.0, 0.0],
    ];
    let y = [0.3, 0.5, 0.7, 0.2, 0.35, 0.6, 0.8, 0.1];
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let fit = ols_regress(&names, &rows, &y).unwrap();
    assert_abs_diff_eq!(fit.intercept, 0.1125, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.coefficient("a").unwrap(), 0.1875, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.coefficient("b").unwrap(), 0.4125, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.coefficient("c").unwrap(), 0.0625, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.r_squared, 0.979_517_190_929_041_7, epsilon = 1e-12);
}

#[test]
fn exact_permutation_p_by_independent_enumeration() {
    // Recount every permutation with a recursive generator, independent of
    // the library's Heap's-algorithm loop.
    fn perms(v: &[f64]) -> Vec<Vec<f64>> {
        if v.len() <= 1 {
            return vec![v.to_vec()];
        }
        let mut out = vec![];
        for i in 0..v.len() {
            let mut rest = v.to_vec();
            let head = rest.remove(i);
            for mut p in perms(&rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let n = rng.random_range(3..7);
        let x = random_series(&mut rng, n, false);
        let y = random_series(&mut rng, n, false);
        let Ok(r) = spearman_with(&x, &y, PValueMethod::ExactPermutation) else { continue };
        let (rx, ry) = (brute_force_ranks(&x), brute_force_ranks(&y));
        let all = perms(&ry);
        let extreme = all
            .iter()
            .filter(|p| raw_sum_pearson(&rx, p).abs() >= r.rho.abs() - 1e-12)
            .count();
        assert_abs_diff_eq!(r.p_value, extreme as f64 / all.len() as f64, epsilon = 1e-12);
    }
}
