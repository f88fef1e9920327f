//! Rank statistics for the experiment comparison.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Set when both samples are identical with zero variance (p = 1).
    pub degenerate: bool,
    /// Whether the p-value came from exact enumeration.
    pub exact: bool,
}

/// Midranks of the pooled sample, in pooled sorted order.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let n = pooled.len();
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[j] == pooled[i] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for r_slot in ranks.iter_mut().take(j).skip(i) {
            *r_slot = r;
        }
        i = j;
    }
    ranks
}

fn u_from_rank_sum(rank_sum: f64, n1: usize) -> f64 {
    rank_sum - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Two-sided Mann-Whitney U test. Exact p by enumerating all rank
/// assignments when the pooled size is at most 16, otherwise the normal
/// approximation with tie correction and continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("mann_whitney_u requires nonempty samples".into()));
    }
    let n1 = a.len();
    let n2 = b.len();
    let n = n1 + n2;

    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let values: Vec<f64> = pooled.iter().map(|p| p.0).collect();
    let ranks = midranks(&values);

    let rank_sum_a: f64 = pooled
        .iter()
        .zip(ranks.iter())
        .filter(|((_, is_a), _)| *is_a)
        .map(|(_, &r)| r)
        .sum();
    let u = u_from_rank_sum(rank_sum_a, n1);
    let mu = (n1 * n2) as f64 / 2.0;

    if values.first() == values.last() {
        // every pooled value identical: no separation possible
        return Ok(UTestResult {
            u,
            p: 1.0,
            degenerate: true,
            exact: true,
        });
    }

    if n <= 16 {
        // enumerate all C(n, n1) assignments of pooled positions to sample a
        let observed_dev = (u - mu).abs();
        let mut total: u64 = 0;
        let mut extreme: u64 = 0;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            total += 1;
            let rs: f64 = (0..n)
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| ranks[i])
                .sum();
            let u_perm = u_from_rank_sum(rs, n1);
            if (u_perm - mu).abs() >= observed_dev - 1e-12 {
                extreme += 1;
            }
        }
        return Ok(UTestResult {
            u,
            p: extreme as f64 / total as f64,
            degenerate: false,
            exact: true,
        });
    }

    // normal approximation with tie correction
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[j] == values[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let nf = n as f64;
    let var = (n1 * n2) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let sigma = var.sqrt();
    let z = ((u - mu).abs() - 0.5).max(0.0) / sigma;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * (1.0 - normal.cdf(z))).min(1.0);
    Ok(UTestResult {
        u,
        p,
        degenerate: false,
        exact: false,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1); zero for a single sample.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    if xs.len() == 1 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: enumerate every assignment directly from the
    /// definition (count of pairs a_i > b_j plus half the ties).
    fn brute_force_p(a: &[f64], b: &[f64]) -> (f64, f64) {
        fn u_stat(a: &[f64], b: &[f64]) -> f64 {
            let mut u = 0.0;
            for &x in a {
                for &y in b {
                    if x > y {
                        u += 1.0;
                    } else if x == y {
                        u += 0.5;
                    }
                }
            }
            u
        }
        let n1 = a.len();
        let n = n1 + b.len();
        let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        pooled.sort_by(f64::total_cmp);
        let mu = (a.len() * b.len()) as f64 / 2.0;
        let observed = u_stat(a, b);
        let dev = (observed - mu).abs();
        let mut total = 0u64;
        let mut extreme = 0u64;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            total += 1;
            let (mut pa, mut pb) = (Vec::new(), Vec::new());
            for (i, &v) in pooled.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    pa.push(v);
                } else {
                    pb.push(v);
                }
            }
            if (u_stat(&pa, &pb) - mu).abs() >= dev - 1e-12 {
                extreme += 1;
            }
        }
        (observed, extreme as f64 / total as f64)
    }

    #[test]
    fn identical_singletons() {
        let r = mann_whitney_u(&[5.0], &[5.0]).unwrap();
        assert_eq!(r.u, 0.5);
        assert_eq!(r.p, 1.0);
        assert!(r.degenerate);
    }

    #[test]
    fn separated_pairs_exact() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p - 2.0 / 6.0).abs() < 1e-12);
        assert!(r.exact);
    }

    #[test]
    fn scale_invariance() {
        let a = [1.2, 3.4, 0.7, 2.2];
        let b = [4.4, 5.1, 2.9];
        let r1 = mann_whitney_u(&a, &b).unwrap();
        let a10: Vec<f64> = a.iter().map(|x| x * 10.0).collect();
        let b10: Vec<f64> = b.iter().map(|x| x * 10.0).collect();
        let r2 = mann_whitney_u(&a10, &b10).unwrap();
        assert_eq!(r1.u, r2.u);
        assert_eq!(r1.p, r2.p);
    }

    #[test]
    fn exact_matches_brute_force_for_small_samples() {
        let cases: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![1.0, 2.0], vec![3.0, 4.0]),
            (vec![1.0], vec![2.0, 3.0, 4.0]),
            (vec![3.0, 1.0, 4.0], vec![1.0, 5.0, 9.0, 2.0]),
            (vec![1.0, 1.0, 2.0], vec![2.0, 3.0, 3.0]),
            (vec![5.0, 6.0, 7.0, 8.0, 9.0], vec![1.0, 2.0, 3.0, 4.0, 10.0]),
            (vec![2.0, 2.0, 2.0, 7.0], vec![2.0, 2.0, 8.0, 9.0, 10.0, 11.0]),
        ];
        for (a, b) in cases {
            assert!(a.len() + b.len() <= 10);
            let r = mann_whitney_u(&a, &b).unwrap();
            let (u_oracle, p_oracle) = brute_force_p(&a, &b);
            assert!((r.u - u_oracle).abs() < 1e-12, "{a:?} vs {b:?}");
            assert!((r.p - p_oracle).abs() < 1e-12, "{a:?} vs {b:?}: {} vs {}", r.p, p_oracle);
        }
    }

    #[test]
    fn normal_approximation_for_large_samples() {
        let a: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..12).map(|i| i as f64 + 8.0).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(!r.exact);
        assert!(r.p < 0.05);
        // clearly separated samples
        let c: Vec<f64> = (0..12).map(|i| i as f64 + 100.0).collect();
        let r2 = mann_whitney_u(&a, &c).unwrap();
        assert_eq!(r2.u, 0.0);
        assert!(r2.p < 1e-4);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean(&[2.0, 4.0]), 3.0);
        assert_eq!(std_dev(&[3.0]), 0.0);
        assert!((std_dev(&[2.0, 4.0]) - 2.0_f64.sqrt()).abs() < 1e-12);
    }
}
