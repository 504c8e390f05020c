//! Summary statistics and the distribution tests the harness relies on.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and its standard error (`sd / sqrt(n)`).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let v = sorted(xs);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let c = cdf(x);
        let hi = (i + 1) as f64 / n - c;
        let lo = c - i as f64 / n;
        acc.max(hi).max(lo)
    })
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_x - F_y|`. Ties are
/// handled by advancing both samples past equal values before comparing.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    let a = sorted(xs);
    let b = sorted(ys);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `n m / (n + m)`, the sample size entering the two-sample Kolmogorov law.
pub fn effective_n(n: usize, m: usize) -> f64 {
    (n as f64 * m as f64) / (n + m) as f64
}

/// Asymptotic p-value of a KS statistic `d` at effective sample size `n`
/// (Stephens' small-sample correction).
pub fn kolmogorov_pvalue(d: f64, n: f64) -> f64 {
    let sq = n.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    kolmogorov_sf(lambda)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof)
        .map(|c| c.sf(statistic))
        .unwrap_or(f64::NAN)
}

/// Pearson test of homogeneity for a two-row contingency table. Columns whose
/// expected count would fall below 5 in either row are pooled into their
/// neighbour before testing.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let (ta, tb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let total = ta + tb;
    let mut cols: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        acc.0 += x as f64;
        acc.1 += y as f64;
        let col = acc.0 + acc.1;
        if col * ta.min(tb) / total >= 5.0 {
            cols.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match cols.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cols.push(acc),
        }
    }
    let mut stat = 0.0;
    for &(x, y) in &cols {
        let col = x + y;
        let ea = col * ta / total;
        let eb = col * tb / total;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = cols.len().saturating_sub(1) as f64;
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value: chi_square_sf(stat, dof),
    }
}

/// Sum of per-stratum 2x2 homogeneity statistics. Each stratum is
/// `(successes_a, trials_a, successes_b, trials_b)`; strata where either arm
/// has fewer than `min_trials` trials or the pooled rate is 0 or 1 are skipped.
pub fn stratified_binomial_homogeneity(
    strata: &[(u64, u64, u64, u64)],
    min_trials: u64,
) -> ChiSquareResult {
    let mut stat = 0.0;
    let mut dof = 0.0;
    for &(sa, na, sb, nb) in strata {
        if na < min_trials || nb < min_trials {
            continue;
        }
        let p = (sa + sb) as f64 / (na + nb) as f64;
        if p <= 0.0 || p >= 1.0 {
            continue;
        }
        let (pa, pb) = (sa as f64 / na as f64, sb as f64 / nb as f64);
        let var = p * (1.0 - p) * (1.0 / na as f64 + 1.0 / nb as f64);
        stat += (pa - pb).powi(2) / var;
        dof += 1.0;
    }
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value: chi_square_sf(stat, dof),
    }
}

/// Mean and standard error of a ratio-of-sums estimator from batch totals
/// `(numerator, denominator)` (delta method over independent batches).
pub fn ratio_estimate(batches: &[(f64, f64)]) -> (f64, f64) {
    let n = batches.len() as f64;
    let num: f64 = batches.iter().map(|b| b.0).sum();
    let den: f64 = batches.iter().map(|b| b.1).sum();
    let ratio = num / den;
    if batches.len() < 2 {
        return (ratio, f64::NAN);
    }
    let mean_den = den / n;
    let resid: f64 = batches
        .iter()
        .map(|b| (b.0 - ratio * b.1).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (ratio, (resid / n).sqrt() / mean_den)
}
