//! Mixture targets with exponential-power modes and their tempered laws.
//!
//! Each mode is a product of iid coordinates with density proportional to
//! `exp(-lambda |x - c|^r)`. Tempering by `beta` gives the same family with
//! `lambda` replaced by `beta * lambda`, so everything here has a closed form:
//! `|X - c|^r` is Gamma distributed and the sum over coordinates (the
//! sufficient statistic) is Gamma with shape `d / r`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};

/// Tolerance on the sum of mixture weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub lambda: f64,
    pub r: f64,
    pub weight: f64,
    /// Per-coordinate location offset.
    #[serde(default)]
    pub center: f64,
}

impl ModeSpec {
    pub fn new(lambda: f64, r: f64, weight: f64) -> Result<Self> {
        let mode = ModeSpec {
            lambda,
            r,
            weight,
            center: 0.0,
        };
        let problems = mode.problems();
        if problems.is_empty() {
            Ok(mode)
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub(crate) fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            out.push(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            ));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            out.push(format!("r must be positive and finite, got {}", self.r));
        }
        if !(self.weight > 0.0 && self.weight < 1.0) {
            out.push(format!("weight must lie in (0, 1), got {}", self.weight));
        }
        if !self.center.is_finite() {
            out.push("center must be finite".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureTarget {
    modes: Vec<ModeSpec>,
    dimension: usize,
}

impl MixtureTarget {
    pub fn new(modes: Vec<ModeSpec>, dimension: usize) -> Result<Self> {
        let problems = Self::problems(&modes, dimension);
        if problems.is_empty() {
            Ok(MixtureTarget { modes, dimension })
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Two-mode target with equal `r` and `lambda = 1`.
    pub fn two_modes(w1: f64, r1: f64, r2: f64, dimension: usize) -> Result<Self> {
        Self::new(
            vec![
                ModeSpec::new(1.0, r1, w1)?,
                ModeSpec::new(1.0, r2, 1.0 - w1)?,
            ],
            dimension,
        )
    }

    pub(crate) fn problems(modes: &[ModeSpec], dimension: usize) -> Vec<String> {
        let mut out = Vec::new();
        if modes.len() < 2 {
            out.push(format!(
                "at least two modes are required, got {}",
                modes.len()
            ));
        }
        for (j, m) in modes.iter().enumerate() {
            out.extend(m.problems().into_iter().map(|p| format!("modes[{j}]: {p}")));
        }
        let total: f64 = modes.iter().map(|m| m.weight).sum();
        if !modes.is_empty() && (total - 1.0).abs() > WEIGHT_SUM_TOL {
            out.push(format!("weights must sum to 1 (got {total})"));
        }
        if dimension == 0 {
            out.push("dimension must be a positive integer".to_string());
        }
        out
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> &ModeSpec {
        &self.modes[j]
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn weights(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.weight).collect()
    }

    pub fn with_dimension(&self, dimension: usize) -> Result<Self> {
        Self::new(self.modes.clone(), dimension)
    }
}

/// `S = sum_i |x_i - c|^r` for the current mode.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SufficientStat(f64);

impl SufficientStat {
    pub fn new(value: f64) -> Result<Self> {
        if value >= 0.0 && value.is_finite() {
            Ok(SufficientStat(value))
        } else {
            domain(format!(
                "sufficient statistic must be finite and >= 0, got {value}"
            ))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        domain(format!(
            "inverse temperature must be positive and finite, got {beta}"
        ))
    }
}

/// Per-coordinate `log ∫ exp(-beta lambda |x|^r) dx`.
pub fn log_norm_const(mode: &ModeSpec, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(log_norm_const_unchecked(mode, beta))
}

#[inline]
pub(crate) fn log_norm_const_unchecked(mode: &ModeSpec, beta: f64) -> f64 {
    std::f64::consts::LN_2 + ln_gamma(1.0 + 1.0 / mode.r) - (beta * mode.lambda).ln() / mode.r
}

/// `Var(log g(X))` for `X` drawn from the tempered coordinate law: `beta^-2 / r`.
pub fn information(mode: &ModeSpec, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(1.0 / (beta * beta * mode.r))
}

/// Log density of one coordinate under the normalised tempered law.
pub fn log_tempered_density(mode: &ModeSpec, beta: f64, x: f64) -> f64 {
    -beta * mode.lambda * (x - mode.center).abs().powf(mode.r)
        - log_norm_const_unchecked(mode, beta)
}

/// One exact draw from the tempered coordinate law.
pub fn sample_tempered_coordinate<R: Rng + ?Sized>(
    mode: &ModeSpec,
    beta: f64,
    rng: &mut R,
) -> Result<f64> {
    check_beta(beta)?;
    let gamma = Gamma::new(1.0 / mode.r, 1.0 / (beta * mode.lambda))
        .map_err(|e| Error::Domain(e.to_string()))?;
    let magnitude = gamma.sample(rng).powf(1.0 / mode.r);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    Ok(mode.center + sign * magnitude)
}

/// Draws `S ~ Gamma(d / r, 1 / (beta lambda))`, the law of `sum |X_i|^r` over
/// `d` iid tempered coordinates.
pub fn sample_sufficient_stat<R: Rng + ?Sized>(
    mode: &ModeSpec,
    beta: f64,
    d: usize,
    rng: &mut R,
) -> Result<SufficientStat> {
    check_beta(beta)?;
    if d == 0 {
        return domain("dimension must be at least 1");
    }
    let gamma = Gamma::new(d as f64 / mode.r, 1.0 / (beta * mode.lambda))
        .map_err(|e| Error::Domain(e.to_string()))?;
    Ok(SufficientStat(gamma.sample(rng)))
}

/// Log of the ratio of tempered mode densities `g^{to}(x) / g^{from}(x)`,
/// expressed through the sufficient statistic.
pub fn log_accept_ratio(
    mode: &ModeSpec,
    beta_from: f64,
    beta_to: f64,
    stat: SufficientStat,
    d: usize,
) -> f64 {
    // the Gamma-function and lambda parts of the normalisers cancel
    (beta_from - beta_to) * mode.lambda * stat.value()
        + d as f64 * (beta_to.ln() - beta_from.ln()) / mode.r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::adaptive_simpson;
    use crate::stats;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mode(lambda: f64, r: f64) -> ModeSpec {
        ModeSpec::new(lambda, r, 0.5).unwrap()
    }

    /// `log 2 ∫_0^∞ exp(-beta lambda x^r) dx` by quadrature on the natural scale.
    fn quadrature_log_norm(m: &ModeSpec, beta: f64) -> f64 {
        let scale = (beta * m.lambda).powf(-1.0 / m.r);
        // substitute x = scale * u; integrand exp(-u^r) decays below 1e-30 by u = 70^(1/r)
        let upper = 70f64.powf(1.0 / m.r);
        let v = adaptive_simpson(|u| (-u.powf(m.r)).exp(), 0.0, upper, 1e-14).unwrap();
        (2.0 * scale * v).ln()
    }

    #[test]
    fn norm_const_closed_forms() {
        let v = log_norm_const(&mode(0.5, 2.0), 1.0).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).sqrt().ln()).abs() < 1e-14);
        let v = log_norm_const(&mode(1.0, 1.0), 1.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(log_norm_const(&mode(1.0, 1.0), 0.0).is_err());
        assert!(log_norm_const(&mode(1.0, 1.0), -2.0).is_err());
    }

    #[test]
    fn norm_const_matches_quadrature() {
        // ∫ exp(-3x²) dx on a plain fine grid
        let h = 1e-4;
        let n = 120_000;
        let grid: f64 = (0..=n)
            .map(|i| {
                let x = -6.0 + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * (-3.0 * x * x).exp()
            })
            .sum::<f64>()
            * h;
        let closed = log_norm_const(&mode(1.0, 2.0), 3.0).unwrap();
        assert!(
            (closed - grid.ln()).abs() < 1e-10,
            "{closed} vs {}",
            grid.ln()
        );

        for &r in &[1.0, 1.5, 2.0, 4.0] {
            for &beta in &[1.0, 3.7, 100.0, 1e4] {
                let m = mode(0.8, r);
                let q = quadrature_log_norm(&m, beta);
                let c = log_norm_const(&m, beta).unwrap();
                assert!((q - c).abs() < 1e-10, "r={r} beta={beta}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn information_values() {
        assert_eq!(information(&mode(1.0, 2.0), 1.0).unwrap(), 0.5);
        assert_eq!(information(&mode(1.0, 2.0), 2.0).unwrap(), 0.125);
        assert!(information(&mode(1.0, 2.0), 0.0).is_err());
        for &(r, b) in &[(1.0, 1.0), (1.5, 3.0), (2.0, 7.5), (0.7, 123.0)] {
            let i = information(&mode(2.0, r), b).unwrap();
            assert!((i * b * b * r - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn information_is_variance_of_log_density() {
        let m = mode(1.0, 1.5);
        let beta = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        let logs: Vec<f64> = (0..n)
            .map(|_| {
                let x = sample_tempered_coordinate(&m, beta, &mut rng).unwrap();
                -m.lambda * x.abs().powf(m.r)
            })
            .collect();
        let mean = logs.iter().sum::<f64>() / n as f64;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let m4 = logs.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
        let se = ((m4 - var * var) / n as f64).sqrt();
        let expected = information(&m, beta).unwrap();
        assert!(
            (var - expected).abs() < 3.0 * se,
            "{var} vs {expected} (se {se})"
        );
    }

    #[test]
    fn standard_normal_coordinate_moments() {
        let m = mode(0.5, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_tempered_coordinate(&m, 1.0, &mut rng).unwrap())
            .collect();
        let (mean, se) = stats::mean_se(&xs);
        assert!(mean.abs() < 4.0 * se);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // Var(X²) = 2 for a standard normal
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn laplace_coordinate_matches_cdf() {
        let m = mode(1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_tempered_coordinate(&m, 2.0, &mut rng).unwrap())
            .collect();
        let cdf = |x: f64| {
            if x < 0.0 {
                0.5 * (2.0 * x).exp()
            } else {
                1.0 - 0.5 * (-2.0 * x).exp()
            }
        };
        let d = stats::ks_one_sample(&xs, cdf);
        let p = stats::kolmogorov_pvalue(d, xs.len() as f64);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn power_moment_is_gamma_mean() {
        // E|X|^r = shape * scale = (1/r) / (beta lambda)
        let m = mode(1.0, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..400_000)
            .map(|_| {
                sample_tempered_coordinate(&m, 1.0, &mut rng)
                    .unwrap()
                    .powi(4)
            })
            .collect();
        let (mean, se) = stats::mean_se(&vals);
        assert!((mean - 0.25).abs() < 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn stat_d1_equals_coordinate_power() {
        let m = mode(1.3, 1.5);
        let beta = 2.5;
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..100_000)
            .map(|_| sample_sufficient_stat(&m, beta, 1, &mut a).unwrap().value())
            .collect();
        let c: Vec<f64> = (0..100_000)
            .map(|_| {
                sample_tempered_coordinate(&m, beta, &mut b)
                    .unwrap()
                    .abs()
                    .powf(m.r)
            })
            .collect();
        let d = stats::ks_two_sample(&s, &c);
        let p = stats::kolmogorov_pvalue(d, stats::effective_n(s.len(), c.len()));
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn stat_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s: Vec<f64> = (0..200_000)
            .map(|_| {
                sample_sufficient_stat(&mode(0.5, 2.0), 1.0, 100, &mut rng)
                    .unwrap()
                    .value()
            })
            .collect();
        let (mean, se) = stats::mean_se(&s);
        assert!((mean - 100.0).abs() < 4.0 * se);

        let s: Vec<f64> = (0..200_000)
            .map(|_| {
                sample_sufficient_stat(&mode(1.0, 1.0), 2.0, 10, &mut rng)
                    .unwrap()
                    .value()
            })
            .collect();
        let (mean, se) = stats::mean_se(&s);
        assert!((mean - 5.0).abs() < 4.0 * se);
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s.len() - 1) as f64;
        // Var of the sample variance for Gamma(10, 1/2): (m4 - v²)/n with m4 = 3v²(1 + 2/shape)
        let var_se = ((3.0 * 2.5 * 2.5 * (1.0 + 0.2) - 2.5 * 2.5) / s.len() as f64).sqrt();
        assert!((var - 2.5).abs() < 4.0 * var_se, "{var}");
        assert!(sample_sufficient_stat(&mode(1.0, 1.0), 1.0, 0, &mut rng).is_err());
    }

    #[test]
    fn accept_ratio_hand_values() {
        let m = mode(0.5, 2.0);
        let s = SufficientStat::new(0.0).unwrap();
        assert_eq!(
            log_accept_ratio(&m, 1.0, 1.0, SufficientStat::new(3.2).unwrap(), 7),
            0.0
        );
        let v = log_accept_ratio(&m, 1.0, 2.0, s, 1);
        assert!((v - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn temperature_scale_invariance() {
        // (lambda, beta) and (beta lambda, 1) give the same coordinate law
        let beta = 3.5;
        let m = mode(0.7, 1.5);
        let m2 = mode(0.7 * beta, 1.5);
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..50_000)
            .map(|_| sample_tempered_coordinate(&m, beta, &mut a).unwrap())
            .collect();
        let y: Vec<f64> = (0..50_000)
            .map(|_| sample_tempered_coordinate(&m2, 1.0, &mut b).unwrap())
            .collect();
        let p = stats::kolmogorov_pvalue(
            stats::ks_two_sample(&x, &y),
            stats::effective_n(x.len(), y.len()),
        );
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn two_rung_chain_occupies_rungs_uniformly() {
        // beta in {1, 1.4}, S refreshed at the current beta every step
        let m = mode(1.0, 1.0);
        let betas = [1.0, 1.4];
        let d = 20;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rung = 0usize;
        let n = 400_000;
        let mut at_zero = 0usize;
        for _ in 0..n {
            let s = sample_sufficient_stat(&m, betas[rung], d, &mut rng).unwrap();
            let other = 1 - rung;
            let la = log_accept_ratio(&m, betas[rung], betas[other], s, d);
            if la >= 0.0 || rng.random::<f64>().ln() < la {
                rung = other;
            }
            at_zero += (rung == 0) as usize;
        }
        let frac = at_zero as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn target_validation() {
        let bad = MixtureTarget::new(
            vec![
                ModeSpec {
                    lambda: 1.0,
                    r: 2.0,
                    weight: 0.5,
                    center: 0.0
                };
                1
            ],
            4,
        );
        assert!(bad.is_err());
        let err = MixtureTarget::new(
            vec![
                ModeSpec {
                    lambda: 1.0,
                    r: 2.0,
                    weight: 0.5,
                    center: 0.0,
                },
                ModeSpec {
                    lambda: -1.0,
                    r: 2.0,
                    weight: 0.6,
                    center: 0.0,
                },
            ],
            0,
        )
        .unwrap_err();
        match err {
            Error::Config(list) => assert_eq!(list.len(), 3, "{list:?}"),
            other => panic!("{other}"),
        }
        assert!(ModeSpec::new(1.0, 2.0, 0.0).is_err());
        assert!(MixtureTarget::two_modes(0.3, 1.0, 2.0, 8).is_ok());
    }

    proptest! {
        #[test]
        fn accept_ratio_antisymmetric(
            lambda in 0.01f64..10.0, r in 0.3f64..5.0,
            b1 in 1.0f64..1e4, b2 in 1.0f64..1e4, s in 0.0f64..1e6, d in 1usize..100_000,
        ) {
            let m = ModeSpec::new(lambda, r, 0.5).unwrap();
            let stat = SufficientStat::new(s).unwrap();
            let fwd = log_accept_ratio(&m, b1, b2, stat, d);
            let back = log_accept_ratio(&m, b2, b1, stat, d);
            prop_assert_eq!(fwd, -back);
        }
    }
}
