//! Inverse-temperature ladders and the constants of the limiting skew
//! Brownian motion.
//!
//! Rungs follow `beta_i = beta_{i-1} + ell(beta_{i-1}) / sqrt(d)` from
//! `beta_0 = 1`. With the standard spacing `ell(beta) = ell0 * beta` the ladder
//! is geometric; the QuanTA spacing `ell(beta) = ell0 * beta^(k/2)` with
//! `k > 2` spreads the cold end out so that `h(beta_max)` stays bounded.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::MixtureTarget;
use crate::numeric::{adaptive_simpson, normal_cdf};

/// Default spacing constant.
pub const DEFAULT_ELL0: f64 = 2.38;

/// Upper bound on the number of rungs a ladder may have.
pub const MAX_RUNGS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Spacing {
    /// `ell(beta) = ell0 * beta`
    Standard,
    /// `ell(beta) = ell0 * beta^(k/2)`, `k > 2`
    Quanta { k: f64 },
}

impl Spacing {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Spacing::Standard => Ok(()),
            Spacing::Quanta { k } if k > 2.0 && k.is_finite() => Ok(()),
            Spacing::Quanta { k } => domain(format!("QuanTA spacing requires k > 2, got {k}")),
        }
    }
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spacing::Standard => write!(f, "standard"),
            Spacing::Quanta { k } => write!(f, "quanta(k={k})"),
        }
    }
}

/// How the top of the ladder is placed relative to the requested `beta_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    /// Iterate to the first overshoot, then clamp the last rung to `beta_max`.
    #[default]
    Clamp,
    /// Stop at the unclamped rung closest to `beta_max` (all gaps follow the
    /// recurrence exactly; the top rung is only approximately `beta_max`).
    Nearest,
}

/// Which exponent of `r` enters `s_i^2 = 2 Phi(-ell0 r^(∓1/2) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SConvention {
    /// `2 Phi(-ell0 / (2 sqrt(r)))`, consistent with `I_j = I_0 / r_j`.
    #[default]
    InverseSqrtR,
    /// `2 Phi(-ell0 sqrt(r) / 2)`.
    SqrtR,
}

pub fn ell(beta: f64, ell0: f64, spacing: Spacing) -> f64 {
    match spacing {
        Spacing::Standard => ell0 * beta,
        Spacing::Quanta { k } => ell0 * beta.powf(0.5 * k),
    }
}

/// `h(x) = ∫_1^|x| du / ell(u)` in closed form.
pub fn h(x: f64, ell0: f64, spacing: Spacing) -> Result<f64> {
    let ax = x.abs();
    if ax.is_nan() || ax < 1.0 {
        return domain(format!("h is defined for |x| >= 1, got {x}"));
    }
    Ok(match spacing {
        Spacing::Standard => ax.ln() / ell0,
        Spacing::Quanta { k } => {
            let e = 0.5 * k - 1.0;
            // (1 - |x|^(-e)) / (ell0 e), written to stay accurate near |x| = 1
            -(-e * ax.ln()).exp_m1() / (ell0 * e)
        }
    })
}

/// `h` by adaptive quadrature of `1 / ell`, for spacing functions without a
/// closed-form antiderivative.
pub fn h_quadrature<F: Fn(f64) -> f64>(x: f64, ell_fn: F, tol: f64) -> Result<f64> {
    let ax = x.abs();
    if ax.is_nan() || ax < 1.0 {
        return domain(format!("h is defined for |x| >= 1, got {x}"));
    }
    // integrate in log-space: ∫_0^{ln|x|} e^v / ell(e^v) dv
    adaptive_simpson(|v| v.exp() / ell_fn(v.exp()), 0.0, ax.ln(), tol)
        .ok_or_else(|| Error::Quadrature(format!("h({x}) did not converge")))
}

/// Inverse of `h` on `[0, h(inf))`.
pub fn h_inverse(y: f64, ell0: f64, spacing: Spacing) -> Result<f64> {
    if y.is_nan() || y < 0.0 {
        return domain(format!("h^-1 needs y >= 0, got {y}"));
    }
    match spacing {
        Spacing::Standard => Ok((ell0 * y).exp()),
        Spacing::Quanta { k } => {
            let e = 0.5 * k - 1.0;
            let inner = 1.0 - ell0 * e * y;
            if inner <= 0.0 {
                return domain(format!("y = {y} is beyond h(inf) = {}", 1.0 / (ell0 * e)));
            }
            Ok(inner.powf(-1.0 / e))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    betas: Vec<f64>,
    /// Inverse temperatures at which the tempered modes are evaluated; equal
    /// to `betas` for standard spacing (see [`Ladder::effective_betas`]).
    effective: Vec<f64>,
    ell0: f64,
    spacing: Spacing,
    dimension: usize,
    /// Ratio of the final gap to the gap the recurrence prescribes, when the
    /// final rung was clamped.
    clamped_gap_fraction: Option<f64>,
}

fn check_common(d: usize, ell0: f64, spacing: Spacing) -> Result<()> {
    if d == 0 {
        return domain("dimension must be at least 1");
    }
    if !(ell0 > 0.0 && ell0.is_finite()) {
        return domain(format!("ell0 must be positive, got {ell0}"));
    }
    spacing.validate()
}

/// Builds the ladder from `beta_0 = 1` up to `betamax`, clamping the final rung.
pub fn build_ladder(d: usize, betamax: f64, ell0: f64, spacing: Spacing) -> Result<Ladder> {
    build_ladder_with(d, betamax, ell0, spacing, Termination::Clamp)
}

pub fn build_ladder_with(
    d: usize,
    betamax: f64,
    ell0: f64,
    spacing: Spacing,
    termination: Termination,
) -> Result<Ladder> {
    check_common(d, ell0, spacing)?;
    if !betamax.is_finite() || betamax < 1.0 {
        return domain(format!("betamax must be finite and >= 1, got {betamax}"));
    }
    let sqrt_d = (d as f64).sqrt();
    let mut betas = vec![1.0];
    let mut clamped = None;
    let mut current = 1.0;
    while current < betamax {
        let step = ell(current, ell0, spacing) / sqrt_d;
        let next = current + step;
        match termination {
            Termination::Clamp => {
                if next >= betamax * (1.0 - 1e-14) {
                    if next != betamax {
                        clamped = Some((betamax - current) / step);
                    }
                    betas.push(betamax);
                    break;
                }
                betas.push(next);
            }
            Termination::Nearest => {
                if next >= betamax {
                    // keep whichever of current / next is closer on the log scale
                    if (next / betamax).ln() < (betamax / current).ln() || betas.len() == 1 {
                        betas.push(next);
                    }
                    break;
                }
                betas.push(next);
            }
        }
        current = next;
        if betas.len() > MAX_RUNGS {
            return domain(format!("ladder would exceed {MAX_RUNGS} rungs"));
        }
    }
    Ok(Ladder::from_parts(betas, ell0, spacing, d, clamped))
}

impl Ladder {
    /// Ladder with exactly `k + 1` rungs generated by the recurrence, without
    /// any clamping.
    pub fn with_rungs(d: usize, k: usize, ell0: f64, spacing: Spacing) -> Result<Ladder> {
        check_common(d, ell0, spacing)?;
        if k > MAX_RUNGS {
            return domain(format!("ladder would exceed {MAX_RUNGS} rungs"));
        }
        let sqrt_d = (d as f64).sqrt();
        let mut betas = Vec::with_capacity(k + 1);
        betas.push(1.0);
        for i in 0..k {
            let b = betas[i];
            betas.push(b + ell(b, ell0, spacing) / sqrt_d);
        }
        Ok(Ladder::from_parts(betas, ell0, spacing, d, None))
    }

    fn from_parts(
        betas: Vec<f64>,
        ell0: f64,
        spacing: Spacing,
        dimension: usize,
        clamped: Option<f64>,
    ) -> Ladder {
        let effective = match spacing {
            Spacing::Standard => betas.clone(),
            Spacing::Quanta { .. } => betas
                .iter()
                .map(|&b| (ell0 * h(b, ell0, spacing).expect("rungs are >= 1")).exp())
                .collect(),
        };
        Ladder {
            betas,
            effective,
            ell0,
            spacing,
            dimension,
            clamped_gap_fraction: clamped,
        }
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta(&self, rung: usize) -> f64 {
        self.betas[rung]
    }

    /// Index of the top rung.
    pub fn k(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn betamax(&self) -> f64 {
        *self.betas.last().expect("ladder is never empty")
    }

    pub fn ell0(&self) -> f64 {
        self.ell0
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn clamped_gap_fraction(&self) -> Option<f64> {
        self.clamped_gap_fraction
    }

    pub fn ell(&self, beta: f64) -> f64 {
        ell(beta, self.ell0, self.spacing)
    }

    pub fn h(&self, x: f64) -> Result<f64> {
        h(x, self.ell0, self.spacing)
    }

    pub fn h_betamax(&self) -> f64 {
        h(self.betamax(), self.ell0, self.spacing).expect("betamax >= 1")
    }

    /// Inverse temperatures used for within-mode sampling and the acceptance
    /// ratio.
    ///
    /// For standard spacing these are the rungs themselves. The QuanTA spacing
    /// only makes sense together with the state transformation that lets the
    /// larger temperature moves be accepted; that transformation is modelled by
    /// evaluating exponential-power modes at `exp(ell0 h(beta))`, which keeps
    /// `ell(beta) I^(1/2)(beta)` constant exactly as in the standard case.
    pub fn effective_betas(&self) -> &[f64] {
        &self.effective
    }

    /// Ladder as CSV with columns `index,beta,ell_of_beta,h_of_beta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,beta,ell_of_beta,h_of_beta\n");
        for (i, &b) in self.betas.iter().enumerate() {
            let hv = self.h(b).expect("rungs are >= 1");
            out.push_str(&format!("{i},{b},{},{hv}\n", self.ell(b)));
        }
        out
    }
}

/// Diffusion constants of the two-mode limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewConstants {
    pub s1: f64,
    pub s2: f64,
    pub wmin: f64,
    pub wmax: f64,
    /// Probability that an excursion from the junction is positive.
    pub alpha: f64,
    /// Weight of mode 1.
    pub w1: f64,
}

impl SkewConstants {
    pub fn from_parts(s1: f64, s2: f64, w1: f64) -> Result<Self> {
        if !(s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite()) {
            return domain(format!("s1, s2 must be positive, got {s1}, {s2}"));
        }
        if !(w1 > 0.0 && w1 < 1.0) {
            return domain(format!("w1 must lie in (0, 1), got {w1}"));
        }
        let w2 = 1.0 - w1;
        Ok(SkewConstants {
            s1,
            s2,
            wmin: -1.0 / s2,
            wmax: 1.0 / s1,
            alpha: w1 * s1 / (w1 * s1 + w2 * s2),
            w1,
        })
    }

    /// `s` on the side of `z` (undefined at 0).
    pub fn s_of(&self, z: f64) -> f64 {
        if z > 0.0 {
            self.s1
        } else {
            self.s2
        }
    }
}

/// Limiting acceptance rate of a temperature move in a mode with exponent `r`.
pub fn limiting_acceptance(r: f64, ell0: f64, convention: SConvention) -> f64 {
    let arg = match convention {
        SConvention::InverseSqrtR => ell0 / (2.0 * r.sqrt()),
        SConvention::SqrtR => 0.5 * ell0 * r.sqrt(),
    };
    2.0 * normal_cdf(-arg)
}

pub fn skew_constants(target: &MixtureTarget, ell0: f64) -> Result<SkewConstants> {
    skew_constants_with(target, ell0, SConvention::default())
}

pub fn skew_constants_with(
    target: &MixtureTarget,
    ell0: f64,
    convention: SConvention,
) -> Result<SkewConstants> {
    if target.num_modes() != 2 {
        return Err(Error::Unsupported(format!(
            "skew constants need exactly two modes, got {}",
            target.num_modes()
        )));
    }
    let s = |j: usize| limiting_acceptance(target.mode(j).r, ell0, convention).sqrt();
    SkewConstants::from_parts(s(0), s(1), target.mode(0).weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ell_values() {
        assert_eq!(ell(3.0, 1.0, Spacing::Standard), 3.0);
        assert_eq!(ell(4.0, 1.0, Spacing::Quanta { k: 3.0 }), 8.0);
        assert_eq!(ell(1.0, 2.38, Spacing::Standard), 2.38);
    }

    #[test]
    fn hand_iterated_ladder() {
        let l = build_ladder(4, 3.375, 1.0, Spacing::Standard).unwrap();
        assert_eq!(l.betas(), &[1.0, 1.5, 2.25, 3.375]);
        assert_eq!(l.k(), 3);
        assert_eq!(l.clamped_gap_fraction(), None);

        let l = build_ladder(9, 1.0, 2.38, Spacing::Standard).unwrap();
        assert_eq!(l.betas(), &[1.0]);
        assert_eq!(l.k(), 0);

        assert!(build_ladder(4, 0.5, 1.0, Spacing::Standard).is_err());
        assert!(build_ladder(4, 8.0, 1.0, Spacing::Quanta { k: 2.0 }).is_err());
    }

    #[test]
    fn clamped_top_rung() {
        let l = build_ladder(4, 3.0, 1.0, Spacing::Standard).unwrap();
        assert_eq!(l.betas(), &[1.0, 1.5, 2.25, 3.0]);
        let frac = l.clamped_gap_fraction().unwrap();
        assert!((frac - 0.75 / 1.125).abs() < 1e-15);
    }

    #[test]
    fn rung_count_grows_like_sqrt_d_log_betamax() {
        let d = 10_000;
        let l = build_ladder(d, d as f64, 1.0, Spacing::Standard).unwrap();
        let predicted = (d as f64).sqrt() * (d as f64).ln();
        let k = l.k() as f64;
        assert!(
            (k / predicted - 1.0).abs() < 0.05,
            "k = {k}, predicted {predicted}"
        );
    }

    #[test]
    fn recurrence_residual_on_interior_rungs() {
        for &(d, spacing) in &[
            (100, Spacing::Standard),
            (10_000, Spacing::Standard),
            (400, Spacing::Quanta { k: 3.0 }),
        ] {
            let l = build_ladder(d, d as f64, 2.38, spacing).unwrap();
            let b = l.betas();
            for i in 1..l.k() {
                let resid = b[i] - b[i - 1] - l.ell(b[i - 1]) / (d as f64).sqrt();
                assert!(resid.abs() < 1e-12 * b[i].max(1.0), "rung {i}: {resid}");
                assert!(b[i] > b[i - 1]);
            }
            assert_eq!(l.betamax(), d as f64);
        }
    }

    #[test]
    fn nearest_termination_and_fixed_rungs() {
        let l =
            build_ladder_with(1024, 1024.0, 2.38, Spacing::Standard, Termination::Nearest).unwrap();
        assert_eq!(l.clamped_gap_fraction(), None);
        assert!((l.betamax() / 1024.0).ln().abs() < 0.5 * (1.0 + 2.38 / 32.0f64).ln() + 1e-12);
        let m = Ladder::with_rungs(1024, l.k(), 2.38, Spacing::Standard).unwrap();
        assert_eq!(m.betas(), l.betas());
    }

    #[test]
    fn h_values() {
        assert_eq!(h(1.0, 1.0, Spacing::Standard).unwrap(), 0.0);
        assert!((h(std::f64::consts::E, 1.0, Spacing::Standard).unwrap() - 1.0).abs() < 1e-15);
        assert!(h(0.5, 1.0, Spacing::Standard).is_err());
        // ∫_1^∞ u^-2 du = 1
        let far = h(1e12, 1.0, Spacing::Quanta { k: 4.0 }).unwrap();
        assert!((far - 1.0).abs() < 1e-11);
        assert_eq!(
            h(-4.0, 1.0, Spacing::Standard).unwrap(),
            h(4.0, 1.0, Spacing::Standard).unwrap()
        );
    }

    #[test]
    fn h_closed_form_matches_quadrature() {
        for &spacing in &[
            Spacing::Standard,
            Spacing::Quanta { k: 3.0 },
            Spacing::Quanta { k: 5.5 },
        ] {
            for &x in &[1.0, 1.001, 2.0, 17.0, 1e3, 1e6] {
                let closed = h(x, 2.38, spacing).unwrap();
                let quad = h_quadrature(x, |u| ell(u, 2.38, spacing), 1e-13).unwrap();
                assert!(
                    (closed - quad).abs() < 1e-10,
                    "{spacing} x={x}: {closed} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn h_inverse_round_trip() {
        for &spacing in &[Spacing::Standard, Spacing::Quanta { k: 3.0 }] {
            for &x in &[1.0, 1.5, 40.0, 1e5] {
                let y = h(x, 2.38, spacing).unwrap();
                let back = h_inverse(y, 2.38, spacing).unwrap();
                assert!((back / x - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn standard_ladder_h_is_nearly_linear_in_rung() {
        // h(beta_i) = i log(1 + ell0/sqrt d) / ell0, relative error ~ ell0 / (2 sqrt d)
        for &d in &[100usize, 1_000, 10_000, 100_000] {
            let l = build_ladder(d, d as f64, 2.38, Spacing::Standard).unwrap();
            let sd = (d as f64).sqrt();
            for i in 1..l.k() {
                let rel = l.h(l.beta(i)).unwrap() * sd / i as f64 - 1.0;
                assert!(rel.abs() <= 2.38 / sd, "d={d} i={i}: {rel}");
            }
        }
    }

    #[test]
    fn quanta_h_betamax_bounded() {
        let bound = 1.0 / (2.38 * 0.5);
        let mut prev = 0.0;
        for e in 2..=6 {
            let d = 10usize.pow(e);
            let l = build_ladder(d, d as f64, 2.38, Spacing::Quanta { k: 3.0 }).unwrap();
            let hb = l.h_betamax();
            assert!(hb > prev && hb < bound, "d={d}: {hb}");
            prev = hb;
        }
    }

    #[test]
    fn quanta_effective_betas_are_evenly_log_spaced() {
        let l = build_ladder(10_000, 10_000.0, 2.38, Spacing::Quanta { k: 3.0 }).unwrap();
        let eff = l.effective_betas();
        let betas = l.betas();
        for i in 1..l.k() {
            let step = (eff[i] / eff[i - 1]).ln();
            // ell is increasing, so the h increment lies between the two
            // one-sided Riemann sums of the recurrence
            let upper = 2.38 / 100.0;
            let lower = upper * l.ell(betas[i - 1]) / l.ell(betas[i]);
            assert!(
                step <= upper * (1.0 + 1e-12) && step >= lower * (1.0 - 1e-12),
                "rung {i}: {step}"
            );
        }
    }

    #[test]
    fn skew_constant_values() {
        let s2 = limiting_acceptance(1.0, 2.38, SConvention::InverseSqrtR);
        // Phi(-1.19) = 0.117023 from normal tables
        assert!((s2 - 2.0 * 0.117023).abs() < 2e-6, "{s2}");
        // Phi(-0.841457) = 0.200046
        let s = limiting_acceptance(2.0, 2.38, SConvention::InverseSqrtR).sqrt();
        assert!((s - (2.0f64 * 0.200046).sqrt()).abs() < 1e-5, "{s}");

        let t = MixtureTarget::two_modes(0.5, 2.0, 2.0, 10).unwrap();
        let c = skew_constants(&t, 2.38).unwrap();
        assert!((c.alpha - 0.5).abs() < 1e-15);
        assert!(c.wmin < 0.0 && c.wmax > 0.0);

        let t3 = MixtureTarget::new(
            vec![
                crate::model::ModeSpec::new(1.0, 2.0, 0.2).unwrap(),
                crate::model::ModeSpec::new(1.0, 2.0, 0.3).unwrap(),
                crate::model::ModeSpec::new(1.0, 2.0, 0.5).unwrap(),
            ],
            10,
        )
        .unwrap();
        assert!(matches!(
            skew_constants(&t3, 2.38),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn s_convention_switch() {
        let t = MixtureTarget::two_modes(0.5, 4.0, 1.0, 10).unwrap();
        let a = skew_constants_with(&t, 2.38, SConvention::InverseSqrtR).unwrap();
        let b = skew_constants_with(&t, 2.38, SConvention::SqrtR).unwrap();
        // r = 1 is a fixed point of the switch
        assert!((a.s2 - b.s2).abs() < 1e-15);
        assert!(a.s1 > b.s1);
    }

    proptest! {
        #[test]
        fn h_increasing(x in 1.0f64..1e6, dx in 1e-6f64..10.0, k in 2.1f64..8.0) {
            for sp in [Spacing::Standard, Spacing::Quanta { k }] {
                let (a, b) = (h(x, 2.38, sp).unwrap(), h(x + dx, 2.38, sp).unwrap());
                prop_assert!(b >= a);
                // strict wherever the increment is representable
                if dx / ell(x + dx, 2.38, sp) > 4.0 * f64::EPSILON * a.max(1e-300) {
                    prop_assert!(b > a);
                }
            }
        }

        #[test]
        fn skew_constants_invariants(w1 in 0.01f64..0.99, r1 in 0.2f64..8.0, r2 in 0.2f64..8.0, ell0 in 0.1f64..6.0) {
            let t = MixtureTarget::two_modes(w1, r1, r2, 3).unwrap();
            let c = skew_constants(&t, ell0).unwrap();
            prop_assert!(c.s1 > 0.0 && c.s1 < 2f64.sqrt());
            prop_assert!(c.s2 > 0.0 && c.s2 < 2f64.sqrt());
            prop_assert!(c.wmin < 0.0 && 0.0 < c.wmax);
            prop_assert!(c.alpha > 0.0 && c.alpha < 1.0);
        }
    }
}
