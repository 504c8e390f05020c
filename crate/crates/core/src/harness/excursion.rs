use serde::{Deserialize, Serialize};

use super::{ExperimentReport, Metric, Tolerance};
use crate::error::{domain, Result};
use crate::ladder::{build_ladder_with, skew_constants, Ladder, Spacing, Termination};
use crate::model::MixtureTarget;
use crate::seed::master_rng;
use crate::sim::{Chain, SufficientStatSampler};
use crate::transform::w_of_state;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionStats {
    pub excursions: u64,
    pub positive: u64,
    pub fraction_positive: f64,
    pub se: f64,
    pub min_height: f64,
}

/// Streaming excursion counter. An excursion is a maximal run of nonzero
/// values between two zeros; it is counted when its largest `|w|` reaches
/// `min_height`. Runs before the first zero and after the last are ignored.
#[derive(Debug, Clone)]
pub struct ExcursionCounter {
    min_height: f64,
    seen_zero: bool,
    sign: f64,
    peak: f64,
    positive: u64,
    negative: u64,
}

impl ExcursionCounter {
    pub fn new(min_height: f64) -> Self {
        ExcursionCounter {
            min_height,
            seen_zero: false,
            sign: 0.0,
            peak: 0.0,
            positive: 0,
            negative: 0,
        }
    }

    fn close(&mut self) {
        if self.sign != 0.0 && self.peak >= self.min_height {
            if self.sign > 0.0 {
                self.positive += 1;
            } else {
                self.negative += 1;
            }
        }
        self.sign = 0.0;
        self.peak = 0.0;
    }

    pub fn observe(&mut self, w: f64) {
        if w == 0.0 {
            if self.seen_zero {
                self.close();
            }
            self.seen_zero = true;
            return;
        }
        if !self.seen_zero {
            return;
        }
        if self.sign != 0.0 && w.signum() != self.sign {
            // crossed without touching 0: discard the open run
            self.sign = 0.0;
            self.peak = 0.0;
            self.seen_zero = false;
            return;
        }
        self.sign = w.signum();
        self.peak = self.peak.max(w.abs());
    }

    pub fn excursions(&self) -> u64 {
        self.positive + self.negative
    }

    pub fn stats(&self) -> ExcursionStats {
        let n = self.excursions();
        let f = self.positive as f64 / n as f64;
        ExcursionStats {
            excursions: n,
            positive: self.positive,
            fraction_positive: f,
            se: (f * (1.0 - f) / n as f64).sqrt(),
            min_height: self.min_height,
        }
    }
}

pub fn excursion_statistics(path_w: &[f64], min_height: f64) -> Result<ExcursionStats> {
    if path_w.iter().filter(|&&w| w == 0.0).count() < 2 {
        return domain("the path must visit 0 at least twice");
    }
    let mut c = ExcursionCounter::new(min_height);
    path_w.iter().for_each(|&w| c.observe(w));
    Ok(c.stats())
}

/// Height threshold for a ladder whose rung `k - m` sits at `W = (m / k) / s_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub epsilon: f64,
    /// Rungs below the top an excursion must reach on each side.
    pub rungs_pos: usize,
    pub rungs_neg: usize,
    /// `(rungs_neg / rungs_pos) / (s2 / s1) - 1`.
    pub rounding_error: f64,
}

/// Chooses `epsilon` half a rung below an integer on the positive side so that
/// the integer rung counts on both sides stand in the ratio `s1 : s2` as
/// closely as possible.
pub fn excursion_threshold(k: usize, s1: f64, s2: f64, min_rungs: usize) -> Result<Threshold> {
    let max_rungs = k / 3;
    let mut best: Option<Threshold> = None;
    for n1 in min_rungs.max(1)..=max_rungs {
        let epsilon = (n1 as f64 - 0.5) / (k as f64 * s1);
        let n2 = (epsilon * k as f64 * s2).ceil() as usize;
        if n2 < min_rungs || n2 > max_rungs {
            continue;
        }
        let err = (n2 as f64 / n1 as f64) / (s2 / s1) - 1.0;
        if best.is_none_or(|b| err.abs() < b.rounding_error.abs()) {
            best = Some(Threshold {
                epsilon,
                rungs_pos: n1,
                rungs_neg: n2,
                rounding_error: err,
            });
        }
    }
    best.ok_or_else(|| {
        crate::Error::Domain(format!(
            "no threshold with at least {min_rungs} rungs fits k = {k}"
        ))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcursionConfig {
    pub dimension: usize,
    pub w1: f64,
    pub r1: f64,
    pub r2: f64,
    pub ell0: f64,
    pub betamax_factor: f64,
    pub excursions: u64,
    pub min_rungs: usize,
    pub max_steps: u64,
    pub sigmas: f64,
}

impl Default for ExcursionConfig {
    fn default() -> Self {
        ExcursionConfig {
            dimension: 1024,
            w1: 0.5,
            r1: 1.0,
            r2: 2.0,
            ell0: 2.38,
            betamax_factor: 1.0,
            excursions: 20_000,
            min_rungs: 8,
            max_steps: 1_000_000_000,
            sigmas: 3.0,
        }
    }
}

/// Per-rung W values for each mode side.
pub(crate) fn w_tables(ladder: &Ladder, c: &crate::ladder::SkewConstants) -> [Vec<f64>; 2] {
    let pos = ladder
        .betas()
        .iter()
        .map(|&b| w_of_state(0, b, ladder, c))
        .collect();
    let neg = ladder
        .betas()
        .iter()
        .map(|&b| w_of_state(1, b, ladder, c))
        .collect();
    [pos, neg]
}

/// Sign law of macroscopic excursions of the transformed chain.
///
/// Uses an untruncated standard ladder (equal spacing in `h` up to the top),
/// so that every step of the walk near the junction has the same length.
pub fn excursion_experiment(cfg: &ExcursionConfig, seed: u64) -> Result<ExperimentReport> {
    let d = cfg.dimension;
    let target = MixtureTarget::two_modes(cfg.w1, cfg.r1, cfg.r2, d)?;
    let ladder = build_ladder_with(
        d,
        cfg.betamax_factor * d as f64,
        cfg.ell0,
        Spacing::Standard,
        Termination::Nearest,
    )?;
    let c = skew_constants(&target, cfg.ell0)?;
    let th = excursion_threshold(ladder.k(), c.s1, c.s2, cfg.min_rungs)?;
    let tables = w_tables(&ladder, &c);
    let mut rng = master_rng(seed);
    let mut chain = Chain::new(
        SufficientStatSampler::new(target),
        ladder.clone(),
        0,
        ladder.k(),
    )?;
    let mut macro_counter = ExcursionCounter::new(th.epsilon);
    let mut raw_counter = ExcursionCounter::new(0.0);
    let mut steps = 0u64;
    while macro_counter.excursions() < cfg.excursions && steps < cfg.max_steps {
        let info = chain.step(&mut rng);
        let w = tables[info.mode.min(1)][info.rung];
        macro_counter.observe(w);
        raw_counter.observe(w);
        steps += 1;
    }
    let st = macro_counter.stats();
    let raw = raw_counter.stats();
    let mut report = ExperimentReport::new("excursions", cfg, seed);
    report.push(Metric::new("alpha", c.alpha, 0.0, 1, Tolerance::Info));
    report.push(Metric::new(
        "excursion_count",
        st.excursions as f64,
        0.0,
        st.excursions,
        Tolerance::AtLeast {
            bound: cfg.excursions as f64,
        },
    ));
    report.push(Metric::new(
        "positive_fraction",
        st.fraction_positive,
        st.se,
        st.excursions,
        Tolerance::WithinSigma {
            target: c.alpha,
            sigmas: cfg.sigmas,
        },
    ));
    report.push(Metric::new(
        "positive_fraction_all_departures",
        raw.fraction_positive,
        raw.se,
        raw.excursions,
        Tolerance::Info,
    ));
    report.table("threshold", &th);
    report.table(
        "ladder",
        &serde_json::json!({"k": ladder.k(), "betamax": ladder.betamax(), "steps": steps}),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_complete_excursions_only() {
        let path = [
            0.5, 0.0, 1.0, 2.0, 0.0, -1.0, 0.0, 3.0, 0.0, -0.2, -0.1, 0.0, 4.0,
        ];
        let s = excursion_statistics(&path, 0.0).unwrap();
        assert_eq!((s.excursions, s.positive), (4, 2));
        let s = excursion_statistics(&path, 1.5).unwrap();
        assert_eq!((s.excursions, s.positive), (2, 2));
        assert!(excursion_statistics(&[0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn threshold_matches_ratio() {
        let th = excursion_threshold(97, 0.4838, 0.6325, 8).unwrap();
        assert!(th.rounding_error.abs() < 1e-3, "{th:?}");
        // heights (m / k) / s reach epsilon exactly from the chosen rung counts
        let h = |m: usize, s: f64| m as f64 / (97.0 * s);
        assert!(h(th.rungs_pos, 0.4838) >= th.epsilon && h(th.rungs_pos - 1, 0.4838) < th.epsilon);
        assert!(h(th.rungs_neg, 0.6325) >= th.epsilon && h(th.rungs_neg - 1, 0.6325) < th.epsilon);
        assert!(excursion_threshold(10, 0.5, 0.6, 8).is_err());
    }

    #[test]
    fn symmetric_target_splits_evenly() {
        let cfg = ExcursionConfig {
            dimension: 256,
            r1: 2.0,
            r2: 2.0,
            excursions: 3000,
            min_rungs: 4,
            ..Default::default()
        };
        let r = excursion_experiment(&cfg, 5).unwrap();
        let m = r.metric("positive_fraction").unwrap();
        assert!((m.estimate.unwrap() - 0.5).abs() < 3.0 * m.se.unwrap() + 1e-9);
    }
}
