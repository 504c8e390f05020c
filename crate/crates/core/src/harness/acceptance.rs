use serde::{Deserialize, Serialize};

use super::{par_map, ExperimentReport, Metric, Tolerance};
use crate::error::Result;
use crate::ladder::{
    build_ladder_with, limiting_acceptance, Ladder, SConvention, Spacing, Termination,
};
use crate::model::MixtureTarget;
use crate::seed::replica_rng;
use crate::sim::{Chain, StepInfo, SufficientStatSampler, Trace};

/// Proposal and acceptance counts per `(rung, mode, direction)`.
///
/// The state is redrawn every iteration, so given the cell the outcomes are
/// independent Bernoulli trials and binomial standard errors apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceTally {
    k: usize,
    modes: usize,
    proposals: Vec<[u64; 2]>,
    accepts: Vec<[u64; 2]>,
}

impl AcceptanceTally {
    pub fn new(k: usize, modes: usize) -> Self {
        let n = (k + 1) * modes;
        AcceptanceTally {
            k,
            modes,
            proposals: vec![[0; 2]; n],
            accepts: vec![[0; 2]; n],
        }
    }

    fn cell(&self, rung: usize, mode: usize) -> usize {
        rung * self.modes + mode
    }

    pub fn observe(&mut self, info: &StepInfo) {
        let c = self.cell(info.from_rung, info.mode);
        let dir = (info.direction > 0) as usize;
        self.proposals[c][dir] += 1;
        self.accepts[c][dir] += info.accepted as u64;
    }

    pub fn from_trace(trace: &Trace, modes: usize) -> Self {
        let mut t = AcceptanceTally::new(trace.k(), modes);
        for w in trace.records.windows(2) {
            t.observe(&StepInfo {
                mode: w[1].mode,
                from_rung: w[0].rung,
                rung: w[1].rung,
                direction: w[1].direction,
                accepted: w[1].accepted,
                mode_refreshed: w[0].rung == trace.k(),
            });
        }
        t
    }

    pub fn merge(&mut self, other: &AcceptanceTally) {
        assert_eq!((self.k, self.modes), (other.k, other.modes));
        for i in 0..self.proposals.len() {
            for d in 0..2 {
                self.proposals[i][d] += other.proposals[i][d];
                self.accepts[i][d] += other.accepts[i][d];
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// `(accepted, proposed)` in one direction (`up = true` for `+1`).
    pub fn counts(&self, rung: usize, mode: usize, up: bool) -> (u64, u64) {
        let c = self.cell(rung, mode);
        (self.accepts[c][up as usize], self.proposals[c][up as usize])
    }

    /// `(accepted, proposed)` over the proposals that stay on the ladder.
    pub fn in_range_counts(&self, rung: usize, mode: usize) -> (u64, u64) {
        let (mut a, mut n) = (0, 0);
        if rung > 0 {
            let (x, y) = self.counts(rung, mode, false);
            a += x;
            n += y;
        }
        if rung < self.k {
            let (x, y) = self.counts(rung, mode, true);
            a += x;
            n += y;
        }
        (a, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungRate {
    pub rung: usize,
    pub mode: usize,
    pub proposals: u64,
    pub accepts: u64,
    pub rate: f64,
    pub se: f64,
    pub predicted: f64,
    pub z: f64,
    /// Fewer than the requested number of in-range proposals.
    pub undersampled: bool,
}

/// Per-rung, per-mode acceptance over in-range proposals, against the
/// limiting rate of each mode.
pub fn acceptance_profile(
    tally: &AcceptanceTally,
    ladder: &Ladder,
    target: &MixtureTarget,
    convention: SConvention,
    min_proposals: u64,
) -> Vec<RungRate> {
    let mut out = Vec::with_capacity((tally.k + 1) * tally.modes);
    for rung in 0..=tally.k {
        for mode in 0..tally.modes {
            let (a, n) = tally.in_range_counts(rung, mode);
            let rate = a as f64 / n as f64;
            let se = (rate * (1.0 - rate) / n as f64).sqrt();
            let predicted = limiting_acceptance(target.mode(mode).r, ladder.ell0(), convention);
            out.push(RungRate {
                rung,
                mode,
                proposals: n,
                accepts: a,
                rate,
                se,
                predicted,
                z: (rate - predicted) / se,
                undersampled: n < min_proposals,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceConfig {
    pub dimension: usize,
    pub r: f64,
    pub ell0: f64,
    pub betamax: f64,
    pub steps: u64,
    pub tolerance: f64,
    pub min_proposals: u64,
    /// Independent chains sharing `steps` equally.
    pub replicas: usize,
    pub threads: usize,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            dimension: 10_000,
            r: 1.0,
            ell0: 2.38,
            betamax: 10_000.0,
            steps: 150_000_000,
            tolerance: 0.01,
            min_proposals: 1000,
            replicas: 8,
            threads: 1,
        }
    }
}

/// Long sufficient-statistic run on a two-mode target with equal shapes;
/// checks the pooled interior acceptance and every well-sampled interior rung
/// against `2 Phi(-ell0 / (2 sqrt r))`.
///
/// The ladder is not clamped at `betamax`, so the last gap is as long as the
/// others and the rung below the top is comparable with the rest.
pub fn acceptance_experiment(cfg: &AcceptanceConfig, seed: u64) -> Result<ExperimentReport> {
    let target = MixtureTarget::two_modes(0.5, cfg.r, cfg.r, cfg.dimension)?;
    let ladder = build_ladder_with(
        cfg.dimension,
        cfg.betamax,
        cfg.ell0,
        Spacing::Standard,
        Termination::Nearest,
    )?;
    let k = ladder.k();
    let replicas = cfg.replicas.max(1);
    let per = cfg.steps / replicas as u64;
    let sampler = SufficientStatSampler::new(target.clone());
    let tallies = par_map(replicas, cfg.threads, |i| {
        let mut rng = replica_rng(seed, i as u64);
        let mut chain =
            Chain::from_weights(sampler.clone(), ladder.clone(), &mut rng).expect("valid ladder");
        let mut tally = AcceptanceTally::new(k, 2);
        for _ in 0..per {
            tally.observe(&chain.step(&mut rng));
        }
        tally
    });
    let mut tally = AcceptanceTally::new(k, 2);
    tallies.iter().for_each(|t| tally.merge(t));
    let profile = acceptance_profile(
        &tally,
        &ladder,
        &target,
        SConvention::InverseSqrtR,
        cfg.min_proposals,
    );
    let limit = limiting_acceptance(cfg.r, cfg.ell0, SConvention::InverseSqrtR);

    // both modes share r, so pool them per rung
    let mut pooled = (0u64, 0u64);
    let mut worst = 0.0f64;
    let mut undersampled = 0u64;
    let mut by_rung = Vec::new();
    for rung in 1..k {
        let (mut a, mut n) = (0, 0);
        for mode in 0..2 {
            let (x, y) = tally.in_range_counts(rung, mode);
            a += x;
            n += y;
        }
        pooled.0 += a;
        pooled.1 += n;
        let rate = a as f64 / n as f64;
        by_rung.push((rung, n, rate));
        if n < cfg.min_proposals {
            undersampled += 1;
        } else {
            worst = worst.max((rate - limit).abs());
        }
    }
    let p = pooled.0 as f64 / pooled.1 as f64;
    let se = (p * (1.0 - p) / pooled.1 as f64).sqrt();

    let mut report = ExperimentReport::new("acceptance", cfg, seed);
    report.push(Metric::new("limit", limit, 0.0, 1, Tolerance::Info));
    report.push(Metric::new(
        "pooled_interior_rate",
        p,
        se,
        pooled.1,
        Tolerance::Within {
            target: limit,
            tol: cfg.tolerance,
        },
    ));
    report.push(Metric::new(
        "worst_interior_rung_deviation",
        worst,
        f64::NAN,
        (k - 1) as u64,
        Tolerance::AtMost {
            bound: cfg.tolerance,
        },
    ));
    report.push(Metric::new(
        "undersampled_interior_rungs",
        undersampled as f64,
        0.0,
        (k - 1) as u64,
        Tolerance::Info,
    ));
    let (a0, n0) = (0..2).fold((0, 0), |acc, m| {
        let (a, n) = tally.counts(0, m, false);
        (acc.0 + a, acc.1 + n)
    });
    report.push(Metric::new(
        "bottom_down_acceptance",
        a0 as f64 / n0.max(1) as f64,
        0.0,
        n0,
        Tolerance::AtMost { bound: 0.0 },
    ));
    report.table("by_rung", &by_rung);
    report.table("profile", &profile);
    Ok(report)
}
