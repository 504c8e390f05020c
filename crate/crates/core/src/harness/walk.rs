use serde::{Deserialize, Serialize};

use super::{ExperimentReport, Metric, Tolerance};
use crate::appendix::{occupation_experiment, sweep, BirthDeathChain, SweepConfig, SweepReport};
use crate::error::{domain, Result};
use crate::seed::family_rng;

/// Exact sweep of `P(Y_n = 0) <= 2 / sqrt(n) + 1 / m` as a report, plus the
/// raw sweep for CSV export.
pub fn bound_sweep(cfg: &SweepConfig, seed: u64) -> Result<(ExperimentReport, SweepReport)> {
    let s = sweep(cfg)?;
    let mut report = ExperimentReport::new("reflecting_walk_bound", cfg, seed);
    report.push(Metric::new(
        "violations",
        s.violations.len() as f64,
        0.0,
        s.checked,
        Tolerance::AtMost { bound: 0.0 },
    ));
    report.push(Metric::new(
        "checked",
        s.checked as f64,
        0.0,
        s.checked,
        Tolerance::AtLeast { bound: 1.0 },
    ));
    report.push(Metric::new(
        "max_lhs_over_rhs",
        s.max_ratio,
        0.0,
        s.checked,
        Tolerance::Info,
    ));
    if let Some(n) = s.smallest_violating_n {
        report.push(Metric::new(
            "smallest_violating_n_any",
            n as f64,
            0.0,
            s.checked,
            Tolerance::Info,
        ));
    }
    Ok((report, s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupationTimeConfig {
    /// Move probability at every state (holding probability `1 - a`).
    pub a: f64,
    /// `(m, n)` pairs, in the order along which the fraction should fall.
    pub grid: Vec<(usize, u64)>,
    pub start: usize,
    pub replicas: usize,
    /// Upper bound on the mean fraction at the last grid point.
    pub bound: f64,
}

impl Default for OccupationTimeConfig {
    fn default() -> Self {
        OccupationTimeConfig {
            a: 0.5,
            grid: vec![(10, 100), (20, 1_000), (50, 10_000)],
            start: 0,
            replicas: 2_000,
            bound: 0.05,
        }
    }
}

/// Time spent at 0 by a lazy birth-death chain, empirical and exact.
pub fn occupation_time_experiment(
    cfg: &OccupationTimeConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    if cfg.grid.is_empty() {
        return domain("occupation grid is empty");
    }
    let mut report = ExperimentReport::new("occupation_time", cfg, seed);
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for (i, &(m, n)) in cfg.grid.iter().enumerate() {
        let chain = BirthDeathChain::uniform(m, 1.0 - cfg.a)?;
        let res = occupation_experiment(&chain, cfg.start, n, cfg.replicas, |rep| {
            family_rng(seed, i as u32, rep as u32)
        })?;
        let exact = chain.expected_occupation(cfg.start, n)?;
        let tag = format!("m={m}_n={n}");
        let last = i + 1 == cfg.grid.len();
        let tol = if last {
            Tolerance::AtMost { bound: cfg.bound }
        } else {
            Tolerance::Info
        };
        report.push(Metric::new(
            format!("mean_fraction_{tag}"),
            res.mean,
            res.se,
            cfg.replicas as u64,
            tol,
        ));
        report.push(Metric::new(
            format!("exact_fraction_{tag}"),
            exact,
            0.0,
            1,
            Tolerance::Info,
        ));
        means.push(res.mean);
        rows.push((m, n, res.mean, res.se, exact));
    }
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    report.push(Metric::flag(
        "decreasing_along_grid",
        decreasing,
        cfg.replicas as u64,
    ));
    report.table("rows", &rows);
    Ok(report)
}
