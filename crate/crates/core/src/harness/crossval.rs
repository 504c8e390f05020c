use serde::{Deserialize, Serialize};

use super::acceptance::AcceptanceTally;
use super::{par_map, ExperimentReport, Metric, Tolerance};
use crate::error::Result;
use crate::ladder::{build_ladder, Ladder, Spacing};
use crate::model::MixtureTarget;
use crate::seed::family_rng;
use crate::sim::{Chain, FullCoordinateSampler, ModeSampler, SufficientStatSampler};
use crate::stats::{chi_square_homogeneity, stratified_binomial_homogeneity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossValConfig {
    pub dimension: usize,
    pub w1: f64,
    pub r1: f64,
    pub r2: f64,
    pub ell0: f64,
    pub betamax_factor: f64,
    pub replicas: usize,
    pub steps: u64,
    /// Both tests must return a p-value above this.
    pub alpha: f64,
    pub min_trials: u64,
    pub threads: usize,
}

impl Default for CrossValConfig {
    fn default() -> Self {
        CrossValConfig {
            dimension: 64,
            w1: 0.5,
            r1: 1.0,
            r2: 2.0,
            ell0: 2.38,
            betamax_factor: 1.0,
            replicas: 1500,
            steps: 500,
            alpha: 0.01,
            min_trials: 30,
            threads: 1,
        }
    }
}

struct Outcome {
    final_cell: usize,
    tally: AcceptanceTally,
}

fn run_family<M: ModeSampler + Clone + Sync>(
    sampler: &M,
    ladder: &Ladder,
    cfg: &CrossValConfig,
    seed: u64,
    family: u32,
) -> Vec<Outcome>
where
    M::State: Send,
{
    let modes = sampler.weights().len();
    par_map(cfg.replicas, cfg.threads, |i| {
        let mut rng = family_rng(seed, family, i as u32);
        let mut chain =
            Chain::from_weights(sampler.clone(), ladder.clone(), &mut rng).expect("valid");
        let mut tally = AcceptanceTally::new(ladder.k(), modes);
        for _ in 0..cfg.steps {
            let info = chain.step(&mut rng);
            tally.observe(&info);
        }
        let s = chain.state();
        Outcome {
            final_cell: s.mode * (ladder.k() + 1) + s.rung,
            tally,
        }
    })
}

fn summarise(
    outcomes: &[Outcome],
    cells: usize,
    k: usize,
    modes: usize,
) -> (Vec<u64>, AcceptanceTally) {
    let mut hist = vec![0u64; cells];
    let mut tally = AcceptanceTally::new(k, modes);
    for o in outcomes {
        hist[o.final_cell] += 1;
        tally.merge(&o.tally);
    }
    (hist, tally)
}

/// Sufficient-statistic and coordinate-wise chains from the same start law:
/// chi-square homogeneity of the final `(mode, rung)` over independent
/// replicas, and a stratified binomial test of acceptance per
/// `(rung, mode, direction)`.
pub fn cross_validation(cfg: &CrossValConfig, seed: u64) -> Result<ExperimentReport> {
    let target = MixtureTarget::two_modes(cfg.w1, cfg.r1, cfg.r2, cfg.dimension)?;
    let ladder = build_ladder(
        cfg.dimension,
        cfg.betamax_factor * cfg.dimension as f64,
        cfg.ell0,
        Spacing::Standard,
    )?;
    let k = ladder.k();
    let modes = target.num_modes();
    let cells = modes * (k + 1);
    let suff = run_family(
        &SufficientStatSampler::new(target.clone()),
        &ladder,
        cfg,
        seed,
        0,
    );
    let full = run_family(
        &FullCoordinateSampler::new(target.clone()),
        &ladder,
        cfg,
        seed,
        1,
    );
    let (ha, ta) = summarise(&suff, cells, k, modes);
    let (hb, tb) = summarise(&full, cells, k, modes);

    let occ = chi_square_homogeneity(&ha, &hb);
    let mut strata = Vec::new();
    for rung in 0..=k {
        for mode in 0..modes {
            for up in [false, true] {
                let (sa, na) = ta.counts(rung, mode, up);
                let (sb, nb) = tb.counts(rung, mode, up);
                strata.push((sa, na, sb, nb));
            }
        }
    }
    let acc = stratified_binomial_homogeneity(&strata, cfg.min_trials);

    let mut report = ExperimentReport::new("cross_validation", cfg, seed);
    let n = cfg.replicas as u64;
    report.push(Metric::new(
        "occupation_chi2_p",
        occ.p_value,
        f64::NAN,
        n,
        Tolerance::AtLeast { bound: cfg.alpha },
    ));
    report.push(Metric::new(
        "acceptance_chi2_p",
        acc.p_value,
        f64::NAN,
        n,
        Tolerance::AtLeast { bound: cfg.alpha },
    ));
    report.push(Metric::new(
        "occupation_chi2_dof",
        occ.dof,
        0.0,
        n,
        Tolerance::Info,
    ));
    report.push(Metric::new(
        "acceptance_chi2_dof",
        acc.dof,
        0.0,
        n,
        Tolerance::Info,
    ));
    report.table(
        "final_state_counts",
        &serde_json::json!({"sufficient_statistic": ha, "full_coordinate": hb}),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cross_validation_agrees() {
        let cfg = CrossValConfig {
            dimension: 16,
            replicas: 300,
            steps: 200,
            ..Default::default()
        };
        let r = cross_validation(&cfg, 2).unwrap();
        assert!(r.passed(), "{:?}", r.failures());
        assert!(r.metric("acceptance_chi2_dof").unwrap().estimate.unwrap() > 5.0);
    }
}
