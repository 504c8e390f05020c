use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::excursion::w_tables;
use super::{par_map, ExperimentReport, Metric, Tolerance};
use crate::error::{domain, Result};
use crate::ladder::{build_ladder, skew_constants, SkewConstants, Spacing};
use crate::model::MixtureTarget;
use crate::seed::family_rng;
use crate::sim::{Chain, SufficientStatSampler};
use crate::skewbm::{marginal_samples, run_summary, SkewBMConfig};
use crate::stats::{ks_two_sample, mean_se};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakConfig {
    /// Compared pairwise: the last dimension should beat the first.
    pub dims: Vec<usize>,
    pub t_values: Vec<f64>,
    pub w1: f64,
    pub r1: f64,
    pub r2: f64,
    pub ell0: f64,
    pub betamax_factor: f64,
    pub replicas: usize,
    pub reference_replicas: usize,
    pub reference_dt: f64,
    pub seeds: usize,
    /// Required share of seeds in which the larger dimension is closer.
    pub win_fraction: f64,
    pub threads: usize,
}

impl Default for WeakConfig {
    fn default() -> Self {
        WeakConfig {
            dims: vec![16, 1024],
            t_values: vec![0.5, 1.0, 2.0],
            w1: 0.5,
            r1: 1.0,
            r2: 2.0,
            ell0: 2.38,
            betamax_factor: 1.0,
            replicas: 1000,
            reference_replicas: 5000,
            reference_dt: 4e-4,
            seeds: 20,
            win_fraction: 0.9,
            threads: 1,
        }
    }
}

/// W values at each of `times` for ALPS replicas started on rung 0 in mode 1
/// (so `W_0 = wmax`). Iteration counts between the times are Poisson with
/// mean `dt * d * h(betamax)^2`. Indexed `[time][replica]`.
pub fn alps_w_marginals(
    target: &MixtureTarget,
    ladder: &crate::ladder::Ladder,
    constants: &SkewConstants,
    times: &[f64],
    replicas: usize,
    mut rng_for: impl FnMut(usize) -> rand_chacha::ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return domain("times must be sorted and nonnegative");
    }
    let tables = w_tables(ladder, constants);
    let hmax = ladder.h_betamax();
    let scale = target.dimension() as f64 * hmax * hmax;
    let mut out = vec![Vec::with_capacity(replicas); times.len()];
    for rep in 0..replicas {
        let mut rng = rng_for(rep);
        let mut chain = Chain::new(
            SufficientStatSampler::new(target.clone()),
            ladder.clone(),
            0,
            0,
        )?;
        let mut last = 0.0;
        for (slot, &t) in times.iter().enumerate() {
            let mean = (t - last) * scale;
            let steps = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| crate::Error::Domain(e.to_string()))?
                    .sample(&mut rng) as u64
            } else {
                0
            };
            for _ in 0..steps {
                chain.step(&mut rng);
            }
            let s = chain.state();
            out[slot].push(tables[s.mode.min(1)][s.rung]);
            last = t;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KsRow {
    seed_index: usize,
    d: usize,
    t: f64,
    ks: f64,
}

/// Two-sample KS distance between transformed ALPS marginals and skew Brownian
/// motion marginals, repeated over independent seeds; passes when the largest
/// dimension is closer than the smallest in the required share of seeds.
pub fn weak_convergence_test(cfg: &WeakConfig, seed: u64) -> Result<ExperimentReport> {
    if cfg.dims.len() < 2 {
        return domain("need at least two dimensions");
    }
    let mut times = cfg.t_values.clone();
    times.sort_by(f64::total_cmp);
    let horizon = times.last().copied().unwrap_or(0.0).max(cfg.reference_dt);
    let base = MixtureTarget::two_modes(cfg.w1, cfg.r1, cfg.r2, cfg.dims[0])?;
    let constants = skew_constants(&base, cfg.ell0)?;
    let bm = SkewBMConfig::new(constants, cfg.reference_dt, horizon)?;
    let setups = cfg
        .dims
        .iter()
        .map(|&d| {
            let target = base.with_dimension(d)?;
            let ladder = build_ladder(
                d,
                cfg.betamax_factor * d as f64,
                cfg.ell0,
                Spacing::Standard,
            )?;
            Ok((target, ladder))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_dims = cfg.dims.len() as u32;

    let per_seed = par_map(cfg.seeds, cfg.threads, |s| -> Result<Vec<KsRow>> {
        let fam = |j: u32| (s as u32) * (n_dims + 1) + j;
        let reference =
            marginal_samples(&bm, constants.wmax, &times, cfg.reference_replicas, |i| {
                family_rng(seed, fam(0), i as u32)
            })?;
        let mut rows = Vec::new();
        for (j, (target, ladder)) in setups.iter().enumerate() {
            let alps = alps_w_marginals(target, ladder, &constants, &times, cfg.replicas, |i| {
                family_rng(seed, fam(j as u32 + 1), i as u32)
            })?;
            for (ti, &t) in times.iter().enumerate() {
                rows.push(KsRow {
                    seed_index: s,
                    d: cfg.dims[j],
                    t,
                    ks: ks_two_sample(&alps[ti], &reference[ti]),
                });
            }
        }
        Ok(rows)
    });
    let rows: Vec<KsRow> = per_seed
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let (small, large) = (cfg.dims[0], *cfg.dims.last().expect("nonempty"));
    let mut report = ExperimentReport::new("weak_convergence", cfg, seed);
    for &t in &times {
        let pick = |d: usize| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.d == d && r.t == t)
                .map(|r| r.ks)
                .collect()
        };
        let (a, b) = (pick(small), pick(large));
        let wins = a.iter().zip(&b).filter(|(x, y)| y < x).count();
        let frac = wins as f64 / cfg.seeds as f64;
        let se = (frac * (1.0 - frac) / cfg.seeds as f64).sqrt();
        report.push(Metric::new(
            format!("win_fraction_t={t}"),
            frac,
            se,
            cfg.seeds as u64,
            Tolerance::AtLeast {
                bound: cfg.win_fraction,
            },
        ));
        for (d, v) in [(small, &a), (large, &b)] {
            let (m, se) = mean_se(v);
            report.push(Metric::new(
                format!("mean_ks_d={d}_t={t}"),
                m,
                se,
                v.len() as u64,
                Tolerance::Info,
            ));
        }
    }
    report.table("ks", &rows);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupationConfig {
    pub dimension: usize,
    pub w1_values: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    pub ell0: f64,
    pub betamax_factor: f64,
    pub replicas: usize,
    pub steps_per_replica: u64,
    pub bm_dt: f64,
    pub bm_horizon: f64,
    pub tolerance: f64,
    pub threads: usize,
}

impl Default for OccupationConfig {
    fn default() -> Self {
        OccupationConfig {
            dimension: 1024,
            w1_values: vec![0.3, 0.5, 0.7],
            r1: 1.0,
            r2: 2.0,
            ell0: 2.38,
            betamax_factor: 1.0,
            replicas: 16,
            steps_per_replica: 20_000_000,
            bm_dt: 4e-4,
            bm_horizon: 6000.0,
            tolerance: 0.02,
            threads: 1,
        }
    }
}

/// Long-run share of time with `W > 0`, for ALPS and for skew Brownian motion.
///
/// ALPS replicas start from the stationary law (mode from the weights, rung
/// uniform). Time is counted in iterations: each iteration holds for an
/// independent Exp(`d`) time, so the iteration share is the conditional mean
/// of the Poisson-clock share.
pub fn occupation_experiment(cfg: &OccupationConfig, seed: u64) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("occupation", cfg, seed);
    let d = cfg.dimension;
    for (wi, &w1) in cfg.w1_values.iter().enumerate() {
        let target = MixtureTarget::two_modes(w1, cfg.r1, cfg.r2, d)?;
        let ladder = build_ladder(
            d,
            cfg.betamax_factor * d as f64,
            cfg.ell0,
            Spacing::Standard,
        )?;
        let constants = skew_constants(&target, cfg.ell0)?;
        let k = ladder.k();
        let fam = 2 * wi as u32;
        let alps: Vec<f64> = par_map(cfg.replicas, cfg.threads, |i| {
            let mut rng = family_rng(seed, fam, i as u32);
            let mode = (rng.random::<f64>() >= w1) as usize;
            let rung = rng.random_range(0..=k);
            let mut chain = Chain::new(
                SufficientStatSampler::new(target.clone()),
                ladder.clone(),
                mode,
                rung,
            )
            .expect("valid");
            let mut pos = 0u64;
            for _ in 0..cfg.steps_per_replica {
                let info = chain.step(&mut rng);
                pos += (info.mode == 0 && info.rung < k) as u64;
            }
            pos as f64 / cfg.steps_per_replica as f64
        });
        let bm = SkewBMConfig::new(constants, cfg.bm_dt, cfg.bm_horizon)?;
        let bmf: Vec<f64> = par_map(cfg.replicas, cfg.threads, |i| {
            let mut rng = family_rng(seed, fam + 1, i as u32);
            run_summary(&bm, 0.0, &mut rng).positive_fraction()
        });
        let (ma, sa) = mean_se(&alps);
        let (mb, sb) = mean_se(&bmf);
        let tol = Tolerance::Within {
            target: w1,
            tol: cfg.tolerance,
        };
        report.push(Metric::new(
            format!("alps_positive_fraction_w1={w1}"),
            ma,
            sa,
            cfg.replicas as u64,
            tol.clone(),
        ));
        report.push(Metric::new(
            format!("skewbm_positive_fraction_w1={w1}"),
            mb,
            sb,
            cfg.replicas as u64,
            tol,
        ));
        report.push(Metric::new(
            format!("alps_expected_w1={w1}"),
            w1 * k as f64 / (k + 1) as f64,
            0.0,
            1,
            Tolerance::Info,
        ));
        report.push(Metric::new(
            format!("skewbm_lattice_expected_w1={w1}"),
            bm.lattice().stationary_positive(),
            0.0,
            1,
            Tolerance::Info,
        ));
    }
    Ok(report)
}
