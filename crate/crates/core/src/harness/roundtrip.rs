use serde::{Deserialize, Serialize};

use super::{par_map, ExperimentReport, Metric, Tolerance};
use crate::error::{domain, Result};
use crate::ladder::{build_ladder, Ladder, Spacing};
use crate::model::MixtureTarget;
use crate::seed::replica_rng;
use crate::sim::{Chain, FullCoordinateSampler, ModeSampler, SufficientStatSampler, Trace};

/// Rung 0, then the first visit to the top rung, then the next visit to rung 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub start_step: u64,
    pub jump_step: u64,
    pub end_step: u64,
    pub start_time: f64,
    pub end_time: f64,
}

impl RoundTrip {
    pub fn raw_steps(&self) -> u64 {
        self.end_step - self.start_step
    }

    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Start,
    Ascending {
        start: u64,
        start_time: f64,
    },
    Descending {
        start: u64,
        start_time: f64,
        jump: u64,
    },
}

/// Streaming three-phase scan; consecutive round trips share endpoints.
#[derive(Debug, Clone)]
pub struct RoundTripTracker {
    k: usize,
    phase: Phase,
}

impl RoundTripTracker {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return domain("round trips need a ladder with at least two rungs");
        }
        Ok(RoundTripTracker {
            k,
            phase: Phase::Start,
        })
    }

    pub fn observe(&mut self, step: u64, time: f64, rung: usize) -> Option<RoundTrip> {
        match self.phase {
            Phase::Start => {
                if rung == 0 {
                    self.phase = Phase::Ascending {
                        start: step,
                        start_time: time,
                    };
                }
                None
            }
            Phase::Ascending { start, start_time } => {
                if rung == self.k {
                    self.phase = Phase::Descending {
                        start,
                        start_time,
                        jump: step,
                    };
                }
                None
            }
            Phase::Descending {
                start,
                start_time,
                jump,
            } => {
                if rung != 0 {
                    return None;
                }
                self.phase = Phase::Ascending {
                    start: step,
                    start_time: time,
                };
                Some(RoundTrip {
                    start_step: start,
                    jump_step: jump,
                    end_step: step,
                    start_time,
                    end_time: time,
                })
            }
        }
    }
}

pub fn round_trips(trace: &Trace) -> Vec<RoundTrip> {
    let Ok(mut tracker) = RoundTripTracker::new(trace.k()) else {
        return Vec::new();
    };
    trace
        .records
        .iter()
        .filter_map(|r| tracker.observe(r.step, r.time, r.rung))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    SufficientStatistic,
    FullCoordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexityConfig {
    pub dims: Vec<usize>,
    pub spacing: Spacing,
    pub ell0: f64,
    /// `betamax = betamax_factor * d`.
    pub betamax_factor: f64,
    pub w1: f64,
    pub r1: f64,
    pub r2: f64,
    pub replicas: usize,
    /// Round trips wanted per dimension, spread over the replicas.
    pub round_trips: usize,
    /// Hard cap on iterations per replica.
    pub max_steps: u64,
    pub sampler: SamplerKind,
    /// Largest allowed max/min of the normalised times.
    pub flat_factor: f64,
    pub threads: usize,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        ComplexityConfig {
            dims: vec![16, 64, 256, 1024],
            spacing: Spacing::Standard,
            ell0: 2.38,
            betamax_factor: 1.0,
            w1: 0.5,
            r1: 2.0,
            r2: 2.0,
            replicas: 8,
            round_trips: 400,
            max_steps: 200_000_000,
            sampler: SamplerKind::SufficientStatistic,
            flat_factor: 2.0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub d: usize,
    pub k: usize,
    pub betamax: f64,
    pub h_betamax: f64,
    pub replicas: usize,
    pub round_trips: u64,
    /// Some replica hit the step cap before finishing its share of trips.
    pub censored: bool,
    pub mean_steps: f64,
    pub se_steps: f64,
    /// Mean duration on the rate-`d` clock (`mean_steps / d`).
    pub mean_time: f64,
    /// `mean_steps / (d ln^2 d)`.
    pub ratio_d_log2: f64,
    /// `mean_steps / d`.
    pub ratio_d: f64,
}

fn replica_trips<M: ModeSampler>(
    mut chain: Chain<M>,
    want: u64,
    cap: u64,
    seed: u64,
    stream: u64,
) -> (f64, u64, bool) {
    let mut rng = replica_rng(seed, stream);
    let mut tracker = RoundTripTracker::new(chain.ladder().k()).expect("k >= 1 checked by caller");
    tracker.observe(0, 0.0, chain.state().rung);
    let (mut total, mut count) = (0.0, 0u64);
    for step in 1..=cap {
        let info = chain.step(&mut rng);
        if let Some(rt) = tracker.observe(step, 0.0, info.rung) {
            total += rt.raw_steps() as f64;
            count += 1;
            if count >= want {
                return (total, count, false);
            }
        }
    }
    (total, count, true)
}

/// One row of the scan at dimension `d`.
pub fn complexity_row(cfg: &ComplexityConfig, d: usize, seed: u64) -> Result<ComplexityRow> {
    let target = MixtureTarget::two_modes(cfg.w1, cfg.r1, cfg.r2, d)?;
    let betamax = cfg.betamax_factor * d as f64;
    let ladder: Ladder = build_ladder(d, betamax, cfg.ell0, cfg.spacing)?;
    if ladder.k() == 0 {
        return domain(format!("d = {d}: ladder has a single rung"));
    }
    let replicas = cfg.replicas.max(1);
    let want = cfg.round_trips.div_ceil(replicas) as u64;
    let results = par_map(replicas, cfg.threads, |i| {
        // stream id: dimension in the upper half, replica in the lower
        let stream = ((d as u64) << 32) | i as u64;
        let start_mode = i % 2;
        match cfg.sampler {
            SamplerKind::SufficientStatistic => {
                let chain = Chain::new(
                    SufficientStatSampler::new(target.clone()),
                    ladder.clone(),
                    start_mode,
                    0,
                )
                .expect("valid");
                replica_trips(chain, want, cfg.max_steps, seed, stream)
            }
            SamplerKind::FullCoordinate => {
                let chain = Chain::new(
                    FullCoordinateSampler::new(target.clone()),
                    ladder.clone(),
                    start_mode,
                    0,
                )
                .expect("valid");
                replica_trips(chain, want, cfg.max_steps, seed, stream)
            }
        }
    });
    let batches: Vec<(f64, f64)> = results.iter().map(|&(s, c, _)| (s, c as f64)).collect();
    let trips: u64 = results.iter().map(|r| r.1).sum();
    let (mean, se) = crate::stats::ratio_estimate(&batches);
    let dl = d as f64;
    let ln = dl.ln();
    Ok(ComplexityRow {
        d,
        k: ladder.k(),
        betamax: ladder.betamax(),
        h_betamax: ladder.h_betamax(),
        replicas,
        round_trips: trips,
        censored: results.iter().any(|r| r.2),
        mean_steps: mean,
        se_steps: se,
        mean_time: mean / dl,
        ratio_d_log2: mean / (dl * ln * ln),
        ratio_d: mean / dl,
    })
}

fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Mean round-trip time across dimensions, with flatness of the normalised
/// times: `T / (d ln^2 d)` for standard spacing and `T / d` for QuanTA spacing,
/// which must also make `T / (d ln^2 d)` strictly decreasing.
pub fn complexity_scan(cfg: &ComplexityConfig, seed: u64) -> Result<ExperimentReport> {
    if cfg.dims.len() < 2 {
        return domain("complexity scan needs at least two dimensions");
    }
    cfg.spacing.validate()?;
    let rows = cfg
        .dims
        .iter()
        .map(|&d| complexity_row(cfg, d, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new("complexity", cfg, seed);
    let trips: u64 = rows.iter().map(|r| r.round_trips).sum();
    let censored = rows
        .iter()
        .filter(|r| r.censored || r.round_trips == 0)
        .count();
    report.push(Metric::new(
        "censored_dimensions",
        censored as f64,
        0.0,
        rows.len() as u64,
        Tolerance::AtMost { bound: 0.0 },
    ));
    let std_ratios: Vec<f64> = rows.iter().map(|r| r.ratio_d_log2).collect();
    let lin_ratios: Vec<f64> = rows.iter().map(|r| r.ratio_d).collect();
    match cfg.spacing {
        Spacing::Standard => {
            report.push(Metric::new(
                "flatness_d_log2",
                spread(&std_ratios),
                f64::NAN,
                trips,
                Tolerance::AtMost {
                    bound: cfg.flat_factor,
                },
            ));
            report.push(Metric::new(
                "flatness_d",
                spread(&lin_ratios),
                f64::NAN,
                trips,
                Tolerance::Info,
            ));
        }
        Spacing::Quanta { .. } => {
            report.push(Metric::new(
                "flatness_d",
                spread(&lin_ratios),
                f64::NAN,
                trips,
                Tolerance::AtMost {
                    bound: cfg.flat_factor,
                },
            ));
            let decreasing = std_ratios.windows(2).all(|w| w[1] < w[0]);
            report.push(Metric::flag(
                "d_log2_strictly_decreasing",
                decreasing,
                trips,
            ));
            report.push(Metric::new(
                "flatness_d_log2",
                spread(&std_ratios),
                f64::NAN,
                trips,
                Tolerance::Info,
            ));
        }
    }
    report.table("rows", &rows);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Record;

    fn synthetic(rungs: &[usize], k: usize) -> Trace {
        let records = rungs
            .iter()
            .enumerate()
            .map(|(i, &r)| Record {
                step: i as u64,
                time: i as f64 * 0.5,
                mode: 0,
                rung: r,
                beta: r as f64 + 1.0,
                direction: 0,
                accepted: false,
            })
            .collect();
        Trace {
            seed: None,
            dimension: 2,
            betas: (0..=k).map(|i| i as f64 + 1.0).collect(),
            records,
        }
    }

    #[test]
    fn synthetic_round_trip() {
        let t = synthetic(&[0, 1, 2, 3, 2, 3, 2, 1, 0, 1], 3);
        let rts = round_trips(&t);
        assert_eq!(rts.len(), 1);
        let rt = rts[0];
        assert_eq!((rt.start_step, rt.jump_step, rt.end_step), (0, 3, 8));
        assert_eq!(rt.raw_steps(), 8);
        assert_eq!(rt.duration(), 4.0);
    }

    #[test]
    fn trips_chain_end_to_start() {
        let t = synthetic(&[1, 0, 0, 1, 2, 1, 0, 1, 2, 2, 1, 0], 2);
        let rts = round_trips(&t);
        assert_eq!(rts.len(), 2);
        assert_eq!(
            (rts[0].start_step, rts[0].jump_step, rts[0].end_step),
            (1, 4, 6)
        );
        assert_eq!(
            (rts[1].start_step, rts[1].jump_step, rts[1].end_step),
            (6, 8, 11)
        );
        for rt in &rts {
            assert!(rt.start_step < rt.jump_step && rt.jump_step < rt.end_step);
        }
    }

    #[test]
    fn no_top_visit_means_no_trip() {
        assert!(round_trips(&synthetic(&[0, 1, 2, 1, 0, 1, 0], 3)).is_empty());
        assert!(round_trips(&synthetic(&[0, 0, 0], 0)).is_empty());
    }

    #[test]
    fn small_scan_reports_both_ratio_columns() {
        let cfg = ComplexityConfig {
            dims: vec![16, 64],
            spacing: Spacing::Quanta { k: 3.0 },
            round_trips: 40,
            replicas: 2,
            ..Default::default()
        };
        let r = complexity_scan(&cfg, 3).unwrap();
        let rows = r.tables["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert!(row.get("ratio_d").is_some() && row.get("ratio_d_log2").is_some());
        }
        assert!(r.metric("flatness_d").is_some());
    }
}
