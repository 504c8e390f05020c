use super::acceptance::{acceptance_profile, AcceptanceTally};
use super::roundtrip::{round_trips, SamplerKind};
use super::{par_map, ExperimentReport, Metric, Tolerance};
use crate::config::RunConfig;
use crate::error::Result;
use crate::ladder::Ladder;
use crate::seed::replica_rng;
use crate::sim::{run, Chain, FullCoordinateSampler, ModeSampler, SufficientStatSampler, Trace};
use crate::stats::mean_se;
use crate::transform::{poissonize, to_h, to_w, to_z, TransformedPath};

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub report: ExperimentReport,
    pub ladder: Ladder,
    pub traces: Vec<Trace>,
}

fn one_replica<M: ModeSampler>(
    sampler: M,
    cfg: &RunConfig,
    ladder: &Ladder,
    seed: u64,
    replica: usize,
) -> Trace {
    let mut rng = replica_rng(seed, replica as u64);
    let s = &cfg.simulation;
    let mut chain = match s.start_mode {
        Some(m) => Chain::new(sampler, ladder.clone(), m - 1, s.start_rung),
        None => Chain::from_weights(sampler, ladder.clone(), &mut rng).map(|mut c| {
            let mode = c.state().mode;
            c.reset(mode, s.start_rung);
            c
        }),
    }
    .expect("validated config");
    let mut trace = run(&mut chain, s.steps, &mut rng);
    trace.seed = Some(seed);
    trace
}

/// Number of records whose mode differs from the previous record's although
/// the previous record was not on the top rung.
pub fn mode_changes_off_top(trace: &Trace) -> u64 {
    let k = trace.k();
    trace
        .records
        .windows(2)
        .filter(|w| w[1].mode != w[0].mode && w[0].rung != k)
        .count() as u64
}

/// Runs `simulation.replicas` independent chains of the configured target.
pub fn simulate_run(cfg: &RunConfig, seed: u64, threads: usize) -> Result<SimulationOutput> {
    cfg.validate()?;
    let target = cfg.target()?;
    let ladder = cfg.ladder()?;
    let k = ladder.k();
    let modes = target.num_modes();
    let reps = cfg.simulation.replicas;
    let traces: Vec<Trace> = match cfg.simulation.sampler {
        SamplerKind::SufficientStatistic => {
            let s = SufficientStatSampler::new(target.clone());
            par_map(reps, threads, |i| {
                one_replica(s.clone(), cfg, &ladder, seed, i)
            })
        }
        SamplerKind::FullCoordinate => {
            let s = FullCoordinateSampler::new(target.clone());
            par_map(reps, threads, |i| {
                one_replica(s.clone(), cfg, &ladder, seed, i)
            })
        }
    };

    let mut tally = AcceptanceTally::new(k, modes);
    let mut valid = true;
    let mut off_top = 0;
    let mut occupancy = Vec::new();
    let mut trips = Vec::new();
    let mut rung_counts = vec![0u64; k + 1];
    for t in &traces {
        valid &= t.validate().is_ok();
        off_top += mode_changes_off_top(t);
        tally.merge(&AcceptanceTally::from_trace(t, modes));
        let n = t.records.len().saturating_sub(1).max(1) as f64;
        occupancy.push(t.records.iter().skip(1).filter(|r| r.mode == 0).count() as f64 / n);
        t.records
            .iter()
            .skip(1)
            .for_each(|r| rung_counts[r.rung] += 1);
        trips.extend(round_trips(t).iter().map(|r| r.raw_steps() as f64));
    }
    let steps = cfg.simulation.steps * reps as u64;
    let mut report = ExperimentReport::new("simulate", cfg, seed);
    report.push(Metric::flag("traces_valid", valid, reps as u64));
    report.push(Metric::new(
        "mode_changes_off_top_rung",
        off_top as f64,
        0.0,
        steps,
        Tolerance::AtMost { bound: 0.0 },
    ));
    let (a0, n0) = (0..modes).fold((0, 0), |acc, m| {
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
    let (occ, occ_se) = mean_se(&occupancy);
    report.push(Metric::new(
        "mode1_occupancy",
        occ,
        occ_se,
        reps as u64,
        Tolerance::Info,
    ));
    report.push(Metric::new(
        "mode1_weight",
        target.mode(0).weight,
        0.0,
        1,
        Tolerance::Info,
    ));
    let (trip, trip_se) = mean_se(&trips);
    report.push(Metric::new(
        "round_trips",
        trips.len() as f64,
        0.0,
        reps as u64,
        Tolerance::Info,
    ));
    if !trips.is_empty() {
        report.push(Metric::new(
            "mean_round_trip_steps",
            trip,
            trip_se,
            trips.len() as u64,
            Tolerance::Info,
        ));
    }
    let profile = acceptance_profile(&tally, &ladder, &target, cfg.ladder.s_convention, 1000);
    report.table("acceptance_profile", &profile);
    let occupation: Vec<(usize, f64, u64)> = rung_counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (i, ladder.beta(i), c))
        .collect();
    report.table("rung_occupation", &occupation);
    Ok(SimulationOutput {
        report,
        ladder,
        traces,
    })
}

#[derive(Debug, Clone)]
pub struct TransformOutput {
    pub report: ExperimentReport,
    /// X, H, Z and W stages in order.
    pub stages: [TransformedPath; 4],
}

/// Maps a trace through X -> H -> Z -> W and checks the structural facts of
/// each stage.
pub fn transform_run(cfg: &RunConfig, trace: &Trace, seed: u64) -> Result<TransformOutput> {
    cfg.validate()?;
    let ladder = cfg.ladder()?;
    let c = cfg.skew_constants()?;
    let x = poissonize(trace)?;
    let h = to_h(&x, &ladder)?;
    let z = to_z(&h)?;
    let w = to_w(&z, &c)?;
    let n = w.len() as u64;
    let eps = 1e-12;
    let inside = w
        .values
        .iter()
        .all(|&v| v >= c.wmin - eps && v <= c.wmax + eps);
    let zero_only_at_top = trace
        .records
        .iter()
        .zip(&w.values)
        .all(|(r, &v)| (v == 0.0) == (r.rung == trace.k()));
    let end = *w.times.last().expect("nonempty");
    let [neg, _, pos] = w.sign_occupation(end);
    let mut report = ExperimentReport::new("transform", cfg, seed);
    report.push(Metric::flag("w_within_interval", inside, n));
    report.push(Metric::flag(
        "w_zero_exactly_at_top_rung",
        zero_only_at_top,
        n,
    ));
    report.push(Metric::new(
        "mode_changes_off_top_rung",
        mode_changes_off_top(trace) as f64,
        0.0,
        n,
        Tolerance::AtMost { bound: 0.0 },
    ));
    if pos + neg > 0.0 {
        report.push(Metric::new(
            "w_positive_time_fraction",
            pos / (pos + neg),
            f64::NAN,
            1,
            Tolerance::Info,
        ));
    }
    report.push(Metric::new("w_time_horizon", end, 0.0, n, Tolerance::Info));
    report.table("constants", &c);
    Ok(TransformOutput {
        report,
        stages: [x, h, z, w],
    })
}
