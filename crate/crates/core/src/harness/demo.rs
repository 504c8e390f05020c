//! Five-dimensional two-mode skew-normal example with `beta_max = 256`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{ExperimentReport, Metric, Tolerance};
use crate::error::{Error, Result};
use crate::ladder::{build_ladder, Ladder, Spacing};
use crate::numeric::{adaptive_simpson, log_normal_cdf};
use crate::seed::master_rng;
use crate::sim::{Chain, ModeSampler};
use crate::stats::mean_se;

/// `(2 / scale) phi(y) Phi(shape y)` with `y = (x - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewNormal {
    pub center: f64,
    pub scale: f64,
    pub shape: f64,
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

impl SkewNormal {
    pub fn log_density(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.scale;
        std::f64::consts::LN_2 - self.scale.ln() - LN_SQRT_2PI - 0.5 * y * y
            + log_normal_cdf(self.shape * y)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }
}

/// Inverse CDF of one tempered coordinate law on a fixed grid, with its log
/// normaliser.
#[derive(Debug, Clone)]
struct Table {
    xs: Vec<f64>,
    cdf: Vec<f64>,
    log_z: f64,
}

/// Log-density cutoff defining the tabulated support.
const CUTOFF: f64 = 40.0;
// batch means for the occupancy standard error
const BATCHES: u64 = 50;

impl Table {
    fn build(g: &SkewNormal, beta: f64, points: usize) -> Result<Table> {
        // locate the support on a coarse scan, then tabulate
        let (lo, hi) = (g.center - 15.0 * g.scale, g.center + 15.0 * g.scale);
        let n = 30_001;
        let step = (hi - lo) / (n - 1) as f64;
        let lg: Vec<f64> = (0..n)
            .map(|i| g.log_density(lo + i as f64 * step))
            .collect();
        let max = lg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let inside = |v: f64| beta * (v - max) > -CUTOFF;
        let first = lg
            .iter()
            .position(|&v| inside(v))
            .ok_or_else(|| Error::Quadrature("empty support".into()))?;
        let last = lg.iter().rposition(|&v| inside(v)).expect("first exists");
        let a = lo + first.saturating_sub(1) as f64 * step;
        let b = lo + (last + 1).min(n - 1) as f64 * step;

        let f = |x: f64| (beta * (g.log_density(x) - max)).exp();
        let integral = adaptive_simpson(f, a, b, 1e-13)
            .filter(|v| *v > 0.0)
            .ok_or_else(|| {
                Error::Quadrature(format!("normaliser at beta = {beta} did not converge"))
            })?;
        let log_z = beta * max + integral.ln();

        let h = (b - a) / (points - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|i| a + i as f64 * h).collect();
        let fx: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let mut cdf = vec![0.0; points];
        for i in 1..points {
            cdf[i] = cdf[i - 1] + 0.5 * h * (fx[i - 1] + fx[i]);
        }
        let total = cdf[points - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Table { xs, cdf, log_z })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self
            .cdf
            .partition_point(|&c| c < u)
            .clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] + frac * (self.xs[i] - self.xs[i - 1])
    }
}

/// Coordinate-wise sampler over tabulated tempered skew-normal modes.
#[derive(Debug, Clone)]
pub struct SkewNormalSampler {
    modes: Vec<SkewNormal>,
    weights: Vec<f64>,
    dimension: usize,
    betas: Vec<f64>,
    // [mode][rung]
    tables: Vec<Vec<Table>>,
}

impl SkewNormalSampler {
    pub fn new(
        modes: Vec<SkewNormal>,
        weights: Vec<f64>,
        dimension: usize,
        ladder: &Ladder,
        points: usize,
    ) -> Result<Self> {
        let betas = ladder.betas().to_vec();
        let tables = modes
            .iter()
            .map(|g| {
                betas
                    .iter()
                    .map(|&b| Table::build(g, b, points))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SkewNormalSampler {
            modes,
            weights,
            dimension,
            betas,
            tables,
        })
    }

    fn rung(&self, beta: f64) -> usize {
        self.betas
            .iter()
            .position(|&b| b == beta)
            .expect("beta is a ladder rung")
    }

    pub fn log_z(&self, mode: usize, rung: usize) -> f64 {
        self.tables[mode][rung].log_z
    }

    /// Index of the mode whose centre is nearest to `x` (all coordinates).
    pub fn allocate(&self, x: &[f64]) -> usize {
        let dist = |g: &SkewNormal| x.iter().map(|v| (v - g.center).powi(2)).sum::<f64>();
        (0..self.modes.len())
            .min_by(|&a, &b| dist(&self.modes[a]).total_cmp(&dist(&self.modes[b])))
            .expect("modes")
    }
}

impl ModeSampler for SkewNormalSampler {
    type State = Vec<f64>;

    fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.dimension]
    }

    fn refresh<R: Rng + ?Sized>(&self, mode: usize, beta: f64, state: &mut Vec<f64>, rng: &mut R) {
        let t = &self.tables[mode][self.rung(beta)];
        state.iter_mut().for_each(|x| *x = t.sample(rng));
    }

    fn log_accept_ratio(&self, mode: usize, beta_from: f64, beta_to: f64, state: &Vec<f64>) -> f64 {
        let g = &self.modes[mode];
        let (zf, zt) = (
            self.log_z(mode, self.rung(beta_from)),
            self.log_z(mode, self.rung(beta_to)),
        );
        state
            .iter()
            .map(|&x| (beta_to - beta_from) * g.log_density(x) - zt + zf)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub dimension: usize,
    pub betamax: f64,
    pub ell0: f64,
    pub weights: [f64; 2],
    pub modes: [SkewNormal; 2],
    pub steps: u64,
    /// Iterations exported to the trace figures.
    pub trace_steps: u64,
    pub table_points: usize,
    pub marginal_grid: (f64, f64, usize),
    pub occupancy_tol: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            dimension: 5,
            betamax: 256.0,
            ell0: 2.38,
            weights: [0.7, 0.3],
            modes: [
                SkewNormal {
                    center: -20.0,
                    scale: 1.0,
                    shape: 10.0,
                },
                SkewNormal {
                    center: 20.0,
                    scale: 2.0,
                    shape: 10.0,
                },
            ],
            steps: 1_000_000,
            trace_steps: 20_000,
            table_points: 2048,
            marginal_grid: (-30.0, 45.0, 15_001),
            occupancy_tol: 0.03,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutput {
    pub report: ExperimentReport,
    /// `x,density` of the first-coordinate marginal.
    pub marginal_csv: String,
    /// `n,t,beta,mode`.
    pub beta_trace_csv: String,
    /// `n,t,value` with `value = s log(beta_max / beta)`.
    pub transformed_trace_csv: String,
    pub beta_trace_svg: String,
    pub transformed_trace_svg: String,
}

/// Runs the example and returns the report together with the figure data.
pub fn demo_scenario(cfg: &DemoConfig, seed: u64) -> Result<DemoOutput> {
    let d = cfg.dimension;
    let ladder = build_ladder(d, cfg.betamax, cfg.ell0, Spacing::Standard)?;
    let k = ladder.k();
    let sampler = SkewNormalSampler::new(
        cfg.modes.to_vec(),
        cfg.weights.to_vec(),
        d,
        &ladder,
        cfg.table_points,
    )?;

    // first-coordinate marginal
    let (lo, hi, n) = cfg.marginal_grid;
    let step = (hi - lo) / (n - 1) as f64;
    let mut marginal_csv = String::from("x,density\n");
    let mut integral = 0.0;
    let mut prev = None;
    for i in 0..n {
        let x = lo + i as f64 * step;
        let dens: f64 = cfg
            .weights
            .iter()
            .zip(&cfg.modes)
            .map(|(w, g)| w * g.density(x))
            .sum();
        marginal_csv.push_str(&format!("{x},{dens}\n"));
        if let Some(p) = prev {
            integral += 0.5 * step * (p + dens);
        }
        prev = Some(dens);
    }

    let mut rng = master_rng(seed);
    let clock = Exp::new(d as f64).expect("d >= 1");
    let mut chain = Chain::new(sampler.clone(), ladder.clone(), 0, 0)?;
    let mut beta_csv = String::from("n,t,beta,mode\n");
    let mut trans_csv = String::from("n,t,value\n");
    let (mut ts, mut bs, mut vs, mut ms) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut time = 0.0;
    let (mut in_first, mut bottom, mut bottom_first) = (0u64, 0u64, 0u64);
    let (mut switches, mut bad_switches, mut misallocated) = (0u64, 0u64, 0u64);
    let batches = BATCHES.min(cfg.steps.max(1)) as usize;
    let batch_len = cfg.steps.div_ceil(batches as u64);
    let mut batch_first = vec![0f64; batches];
    let mut batch_size = vec![0f64; batches];
    let mut prev_mode = chain.state().mode;
    let mut prev_beta = ladder.beta(0);
    for it in 1..=cfg.steps {
        let info = chain.step(&mut rng);
        time += clock.sample(&mut rng);
        let st = chain.state();
        let mode = sampler.allocate(&st.repr);
        misallocated += (mode != info.mode) as u64;
        let beta = ladder.beta(info.rung);
        if mode != prev_mode {
            switches += 1;
            // the jump happens at the start of an iteration on the top rung
            bad_switches += (prev_beta != ladder.betamax()) as u64;
        }
        in_first += (mode == 0) as u64;
        let b = ((it - 1) / batch_len) as usize;
        batch_size[b] += 1.0;
        batch_first[b] += (mode == 0) as u8 as f64;
        if info.rung == 0 {
            bottom += 1;
            bottom_first += (mode == 0) as u64;
        }
        if it <= cfg.trace_steps {
            let s = if mode == 0 { 1.0 } else { -1.0 };
            let value = s * (cfg.betamax / beta).ln();
            beta_csv.push_str(&format!("{it},{time},{beta},{}\n", mode + 1));
            trans_csv.push_str(&format!("{it},{time},{value}\n"));
            ts.push(time);
            bs.push(beta);
            vs.push(value);
            ms.push(mode);
        }
        prev_mode = mode;
        prev_beta = beta;
    }

    let mut report = ExperimentReport::new("demo", cfg, seed);
    let occ = in_first as f64 / cfg.steps as f64;
    let fractions: Vec<f64> = batch_first
        .iter()
        .zip(&batch_size)
        .filter(|(_, &n)| n > 0.0)
        .map(|(f, n)| f / n)
        .collect();
    let (_, se) = mean_se(&fractions);
    report.push(Metric::new(
        "mode1_occupancy",
        occ,
        se,
        cfg.steps,
        Tolerance::Within {
            target: cfg.weights[0],
            tol: cfg.occupancy_tol,
        },
    ));
    let bocc = bottom_first as f64 / bottom.max(1) as f64;
    report.push(Metric::new(
        "mode1_occupancy_at_beta_1",
        bocc,
        f64::NAN,
        bottom,
        Tolerance::Info,
    ));
    report.push(Metric::new(
        "mode_switches",
        switches as f64,
        0.0,
        cfg.steps,
        Tolerance::Info,
    ));
    report.push(Metric::new(
        "switches_off_top_rung",
        bad_switches as f64,
        0.0,
        switches,
        Tolerance::AtMost { bound: 0.0 },
    ));
    report.push(Metric::new(
        "allocation_disagreements",
        misallocated as f64,
        0.0,
        cfg.steps,
        Tolerance::Info,
    ));
    report.push(Metric::new(
        "marginal_integral",
        integral,
        0.0,
        n as u64,
        Tolerance::Within {
            target: 1.0,
            tol: 1e-6,
        },
    ));
    report.table("ladder", &ladder.betas());
    let log_z: Vec<Vec<f64>> = (0..2)
        .map(|m| (0..=k).map(|r| sampler.log_z(m, r)).collect())
        .collect();
    report.table("log_normalisers", &log_z);

    let beta_trace_svg =
        crate::svg::scatter("beta trace (grey: mode 1, black: mode 2)", &ts, &bs, &ms);
    let transformed_trace_svg = crate::svg::line("s log(beta_max / beta)", &ts, &vs);
    Ok(DemoOutput {
        report,
        marginal_csv,
        beta_trace_csv: beta_csv,
        transformed_trace_csv: trans_csv,
        beta_trace_svg,
        transformed_trace_svg,
    })
}
