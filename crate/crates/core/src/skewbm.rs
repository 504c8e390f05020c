//! Reflecting skew Brownian motion on `[wmin, wmax]` with skew point 0,
//! simulated as a lattice random walk that is biased only at the origin.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::SkewConstants;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewBMConfig {
    pub constants: SkewConstants,
    pub dt: f64,
    pub horizon: f64,
}

impl SkewBMConfig {
    pub fn new(constants: SkewConstants, dt: f64, horizon: f64) -> Result<Self> {
        let cfg = SkewBMConfig {
            constants,
            dt,
            horizon,
        };
        let problems = cfg.problems();
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be positive, got {}", self.dt));
        } else {
            let limit = self.constants.wmax.min(-self.constants.wmin) / 10.0;
            if self.dt.sqrt() >= limit {
                out.push(format!(
                    "sqrt(dt) = {} must be below {limit}",
                    self.dt.sqrt()
                ));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            out.push(format!("horizon must be positive, got {}", self.horizon));
        }
        out
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(&self.constants, self.dt)
    }
}

/// Integer grid `{-n_neg, ..., n_pos}` with spacing `delta`.
///
/// `delta` is chosen so `wmax` is hit exactly; `wmin` is then snapped to the
/// nearest grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub delta: f64,
    pub n_pos: i64,
    pub n_neg: i64,
    pub alpha: f64,
}

impl Lattice {
    pub fn new(constants: &SkewConstants, dt: f64) -> Self {
        let n_pos = (constants.wmax / dt.sqrt()).round().max(1.0) as i64;
        let delta = constants.wmax / n_pos as f64;
        let n_neg = (-constants.wmin / delta).round().max(1.0) as i64;
        let snapped = -(n_neg as f64) * delta;
        let rel = (snapped - constants.wmin).abs() / -constants.wmin;
        if rel > 1e-9 {
            log::warn!(
                "skew BM lattice: dt adjusted to {:e}, wmin snapped from {} to {snapped}",
                delta * delta,
                constants.wmin
            );
        }
        Lattice {
            delta,
            n_pos,
            n_neg,
            alpha: constants.alpha,
        }
    }

    /// Duration of one walk step.
    pub fn dt(&self) -> f64 {
        self.delta * self.delta
    }

    pub fn value(&self, i: i64) -> f64 {
        i as f64 * self.delta
    }

    /// Nearest grid index to `w`, clamped into the interval.
    pub fn index_of(&self, w: f64) -> i64 {
        ((w / self.delta).round() as i64).clamp(-self.n_neg, self.n_pos)
    }

    pub fn steps_for(&self, t: f64) -> u64 {
        (t / self.dt()).round() as u64
    }

    /// Exact stationary mass of `{> 0}` for the lattice walk.
    ///
    /// Detailed balance gives `pi(+1) = 2 alpha pi(0)`, flat interiors and
    /// halved boundary masses.
    pub fn stationary_positive(&self) -> f64 {
        let pos = 2.0 * self.alpha * (self.n_pos as f64 - 0.5);
        let neg = 2.0 * (1.0 - self.alpha) * (self.n_neg as f64 - 0.5);
        pos / (pos + neg + 1.0)
    }
}

/// Single walker on a [`Lattice`].
#[derive(Debug, Clone)]
pub struct SkewWalk {
    lattice: Lattice,
    pos: i64,
}

impl SkewWalk {
    pub fn new(lattice: Lattice, start: f64) -> Self {
        SkewWalk {
            pos: lattice.index_of(start),
            lattice,
        }
    }

    pub fn index(&self) -> i64 {
        self.pos
    }

    pub fn value(&self) -> f64 {
        self.lattice.value(self.pos)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> i64 {
        let up = if self.pos == 0 {
            rng.random::<f64>() < self.lattice.alpha
        } else {
            rng.random::<bool>()
        };
        let mut next = self.pos + if up { 1 } else { -1 };
        // fold back off the walls
        if next > self.lattice.n_pos {
            next = 2 * self.lattice.n_pos - next;
        } else if next < -self.lattice.n_neg {
            next = -2 * self.lattice.n_neg - next;
        }
        self.pos = next;
        next
    }
}

/// Sampled skew BM path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewBMPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SkewBMPath {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// Simulates one path on `[0, horizon]` from `start`, keeping every
/// `record_every`-th lattice step.
pub fn simulate<R: Rng + ?Sized>(
    config: &SkewBMConfig,
    start: f64,
    record_every: u64,
    rng: &mut R,
) -> SkewBMPath {
    let lattice = config.lattice();
    let mut walk = SkewWalk::new(lattice, start);
    let n = lattice.steps_for(config.horizon);
    let every = record_every.max(1);
    let mut path = SkewBMPath {
        times: vec![0.0],
        values: vec![walk.value()],
    };
    for i in 1..=n {
        walk.step(rng);
        if i % every == 0 {
            path.times.push(i as f64 * lattice.dt());
            path.values.push(walk.value());
        }
    }
    path
}

/// `alpha wmax / (alpha wmax + (1 - alpha) |wmin|)`, which reduces to `w1`.
pub fn stationary_occupation(constants: &SkewConstants) -> f64 {
    let a = constants.alpha;
    a * constants.wmax / (a * constants.wmax + (1.0 - a) * -constants.wmin)
}

/// Occupation and excursion counts of one long run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WalkSummary {
    pub steps: u64,
    pub positive_steps: u64,
    pub zero_steps: u64,
    pub positive_excursions: u64,
    pub negative_excursions: u64,
}

impl WalkSummary {
    pub fn positive_fraction(&self) -> f64 {
        self.positive_steps as f64 / self.steps as f64
    }

    pub fn excursions(&self) -> u64 {
        self.positive_excursions + self.negative_excursions
    }

    pub fn positive_excursion_fraction(&self) -> f64 {
        self.positive_excursions as f64 / self.excursions() as f64
    }
}

/// Streams a run over the configured horizon without storing the path.
/// Occupation counts the state held after each step.
pub fn run_summary<R: Rng + ?Sized>(config: &SkewBMConfig, start: f64, rng: &mut R) -> WalkSummary {
    let lattice = config.lattice();
    let mut walk = SkewWalk::new(lattice, start);
    let mut s = WalkSummary::default();
    for _ in 0..lattice.steps_for(config.horizon) {
        let from_zero = walk.index() == 0;
        let i = walk.step(rng);
        s.steps += 1;
        if i > 0 {
            s.positive_steps += 1;
        } else if i == 0 {
            s.zero_steps += 1;
        }
        if from_zero {
            if i > 0 {
                s.positive_excursions += 1;
            } else {
                s.negative_excursions += 1;
            }
        }
    }
    s
}

/// Values at each of `times` (sorted, at most the horizon) for `n_replicas`
/// independent paths from `start`. Result is indexed `[time][replica]`.
/// Replica `i` uses `rng_for(i)`.
pub fn marginal_samples<R, F>(
    config: &SkewBMConfig,
    start: f64,
    times: &[f64],
    n_replicas: usize,
    mut rng_for: F,
) -> Result<Vec<Vec<f64>>>
where
    R: Rng,
    F: FnMut(usize) -> R,
{
    if times.windows(2).any(|w| w[1] < w[0]) {
        return crate::error::domain("marginal times must be sorted");
    }
    if let Some(&t) = times.iter().find(|&&t| t < 0.0 || t > config.horizon) {
        return crate::error::domain(format!("time {t} outside [0, {}]", config.horizon));
    }
    let lattice = config.lattice();
    let targets: Vec<u64> = times.iter().map(|&t| lattice.steps_for(t)).collect();
    let mut out = vec![Vec::with_capacity(n_replicas); times.len()];
    for rep in 0..n_replicas {
        let mut rng = rng_for(rep);
        let mut walk = SkewWalk::new(lattice, start);
        let mut done = 0u64;
        for (slot, &target) in targets.iter().enumerate() {
            while done < target {
                walk.step(&mut rng);
                done += 1;
            }
            out[slot].push(walk.value());
        }
    }
    Ok(out)
}

/// Single-time convenience wrapper around [`marginal_samples`].
pub fn marginal_sample<R, F>(
    config: &SkewBMConfig,
    start: f64,
    t: f64,
    n_replicas: usize,
    rng_for: F,
) -> Result<Vec<f64>>
where
    R: Rng,
    F: FnMut(usize) -> R,
{
    Ok(marginal_samples(config, start, &[t], n_replicas, rng_for)?.remove(0))
}

/// Exact law of the lattice walk after `steps` steps from `start`, as
/// probabilities over indices `-n_neg..=n_pos`.
pub fn lattice_law(lattice: &Lattice, start: f64, steps: u64) -> Vec<f64> {
    let (lo, hi) = (-lattice.n_neg, lattice.n_pos);
    let size = (hi - lo + 1) as usize;
    let idx = |i: i64| (i - lo) as usize;
    let mut p = vec![0.0; size];
    p[idx(lattice.index_of(start))] = 1.0;
    let mut q = vec![0.0; size];
    for _ in 0..steps {
        q.iter_mut().for_each(|v| *v = 0.0);
        for i in lo..=hi {
            let m = p[idx(i)];
            if m == 0.0 {
                continue;
            }
            let up = if i == 0 { lattice.alpha } else { 0.5 };
            let fold = |j: i64| {
                if j > hi {
                    2 * hi - j
                } else if j < lo {
                    2 * lo - j
                } else {
                    j
                }
            };
            q[idx(fold(i + 1))] += m * up;
            q[idx(fold(i - 1))] += m * (1.0 - up);
        }
        std::mem::swap(&mut p, &mut q);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::replica_rng;
    use crate::stats::{effective_n, kolmogorov_pvalue, ks_two_sample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{Binomial, DiscreteCDF};

    fn consts(s1: f64, s2: f64, w1: f64) -> SkewConstants {
        SkewConstants::from_parts(s1, s2, w1).unwrap()
    }

    #[test]
    fn occupation_identity_is_w1() {
        for (s1, s2, w1) in [
            (0.3, 0.9, 0.5),
            (0.5, 0.5, 0.7),
            (0.63, 0.48, 0.3),
            (0.1, 0.99, 0.9),
        ] {
            let c = consts(s1, s2, w1);
            assert!((stationary_occupation(&c) - w1).abs() < 1e-14);
        }
    }

    #[test]
    fn config_validation() {
        let c = consts(0.5, 0.5, 0.5);
        assert!(SkewBMConfig::new(c, 1e-4, 1.0).is_ok());
        // sqrt(dt) must be well below the interval half-widths (here 2)
        assert!(SkewBMConfig::new(c, 0.05, 1.0).is_err());
        match SkewBMConfig::new(c, -1.0, 0.0) {
            Err(Error::Config(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lattice_hits_wmax_and_snaps_wmin() {
        let c = consts(0.6, 0.7, 0.5);
        let l = Lattice::new(&c, 1e-4);
        assert!((l.value(l.n_pos) - c.wmax).abs() < 1e-12);
        assert!((l.value(-l.n_neg) - c.wmin).abs() <= l.delta / 2.0 + 1e-12);
        assert!((l.dt() / 1e-4 - 1.0).abs() < 0.02);
    }

    #[test]
    fn walk_stays_inside_and_moves_by_one() {
        let c = consts(0.5, 0.8, 0.4);
        let l = Lattice::new(&c, 0.01);
        let mut w = SkewWalk::new(l, c.wmax);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut prev = w.index();
        for _ in 0..200_000 {
            let i = w.step(&mut rng);
            assert!(i >= -l.n_neg && i <= l.n_pos);
            assert_eq!((i - prev).abs(), 1);
            prev = i;
        }
    }

    #[test]
    fn excursion_sign_binomial_test() {
        // 1e5 excursions at alpha = 0.7, two-sided 1% binomial test
        let c = consts(0.5, 0.5, 0.7);
        let cfg = SkewBMConfig::new(c, 1e-2, 1e9).unwrap();
        let l = cfg.lattice();
        let mut w = SkewWalk::new(l, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut pos, mut total) = (0u64, 0u64);
        while total < 100_000 {
            let at_zero = w.index() == 0;
            let i = w.step(&mut rng);
            if at_zero {
                total += 1;
                pos += (i > 0) as u64;
            }
        }
        let b = Binomial::new(0.7, total).unwrap();
        let lower = b.cdf(pos);
        let upper = 1.0 - if pos == 0 { 0.0 } else { b.cdf(pos - 1) };
        assert!(2.0 * lower.min(upper) > 0.01, "{pos}/{total}");
    }

    #[test]
    fn long_run_occupation_close_to_w1() {
        for w1 in [0.3, 0.7] {
            let c = consts(0.48, 0.63, w1);
            let cfg = SkewBMConfig::new(c, 1e-3, 3e4).unwrap();
            let s = run_summary(&cfg, 0.0, &mut ChaCha8Rng::seed_from_u64(2));
            assert!(
                (s.positive_fraction() - w1).abs() < 0.02,
                "{w1}: {}",
                s.positive_fraction()
            );
        }
    }

    #[test]
    fn lattice_stationary_agrees_with_identity() {
        let c = consts(0.48, 0.63, 0.3);
        let l = Lattice::new(&c, 1e-6);
        assert!((l.stationary_positive() - 0.3).abs() < 2e-3);
        // and is the fixed point of the exact DP
        let l = Lattice::new(&c, 0.01);
        let p = lattice_law(&l, 0.0, 200_001);
        let q = lattice_law(&l, 0.0, 200_000);
        let avg: f64 = (0..p.len())
            .map(|j| 0.5 * (p[j] + q[j]))
            .zip(-l.n_neg..=l.n_pos)
            .filter(|(_, i)| *i > 0)
            .map(|(v, _)| v)
            .sum();
        assert!(
            (avg - l.stationary_positive()).abs() < 1e-9,
            "{avg} vs {}",
            l.stationary_positive()
        );
    }

    #[test]
    fn lattice_law_is_a_distribution() {
        let c = consts(0.5, 0.8, 0.4);
        let l = Lattice::new(&c, 0.01);
        for n in [0u64, 1, 7, 500] {
            let p = lattice_law(&l, c.wmax, n);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let p0 = lattice_law(&l, c.wmax, 0);
        assert_eq!(p0[(l.n_pos + l.n_neg) as usize], 1.0);
    }

    #[test]
    fn marginal_matches_exact_lattice_law() {
        let c = consts(0.5, 0.8, 0.4);
        let cfg = SkewBMConfig::new(c, 1e-2, 2.0).unwrap();
        let l = cfg.lattice();
        let t = 1.0;
        let draws = marginal_sample(&cfg, c.wmax, t, 20_000, |i| replica_rng(9, i as u64)).unwrap();
        let law = lattice_law(&l, c.wmax, l.steps_for(t));
        // chi-square against the exact law, pooling by sign of the value
        let mut emp = vec![0u64; law.len()];
        for &v in &draws {
            emp[(l.index_of(v) + l.n_neg) as usize] += 1;
        }
        let (mut stat, mut dof) = (0.0, 0usize);
        let (mut oe, mut ee) = (0.0, 0.0);
        for (o, p) in emp.iter().zip(&law) {
            oe += *o as f64;
            ee += p * draws.len() as f64;
            if ee >= 10.0 {
                stat += (oe - ee).powi(2) / ee;
                dof += 1;
                oe = 0.0;
                ee = 0.0;
            }
        }
        let pv = crate::stats::chi_square_sf(stat, (dof - 1) as f64);
        assert!(pv > 0.001, "chi2 {stat} on {dof} cells");
    }

    #[test]
    fn marginal_at_zero_is_point_mass() {
        let c = consts(0.5, 0.8, 0.4);
        let cfg = SkewBMConfig::new(c, 1e-2, 2.0).unwrap();
        let m = marginal_sample(&cfg, c.wmax, 0.0, 10, |i| replica_rng(1, i as u64)).unwrap();
        assert!(m.iter().all(|&v| v == c.wmax));
        assert!(marginal_sample(&cfg, 0.0, 3.0, 1, |i| replica_rng(1, i as u64)).is_err());
    }

    #[test]
    fn symmetric_case_is_sign_symmetric() {
        let c = consts(0.5, 0.5, 0.5);
        let cfg = SkewBMConfig::new(c, 1e-2, 30.0).unwrap();
        let m = marginal_sample(&cfg, 0.0, 30.0, 4000, |i| replica_rng(4, i as u64)).unwrap();
        let neg: Vec<f64> = m.iter().map(|v| -v).collect();
        let d = ks_two_sample(&m, &neg);
        assert!(kolmogorov_pvalue(d, effective_n(m.len(), neg.len())) > 0.01);
    }

    #[test]
    fn simulate_records_subsampled_path() {
        let c = consts(0.5, 0.8, 0.4);
        let cfg = SkewBMConfig::new(c, 1e-2, 1.0).unwrap();
        let p = simulate(&cfg, 0.0, 10, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(p.times.len(), p.values.len());
        assert!(p.values.iter().all(|v| *v >= c.wmin - 0.1 && *v <= c.wmax));
        assert!(p.to_csv().starts_with("t,value\n"));
    }
}
