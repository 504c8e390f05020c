//! Reflecting simple symmetric random walk on `{0, ..., m}`, its occupation
//! bound at 0, and lazy birth-death chains built on top of it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::stats::mean_se;

/// Default threshold below which the bound `P(Y_n = 0) <= 2/sqrt(n) + 1/m` is
/// not asserted.
pub const DEFAULT_N0: u64 = 16;

fn reflecting_step(p: &[f64], q: &mut [f64]) {
    let m = p.len() - 1;
    q.iter_mut().for_each(|v| *v = 0.0);
    if m == 0 {
        q[0] = p[0];
        return;
    }
    q[1] += p[0];
    q[m - 1] += p[m];
    for i in 1..m {
        q[i - 1] += 0.5 * p[i];
        q[i + 1] += 0.5 * p[i];
    }
}

/// Exact law of `Y_n` for the reflecting walk started at `initial`.
pub fn exact_distribution(m: usize, n: u64, initial: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return domain("m must be at least 1");
    }
    if initial > m {
        return domain(format!("initial state {initial} outside 0..={m}"));
    }
    let mut p = vec![0.0; m + 1];
    p[initial] = 1.0;
    let mut q = vec![0.0; m + 1];
    for _ in 0..n {
        reflecting_step(&p, &mut q);
        std::mem::swap(&mut p, &mut q);
    }
    Ok(p)
}

/// Stationary measure of the reflecting walk: `1/(2m)` at the ends, `1/m` inside.
pub fn stationary(m: usize) -> Vec<f64> {
    let mut pi = vec![1.0 / m as f64; m + 1];
    pi[0] = 0.5 / m as f64;
    pi[m] = 0.5 / m as f64;
    pi
}

pub fn refrw_rhs(m: usize, n: u64) -> f64 {
    2.0 / (n as f64).sqrt() + 1.0 / m as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `P(Y_n = 0 | Y_0 = initial)` against `2/sqrt(n) + 1/m`.
pub fn verify_refrw_bound(m: usize, n: u64, initial: usize, n0: u64) -> Result<BoundCheck> {
    if n < n0 {
        return domain(format!("n = {n} is below the threshold n0 = {n0}"));
    }
    let lhs = exact_distribution(m, n, initial)?[0];
    let rhs = refrw_rhs(m, n);
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub m_min: usize,
    pub m_max: usize,
    pub n_min: u64,
    pub n_max: u64,
    pub n0: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            m_min: 2,
            m_max: 100,
            n_min: 16,
            n_max: 10_000,
            n0: DEFAULT_N0,
        }
    }
}

/// Worst case over initial states for one `(m, n)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub n: u64,
    pub worst_initial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    /// `(m, n, initial)` triples checked with `n >= max(n_min, n0)`.
    pub checked: u64,
    pub violations: Vec<SweepRow>,
    /// Largest `lhs / rhs` over the checked grid.
    pub max_ratio: f64,
    /// Smallest `n >= 1` at which any `(m, initial)` violates the bound,
    /// including `n` below the threshold.
    pub smallest_violating_n: Option<u64>,
    /// Worst-case rows on a thinned `n` grid, for export.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.checked > 0
    }

    /// CSV with columns `m,n,lhs,rhs,holds` (worst initial state per cell).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,n,initial,lhs,rhs,holds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.m, r.n, r.worst_initial, r.lhs, r.rhs, r.holds
            ));
        }
        out
    }
}

fn export_grid(n: u64) -> bool {
    // powers of two and a roughly logarithmic decimal grid
    n.is_power_of_two()
        || [1u64, 2, 5].iter().any(|&lead| {
            let mut v = lead;
            while v < n {
                v *= 10;
            }
            v == n
        })
}

/// Checks the bound for every `m`, every `n` in range and every initial state.
///
/// The walk is reversible with respect to [`stationary`], so
/// `P_y(Y_n = 0) = pi(0) / pi(y) * P_0(Y_n = y)` and one forward recursion from
/// 0 per `m` yields the left-hand side for all initial states at once.
pub fn sweep(config: &SweepConfig) -> Result<SweepReport> {
    if config.m_min == 0 || config.m_min > config.m_max || config.n_min > config.n_max {
        return domain("empty or invalid sweep grid");
    }
    let start_n = config.n_min.max(config.n0);
    let mut report = SweepReport {
        config: config.clone(),
        checked: 0,
        violations: Vec::new(),
        max_ratio: 0.0,
        smallest_violating_n: None,
        rows: Vec::new(),
    };
    for m in config.m_min..=config.m_max {
        let pi = stationary(m);
        let mut p = vec![0.0; m + 1];
        p[0] = 1.0;
        let mut q = vec![0.0; m + 1];
        for n in 1..=config.n_max {
            reflecting_step(&p, &mut q);
            std::mem::swap(&mut p, &mut q);
            let rhs = refrw_rhs(m, n);
            let (mut worst, mut worst_y) = (f64::NEG_INFINITY, 0);
            for y in 0..=m {
                let lhs = pi[0] / pi[y] * p[y];
                if lhs > worst {
                    worst = lhs;
                    worst_y = y;
                }
            }
            let row = SweepRow {
                m,
                n,
                worst_initial: worst_y,
                lhs: worst,
                rhs,
                holds: worst <= rhs,
            };
            if !row.holds {
                report.smallest_violating_n =
                    Some(report.smallest_violating_n.map_or(n, |s| s.min(n)));
            }
            if n < start_n {
                continue;
            }
            report.checked += (m + 1) as u64;
            report.max_ratio = report.max_ratio.max(worst / rhs);
            if !row.holds {
                report.violations.push(row);
            }
            if export_grid(n) || n == config.n_max {
                report.rows.push(row);
            }
        }
    }
    Ok(report)
}

/// `g(z) = min_j |z - 2 j m|`, folding the integers onto `{0, ..., m}`.
pub fn lift_map(z: i64, m: usize) -> Result<usize> {
    if m == 0 {
        return domain("m must be at least 1");
    }
    let period = 2 * m as i64;
    let r = z.rem_euclid(period);
    Ok(r.min(period - r) as usize)
}

/// Law of `g(S_n)` for the simple symmetric walk `S` on the integers started
/// at `initial`.
pub fn lifted_walk_law(m: usize, n: u64, initial: usize) -> Result<Vec<f64>> {
    if initial > m {
        return domain(format!("initial state {initial} outside 0..={m}"));
    }
    let width = 2 * n as usize + 1;
    let mut p = vec![0.0; width];
    p[n as usize] = 1.0;
    let mut q = vec![0.0; width];
    for _ in 0..n {
        q.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..width {
            if p[i] != 0.0 {
                q[i - 1] += 0.5 * p[i];
                q[i + 1] += 0.5 * p[i];
            }
        }
        std::mem::swap(&mut p, &mut q);
    }
    let mut out = vec![0.0; m + 1];
    for (i, &v) in p.iter().enumerate() {
        let z = initial as i64 + i as i64 - n as i64;
        out[lift_map(z, m)?] += v;
    }
    Ok(out)
}

/// Runs of a path: distinct successive states and how long each was held.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpDecomposition<T> {
    pub jump_chain: Vec<T>,
    pub multiplicities: Vec<usize>,
}

impl<T: Clone + PartialEq> JumpDecomposition<T> {
    pub fn expand(&self) -> Vec<T> {
        self.jump_chain
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(s, &k)| std::iter::repeat_n(s.clone(), k))
            .collect()
    }

    /// Total holding time spent in `state`.
    pub fn occupation(&self, state: &T) -> usize {
        self.jump_chain
            .iter()
            .zip(&self.multiplicities)
            .filter(|(s, _)| *s == state)
            .map(|(_, &k)| k)
            .sum()
    }
}

pub fn jump_decompose<T: Clone + PartialEq>(path: &[T]) -> Result<JumpDecomposition<T>> {
    if path.is_empty() {
        return domain("cannot decompose an empty path");
    }
    let mut jd = JumpDecomposition {
        jump_chain: vec![path[0].clone()],
        multiplicities: vec![1],
    };
    for s in &path[1..] {
        if jd.jump_chain.last() == Some(s) {
            *jd.multiplicities.last_mut().expect("nonempty") += 1;
        } else {
            jd.jump_chain.push(s.clone());
            jd.multiplicities.push(1);
        }
    }
    Ok(jd)
}

/// Nearest-neighbour chain on `{0, ..., m}` with holding probabilities `hold`
/// and symmetric interior moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathChain {
    m: usize,
    hold: Vec<f64>,
}

impl BirthDeathChain {
    pub fn new(m: usize, hold: Vec<f64>) -> Result<Self> {
        let mut problems = Vec::new();
        if m == 0 {
            problems.push("m must be at least 1".to_string());
        }
        if hold.len() != m + 1 {
            problems.push(format!(
                "expected {} holding probabilities, got {}",
                m + 1,
                hold.len()
            ));
        }
        for (i, &h) in hold.iter().enumerate() {
            if !(0.0..1.0).contains(&h) {
                problems.push(format!(
                    "holding probability at {i} must lie in [0, 1), got {h}"
                ));
            }
        }
        if problems.is_empty() {
            Ok(BirthDeathChain { m, hold })
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn uniform(m: usize, hold: f64) -> Result<Self> {
        Self::new(m, vec![hold; m + 1])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn hold(&self) -> &[f64] {
        &self.hold
    }

    /// Smallest move probability `a = min_i (1 - p_ii)`.
    pub fn a(&self) -> f64 {
        self.hold
            .iter()
            .map(|h| 1.0 - h)
            .fold(f64::INFINITY, f64::min)
    }

    /// Transition probabilities `(down, stay, up)` out of `i`.
    pub fn row(&self, i: usize) -> (f64, f64, f64) {
        let h = self.hold[i];
        if i == 0 {
            (0.0, h, 1.0 - h)
        } else if i == self.m {
            (1.0 - h, h, 0.0)
        } else {
            (0.5 * (1.0 - h), h, 0.5 * (1.0 - h))
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> usize {
        let (down, stay, _) = self.row(i);
        let u: f64 = rng.random();
        if u < down {
            i - 1
        } else if u < down + stay {
            i
        } else {
            i + 1
        }
    }

    pub fn path<R: Rng + ?Sized>(&self, start: usize, n: usize, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        let mut x = start;
        for _ in 0..n {
            out.push(x);
            x = self.step(x, rng);
        }
        out
    }

    /// `E[N_0] / n` where `N_0` counts visits to 0 among `X_0, ..., X_{n-1}`.
    pub fn expected_occupation(&self, start: usize, n: u64) -> Result<f64> {
        if start > self.m {
            return domain(format!("start {start} outside 0..={}", self.m));
        }
        let mut p = vec![0.0; self.m + 1];
        p[start] = 1.0;
        let mut q = vec![0.0; self.m + 1];
        let mut acc = 0.0;
        for _ in 0..n {
            acc += p[0];
            q.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..=self.m {
                let (down, stay, up) = self.row(i);
                if down > 0.0 {
                    q[i - 1] += p[i] * down;
                }
                q[i] += p[i] * stay;
                if up > 0.0 {
                    q[i + 1] += p[i] * up;
                }
            }
            std::mem::swap(&mut p, &mut q);
        }
        Ok(acc / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationResult {
    pub m: usize,
    pub n: u64,
    pub replicas: usize,
    /// `N_0 / n` for each replica.
    pub fractions: Vec<f64>,
    pub mean: f64,
    pub se: f64,
}

/// Empirical law of `N_0 / n` over independent replicas from `start`.
pub fn occupation_experiment<R, F>(
    chain: &BirthDeathChain,
    start: usize,
    n: u64,
    replicas: usize,
    mut rng_for: F,
) -> Result<OccupationResult>
where
    R: Rng,
    F: FnMut(usize) -> R,
{
    if start > chain.m || n == 0 || replicas == 0 {
        return domain("occupation experiment needs a valid start, n > 0 and replicas > 0");
    }
    let fractions: Vec<f64> = (0..replicas)
        .map(|rep| {
            let mut rng = rng_for(rep);
            let mut x = start;
            let mut visits = 0u64;
            for _ in 0..n {
                visits += (x == 0) as u64;
                x = chain.step(x, &mut rng);
            }
            visits as f64 / n as f64
        })
        .collect();
    let (mean, se) = mean_se(&fractions);
    Ok(OccupationResult {
        m: chain.m,
        n,
        replicas,
        fractions,
        mean,
        se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::replica_rng;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_computed_laws() {
        // 0 -> 1 -> {0, 2} -> 1 -> {0, 2}
        let p = exact_distribution(2, 4, 0).unwrap();
        assert_eq!(p, vec![0.5, 0.0, 0.5]);
        let c = verify_refrw_bound(2, 4, 0, 4).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (0.5, 1.5, true));
        for n in [0u64, 2, 10, 1000] {
            assert_eq!(exact_distribution(1, n, 0).unwrap()[0], 1.0);
            assert!(verify_refrw_bound(1, n.max(16), 0, 16).unwrap().holds);
        }
        assert!(verify_refrw_bound(2, 4, 0, 16).is_err());
        assert!(exact_distribution(3, 1, 4).is_err());
    }

    #[test]
    fn distributions_sum_to_one() {
        for (m, n, y) in [(2, 5, 1), (10, 10_000, 0), (37, 777, 20)] {
            let p = exact_distribution(m, n, y).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dp_matches_monte_carlo() {
        // n even and the walk has period 2, so the law sits on even states and
        // P(Y_n = 0) -> 2 pi(0) = 1/m
        let (m, n) = (10usize, 10_000u64);
        let exact = exact_distribution(m, n, 0).unwrap()[0];
        assert!((exact - 0.1).abs() < 1e-6);
        // already mixed after 400 steps, so simulate that many per walk
        let steps = 400;
        let short = exact_distribution(m, steps, 0).unwrap()[0];
        assert!((short - exact).abs() < 1e-6);
        let chain = BirthDeathChain::uniform(m, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let reps = 1_000_000usize;
        let mut hits = 0u64;
        for _ in 0..reps {
            let mut x = 0;
            for _ in 0..steps {
                x = chain.step(x, &mut rng);
            }
            hits += (x == 0) as u64;
        }
        let est = hits as f64 / reps as f64;
        let se = (short * (1.0 - short) / reps as f64).sqrt();
        assert!((est - short).abs() < 3.0 * se, "{est} vs {short}");
    }

    #[test]
    fn reversibility_agrees_with_direct_dp() {
        let cfg = SweepConfig {
            m_min: 2,
            m_max: 9,
            n_min: 1,
            n_max: 60,
            n0: 1,
        };
        let r = sweep(&cfg).unwrap();
        let pi = |m: usize| stationary(m);
        for m in 2..=9 {
            for n in 1..=60u64 {
                let p0 = exact_distribution(m, n, 0).unwrap();
                for (y, &py) in p0.iter().enumerate() {
                    let direct = exact_distribution(m, n, y).unwrap()[0];
                    let via = pi(m)[0] / pi(m)[y] * py;
                    assert!((direct - via).abs() < 1e-13, "m={m} n={n} y={y}");
                }
            }
        }
        assert!(r.checked > 0);
    }

    #[test]
    fn sweep_small_grid_has_no_violations_above_threshold() {
        let r = sweep(&SweepConfig {
            m_min: 2,
            m_max: 20,
            n_min: 16,
            n_max: 2000,
            n0: 16,
        })
        .unwrap();
        assert!(r.passed());
        assert!(r.max_ratio < 1.0);
        assert!(r.to_csv().starts_with("m,n,initial,lhs,rhs,holds\n"));
    }

    #[test]
    fn lift_map_values() {
        assert_eq!(lift_map(13, 10).unwrap(), 7);
        assert_eq!(lift_map(20, 10).unwrap(), 0);
        assert_eq!(lift_map(-3, 10).unwrap(), 3);
        assert_eq!(lift_map(10, 10).unwrap(), 10);
        assert!(lift_map(1, 0).is_err());
    }

    #[test]
    fn lifted_walk_equals_reflecting_walk() {
        for m in 1..=6 {
            for n in (0..=200).step_by(7) {
                for y in 0..=m {
                    let a = exact_distribution(m, n, y).unwrap();
                    let b = lifted_walk_law(m, n, y).unwrap();
                    for (u, v) in a.iter().zip(&b) {
                        assert!((u - v).abs() < 1e-14, "m={m} n={n} y={y}");
                    }
                }
            }
        }
    }

    #[test]
    fn worked_decomposition_example() {
        let path: Vec<char> = "abbbaaccccdda".chars().collect();
        let jd = jump_decompose(&path).unwrap();
        assert_eq!(jd.jump_chain, vec!['a', 'b', 'a', 'c', 'd', 'a']);
        assert_eq!(jd.multiplicities, vec![1, 3, 2, 4, 2, 1]);
        assert_eq!(jd.expand(), path);
        assert_eq!(jd.occupation(&'a'), 4);
        let c = jump_decompose(&['x', 'x', 'x']).unwrap();
        assert_eq!((c.jump_chain, c.multiplicities), (vec!['x'], vec![3]));
        assert!(jump_decompose::<u8>(&[]).is_err());
    }

    #[test]
    fn chain_validation() {
        assert!(BirthDeathChain::uniform(5, 0.5).is_ok());
        match BirthDeathChain::new(0, vec![1.0, 0.2]) {
            Err(Error::Config(v)) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
        let c = BirthDeathChain::new(3, vec![0.1, 0.5, 0.2, 0.0]).unwrap();
        assert!((c.a() - 0.5).abs() < 1e-15);
        for i in 0..=3 {
            let (d, s, u) = c.row(i);
            assert!((d + s + u - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn alternating_chain_spends_half_the_time_at_zero() {
        let c = BirthDeathChain::uniform(1, 0.0).unwrap();
        let r = occupation_experiment(&c, 0, 1000, 3, |i| replica_rng(1, i as u64)).unwrap();
        assert!(r.fractions.iter().all(|&f| f == 0.5));
    }

    #[test]
    fn occupation_mc_matches_exact_expectation() {
        for (m, hold, n) in [
            (10usize, 0.0, 10_000u64),
            (10, 0.5, 10_000),
            (20, 0.5, 1000),
        ] {
            let c = BirthDeathChain::uniform(m, hold).unwrap();
            let exact = c.expected_occupation(0, n).unwrap();
            let r = occupation_experiment(&c, 0, n, 400, |i| replica_rng(3, i as u64)).unwrap();
            assert!(
                (r.mean - exact).abs() < 4.0 * r.se,
                "m={m} hold={hold}: {} vs {exact}",
                r.mean
            );
            if hold == 0.0 {
                assert!(r.mean <= refrw_rhs(m, n) + 3.0 * r.se);
            }
        }
    }

    #[test]
    fn occupation_decreases_along_the_diagonal() {
        let grid = [(10usize, 100u64), (20, 1000), (50, 10_000)];
        let vals: Vec<f64> = grid
            .iter()
            .map(|&(m, n)| {
                BirthDeathChain::uniform(m, 0.5)
                    .unwrap()
                    .expected_occupation(0, n)
                    .unwrap()
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        assert!(vals[2] <= 0.05);
    }

    #[test]
    fn jump_chain_of_lazy_chain_is_the_reflecting_walk() {
        // visits to 0 equal the multiplicity total over jump-chain visits to 0
        let c = BirthDeathChain::uniform(4, 0.5).unwrap();
        let path = c.path(0, 5000, &mut ChaCha8Rng::seed_from_u64(8));
        let jd = jump_decompose(&path).unwrap();
        assert_eq!(jd.occupation(&0), path.iter().filter(|&&x| x == 0).count());
        assert!(jd.jump_chain.windows(2).all(|w| w[0].abs_diff(w[1]) == 1));
        assert_eq!(jd.multiplicities.iter().sum::<usize>(), path.len());
    }

    proptest! {
        #[test]
        fn decompose_expand_round_trip(path in proptest::collection::vec(0u8..4, 1..200)) {
            let jd = jump_decompose(&path).unwrap();
            prop_assert_eq!(jd.expand(), path);
            prop_assert!(jd.jump_chain.windows(2).all(|w| w[0] != w[1]));
            prop_assert!(jd.multiplicities.iter().all(|&k| k > 0));
        }

        #[test]
        fn lift_map_is_in_range_and_even(z in -10_000i64..10_000, m in 1usize..50) {
            let g = lift_map(z, m).unwrap();
            prop_assert!(g <= m);
            prop_assert_eq!(g, lift_map(-z, m).unwrap());
            prop_assert_eq!(g, lift_map(z + 2 * m as i64, m).unwrap());
        }
    }
}
