//! The vanilla ALPS chain on (mode, rung).
//!
//! Each iteration: if the chain sits on the top rung the mode is redrawn from
//! the mixture weights; the state is then redrawn exactly from the current
//! mode tempered at the current rung; finally a move to a neighbouring rung is
//! proposed with probability 1/2 each way and accepted by the Metropolis rule.
//! Proposals that leave the ladder are rejected.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ladder::Ladder;
use crate::model::{
    log_norm_const_unchecked, sample_tempered_coordinate, MixtureTarget, SufficientStat,
};

/// Within-mode dynamics: exact resampling at a given inverse temperature plus
/// the log acceptance ratio of a temperature move for the current state.
pub trait ModeSampler {
    type State: Clone + std::fmt::Debug;

    fn weights(&self) -> Vec<f64>;
    fn dimension(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    fn refresh<R: Rng + ?Sized>(
        &self,
        mode: usize,
        beta: f64,
        state: &mut Self::State,
        rng: &mut R,
    );
    fn log_accept_ratio(
        &self,
        mode: usize,
        beta_from: f64,
        beta_to: f64,
        state: &Self::State,
    ) -> f64;
}

/// Exponential-power modes simulated through the sufficient statistic only:
/// O(1) work per step regardless of dimension.
#[derive(Debug, Clone)]
pub struct SufficientStatSampler {
    target: MixtureTarget,
    // Gamma(d / r_j, 1), rescaled by 1 / (beta lambda_j) on use
    unit: Vec<Gamma<f64>>,
}

impl SufficientStatSampler {
    pub fn new(target: MixtureTarget) -> Self {
        let d = target.dimension() as f64;
        let unit = target
            .modes()
            .iter()
            .map(|m| Gamma::new(d / m.r, 1.0).expect("validated target has positive shape"))
            .collect();
        SufficientStatSampler { target, unit }
    }

    pub fn target(&self) -> &MixtureTarget {
        &self.target
    }
}

impl ModeSampler for SufficientStatSampler {
    type State = SufficientStat;

    fn weights(&self) -> Vec<f64> {
        self.target.weights()
    }

    fn dimension(&self) -> usize {
        self.target.dimension()
    }

    fn initial_state(&self) -> SufficientStat {
        SufficientStat::new(0.0).expect("zero is a valid statistic")
    }

    fn refresh<R: Rng + ?Sized>(
        &self,
        mode: usize,
        beta: f64,
        state: &mut SufficientStat,
        rng: &mut R,
    ) {
        let scale = 1.0 / (beta * self.target.mode(mode).lambda);
        *state = SufficientStat::new(self.unit[mode].sample(rng) * scale)
            .expect("Gamma draws are nonnegative");
    }

    fn log_accept_ratio(
        &self,
        mode: usize,
        beta_from: f64,
        beta_to: f64,
        state: &SufficientStat,
    ) -> f64 {
        crate::model::log_accept_ratio(
            self.target.mode(mode),
            beta_from,
            beta_to,
            *state,
            self.target.dimension(),
        )
    }
}

/// Exponential-power modes simulated coordinate by coordinate. The acceptance
/// ratio is summed from per-coordinate log densities, independently of the
/// sufficient-statistic formula.
#[derive(Debug, Clone)]
pub struct FullCoordinateSampler {
    target: MixtureTarget,
}

impl FullCoordinateSampler {
    pub fn new(target: MixtureTarget) -> Self {
        FullCoordinateSampler { target }
    }
}

impl ModeSampler for FullCoordinateSampler {
    type State = Vec<f64>;

    fn weights(&self) -> Vec<f64> {
        self.target.weights()
    }

    fn dimension(&self) -> usize {
        self.target.dimension()
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.target.dimension()]
    }

    fn refresh<R: Rng + ?Sized>(&self, mode: usize, beta: f64, state: &mut Vec<f64>, rng: &mut R) {
        let m = self.target.mode(mode);
        for x in state.iter_mut() {
            *x = sample_tempered_coordinate(m, beta, rng)
                .expect("ladder rungs are valid inverse temperatures");
        }
    }

    fn log_accept_ratio(&self, mode: usize, beta_from: f64, beta_to: f64, state: &Vec<f64>) -> f64 {
        let m = self.target.mode(mode);
        let (z_to, z_from) = (
            log_norm_const_unchecked(m, beta_to),
            log_norm_const_unchecked(m, beta_from),
        );
        state
            .iter()
            .map(|&x| {
                let u = (x - m.center).abs().powf(m.r);
                (-beta_to * m.lambda * u - z_to) - (-beta_from * m.lambda * u - z_from)
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState<S> {
    pub mode: usize,
    pub rung: usize,
    pub repr: S,
}

/// What happened during one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Mode used during the iteration (after any mode jump).
    pub mode: usize,
    pub from_rung: usize,
    pub rung: usize,
    pub direction: i8,
    pub accepted: bool,
    /// The iteration started on the top rung, so the mode was redrawn.
    pub mode_refreshed: bool,
}

#[derive(Debug, Clone)]
pub struct Chain<M: ModeSampler> {
    sampler: M,
    ladder: Ladder,
    jump: WeightedIndex<f64>,
    state: ChainState<M::State>,
}

impl<M: ModeSampler> Chain<M> {
    /// Chain started at `rung` in `mode`.
    pub fn new(sampler: M, ladder: Ladder, mode: usize, rung: usize) -> Result<Self> {
        let weights = sampler.weights();
        if mode >= weights.len() {
            return domain(format!(
                "mode {mode} out of range for {} modes",
                weights.len()
            ));
        }
        if rung > ladder.k() {
            return domain(format!("rung {rung} out of range for k = {}", ladder.k()));
        }
        if ladder.dimension() != sampler.dimension() {
            return domain(format!(
                "ladder built for d = {} but target has d = {}",
                ladder.dimension(),
                sampler.dimension()
            ));
        }
        let jump = WeightedIndex::new(&weights).map_err(|e| Error::Domain(e.to_string()))?;
        let repr = sampler.initial_state();
        Ok(Chain {
            sampler,
            ladder,
            jump,
            state: ChainState { mode, rung, repr },
        })
    }

    /// Chain started at rung 0 with the mode drawn from the weights.
    pub fn from_weights<R: Rng + ?Sized>(sampler: M, ladder: Ladder, rng: &mut R) -> Result<Self> {
        let mut chain = Self::new(sampler, ladder, 0, 0)?;
        chain.state.mode = chain.jump.sample(rng);
        Ok(chain)
    }

    pub fn state(&self) -> &ChainState<M::State> {
        &self.state
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    pub fn sampler(&self) -> &M {
        &self.sampler
    }

    pub fn reset(&mut self, mode: usize, rung: usize) {
        assert!(rung <= self.ladder.k() && mode < self.sampler.weights().len());
        self.state.mode = mode;
        self.state.rung = rung;
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepInfo {
        let k = self.ladder.k();
        let from = self.state.rung;
        let mode_refreshed = from == k;
        if mode_refreshed {
            self.state.mode = self.jump.sample(rng);
        }
        let mode = self.state.mode;
        let eff = self.ladder.effective_betas();
        self.sampler
            .refresh(mode, eff[from], &mut self.state.repr, rng);

        let up = rng.random::<bool>();
        let direction: i8 = if up { 1 } else { -1 };
        let accepted = if (up && from == k) || (!up && from == 0) {
            false
        } else {
            let to = if up { from + 1 } else { from - 1 };
            let log_ratio =
                self.sampler
                    .log_accept_ratio(mode, eff[from], eff[to], &self.state.repr);
            let u: f64 = rng.random();
            let ok = log_ratio >= 0.0 || u.ln() < log_ratio;
            if ok {
                self.state.rung = to;
            }
            ok
        };
        StepInfo {
            mode,
            from_rung: from,
            rung: self.state.rung,
            direction,
            accepted,
            mode_refreshed,
        }
    }
}

/// One row of a trace: the chain after iteration `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub step: u64,
    /// Poissonised time (rate `d` clock).
    pub time: f64,
    pub mode: usize,
    pub rung: usize,
    pub beta: f64,
    /// 0 for the initial record.
    pub direction: i8,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub seed: Option<u64>,
    pub dimension: usize,
    pub betas: Vec<f64>,
    /// Initial state at step 0 followed by one record per iteration.
    pub records: Vec<Record>,
}

impl Trace {
    pub fn k(&self) -> usize {
        self.betas.len() - 1
    }

    /// Trace as CSV with columns `n,t,mode,rung,beta,dir,accepted` (modes 1-based).
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * self.records.len() + 40);
        out.push_str("n,t,mode,rung,beta,dir,accepted\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.step,
                r.time,
                r.mode + 1,
                r.rung,
                r.beta,
                r.direction,
                r.accepted as u8
            ));
        }
        out
    }

    /// Reads the CSV written by [`Trace::to_csv`]; lines starting with `#` are
    /// skipped. The ladder supplies `betas` and the dimension.
    pub fn from_csv(text: &str, ladder: &Ladder) -> Result<Trace> {
        let bad = |line: usize, msg: &str| Error::Domain(format!("trace line {line}: {msg}"));
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "n,t,mode,rung,beta,dir,accepted" => {}
            Some((i, _)) => return Err(bad(i + 1, "unexpected header")),
            None => return domain("empty trace file"),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 7 {
                return Err(bad(i + 1, "expected 7 fields"));
            }
            let num = |j: usize| f[j].parse::<f64>().map_err(|_| bad(i + 1, "not a number"));
            let int = |j: usize| {
                f[j].parse::<i64>()
                    .map_err(|_| bad(i + 1, "not an integer"))
            };
            let mode = int(2)?;
            let rung = int(3)?;
            if mode < 1 || rung < 0 || rung as usize > ladder.k() {
                return Err(bad(i + 1, "mode or rung out of range"));
            }
            records.push(Record {
                step: int(0)?.max(0) as u64,
                time: num(1)?,
                mode: (mode - 1) as usize,
                rung: rung as usize,
                beta: num(4)?,
                direction: int(5)?.clamp(-1, 1) as i8,
                accepted: int(6)? != 0,
            });
        }
        let trace = Trace {
            seed: None,
            dimension: ladder.dimension(),
            betas: ladder.betas().to_vec(),
            records,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// Structural checks: step order, time order, `beta` matches the ladder.
    pub fn validate(&self) -> Result<()> {
        for w in self.records.windows(2) {
            if w[1].step <= w[0].step {
                return Err(Error::Invariant(format!(
                    "steps not increasing at {}",
                    w[1].step
                )));
            }
            if w[1].time < w[0].time {
                return Err(Error::Invariant(format!(
                    "time decreasing at step {}",
                    w[1].step
                )));
            }
        }
        for r in &self.records {
            if r.rung > self.k() || r.beta != self.betas[r.rung] {
                return Err(Error::Invariant(format!(
                    "beta/rung mismatch at step {}",
                    r.step
                )));
            }
        }
        Ok(())
    }
}

/// Runs `steps` iterations, attaching an Exp(rate `d`) time increment to each.
pub fn run<M: ModeSampler, R: Rng + ?Sized>(
    chain: &mut Chain<M>,
    steps: u64,
    rng: &mut R,
) -> Trace {
    let d = chain.sampler.dimension();
    let clock = Exp::new(d as f64).expect("d >= 1");
    let betas = chain.ladder.betas().to_vec();
    let mut records = Vec::with_capacity(steps as usize + 1);
    records.push(Record {
        step: 0,
        time: 0.0,
        mode: chain.state.mode,
        rung: chain.state.rung,
        beta: betas[chain.state.rung],
        direction: 0,
        accepted: false,
    });
    let mut time = 0.0;
    for n in 1..=steps {
        let info = chain.step(rng);
        time += clock.sample(rng);
        records.push(Record {
            step: n,
            time,
            mode: info.mode,
            rung: info.rung,
            beta: betas[info.rung],
            direction: info.direction,
            accepted: info.accepted,
        });
    }
    Trace {
        seed: None,
        dimension: d,
        betas,
        records,
    }
}

/// Replaces the record times with fresh Exp(rate `d`) increments.
pub fn attach_poisson_times<R: Rng + ?Sized>(
    trace: &mut Trace,
    d: usize,
    rng: &mut R,
) -> Result<()> {
    if d == 0 {
        return domain("d must be at least 1");
    }
    let clock = Exp::new(d as f64).expect("d >= 1");
    let mut time = 0.0;
    for (i, r) in trace.records.iter_mut().enumerate() {
        if i > 0 {
            time += clock.sample(rng);
        }
        r.time = time;
    }
    trace.dimension = d;
    Ok(())
}
