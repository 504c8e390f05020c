//! Experiments tying simulated chains to their limiting behaviour.

mod acceptance;
mod crossval;
pub mod demo;
mod excursion;
mod roundtrip;
mod run;
mod walk;
mod weak;

pub use acceptance::{
    acceptance_experiment, acceptance_profile, AcceptanceConfig, AcceptanceTally, RungRate,
};
pub use crossval::{cross_validation, CrossValConfig};
pub use excursion::{
    excursion_experiment, excursion_statistics, excursion_threshold, ExcursionConfig,
    ExcursionCounter, ExcursionStats, Threshold,
};
pub use roundtrip::{
    complexity_scan, round_trips, ComplexityConfig, ComplexityRow, RoundTrip, RoundTripTracker,
    SamplerKind,
};
pub use run::{
    mode_changes_off_top, simulate_run, transform_run, SimulationOutput, TransformOutput,
};
pub use walk::{bound_sweep, occupation_time_experiment, OccupationTimeConfig};
pub use weak::{occupation_experiment, weak_convergence_test, OccupationConfig, WeakConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Declared pass rule for one metric, fixed before the experiment runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Tolerance {
    /// `|estimate - target| <= tol`
    Within {
        target: f64,
        tol: f64,
    },
    /// `|estimate - target| <= sigmas * se`
    WithinSigma {
        target: f64,
        sigmas: f64,
    },
    AtMost {
        bound: f64,
    },
    AtLeast {
        bound: f64,
    },
    /// Reported without a pass decision.
    Info,
}

impl Tolerance {
    pub fn check(&self, estimate: Option<f64>, se: Option<f64>) -> Option<bool> {
        let est = match (self, estimate) {
            (Tolerance::Info, _) => return None,
            (_, None) => return Some(false),
            (_, Some(e)) => e,
        };
        Some(match *self {
            Tolerance::Within { target, tol } => (est - target).abs() <= tol,
            Tolerance::WithinSigma { target, sigmas } => {
                se.is_some_and(|s| (est - target).abs() <= sigmas * s)
            }
            Tolerance::AtMost { bound } => est <= bound,
            Tolerance::AtLeast { bound } => est >= bound,
            Tolerance::Info => unreachable!(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub replicas: u64,
    pub tolerance: Tolerance,
    pub pass: Option<bool>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Metric {
    pub fn new(
        name: impl Into<String>,
        estimate: f64,
        se: f64,
        replicas: u64,
        tolerance: Tolerance,
    ) -> Self {
        let (estimate, se) = (finite(estimate), finite(se));
        let pass = tolerance.check(estimate, se);
        Metric {
            name: name.into(),
            estimate,
            se,
            replicas,
            tolerance,
            pass,
        }
    }

    /// Pass/fail fact with no sampling error (exact computations, structural
    /// checks).
    pub fn flag(name: impl Into<String>, ok: bool, replicas: u64) -> Self {
        Metric::new(
            name,
            ok as u8 as f64,
            0.0,
            replicas,
            Tolerance::AtLeast { bound: 1.0 },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    /// Supporting tables keyed by name.
    pub tables: BTreeMap<String, serde_json::Value>,
}

impl ExperimentReport {
    pub fn new<C: Serialize>(kind: impl Into<String>, config: &C, seed: u64) -> Self {
        let config = serde_json::to_value(config).expect("configs serialise to JSON");
        let config_hash = config_hash(&config);
        ExperimentReport {
            kind: kind.into(),
            config,
            config_hash,
            seed,
            metrics: Vec::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, metric: Metric) {
        self.metrics.push(metric);
    }

    pub fn table<T: Serialize>(&mut self, name: &str, rows: &T) {
        self.tables.insert(
            name.to_string(),
            serde_json::to_value(rows).expect("tables serialise to JSON"),
        );
    }

    /// True iff every metric with a declared rule passed.
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.pass != Some(false))
    }

    pub fn failures(&self) -> Vec<&Metric> {
        self.metrics
            .iter()
            .filter(|m| m.pass == Some(false))
            .collect()
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise to JSON")
    }

    pub fn from_json(s: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// SHA-256 of the compact JSON form (object keys are sorted).
pub fn config_hash(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

/// Maps `f` over `0..n` on up to `threads` OS threads. Output order and values
/// do not depend on the thread count as long as `f` only depends on its index.
pub fn par_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    (t * chunk..((t + 1) * chunk).min(n))
                        .map(f)
                        .collect::<Vec<T>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
