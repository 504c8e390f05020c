//! TOML run configuration.
//!
//! The target is always required:
//!
//! ```toml
//! dimension = 16
//!
//! [[modes]]
//! lambda = 0.5
//! r = 2
//! weight = 0.5
//!
//! [[modes]]
//! lambda = 0.5
//! r = 2
//! weight = 0.5
//! ```
//!
//! Every other section is optional. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::appendix::SweepConfig;
use crate::error::{Error, Result};
use crate::harness::demo::DemoConfig;
use crate::harness::{
    AcceptanceConfig, ComplexityConfig, CrossValConfig, ExcursionConfig, OccupationConfig,
    OccupationTimeConfig, SamplerKind, WeakConfig,
};
use crate::ladder::{
    build_ladder_with, skew_constants_with, Ladder, SConvention, SkewConstants, Spacing,
    Termination,
};
use crate::model::{MixtureTarget, ModeSpec};
use crate::skewbm::SkewBMConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingKind {
    #[default]
    Standard,
    Quanta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSpec {
    pub ell0: f64,
    pub spacing: SpacingKind,
    /// Exponent in `ell(beta) = ell0 * beta^(k/2)`; used by `quanta` only.
    pub quanta_k: f64,
    /// Explicit top rung; overrides `betamax_factor`.
    pub betamax: Option<f64>,
    /// `betamax = betamax_factor * dimension` when `betamax` is absent.
    pub betamax_factor: f64,
    pub termination: Termination,
    pub s_convention: SConvention,
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec {
            ell0: 2.38,
            spacing: SpacingKind::Standard,
            quanta_k: 3.0,
            betamax: None,
            betamax_factor: 1.0,
            termination: Termination::Clamp,
            s_convention: SConvention::InverseSqrtR,
        }
    }
}

impl LadderSpec {
    pub fn spacing(&self) -> Spacing {
        match self.spacing {
            SpacingKind::Standard => Spacing::Standard,
            SpacingKind::Quanta => Spacing::Quanta { k: self.quanta_k },
        }
    }

    pub fn betamax(&self, dimension: usize) -> f64 {
        self.betamax
            .unwrap_or(self.betamax_factor * dimension as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub steps: u64,
    pub replicas: usize,
    pub sampler: SamplerKind,
    pub start_rung: usize,
    /// 1-based; drawn from the weights when absent.
    pub start_mode: Option<usize>,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            steps: 100_000,
            replicas: 1,
            sampler: SamplerKind::SufficientStatistic,
            start_rung: 0,
            start_mode: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkewBMSpec {
    pub dt: f64,
    pub horizon: f64,
    pub record_every: u64,
    /// Defaults to `wmax`, the image of the top rung in mode 1.
    pub start: Option<f64>,
}

impl Default for SkewBMSpec {
    fn default() -> Self {
        SkewBMSpec {
            dt: 4e-4,
            horizon: 10.0,
            record_every: 25,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
        }
    }
}

/// Per-experiment settings, including their declared tolerances.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiments {
    pub acceptance: AcceptanceConfig,
    pub excursions: ExcursionConfig,
    pub occupation: OccupationConfig,
    pub weak: WeakConfig,
    pub complexity: ComplexityConfig,
    pub cross_validation: CrossValConfig,
    pub demo: DemoConfig,
    pub appendix: SweepConfig,
    pub occupation_time: OccupationTimeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub modes: Vec<ModeSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub ladder: LadderSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub skewbm: SkewBMSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub experiments: Experiments,
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml_str(&text)
}

impl RunConfig {
    /// Two equal Gaussian modes in dimension 16.
    pub fn minimal() -> RunConfig {
        let mode = |w| ModeSpec::new(0.5, 2.0, w).expect("valid mode");
        RunConfig {
            dimension: 16,
            modes: vec![mode(0.5), mode(0.5)],
            seed: None,
            threads: None,
            ladder: LadderSpec::default(),
            simulation: SimulationSpec::default(),
            skewbm: SkewBMSpec::default(),
            output: OutputSpec::default(),
            experiments: Experiments::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Every problem found, not only the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = MixtureTarget::problems(&self.modes, self.dimension);
        let l = &self.ladder;
        if !(l.ell0 > 0.0 && l.ell0.is_finite()) {
            out.push(format!("ladder.ell0 must be positive, got {}", l.ell0));
        }
        if let Err(e) = l.spacing().validate() {
            out.push(format!("ladder.quanta_k: {e}"));
        }
        if let Some(b) = l.betamax {
            if !(b >= 1.0 && b.is_finite()) {
                out.push(format!("ladder.betamax must be >= 1, got {b}"));
            }
        } else if !(l.betamax_factor > 0.0 && l.betamax(self.dimension.max(1)) >= 1.0) {
            out.push(format!(
                "ladder.betamax_factor * dimension must be >= 1, got {}",
                l.betamax_factor * self.dimension as f64
            ));
        }
        let s = &self.simulation;
        if s.replicas == 0 {
            out.push("simulation.replicas must be at least 1".to_string());
        }
        if let Some(m) = s.start_mode {
            if m == 0 || m > self.modes.len() {
                out.push(format!(
                    "simulation.start_mode must lie in 1..={}, got {m}",
                    self.modes.len()
                ));
            }
        }
        if self.threads == Some(0) {
            out.push("threads must be at least 1".to_string());
        }
        if self.skewbm.record_every == 0 {
            out.push("skewbm.record_every must be at least 1".to_string());
        }
        if out.is_empty() {
            // checks that need a well-formed target and ladder
            match self.ladder() {
                Ok(ladder) if s.start_rung > ladder.k() => out.push(format!(
                    "simulation.start_rung {} exceeds k = {}",
                    s.start_rung,
                    ladder.k()
                )),
                Ok(_) => {}
                Err(e) => out.push(format!("ladder: {e}")),
            }
            if self.modes.len() == 2 {
                match self.skew_constants() {
                    Ok(c) => {
                        let sb = SkewBMConfig {
                            constants: c,
                            dt: self.skewbm.dt,
                            horizon: self.skewbm.horizon,
                        };
                        out.extend(sb.problems().into_iter().map(|p| format!("skewbm: {p}")));
                        if let Some(w) = self.skewbm.start {
                            if !(c.wmin..=c.wmax).contains(&w) {
                                out.push(format!(
                                    "skewbm.start must lie in [{}, {}], got {w}",
                                    c.wmin, c.wmax
                                ));
                            }
                        }
                    }
                    Err(e) => out.push(e.to_string()),
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    pub fn target(&self) -> Result<MixtureTarget> {
        MixtureTarget::new(self.modes.clone(), self.dimension)
    }

    pub fn betamax(&self) -> f64 {
        self.ladder.betamax(self.dimension)
    }

    pub fn ladder(&self) -> Result<Ladder> {
        build_ladder_with(
            self.dimension,
            self.betamax(),
            self.ladder.ell0,
            self.ladder.spacing(),
            self.ladder.termination,
        )
    }

    pub fn skew_constants(&self) -> Result<SkewConstants> {
        skew_constants_with(&self.target()?, self.ladder.ell0, self.ladder.s_convention)
    }

    pub fn skewbm_config(&self) -> Result<SkewBMConfig> {
        SkewBMConfig::new(self.skew_constants()?, self.skewbm.dt, self.skewbm.horizon)
    }
}
