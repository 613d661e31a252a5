//! JSON run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gosurr_core::driver::{AdaptiveConfig, ReferenceQoi};
use gosurr_core::mcmc::{MhConfig, PosteriorProblem};
use gosurr_core::models::{self, AdjointEnrichment, Elliptic1d, PredatorPrey, QoiNormalization};
use gosurr_core::surrogate::Order;
use gosurr_core::target::{self, PredictionTarget, TargetMode};
use gosurr_core::{Level, LevelLadder, Model, ParameterSpace};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: String,
    pub model: ModelSpec,
    pub posterior: PosteriorSpec,
    pub target: TargetSpec,
    #[serde(default)]
    pub adaptive: AdaptiveConfig,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub uniform: UniformSpec,
    /// Run directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    /// Mesh widths or time steps, coarsest first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<QoiNormalization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enrichment: Option<AdjointEnrichment>,
}

/// One standard deviation for every component, or one per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Scalar(f64),
    PerComponent(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorSpec {
    pub data: Vec<f64>,
    pub sigma: Sigma,
    /// Defaults to the model's parameter box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_box: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub name: String,
    #[serde(default)]
    pub mode: TargetMode,
}

/// `exact` or a model level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelChoice {
    Exact,
    Level(u32),
}

impl FromStr for LevelChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "exact" {
            return Ok(LevelChoice::Exact);
        }
        match s.parse::<u32>() {
            Ok(l) if l >= 1 => Ok(LevelChoice::Level(l)),
            _ => Err(format!("expected a level ≥ 1 or `exact`, found `{s}`")),
        }
    }
}

impl fmt::Display for LevelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelChoice::Exact => f.write_str("exact"),
            LevelChoice::Level(l) => write!(f, "{l}"),
        }
    }
}

impl Serialize for LevelChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LevelChoice::Exact => s.serialize_str("exact"),
            LevelChoice::Level(l) => s.serialize_u32(*l),
        }
    }
}

impl<'de> Deserialize<'de> for LevelChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u32),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => n.to_string().parse(),
            Raw::S(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Known reference integral; enables error columns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Post-burn-in states of the reference chain.
    pub samples: usize,
    /// Closed-form QoI (`exact`) or a model level; the finest level when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<LevelChoice>,
    pub proposal_scale: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            value: None,
            samples: 1_000_000,
            level: None,
            proposal_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniformSpec {
    pub n: Vec<usize>,
    /// All model levels when empty.
    pub levels: Vec<u32>,
    pub runs: usize,
    pub order: Order,
    pub chain_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    pub proposal_scale: f64,
}

impl Default for UniformSpec {
    fn default() -> Self {
        UniformSpec {
            n: vec![10, 100, 1000, 10000],
            levels: Vec::new(),
            runs: 20,
            order: Order::Constant,
            chain_steps: 200_000,
            burn_in: None,
            proposal_scale: 0.05,
        }
    }
}

impl UniformSpec {
    pub fn chain(&self) -> MhConfig {
        MhConfig {
            steps: self.chain_steps,
            burn_in: self.burn_in.unwrap_or(self.chain_steps / 10),
            proposal_scale: self.proposal_scale,
        }
    }
}

/// `line:column` prefix for a parse error.
fn located(path: &Path, e: &serde_json::Error) -> String {
    format!("{}:{}:{}: {}", path.display(), e.line(), e.column(), e)
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::config(located(origin, &e)))?;
        cfg.problem_setup()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, path)
    }

    /// Builds and cross-checks everything the config names.
    pub fn problem_setup(&self) -> CliResult<Setup> {
        let model = self.build_model()?;
        let space = match &self.posterior.prior_box {
            None => model.space().clone(),
            Some(b) => {
                let s = ParameterSpace::new(b).map_err(|e| CliError::config(format!("posterior.prior_box: {e}")))?;
                let m = model.space();
                if s.dim() != m.dim() || (0..s.dim()).any(|d| s.lo()[d] < m.lo()[d] || s.hi()[d] > m.hi()[d]) {
                    return Err(CliError::config("posterior.prior_box must lie inside the model's parameter box"));
                }
                s
            }
        };
        let m = model.qoi_dim();
        if self.posterior.data.len() != m {
            return Err(CliError::config(format!(
                "posterior.data has {} entries but model `{}` has {m} QoI components",
                self.posterior.data.len(),
                self.model.name
            )));
        }
        let sigma = match &self.posterior.sigma {
            Sigma::Scalar(s) => vec![*s; m],
            Sigma::PerComponent(v) => v.clone(),
        };
        let problem = PosteriorProblem::new(space, self.posterior.data.clone(), sigma)
            .map_err(|e| CliError::config(format!("posterior: {e}")))?;
        let target = target::by_name(&self.target.name)
            .ok_or_else(|| {
                CliError::config(format!(
                    "unknown target `{}` (known: {})",
                    self.target.name,
                    target::REGISTERED.join(", ")
                ))
            })?
            .with_mode(self.target.mode);
        let expected_dim = match self.target.name.as_str() {
            "flux_083" => 2,
            "x0_over_y0" => 6,
            _ => problem.space().dim(),
        };
        if expected_dim != problem.space().dim() {
            return Err(CliError::config(format!(
                "target `{}` needs a {expected_dim}-dimensional parameter space",
                self.target.name
            )));
        }
        self.adaptive
            .validate()
            .map_err(|e| CliError::config(format!("adaptive: {e}")))?;
        self.uniform
            .chain()
            .validate()
            .map_err(|e| CliError::config(format!("uniform: {e}")))?;
        if self.uniform.runs == 0 || self.uniform.n.contains(&0) {
            return Err(CliError::config("uniform: runs and every n must be at least 1"));
        }
        let top = model.max_level().get();
        if let Some(&l) = self.uniform.levels.iter().find(|&&l| l == 0 || l > top) {
            return Err(CliError::config(format!("uniform: level {l} outside 1..={top}")));
        }
        if let Some(LevelChoice::Level(l)) = self.reference.level {
            if l > top {
                return Err(CliError::config(format!("reference: level {l} outside 1..={top}")));
            }
        }
        if !(self.reference.proposal_scale > 0.0) {
            return Err(CliError::config("reference: proposal_scale must be positive"));
        }
        Ok(Setup { model, problem, target })
    }

    fn build_model(&self) -> CliResult<Box<dyn Model>> {
        let spec = &self.model;
        let ladder = match &spec.levels {
            None => None,
            Some(v) => Some(
                LevelLadder::new(v.clone())
                    .ok_or_else(|| CliError::config("model.levels must be positive and decreasing"))?,
            ),
        };
        let bad_ladder = || CliError::config(format!("model.levels not usable by `{}`", spec.name));
        let elliptic_only = spec.normalization.is_some() || spec.enrichment.is_some();
        let model: Box<dyn Model> = match spec.name.as_str() {
            "elliptic1d" => {
                let mut m = Elliptic1d::default();
                if let Some(n) = spec.normalization {
                    m = m.with_normalization(n);
                }
                if let Some(e) = spec.enrichment {
                    m = m.with_enrichment(e);
                }
                if let Some(l) = ladder {
                    m = m.with_levels(l).ok_or_else(bad_ladder)?;
                }
                Box::new(m)
            }
            "predprey" => {
                if elliptic_only {
                    return Err(CliError::config("model.normalization and model.enrichment apply to elliptic1d only"));
                }
                let mut m = PredatorPrey::default();
                if let Some(l) = ladder {
                    m = m.with_levels(l).ok_or_else(bad_ladder)?;
                }
                Box::new(m)
            }
            other => {
                return Err(CliError::config(format!(
                    "unknown model `{other}` (known: {})",
                    models::REGISTERED.join(", ")
                )))
            }
        };
        Ok(model)
    }

    /// Reference QoI source after applying a command-line override.
    pub fn reference_qoi(&self, model: &dyn Model, over: Option<LevelChoice>) -> ReferenceQoi {
        match over.or(self.reference.level) {
            Some(LevelChoice::Exact) => ReferenceQoi::Exact,
            Some(LevelChoice::Level(l)) => ReferenceQoi::Level(Level::new(l)),
            None if model.exact_qoi(model.space().lo()).is_some() => ReferenceQoi::Exact,
            None => ReferenceQoi::Level(model.max_level()),
        }
    }

    pub fn uniform_levels(&self, model: &dyn Model) -> Vec<Level> {
        if self.uniform.levels.is_empty() {
            (1..=model.max_level().get()).map(Level::new).collect()
        } else {
            self.uniform.levels.iter().map(|&l| Level::new(l)).collect()
        }
    }
}

/// The objects a config describes.
pub struct Setup {
    pub model: Box<dyn Model>,
    pub problem: PosteriorProblem,
    pub target: PredictionTarget,
}
