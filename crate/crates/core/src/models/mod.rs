//! Multi-level forward models with adjoint error estimates and gradients.

mod elliptic;
mod predprey;

use alloc::boxed::Box;
use alloc::vec::Vec;

pub use elliptic::{AdjointEnrichment, Elliptic1d, QoiNormalization};
pub use predprey::PredatorPrey;

use crate::error::ModelError;
use crate::linalg::Matrix;
use crate::space::ParameterSpace;

/// One-based model fidelity index; larger is finer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "u32", into = "u32"))]
pub struct Level(u32);

impl TryFrom<u32> for Level {
    type Error = &'static str;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        if v >= 1 {
            Ok(Level(v))
        } else {
            Err("levels start at 1")
        }
    }
}

impl From<Level> for u32 {
    fn from(l: Level) -> u32 {
        l.0
    }
}

impl Level {
    pub const fn new(level: u32) -> Self {
        assert!(level >= 1);
        Level(level)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Zero-based position in a ladder.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn next(self) -> Self {
        Level(self.0 + 1)
    }
}

impl core::fmt::Display for Level {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Discretization parameter (mesh width or time step) per level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelLadder {
    steps: Vec<f64>,
}

impl LevelLadder {
    /// Steps must be positive and strictly decreasing.
    pub fn new(steps: Vec<f64>) -> Option<Self> {
        let ok = !steps.is_empty()
            && steps.iter().all(|s| *s > 0.0 && s.is_finite())
            && steps.windows(2).all(|w| w[1] < w[0]);
        ok.then_some(LevelLadder { steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn max_level(&self) -> Level {
        Level(self.steps.len() as u32)
    }

    pub fn step(&self, level: Level) -> Option<f64> {
        self.steps.get(level.index()).copied()
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }
}

/// One model evaluation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QoiRecord {
    pub lambda: Vec<f64>,
    pub level: Level,
    pub q: Vec<f64>,
    /// Estimate of `Q(λ) − Q_h(λ)`; adding it to `q` corrects the QoI.
    pub error_estimate: Vec<f64>,
    /// `∂Q_h/∂λ`, components × parameters.
    pub jacobian: Option<Matrix>,
}

pub trait Model: Sync + Send {
    fn name(&self) -> &str;

    fn space(&self) -> &ParameterSpace;

    fn qoi_dim(&self) -> usize;

    fn levels(&self) -> &LevelLadder;

    fn evaluate(&self, lambda: &[f64], level: Level, want_gradient: bool) -> Result<QoiRecord, ModelError>;

    /// `Q_h(λ)` alone, for callers that need neither estimates nor gradients.
    fn evaluate_qoi(&self, lambda: &[f64], level: Level) -> Result<Vec<f64>, ModelError> {
        self.evaluate(lambda, level, false).map(|r| r.q)
    }

    /// Closed-form QoI, when the model has one.
    fn exact_qoi(&self, _lambda: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn max_level(&self) -> Level {
        self.levels().max_level()
    }
}

pub(crate) fn check_level(levels: &LevelLadder, lambda: &[f64], level: Level) -> Result<f64, ModelError> {
    levels.step(level).ok_or_else(|| ModelError {
        lambda: lambda.to_vec(),
        level: level.get() as usize,
        kind: crate::ModelErrorKind::LevelOutOfRange {
            level: level.get() as usize,
            max: levels.len(),
        },
    })
}

/// Names accepted by [`by_name`].
pub const REGISTERED: &[&str] = &["elliptic1d", "predprey"];

/// Built-in model registry.
pub fn by_name(name: &str) -> Option<Box<dyn Model>> {
    match name {
        "elliptic1d" => Some(Box::new(Elliptic1d::default())),
        "predprey" => Some(Box::new(PredatorPrey::default())),
        _ => None,
    }
}
