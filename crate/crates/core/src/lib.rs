//! Goal-oriented adaptive surrogates for Bayesian stochastic inversion.
//!
//! A surrogate of the quantity-of-interest map is built from piecewise Taylor
//! expansions on an *implicit* Voronoi tessellation of a box-shaped parameter
//! domain: cell membership is only ever decided by a nearest-generator search.
//! Every generator carries the model level it was solved at, a local order
//! (constant or linear) and an adjoint-based estimate of the discretization
//! error in its QoI. Adding those estimates yields an *enhanced* surrogate.
//!
//! Sampling the posterior with both surrogates and comparing the two
//! pushes forward local error indicators, which in turn drive three kinds of
//! refinement:
//!
//! * p-refinement: a cell switches from a constant to a linear expansion,
//! * level-refinement: a cell's generator is re-solved at a finer model level,
//! * h-refinement: a new generator is inserted.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and thread pools live in the companion `gosurr` crate.
//!
//! ```
//! use gosurr_core::{models::Elliptic1d, Model, Level};
//!
//! let model = Elliptic1d::default();
//! let rec = model.evaluate(&[2.0, 3.0], Level::new(3), true).unwrap();
//! assert_eq!(rec.q.len(), 2);
//! assert!(rec.jacobian.is_some());
//! ```

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adjoint;
pub mod driver;
mod error;
pub mod exec;
pub mod indicators;
pub mod kdtree;
pub mod linalg;
pub mod mcmc;
pub mod models;
pub mod refinement;
pub mod rng;
pub mod space;
pub mod surrogate;
pub mod target;

pub use error::{Error, ModelError, ModelErrorKind};
pub use models::{Level, LevelLadder, Model, QoiRecord};
pub use space::{EmulationSet, ParameterSpace, Tessellation};
pub use surrogate::{Surrogate, SurrogateCell};

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;
