//! The scalar prediction `f` integrated against the posterior.

use alloc::boxed::Box;
use alloc::sync::Arc;
use core::fmt;

use crate::models::Elliptic1d;

/// How local integration errors are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TargetMode {
    /// `f` is evaluated at every chain state.
    #[default]
    Cheap,
    /// `f` is only known at generators (and at a few probe points per cell
    /// for the Lipschitz estimate).
    Expensive,
}

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type RegionFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// `f` restricted to a region `A` (all of the domain by default), extended
/// by zero outside `A`.
#[derive(Clone)]
pub struct PredictionTarget {
    name: &'static str,
    f: Arc<ScalarFn>,
    region: Option<Arc<RegionFn>>,
    mode: TargetMode,
}

impl fmt::Debug for PredictionTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredictionTarget")
            .field("name", &self.name)
            .field("mode", &self.mode)
            .field("restricted", &self.region.is_some())
            .finish()
    }
}

impl PredictionTarget {
    pub fn new(name: &'static str, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PredictionTarget {
            name,
            f: Arc::new(f),
            region: None,
            mode: TargetMode::Cheap,
        }
    }

    pub fn with_mode(mut self, mode: TargetMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_region(mut self, a: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.region = Some(Arc::new(a));
        self
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn mode(&self) -> TargetMode {
        self.mode
    }

    #[inline]
    pub fn in_region(&self, x: &[f64]) -> bool {
        self.region.as_ref().is_none_or(|a| a(x))
    }

    /// `f(x)` inside `A`, zero outside.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.in_region(x) {
            (self.f)(x)
        } else {
            0.0
        }
    }

    /// A copy with `f` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let f = self.f.clone();
        PredictionTarget {
            name: self.name,
            f: Arc::new(move |x: &[f64]| c * f(x)),
            region: self.region.clone(),
            mode: self.mode,
        }
    }
}

/// Names accepted by [`by_name`].
pub const REGISTERED: &[&str] = &["flux_083", "x0_over_y0"];

/// Built-in targets: `v'(0.83)` for the elliptic model and `x₀/y₀` for the
/// predator–prey model.
pub fn by_name(name: &str) -> Option<PredictionTarget> {
    let f: Box<ScalarFn> = match name {
        "flux_083" => Box::new(|l: &[f64]| Elliptic1d::exact_flux(l, 0.83)),
        "x0_over_y0" => Box::new(|l: &[f64]| l[4] / l[5]),
        _ => return None,
    };
    let name = REGISTERED.iter().find(|n| **n == name)?;
    Some(PredictionTarget {
        name,
        f: Arc::from(f),
        region: None,
        mode: TargetMode::Cheap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_extends_by_zero() {
        let t = PredictionTarget::new("id", |x| x[0] + 1.0).with_region(|x| x[0] < 0.5);
        assert_eq!(t.eval(&[0.25]), 1.25);
        assert_eq!(t.eval(&[0.75]), 0.0);
        assert_eq!(t.scaled(2.0).eval(&[0.25]), 2.5);
    }

    #[test]
    fn builtins() {
        let flux = by_name("flux_083").unwrap();
        let l = [2.0, 3.0];
        let h = 1e-6;
        let fd = (Elliptic1d::exact_solution(&l, 0.83 + h) - Elliptic1d::exact_solution(&l, 0.83 - h)) / (2.0 * h);
        assert!((flux.eval(&l) - fd).abs() < 1e-8);
        let r = by_name("x0_over_y0").unwrap();
        assert_eq!(r.eval(&[1.0, 1.0, 1.0, 1.0, 1.5, 1.2]), 1.5 / 1.2);
        assert!(by_name("nope").is_none());
    }
}
