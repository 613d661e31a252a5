//! `−λ₁ v'' = exp(λ₂ x)` on `(0, 1)` with `v(0) = v(1) = 0`.
//!
//! Forward solves use centered finite differences on a uniform mesh. The two
//! QoIs are the mean (or integral) of `v` over `[0.1, 0.4]` and `[0.6, 0.9]`,
//! evaluated exactly on the piecewise-linear interpolant of the nodal values.
//!
//! The error estimate pairs the residual of the forward solution with an
//! adjoint solved on the mesh of half the width, by default with quadratic
//! elements. Gradients use the adjoint of the forward discretization itself,
//! so they are the exact derivatives of the discrete QoI.

use alloc::vec;
use alloc::vec::Vec;

use libm::exp;

use crate::adjoint::{self, ParameterizedSystem};
use crate::error::{ModelError, ModelErrorKind};
use crate::linalg::{solve_tridiagonal, SymBanded};
use crate::models::{check_level, Level, LevelLadder, Model, QoiRecord};
use crate::space::ParameterSpace;

const GAUSS5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS5_W: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Gauss–Legendre rule on `[a, b]`.
fn gauss(a: f64, b: f64, mut f: impl FnMut(f64, f64)) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (x, w) in GAUSS5_X.iter().zip(&GAUSS5_W) {
        f(mid + half * x, w * half);
    }
}

/// How the QoI functionals are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QoiNormalization {
    /// `∫ v dx` over each window.
    Integral,
    /// `(1/|window|) ∫ v dx`; the observed data of the reference problem
    /// live on this scale.
    #[default]
    Average,
}

/// Discretization used for the adjoint in the error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AdjointEnrichment {
    /// Quadratic finite elements on the mesh of width `h/2`.
    #[default]
    QuadraticHalfMesh,
    /// The same centered differences on the mesh of width `h/2`.
    LinearHalfMesh,
}

#[derive(Debug, Clone)]
pub struct Elliptic1d {
    space: ParameterSpace,
    levels: LevelLadder,
    windows: [(f64, f64); 2],
    normalization: QoiNormalization,
    enrichment: AdjointEnrichment,
}

impl Default for Elliptic1d {
    fn default() -> Self {
        Elliptic1d {
            space: ParameterSpace::cube(2, 1.0, 5.0).expect("valid box"),
            levels: LevelLadder::new(vec![0.2, 0.1, 0.05, 0.025, 0.0125]).expect("valid ladder"),
            windows: [(0.1, 0.4), (0.6, 0.9)],
            normalization: QoiNormalization::Average,
            enrichment: AdjointEnrichment::QuadraticHalfMesh,
        }
    }
}

impl Elliptic1d {
    pub fn with_normalization(mut self, n: QoiNormalization) -> Self {
        self.normalization = n;
        self
    }

    pub fn with_enrichment(mut self, e: AdjointEnrichment) -> Self {
        self.enrichment = e;
        self
    }

    /// Replaces the mesh ladder. Every width must divide the unit interval.
    pub fn with_levels(mut self, levels: LevelLadder) -> Option<Self> {
        let ok = levels.steps().iter().all(|h| {
            let n = libm::round(1.0 / h);
            n >= 2.0 && libm::fabs(n * h - 1.0) < 1e-12
        });
        if !ok {
            return None;
        }
        self.levels = levels;
        Some(self)
    }

    pub fn normalization(&self) -> QoiNormalization {
        self.normalization
    }

    fn scale(&self, k: usize) -> f64 {
        match self.normalization {
            QoiNormalization::Integral => 1.0,
            QoiNormalization::Average => 1.0 / (self.windows[k].1 - self.windows[k].0),
        }
    }

    /// Closed-form solution `v(x)`.
    pub fn exact_solution(lambda: &[f64], x: f64) -> f64 {
        let (l1, l2) = (lambda[0], lambda[1]);
        (-exp(l2 * x) - x + x * exp(l2) + 1.0) / (l1 * l2 * l2)
    }

    /// Closed-form `v'(x)`.
    pub fn exact_flux(lambda: &[f64], x: f64) -> f64 {
        let (l1, l2) = (lambda[0], lambda[1]);
        (-l2 * exp(l2 * x) - 1.0 + exp(l2)) / (l1 * l2 * l2)
    }

    fn exact_window_integral(lambda: &[f64], a: f64, c: f64) -> f64 {
        let (l1, l2) = (lambda[0], lambda[1]);
        let anti = |x: f64| -exp(l2 * x) / l2 - 0.5 * x * x + 0.5 * x * x * exp(l2) + x;
        (anti(c) - anti(a)) / (l1 * l2 * l2)
    }

    /// QoI weights for nodal values on the centered-difference mesh.
    fn fd_weights(&self, h: f64, n: usize) -> [Vec<f64>; 2] {
        let mut out = [vec![0.0; n], vec![0.0; n]];
        for (k, w) in out.iter_mut().enumerate() {
            let (a, c) = self.windows[k];
            let s = self.scale(k);
            for (i, wi) in w.iter_mut().enumerate() {
                let xi = (i + 1) as f64 * h;
                *wi = s * hat_integral(xi, h, a, c);
            }
        }
        out
    }

    fn solve_forward(&self, lambda: &[f64], h: f64, level: Level) -> Result<(FdSystem, Vec<f64>), ModelError> {
        let sys = FdSystem::new(lambda, h);
        let n = sys.n;
        let off = -sys.lam1 / (h * h);
        let u = solve_tridiagonal(&vec![off; n - 1], &vec![-2.0 * off; n], &vec![off; n - 1], &sys.rhs())
            .ok_or_else(|| fail(lambda, level, ModelErrorKind::SingularSystem))?;
        Ok((sys, u))
    }

    fn enriched_estimate(&self, lambda: &[f64], h: f64, u: &[f64], level: Level) -> Result<Vec<f64>, ModelError> {
        let hf = 0.5 * h;
        let est = match self.enrichment {
            AdjointEnrichment::QuadraticHalfMesh => {
                let sys = P2System::new(lambda, hf);
                let psi: Vec<Vec<f64>> = (0..2)
                    .map(|k| {
                        let (a, c) = self.windows[k];
                        sys.window_load(a, c, self.scale(k))
                    })
                    .collect();
                let phis = psi
                    .iter()
                    .map(|p| sys.matrix.solve(p))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| fail(lambda, level, ModelErrorKind::SingularSystem))?;
                let injected: Vec<f64> = (0..sys.size()).map(|j| interpolate(u, h, sys.node(j))).collect();
                adjoint::error_estimate(&sys, &injected, &phis)
            }
            AdjointEnrichment::LinearHalfMesh => {
                let sys = FdSystem::new(lambda, hf);
                let n = sys.n;
                let weights = self.fd_weights(hf, n);
                let off = -sys.lam1 / (hf * hf);
                let phis = weights
                    .iter()
                    .map(|w| solve_tridiagonal(&vec![off; n - 1], &vec![-2.0 * off; n], &vec![off; n - 1], w))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| fail(lambda, level, ModelErrorKind::SingularSystem))?;
                let injected: Vec<f64> = (0..n).map(|i| interpolate(u, h, (i + 1) as f64 * hf)).collect();
                adjoint::error_estimate(&sys, &injected, &phis)
            }
        };
        est.map_err(|_| fail(lambda, level, ModelErrorKind::NonFinite))
    }
}

fn fail(lambda: &[f64], level: Level, kind: ModelErrorKind) -> ModelError {
    ModelError {
        lambda: lambda.to_vec(),
        level: level.get() as usize,
        kind,
    }
}

/// `∫_a^c` of the hat function centred at `xi` with half-width `h`.
fn hat_integral(xi: f64, h: f64, a: f64, c: f64) -> f64 {
    let hat = |x: f64| (1.0 - libm::fabs(x - xi) / h).max(0.0);
    let mut breaks = [a, c, xi - h, xi, xi + h];
    breaks.sort_by(f64::total_cmp);
    breaks
        .windows(2)
        .map(|w| {
            let (p, q) = (w[0].max(a), w[1].min(c));
            if q > p {
                0.5 * (hat(p) + hat(q)) * (q - p)
            } else {
                0.0
            }
        })
        .sum()
}

/// Piecewise-linear interpolant of interior nodal values (zero at the ends).
fn interpolate(u: &[f64], h: f64, x: f64) -> f64 {
    let t = x / h;
    let k = libm::floor(t) as isize;
    let frac = t - k as f64;
    let at = |j: isize| -> f64 {
        if j <= 0 || j as usize > u.len() {
            0.0
        } else {
            u[j as usize - 1]
        }
    };
    if frac < 1e-12 {
        return at(k);
    }
    (1.0 - frac) * at(k) + frac * at(k + 1)
}

/// Centered differences: `(λ₁/h²) tridiag(−1, 2, −1) u = exp(λ₂ xᵢ)`.
struct FdSystem {
    lam1: f64,
    lam2: f64,
    h: f64,
    n: usize,
}

impl FdSystem {
    fn new(lambda: &[f64], h: f64) -> Self {
        FdSystem {
            lam1: lambda[0],
            lam2: lambda[1],
            h,
            n: libm::round(1.0 / h) as usize - 1,
        }
    }

    fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    fn stencil(&self, x: &[f64], scale: f64) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                scale * (2.0 * x[i] - left - right)
            })
            .collect()
    }
}

impl ParameterizedSystem for FdSystem {
    fn size(&self) -> usize {
        self.n
    }

    fn num_params(&self) -> usize {
        2
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.stencil(x, self.lam1 / (self.h * self.h))
    }

    fn rhs(&self) -> Vec<f64> {
        (0..self.n).map(|i| exp(self.lam2 * self.x(i))).collect()
    }

    fn apply_param_derivative(&self, i: usize, x: &[f64]) -> Option<Vec<f64>> {
        match i {
            0 => Some(self.stencil(x, 1.0 / (self.h * self.h))),
            1 => Some(vec![0.0; self.n]),
            _ => None,
        }
    }

    fn rhs_param_derivative(&self, i: usize) -> Option<Vec<f64>> {
        match i {
            0 => Some(vec![0.0; self.n]),
            1 => Some((0..self.n).map(|j| self.x(j) * exp(self.lam2 * self.x(j))).collect()),
            _ => None,
        }
    }
}

/// Quadratic Lagrange elements of width `hf`; interior nodes ordered left to right.
struct P2System {
    lam2: f64,
    hf: f64,
    elements: usize,
    matrix: SymBanded,
}

impl P2System {
    fn new(lambda: &[f64], hf: f64) -> Self {
        let elements = libm::round(1.0 / hf) as usize;
        let n = 2 * elements - 1;
        let mut matrix = SymBanded::zeros(n, 2);
        let ke = [[7.0, -8.0, 1.0], [-8.0, 16.0, -8.0], [1.0, -8.0, 7.0]];
        let s = lambda[0] / (3.0 * hf);
        for e in 0..elements {
            let dofs = Self::element_dofs(e, n);
            for (a, da) in dofs.iter().enumerate() {
                for (b, db) in dofs.iter().enumerate() {
                    if let (Some(i), Some(j)) = (da, db) {
                        if i <= j {
                            matrix.add(*i, *j, s * ke[a][b]);
                        }
                    }
                }
            }
        }
        P2System {
            lam2: lambda[1],
            hf,
            elements,
            matrix,
        }
    }

    /// Interior dof index of the (left, middle, right) nodes of element `e`.
    fn element_dofs(e: usize, n: usize) -> [Option<usize>; 3] {
        let global = [2 * e, 2 * e + 1, 2 * e + 2];
        global.map(|g| if g == 0 || g > n { None } else { Some(g - 1) })
    }

    fn node(&self, j: usize) -> f64 {
        (j + 1) as f64 * 0.5 * self.hf
    }

    fn shape(s: f64) -> [f64; 3] {
        [2.0 * (s - 0.5) * (s - 1.0), 4.0 * s * (1.0 - s), 2.0 * s * (s - 0.5)]
    }

    /// `∫ g N_j` assembled element by element with `g` sampled on `[lo, hi]`.
    fn load(&self, mut g: impl FnMut(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![0.0; n];
        for e in 0..self.elements {
            let x0 = e as f64 * self.hf;
            let (a, b) = (x0.max(lo), (x0 + self.hf).min(hi));
            if b <= a {
                continue;
            }
            let dofs = Self::element_dofs(e, n);
            gauss(a, b, |x, w| {
                let gx = g(x) * w;
                let sh = Self::shape((x - x0) / self.hf);
                for (d, v) in dofs.iter().zip(sh) {
                    if let Some(d) = d {
                        out[*d] += gx * v;
                    }
                }
            });
        }
        out
    }

    fn window_load(&self, a: f64, c: f64, scale: f64) -> Vec<f64> {
        self.load(|_| scale, a, c)
    }
}

impl ParameterizedSystem for P2System {
    fn size(&self) -> usize {
        self.matrix.n()
    }

    fn num_params(&self) -> usize {
        2
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.apply(x)
    }

    fn rhs(&self) -> Vec<f64> {
        let l2 = self.lam2;
        self.load(|x| exp(l2 * x), 0.0, 1.0)
    }
}

impl Model for Elliptic1d {
    fn name(&self) -> &str {
        "elliptic1d"
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn qoi_dim(&self) -> usize {
        2
    }

    fn levels(&self) -> &LevelLadder {
        &self.levels
    }

    fn evaluate(&self, lambda: &[f64], level: Level, want_gradient: bool) -> Result<QoiRecord, ModelError> {
        let h = check_level(&self.levels, lambda, level)?;
        let (sys, u) = self.solve_forward(lambda, h, level)?;
        let weights = self.fd_weights(h, sys.n);
        let q: Vec<f64> = weights.iter().map(|w| crate::linalg::dot(w, &u)).collect();
        let error_estimate = self.enriched_estimate(lambda, h, &u, level)?;
        let jacobian = if want_gradient {
            let n = sys.n;
            let off = -sys.lam1 / (h * h);
            // the operator is symmetric, so the adjoint solve reuses the forward stencil
            let phis = weights
                .iter()
                .map(|w| solve_tridiagonal(&vec![off; n - 1], &vec![-2.0 * off; n], &vec![off; n - 1], w))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| fail(lambda, level, ModelErrorKind::SingularSystem))?;
            Some(adjoint::gradient(&sys, &u, &phis).map_err(|_| fail(lambda, level, ModelErrorKind::NonFinite))?)
        } else {
            None
        };
        if q.iter().chain(&error_estimate).any(|v| !v.is_finite()) {
            return Err(fail(lambda, level, ModelErrorKind::NonFinite));
        }
        Ok(QoiRecord {
            lambda: lambda.to_vec(),
            level,
            q,
            error_estimate,
            jacobian,
        })
    }

    fn exact_qoi(&self, lambda: &[f64]) -> Option<Vec<f64>> {
        Some(
            (0..2)
                .map(|k| {
                    let (a, c) = self.windows[k];
                    self.scale(k) * Self::exact_window_integral(lambda, a, c)
                })
                .collect(),
        )
    }
}
