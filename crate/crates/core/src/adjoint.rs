//! Adjoint-weighted residuals for parameterized linear systems `A(λ) u = b(λ)`.
//!
//! For a QoI `Q = ⟨u, ψ⟩` and an adjoint `Aᵀ φ = ψ`:
//!
//! * the error of an approximate `u_h` is `Q(u) − Q(u_h) = ⟨b − A u_h, φ⟩`,
//! * the parameter derivative is `∂ᵢQ = ⟨∂ᵢb − (∂ᵢA) u, φ⟩`.
//!
//! With `φ` taken from a richer discretization the first identity becomes a
//! computable error estimate; with `φ` from the same discretization as `u`
//! the second is the exact derivative of the discrete QoI.

use alloc::vec::Vec;

use crate::error::{check_dim, Error};
use crate::linalg::{dot, Matrix};
use crate::Result;

/// A linear system whose operator and right-hand side depend on parameters.
pub trait ParameterizedSystem {
    fn size(&self) -> usize;

    fn num_params(&self) -> usize;

    /// `A(λ) x`.
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// `b(λ)`.
    fn rhs(&self) -> Vec<f64>;

    /// `(∂A/∂λᵢ) x`; `None` when no derivative assembler exists.
    fn apply_param_derivative(&self, _i: usize, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `∂b/∂λᵢ`; `None` when no derivative assembler exists.
    fn rhs_param_derivative(&self, _i: usize) -> Option<Vec<f64>> {
        None
    }
}

/// `b − A u`.
pub fn residual<S: ParameterizedSystem + ?Sized>(sys: &S, u: &[f64]) -> Result<Vec<f64>> {
    check_dim(sys.size(), u.len())?;
    let au = sys.apply(u);
    Ok(sys.rhs().iter().zip(&au).map(|(b, a)| b - a).collect())
}

/// Error estimates `e_k = ⟨b − A u, φ_k⟩`, one per adjoint solution.
///
/// `u` must already be expressed in the discretization of `sys` (the
/// forward solution injected into the enriched space).
pub fn error_estimate<S: ParameterizedSystem + ?Sized>(
    sys: &S,
    u: &[f64],
    adjoints: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let r = residual(sys, u)?;
    adjoints
        .iter()
        .map(|phi| {
            check_dim(sys.size(), phi.len())?;
            Ok(dot(&r, phi))
        })
        .collect()
}

/// Jacobian `J[k][i] = ⟨∂ᵢb − (∂ᵢA) u, φ_k⟩`.
pub fn gradient<S: ParameterizedSystem + ?Sized>(
    sys: &S,
    u: &[f64],
    adjoints: &[Vec<f64>],
) -> Result<Matrix> {
    check_dim(sys.size(), u.len())?;
    let n = sys.num_params();
    let mut jac = Matrix::zeros(adjoints.len(), n);
    for i in 0..n {
        let db = sys.rhs_param_derivative(i);
        let dau = sys.apply_param_derivative(i, u);
        if db.is_none() && dau.is_none() {
            return Err(Error::Unsupported("parameter derivative assembler missing"));
        }
        let mut col: Vec<f64> = db.unwrap_or_else(|| alloc::vec![0.0; sys.size()]);
        if let Some(dau) = dau {
            for (c, d) in col.iter_mut().zip(&dau) {
                *c -= d;
            }
        }
        for (k, phi) in adjoints.iter().enumerate() {
            check_dim(sys.size(), phi.len())?;
            jac.set(k, i, dot(&col, phi));
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// `diag(λ₀, λ₀) u = [1, λ₁]`, with derivative assemblers only for λ₀/λ₁.
    struct Toy {
        lam: [f64; 3],
    }

    impl ParameterizedSystem for Toy {
        fn size(&self) -> usize {
            2
        }
        fn num_params(&self) -> usize {
            3
        }
        fn apply(&self, x: &[f64]) -> Vec<f64> {
            vec![self.lam[0] * x[0], self.lam[0] * x[1]]
        }
        fn rhs(&self) -> Vec<f64> {
            vec![1.0, self.lam[1]]
        }
        fn apply_param_derivative(&self, i: usize, x: &[f64]) -> Option<Vec<f64>> {
            match i {
                0 => Some(x.to_vec()),
                1 | 2 => Some(vec![0.0, 0.0]),
                _ => None,
            }
        }
        fn rhs_param_derivative(&self, i: usize) -> Option<Vec<f64>> {
            match i {
                0 | 2 => Some(vec![0.0, 0.0]),
                1 => Some(vec![0.0, 1.0]),
                _ => None,
            }
        }
    }

    #[test]
    fn exact_solution_has_zero_estimate() {
        let t = Toy { lam: [2.0, 3.0, 0.0] };
        let u = [0.5, 1.5];
        let e = error_estimate(&t, &u, &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(e, vec![0.0]);
    }

    #[test]
    fn estimate_is_linear_in_residual() {
        let t = Toy { lam: [2.0, 3.0, 0.0] };
        let exact = [0.5, 1.5];
        let phi = vec![vec![0.3, -0.7]];
        let du = [0.01, -0.02];
        let u1: Vec<f64> = exact.iter().zip(&du).map(|(a, b)| a + b).collect();
        let u2: Vec<f64> = exact.iter().zip(&du).map(|(a, b)| a + 2.0 * b).collect();
        let e1 = error_estimate(&t, &u1, &phi).unwrap()[0];
        let e2 = error_estimate(&t, &u2, &phi).unwrap()[0];
        assert!((e2 - 2.0 * e1).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_toy() {
        // Q = u₀ + u₁ = (1 + λ₁)/λ₀; adjoint φ = ψ/λ₀
        let lam = [2.0, 3.0, 5.0];
        let t = Toy { lam };
        let u = [1.0 / lam[0], lam[1] / lam[0]];
        let phi = vec![vec![1.0 / lam[0], 1.0 / lam[0]]];
        let j = gradient(&t, &u, &phi).unwrap();
        assert!((j.get(0, 0) + (1.0 + lam[1]) / (lam[0] * lam[0])).abs() < 1e-15);
        assert!((j.get(0, 1) - 1.0 / lam[0]).abs() < 1e-15);
        // neither A nor b depends on λ₂
        assert_eq!(j.get(0, 2), 0.0);
    }

    #[test]
    fn missing_assembler_is_unsupported() {
        struct NoDeriv;
        impl ParameterizedSystem for NoDeriv {
            fn size(&self) -> usize {
                1
            }
            fn num_params(&self) -> usize {
                1
            }
            fn apply(&self, x: &[f64]) -> Vec<f64> {
                x.to_vec()
            }
            fn rhs(&self) -> Vec<f64> {
                vec![1.0]
            }
        }
        assert!(matches!(
            gradient(&NoDeriv, &[1.0], &[vec![1.0]]),
            Err(Error::Unsupported(_))
        ));
    }
}
