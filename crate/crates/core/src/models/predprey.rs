//! Lotka–Volterra predator–prey system
//!
//! ```text
//! x' = α x − β x y,   y' = δ x y − γ y,   (x, y)(0) = (x₀, y₀)
//! ```
//!
//! with parameters `λ = [α, β, δ, γ, x₀, y₀]`. Backward Euler with Newton's
//! method advances the state; the QoIs are `x` and `y` at `t = 5` and `t = 10`.
//! The adjoint runs backwards with Crank–Nicolson on the same grid and is
//! paired with the forward residual through the midpoint rule.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ModelError, ModelErrorKind};
use crate::linalg::{solve2, Matrix};
use crate::models::{check_level, Level, LevelLadder, Model, QoiRecord};
use crate::space::ParameterSpace;

type State = [f64; 2];

#[derive(Debug, Clone)]
pub struct PredatorPrey {
    space: ParameterSpace,
    levels: LevelLadder,
    horizon: f64,
    obs_times: [f64; 2],
    newton_tol: f64,
    newton_max_iter: usize,
}

impl Default for PredatorPrey {
    fn default() -> Self {
        PredatorPrey {
            space: ParameterSpace::cube(6, 1.0, 2.0).expect("valid box"),
            levels: LevelLadder::new(vec![0.25, 0.1, 0.01, 0.001]).expect("valid ladder"),
            horizon: 10.0,
            obs_times: [5.0, 10.0],
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

#[derive(Clone, Copy)]
struct Rates {
    alpha: f64,
    beta: f64,
    delta: f64,
    gamma: f64,
}

impl Rates {
    fn f(&self, u: State) -> State {
        let [x, y] = u;
        [self.alpha * x - self.beta * x * y, self.delta * x * y - self.gamma * y]
    }

    /// `∂F/∂u` as `[[a, b], [c, d]]`.
    fn jac(&self, u: State) -> [[f64; 2]; 2] {
        let [x, y] = u;
        [
            [self.alpha - self.beta * y, -self.beta * x],
            [self.delta * y, self.delta * x - self.gamma],
        ]
    }

    /// `∂F/∂(α, β, δ, γ)`, one column per rate.
    fn param_jac(&self, u: State) -> [State; 4] {
        let [x, y] = u;
        [[x, 0.0], [-x * y, 0.0], [0.0, x * y], [0.0, -y]]
    }
}

impl PredatorPrey {
    /// Replaces the time-step ladder; every step must divide both observation times.
    pub fn with_levels(mut self, levels: LevelLadder) -> Option<Self> {
        let divides = |t: f64, dt: f64| {
            let n = libm::round(t / dt);
            n >= 1.0 && libm::fabs(n * dt - t) < 1e-9 * t
        };
        if !levels
            .steps()
            .iter()
            .all(|&dt| self.obs_times.iter().all(|&t| divides(t, dt)) && divides(self.horizon, dt))
        {
            return None;
        }
        self.levels = levels;
        Some(self)
    }

    fn fail(lambda: &[f64], level: Level, kind: ModelErrorKind) -> ModelError {
        ModelError {
            lambda: lambda.to_vec(),
            level: level.get() as usize,
            kind,
        }
    }

    /// Backward Euler trajectory, including the initial state.
    fn forward(&self, lambda: &[f64], level: Level, rates: Rates, dt: f64, steps: usize) -> Result<Vec<State>, ModelError> {
        let mut traj = Vec::with_capacity(steps + 1);
        let mut u: State = [lambda[4], lambda[5]];
        traj.push(u);
        for _ in 0..steps {
            let prev = u;
            let mut v = prev;
            let mut converged = false;
            let mut res_norm = f64::INFINITY;
            for _ in 0..=self.newton_max_iter {
                let fv = rates.f(v);
                let g = [v[0] - prev[0] - dt * fv[0], v[1] - prev[1] - dt * fv[1]];
                res_norm = g[0].abs().max(g[1].abs());
                if !res_norm.is_finite() {
                    break;
                }
                if res_norm < self.newton_tol {
                    converged = true;
                    break;
                }
                let j = rates.jac(v);
                let step = solve2(
                    1.0 - dt * j[0][0],
                    -dt * j[0][1],
                    -dt * j[1][0],
                    1.0 - dt * j[1][1],
                    [-g[0], -g[1]],
                )
                .ok_or_else(|| Self::fail(lambda, level, ModelErrorKind::SingularSystem))?;
                v = [v[0] + step[0], v[1] + step[1]];
            }
            if !converged {
                return Err(Self::fail(
                    lambda,
                    level,
                    ModelErrorKind::NewtonDiverged {
                        residual: res_norm,
                        iterations: self.newton_max_iter,
                    },
                ));
            }
            u = v;
            traj.push(u);
        }
        Ok(traj)
    }

    /// Crank–Nicolson adjoint from step `end` back to 0 for terminal data `e_comp`.
    #[allow(clippy::type_complexity)]
    fn trajectory(&self, lambda: &[f64], level: Level) -> Result<(Rates, f64, Vec<State>, [usize; 2]), ModelError> {
        let dt = check_level(&self.levels, lambda, level)?;
        if lambda.len() != 6 {
            return Err(Self::fail(lambda, level, ModelErrorKind::NonFinite));
        }
        let rates = Rates {
            alpha: lambda[0],
            beta: lambda[1],
            delta: lambda[2],
            gamma: lambda[3],
        };
        let steps = libm::round(self.horizon / dt) as usize;
        let traj = self.forward(lambda, level, rates, dt, steps)?;
        let ends = self.obs_times.map(|t| libm::round(t / dt) as usize);
        Ok((rates, dt, traj, ends))
    }

    fn adjoint(&self, rates: Rates, traj: &[State], dt: f64, end: usize, comp: usize) -> Option<Vec<State>> {
        let mut phi = vec![[0.0; 2]; end + 1];
        phi[end][comp] = 1.0;
        for n in (0..end).rev() {
            let jn = rates.jac(traj[n]);
            let jn1 = rates.jac(traj[n + 1]);
            let p = phi[n + 1];
            // (I + dt/2 J_{n+1}ᵀ) φ_{n+1}
            let r = [
                p[0] + 0.5 * dt * (jn1[0][0] * p[0] + jn1[1][0] * p[1]),
                p[1] + 0.5 * dt * (jn1[0][1] * p[0] + jn1[1][1] * p[1]),
            ];
            // (I − dt/2 J_nᵀ) φ_n = r
            let h = 0.5 * dt;
            let s = solve2(
                1.0 - h * jn[0][0],
                -h * jn[1][0],
                -h * jn[0][1],
                1.0 - h * jn[1][1],
                r,
            )?;
            phi[n] = s;
        }
        Some(phi)
    }
}

impl Model for PredatorPrey {
    fn name(&self) -> &str {
        "predprey"
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn qoi_dim(&self) -> usize {
        4
    }

    fn levels(&self) -> &LevelLadder {
        &self.levels
    }

    fn evaluate_qoi(&self, lambda: &[f64], level: Level) -> Result<Vec<f64>, ModelError> {
        let (_, _, traj, ends) = self.trajectory(lambda, level)?;
        let q: Vec<f64> = ends.iter().flat_map(|&e| traj[e]).collect();
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Self::fail(lambda, level, ModelErrorKind::NonFinite));
        }
        Ok(q)
    }

    fn evaluate(&self, lambda: &[f64], level: Level, want_gradient: bool) -> Result<QoiRecord, ModelError> {
        let (rates, dt, traj, ends) = self.trajectory(lambda, level)?;

        let mut q = Vec::with_capacity(4);
        let mut error_estimate = Vec::with_capacity(4);
        let mut jacobian = want_gradient.then(|| Matrix::zeros(4, 6));
        for (t, &end) in ends.iter().enumerate() {
            for comp in 0..2 {
                let row = 2 * t + comp;
                q.push(traj[end][comp]);
                let phi = self
                    .adjoint(rates, &traj, dt, end, comp)
                    .ok_or_else(|| Self::fail(lambda, level, ModelErrorKind::SingularSystem))?;
                let mut est = 0.0;
                let mut grad = [0.0; 4];
                for n in 0..end {
                    let (u0, u1) = (traj[n], traj[n + 1]);
                    let um = [0.5 * (u0[0] + u1[0]), 0.5 * (u0[1] + u1[1])];
                    let pm = [0.5 * (phi[n][0] + phi[n + 1][0]), 0.5 * (phi[n][1] + phi[n + 1][1])];
                    let fm = rates.f(um);
                    let r = [fm[0] - (u1[0] - u0[0]) / dt, fm[1] - (u1[1] - u0[1]) / dt];
                    est += dt * (pm[0] * r[0] + pm[1] * r[1]);
                    if jacobian.is_some() {
                        for (g, col) in grad.iter_mut().zip(rates.param_jac(um)) {
                            *g += dt * (pm[0] * col[0] + pm[1] * col[1]);
                        }
                    }
                }
                error_estimate.push(est);
                if let Some(jac) = jacobian.as_mut() {
                    for (i, g) in grad.iter().enumerate() {
                        jac.set(row, i, *g);
                    }
                    jac.set(row, 4, phi[0][0]);
                    jac.set(row, 5, phi[0][1]);
                }
            }
        }
        if q.iter().chain(&error_estimate).any(|v| !v.is_finite()) {
            return Err(Self::fail(lambda, level, ModelErrorKind::NonFinite));
        }
        Ok(QoiRecord {
            lambda: lambda.to_vec(),
            level,
            q,
            error_estimate,
            jacobian,
        })
    }
}
