//! Bayesian posterior and random-walk Metropolis–Hastings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error};
use crate::rng::StreamRng;
use crate::space::{ParameterSpace, Tessellation};
use crate::surrogate::Surrogate;
use crate::Result;

/// Uniform prior on a box, Gaussian noise with independent components.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorProblem {
    space: ParameterSpace,
    data: Vec<f64>,
    sigma: Vec<f64>,
}

impl PosteriorProblem {
    pub fn new(space: ParameterSpace, data: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        check_dim(data.len(), sigma.len())?;
        if data.is_empty() {
            return Err(Error::invalid("posterior needs at least one datum"));
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid(format!("noise standard deviation {s} is not positive")));
        }
        if data.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("non-finite datum"));
        }
        Ok(PosteriorProblem { space, data, sigma })
    }

    /// Same standard deviation for every component.
    pub fn isotropic(space: ParameterSpace, data: Vec<f64>, sigma: f64) -> Result<Self> {
        let s = vec![sigma; data.len()];
        Self::new(space, data, s)
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `−Σ (y_k − q_k)² / (2σ_k²)`.
    #[inline]
    pub fn misfit(&self, q: &[f64]) -> f64 {
        -self
            .data
            .iter()
            .zip(&self.sigma)
            .zip(q)
            .map(|((y, s), q)| {
                let r = (y - q) / s;
                0.5 * r * r
            })
            .sum::<f64>()
    }

    /// Unnormalized log density; `−∞` outside the prior box.
    #[inline]
    pub fn log_posterior(&self, q: &[f64], x: &[f64]) -> f64 {
        if self.space.contains(x) {
            self.misfit(q) - libm::log(self.space.volume())
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MhConfig {
    /// Total number of steps, burn-in included.
    pub steps: usize,
    pub burn_in: usize,
    /// Proposal standard deviation as a fraction of each box width.
    pub proposal_scale: f64,
}

impl MhConfig {
    /// `steps` total with a tenth discarded and the default proposal scale.
    pub fn new(steps: usize) -> Self {
        MhConfig {
            steps,
            burn_in: steps / 10,
            proposal_scale: 0.05,
        }
    }

    /// Enough steps to keep `kept` states after the default burn-in.
    pub fn keeping(kept: usize) -> Self {
        let steps = kept + kept / 9;
        MhConfig {
            steps,
            burn_in: steps - kept,
            proposal_scale: 0.05,
        }
    }

    pub fn kept(&self) -> usize {
        self.steps - self.burn_in
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::invalid(format!(
                "chain length {} must exceed burn-in {}",
                self.steps, self.burn_in
            )));
        }
        if !(self.proposal_scale.is_finite() && self.proposal_scale > 0.0) {
            return Err(Error::invalid("proposal scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ChainWarning {
    /// No proposal was accepted; the chain never left its start.
    NoAcceptance,
}

/// Counters of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub accepted: usize,
    pub proposed: usize,
}

impl RunStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn warning(&self) -> Option<ChainWarning> {
        (self.accepted == 0 && self.proposed > 0).then_some(ChainWarning::NoAcceptance)
    }
}

/// Metropolis acceptance: accept with probability `min(1, exp(delta))`.
#[inline]
pub fn accept<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    libm::log(u) < delta
}

/// Random-walk Metropolis–Hastings with a pluggable log density.
///
/// `log_density` returns the density together with a payload that is handed
/// to `visit` for every post-burn-in state. Exactly `dim + 1` random numbers
/// are consumed per step whatever happens, so two runs with the same seed
/// propose the same moves and compare against the same uniforms.
pub fn sample<T, E, L, V>(
    space: &ParameterSpace,
    cfg: &MhConfig,
    start: &[f64],
    rng: &mut StreamRng,
    mut log_density: L,
    mut visit: V,
) -> core::result::Result<RunStats, E>
where
    T: Clone,
    E: From<Error>,
    L: FnMut(&[f64]) -> core::result::Result<(f64, T), E>,
    V: FnMut(&[f64], &T),
{
    cfg.validate()?;
    check_dim(space.dim(), start.len())?;
    if !space.contains(start) {
        return Err(Error::invalid("chain start outside the parameter box").into());
    }
    let n = space.dim();
    let scale: Vec<f64> = (0..n).map(|d| cfg.proposal_scale * space.width(d)).collect();
    let mut cur = start.to_vec();
    let mut prop = vec![0.0; n];
    let (mut lp_cur, mut t_cur) = log_density(&cur)?;
    let mut stats = RunStats::default();
    for step in 0..cfg.steps {
        for d in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            prop[d] = cur[d] + scale[d] * z;
        }
        let u: f64 = rng.random();
        stats.proposed += 1;
        if space.contains(&prop) {
            let (lp, t) = log_density(&prop)?;
            if lp_cur == f64::NEG_INFINITY || libm::log(u) < lp - lp_cur {
                core::mem::swap(&mut cur, &mut prop);
                lp_cur = lp;
                t_cur = t;
                stats.accepted += 1;
            }
        }
        if step >= cfg.burn_in {
            visit(&cur, &t_cur);
        }
    }
    Ok(stats)
}

/// Post-burn-in states of a chain on a surrogate, with the cell of each state.
#[derive(Debug, Clone)]
pub struct Chain {
    dim: usize,
    states: Vec<f64>,
    cells: Vec<u32>,
    pub stats: RunStats,
    pub seed: u64,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.states.chunks_exact(self.dim)
    }

    /// Surrogate cell of every state.
    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.stats.acceptance_rate()
    }

    pub fn warning(&self) -> Option<ChainWarning> {
        self.stats.warning()
    }

    /// Flat states and cell indices.
    pub fn into_parts(self) -> (Vec<f64>, Vec<u32>) {
        (self.states, self.cells)
    }

    /// Wraps externally produced states, assigning each to its cell.
    pub fn from_parts(dim: usize, states: Vec<f64>, tess: &Tessellation) -> Self {
        let cells = states
            .chunks_exact(dim)
            .map(|x| tess.nearest_unchecked(x) as u32)
            .collect();
        Chain {
            dim,
            states,
            cells,
            stats: RunStats::default(),
            seed: 0,
        }
    }
}

/// Samples the posterior induced by the plain or enhanced surrogate.
pub fn metropolis_hastings(
    problem: &PosteriorProblem,
    surrogate: &Surrogate,
    enhanced: bool,
    cfg: &MhConfig,
    start: &[f64],
    seed: u64,
) -> Result<Chain> {
    check_dim(problem.data.len(), surrogate.qoi_dim())?;
    check_dim(problem.space.dim(), surrogate.dim())?;
    let mut rng = <StreamRng as rand::SeedableRng>::seed_from_u64(seed);
    let mut q = vec![0.0; surrogate.qoi_dim()];
    let kept = cfg.steps.saturating_sub(cfg.burn_in);
    let mut states = Vec::with_capacity(kept * surrogate.dim());
    let mut cells = Vec::with_capacity(kept);
    let stats = sample::<u32, Error, _, _>(
        &problem.space,
        cfg,
        start,
        &mut rng,
        |x| {
            let c = surrogate.eval_into(x, enhanced, &mut q);
            Ok((problem.log_posterior(&q, x), c as u32))
        },
        |x, c| {
            states.extend_from_slice(x);
            cells.push(*c);
        },
    )?;
    Ok(Chain {
        dim: surrogate.dim(),
        states,
        cells,
        stats,
        seed,
    })
}

/// `count_i / M` from per-state cell indices.
pub fn probabilities_from_cells(cells: &[u32], n_cells: usize) -> Result<Vec<f64>> {
    if cells.is_empty() {
        return Err(Error::invalid("empty chain"));
    }
    let mut p = vec![0.0; n_cells];
    for &c in cells {
        let slot = p
            .get_mut(c as usize)
            .ok_or_else(|| Error::invalid(format!("cell index {c} out of range")))?;
        *slot += 1.0;
    }
    let m = cells.len() as f64;
    for v in &mut p {
        *v /= m;
    }
    Ok(p)
}

/// Cell probabilities of an arbitrary chain on a tessellation.
pub fn cell_probabilities(chain: &Chain, tess: &Tessellation) -> Result<Vec<f64>> {
    check_dim(tess.dim(), chain.dim())?;
    let cells: Vec<u32> = chain.states().map(|x| tess.nearest_unchecked(x) as u32).collect();
    probabilities_from_cells(&cells, tess.len())
}

/// Running mean with a batch-means estimate of its Monte Carlo error.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_len: usize,
    current: f64,
    in_current: usize,
    batch_sums: Vec<f64>,
    total: f64,
    count: usize,
}

impl BatchMeans {
    /// `expected` values split into `batches` batches.
    pub fn new(expected: usize, batches: usize) -> Self {
        BatchMeans {
            batch_len: (expected / batches.max(1)).max(1),
            current: 0.0,
            in_current: 0,
            batch_sums: Vec::new(),
            total: 0.0,
            count: 0,
        }
    }

    pub fn push(&mut self, v: f64) {
        self.total += v;
        self.count += 1;
        self.current += v;
        self.in_current += 1;
        if self.in_current == self.batch_len {
            self.batch_sums.push(self.current);
            self.current = 0.0;
            self.in_current = 0;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.total / self.count as f64
    }

    /// Standard error of the mean; `NaN` with fewer than two full batches.
    pub fn standard_error(&self) -> f64 {
        let b = self.batch_sums.len();
        if b < 2 {
            return f64::NAN;
        }
        let len = self.batch_len as f64;
        let means: Vec<f64> = self.batch_sums.iter().map(|s| s / len).collect();
        let mu = means.iter().sum::<f64>() / b as f64;
        let var = means.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / (b - 1) as f64;
        libm::sqrt(var / b as f64)
    }
}

/// Mean and batch-means standard error of a sequence.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let mut bm = BatchMeans::new(values.len(), batches);
    for &v in values {
        bm.push(v);
    }
    (bm.mean(), bm.standard_error())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Level;
    use crate::surrogate::{Order, SurrogateCell};
    use rand::SeedableRng;

    fn unit() -> ParameterSpace {
        ParameterSpace::cube(1, 0.0, 1.0).unwrap()
    }

    fn two_cells(q0: f64, q1: f64) -> Surrogate {
        let cell = |g: f64, q: f64| SurrogateCell {
            generator: vec![g],
            level: Level::new(1),
            order: Order::Constant,
            q: vec![q],
            error_estimate: vec![0.0],
            jacobian: None,
        };
        Surrogate::new(vec![cell(0.25, q0), cell(0.75, q1)]).unwrap()
    }

    #[test]
    fn log_posterior_examples() {
        let p = PosteriorProblem::isotropic(ParameterSpace::cube(2, 1.0, 5.0).unwrap(), vec![0.22, 0.15], 0.05)
            .unwrap();
        assert_eq!(p.misfit(&[0.22, 0.15]), 0.0);
        assert!((p.misfit(&[0.27, 0.15]) + 0.5).abs() < 1e-12);
        assert_eq!(p.log_posterior(&[0.22, 0.15], &[0.5, 2.0]), f64::NEG_INFINITY);
        assert!(PosteriorProblem::isotropic(unit(), vec![1.0], 0.0).is_err());
        assert!(PosteriorProblem::new(unit(), vec![1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn acceptance_frequency_matches_exp_delta() {
        let mut rng = StreamRng::seed_from_u64(11);
        let n = 100_000;
        let hits = (0..n).filter(|_| accept(-0.5, &mut rng)).count();
        assert!((hits as f64 / n as f64 - libm::exp(-0.5)).abs() < 0.01);
    }

    #[test]
    fn flat_posterior_accepts_almost_everything() {
        let p = PosteriorProblem::isotropic(unit(), vec![0.0], 1e12).unwrap();
        let s = two_cells(0.0, 1.0);
        let c = metropolis_hastings(&p, &s, false, &MhConfig::new(20_000), &[0.5], 1).unwrap();
        assert!(c.acceptance_rate() >= 0.9, "{}", c.acceptance_rate());
        // only proposals that leave the box are rejected
        let states: Vec<f64> = c.states().map(|x| x[0]).collect();
        assert!(states.iter().all(|x| (0.0..=1.0).contains(x)));
        let probs = probabilities_from_cells(c.cells(), 2).unwrap();
        assert!((probs[0] - 0.5).abs() < 0.05);
    }

    #[test]
    fn identical_seeds_identical_chains() {
        let p = PosteriorProblem::isotropic(unit(), vec![0.3], 0.5).unwrap();
        let s = two_cells(0.0, 1.0);
        let cfg = MhConfig::new(5000);
        let a = metropolis_hastings(&p, &s, false, &cfg, &[0.5], 9).unwrap();
        let b = metropolis_hastings(&p, &s, false, &cfg, &[0.5], 9).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.cells, b.cells);
        let c = metropolis_hastings(&p, &s, false, &cfg, &[0.5], 10).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn two_cell_target_frequencies() {
        // cell 1 is exp(-0.5·(1/0.8)²)·... less likely than cell 0 (equal volumes)
        let p = PosteriorProblem::isotropic(unit(), vec![0.0], 0.8).unwrap();
        let s = two_cells(0.0, 1.0);
        let cfg = MhConfig::keeping(100_000);
        let c = metropolis_hastings(&p, &s, false, &cfg, &[0.5], 3).unwrap();
        let w1 = libm::exp(p.misfit(&[1.0]));
        let expected0 = 1.0 / (1.0 + w1);
        let ind: Vec<f64> = c.cells().iter().map(|&k| if k == 0 { 1.0 } else { 0.0 }).collect();
        let (mean, se) = batch_means(&ind, 50);
        assert!((mean - expected0).abs() < 3.0 * se, "{mean} vs {expected0} (se {se})");
        assert_eq!(cell_probabilities(&c, s.tessellation()).unwrap()[0], mean);
    }

    #[test]
    fn probability_examples() {
        assert_eq!(probabilities_from_cells(&[0, 0, 1, 0], 2).unwrap(), vec![0.75, 0.25]);
        assert_eq!(probabilities_from_cells(&[0, 0], 1).unwrap(), vec![1.0]);
        assert!(probabilities_from_cells(&[], 2).is_err());
    }

    #[test]
    fn zero_acceptance_warns() {
        // the start is the only state with finite density
        let space = unit();
        let cfg = MhConfig::new(100);
        let mut rng = StreamRng::seed_from_u64(1);
        let stats = sample::<(), Error, _, _>(
            &space,
            &cfg,
            &[0.5],
            &mut rng,
            |x| Ok((if x[0] == 0.5 { 0.0 } else { f64::NEG_INFINITY }, ())),
            |_, _| {},
        )
        .unwrap();
        assert_eq!(stats.warning(), Some(ChainWarning::NoAcceptance));
    }

    #[test]
    fn batch_means_of_iid_noise() {
        let mut rng = StreamRng::seed_from_u64(5);
        let v: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let (mean, se) = batch_means(&v, 50);
        assert!((mean - 0.5).abs() < 0.01);
        let iid = libm::sqrt(1.0 / 12.0 / 100_000.0);
        assert!(se > 0.5 * iid && se < 2.0 * iid);
    }
}
