//! The adaptive loop, a uniform-refinement baseline and reference chains.
//!
//! An adaptive run is a sequence of [`AdaptiveRun::step`] calls on an
//! [`AdaptiveState`]. The state holds everything that is not a pure function
//! of `(seed, k)`, so persisting it between steps is enough to resume a run
//! bit for bit.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error};
use crate::exec::Executor;
use crate::indicators::{compute, Evidence, GammaSums, IndicatorContext, IndicatorSet};
use crate::mcmc::{metropolis_hastings, sample, BatchMeans, MhConfig, PosteriorProblem};
use crate::models::{Level, Model};
use crate::refinement::{
    apply_plan, estimate_h_gain, estimate_level_gain, mark_cells, select, Choice, Evaluation, NeighborhoodSpec,
    RefinementPlan,
};
use crate::rng::{derive_seed, stream, Stream};
use crate::space::{EmulationSet, ParameterSpace};
use crate::surrogate::{Order, Surrogate, SurrogateCell};
use crate::target::PredictionTarget;
use crate::{ModelError, Result};

/// Absolute floor of the relative stopping test.
pub const STOP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AdaptiveConfig {
    pub n0: usize,
    pub epsilon: f64,
    pub its_max: usize,
    pub alpha: f64,
    pub n_proposals: usize,
    /// Chain length including burn-in.
    pub chain_steps: usize,
    /// A tenth of the chain when unset.
    pub burn_in: Option<usize>,
    pub proposal_scale: f64,
    pub n_em: usize,
    pub seed: u64,
    /// Finest level refinement may reach; the model's finest when unset.
    pub l_max: Option<u32>,
    pub stall_window: usize,
    pub prob_tol: f64,
    pub initial_order: Order,
    pub neighbourhood: NeighborhoodSpec,
    /// Request gradients with every solve, so p-refinement needs no extra
    /// solve. The adjoint behind the error estimate makes them cheap.
    pub always_gradient: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            n0: 50,
            epsilon: 0.01,
            its_max: 30,
            alpha: 0.5,
            n_proposals: 8,
            chain_steps: 200_000,
            burn_in: None,
            proposal_scale: 0.05,
            n_em: 10_000,
            seed: 0,
            l_max: None,
            stall_window: 3,
            prob_tol: 0.0,
            initial_order: Order::Constant,
            neighbourhood: NeighborhoodSpec::default(),
            always_gradient: true,
        }
    }
}

impl AdaptiveConfig {
    pub fn chain(&self) -> MhConfig {
        MhConfig {
            steps: self.chain_steps,
            burn_in: self.burn_in.unwrap_or(self.chain_steps / 10),
            proposal_scale: self.proposal_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.chain().validate()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.n0 == 0 || self.its_max == 0 || self.stall_window == 0 {
            return Err(Error::invalid("n0, its_max and stall_window must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1]"));
        }
        if self.n_proposals == 0 || self.n_em == 0 {
            return Err(Error::invalid("n_proposals and n_em must be at least 1"));
        }
        if !(self.prob_tol >= 0.0) {
            return Err(Error::invalid("prob_tol must be nonnegative"));
        }
        if self.l_max == Some(0) {
            return Err(Error::invalid("l_max must be at least 1"));
        }
        Ok(())
    }

    pub fn l_max(&self, model: &dyn Model) -> Level {
        let top = model.max_level();
        self.l_max.map_or(top, |l| Level::new(l).min(top))
    }
}

/// Distinct `(λ, level)` model solves.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvaluationLedger {
    solves: BTreeSet<(Vec<u64>, u32)>,
}

impl EvaluationLedger {
    /// Returns whether the solve was new.
    pub fn record(&mut self, lambda: &[f64], level: Level) -> bool {
        self.solves
            .insert((lambda.iter().map(|x| x.to_bits()).collect(), level.get()))
    }

    pub fn total(&self) -> usize {
        self.solves.len()
    }

    /// Counts at levels `1..=levels`.
    pub fn per_level(&self, levels: usize) -> Vec<usize> {
        let mut out = vec![0; levels];
        for (_, l) in &self.solves {
            if let Some(c) = out.get_mut(*l as usize - 1) {
                *c += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub k: usize,
    /// Cumulative distinct solves at levels `1..=M`.
    pub evaluations: Vec<usize>,
    pub integral_plain: f64,
    pub integral_enhanced: f64,
    /// `Î_N − I_N`.
    pub error_estimate: f64,
    /// `Σ_i Ê_i`.
    pub global_indicator: f64,
    pub gamma: f64,
    pub cells: usize,
    /// Refinements decided at this iteration (all zero on the last one).
    pub p_refined: usize,
    pub level_refined: usize,
    pub h_refined: usize,
    pub acceptance_plain: f64,
    pub acceptance_enhanced: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    Converged,
    MaxIterations,
    Stalled,
    NothingToRefine,
}

/// The stopping test on the records so far.
pub fn stopping_rule(records: &[IterationRecord], cfg: &AdaptiveConfig) -> Option<StopReason> {
    let last = records.last()?;
    if libm::fabs(last.error_estimate) <= cfg.epsilon * libm::fabs(last.integral_enhanced).max(STOP_FLOOR) {
        return Some(StopReason::Converged);
    }
    if last.k >= cfg.its_max {
        return Some(StopReason::MaxIterations);
    }
    let w = cfg.stall_window;
    if records.len() > w {
        let tail = &records[records.len() - w - 1..];
        let hi = tail.iter().map(|r| r.integral_enhanced).fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().map(|r| r.integral_enhanced).fold(f64::INFINITY, f64::min);
        if hi - lo <= cfg.epsilon * libm::fabs(last.integral_enhanced) {
            return Some(StopReason::Stalled);
        }
    }
    None
}

/// Everything an adaptive run carries from one iteration to the next.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdaptiveState {
    /// Index of the next iteration to analyse.
    pub k: usize,
    pub cells: Vec<SurrogateCell>,
    pub ledger: EvaluationLedger,
    pub records: Vec<IterationRecord>,
    pub stopped: Option<StopReason>,
}

impl AdaptiveState {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// Analysis of one surrogate: both chains, indicators and the cell
/// summaries they came from.
pub struct Analysis {
    pub surrogate: Surrogate,
    pub indicators: IndicatorSet,
    pub evidence: Evidence,
    pub stats: Vec<crate::indicators::CellStats>,
    pub context: IndicatorContext,
    pub acceptance: (f64, f64),
}

/// Immutable inputs of an adaptive run.
pub struct AdaptiveRun<'a, E: Executor> {
    pub model: &'a dyn Model,
    pub problem: &'a PosteriorProblem,
    pub target: &'a PredictionTarget,
    pub cfg: &'a AdaptiveConfig,
    pub exec: &'a E,
    emulation: Vec<Vec<f64>>,
}

fn model_err(e: ModelError) -> Error {
    Error::Model(e)
}

/// Generator with the largest enhanced log-posterior; lowest index on ties.
pub fn chain_start(problem: &PosteriorProblem, surrogate: &Surrogate, enhanced: bool) -> Vec<f64> {
    let mut q = vec![0.0; surrogate.qoi_dim()];
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, c) in surrogate.cells().iter().enumerate() {
        c.eval_into(&c.generator, enhanced, &mut q);
        let lp = problem.log_posterior(&q, &c.generator);
        if lp > best.0 {
            best = (lp, i);
        }
    }
    surrogate.cell(best.1).generator.clone()
}

impl<'a, E: Executor> AdaptiveRun<'a, E> {
    pub fn new(
        model: &'a dyn Model,
        problem: &'a PosteriorProblem,
        target: &'a PredictionTarget,
        cfg: &'a AdaptiveConfig,
        exec: &'a E,
    ) -> Result<Self> {
        cfg.validate()?;
        check_dim(model.space().dim(), problem.space().dim())?;
        check_dim(model.qoi_dim(), problem.data().len())?;
        let mut rng = stream(cfg.seed, Stream::Emulation, 0, 0);
        let emulation = problem.space().sample_uniform(cfg.n_em, &mut rng);
        Ok(AdaptiveRun {
            model,
            problem,
            target,
            cfg,
            exec,
            emulation,
        })
    }

    fn space(&self) -> &ParameterSpace {
        self.problem.space()
    }

    /// `N₀` uniform samples solved at level 1.
    pub fn initialize(&self) -> Result<AdaptiveState> {
        let mut rng = stream(self.cfg.seed, Stream::InitialSamples, 0, 0);
        let points = self.space().sample_uniform(self.cfg.n0, &mut rng);
        let gradient = self.cfg.always_gradient || self.cfg.initial_order == Order::Linear;
        let order = self.cfg.initial_order;
        let recs = self
            .exec
            .map(points, |x| self.model.evaluate(&x, Level::new(1), gradient));
        let mut ledger = EvaluationLedger::default();
        let mut cells = Vec::with_capacity(recs.len());
        for r in recs {
            let r = r.map_err(model_err)?;
            ledger.record(&r.lambda, r.level);
            cells.push(SurrogateCell::from_record(r, order));
        }
        Ok(AdaptiveState {
            k: 0,
            cells,
            ledger,
            records: Vec::new(),
            stopped: None,
        })
    }

    /// Chains on the plain and enhanced surrogates of `cells` at iteration `k`.
    pub fn analyse(&self, cells: Vec<SurrogateCell>, k: usize) -> Result<Analysis> {
        let surrogate = Surrogate::new(cells)?;
        let start = chain_start(self.problem, &surrogate, true);
        let seed = derive_seed(self.cfg.seed, Stream::Chain, k as u64, 0);
        let chain = self.cfg.chain();
        let chains = self.exec.map(vec![false, true], |enhanced| {
            metropolis_hastings(self.problem, &surrogate, enhanced, &chain, &start, seed)
        });
        let mut it = chains.into_iter();
        let plain = it.next().expect("two chains")?;
        let enhanced = it.next().expect("two chains")?;
        let acceptance = (plain.acceptance_rate(), enhanced.acceptance_rate());
        let tess = surrogate.tessellation();
        let em = EmulationSet::from_points(tess, self.emulation.clone())?;
        let evidence = Evidence::new(plain, enhanced, &em, self.target, surrogate.len())?;
        let gens: Vec<&[f64]> = surrogate.cells().iter().map(|c| c.generator.as_slice()).collect();
        let stats = evidence.all_stats(&gens, self.target);
        let context = IndicatorContext::new(
            self.target.mode(),
            self.space().dim(),
            self.space().volume(),
            self.cfg.n_em,
            self.cfg.prob_tol,
            &stats,
        );
        let indicators = compute(&stats, &context);
        if !indicators.global.is_finite() {
            return Err(Error::invalid("non-finite error indicators"));
        }
        Ok(Analysis {
            surrogate,
            indicators,
            evidence,
            stats,
            context,
            acceptance,
        })
    }

    /// p-, level- and h-refinement decisions for iteration `k`.
    pub fn plan(&self, a: &Analysis, k: usize) -> Result<RefinementPlan> {
        let s = &a.surrogate;
        let p_set: Vec<usize> = (0..s.len())
            .filter(|&i| s.cell(i).order == Order::Constant && (a.stats[i].p > 0.0 || a.stats[i].p_hat > 0.0))
            .collect();
        let marked = mark_cells(&a.indicators.total, self.cfg.alpha)?;
        let sums = GammaSums::of(&a.stats, &a.context);
        let l_max = self.cfg.l_max(self.model);
        let tess = s.tessellation();
        let choices = self.exec.map(marked.clone(), |i| {
            let nb = self.cfg.neighbourhood.of(tess, i);
            let level = s.cell(i).level;
            let el = estimate_level_gain(i, level, l_max, &a.stats, &nb, &sums, &a.context);
            let mut rng = stream(self.cfg.seed, Stream::Proposals, k as u64, i as u64);
            let (x, eh) = estimate_h_gain(
                i,
                self.space(),
                tess,
                &a.stats,
                &nb,
                &sums,
                &a.context,
                &a.evidence,
                self.target,
                self.cfg.n_proposals,
                &mut rng,
            )?;
            Ok::<_, Error>(select(el, eh, x, level, l_max))
        });
        let mut plan = RefinementPlan {
            p_set,
            marked,
            ..Default::default()
        };
        let mut taken: BTreeSet<Vec<u64>> = s
            .cells()
            .iter()
            .map(|c| c.generator.iter().map(|x| x.to_bits()).collect())
            .collect();
        for (&i, c) in plan.marked.iter().zip(choices) {
            match c? {
                Choice::Level => plan.level_set.push(i),
                Choice::H(x) => {
                    if taken.insert(x.iter().map(|v| v.to_bits()).collect()) {
                        plan.h_points.push(x);
                    }
                }
            }
        }
        Ok(plan)
    }

    /// One iteration: analyse, record, test for stopping and, unless
    /// stopping, refine. On error `state` is left untouched.
    pub fn step(&self, state: &mut AdaptiveState) -> Result<Option<StopReason>> {
        if state.stopped.is_some() {
            return Ok(state.stopped);
        }
        let k = state.k;
        let a = self.analyse(state.cells.clone(), k)?;
        let ind = &a.indicators;
        let mut record = IterationRecord {
            k,
            evaluations: state.ledger.per_level(self.model.levels().len()),
            integral_plain: ind.integral_plain,
            integral_enhanced: ind.integral_enhanced,
            error_estimate: ind.integral_enhanced - ind.integral_plain,
            global_indicator: ind.global,
            gamma: ind.gamma,
            cells: a.surrogate.len(),
            p_refined: 0,
            level_refined: 0,
            h_refined: 0,
            acceptance_plain: a.acceptance.0,
            acceptance_enhanced: a.acceptance.1,
        };
        let mut records = state.records.clone();
        records.push(record.clone());
        if let Some(reason) = stopping_rule(&records, self.cfg) {
            state.records = records;
            state.stopped = Some(reason);
            return Ok(Some(reason));
        }
        let plan = self.plan(&a, k)?;
        if plan.is_empty() {
            state.records = records;
            state.stopped = Some(StopReason::NothingToRefine);
            return Ok(state.stopped);
        }
        let cells = a.surrogate.cells();
        let (new_cells, events) = apply_plan(
            cells,
            a.surrogate.tessellation(),
            &plan,
            self.model,
            self.exec,
            self.cfg.always_gradient,
        )?;
        record.p_refined = plan.p_set.len();
        record.level_refined = plan.level_set.len();
        record.h_refined = plan.h_points.len();
        *records.last_mut().expect("just pushed") = record;
        for Evaluation { lambda, level, .. } in &events {
            state.ledger.record(lambda, *level);
        }
        state.cells = new_cells;
        state.records = records;
        state.k = k + 1;
        Ok(None)
    }

    /// Steps until the stopping rule fires, calling `after_step` after each
    /// committed iteration.
    pub fn run(&self, state: &mut AdaptiveState, mut after_step: impl FnMut(&AdaptiveState)) -> Result<StopReason> {
        loop {
            let r = self.step(state)?;
            after_step(state);
            if let Some(reason) = r {
                return Ok(reason);
            }
        }
    }
}

/// Runs the adaptive loop from scratch and returns the final `Î_N`.
pub fn run_adaptive<E: Executor>(
    model: &dyn Model,
    problem: &PosteriorProblem,
    target: &PredictionTarget,
    cfg: &AdaptiveConfig,
    exec: &E,
) -> Result<(f64, AdaptiveState)> {
    let run = AdaptiveRun::new(model, problem, target, cfg, exec)?;
    let mut state = run.initialize()?;
    run.run(&mut state, |_| {})?;
    let last = state.last().expect("at least one record").integral_enhanced;
    Ok((last, state))
}

/// Integral of `target` under the posterior of a fixed surrogate: chain
/// mean of `f` in cheap mode, `Σ f(λ_i) P_i` in expensive mode.
pub fn surrogate_integral(
    problem: &PosteriorProblem,
    surrogate: &Surrogate,
    target: &PredictionTarget,
    chain: &MhConfig,
    seed: u64,
) -> Result<f64> {
    let start = chain_start(problem, surrogate, false);
    let c = metropolis_hastings(problem, surrogate, false, chain, &start, seed)?;
    if c.is_empty() {
        return Err(Error::invalid("empty chain"));
    }
    Ok(match target.mode() {
        crate::target::TargetMode::Cheap => c.states().map(|x| target.eval(x)).sum::<f64>() / c.len() as f64,
        crate::target::TargetMode::Expensive => {
            let f: Vec<f64> = surrogate.cells().iter().map(|s| target.eval(&s.generator)).collect();
            c.cells().iter().map(|&i| f[i as usize]).sum::<f64>() / c.len() as f64
        }
    })
}

/// One replicate per run of a non-adaptive surrogate built from `n` uniform
/// samples at `level`. Returns the integral estimate of every run.
#[allow(clippy::too_many_arguments)]
pub fn run_uniform<E: Executor>(
    model: &dyn Model,
    problem: &PosteriorProblem,
    target: &PredictionTarget,
    n: usize,
    level: Level,
    order: Order,
    n_runs: usize,
    chain: &MhConfig,
    seed: u64,
    exec: &E,
) -> Result<Vec<f64>> {
    if n == 0 || n_runs == 0 {
        return Err(Error::invalid("uniform runs need n ≥ 1 and at least one run"));
    }
    let runs = exec.map((0..n_runs as u64).collect(), |r| {
        let mut rng = stream(seed, Stream::Uniform, r, n as u64);
        let pts = problem.space().sample_uniform(n, &mut rng);
        let cells = pts
            .iter()
            .map(|x| {
                model
                    .evaluate(x, level, order == Order::Linear)
                    .map(|rec| SurrogateCell::from_record(rec, order))
                    .map_err(model_err)
            })
            .collect::<Result<Vec<_>>>()?;
        let s = Surrogate::new(cells)?;
        let chain_seed = derive_seed(seed, Stream::Chain, r, n as u64 ^ ((level.get() as u64) << 40));
        surrogate_integral(problem, &s, target, chain, chain_seed)
    });
    runs.into_iter().collect()
}

/// Source of `Q` for a reference chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceQoi {
    Exact,
    Level(Level),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReferenceEstimate {
    pub mean: f64,
    /// Batch-means Monte Carlo standard error.
    pub standard_error: f64,
    pub samples: usize,
    pub acceptance: f64,
}

/// Batches used for the reference standard error.
pub const REFERENCE_BATCHES: usize = 50;

/// Long chain against the true (or finest-level) QoI; `samples` counts
/// post-burn-in states.
pub fn run_reference(
    model: &dyn Model,
    problem: &PosteriorProblem,
    target: &PredictionTarget,
    qoi: ReferenceQoi,
    samples: usize,
    proposal_scale: f64,
    seed: u64,
) -> Result<ReferenceEstimate> {
    if samples == 0 {
        return Err(Error::invalid("reference needs at least one sample"));
    }
    if let ReferenceQoi::Exact = qoi {
        if model.exact_qoi(problem.space().lo()).is_none() {
            return Err(Error::Unsupported("model has no closed-form QoI"));
        }
    }
    let cfg = MhConfig {
        proposal_scale,
        ..MhConfig::keeping(samples)
    };
    let eval = |x: &[f64]| -> Result<Vec<f64>> {
        match qoi {
            ReferenceQoi::Exact => model.exact_qoi(x).ok_or(Error::Unsupported("model has no closed-form QoI")),
            ReferenceQoi::Level(l) => model.evaluate_qoi(x, l).map_err(model_err),
        }
    };
    // start from the best of a few prior draws
    let mut rng = stream(seed, Stream::ChainStart, 0, 0);
    let mut start = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for x in problem.space().sample_uniform(64, &mut rng) {
        let lp = problem.log_posterior(&eval(&x)?, &x);
        if lp > best || start.is_empty() {
            best = lp;
            start = x;
        }
    }
    let mut bm = BatchMeans::new(samples, REFERENCE_BATCHES);
    let mut rng = stream(seed, Stream::Reference, 0, 0);
    let stats = sample::<f64, Error, _, _>(
        problem.space(),
        &cfg,
        &start,
        &mut rng,
        |x| {
            let q = eval(x)?;
            Ok((problem.log_posterior(&q, x), target.eval(x)))
        },
        |_, f| bm.push(*f),
    )?;
    Ok(ReferenceEstimate {
        mean: bm.mean(),
        standard_error: bm.standard_error(),
        samples: bm.count(),
        acceptance: stats.acceptance_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::models::{LevelLadder, QoiRecord};

    fn rec(k: usize, plain: f64, enh: f64) -> IterationRecord {
        IterationRecord {
            k,
            evaluations: vec![1],
            integral_plain: plain,
            integral_enhanced: enh,
            error_estimate: enh - plain,
            global_indicator: 0.0,
            gamma: 0.0,
            cells: 1,
            p_refined: 0,
            level_refined: 0,
            h_refined: 0,
            acceptance_plain: 0.5,
            acceptance_enhanced: 0.5,
        }
    }

    #[test]
    fn stopping_examples() {
        let cfg = AdaptiveConfig {
            its_max: 5,
            ..Default::default()
        };
        assert_eq!(stopping_rule(&[], &cfg), None);
        assert_eq!(stopping_rule(&[rec(0, 1.0, 1.0)], &cfg), Some(StopReason::Converged));
        assert_eq!(stopping_rule(&[rec(0, 1.0, 2.0)], &cfg), None);
        assert_eq!(stopping_rule(&[rec(5, 1.0, 2.0)], &cfg), Some(StopReason::MaxIterations));
        let flat: Vec<_> = (0..4).map(|k| rec(k, 1.0, 2.0)).collect();
        assert_eq!(stopping_rule(&flat, &cfg), Some(StopReason::Stalled));
        assert_eq!(stopping_rule(&flat[..3], &cfg), None);
        // both zero: relative test meets the absolute floor
        assert_eq!(stopping_rule(&[rec(0, 0.0, 0.0)], &cfg), Some(StopReason::Converged));
    }

    #[test]
    fn ledger_counts_distinct_solves() {
        let mut l = EvaluationLedger::default();
        assert!(l.record(&[1.0, 2.0], Level::new(1)));
        assert!(!l.record(&[1.0, 2.0], Level::new(1)));
        assert!(l.record(&[1.0, 2.0], Level::new(2)));
        assert!(l.record(&[1.0, 2.5], Level::new(1)));
        assert_eq!(l.per_level(3), vec![2, 1, 0]);
        assert_eq!(l.total(), 3);
    }

    /// `Q = (λ₀ + h, λ₁)` with an exact error estimate `−h`, or a zero
    /// estimate when `blind`.
    struct Shifted {
        space: ParameterSpace,
        levels: LevelLadder,
        blind: bool,
    }

    impl Model for Shifted {
        fn name(&self) -> &str {
            "shifted"
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
        fn evaluate(&self, l: &[f64], level: Level, g: bool) -> core::result::Result<QoiRecord, ModelError> {
            let h = self.levels.step(level).unwrap();
            Ok(QoiRecord {
                lambda: l.to_vec(),
                level,
                q: vec![l[0] + h, l[1]],
                error_estimate: if self.blind { vec![0.0, 0.0] } else { vec![-h, 0.0] },
                jacobian: g.then(|| crate::linalg::Matrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0])),
            })
        }
        fn exact_qoi(&self, l: &[f64]) -> Option<Vec<f64>> {
            Some(l.to_vec())
        }
    }

    fn shifted(blind: bool) -> (Shifted, PosteriorProblem, PredictionTarget) {
        let space = ParameterSpace::cube(2, 0.0, 1.0).unwrap();
        let m = Shifted {
            space: space.clone(),
            levels: LevelLadder::new(vec![0.2, 0.05, 0.01]).unwrap(),
            blind,
        };
        let p = PosteriorProblem::isotropic(space, vec![0.5, 0.5], 0.1).unwrap();
        (m, p, PredictionTarget::new("x0", |x| x[0]))
    }

    fn small_cfg(seed: u64) -> AdaptiveConfig {
        AdaptiveConfig {
            n0: 10,
            its_max: 4,
            chain_steps: 4000,
            n_em: 500,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn zero_error_model_stops_immediately() {
        let (m, p, t) = shifted(true);
        let cfg = small_cfg(3);
        let (ihat, state) = run_adaptive(&m, &p, &t, &cfg, &Sequential).unwrap();
        assert_eq!(state.records.len(), 1);
        assert_eq!(state.records[0].error_estimate, 0.0);
        assert_eq!(state.records[0].global_indicator, 0.0);
        assert_eq!(state.stopped, Some(StopReason::Converged));
        assert_eq!(ihat, state.records[0].integral_plain);
    }

    #[test]
    fn capped_run_has_one_record() {
        let (m, p, t) = shifted(false);
        let cfg = AdaptiveConfig {
            its_max: 1,
            epsilon: 1e-9,
            ..small_cfg(4)
        };
        let run = AdaptiveRun::new(&m, &p, &t, &cfg, &Sequential).unwrap();
        let mut st = run.initialize().unwrap();
        assert_eq!(run.step(&mut st).unwrap(), None);
        assert_eq!(run.step(&mut st).unwrap(), Some(StopReason::MaxIterations));
        assert_eq!(st.records.len(), 2);
        // resuming a finished run does nothing
        let before = st.clone();
        assert_eq!(run.step(&mut st).unwrap(), Some(StopReason::MaxIterations));
        assert_eq!(st, before);
    }

    #[test]
    fn runs_are_reproducible_and_resumable() {
        let (m, p, t) = shifted(false);
        let cfg = small_cfg(11);
        let (_, a) = run_adaptive(&m, &p, &t, &cfg, &Sequential).unwrap();
        let (_, b) = run_adaptive(&m, &p, &t, &cfg, &Sequential).unwrap();
        assert_eq!(a, b);
        let run = AdaptiveRun::new(&m, &p, &t, &cfg, &Sequential).unwrap();
        let mut st = run.initialize().unwrap();
        run.step(&mut st).unwrap();
        let mut resumed = st.clone();
        run.run(&mut resumed, |_| {}).unwrap();
        assert_eq!(resumed, a);
    }

    #[test]
    fn ledger_matches_refinements_and_levels_never_drop() {
        let (m, p, t) = shifted(false);
        let cfg = small_cfg(5);
        let run = AdaptiveRun::new(&m, &p, &t, &cfg, &Sequential).unwrap();
        let mut st = run.initialize().unwrap();
        let mut prev = st.cells.clone();
        let mut solves = cfg.n0;
        loop {
            let r = run.step(&mut st).unwrap();
            let last = st.last().unwrap();
            if r.is_some() {
                break;
            }
            assert!(last.level_refined + last.h_refined + last.p_refined > 0);
            solves += last.level_refined + last.h_refined;
            assert_eq!(st.ledger.total(), solves);
            for (old, new) in prev.iter().zip(&st.cells) {
                assert_eq!(old.generator, new.generator);
                assert!(new.level >= old.level && new.order >= old.order);
            }
            prev = st.cells.clone();
        }
        for w in st.records.windows(2) {
            for (a, b) in w[0].evaluations.iter().zip(&w[1].evaluations) {
                assert!(b >= a);
            }
        }
    }

    #[test]
    fn one_sample_uniform_surrogate_returns_prior_mean() {
        let (m, p, t) = shifted(false);
        let mh = MhConfig::new(40_000);
        let r = run_uniform(&m, &p, &t, 1, Level::new(1), Order::Constant, 2, &mh, 1, &Sequential).unwrap();
        for v in r {
            assert!((v - 0.5).abs() < 0.03, "{v}");
        }
    }

    #[test]
    fn reference_rejects_bad_requests() {
        let (m, p, t) = shifted(false);
        assert!(run_reference(&m, &p, &t, ReferenceQoi::Exact, 0, 0.05, 0).is_err());
        let e = run_reference(&m, &p, &t, ReferenceQoi::Exact, 20_000, 0.05, 0).unwrap();
        // posterior of x0 is a Gaussian truncated to [0, 1] centred at 0.5
        assert!((e.mean - 0.5).abs() < 5.0 * e.standard_error + 1e-3, "{e:?}");
    }
}
