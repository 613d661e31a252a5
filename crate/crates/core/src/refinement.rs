//! Marking, the choice between level- and h-refinement, and the three
//! refinement operators.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, Error};
use crate::exec::Executor;
use crate::indicators::{cell_total, CellStats, Evidence, GammaSums, IndicatorContext};
use crate::kdtree::dist2;
use crate::models::{Level, Model};
use crate::rng::StreamRng;
use crate::space::{ParameterSpace, Tessellation};
use crate::surrogate::{Order, SurrogateCell};
use crate::target::PredictionTarget;
use crate::Result;

/// Rejection-sampling attempts per requested proposal.
const TRIES_PER_PROPOSAL: usize = 64;
/// Half-width of the proposal box in units of the cell's sample radius.
const PROPOSAL_BOX: f64 = 1.5;

/// Cells with `Ê_i > α max Ê`. When that is empty but `max Ê > 0` (ties at
/// `α = 1`), the argmax cells are returned instead.
pub fn mark_cells(totals: &[f64], alpha: f64) -> Result<Vec<usize>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("marking fraction must lie in (0, 1]"));
    }
    let max = totals.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Ok(Vec::new());
    }
    let marked: Vec<usize> = (0..totals.len()).filter(|&i| totals[i] > alpha * max).collect();
    if !marked.is_empty() {
        return Ok(marked);
    }
    Ok((0..totals.len()).filter(|&i| totals[i] == max).collect())
}

/// Size of the neighbourhood `J_i`: the `k` generators nearest to `λ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NeighborhoodSpec {
    /// Defaults to `2n + 1`.
    pub k: Option<usize>,
}

impl NeighborhoodSpec {
    pub fn size(&self, dim: usize, cells: usize) -> usize {
        self.k.unwrap_or(2 * dim + 1).clamp(1, cells.max(1))
    }

    pub fn of(&self, tess: &Tessellation, i: usize) -> Vec<usize> {
        tess.neighbourhood(i, self.size(tess.dim(), tess.len()))
    }
}

/// Current `Σ_{J} Ê_j`.
pub fn neighbourhood_sum(stats: &[CellStats], nb: &[usize], gamma: f64, ctx: &IndicatorContext) -> f64 {
    nb.iter().map(|&j| cell_total(&stats[j], gamma, ctx)).sum()
}

/// `Ê^l_{J_i}(i)`: cell `i` takes its enhanced probabilities, the rest of
/// `J_i` is rescaled to keep the neighbourhood mass, and `Ê` is re-summed
/// over `J_i`. `None` when cell `i` is already at `l_max`.
pub fn estimate_level_gain(
    i: usize,
    level: Level,
    l_max: Level,
    stats: &[CellStats],
    nb: &[usize],
    sums: &GammaSums,
    ctx: &IndicatorContext,
) -> Option<f64> {
    if level >= l_max {
        return None;
    }
    let mass: f64 = nb.iter().map(|&j| stats[j].p).sum();
    let rest = mass - stats[i].p;
    let c = if rest > 0.0 {
        ((mass - stats[i].p_hat) / rest).max(0.0)
    } else {
        1.0
    };
    let changed: Vec<CellStats> = nb
        .iter()
        .map(|&j| {
            let s = stats[j];
            if j == i {
                CellStats {
                    p: s.p_hat,
                    s: s.s_hat,
                    pa: s.pa_hat,
                    ..s
                }
            } else {
                CellStats {
                    p: c * s.p,
                    s: c * s.s,
                    pa: c * s.pa,
                    ..s
                }
            }
        })
        .collect();
    let mut g = *sums;
    for (&j, s) in nb.iter().zip(&changed) {
        g.remove(&stats[j], ctx);
        g.add(s, ctx);
    }
    let gamma = g.gamma().0;
    Some(changed.iter().map(|s| cell_total(s, gamma, ctx)).sum())
}

/// `Ê^h_{J_i}(λ)` for one candidate: points of cell `i` strictly closer to
/// `candidate` move to a new cell carrying the same surrogate values.
#[allow(clippy::too_many_arguments)]
pub fn h_gain_of(
    i: usize,
    candidate: &[f64],
    gen: &[f64],
    stats: &[CellStats],
    nb: &[usize],
    sums: &GammaSums,
    ctx: &IndicatorContext,
    evidence: &Evidence,
    target: &PredictionTarget,
) -> f64 {
    let (keep, moved) = evidence.split_stats(i, gen, candidate, target);
    let mut g = *sums;
    g.remove(&stats[i], ctx);
    g.add(&keep, ctx);
    g.add(&moved, ctx);
    let gamma = g.gamma().0;
    let others: f64 = nb
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| cell_total(&stats[j], gamma, ctx))
        .sum();
    others + cell_total(&keep, gamma, ctx) + cell_total(&moved, gamma, ctx)
}

/// Up to `count` uniform points of cell `i`, rejection-sampled from a box
/// around the generator sized by the cell's sample spread.
pub fn propose_in_cell(
    i: usize,
    count: usize,
    space: &ParameterSpace,
    tess: &Tessellation,
    spread: f64,
    rng: &mut StreamRng,
) -> Vec<Vec<f64>> {
    let n = space.dim();
    let gen = tess.generator(i);
    let (lo, hi): (Vec<f64>, Vec<f64>) = if spread > 0.0 && tess.len() > 1 {
        (0..n)
            .map(|d| {
                let r = PROPOSAL_BOX * spread;
                ((gen[d] - r).max(space.lo()[d]), (gen[d] + r).min(space.hi()[d]))
            })
            .unzip()
    } else {
        (space.lo().to_vec(), space.hi().to_vec())
    };
    let mut out = Vec::with_capacity(count);
    let mut x = vec![0.0; n];
    for _ in 0..count * TRIES_PER_PROPOSAL {
        for d in 0..n {
            let u: f64 = rng.random();
            x[d] = lo[d] + u * (hi[d] - lo[d]);
        }
        if tess.nearest_unchecked(&x) == i {
            out.push(x.clone());
            if out.len() == count {
                break;
            }
        }
    }
    if out.is_empty() {
        out.push(midpoint_fallback(i, space, tess));
    }
    out
}

fn midpoint_fallback(i: usize, space: &ParameterSpace, tess: &Tessellation) -> Vec<f64> {
    let gen = tess.generator(i);
    match tess.neighbourhood(i, 2).get(1) {
        Some(&j) => gen.iter().zip(tess.generator(j)).map(|(a, b)| 0.5 * (a + b)).collect(),
        None => space.lo().iter().zip(space.hi()).map(|(a, b)| 0.5 * (a + b)).collect(),
    }
}

/// Largest distance from generator `i` to any sample of its cell.
pub fn sample_spread(i: usize, gen: &[f64], evidence: &Evidence) -> f64 {
    let mut r2 = 0.0f64;
    for set in [&evidence.plain, &evidence.enhanced, &evidence.emulation] {
        for &j in set.members(i) {
            r2 = r2.max(dist2(set.point(j as usize), gen));
        }
    }
    libm::sqrt(r2)
}

/// Best proposal `λ_opt` and its `Ê^h_{J_i}(λ_opt)`; the first proposal wins
/// ties.
#[allow(clippy::too_many_arguments)]
pub fn estimate_h_gain(
    i: usize,
    space: &ParameterSpace,
    tess: &Tessellation,
    stats: &[CellStats],
    nb: &[usize],
    sums: &GammaSums,
    ctx: &IndicatorContext,
    evidence: &Evidence,
    target: &PredictionTarget,
    n_proposals: usize,
    rng: &mut StreamRng,
) -> Result<(Vec<f64>, f64)> {
    if n_proposals == 0 {
        return Err(Error::invalid("at least one h-refinement proposal is required"));
    }
    let gen = tess.generator(i);
    let spread = sample_spread(i, gen, evidence);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for cand in propose_in_cell(i, n_proposals, space, tess, spread, rng) {
        let e = h_gain_of(i, &cand, gen, stats, nb, sums, ctx, evidence, target);
        if best.as_ref().is_none_or(|b| e < b.1) {
            best = Some((cand, e));
        }
    }
    Ok(best.expect("at least one proposal"))
}

/// Outcome of the level-versus-h comparison for one marked cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Choice {
    Level,
    H(Vec<f64>),
}

/// Level iff `Ê^l ≤ Ê^h` and the cell is below `l_max`.
pub fn select(level_gain: Option<f64>, h_gain: f64, lambda_opt: Vec<f64>, level: Level, l_max: Level) -> Choice {
    match level_gain {
        Some(el) if el <= h_gain && level < l_max => Choice::Level,
        _ => Choice::H(lambda_opt),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RefinementPlan {
    pub p_set: Vec<usize>,
    pub level_set: Vec<usize>,
    pub h_points: Vec<Vec<f64>>,
    pub marked: Vec<usize>,
}

impl RefinementPlan {
    pub fn is_empty(&self) -> bool {
        self.p_set.is_empty() && self.level_set.is_empty() && self.h_points.is_empty()
    }

    pub fn validate(&self, cells: &[SurrogateCell], space: &ParameterSpace, max_level: Level) -> Result<()> {
        let n = cells.len();
        for &i in self.p_set.iter().chain(&self.level_set).chain(&self.marked) {
            if i >= n {
                return Err(Error::invalid("plan references a cell that does not exist"));
            }
        }
        if self.p_set.iter().any(|&i| cells[i].order != Order::Constant) {
            return Err(Error::invalid("p-refinement of a cell that is already linear"));
        }
        if self.level_set.iter().any(|&i| cells[i].level >= max_level) {
            return Err(Error::invalid("level-refinement beyond the finest level"));
        }
        for x in &self.h_points {
            check_dim(space.dim(), x.len())?;
            if !space.contains(x) {
                return Err(Error::invalid("h-refinement point outside the parameter box"));
            }
        }
        Ok(())
    }
}

/// A model solve performed while applying a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub lambda: Vec<f64>,
    pub level: Level,
    pub gradient: bool,
}

enum Task {
    Jacobian(usize),
    Raise(usize),
    Insert(Vec<f64>, Level, Order),
}

/// Applies `plan` to `cells` all-or-nothing. New generators inherit the
/// level and order their containing cell had before this plan. Gradients
/// are requested for every solve when `always_gradient` is set, otherwise
/// only where the (new) order is linear.
pub fn apply_plan<E: Executor>(
    cells: &[SurrogateCell],
    tess: &Tessellation,
    plan: &RefinementPlan,
    model: &dyn Model,
    exec: &E,
    always_gradient: bool,
) -> Result<(Vec<SurrogateCell>, Vec<Evaluation>)> {
    plan.validate(cells, model.space(), model.max_level())?;
    let mut tasks = Vec::new();
    let mut linear = vec![false; cells.len()];
    for &i in &plan.p_set {
        linear[i] = true;
        if cells[i].jacobian.is_none() && !plan.level_set.contains(&i) {
            tasks.push(Task::Jacobian(i));
        }
    }
    for &i in &plan.level_set {
        tasks.push(Task::Raise(i));
    }
    for x in &plan.h_points {
        let host = &cells[tess.nearest_cell(x)?];
        tasks.push(Task::Insert(x.clone(), host.level, host.order));
    }
    let wants = |i: usize| always_gradient || linear[i] || cells[i].order == Order::Linear;
    let results = exec.map(tasks, |t| match t {
        Task::Jacobian(i) => {
            let c = &cells[i];
            model.evaluate(&c.generator, c.level, true).map(|r| (t, r))
        }
        Task::Raise(i) => {
            let c = &cells[i];
            model.evaluate(&c.generator, c.level.next(), wants(i)).map(|r| (t, r))
        }
        Task::Insert(ref x, level, order) => model
            .evaluate(x, level, always_gradient || order == Order::Linear)
            .map(|r| (t, r)),
    });
    let mut out = cells.to_vec();
    let mut events = Vec::new();
    for &i in &plan.p_set {
        out[i].order = Order::Linear;
    }
    for res in results {
        let (task, rec) = res?;
        match task {
            Task::Jacobian(i) => {
                out[i].jacobian = rec.jacobian;
            }
            Task::Raise(i) => {
                events.push(Evaluation {
                    lambda: rec.lambda.clone(),
                    level: rec.level,
                    gradient: rec.jacobian.is_some(),
                });
                let order = out[i].order;
                out[i] = SurrogateCell::from_record(rec, order);
            }
            Task::Insert(_, _, order) => {
                events.push(Evaluation {
                    lambda: rec.lambda.clone(),
                    level: rec.level,
                    gradient: rec.jacobian.is_some(),
                });
                out.push(SurrogateCell::from_record(rec, order));
            }
        }
    }
    Ok((out, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::models::{LevelLadder, QoiRecord};
    use crate::target::TargetMode;
    use crate::ModelError;

    #[test]
    fn marking_examples() {
        assert_eq!(mark_cells(&[1.0, 0.4, 0.9], 0.8).unwrap(), vec![0, 2]);
        assert_eq!(mark_cells(&[1.0, 0.4, 1.0], 1.0).unwrap(), vec![0, 2]);
        assert_eq!(mark_cells(&[0.5, 0.4], 1.0).unwrap(), vec![0]);
        assert!(mark_cells(&[0.0, 0.0], 0.5).unwrap().is_empty());
        assert!(mark_cells(&[1.0], 0.0).is_err());
    }

    fn ctx() -> IndicatorContext {
        IndicatorContext {
            mode: TargetMode::Cheap,
            dim: 1,
            volume: 1.0,
            n_em: 100,
            prob_tol: 0.0,
            mean_radius: 0.0,
            mean_measure: 0.0,
        }
    }

    fn st(p: f64, p_hat: f64, f: f64, em: usize) -> CellStats {
        CellStats {
            p,
            p_hat,
            s: f * p,
            s_hat: f * p_hat,
            pa: p,
            pa_hat: p_hat,
            em_count: em,
            em_in_a: em,
            em_abs_f: em as f64 * f.abs(),
            ..Default::default()
        }
    }

    #[test]
    fn level_gain_examples() {
        let c = ctx();
        let (l1, l3) = (Level::new(1), Level::new(3));
        // already matching probabilities: identity
        let same = [st(0.3, 0.3, 1.0, 10), st(0.7, 0.7, 2.0, 10)];
        let sums = GammaSums::of(&same, &c);
        let g = sums.gamma().0;
        let nb = [0, 1];
        let cur = neighbourhood_sum(&same, &nb, g, &c);
        assert_eq!(estimate_level_gain(0, l1, l3, &same, &nb, &sums, &c), Some(cur));
        // single cell
        let one = [st(1.0, 1.0, 2.0, 5)];
        let s1 = GammaSums::of(&one, &c);
        assert_eq!(estimate_level_gain(0, l1, l3, &one, &[0], &s1, &c), Some(0.0));
        assert_eq!(estimate_level_gain(0, l3, l3, &one, &[0], &s1, &c), None);
    }

    #[test]
    fn level_gain_reduces_probability_dominated_error() {
        // f ≡ 1 so Ê_int equals the probability shift too; mass moves 0 → 1.
        let c = ctx();
        let stats = [st(0.5, 0.3, 1.0, 30), st(0.3, 0.5, 1.0, 30), st(0.2, 0.2, 1.0, 40)];
        let sums = GammaSums::of(&stats, &c);
        let g = sums.gamma().0;
        assert_eq!(g, 1.0);
        let nb = [0, 1, 2];
        let before = neighbourhood_sum(&stats, &nb, g, &c);
        assert!((before - 0.8).abs() < 1e-12);
        // cell 0 → p = 0.3; cells 1, 2 rescaled by (1 − 0.3)/0.5 = 1.4
        let after = estimate_level_gain(0, Level::new(1), Level::new(2), &stats, &nb, &sums, &c).unwrap();
        // cell 1: |0.5 − 0.42| twice, cell 2: |0.2 − 0.28| twice
        let oracle = 2.0 * (0.5f64 - 0.42).abs() + 2.0 * (0.28f64 - 0.2).abs();
        assert!((after - oracle).abs() < 1e-12, "{after} vs {oracle}");
        assert!(after < before);
    }

    #[test]
    fn select_examples() {
        let x = vec![0.5];
        assert_eq!(select(Some(0.1), 0.2, x.clone(), Level::new(1), Level::new(3)), Choice::Level);
        assert_eq!(select(Some(0.1), 0.2, x.clone(), Level::new(3), Level::new(3)), Choice::H(x.clone()));
        assert_eq!(select(None, 0.2, x.clone(), Level::new(3), Level::new(3)), Choice::H(x.clone()));
        assert_eq!(select(Some(0.3), 0.2, x.clone(), Level::new(1), Level::new(3)), Choice::H(x));
    }

    fn chain_from(dim: usize, states: &[f64], tess: &Tessellation) -> crate::mcmc::Chain {
        crate::mcmc::Chain::from_parts(dim, states.to_vec(), tess)
    }

    /// 1-D, two cells at 0.25 and 0.75. The plain chain sits near 0.1, the
    /// enhanced one near 0.4; both fall in cell 0.
    fn split_fixture() -> (Tessellation, Evidence, PredictionTarget, Vec<CellStats>, IndicatorContext) {
        let tess = Tessellation::new(1, &[vec![0.25], vec![0.75]]).unwrap();
        let target = PredictionTarget::new("one", |_| 1.0);
        let plain = chain_from(1, &[0.1, 0.1, 0.12, 0.08, 0.9, 0.9], &tess);
        let enh = chain_from(1, &[0.4, 0.42, 0.38, 0.4, 0.9, 0.9], &tess);
        let em_pts: Vec<Vec<f64>> = (0..100).map(|j| vec![(j as f64 + 0.5) / 100.0]).collect();
        let em = crate::space::EmulationSet::from_points(&tess, em_pts).unwrap();
        let ev = Evidence::new(plain, enh, &em, &target, 2).unwrap();
        let gens: Vec<&[f64]> = vec![tess.generator(0), tess.generator(1)];
        let stats = ev.all_stats(&gens, &target);
        let c = IndicatorContext::new(TargetMode::Cheap, 1, 1.0, 100, 0.0, &stats);
        (tess, ev, target, stats, c)
    }

    #[test]
    fn h_gain_examples() {
        let (tess, ev, target, stats, c) = split_fixture();
        let sums = GammaSums::of(&stats, &c);
        let nb = [0, 1];
        let g = sums.gamma().0;
        let cur = neighbourhood_sum(&stats, &nb, g, &c);
        // coincident candidate changes nothing
        let same = h_gain_of(0, &[0.25], &[0.25], &stats, &nb, &sums, &c, &ev, &target);
        assert!((same - cur).abs() < 1e-15);
        // with γ fixed a split can only add indicator mass
        for x in [0.02, 0.3, 0.45, 0.49] {
            let e = h_gain_of(0, &[x], &[0.25], &stats, &nb, &sums, &c, &ev, &target);
            assert!(e >= cur - 1e-15, "{x}: {e} < {cur}");
        }
        // separating the two chains' mass costs |ΔP| twice in both halves
        let split = h_gain_of(0, &[0.45], &[0.25], &stats, &nb, &sums, &c, &ev, &target);
        assert!((split - 4.0 * (4.0 / 6.0)).abs() < 1e-12, "{split}");
        // single proposal is returned as is
        let mut rng = crate::rng::stream(1, crate::rng::Stream::Proposals, 0, 0);
        let space = ParameterSpace::cube(1, 0.0, 1.0).unwrap();
        let (x, e) = estimate_h_gain(0, &space, &tess, &stats, &nb, &sums, &c, &ev, &target, 1, &mut rng).unwrap();
        assert!(tess.nearest_cell(&x).unwrap() == 0);
        assert_eq!(e, h_gain_of(0, &x, &[0.25], &stats, &nb, &sums, &c, &ev, &target));
    }

    #[test]
    fn proposals_land_in_the_cell() {
        let tess = Tessellation::new(2, &[vec![0.2, 0.2], vec![0.8, 0.8], vec![0.2, 0.8]]).unwrap();
        let space = ParameterSpace::cube(2, 0.0, 1.0).unwrap();
        let mut rng = crate::rng::stream(3, crate::rng::Stream::Proposals, 0, 0);
        let pts = propose_in_cell(1, 8, &space, &tess, 0.3, &mut rng);
        assert_eq!(pts.len(), 8);
        assert!(pts.iter().all(|p| tess.nearest_cell(p).unwrap() == 1 && space.contains(p)));
    }

    struct Affine {
        space: ParameterSpace,
        levels: LevelLadder,
    }

    impl Model for Affine {
        fn name(&self) -> &str {
            "affine"
        }
        fn space(&self) -> &ParameterSpace {
            &self.space
        }
        fn qoi_dim(&self) -> usize {
            1
        }
        fn levels(&self) -> &LevelLadder {
            &self.levels
        }
        fn evaluate(&self, l: &[f64], level: Level, g: bool) -> core::result::Result<QoiRecord, ModelError> {
            if l[0] > 0.95 {
                return Err(ModelError {
                    lambda: l.to_vec(),
                    level: level.index(),
                    kind: crate::ModelErrorKind::NonFinite,
                });
            }
            let h = self.levels.step(level).unwrap();
            Ok(QoiRecord {
                lambda: l.to_vec(),
                level,
                q: vec![2.0 * l[0] + h],
                error_estimate: vec![-h],
                jacobian: g.then(|| crate::linalg::Matrix::from_rows(1, 1, vec![2.0])),
            })
        }
    }

    fn affine() -> Affine {
        Affine {
            space: ParameterSpace::cube(1, 0.0, 1.0).unwrap(),
            levels: LevelLadder::new(vec![0.1, 0.01, 0.001]).unwrap(),
        }
    }

    fn cells(m: &Affine, at: &[f64]) -> Vec<SurrogateCell> {
        at.iter()
            .map(|&x| SurrogateCell::from_record(m.evaluate(&[x], Level::new(1), false).unwrap(), Order::Constant))
            .collect()
    }

    #[test]
    fn apply_plan_examples() {
        let m = affine();
        let base = cells(&m, &[0.2, 0.6]);
        let tess = Tessellation::new(1, &[vec![0.2], vec![0.6]]).unwrap();
        let empty = apply_plan(&base, &tess, &RefinementPlan::default(), &m, &Sequential, false).unwrap();
        assert_eq!(empty.0, base);
        assert!(empty.1.is_empty());

        let p = RefinementPlan {
            p_set: vec![0],
            ..Default::default()
        };
        let (out, ev) = apply_plan(&base, &tess, &p, &m, &Sequential, false).unwrap();
        assert_eq!(out[0].order, Order::Linear);
        assert_eq!(out[0].q, base[0].q);
        assert!(out[0].jacobian.is_some());
        assert!(ev.is_empty());

        let l = RefinementPlan {
            level_set: vec![1],
            ..Default::default()
        };
        let (out, ev) = apply_plan(&base, &tess, &l, &m, &Sequential, false).unwrap();
        assert_eq!(out[0].level, Level::new(1));
        assert_eq!(out[1].level, Level::new(2));
        assert_eq!(out[1].q, vec![2.0 * 0.6 + 0.01]);
        assert_eq!(ev.len(), 1);

        let h = RefinementPlan {
            p_set: vec![0],
            h_points: vec![vec![0.1]],
            ..Default::default()
        };
        let (out, _) = apply_plan(&base, &tess, &h, &m, &Sequential, false).unwrap();
        assert_eq!(out.len(), 3);
        // inherits the pre-plan order of its host
        assert_eq!((out[2].level, out[2].order), (Level::new(1), Order::Constant));
        assert_eq!(out[1], base[1]);
    }

    #[test]
    fn apply_plan_is_all_or_nothing() {
        let m = affine();
        let base = cells(&m, &[0.2, 0.6]);
        let tess = Tessellation::new(1, &[vec![0.2], vec![0.6]]).unwrap();
        let bad = RefinementPlan {
            level_set: vec![0],
            h_points: vec![vec![0.97]],
            ..Default::default()
        };
        assert!(matches!(
            apply_plan(&base, &tess, &bad, &m, &Sequential, false),
            Err(Error::Model(_))
        ));
        let beyond = RefinementPlan {
            level_set: vec![0],
            ..Default::default()
        };
        let mut top = base.clone();
        top[0].level = Level::new(3);
        assert!(apply_plan(&top, &tess, &beyond, &m, &Sequential, false).is_err());
    }
}
