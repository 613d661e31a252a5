//! Local error indicators `Ê_i = Ê_int,i + Ê_prob,i`.
//!
//! Everything is computed from per-cell summaries ([`CellStats`]) of the two
//! chains and of the emulation points. The refinement module perturbs those
//! summaries (probability replacement, virtual cell splits) and re-runs the
//! same formulas, so the gain estimates and the indicators can never drift
//! apart.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error};
use crate::kdtree::dist2;
use crate::mcmc::Chain;
use crate::space::EmulationSet;
use crate::target::{PredictionTarget, TargetMode};
use crate::Result;

/// Emulation points per cell used for the Lipschitz estimate.
pub const LIPSCHITZ_PROBES: usize = 20;

/// Summary of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellStats {
    /// `P(V_i)` under the plain and the enhanced surrogate.
    pub p: f64,
    pub p_hat: f64,
    /// `(1/M) Σ f χ_i` over each chain.
    pub s: f64,
    pub s_hat: f64,
    /// `P(V_i ∩ A)`.
    pub pa: f64,
    pub pa_hat: f64,
    /// `N_em,i`.
    pub em_count: usize,
    /// Emulation points of the cell inside `A`.
    pub em_in_a: usize,
    /// `Σ |f|` over the cell's emulation points.
    pub em_abs_f: f64,
    /// `f` at the generator.
    pub f_gen: f64,
    /// Local Lipschitz estimate (expensive mode only).
    pub lipschitz: f64,
    /// Largest generator-to-emulation-point distance, if the cell has any.
    pub radius: Option<f64>,
}

impl CellStats {
    #[inline]
    pub fn differs(&self, tol: f64) -> bool {
        libm::fabs(self.p_hat - self.p) > tol
    }

    #[inline]
    fn gamma_numerator(&self, mode: TargetMode) -> f64 {
        match mode {
            TargetMode::Cheap => self.em_abs_f,
            TargetMode::Expensive => self.em_in_a as f64 * libm::fabs(self.f_gen),
        }
    }
}

/// Global constants shared by every indicator evaluation of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorContext {
    pub mode: TargetMode,
    pub dim: usize,
    /// `μ(Λ)`.
    pub volume: f64,
    /// Total number of emulation points.
    pub n_em: usize,
    /// Cells with `|P̂_i − P_i| ≤ prob_tol` count as unchanged.
    pub prob_tol: f64,
    /// Substitutes for cells without emulation points (expensive mode).
    pub mean_radius: f64,
    pub mean_measure: f64,
}

impl IndicatorContext {
    /// Fills the fallbacks from the populated cells of `stats`.
    pub fn new(mode: TargetMode, dim: usize, volume: f64, n_em: usize, prob_tol: f64, stats: &[CellStats]) -> Self {
        let mut ctx = IndicatorContext {
            mode,
            dim,
            volume,
            n_em,
            prob_tol,
            mean_radius: 0.0,
            mean_measure: 0.0,
        };
        let radii: Vec<f64> = stats.iter().filter_map(|s| s.radius).collect();
        if !radii.is_empty() {
            ctx.mean_radius = radii.iter().sum::<f64>() / radii.len() as f64;
        }
        let measures: Vec<f64> = stats
            .iter()
            .filter(|s| s.em_in_a > 0)
            .map(|s| ctx.measure(s.em_in_a))
            .collect();
        if !measures.is_empty() {
            ctx.mean_measure = measures.iter().sum::<f64>() / measures.len() as f64;
        }
        ctx
    }

    fn measure(&self, em_in_a: usize) -> f64 {
        if self.n_em == 0 {
            0.0
        } else {
            self.volume * em_in_a as f64 / self.n_em as f64
        }
    }
}

/// Running sums behind `γ`, updatable one cell at a time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GammaSums {
    num: f64,
    den: usize,
    differing: usize,
    all_num: f64,
    all_den: usize,
}

impl GammaSums {
    pub fn of(stats: &[CellStats], ctx: &IndicatorContext) -> Self {
        let mut g = GammaSums::default();
        for s in stats {
            g.add(s, ctx);
        }
        g
    }

    pub fn add(&mut self, s: &CellStats, ctx: &IndicatorContext) {
        let num = s.gamma_numerator(ctx.mode);
        self.all_num += num;
        self.all_den += s.em_count;
        if s.differs(ctx.prob_tol) {
            self.num += num;
            self.den += s.em_count;
            self.differing += 1;
        }
    }

    pub fn remove(&mut self, s: &CellStats, ctx: &IndicatorContext) {
        let num = s.gamma_numerator(ctx.mode);
        self.all_num -= num;
        self.all_den -= s.em_count;
        if s.differs(ctx.prob_tol) {
            self.num -= num;
            self.den -= s.em_count;
            self.differing -= 1;
        }
    }

    /// `γ` and whether the fallback (mean `|f|` over all emulation points)
    /// had to be used because the differing cells hold no emulation point.
    pub fn gamma(&self) -> (f64, bool) {
        if self.differing == 0 {
            (0.0, false)
        } else if self.den > 0 {
            ((self.num / self.den as f64).max(0.0), false)
        } else if self.all_den > 0 {
            ((self.all_num / self.all_den as f64).max(0.0), true)
        } else {
            (0.0, true)
        }
    }
}

/// `γ` over all cells.
pub fn gamma(stats: &[CellStats], ctx: &IndicatorContext) -> (f64, bool) {
    GammaSums::of(stats, ctx).gamma()
}

/// `Ê_prob,i = γ |P̂_i − P_i|`.
pub fn e_prob(p: &[f64], p_hat: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_dim(p.len(), p_hat.len())?;
    Ok(p.iter().zip(p_hat).map(|(a, b)| gamma * libm::fabs(b - a)).collect())
}

/// `C_{i,f} = L π^{n/2} P̂ / (2ⁿ Γ(n/2 + 1) μ)`.
pub fn c_if(lipschitz: f64, p_hat: f64, measure: f64, dim: usize) -> f64 {
    if p_hat == 0.0 || lipschitz == 0.0 {
        return 0.0;
    }
    let n = dim as f64;
    let ball = libm::pow(core::f64::consts::PI, 0.5 * n) / (libm::pow(2.0, n) * libm::tgamma(0.5 * n + 1.0));
    lipschitz * ball * p_hat / measure
}

/// Largest pairwise difference quotient `|f(a) − f(b)| / d(a, b)`.
pub fn lipschitz_estimate(points: &[&[f64]], values: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            let d = libm::sqrt(dist2(points[a], points[b]));
            if d > 0.0 {
                best = best.max(libm::fabs(values[a] - values[b]) / d);
            }
        }
    }
    best
}

/// `Ê_int,i` of one cell.
pub fn cell_e_int(s: &CellStats, ctx: &IndicatorContext) -> f64 {
    match ctx.mode {
        TargetMode::Cheap => libm::fabs(s.s_hat - s.s),
        TargetMode::Expensive => {
            let b = libm::fabs(s.f_gen) * libm::fabs(s.pa_hat - s.pa);
            let measure = if s.em_in_a > 0 {
                ctx.measure(s.em_in_a)
            } else {
                ctx.mean_measure
            };
            let radius = s.radius.unwrap_or(ctx.mean_radius);
            let a = if measure > 0.0 {
                c_if(s.lipschitz, s.pa_hat, measure, ctx.dim) * 2.0 * radius
            } else {
                0.0
            };
            a + b
        }
    }
}

/// `Ê_i` of one cell for a given `γ`.
#[inline]
pub fn cell_total(s: &CellStats, gamma: f64, ctx: &IndicatorContext) -> f64 {
    cell_e_int(s, ctx) + gamma * libm::fabs(s.p_hat - s.p)
}

/// Plain and enhanced integral estimates `(I_N, Î_N)`.
pub fn integrals(stats: &[CellStats], mode: TargetMode) -> (f64, f64) {
    match mode {
        TargetMode::Cheap => (stats.iter().map(|s| s.s).sum(), stats.iter().map(|s| s.s_hat).sum()),
        TargetMode::Expensive => (
            stats.iter().map(|s| s.f_gen * s.pa).sum(),
            stats.iter().map(|s| s.f_gen * s.pa_hat).sum(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndicatorSet {
    pub e_int: Vec<f64>,
    pub e_prob: Vec<f64>,
    pub gamma: f64,
    pub total: Vec<f64>,
    pub global: f64,
    pub integral_plain: f64,
    pub integral_enhanced: f64,
    /// `γ` came from the all-points fallback.
    pub gamma_fallback: bool,
}

impl IndicatorSet {
    pub fn max(&self) -> f64 {
        self.total.iter().copied().fold(0.0, f64::max)
    }
}

/// Fieldwise assembly; `total = e_int + e_prob`, `global = Σ total`.
pub fn assemble(e_int: Vec<f64>, e_prob: Vec<f64>, gamma: f64, integrals: (f64, f64)) -> Result<IndicatorSet> {
    check_dim(e_int.len(), e_prob.len())?;
    let total: Vec<f64> = e_int.iter().zip(&e_prob).map(|(a, b)| a + b).collect();
    if total.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid("indicators must be finite and nonnegative"));
    }
    let global = total.iter().sum();
    Ok(IndicatorSet {
        e_int,
        e_prob,
        gamma,
        total,
        global,
        integral_plain: integrals.0,
        integral_enhanced: integrals.1,
        gamma_fallback: false,
    })
}

/// All indicators of an iteration from its cell summaries.
pub fn compute(stats: &[CellStats], ctx: &IndicatorContext) -> IndicatorSet {
    let (g, fallback) = gamma(stats, ctx);
    let e_int: Vec<f64> = stats.iter().map(|s| cell_e_int(s, ctx)).collect();
    let e_prob: Vec<f64> = stats.iter().map(|s| g * libm::fabs(s.p_hat - s.p)).collect();
    let mut set = assemble(e_int, e_prob, g, integrals(stats, ctx.mode)).unwrap_or_else(|_| IndicatorSet {
        e_int: vec![f64::NAN; stats.len()],
        e_prob: vec![f64::NAN; stats.len()],
        gamma: g,
        total: vec![f64::NAN; stats.len()],
        global: f64::NAN,
        integral_plain: f64::NAN,
        integral_enhanced: f64::NAN,
        gamma_fallback: fallback,
    });
    set.gamma_fallback = fallback;
    set
}

/// `Ê_int,i` and `(I_N, Î_N)` straight from two chains in cheap mode.
pub fn e_int_cheap(
    target: &PredictionTarget,
    plain: &Chain,
    enhanced: &Chain,
    n_cells: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    if plain.is_empty() || enhanced.is_empty() {
        return Err(Error::invalid("empty chain"));
    }
    let sums = |c: &Chain| {
        let mut s = vec![0.0; n_cells];
        let w = 1.0 / c.len() as f64;
        for (x, &cell) in c.states().zip(c.cells()) {
            s[cell as usize] += w * target.eval(x);
        }
        s
    };
    let (s, s_hat) = (sums(plain), sums(enhanced));
    let e: Vec<f64> = s.iter().zip(&s_hat).map(|(a, b)| libm::fabs(b - a)).collect();
    Ok((e, s.iter().sum(), s_hat.iter().sum()))
}

/// Points of one sample set with their target values and cell assignment.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    points: Vec<f64>,
    /// `f` (zero outside `A`); only filled where the mode needs it.
    f: Vec<f64>,
    in_a: Vec<bool>,
    members: Vec<Vec<u32>>,
    weight: f64,
}

impl PointSet {
    fn build(dim: usize, points: Vec<f64>, cells: &[u32], n_cells: usize, target: &PredictionTarget, with_f: bool) -> Self {
        let count = cells.len();
        let mut members = vec![Vec::new(); n_cells];
        for (j, &c) in cells.iter().enumerate() {
            members[c as usize].push(j as u32);
        }
        let rows = points.chunks_exact(dim);
        let in_a: Vec<bool> = rows.clone().map(|x| target.in_region(x)).collect();
        let f = if with_f {
            rows.map(|x| target.eval(x)).collect()
        } else {
            Vec::new()
        };
        PointSet {
            dim,
            points,
            f,
            in_a,
            members,
            weight: if count == 0 { 0.0 } else { 1.0 / count as f64 },
        }
    }

    pub fn len(&self) -> usize {
        self.in_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_a.is_empty()
    }

    #[inline]
    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn members(&self, cell: usize) -> &[u32] {
        &self.members[cell]
    }
}

/// Chains and emulation points of one iteration, grouped by cell.
#[derive(Debug, Clone)]
pub struct Evidence {
    pub plain: PointSet,
    pub enhanced: PointSet,
    pub emulation: PointSet,
    mode: TargetMode,
}

impl Evidence {
    /// `plain` and `enhanced` must carry cells of `generators`' tessellation,
    /// and `emulation` must have been assigned to the same tessellation.
    pub fn new(plain: Chain, enhanced: Chain, emulation: &EmulationSet, target: &PredictionTarget, n_cells: usize) -> Result<Self> {
        if plain.is_empty() || enhanced.is_empty() {
            return Err(Error::invalid("empty chain"));
        }
        check_dim(n_cells, emulation.counts.len())?;
        let dim = plain.dim();
        let cheap = target.mode() == TargetMode::Cheap;
        let (ps, pc) = plain.into_parts();
        let (es, ec) = enhanced.into_parts();
        let em_flat: Vec<f64> = emulation.points.iter().flatten().copied().collect();
        let em_cells: Vec<u32> = emulation.cell.iter().map(|&c| c as u32).collect();
        Ok(Evidence {
            plain: PointSet::build(dim, ps, &pc, n_cells, target, cheap),
            enhanced: PointSet::build(dim, es, &ec, n_cells, target, cheap),
            emulation: PointSet::build(dim, em_flat, &em_cells, n_cells, target, true),
            mode: target.mode(),
        })
    }

    pub fn mode(&self) -> TargetMode {
        self.mode
    }

    /// Summary of the points given by the three index lists, viewed as one
    /// cell with generator `gen`.
    pub fn stats_of(
        &self,
        gen: &[f64],
        plain: impl Iterator<Item = u32>,
        enhanced: impl Iterator<Item = u32>,
        emulation: impl Iterator<Item = u32> + Clone,
        target: &PredictionTarget,
    ) -> CellStats {
        let mut st = CellStats::default();
        let cheap = self.mode == TargetMode::Cheap;
        let chain_sums = |set: &PointSet, idx: &mut dyn Iterator<Item = u32>| {
            let (mut n, mut fs, mut na) = (0usize, 0.0, 0usize);
            for j in idx {
                let j = j as usize;
                n += 1;
                if cheap {
                    fs += set.f[j];
                }
                na += set.in_a[j] as usize;
            }
            (n as f64 * set.weight, fs * set.weight, na as f64 * set.weight)
        };
        (st.p, st.s, st.pa) = chain_sums(&self.plain, &mut plain.into_iter());
        (st.p_hat, st.s_hat, st.pa_hat) = chain_sums(&self.enhanced, &mut enhanced.into_iter());
        let em = &self.emulation;
        let mut radius2: Option<f64> = None;
        let mut probes: Vec<u32> = Vec::new();
        for j in emulation.clone() {
            let ju = j as usize;
            st.em_count += 1;
            st.em_abs_f += libm::fabs(em.f[ju]);
            if em.in_a[ju] {
                st.em_in_a += 1;
                if probes.len() < LIPSCHITZ_PROBES {
                    probes.push(j);
                }
            }
            let d = dist2(em.point(ju), gen);
            radius2 = Some(radius2.map_or(d, |r: f64| r.max(d)));
        }
        st.radius = radius2.map(libm::sqrt);
        if self.mode == TargetMode::Expensive {
            st.f_gen = target.eval(gen);
            let mut pts: Vec<&[f64]> = probes.iter().map(|&j| em.point(j as usize)).collect();
            let mut vals: Vec<f64> = probes.iter().map(|&j| em.f[j as usize]).collect();
            if target.in_region(gen) {
                pts.push(gen);
                vals.push(st.f_gen);
            }
            st.lipschitz = lipschitz_estimate(&pts, &vals);
        }
        st
    }

    /// Summary of cell `i` as it stands.
    pub fn cell_stats(&self, i: usize, gen: &[f64], target: &PredictionTarget) -> CellStats {
        self.stats_of(
            gen,
            self.plain.members[i].iter().copied(),
            self.enhanced.members[i].iter().copied(),
            self.emulation.members[i].iter().copied(),
            target,
        )
    }

    /// Summaries of cell `i` and of a new cell at `candidate` after moving
    /// every point of cell `i` that is strictly closer to `candidate`.
    pub fn split_stats(&self, i: usize, gen: &[f64], candidate: &[f64], target: &PredictionTarget) -> (CellStats, CellStats) {
        let part = |set: &PointSet| -> (Vec<u32>, Vec<u32>) {
            set.members[i]
                .iter()
                .partition(|&&j| dist2(set.point(j as usize), candidate) >= dist2(set.point(j as usize), gen))
        };
        let (pk, pm) = part(&self.plain);
        let (ek, emv) = part(&self.enhanced);
        let (mk, mm) = part(&self.emulation);
        let keep = self.stats_of(gen, pk.into_iter(), ek.into_iter(), mk.into_iter(), target);
        let moved = self.stats_of(candidate, pm.into_iter(), emv.into_iter(), mm.into_iter(), target);
        (keep, moved)
    }

    pub fn all_stats(&self, generators: &[&[f64]], target: &PredictionTarget) -> Vec<CellStats> {
        generators
            .iter()
            .enumerate()
            .map(|(i, g)| self.cell_stats(i, g, target))
            .collect()
    }
}
