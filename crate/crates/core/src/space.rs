//! Parameter domain, implicit Voronoi tessellation and emulation points.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, Error};
use crate::kdtree::KdTree;
use crate::Result;

/// An axis-aligned box `Π [lo_d, hi_d]` with the Euclidean metric.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParameterSpace {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParameterSpace {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::invalid("parameter space needs at least one dimension"));
        }
        for (d, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "dimension {d}: bounds [{lo}, {hi}] are not a proper interval"
                )));
            }
        }
        Ok(ParameterSpace {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
        })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(&alloc::vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Draws one uniform point.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    /// `count` i.i.d. uniform points, row-major.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.sample_point(rng)).collect()
    }
}

/// Voronoi tessellation given only by its generators.
#[derive(Debug, Clone)]
pub struct Tessellation {
    dim: usize,
    tree: KdTree,
}

impl Tessellation {
    pub fn new(dim: usize, generators: &[Vec<f64>]) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::invalid("tessellation needs at least one generator"));
        }
        let mut flat = Vec::with_capacity(dim * generators.len());
        for g in generators {
            check_dim(dim, g.len())?;
            flat.extend_from_slice(g);
        }
        let tree = KdTree::new(dim, flat);
        for (i, g) in generators.iter().enumerate() {
            if tree.nearest(g).map(|(j, _)| j) != Some(i) {
                return Err(Error::invalid(format!("generator {i} duplicates an earlier one")));
            }
        }
        Ok(Tessellation { dim, tree })
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generator(&self, i: usize) -> &[f64] {
        self.tree.point(i)
    }

    /// Index of the Voronoi cell containing `x` (smallest index on ties).
    pub fn nearest_cell(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        Ok(self.nearest_unchecked(x))
    }

    #[inline]
    pub(crate) fn nearest_unchecked(&self, x: &[f64]) -> usize {
        self.tree.nearest(x).map(|(i, _)| i).unwrap_or(0)
    }

    /// Cell indices of the `k` generators closest to generator `i`, `i` first.
    pub fn neighbourhood(&self, i: usize, k: usize) -> Vec<usize> {
        let g = self.generator(i).to_vec();
        let mut out: Vec<usize> = self.tree.k_nearest(&g, k).into_iter().map(|x| x.0).collect();
        if let Some(pos) = out.iter().position(|&j| j == i) {
            out.remove(pos);
        } else {
            out.pop();
        }
        out.insert(0, i);
        out
    }

    pub fn assign(&self, points: &[Vec<f64>]) -> Result<Vec<usize>> {
        points.iter().map(|p| self.nearest_cell(p)).collect()
    }
}

/// Uniform emulation points and their cell assignment.
#[derive(Debug, Clone)]
pub struct EmulationSet {
    pub points: Vec<Vec<f64>>,
    pub cell: Vec<usize>,
    pub counts: Vec<usize>,
}

impl EmulationSet {
    pub fn draw<R: Rng + ?Sized>(
        space: &ParameterSpace,
        tess: &Tessellation,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("emulation set needs at least one point"));
        }
        Self::from_points(tess, space.sample_uniform(count, rng))
    }

    pub fn from_points(tess: &Tessellation, points: Vec<Vec<f64>>) -> Result<Self> {
        let cell = tess.assign(&points)?;
        let mut counts = alloc::vec![0usize; tess.len()];
        for &c in &cell {
            counts[c] += 1;
        }
        Ok(EmulationSet {
            points,
            cell,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Monte Carlo estimate of `μ(V_i) / μ(Λ)` for every cell.
    pub fn cell_volume_fractions(&self) -> Result<Vec<f64>> {
        volume_fractions(&self.counts)
    }

    /// Indices of the emulation points of each cell.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = alloc::vec![Vec::new(); self.counts.len()];
        for (j, &c) in self.cell.iter().enumerate() {
            out[c].push(j);
        }
        out
    }
}

/// `counts_i / Σ counts`.
pub fn volume_fractions(counts: &[usize]) -> Result<Vec<f64>> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("empty emulation set"));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}
