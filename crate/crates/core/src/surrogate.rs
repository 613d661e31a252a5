//! Piecewise Taylor surrogate on an implicit Voronoi tessellation.
//!
//! Cell `i` evaluates to `q_i + p_i J_i (λ − λ_i)`; the enhanced variant adds
//! the cell's error estimate `e_i` as a constant shift.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_dim, Error};
use crate::linalg::Matrix;
use crate::models::{Level, QoiRecord};
use crate::space::Tessellation;
use crate::Result;

/// Local polynomial order of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Order {
    #[default]
    Constant,
    Linear,
}

impl Order {
    pub fn degree(self) -> u8 {
        match self {
            Order::Constant => 0,
            Order::Linear => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurrogateCell {
    pub generator: Vec<f64>,
    pub level: Level,
    pub order: Order,
    pub q: Vec<f64>,
    pub error_estimate: Vec<f64>,
    /// Required for [`Order::Linear`]; kept (but unused) for constant cells.
    pub jacobian: Option<Matrix>,
}

impl SurrogateCell {
    /// Builds a cell from a model evaluation, taking the jacobian if present.
    pub fn from_record(rec: QoiRecord, order: Order) -> Self {
        SurrogateCell {
            generator: rec.lambda,
            level: rec.level,
            order,
            q: rec.q,
            error_estimate: rec.error_estimate,
            jacobian: rec.jacobian,
        }
    }

    fn validate(&self, i: usize, dim: usize, m: usize) -> Result<()> {
        check_dim(dim, self.generator.len())?;
        if self.q.len() != m || self.error_estimate.len() != m {
            return Err(Error::invalid(format!("cell {i}: QoI length differs from {m}")));
        }
        if self.q.iter().chain(&self.error_estimate).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("cell {i}: non-finite QoI or error estimate")));
        }
        match (&self.jacobian, self.order) {
            (None, Order::Linear) => Err(Error::invalid(format!("cell {i}: linear order without a jacobian"))),
            (Some(j), _) if j.rows() != m || j.cols() != dim => Err(Error::invalid(format!(
                "cell {i}: jacobian is {}x{}, expected {m}x{dim}",
                j.rows(),
                j.cols()
            ))),
            _ => Ok(()),
        }
    }

    /// Writes the cell's value at `x` into `out`.
    #[inline]
    pub fn eval_into(&self, x: &[f64], enhanced: bool, out: &mut [f64]) {
        out.copy_from_slice(&self.q);
        if enhanced {
            for (o, e) in out.iter_mut().zip(&self.error_estimate) {
                *o += e;
            }
        }
        if self.order == Order::Linear {
            if let Some(j) = &self.jacobian {
                for (r, o) in out.iter_mut().enumerate() {
                    *o += j
                        .row(r)
                        .iter()
                        .zip(x.iter().zip(&self.generator))
                        .map(|(a, (xv, g))| a * (xv - g))
                        .sum::<f64>();
                }
            }
        }
    }
}

/// The surrogate `Q_{l,p}^{(N)}`; immutable once built.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "SurrogateRepr", into = "SurrogateRepr"))]
pub struct Surrogate {
    tess: Tessellation,
    cells: Vec<SurrogateCell>,
    qoi_dim: usize,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct SurrogateRepr {
    cells: Vec<SurrogateCell>,
}

#[cfg(feature = "serde")]
impl TryFrom<SurrogateRepr> for Surrogate {
    type Error = Error;

    fn try_from(r: SurrogateRepr) -> Result<Self> {
        Surrogate::new(r.cells)
    }
}

#[cfg(feature = "serde")]
impl From<Surrogate> for SurrogateRepr {
    fn from(s: Surrogate) -> Self {
        SurrogateRepr { cells: s.cells }
    }
}

impl PartialEq for Surrogate {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells
    }
}

impl Surrogate {
    pub fn new(cells: Vec<SurrogateCell>) -> Result<Self> {
        let first = cells
            .first()
            .ok_or_else(|| Error::invalid("surrogate needs at least one cell"))?;
        let dim = first.generator.len();
        let m = first.q.len();
        if dim == 0 || m == 0 {
            return Err(Error::invalid("empty parameter or QoI vector"));
        }
        for (i, c) in cells.iter().enumerate() {
            c.validate(i, dim, m)?;
        }
        let gens: Vec<Vec<f64>> = cells.iter().map(|c| c.generator.clone()).collect();
        let tess = Tessellation::new(dim, &gens)?;
        Ok(Surrogate { tess, cells, qoi_dim: m })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.tess.dim()
    }

    pub fn qoi_dim(&self) -> usize {
        self.qoi_dim
    }

    pub fn cells(&self) -> &[SurrogateCell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &SurrogateCell {
        &self.cells[i]
    }

    pub fn tessellation(&self) -> &Tessellation {
        &self.tess
    }

    pub fn into_cells(self) -> Vec<SurrogateCell> {
        self.cells
    }

    /// Evaluates without allocating; returns the containing cell.
    #[inline]
    pub fn eval_into(&self, x: &[f64], enhanced: bool, out: &mut [f64]) -> usize {
        let i = self.tess.nearest_unchecked(x);
        self.cells[i].eval_into(x, enhanced, out);
        i
    }

    pub fn eval(&self, x: &[f64], enhanced: bool) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = alloc::vec![0.0; self.qoi_dim];
        self.eval_into(x, enhanced, &mut out);
        Ok(out)
    }

    pub fn batch_eval(&self, points: &[Vec<f64>], enhanced: bool) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|p| self.eval(p, enhanced)).collect()
    }

    /// Cells solved at each level, indexed by `level - 1`.
    pub fn level_histogram(&self, max_level: Level) -> Vec<usize> {
        let mut h = alloc::vec![0; max_level.index() + 1];
        for c in &self.cells {
            if let Some(slot) = h.get_mut(c.level.index()) {
                *slot += 1;
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn cell(g: &[f64], q: &[f64], e: &[f64], jac: Option<Vec<f64>>) -> SurrogateCell {
        let m = q.len();
        let n = g.len();
        SurrogateCell {
            generator: g.to_vec(),
            level: Level::new(1),
            order: if jac.is_some() { Order::Linear } else { Order::Constant },
            q: q.to_vec(),
            error_estimate: e.to_vec(),
            jacobian: jac.map(|j| Matrix::from_rows(m, n, j)),
        }
    }

    #[test]
    fn spec_examples() {
        let s = Surrogate::new(vec![cell(&[0.0], &[1.0], &[0.0], None), cell(&[1.0], &[3.0], &[0.0], None)]).unwrap();
        assert_eq!(s.eval(&[0.4], false).unwrap(), vec![1.0]);
        assert_eq!(s.eval(&[1.0], false).unwrap(), vec![3.0]);

        let e = Surrogate::new(vec![cell(&[0.0], &[1.0], &[0.1], None)]).unwrap();
        assert_eq!(e.eval(&[0.0], true).unwrap(), vec![1.1]);

        let lin = Surrogate::new(vec![cell(&[0.0], &[2.0], &[0.0], Some(vec![3.0]))]).unwrap();
        assert_eq!(lin.eval(&[0.5], false).unwrap(), vec![3.5]);
        assert_eq!(
            lin.eval(&[0.5, 0.1], false),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn linear_without_jacobian_rejected() {
        let mut c = cell(&[0.0], &[1.0], &[0.0], None);
        c.order = Order::Linear;
        assert!(Surrogate::new(vec![c]).is_err());
        let mut bad = cell(&[0.0, 1.0], &[1.0], &[0.0], None);
        bad.jacobian = Some(Matrix::from_rows(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        assert!(SurrogateCell::validate(&bad, 0, 2, 1).is_err());
    }

    #[test]
    fn batch_matches_single() {
        let s = Surrogate::new(vec![
            cell(&[0.0, 0.0], &[1.0, 2.0], &[0.1, 0.2], Some(vec![1.0, 0.0, 0.0, 1.0])),
            cell(&[1.0, 1.0], &[3.0, 4.0], &[0.0, 0.0], None),
        ])
        .unwrap();
        let pts = vec![vec![0.2, 0.1], vec![0.9, 0.7], vec![0.4, 0.4]];
        let batch = s.batch_eval(&pts, true).unwrap();
        for (p, b) in pts.iter().zip(&batch) {
            assert_eq!(&s.eval(p, true).unwrap(), b);
        }
        let rev: Vec<Vec<f64>> = pts.iter().rev().cloned().collect();
        let rb = s.batch_eval(&rev, true).unwrap();
        assert_eq!(rb, batch.into_iter().rev().collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn interpolates_at_generators(
            gens in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..30),
            qs in proptest::collection::vec(-5.0f64..5.0, 30),
            linear in any::<bool>(),
        ) {
            let mut seen = Vec::new();
            let mut cells = Vec::new();
            for (k, (a, b)) in gens.iter().enumerate() {
                let g = vec![*a, *b];
                if seen.contains(&g) { continue; }
                seen.push(g.clone());
                let jac = linear.then(|| vec![qs[k], -qs[k]]);
                cells.push(cell(&g, &[qs[k]], &[0.0], jac));
            }
            let s = Surrogate::new(cells).unwrap();
            for (i, c) in s.cells().iter().enumerate() {
                prop_assert_eq!(s.eval(&c.generator, false).unwrap(), c.q.clone());
                // zero error estimates make both variants coincide
                prop_assert_eq!(s.eval(&c.generator, true).unwrap(), c.q.clone());
                prop_assert_eq!(s.tessellation().nearest_cell(&c.generator).unwrap(), i);
            }
        }

        #[test]
        fn affine_model_reproduced_by_linear_cells(
            gens in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
            probe in (0.0f64..1.0, 0.0f64..1.0),
        ) {
            let f = |x: &[f64]| 1.5 + 2.0 * x[0] - 0.5 * x[1];
            let mut seen = Vec::new();
            let mut cells = Vec::new();
            for (a, b) in gens {
                let g = vec![a, b];
                if seen.contains(&g) { continue; }
                seen.push(g.clone());
                cells.push(cell(&g, &[f(&g)], &[0.0], Some(vec![2.0, -0.5])));
            }
            let s = Surrogate::new(cells).unwrap();
            let x = [probe.0, probe.1];
            prop_assert!((s.eval(&x, false).unwrap()[0] - f(&x)).abs() < 1e-12);
        }

        #[test]
        fn affine_along_segment_inside_one_cell(t in 0.0f64..0.3) {
            let s = Surrogate::new(vec![
                cell(&[0.0, 0.0], &[1.0], &[0.0], Some(vec![0.7, -1.3])),
                cell(&[1.0, 1.0], &[0.0], &[0.0], None),
            ]).unwrap();
            let at = |u: f64| s.eval(&[u, 0.5 * u], false).unwrap()[0];
            let (a, b, c) = (at(t), at(t + 0.05), at(t + 0.1));
            prop_assert!(((b - a) - (c - b)).abs() < 1e-12);
        }
    }
}
