//! Small dense/banded linear algebra used by the built-in models.

use alloc::vec;
use alloc::vec::Vec;

/// Row-major dense matrix; used for QoI Jacobians (components × parameters).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `out += self · x`.
    pub fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            *o += dot(self.row(r), x);
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` couples row `i+1` to column `i`, `upper[i]` row `i` to column
/// `i+1`. Returns `None` on a zero pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 {
        return None;
    }
    if n > 1 {
        c[0] = upper[0] / piv;
    }
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i - 1] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        if i < n - 1 {
            c[i] = upper[i] / piv;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

/// Symmetric banded matrix stored by diagonals: `band[k][i] = A[i][i+k]`.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    band: Vec<Vec<f64>>,
}

impl SymBanded {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        SymBanded {
            n,
            band: (0..=half_bandwidth).map(|k| vec![0.0; n.saturating_sub(k)]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `v` to `A[i][j]` (and `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.band[c - r][r] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        let k = c - r;
        if k < self.band.len() {
            self.band[k][r]
        } else {
            0.0
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.band[0][i] * x[i];
        }
        for k in 1..self.band.len() {
            for (i, &a) in self.band[k].iter().enumerate() {
                y[i] += a * x[i + k];
                y[i + k] += a * x[i];
            }
        }
        y
    }

    /// Banded LDLᵀ solve without pivoting; `None` if a pivot is not positive.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let w = self.band.len() - 1;
        // dense band copy: l[i][k] = L[i][i-k]
        let mut l = vec![vec![0.0; w + 1]; n];
        let mut dpiv = vec![0.0; n];
        for i in 0..n {
            for k in (1..=w.min(i)).rev() {
                let j = i - k;
                let mut s = self.get(j, i);
                for m in 1..=w {
                    if k + m > w || m > j {
                        break;
                    }
                    // L[i][j-m] * D[j-m] * L[j][j-m]
                    s -= l[i][k + m] * dpiv[j - m] * l[j][m];
                }
                l[i][k] = s / dpiv[j];
            }
            let mut s = self.get(i, i);
            for k in 1..=w.min(i) {
                s -= l[i][k] * l[i][k] * dpiv[i - k];
            }
            if s <= 0.0 || !s.is_finite() {
                return None;
            }
            dpiv[i] = s;
        }
        let mut y = rhs.to_vec();
        for i in 0..n {
            for k in 1..=w.min(i) {
                y[i] -= l[i][k] * y[i - k];
            }
        }
        for i in 0..n {
            y[i] /= dpiv[i];
        }
        for i in (0..n).rev() {
            for k in 1..=w.min(n - 1 - i) {
                y[i] -= l[i + k][k] * y[i + k];
            }
        }
        Some(y)
    }
}

/// Solves the 2×2 system `[[a, b], [c, d]] x = r`.
#[inline]
pub fn solve2(a: f64, b: f64, c: f64, d: f64, r: [f64; 2]) -> Option<[f64; 2]> {
    let det = a * d - b * c;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([(d * r[0] - b * r[1]) / det, (a * r[1] - c * r[0]) / det])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solves_poisson_stencil() {
        let n = 9;
        let lower = vec![-1.0; n - 1];
        let upper = vec![-1.0; n - 1];
        let diag = vec![2.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = 2.0 * x_true[i];
            if i > 0 {
                rhs[i] -= x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] -= x_true[i + 1];
            }
        }
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(solve_tridiagonal(&[1.0], &[0.0, 1.0], &[1.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn banded_matches_apply() {
        let n = 17;
        let mut a = SymBanded::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 6.0 + i as f64 * 0.1);
            if i + 1 < n {
                a.add(i, i + 1, -1.5);
            }
            if i + 2 < n {
                a.add(i + 2, i, 0.7);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
        let b = a.apply(&x_true);
        let x = a.solve(&b).unwrap();
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
        let mut singular = SymBanded::zeros(2, 1);
        singular.add(0, 0, 1.0);
        singular.add(0, 1, 1.0);
        singular.add(1, 1, 1.0);
        assert!(singular.solve(&[1.0, 1.0]).is_none());
    }

    #[test]
    fn two_by_two() {
        let x = solve2(2.0, 1.0, 1.0, 3.0, [3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        assert!(solve2(1.0, 2.0, 2.0, 4.0, [1.0, 1.0]).is_none());
    }
}
