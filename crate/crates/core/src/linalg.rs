//! Small dense and sparse linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default ceiling on full-space dimensions, overridable through `QPERT_MAX_DIM`.
pub const DEFAULT_MAX_DIM: usize = 1 << 20;

pub fn max_dim() -> usize {
    std::env::var("QPERT_MAX_DIM")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_DIM)
}

/// `d^n` with an overflow-safe capacity check against [`max_dim`].
pub fn checked_dim(d: usize, n: usize) -> Result<usize> {
    let ceiling = max_dim();
    let mut dim: u128 = 1;
    for _ in 0..n {
        dim = dim.saturating_mul(d as u128);
    }
    if dim > ceiling as u128 {
        return Err(Error::Capacity { dim, ceiling });
    }
    Ok(dim as usize)
}

/// `<a, b>` linear in the first argument, antilinear in the second.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Largest entry of `|A - A^†|`.
pub fn hermitian_defect(a: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Ascending eigenvalues and matching orthonormal eigenvectors (as columns).
pub fn eigh(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap()
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// `A^{-1/2}` for a Hermitian positive-definite matrix.
pub fn inv_sqrt_hermitian(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    apply_spectral(a, |x| 1.0 / x.sqrt())
}

pub fn sqrt_hermitian(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    apply_spectral(a, f64::sqrt)
}

fn apply_spectral(a: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<C64>> {
    let (vals, vecs) = eigh(a);
    if let Some(&min) = vals.first() {
        if min <= 0.0 {
            return Err(Error::NotPositiveDefinite(min));
        }
    }
    let diag = DVector::from_iterator(vals.len(), vals.iter().map(|&x| C64::from(f(x))));
    Ok(&vecs * DMatrix::from_diagonal(&diag) * vecs.adjoint())
}

/// Largest singular value.
pub fn operator_norm(a: &DMatrix<C64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Compressed-row sparse matrix with complex entries.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    /// Builds from per-row lists of `(column, value)`; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, C64)>>, ncols: usize) -> Self {
        let dim = rows.len();
        debug_assert!(ncols == dim, "only square matrices are used");
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c as u32);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { dim, row_ptr, cols, vals }
    }

    /// Builds row by row; `fill(i, out)` pushes the entries of row `i` (duplicates are summed).
    pub fn from_row_fn(dim: usize, mut fill: impl FnMut(usize, &mut Vec<(usize, C64)>)) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut buf = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            buf.clear();
            fill(i, &mut buf);
            buf.sort_by_key(|&(c, _)| c);
            let start = cols.len();
            for &(c, v) in &buf {
                if cols.len() > start && *cols.last().unwrap() == c as u32 {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { dim, row_ptr, cols, vals }
    }

    /// Builds from columns: `columns[j]` lists the nonzero `(row, value)` of column `j`.
    pub fn from_columns(columns: &[Vec<(usize, C64)>], nrows: usize) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); nrows];
        for (j, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                rows[i].push((j, v));
            }
        }
        Self::from_rows(rows, columns.len())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b]
            .iter()
            .zip(&self.vals[a..b])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or(ZERO)
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shifted(&self, shift: f64) -> SparseMatrix {
        let rows = (0..self.dim)
            .map(|i| {
                let mut r: Vec<(usize, C64)> = self.row(i).collect();
                r.push((i, C64::from(shift)));
                r
            })
            .collect();
        SparseMatrix::from_rows(rows, self.dim)
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, v)| j == i || v == ZERO))
    }
}

/// Least-squares line through `(x, y)` points: `(slope, intercept, r^2)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Bessel functions `J_0(x) .. J_{n-1}(x)` by Miller's backward recurrence.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if x == 0.0 {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    let start = (n.max(x.abs() as usize) + 30 + (x.abs().sqrt() * 10.0) as usize) | 1;
    let mut vals = vec![0.0f64; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    // J_0 + 2 sum_k J_{2k} = 1
    let mut norm = vals[0];
    let mut k = 2;
    while k <= start {
        norm += 2.0 * vals[k];
        k += 2;
    }
    vals.truncate(n);
    vals.iter().map(|v| v / norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_matches_tabulated_values() {
        let j = bessel_j_sequence(1.0, 3);
        assert_relative_eq!(j[0], 0.7651976865579666, epsilon = 1e-13);
        assert_relative_eq!(j[1], 0.4400505857449335, epsilon = 1e-13);
        assert_relative_eq!(j[2], 0.1149034849319005, epsilon = 1e-13);
        let j = bessel_j_sequence(25.0, 2);
        assert_relative_eq!(j[0], 0.09626678327595811, epsilon = 1e-12);
        assert_relative_eq!(j[1], -0.1253502495802899, epsilon = 1e-12);
    }

    #[test]
    fn inverse_square_root_squares_to_inverse() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(2.0, 0.0),
                C64::new(0.3, 0.1),
                C64::new(0.3, -0.1),
                C64::new(1.0, 0.0),
            ],
        );
        let s = inv_sqrt_hermitian(&a).unwrap();
        let id = &s * &a * &s;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - C64::from(want)).norm() < 1e-12);
            }
        }
        let neg = DMatrix::from_diagonal(&DVector::from_vec(vec![ONE, -ONE]));
        assert!(matches!(inv_sqrt_hermitian(&neg), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn sparse_roundtrip_and_duplicates() {
        let m = SparseMatrix::from_rows(
            vec![vec![(1, ONE), (1, ONE)], vec![(0, C64::new(2.0, 0.0))]],
            2,
        );
        assert_eq!(m.get(0, 1), C64::new(2.0, 0.0));
        assert_eq!(m.hermitian_defect(), 0.0);
        let y = m.matvec(&[ONE, ZERO]);
        assert_eq!(y, vec![ZERO, C64::new(2.0, 0.0)]);
        let shifted = m.shifted(-1.0);
        assert_eq!(shifted.get(1, 1), C64::new(-1.0, 0.0));
    }

    #[test]
    fn capacity_guard_names_ceiling() {
        let err = checked_dim(2, 200).unwrap_err();
        assert!(err.to_string().contains("ceiling"));
        assert_eq!(checked_dim(3, 4).unwrap(), 81);
    }
}
