//! Compressed sparse row storage and a profile (skyline) Cholesky solver.
//!
//! The stiffness matrices produced by [`crate::mesh::assemble`] are small and
//! banded once vertices are numbered row by row (rectangles) or ring by ring
//! (disks), so a profile factorization of the interior block is both exact and
//! cheap. The factor is reused for every Riesz-map solve of the descent and
//! mountain-pass iterations.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds an `n x n` matrix from unsorted triplets; duplicates are summed
    /// in the order they appear, so the result is deterministic.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            // stable sort keeps the summation order of duplicates fixed
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut acc = T::zero();
                while k < row.len() && row[k].0 == j {
                    acc = acc + row[k].1;
                    k += 1;
                }
                col_idx.push(j);
                values.push(acc);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterator over `(column, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[a..b].binary_search(&j) {
            Ok(k) => self.values[a + k],
            Err(_) => T::zero(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[T]) -> T {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<T>())
            .sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }
}

/// Cholesky factor `A_II = L Lᵀ` of the principal submatrix on `index`,
/// stored by rows over each row's profile.
#[derive(Debug, Clone)]
pub struct SkylineCholesky<T> {
    index: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> SkylineCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>, index: &[usize]) -> Result<Self> {
        let m = index.len();
        let mut local = vec![usize::MAX; a.n()];
        for (k, &g) in index.iter().enumerate() {
            local[g] = k;
        }
        let mut first = vec![0usize; m];
        for (i, &g) in index.iter().enumerate() {
            first[i] = a
                .row(g)
                .filter_map(|(j, _)| (local[j] != usize::MAX).then_some(local[j]))
                .filter(|&j| j <= i)
                .min()
                .unwrap_or(i);
        }
        let mut start = Vec::with_capacity(m + 1);
        start.push(0);
        for i in 0..m {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![T::zero(); start[m]];
        for (i, &g) in index.iter().enumerate() {
            for (j, v) in a.row(g) {
                let lj = local[j];
                if lj != usize::MAX && lj <= i {
                    data[start[i] + (lj - first[i])] = v;
                }
            }
        }
        for i in 0..m {
            for j in first[i]..=i {
                let lo = first[i].max(first[j]);
                let mut s = data[start[i] + (j - first[i])];
                for k in lo..j {
                    s = s - data[start[i] + (k - first[i])] * data[start[j] + (k - first[j])];
                }
                if j < i {
                    let djj = data[start[j] + (j - first[j])];
                    data[start[i] + (j - first[i])] = s / djj;
                } else {
                    if !(s > T::zero()) {
                        return Err(Error::NotPositiveDefinite { row: index[i] });
                    }
                    data[start[i] + (i - first[i])] = s.sqrt();
                }
            }
        }
        Ok(Self {
            index: index.to_vec(),
            first,
            start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    fn entry(&self, i: usize, j: usize) -> T {
        self.data[self.start[i] + (j - self.first[i])]
    }

    /// Solves `A_II x_I = b_I` in place on a full-length vector; entries
    /// outside `index` are set to zero.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let m = self.index.len();
        let mut x: Vec<T> = self.index.iter().map(|&g| b[g]).collect();
        for i in 0..m {
            let mut s = x[i];
            for k in self.first[i]..i {
                s = s - self.entry(i, k) * x[k];
            }
            x[i] = s / self.entry(i, i);
        }
        for i in (0..m).rev() {
            x[i] = x[i] / self.entry(i, i);
            let xi = x[i];
            for k in self.first[i]..i {
                x[k] = x[k] - self.entry(i, k) * xi;
            }
        }
        b.iter_mut().for_each(|v| *v = T::zero());
        for (k, &g) in self.index.iter().enumerate() {
            b[g] = x[k];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
