//! Compressed sparse row storage for complex matrices.

use num_complex::Complex64 as C64;

/// Accumulates `(row, col, value)` contributions. Duplicates are summed in
/// insertion order when the matrix is finalized, so the result does not
/// depend on anything but the order of `push` calls.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: C64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, value));
    }

    pub fn into_csr(mut self) -> ComplexSparseMatrix {
        // stable: equal keys keep insertion order
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        ComplexSparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
        .dropping_zeros()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl ComplexSparseMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn from_dense(rows: &[Vec<C64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut b = TripletBuilder::new(rows.len(), n_cols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                b.push(i, j, v);
            }
        }
        b.into_csr()
    }

    fn dropping_zeros(self) -> Self {
        if self.values.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return self;
        }
        let mut b = Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr: vec![0; self.n_rows + 1],
            col_idx: Vec::with_capacity(self.col_idx.len()),
            values: Vec::with_capacity(self.values.len()),
        };
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.values[k] != C64::new(0.0, 0.0) {
                    b.col_idx.push(self.col_idx[k]);
                    b.values.push(self.values[k]);
                }
            }
            b.row_ptr[i + 1] = b.col_idx.len();
        }
        b
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Iterates `(col, value)` of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n_cols, "vector length mismatch");
        (0..self.n_rows)
            .map(|i| self.row(i).fold(C64::new(0.0, 0.0), |acc, (j, v)| acc + v * x[j]))
            .collect()
    }

    /// `conj(x)^T A x`.
    pub fn quadratic_form(&self, x: &[C64]) -> C64 {
        let ax = self.mul_vec(x);
        x.iter().zip(&ax).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.dropping_zeros()
    }

    /// `sum_k c_k A_k` over matrices of equal shape, merging sparsity patterns.
    pub fn linear_combination(terms: &[(C64, &ComplexSparseMatrix)]) -> Self {
        let (n_rows, n_cols) = terms.first().map_or((0, 0), |(_, m)| (m.n_rows, m.n_cols));
        let mut b = TripletBuilder::with_capacity(n_rows, n_cols, terms.iter().map(|(_, m)| m.nnz()).sum());
        for (c, m) in terms {
            assert_eq!((m.n_rows, m.n_cols), (n_rows, n_cols), "shape mismatch");
            for i in 0..m.n_rows {
                for (j, v) in m.row(i) {
                    b.push(i, j, *c * v);
                }
            }
        }
        b.into_csr()
    }

    pub fn conj_transpose(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.n_cols, self.n_rows, self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                b.push(j, i, v.conj());
            }
        }
        b.into_csr()
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut out = vec![vec![C64::new(0.0, 0.0); self.n_cols]; self.n_rows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    /// `max |A - A^H|` entrywise.
    pub fn hermitian_defect(&self) -> f64 {
        let ah = self.conj_transpose();
        max_abs_diff(self, &ah)
    }

    /// `max |A + A^H|` entrywise.
    pub fn skew_hermitian_defect(&self) -> f64 {
        let ah = self.conj_transpose();
        let sum = Self::linear_combination(&[(C64::new(1.0, 0.0), self), (C64::new(1.0, 0.0), &ah)]);
        sum.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Whether the stored pattern equals that of the transpose.
    pub fn is_structurally_symmetric(&self) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let t = self.conj_transpose();
        t.row_ptr == self.row_ptr && t.col_idx == self.col_idx
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for i in 0..self.n_rows {
            for (j, _) in self.row(i) {
                if j < i {
                    lower = lower.max(i - j);
                } else {
                    upper = upper.max(j - i);
                }
            }
        }
        (lower, upper)
    }
}

/// Entrywise `max |A - B|` over the union of both patterns.
pub fn max_abs_diff(a: &ComplexSparseMatrix, b: &ComplexSparseMatrix) -> f64 {
    let d = ComplexSparseMatrix::linear_combination(&[(C64::new(1.0, 0.0), a), (C64::new(-1.0, 0.0), b)]);
    d.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn dense_mul_vec(a: &[Vec<C64>], x: &[C64]) -> Vec<C64> {
    a.iter().map(|row| row.iter().zip(x).map(|(v, xv)| v * xv).sum()).collect()
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}
