use ndarray::Array2;

/// Compressed sparse columns. Only nonzero values are stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseColumns {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseColumns {
    pub fn new(n_rows: usize) -> Self {
        SparseColumns {
            n_rows,
            col_ptr: vec![0],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a column from `(row, value)` pairs in increasing row order;
    /// zeros are skipped.
    pub fn push_column(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        let mut last = None;
        for (i, v) in entries {
            assert!(i < self.n_rows, "row {i} out of range");
            assert!(last.is_none_or(|l| i > l), "rows must be strictly increasing");
            last = Some(i);
            if v != 0.0 {
                self.row_idx.push(i);
                self.values.push(v);
            }
        }
        self.col_ptr.push(self.row_idx.len());
    }

    pub fn push_dense(&mut self, column: &[f64]) {
        assert_eq!(column.len(), self.n_rows);
        self.push_column(column.iter().copied().enumerate());
    }

    pub fn from_dense(m: &Array2<f64>) -> Self {
        let mut s = SparseColumns::new(m.nrows());
        for col in m.columns() {
            s.push_column(col.iter().copied().enumerate());
        }
        s
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.col_ptr[k], self.col_ptr[k + 1]);
        self.row_idx[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn column_nnz(&self, k: usize) -> usize {
        self.col_ptr[k + 1] - self.col_ptr[k]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        let (a, b) = (self.col_ptr[k], self.col_ptr[k + 1]);
        match self.row_idx[a..b].binary_search(&i) {
            Ok(pos) => self.values[a + pos],
            Err(_) => 0.0,
        }
    }

    pub fn dense_column(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (i, v) in self.column(k) {
            out[i] = v;
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n_rows, self.n_cols()));
        for k in 0..self.n_cols() {
            for (i, v) in self.column(k) {
                m[[i, k]] = v;
            }
        }
        m
    }

    /// Rows that are nonzero in at least one column, ascending.
    pub fn ever_nonzero(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n_rows];
        for &i in &self.row_idx {
            seen[i] = true;
        }
        (0..self.n_rows).filter(|&i| seen[i]).collect()
    }

    /// Applies `f(row, value)` to every stored entry, dropping results that are zero.
    pub fn map(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut out = SparseColumns::new(self.n_rows);
        for k in 0..self.n_cols() {
            let entries: Vec<_> = self.column(k).map(|(i, v)| (i, f(i, v))).collect();
            out.push_column(entries);
        }
        out
    }
}
