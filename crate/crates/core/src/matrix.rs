/// Borrowed row-major view of an `n × k` covariate matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMajor<'a> {
    data: &'a [f64],
    cols: usize,
}

impl<'a> RowMajor<'a> {
    /// Wraps `data` as rows of `cols` values. Panics if the length is not a
    /// multiple of `cols` or `cols == 0`.
    pub fn new(data: &'a [f64], cols: usize) -> Self {
        assert!(cols > 0, "matrix needs at least one column");
        assert_eq!(data.len() % cols, 0, "ragged row-major buffer");
        Self { data, cols }
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Entry `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Underlying buffer.
    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }

    /// Iterator over rows.
    pub fn iter_rows(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.data.chunks_exact(self.cols)
    }
}
