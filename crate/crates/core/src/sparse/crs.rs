use crate::error::{Error, Result};

use super::counters::{NoProbe, OpCounters, Probe};

/// Column index type used by the stored matrices.
pub type Index = u32;

/// Compressed row storage.
///
/// `col` holds local column indices (owned nodes first, then external
/// nodes). Entries of a row are kept in global column order; on a single
/// rank that is plain ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct CrsMatrix {
    /// Global id of each stored row.
    pub rows: Vec<usize>,
    /// Number of local columns (owned plus external).
    pub ncols: usize,
    pub ptr: Vec<usize>,
    pub col: Vec<Index>,
    pub val: Vec<f64>,
}

impl CrsMatrix {
    pub fn new(
        rows: Vec<usize>,
        ncols: usize,
        ptr: Vec<usize>,
        col: Vec<Index>,
        val: Vec<f64>,
    ) -> Result<Self> {
        let a = CrsMatrix { rows, ncols, ptr, col, val };
        a.validate()?;
        Ok(a)
    }

    pub fn identity(m: usize) -> Self {
        CrsMatrix {
            rows: (0..m).collect(),
            ncols: m,
            ptr: (0..=m).collect(),
            col: (0..m as Index).collect(),
            val: vec![1.0; m],
        }
    }

    /// Builds a matrix from per-row `(col, value)` lists, taken as given.
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut ptr = Vec::with_capacity(rows.len() + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        ptr.push(0);
        for row in rows {
            for &(c, v) in row {
                col.push(c as Index);
                val.push(v);
            }
            ptr.push(col.len());
        }
        Self::new((0..rows.len()).collect(), ncols, ptr, col, val)
    }

    pub fn nrows(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> (&[Index], &[f64]) {
        let r = self.ptr[i]..self.ptr[i + 1];
        (&self.col[r.clone()], &self.val[r])
    }

    pub fn row_mut(&mut self, i: usize) -> (&[Index], &mut [f64]) {
        let r = self.ptr[i]..self.ptr[i + 1];
        (&self.col[r.clone()], &mut self.val[r])
    }

    /// Checks the pointer array, column range and distinct columns per row.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Dimension(msg));
        if self.ptr.is_empty() || self.ptr[0] != 0 {
            return bad("ptr must start at 0".into());
        }
        if self.ptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("ptr must be non-decreasing".into());
        }
        if *self.ptr.last().unwrap() != self.val.len() || self.col.len() != self.val.len() {
            return bad(format!(
                "ptr[m]={} but col/val lengths are {}/{}",
                self.ptr.last().unwrap(),
                self.col.len(),
                self.val.len()
            ));
        }
        if self.rows.len() != self.nrows() {
            return bad(format!("{} row ids for {} rows", self.rows.len(), self.nrows()));
        }
        if let Some(&c) = self.col.iter().find(|&&c| c as usize >= self.ncols) {
            return bad(format!("column {c} out of range for {} columns", self.ncols));
        }
        for i in 0..self.nrows() {
            let mut cols = self.row(i).0.to_vec();
            cols.sort_unstable();
            if cols.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("duplicate column in row {i}"));
            }
        }
        Ok(())
    }

    /// True when every row's columns are strictly increasing.
    pub fn has_sorted_rows(&self) -> bool {
        (0..self.nrows()).all(|i| self.row(i).0.windows(2).all(|w| w[0] < w[1]))
    }

    pub fn get(&self, i: usize, c: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.iter().position(|&k| k as usize == c).map(|k| vals[k])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows()];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c as usize] = v;
            }
        }
        d
    }

    pub(crate) fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() < self.ncols || y.len() != self.nrows() {
            return Err(Error::Dimension(format!(
                "SpMV with {}x{} matrix, x of length {}, y of length {}",
                self.nrows(),
                self.ncols,
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    /// `y = A x`, uninstrumented.
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_dims(x, y)?;
        self.kernel(x, y, &mut NoProbe);
        Ok(())
    }

    /// `y = A x`, returning the operation counts of this call.
    pub fn spmv_counted(&self, x: &[f64], y: &mut [f64]) -> Result<OpCounters> {
        self.check_dims(x, y)?;
        let mut c = OpCounters::default();
        self.kernel(x, y, &mut c);
        Ok(c)
    }

    #[inline(always)]
    fn kernel<P: Probe>(&self, x: &[f64], y: &mut [f64], probe: &mut P) {
        y.fill(0.0);
        let mut start = self.ptr[0];
        probe.load(1);
        for (i, yi) in y.iter_mut().enumerate() {
            let end = self.ptr[i + 1];
            probe.load(1);
            let mut acc = *yi;
            probe.load(1);
            for (v, &c) in self.val[start..end].iter().zip(&self.col[start..end]) {
                acc += v * x[c as usize];
            }
            let n = (end - start) as u64;
            probe.load(3 * n);
            probe.flop(2 * n);
            *yi = acc;
            start = end;
        }
    }
}

/// Convenience wrapper returning a fresh output vector and the counts.
pub fn spmv_crs(a: &CrsMatrix, x: &[f64]) -> Result<(Vec<f64>, OpCounters)> {
    let mut y = vec![0.0; a.nrows()];
    let c = a.spmv_counted(x, &mut y)?;
    Ok((y, c))
}
