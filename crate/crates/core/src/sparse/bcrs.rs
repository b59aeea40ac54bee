use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::counters::{NoProbe, OpCounters, Probe};
use super::crs::{CrsMatrix, Index};

/// Segment-blocked row storage with `1 x n` blocks of variable length.
///
/// Each row is a sequence of non-zero segments: maximal runs of entries
/// whose local columns are consecutive. `jas[s]` is the first column of
/// segment `s`, `offsets[s]..offsets[s + 1]` its range in `val`, and
/// `ptr[i]..ptr[i + 1]` the segments of row `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BcrsMatrix {
    pub rows: Vec<usize>,
    pub ncols: usize,
    pub ptr: Vec<usize>,
    pub jas: Vec<Index>,
    pub offsets: Vec<usize>,
    pub val: Vec<f64>,
}

impl BcrsMatrix {
    /// Converts CRS to BCRS. Values keep their order, so both formats
    /// traverse every row identically.
    pub fn from_crs(a: &CrsMatrix) -> Self {
        let m = a.nrows();
        let mut ptr = Vec::with_capacity(m + 1);
        let mut jas = Vec::with_capacity(a.nnz() / 2 + 1);
        let mut offsets = Vec::with_capacity(a.nnz() / 2 + 2);
        ptr.push(0);
        for i in 0..m {
            let start = a.ptr[i];
            let cols = a.row(i).0;
            for (k, &c) in cols.iter().enumerate() {
                if k == 0 || c != cols[k - 1].wrapping_add(1) {
                    jas.push(c);
                    offsets.push(start + k);
                }
            }
            ptr.push(jas.len());
        }
        offsets.push(a.nnz());
        BcrsMatrix {
            rows: a.rows.clone(),
            ncols: a.ncols,
            ptr,
            jas,
            offsets,
            val: a.val.clone(),
        }
    }

    /// Expands segments back to one column index per entry.
    pub fn to_crs(&self) -> CrsMatrix {
        let mut col = Vec::with_capacity(self.nnz());
        let mut ptr = Vec::with_capacity(self.nrows() + 1);
        ptr.push(0);
        for i in 0..self.nrows() {
            for s in self.ptr[i]..self.ptr[i + 1] {
                let len = self.offsets[s + 1] - self.offsets[s];
                col.extend((0..len as Index).map(|k| self.jas[s] + k));
            }
            ptr.push(col.len());
        }
        CrsMatrix {
            rows: self.rows.clone(),
            ncols: self.ncols,
            ptr,
            col,
            val: self.val.clone(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn nns(&self) -> usize {
        self.jas.len()
    }

    pub fn segment_len(&self, s: usize) -> usize {
        self.offsets[s + 1] - self.offsets[s]
    }

    /// Checks pointer arrays, positive segment lengths and that no two
    /// neighbouring segments of a row could be merged.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Dimension(format!("BCRS: {msg}")));
        let nns = self.nns();
        if self.offsets.len() != nns + 1 || self.offsets[0] != 0 || self.offsets[nns] != self.nnz() {
            return bad("offsets must have nns+1 entries from 0 to nnz");
        }
        if self.offsets.windows(2).any(|w| w[0] >= w[1]) {
            return bad("offsets must be strictly increasing");
        }
        if self.ptr[0] != 0 || *self.ptr.last().unwrap() != nns {
            return bad("ptr must run from 0 to nns");
        }
        if self.ptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("ptr must be non-decreasing");
        }
        for i in 0..self.nrows() {
            for s in self.ptr[i]..self.ptr[i + 1] {
                let end = self.jas[s] as usize + self.segment_len(s);
                if end > self.ncols {
                    return bad("segment runs past the last column");
                }
                if s + 1 < self.ptr[i + 1] && end == self.jas[s + 1] as usize {
                    return bad("adjacent segments are mergeable");
                }
            }
        }
        Ok(())
    }

    /// Count of segments per length.
    pub fn segment_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for w in self.offsets.windows(2) {
            *h.entry(w[1] - w[0]).or_insert(0) += 1;
        }
        h
    }

    fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
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

    pub fn spmv(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_dims(x, y)?;
        self.kernel(x, y, &mut NoProbe);
        Ok(())
    }

    pub fn spmv_counted(&self, x: &[f64], y: &mut [f64]) -> Result<OpCounters> {
        self.check_dims(x, y)?;
        let mut c = OpCounters::default();
        self.kernel(x, y, &mut c);
        Ok(c)
    }

    pub fn spmv_unrolled(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_dims(x, y)?;
        self.kernel_unrolled(x, y, &mut NoProbe);
        Ok(())
    }

    pub fn spmv_unrolled_counted(&self, x: &[f64], y: &mut [f64]) -> Result<OpCounters> {
        self.check_dims(x, y)?;
        let mut c = OpCounters::default();
        self.kernel_unrolled(x, y, &mut c);
        Ok(c)
    }

    #[inline(always)]
    fn kernel<P: Probe>(&self, x: &[f64], y: &mut [f64], probe: &mut P) {
        let mut k = self.offsets[0];
        let mut seg = self.ptr[0];
        probe.load(2);
        for (i, yi) in y.iter_mut().enumerate() {
            let seg_end = self.ptr[i + 1];
            probe.load(1);
            let mut sum = 0.0;
            for s in seg..seg_end {
                let c = self.jas[s] as usize;
                let end = self.offsets[s + 1];
                let len = end - k;
                for (v, xv) in self.val[k..end].iter().zip(&x[c..c + len]) {
                    sum += v * xv;
                }
                probe.load(2 + 2 * len as u64);
                probe.flop(1 + 2 * len as u64);
                k = end;
            }
            *yi = sum;
            probe.load(1);
            seg = seg_end;
        }
    }

    /// Same traversal as [`BcrsMatrix::spmv`] with the inner loop replaced
    /// by a branch on segment length, length 3 tested first.
    #[inline(always)]
    fn kernel_unrolled<P: Probe>(&self, x: &[f64], y: &mut [f64], probe: &mut P) {
        let mut k = self.offsets[0];
        let mut seg = self.ptr[0];
        probe.load(2);
        for (i, yi) in y.iter_mut().enumerate() {
            let seg_end = self.ptr[i + 1];
            probe.load(1);
            let mut sum = 0.0;
            for s in seg..seg_end {
                let c = self.jas[s] as usize;
                let end = self.offsets[s + 1];
                let len = end - k;
                let v = &self.val[k..end];
                let xs = &x[c..c + len];
                match len {
                    3 => {
                        sum += v[0] * xs[0];
                        sum += v[1] * xs[1];
                        sum += v[2] * xs[2];
                    }
                    1 => {
                        sum += v[0] * xs[0];
                    }
                    2 => {
                        sum += v[0] * xs[0];
                        sum += v[1] * xs[1];
                    }
                    4 => {
                        sum += v[0] * xs[0];
                        sum += v[1] * xs[1];
                        sum += v[2] * xs[2];
                        sum += v[3] * xs[3];
                    }
                    _ => {
                        for (a, b) in v.iter().zip(xs) {
                            sum += a * b;
                        }
                    }
                }
                probe.load(2 + 2 * len as u64);
                probe.flop(1 + 2 * len as u64);
                k = end;
            }
            *yi = sum;
            probe.load(1);
            seg = seg_end;
        }
    }
}

pub fn crs_to_bcrs(a: &CrsMatrix) -> BcrsMatrix {
    BcrsMatrix::from_crs(a)
}

pub fn spmv_bcrs(a: &BcrsMatrix, x: &[f64]) -> Result<(Vec<f64>, OpCounters)> {
    let mut y = vec![0.0; a.nrows()];
    let c = a.spmv_counted(x, &mut y)?;
    Ok((y, c))
}

pub fn spmv_bcrs_unrolled(a: &BcrsMatrix, x: &[f64]) -> Result<(Vec<f64>, OpCounters)> {
    let mut y = vec![0.0; a.nrows()];
    let c = a.spmv_unrolled_counted(x, &mut y)?;
    Ok((y, c))
}

pub fn segment_histogram(a: &BcrsMatrix) -> BTreeMap<usize, usize> {
    a.segment_histogram()
}
