use crate::error::{Error, Result};

use super::bcrs::BcrsMatrix;
use super::crs::CrsMatrix;

/// Storage bytes of a sparse format for given index and value widths.
pub trait StorageFootprint {
    fn footprint_bytes(&self, index_width: usize, value_width: usize) -> Result<u64>;
}

fn check_widths(index_width: usize, value_width: usize) -> Result<()> {
    for w in [index_width, value_width] {
        if w != 4 && w != 8 {
            return Err(Error::Config(format!("byte width must be 4 or 8, got {w}")));
        }
    }
    Ok(())
}

impl StorageFootprint for CrsMatrix {
    /// `nnz*value + nnz*index + (m+1)*index`
    fn footprint_bytes(&self, index_width: usize, value_width: usize) -> Result<u64> {
        check_widths(index_width, value_width)?;
        let (nnz, m) = (self.nnz() as u64, self.nrows() as u64);
        let (iw, vw) = (index_width as u64, value_width as u64);
        Ok(nnz * vw + nnz * iw + (m + 1) * iw)
    }
}

impl StorageFootprint for BcrsMatrix {
    /// `nnz*value + nns*index + (nns+1)*index + (m+1)*index`
    fn footprint_bytes(&self, index_width: usize, value_width: usize) -> Result<u64> {
        check_widths(index_width, value_width)?;
        let (nnz, nns, m) = (self.nnz() as u64, self.nns() as u64, self.nrows() as u64);
        let (iw, vw) = (index_width as u64, value_width as u64);
        Ok(nnz * vw + nns * iw + (nns + 1) * iw + (m + 1) * iw)
    }
}

pub fn memory_footprint<M: StorageFootprint>(
    a: &M,
    index_width: usize,
    value_width: usize,
) -> Result<u64> {
    a.footprint_bytes(index_width, value_width)
}
