//! Sparse storage (CRS and segment-blocked BCRS), pattern generation, the
//! three SpMV kernels and their operation counters.

mod bcrs;
mod counters;
mod crs;
mod footprint;
mod mmio;
mod structure;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bcrs::{crs_to_bcrs, segment_histogram, spmv_bcrs, spmv_bcrs_unrolled, BcrsMatrix};
pub use counters::{NoProbe, OpCounters, Probe};
pub use crs::{spmv_crs, CrsMatrix, Index};
pub use footprint::{memory_footprint, StorageFootprint};
pub use mmio::{read_matrix_market, write_matrix_market, Coordinates};
pub use structure::generate_structure;

/// SpMV kernel selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Crs,
    Bcrs,
    BcrsUnrolled,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Crs, Kernel::Bcrs, Kernel::BcrsUnrolled];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Crs => "crs",
            Kernel::Bcrs => "bcrs",
            Kernel::BcrsUnrolled => "bcrs-unrolled",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown kernel '{s}'")))
    }
}

/// A local matrix in the storage the selected kernel needs. The CRS
/// variant borrows the assembled matrix unless built with [`Self::owned`].
#[derive(Clone, Debug)]
pub enum MatvecOperator<'a> {
    Crs(Cow<'a, CrsMatrix>),
    Bcrs { matrix: BcrsMatrix, unrolled: bool },
}

impl<'a> MatvecOperator<'a> {
    pub fn new(a: &'a CrsMatrix, kernel: Kernel) -> Self {
        match kernel {
            Kernel::Crs => MatvecOperator::Crs(Cow::Borrowed(a)),
            Kernel::Bcrs => MatvecOperator::Bcrs { matrix: crs_to_bcrs(a), unrolled: false },
            Kernel::BcrsUnrolled => MatvecOperator::Bcrs { matrix: crs_to_bcrs(a), unrolled: true },
        }
    }

    pub fn owned(a: CrsMatrix, kernel: Kernel) -> MatvecOperator<'static> {
        match kernel {
            Kernel::Crs => MatvecOperator::Crs(Cow::Owned(a)),
            Kernel::Bcrs => MatvecOperator::Bcrs { matrix: crs_to_bcrs(&a), unrolled: false },
            Kernel::BcrsUnrolled => MatvecOperator::Bcrs { matrix: crs_to_bcrs(&a), unrolled: true },
        }
    }

    pub fn kernel(&self) -> Kernel {
        match self {
            MatvecOperator::Crs(_) => Kernel::Crs,
            MatvecOperator::Bcrs { unrolled: false, .. } => Kernel::Bcrs,
            MatvecOperator::Bcrs { unrolled: true, .. } => Kernel::BcrsUnrolled,
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            MatvecOperator::Crs(a) => a.nrows(),
            MatvecOperator::Bcrs { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            MatvecOperator::Crs(a) => a.ncols,
            MatvecOperator::Bcrs { matrix, .. } => matrix.ncols,
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        match self {
            MatvecOperator::Crs(a) => a.spmv(x, y),
            MatvecOperator::Bcrs { matrix, unrolled: false } => matrix.spmv(x, y),
            MatvecOperator::Bcrs { matrix, unrolled: true } => matrix.spmv_unrolled(x, y),
        }
    }

    pub fn apply_counted(&self, x: &[f64], y: &mut [f64]) -> Result<OpCounters> {
        match self {
            MatvecOperator::Crs(a) => a.spmv_counted(x, y),
            MatvecOperator::Bcrs { matrix, unrolled: false } => matrix.spmv_counted(x, y),
            MatvecOperator::Bcrs { matrix, unrolled: true } => matrix.spmv_unrolled_counted(x, y),
        }
    }
}
