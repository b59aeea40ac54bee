use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::comm::Collectives;
use crate::domain::BoxDims;
use crate::error::{Error, Result};
use crate::solver::CgConfig;
use crate::sparse::Kernel;
use crate::verify::SeriesParams;

/// Storage format used for the CG phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Crs,
    Bcrs,
    BcrsUnrolled,
    /// Run the CG phase once per kernel on the same assembled system.
    CompareAll,
}

impl Format {
    pub fn kernels(self) -> Vec<Kernel> {
        match self {
            Format::Crs => vec![Kernel::Crs],
            Format::Bcrs => vec![Kernel::Bcrs],
            Format::BcrsUnrolled => vec![Kernel::BcrsUnrolled],
            Format::CompareAll => Kernel::ALL.to_vec(),
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compare-all" => Ok(Format::CompareAll),
            other => match other.parse::<Kernel>()? {
                Kernel::Crs => Ok(Format::Crs),
                Kernel::Bcrs => Ok(Format::Bcrs),
                Kernel::BcrsUnrolled => Ok(Format::BcrsUnrolled),
            },
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Crs => "crs",
            Format::Bcrs => "bcrs",
            Format::BcrsUnrolled => "bcrs-unrolled",
            Format::CompareAll => "compare-all",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub ranks: usize,
    pub format: Format,
    pub collectives: Collectives,
    pub cg: CgConfig,
    /// Number of times the CG phase is repeated on the assembled system.
    pub reps: usize,
    pub report: Option<PathBuf>,
    pub dump_matrix: Option<PathBuf>,
    /// Seed of the random vector used for the kernel cross-check.
    pub seed: u64,
    pub series: SeriesParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nx: 100,
            ny: 100,
            nz: 100,
            ranks: 1,
            format: Format::Crs,
            collectives: Collectives::AllCollectives,
            cg: CgConfig::default(),
            reps: 1,
            report: None,
            dump_matrix: None,
            seed: 0x5eed,
            series: SeriesParams::default(),
        }
    }
}

impl RunConfig {
    /// Convenience for tests and small runs.
    pub fn small(n: usize, ranks: usize, format: Format) -> Self {
        RunConfig { nx: n, ny: n, nz: n, ranks, format, ..RunConfig::default() }
    }

    pub fn dims(&self) -> Result<BoxDims> {
        BoxDims::new(self.nx, self.ny, self.nz)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims()?;
        if self.ranks == 0 {
            return Err(Error::Config("rank count must be positive".into()));
        }
        if self.ranks > dims.num_elements() {
            return Err(Error::Config(format!(
                "{} ranks exceed the {} elements of the mesh",
                self.ranks,
                dims.num_elements()
            )));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        self.cg.validate()?;
        self.series.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_formats() {
        assert_eq!("compare-all".parse::<Format>().unwrap(), Format::CompareAll);
        assert_eq!("bcrs-unrolled".parse::<Format>().unwrap(), Format::BcrsUnrolled);
        assert!("ell".parse::<Format>().is_err());
        assert_eq!(Format::CompareAll.kernels().len(), 3);
    }

    #[test]
    fn validation() {
        assert!(RunConfig::small(2, 9, Format::Crs).validate().is_err());
        assert!(RunConfig::small(2, 8, Format::Crs).validate().is_ok());
        assert!(RunConfig { reps: 0, ..RunConfig::small(2, 1, Format::Crs) }.validate().is_err());
        assert!(RunConfig { nx: 0, ..RunConfig::small(2, 1, Format::Crs) }.validate().is_err());
    }
}
