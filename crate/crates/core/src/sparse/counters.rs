use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Hook the SpMV kernels call on every indexed array read and arithmetic op.
///
/// [`NoProbe`] compiles to nothing, so the benchmark path and the counted
/// path share a single kernel body.
pub trait Probe {
    fn load(&mut self, n: u64);
    fn flop(&mut self, n: u64);
}

/// Probe that records nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoProbe;

impl Probe for NoProbe {
    #[inline(always)]
    fn load(&mut self, _: u64) {}
    #[inline(always)]
    fn flop(&mut self, _: u64) {}
}

/// Floating-point operations and indexed array reads of one or more SpMV calls.
///
/// A multiply-add counts as two flops; each BCRS segment costs one more.
/// Loads count reads of `val`, `col`/`jas`/`offsets`, `x`, `ptr`, plus one
/// access to `y` per row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpCounters {
    pub flops: u64,
    pub loads: u64,
}

impl Probe for OpCounters {
    #[inline(always)]
    fn load(&mut self, n: u64) {
        self.loads += n;
    }
    #[inline(always)]
    fn flop(&mut self, n: u64) {
        self.flops += n;
    }
}

impl Add for OpCounters {
    type Output = OpCounters;
    fn add(self, rhs: OpCounters) -> OpCounters {
        OpCounters { flops: self.flops + rhs.flops, loads: self.loads + rhs.loads }
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: OpCounters) {
        self.flops += rhs.flops;
        self.loads += rhs.loads;
    }
}

impl std::iter::Sum for OpCounters {
    fn sum<I: Iterator<Item = OpCounters>>(iter: I) -> OpCounters {
        iter.fold(OpCounters::default(), Add::add)
    }
}
